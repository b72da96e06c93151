from ndf.mesh.halfedge import HalfedgeMesh, SurfacePoint, SurfacePoints, face_components
from ndf.mesh.geometry import (barycentric_gradients, closest_point_on_triangles, face_frames,
                               frame_at, largest_component, odt_energy, sample_uniform)
from ndf.mesh.bvh import Bvh, brute_force_closest_point, closest_point
from ndf.mesh.io import load_mesh, read_points, save_mesh, write_points
from ndf.mesh.editable import EditableMesh
from ndf.mesh.intrinsic import IntrinsicTriangulation, corner_cotangents, triangle_areas

__all__ = [
    'HalfedgeMesh', 'SurfacePoint', 'SurfacePoints', 'face_components',
    'barycentric_gradients', 'closest_point_on_triangles', 'face_frames', 'frame_at',
    'largest_component', 'odt_energy', 'sample_uniform',
    'Bvh', 'brute_force_closest_point', 'closest_point',
    'load_mesh', 'read_points', 'save_mesh', 'write_points',
    'EditableMesh', 'IntrinsicTriangulation', 'corner_cotangents', 'triangle_areas',
]
