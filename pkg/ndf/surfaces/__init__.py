from ndf.surfaces.base import ProjectionResult, Surface, newton_project
from ndf.surfaces.analytic import AnalyticSdf, Box, SmoothUnion, Sphere, Torus, make_analytic
from ndf.surfaces.grid import GridSdf
from ndf.surfaces.mesh_sdf import MeshSdf, triangle_winding_number
from ndf.surfaces.point_cloud import OrientedPointCloud
from ndf.surfaces.normalized import NormalizedSurface

__all__ = [
    'ProjectionResult', 'Surface', 'newton_project',
    'AnalyticSdf', 'Box', 'SmoothUnion', 'Sphere', 'Torus', 'make_analytic',
    'GridSdf', 'MeshSdf', 'triangle_winding_number', 'OrientedPointCloud', 'NormalizedSurface',
]
