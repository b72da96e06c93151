import numpy as np
import pytest

from ndf.errors import DegenerateFaceError, MeshError, NonManifoldError
from ndf.mesh import HalfedgeMesh, SurfacePoint, SurfacePoints, largest_component, odt_energy, sample_uniform


def test_tetrahedron_counts(tetrahedron):
    assert (tetrahedron.n_vertices, tetrahedron.n_edges, tetrahedron.n_faces) == (4, 6, 4)
    assert tetrahedron.euler_characteristic == 2
    assert tetrahedron.genus == 0
    assert tetrahedron.signed_volume == pytest.approx(8.0 / 3.0)


def test_icosphere_counts(icosphere):
    assert icosphere.n_vertices == 162
    assert icosphere.n_faces == 320
    assert icosphere.genus == 0
    assert icosphere.n_components == 1


def test_torus_genus(torus_mesh):
    assert torus_mesh.euler_characteristic == 0
    assert torus_mesh.genus == 1
    assert torus_mesh.signed_volume > 0


def test_every_halfedge_has_an_opposite_twin(icosphere):
    twin = icosphere.he_twin
    assert np.array_equal(twin[twin], np.arange(icosphere.n_halfedges))
    tail = icosphere.faces.reshape(-1)
    head = icosphere.faces[:, [1, 2, 0]].reshape(-1)
    assert np.array_equal(tail[twin], head)


def test_vertex_neighbors_form_a_ring(icosphere):
    ring = icosphere.vertex_neighbors(0)
    incident = icosphere.edges[(icosphere.edges == 0).any(axis=1)]
    assert len(ring) == 5
    assert set(ring) == set(incident.reshape(-1).tolist()) - {0}


def test_index_out_of_range():
    with pytest.raises(MeshError):
        HalfedgeMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 3]])


def test_repeated_vertex_is_degenerate(tetrahedron):
    faces = tetrahedron.faces.copy()
    faces[0] = [0, 0, 1]
    with pytest.raises(DegenerateFaceError):
        HalfedgeMesh(tetrahedron.vertices, faces)


def test_boundary_edge_is_rejected(tetrahedron):
    with pytest.raises(NonManifoldError):
        HalfedgeMesh(tetrahedron.vertices, tetrahedron.faces[:3])


def test_flipped_face_is_rejected(tetrahedron):
    faces = tetrahedron.faces.copy()
    faces[0] = faces[0][::-1]
    with pytest.raises(NonManifoldError):
        HalfedgeMesh(tetrahedron.vertices, faces)


def test_unreferenced_vertex_is_rejected(tetrahedron):
    vertices = np.vstack([tetrahedron.vertices, [[5.0, 5.0, 5.0]]])
    with pytest.raises(NonManifoldError):
        HalfedgeMesh(vertices, tetrahedron.faces)


def test_pinched_vertex_is_rejected(tetrahedron):
    # two tetrahedra sharing only vertex 0
    V = np.vstack([tetrahedron.vertices, 2.0 * tetrahedron.vertices[0] - tetrahedron.vertices[1:]])
    F = np.vstack([tetrahedron.faces, np.where(tetrahedron.faces == 0, 0, tetrahedron.faces + 3)[:, ::-1]])
    with pytest.raises(NonManifoldError, match='disk'):
        HalfedgeMesh(V, F)


def test_zero_area_face_only_rejected_on_request(tetrahedron):
    V = tetrahedron.vertices.copy()
    V[3] = (V[0] + V[1]) / 2.0
    HalfedgeMesh(V, tetrahedron.faces)
    with pytest.raises(DegenerateFaceError):
        HalfedgeMesh(V, tetrahedron.faces, check_area=True)


def test_surface_point_validates_barycentrics():
    SurfacePoint(0, [0.2, 0.3, 0.5])
    with pytest.raises(MeshError):
        SurfacePoint(0, [0.5, 0.6, 0.1])
    with pytest.raises(MeshError):
        SurfacePoint(0, [-0.1, 0.6, 0.5])


def test_surface_points_validate_face_range(icosphere):
    points = SurfacePoints([icosphere.n_faces], [[1.0, 0.0, 0.0]])
    with pytest.raises(MeshError):
        points.validate(icosphere)


def test_vertex_points_embed_to_vertices(icosphere):
    assert np.allclose(icosphere.embed(icosphere.vertex_points()), icosphere.vertices)


def test_sample_uniform_is_deterministic(icosphere):
    a = sample_uniform(icosphere, 100, seed=3)
    b = sample_uniform(icosphere, 100, seed=3)
    assert np.array_equal(a.faces, b.faces)
    assert np.array_equal(a.bary, b.bary)
    a.validate(icosphere)
    with pytest.raises(MeshError):
        sample_uniform(icosphere, 0)


def test_largest_component_keeps_bigger_part(tetrahedron, icosphere):
    V = np.vstack([icosphere.vertices, 0.1 * tetrahedron.vertices + 5.0])
    F = np.vstack([icosphere.faces, tetrahedron.faces + icosphere.n_vertices])
    both = HalfedgeMesh(V, F)
    assert both.n_components == 2
    kept = largest_component(both)
    assert kept.n_faces == icosphere.n_faces
    assert np.allclose(kept.vertices, icosphere.vertices)


def test_odt_energy_scales_quartically(icosphere):
    e = odt_energy(icosphere.vertices, icosphere.faces)
    assert e > 0
    assert odt_energy(2.0 * icosphere.vertices, icosphere.faces) == pytest.approx(16.0 * e)


def test_with_vertices_keeps_connectivity(icosphere):
    scaled = icosphere.with_vertices(2.0 * icosphere.vertices)
    assert scaled.n_edges == icosphere.n_edges
    assert scaled.total_area == pytest.approx(4.0 * icosphere.total_area)
