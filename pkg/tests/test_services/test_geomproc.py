import numpy as np
import pandas as pd
import pytest
import scipy.sparse as sp

from ndf.errors import DecompositionError, UsageError
from ndf.services import geomproc
from ndf.services.geomproc import (Factorization, SparseSymmetricSystem, closest_vertex, cotan_laplacian,
                                   evaluate_tasks, heat_geodesic, relative_eigen_errors, smallest_eigenpairs,
                                   write_eigenvalues, write_vertex_values)
from ndf.services.remesh import ExtractedMesh


@pytest.fixture
def fine_icosphere(make_icosphere):
    return make_icosphere(3)


def test_laplacian_structure(icosphere):
    L, M = cotan_laplacian(icosphere)
    assert L.dimension == icosphere.n_vertices
    assert np.allclose(L.row_sums(), 0.0, atol=1e-10)
    assert M.sum() == pytest.approx(icosphere.total_area)
    assert L.min_off_diagonal_weight() > 0
    x = np.random.default_rng(0).normal(size=icosphere.n_vertices)
    assert x @ L.dot(x) >= 0


def test_system_validation():
    with pytest.raises(UsageError):
        SparseSymmetricSystem(sp.csr_matrix(np.ones((2, 3))))
    with pytest.raises(DecompositionError):
        SparseSymmetricSystem(sp.csr_matrix(np.array([[1.0, 2.0], [0.0, 1.0]])))


def test_factorization_solves(icosphere):
    L, M = cotan_laplacian(icosphere)
    factors = L.factorization(M, 1.0)
    assert factors.direct
    b = np.arange(icosphere.n_vertices, dtype=np.float64)
    x = factors.solve(b)
    assert np.allclose(L.dot(x) + M * x, b)
    assert L.factorization(M, 1.0) is factors
    stacked = Factorization(sp.identity(3) * 2.0).solve(np.ones((3, 2)))
    assert np.allclose(stacked, 0.5)


def test_sphere_spectrum(icosphere):
    L, M = cotan_laplacian(icosphere)
    evals, evecs = smallest_eigenpairs(L, M, k=9)
    assert evals[0] == pytest.approx(0.0, abs=1e-8)
    assert np.allclose(evals[1:4], 2.0, rtol=0.05)
    assert np.allclose(evals[4:9], 6.0, rtol=0.1)
    assert np.allclose(evecs.T @ (M[:, None] * evecs), np.eye(9), atol=1e-8)


def test_shift_invert_matches_dense(icosphere, monkeypatch):
    L, M = cotan_laplacian(icosphere)
    dense, _ = smallest_eigenpairs(L, M, k=6)
    monkeypatch.setattr(geomproc, 'DENSE_EIGEN_LIMIT', 0)
    sparse, vectors = smallest_eigenpairs(L, M, k=6)
    assert np.allclose(sparse, dense, rtol=1e-6, atol=1e-9)
    pivot = np.abs(vectors).argmax(axis=0)
    assert np.all(vectors[pivot, np.arange(6)] > 0)


def test_eigen_argument_errors(icosphere):
    L, M = cotan_laplacian(icosphere)
    with pytest.raises(UsageError):
        smallest_eigenpairs(L, M, k=0)
    with pytest.raises(UsageError):
        smallest_eigenpairs(L, M, k=icosphere.n_vertices)
    with pytest.raises(UsageError):
        smallest_eigenpairs(L, np.zeros_like(M), k=3)


def test_heat_geodesic_matches_great_circles(fine_icosphere):
    source = closest_vertex(fine_icosphere, [0.0, 0.0, 1.0])
    d = heat_geodesic(fine_icosphere, [source])
    s = fine_icosphere.vertices[source] / np.linalg.norm(fine_icosphere.vertices[source])
    unit = fine_icosphere.vertices / np.linalg.norm(fine_icosphere.vertices, axis=1, keepdims=True)
    truth = np.arccos(np.clip(unit @ s, -1.0, 1.0))
    assert d[source] == pytest.approx(0.0, abs=1e-12)
    assert np.mean(np.abs(d - truth)) < 0.1
    assert d.max() == pytest.approx(np.pi, abs=0.2)


def test_heat_geodesic_sources(icosphere):
    with pytest.raises(UsageError):
        heat_geodesic(icosphere, [])
    with pytest.raises(UsageError):
        heat_geodesic(icosphere, [icosphere.n_vertices])
    assert np.array_equal(heat_geodesic(icosphere, np.arange(icosphere.n_vertices)), np.zeros(icosphere.n_vertices))
    d = heat_geodesic(icosphere, [0, 3])
    assert min(d[0], d[3]) == pytest.approx(0.0, abs=1e-12)


def test_mesh_against_itself_has_no_error(icosphere):
    errors = evaluate_tasks(icosphere, icosphere, k=5)
    assert errors.geodesic_l1 == pytest.approx(0.0, abs=1e-8)
    assert np.allclose(errors.eigenvalue_errors, 0.0, atol=1e-8)
    assert set(errors.as_dict()) == {'geodesic_l1', 'eigen_error'}


def test_finer_mesh_is_closer_to_truth(make_icosphere):
    truth = ExtractedMesh.from_mesh(make_icosphere(3))
    coarse = evaluate_tasks(make_icosphere(1), truth, k=4)
    fine = evaluate_tasks(make_icosphere(2), truth, k=4)
    assert fine.eigenvalue_error < coarse.eigenvalue_error


def test_relative_eigen_errors_near_zero():
    errors = relative_eigen_errors(np.array([1e-9, 2.2]), np.array([0.0, 2.0]))
    assert errors[0] == pytest.approx(1e-9)
    assert errors[1] == pytest.approx(0.1)


def test_value_files(tmp_path):
    write_vertex_values(str(tmp_path / 'd.csv'), np.array([0.0, 0.5]), column='distance')
    write_eigenvalues(str(tmp_path / 'e.csv'), np.array([0.0, 2.0]))
    assert list(pd.read_csv(tmp_path / 'd.csv').columns) == ['vertex', 'distance']
    assert pd.read_csv(tmp_path / 'e.csv')['eigenvalue'].tolist() == [0.0, 2.0]
