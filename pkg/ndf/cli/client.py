"""
Client-side commands: everything that runs from a received .ndf package.
"""
import logging
import os

import click
import numpy as np
import pandas as pd

from ndf.cli.options import INPUT_FILE, output_scale
from ndf.errors import UsageError
from ndf.mesh import load_mesh, save_mesh, write_points
from ndf.services.geomproc import (closest_vertex, cotan_laplacian, evaluate_tasks, heat_geodesic,
                                   smallest_eigenpairs, write_eigenvalues)
from ndf.services.package import read_package
from ndf.services.remesh import (ExtractionParams, extract, long_edge_fraction, write_correspondence)
from ndf.services.sampling import blue_noise, white_noise
from ndf.utils.timing import Timer, echo_results
from ndf.utils.validators import parse_vector

logger = logging.getLogger(__name__)


def _extract_from(ctx, package_path: str, h: float, iterations, normalized: bool):
    """(package, extracted mesh in output units)"""
    cfg = ctx.obj['config']
    package = read_package(package_path)
    h_normalized = h * output_scale(package.transform, normalized)
    params = ExtractionParams(h_normalized, cfg.NDF_EXTRACT_ITERATIONS if iterations is None else iterations,
                              validate_each_pass=cfg.get_feature_flag('debug_validation'))
    mesh = extract(package.field, params)
    if not normalized:
        mesh = mesh.denormalized(package.transform)
    return package, mesh


_normalized_option = click.option('--normalized', is_flag=True,
                                  help='Lengths and positions are in the normalized frame.')


@click.command('extract')
@click.argument('package_path', type=INPUT_FILE)
@click.option('--h', type=float, required=True, help='Target edge length.')
@click.option('--out', type=click.Path(dir_okay=False), required=True, help='Output .obj or .ply.')
@click.option('--iterations', type=int, default=None)
@click.option('--sidecar', type=click.Path(dir_okay=False), default=None,
              help='Correspondence CSV (defaults next to --out).')
@_normalized_option
@click.pass_context
def extract_command(ctx, package_path, h, out, iterations, sidecar, normalized):
    """Extract an adaptive mesh with edge length ~h from the package."""
    with Timer() as timer:
        _, mesh = _extract_from(ctx, package_path, h, iterations, normalized)
        save_mesh(out, mesh.mesh)
        write_correspondence(mesh, sidecar or os.path.splitext(out)[0] + '.corr.csv')
    echo_results({'vertices': mesh.n_vertices, 'faces': mesh.n_faces,
                  'long_edge_fraction': long_edge_fraction(mesh, h), 'wall_ms': timer.ms})


@click.command('geodesic')
@click.argument('package_path', type=INPUT_FILE)
@click.option('--h', type=float, required=True, help='Extraction edge length.')
@click.option('--out', type=click.Path(dir_okay=False), required=True, help='Per-vertex distance CSV.')
@click.option('--source-point', 'source_points', multiple=True, help='x,y,z; the closest vertex is used.')
@click.option('--source-vertex', 'source_vertices', type=int, multiple=True)
@_normalized_option
@click.pass_context
def geodesic_command(ctx, package_path, h, out, source_points, source_vertices, normalized):
    """Heat-method geodesic distance from each source on the extracted mesh."""
    cfg = ctx.obj['config']
    sources = list(source_vertices)
    with Timer() as timer:
        package, mesh = _extract_from(ctx, package_path, h, None, normalized)
        if not sources:
            points = [parse_vector(p) for p in source_points]
            if not points:
                defaults = np.array(cfg.NDF_GEODESIC_SOURCES, dtype=np.float64)
                points = list(defaults if normalized else package.transform.inverse(defaults))
            sources = [closest_vertex(mesh, p) for p in points]
        laplacian = cotan_laplacian(mesh)
        columns = {'vertex': np.arange(mesh.n_vertices)}
        for i, source in enumerate(sources):
            columns[f'source_{i}'] = heat_geodesic(mesh, [source], laplacian)
        frame = pd.DataFrame(columns)
        frame.to_csv(out, index=False, float_format='%.17g')
    echo_results({'vertices': mesh.n_vertices, 'sources': len(sources),
                  'max_distance': float(frame.drop(columns='vertex').to_numpy().max()), 'wall_ms': timer.ms})


@click.command('eigen')
@click.argument('package_path', type=INPUT_FILE)
@click.option('--h', type=float, required=True, help='Extraction edge length.')
@click.option('--k', type=int, default=None, help='Number of eigenpairs.')
@click.option('--out', type=click.Path(dir_okay=False), required=True, help='Eigenvalue CSV.')
@_normalized_option
@click.pass_context
def eigen_command(ctx, package_path, h, k, out, normalized):
    """Smallest Laplace-Beltrami eigenvalues of the extracted mesh."""
    cfg = ctx.obj['config']
    k = cfg.NDF_EIGEN_K if k is None else k
    with Timer() as timer:
        _, mesh = _extract_from(ctx, package_path, h, None, normalized)
        L, M = cotan_laplacian(mesh)
        evals, _ = smallest_eigenpairs(L, M, k, cfg.NDF_EIGEN_SHIFT)
        write_eigenvalues(out, evals)
    echo_results({'vertices': mesh.n_vertices, 'k': len(evals), 'lambda_1': float(evals[1]) if k > 1 else 0.0,
                  'wall_ms': timer.ms})


@click.command('sample')
@click.argument('package_path', type=INPUT_FILE)
@click.option('--n', type=int, default=None, help='White-noise sample count.')
@click.option('--radius', type=float, default=None, help='Blue-noise minimum distance.')
@click.option('--out', type=click.Path(dir_okay=False), required=True, help='Output .ply or .xyz.')
@_normalized_option
@click.pass_context
def sample_command(ctx, package_path, n, radius, out, normalized):
    """White-noise (--n) or blue-noise (--radius) samples on the mapped surface."""
    if (n is None) == (radius is None):
        raise UsageError("Give exactly one of --n or --radius")
    seed = ctx.obj['seed']
    with Timer() as timer:
        package = read_package(package_path)
        if n is not None:
            samples = white_noise(package.field, n, seed)
        else:
            samples = blue_noise(package.field, radius * output_scale(package.transform, normalized), seed)
        normals, _ = package.field.mapped_normal(samples.points)
        positions = samples.positions if normalized else package.transform.inverse(samples.positions)
        write_points(out, positions, normals)
    echo_results({'samples': len(samples), 'wall_ms': timer.ms})


@click.command('eval')
@click.argument('mesh_path', type=INPUT_FILE)
@click.option('--validate', is_flag=True, help='Check manifoldness and report counts.')
@click.option('--truth', type=INPUT_FILE, default=None, help='Ground-truth mesh for task errors.')
@click.option('--k', type=int, default=None, help='Eigenvalues compared against the truth.')
def eval_command(mesh_path, validate, truth, k):
    """Validate a mesh and/or compare it with a ground-truth mesh."""
    if not validate and truth is None:
        raise UsageError("Nothing to do: give --validate and/or --truth")
    with Timer() as timer:
        mesh = load_mesh(mesh_path)
        results = {}
        if validate:
            results.update({'vertices': mesh.n_vertices, 'faces': mesh.n_faces,
                            'genus': mesh.genus, 'manifold': 1})
        if truth is not None:
            kwargs = {} if k is None else {'k': k}
            results.update(evaluate_tasks(mesh, load_mesh(truth), **kwargs).as_dict())
    echo_results({**results, 'wall_ms': timer.ms})
