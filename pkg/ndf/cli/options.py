"""
Shared command options: surface specs and package loading.
"""
import logging

import click

from ndf.errors import UsageError
from ndf.mesh import load_mesh, read_points
from ndf.surfaces import GridSdf, MeshSdf, OrientedPointCloud, Surface, make_analytic

logger = logging.getLogger(__name__)

INPUT_FILE = click.Path(exists=True, dir_okay=False)

_SURFACE_OPTIONS = [
    click.option('--sdf', type=click.Choice(['sphere', 'torus', 'box']), default=None, help='Analytic SDF.'),
    click.option('--grid', type=INPUT_FILE, default=None, help='Sampled SDF grid file.'),
    click.option('--mesh', type=INPUT_FILE, default=None, help='Mesh used through its winding-number SDF.'),
    click.option('--cloud', type=INPUT_FILE, default=None, help='Oriented point cloud (.ply, or .xyz with normals).'),
]


def surface_options(fn):
    """--sdf / --grid / --mesh / --cloud; exactly one is required."""
    for option in reversed(_SURFACE_OPTIONS):
        fn = option(fn)
    return fn


def resolve_surface(sdf=None, grid=None, mesh=None, cloud=None) -> Surface:
    given = [name for name, value in (('sdf', sdf), ('grid', grid), ('mesh', mesh), ('cloud', cloud)) if value]
    if len(given) != 1:
        raise UsageError("Give exactly one of --sdf, --grid, --mesh, --cloud")
    if sdf:
        return make_analytic(sdf)
    if grid:
        return GridSdf.load(grid)
    if mesh:
        return MeshSdf(load_mesh(mesh))
    points, normals = read_points(cloud)
    if normals is None:
        raise UsageError(f"Point cloud {cloud} has no normals")
    return OrientedPointCloud(points, normals)


def output_scale(transform, normalized: bool) -> float:
    """Factor from output units to the normalized frame."""
    return 1.0 if normalized else transform.scale
