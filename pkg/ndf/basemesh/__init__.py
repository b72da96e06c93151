from ndf.basemesh.transform import NORMALIZED_BOUND, NormalizationTransform
from ndf.basemesh.marching_cubes import grid_layout, marching_cubes, marching_cubes_grid
from ndf.basemesh.qem import qem_decimate
from ndf.basemesh.pipeline import extract_base_mesh, normalize_mesh, normalized_problem

__all__ = [
    'NORMALIZED_BOUND', 'NormalizationTransform', 'grid_layout', 'marching_cubes',
    'marching_cubes_grid', 'qem_decimate', 'extract_base_mesh', 'normalize_mesh',
    'normalized_problem',
]
