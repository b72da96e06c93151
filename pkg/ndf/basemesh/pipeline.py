"""
Server-side base mesh extraction: marching cubes, largest component,
decimation, normalization.
"""
import logging
from typing import Tuple

import numpy as np

from ndf.basemesh.marching_cubes import marching_cubes
from ndf.basemesh.qem import qem_decimate
from ndf.basemesh.transform import NormalizationTransform
from ndf.mesh.geometry import largest_component
from ndf.mesh.halfedge import HalfedgeMesh
from ndf.surfaces.base import Surface
from ndf.surfaces.normalized import NormalizedSurface
from ndf.utils.logging import log_stage

logger = logging.getLogger(__name__)


def normalize_mesh(mesh: HalfedgeMesh) -> Tuple[HalfedgeMesh, NormalizationTransform]:
    """Fit the mesh into [-1.5, 1.5]^3. Positions are rounded to float32 so
    the packaged base mesh is the exact mesh that was trained on."""
    transform = NormalizationTransform.fit(mesh.vertices)
    vertices = transform.apply(mesh.vertices).astype(np.float32).astype(np.float64)
    return HalfedgeMesh(vertices, mesh.faces), transform


def extract_base_mesh(surface: Surface, resolution: int = 128,
                      target_faces: int = 2000) -> Tuple[HalfedgeMesh, NormalizationTransform]:
    with log_stage('basemesh'):
        mesh = marching_cubes(surface, resolution)
        mesh = largest_component(mesh)
        mesh = qem_decimate(mesh, target_faces)
        base, transform = normalize_mesh(mesh)
        logger.info(f"Base mesh: V={base.n_vertices} F={base.n_faces} genus={base.genus} "
                    f"scale={transform.scale:.6g}")
    return base, transform


def normalized_problem(surface: Surface, resolution: int = 128, target_faces: int = 2000):
    """(base mesh, transform, surface in the normalized frame)."""
    base, transform = extract_base_mesh(surface, resolution, target_faces)
    return base, transform, NormalizedSurface(surface, transform)
