"""
Mesh and point file I/O: ASCII OBJ, binary little-endian PLY, XYZ.
"""
import logging
import os
from typing import Dict, Optional, Tuple

import numpy as np

from ndf.errors import MeshError
from ndf.mesh.halfedge import HalfedgeMesh

logger = logging.getLogger(__name__)

_PLY_TYPES = {
    'char': 'i1', 'int8': 'i1', 'uchar': 'u1', 'uint8': 'u1',
    'short': 'i2', 'int16': 'i2', 'ushort': 'u2', 'uint16': 'u2',
    'int': 'i4', 'int32': 'i4', 'uint': 'u4', 'uint32': 'u4',
    'float': 'f4', 'float32': 'f4', 'double': 'f8', 'float64': 'f8',
}


def load_mesh(path: str) -> HalfedgeMesh:
    """Read an OBJ or binary PLY triangle mesh and validate it."""
    ext = os.path.splitext(path)[1].lower()
    if ext == '.obj':
        vertices, faces = read_obj(path)
    elif ext == '.ply':
        props, faces = read_ply(path)
        if faces is None:
            raise MeshError(f"{path} has no face element")
        vertices = np.stack([props['x'], props['y'], props['z']], axis=1)
    else:
        raise MeshError(f"Unsupported mesh format: {path}")
    mesh = HalfedgeMesh(vertices, faces, check_area=True)
    logger.info(f"Loaded {path}: V={mesh.n_vertices} F={mesh.n_faces}")
    return mesh


def save_mesh(path: str, mesh: HalfedgeMesh, vertex_data: Optional[Dict[str, np.ndarray]] = None) -> None:
    ext = os.path.splitext(path)[1].lower()
    if ext == '.obj':
        write_obj(path, mesh.vertices, mesh.faces)
    elif ext == '.ply':
        write_ply(path, mesh.vertices, mesh.faces, vertex_data)
    else:
        raise MeshError(f"Unsupported mesh format: {path}")


def read_obj(path: str) -> Tuple[np.ndarray, np.ndarray]:
    vertices, faces = [], []
    try:
        with open(path) as f:
            for lineno, line in enumerate(f, 1):
                parts = line.split()
                if not parts:
                    continue
                if parts[0] == 'v':
                    vertices.append([float(x) for x in parts[1:4]])
                elif parts[0] == 'f':
                    if len(parts) != 4:
                        raise MeshError(f"{path}:{lineno}: non-triangle face with {len(parts) - 1} vertices")
                    idx = [int(p.split('/')[0]) for p in parts[1:]]
                    faces.append([i - 1 if i > 0 else len(vertices) + i for i in idx])
    except (ValueError, IndexError) as e:
        raise MeshError(f"Failed to parse {path}: {e}")
    return np.array(vertices, dtype=np.float64).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def write_obj(path: str, vertices: np.ndarray, faces: np.ndarray) -> None:
    with open(path, 'w') as f:
        for v in vertices:
            f.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for t in np.asarray(faces) + 1:
            f.write(f"f {t[0]} {t[1]} {t[2]}\n")


def _parse_ply_header(fh):
    if fh.readline().strip() != b'ply':
        raise MeshError("Not a PLY file")
    elements = []
    fmt = None
    while True:
        line = fh.readline()
        if not line:
            raise MeshError("Unterminated PLY header")
        parts = line.decode('ascii').split()
        if not parts or parts[0] in ('comment', 'obj_info'):
            continue
        if parts[0] == 'format':
            fmt = parts[1]
        elif parts[0] == 'element':
            elements.append({'name': parts[1], 'count': int(parts[2]), 'props': []})
        elif parts[0] == 'property':
            if parts[1] == 'list':
                elements[-1]['props'].append((parts[4], ('list', _PLY_TYPES[parts[2]], _PLY_TYPES[parts[3]])))
            else:
                elements[-1]['props'].append((parts[2], _PLY_TYPES[parts[1]]))
        elif parts[0] == 'end_header':
            break
    if fmt != 'binary_little_endian':
        raise MeshError(f"Unsupported PLY format: {fmt}")
    return elements


def read_ply(path: str) -> Tuple[Dict[str, np.ndarray], Optional[np.ndarray]]:
    """Vertex properties (by name) and triangle faces from a binary PLY."""
    with open(path, 'rb') as fh:
        elements = _parse_ply_header(fh)
        data = fh.read()
    offset = 0
    vertex_props: Dict[str, np.ndarray] = {}
    faces = None
    for el in elements:
        if any(isinstance(t, tuple) for _, t in el['props']):
            if len(el['props']) != 1:
                raise MeshError(f"Unsupported list layout in element {el['name']}")
            _, (_, count_t, index_t) = el['props'][0]
            dtype = np.dtype([('n', '<' + count_t), ('idx', '<' + index_t, (3,))])
        else:
            dtype = np.dtype([(name, '<' + t) for name, t in el['props']])
        size = dtype.itemsize * el['count']
        if offset + size > len(data):
            raise MeshError(f"PLY element {el['name']} is truncated")
        block = np.frombuffer(data, dtype=dtype, count=el['count'], offset=offset)
        offset += size
        if el['name'] == 'vertex':
            vertex_props = {name: block[name].astype(np.float64) for name in dtype.names}
        elif el['name'] == 'face':
            if np.any(block['n'] != 3):
                raise MeshError(f"{path}: non-triangle face")
            faces = block['idx'].astype(np.int64)
    if 'x' not in vertex_props:
        raise MeshError(f"{path} has no vertex positions")
    return vertex_props, faces


def write_ply(path: str, vertices: np.ndarray, faces: Optional[np.ndarray] = None,
              vertex_data: Optional[Dict[str, np.ndarray]] = None) -> None:
    """Binary little-endian PLY; positions and attributes as 32-bit floats."""
    vertices = np.asarray(vertices)
    vertex_data = vertex_data or {}
    fields = [('x', '<f4'), ('y', '<f4'), ('z', '<f4')] + [(k, '<f4') for k in vertex_data]
    block = np.empty(len(vertices), dtype=fields)
    block['x'], block['y'], block['z'] = vertices[:, 0], vertices[:, 1], vertices[:, 2]
    for k, v in vertex_data.items():
        block[k] = v
    header = ['ply', 'format binary_little_endian 1.0', f'element vertex {len(vertices)}']
    header += [f'property float {name}' for name, _ in fields]
    if faces is not None:
        header += [f'element face {len(faces)}', 'property list uchar uint vertex_indices']
    header.append('end_header')
    with open(path, 'wb') as f:
        f.write(('\n'.join(header) + '\n').encode('ascii'))
        f.write(block.tobytes())
        if faces is not None:
            fb = np.empty(len(faces), dtype=[('n', 'u1'), ('idx', '<u4', (3,))])
            fb['n'] = 3
            fb['idx'] = faces
            f.write(fb.tobytes())


def read_points(path: str) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Points and (if present) normals from XYZ (3 or 6 floats per line) or PLY."""
    ext = os.path.splitext(path)[1].lower()
    if ext == '.ply':
        props, _ = read_ply(path)
        points = np.stack([props['x'], props['y'], props['z']], axis=1)
        normals = None
        if all(k in props for k in ('nx', 'ny', 'nz')):
            normals = np.stack([props['nx'], props['ny'], props['nz']], axis=1)
        return points, normals
    try:
        data = np.loadtxt(path, ndmin=2)
    except ValueError as e:
        raise MeshError(f"Failed to parse {path}: {e}")
    if data.shape[1] not in (3, 6):
        raise MeshError(f"{path}: expected 3 or 6 columns, found {data.shape[1]}")
    return data[:, :3], (data[:, 3:6] if data.shape[1] == 6 else None)


def write_points(path: str, points: np.ndarray, normals: Optional[np.ndarray] = None) -> None:
    ext = os.path.splitext(path)[1].lower()
    if ext == '.ply':
        data = None
        if normals is not None:
            data = {'nx': normals[:, 0], 'ny': normals[:, 1], 'nz': normals[:, 2]}
        write_ply(path, points, None, data)
        return
    cols = points if normals is None else np.hstack([points, normals])
    np.savetxt(path, cols, fmt='%.9g')
