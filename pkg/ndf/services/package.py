"""
The `.ndf` transmission format: base mesh, forward field and optional
scalar nets in one little-endian byte stream. See FORMAT.md for the layout.
"""
import logging
import struct
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ndf.basemesh import NormalizationTransform
from ndf.errors import BadMagicError, PackageError, TruncatedSectionError, UsageError, VersionMismatchError
from ndf.kernel import Mlp, encoding_width
from ndf.mesh import HalfedgeMesh
from ndf.services.dispfield import DisplacementField
from ndf.services.scalarfield import MODES, ScalarNet

logger = logging.getLogger(__name__)

MAGIC = b'NDFP'
VERSION = 1
FLAG_HALF_FEATURES = 0x1
MAX_INDEX = 2 ** 32 - 1

_FIXED = struct.Struct('<4sHHIIHHH')
_TRANSFORM = struct.Struct('<4d')
_SCALAR_FIXED = struct.Struct('<BHHHH')
_COUNT = struct.Struct('<I')
_WIDTH = struct.Struct('<I')

F32 = np.dtype('<f4')
U32 = np.dtype('<u4')

SECTIONS = ('header', 'base_mesh', 'features', 'weights', 'scalar_nets')


@dataclass
class NdfPackage:
    field: DisplacementField
    transform: NormalizationTransform
    scalar_nets: List[ScalarNet] = dc_field(default_factory=list)


def _widths_bytes(widths: Sequence[int]) -> bytes:
    return struct.pack(f'<{len(widths)}I', *widths)


def _header(field: DisplacementField, transform: NormalizationTransform) -> bytes:
    hidden = field.hidden
    return (_FIXED.pack(MAGIC, VERSION, 0, field.base.n_vertices, field.base.n_faces,
                        field.feature_dim, field.layers, len(hidden))
            + _widths_bytes(hidden) + _TRANSFORM.pack(*transform.to_array()))


def _scalar_bytes(snet: ScalarNet) -> bytes:
    hidden = snet.hidden
    return b''.join([
        _SCALAR_FIXED.pack(MODES.index(snet.mode), snet.channels, snet.feature_dim, snet.layers, len(hidden)),
        _widths_bytes(hidden),
        snet.features.astype(F32).tobytes(),
        snet.net.to_blob(),
    ])


def _sections(field: DisplacementField, transform: NormalizationTransform,
              scalar_nets: Sequence[ScalarNet]) -> Dict[str, bytes]:
    base = field.base
    if base.n_vertices > MAX_INDEX or base.n_faces > MAX_INDEX:
        raise UsageError("Base mesh too large for 32-bit indices")
    for snet in scalar_nets:
        if snet.base.n_vertices != base.n_vertices:
            raise UsageError(f"{snet} was trained on a different base mesh")
    return {
        'header': _header(field, transform),
        'base_mesh': base.vertices.astype(F32).tobytes() + base.faces.astype(U32).tobytes(),
        'features': field.features.astype(F32).tobytes(),
        'weights': field.net.to_blob(),
        'scalar_nets': _COUNT.pack(len(scalar_nets)) + b''.join(_scalar_bytes(s) for s in scalar_nets),
    }


def pack(field: DisplacementField, transform: Optional[NormalizationTransform] = None,
         scalar_nets: Sequence[ScalarNet] = ()) -> bytes:
    """Serialize a field (never its inverse) with its normalization and scalar nets."""
    transform = transform or NormalizationTransform.identity()
    data = b''.join(_sections(field, transform, list(scalar_nets)).values())
    logger.info(f"Packed {field} with {len(scalar_nets)} scalar nets: {len(data)} bytes")
    return data


def section_sizes(field: DisplacementField, transform: Optional[NormalizationTransform] = None,
                  scalar_nets: Sequence[ScalarNet] = ()) -> Dict[str, int]:
    """Byte count per section, in stream order."""
    transform = transform or NormalizationTransform.identity()
    return {name: len(chunk) for name, chunk in _sections(field, transform, list(scalar_nets)).items()}


def expected_size(n_vertices: int, n_faces: int, feature_dim: int, layers: int, hidden: Sequence[int]) -> int:
    """Package size without scalar nets, from the counts alone."""
    widths = (encoding_width(layers) + feature_dim, *hidden, 3)
    header = _FIXED.size + _WIDTH.size * len(hidden) + _TRANSFORM.size
    return (header + 12 * n_vertices + 12 * n_faces + 4 * n_vertices * feature_dim
            + Mlp.blob_size(widths) + _COUNT.size)


class _Reader:

    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.offset = 0

    def take(self, n: int, section: str) -> bytes:
        if self.offset + n > len(self.data):
            raise TruncatedSectionError(section)
        chunk = bytes(self.data[self.offset:self.offset + n])
        self.offset += n
        return chunk

    def unpack(self, fmt: struct.Struct, section: str) -> Tuple:
        return fmt.unpack(self.take(fmt.size, section))

    def widths(self, count: int, section: str) -> Tuple[int, ...]:
        return tuple(np.frombuffer(self.take(_WIDTH.size * count, section), dtype=U32).astype(int))

    def array(self, count: int, dtype: np.dtype, section: str) -> np.ndarray:
        return np.frombuffer(self.take(count * dtype.itemsize, section), dtype=dtype)


def _read_scalar(reader: _Reader, base: HalfedgeMesh) -> ScalarNet:
    mode, channels, d, layers, n_hidden = reader.unpack(_SCALAR_FIXED, 'scalar_nets')
    if mode >= len(MODES):
        raise PackageError(f"Unknown scalar net mode {mode}")
    hidden = reader.widths(n_hidden, 'scalar_nets')
    features = reader.array(base.n_vertices * d, F32, 'scalar_nets').reshape(base.n_vertices, d)
    widths = (encoding_width(layers) + d + 1, *hidden, 1)
    net = Mlp.from_blob(widths, reader.take(Mlp.blob_size(widths), 'scalar_nets'))
    return ScalarNet(base, net, features, layers, channels, MODES[mode])


def unpack(data: bytes) -> NdfPackage:
    """Rebuild the field, its transform and any scalar nets; validates the base mesh."""
    reader = _Reader(data)
    if len(data) < len(MAGIC) or bytes(data[:len(MAGIC)]) != MAGIC:
        raise BadMagicError(f"Not an .ndf stream (magic {bytes(data[:len(MAGIC)])!r})")
    _, version, flags, n_v, n_f, d, layers, n_hidden = reader.unpack(_FIXED, 'header')
    if version != VERSION:
        raise VersionMismatchError(f"Package version {version}, expected {VERSION}",
                                   payload={'version': version})
    if flags & FLAG_HALF_FEATURES:
        raise PackageError("Half-precision feature sections are not supported")
    hidden = reader.widths(n_hidden, 'header')
    transform = NormalizationTransform.from_array(reader.unpack(_TRANSFORM, 'header'))

    vertices = reader.array(3 * n_v, F32, 'base_mesh').reshape(n_v, 3).astype(np.float64)
    faces = reader.array(3 * n_f, U32, 'base_mesh').reshape(n_f, 3).astype(np.int64)
    features = reader.array(n_v * d, F32, 'features').reshape(n_v, d)
    widths = (encoding_width(layers) + d, *hidden, 3)
    net = Mlp.from_blob(widths, reader.take(Mlp.blob_size(widths), 'weights'))

    (count,) = reader.unpack(_COUNT, 'scalar_nets')
    base = HalfedgeMesh(vertices, faces)
    field = DisplacementField(base, net, features, layers)
    scalar_nets = [_read_scalar(reader, base) for _ in range(count)]
    if reader.offset != len(data):
        raise PackageError(f"{len(data) - reader.offset} trailing bytes after the last section")
    logger.info(f"Unpacked {field} with {count} scalar nets")
    return NdfPackage(field, transform, scalar_nets)


def write_package(path: str, data: bytes) -> None:
    with open(path, 'wb') as fh:
        fh.write(data)


def read_package(path: str) -> NdfPackage:
    try:
        with open(path, 'rb') as fh:
            data = fh.read()
    except OSError as e:
        raise UsageError(f"Cannot read package {path}: {e}") from e
    return unpack(data)
