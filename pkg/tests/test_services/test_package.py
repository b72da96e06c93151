import struct

import numpy as np
import pytest

from ndf.basemesh import NormalizationTransform
from ndf.errors import BadMagicError, PackageError, TruncatedSectionError, UsageError, VersionMismatchError
from ndf.mesh import sample_uniform
from ndf.services.package import (SECTIONS, expected_size, pack, read_package, section_sizes, unpack,
                                  write_package)
from ndf.services.scalarfield import ScalarNet


@pytest.fixture
def transform():
    return NormalizationTransform(0.25, np.array([0.5, -1.0, 2.0]))


@pytest.fixture
def label_net(icosphere):
    return ScalarNet.create(icosphere, channels=2, feature_dim=2, hidden=(4,), layers=2, mode='binary', seed=0)


def test_round_trip_preserves_the_field(tiny_field, transform, icosphere):
    package = unpack(pack(tiny_field, transform))
    points = sample_uniform(icosphere, 100, seed=0)
    assert np.array_equal(package.field.eval(points), tiny_field.eval(points))
    assert np.array_equal(package.field.base.faces, icosphere.faces)
    assert package.transform.scale == 0.25
    assert np.array_equal(package.transform.translation, transform.translation)
    assert package.scalar_nets == []


def test_round_trip_preserves_scalar_nets(tiny_field, label_net, icosphere):
    package = unpack(pack(tiny_field, scalar_nets=[label_net]))
    (restored,) = package.scalar_nets
    assert restored.mode == 'binary'
    assert restored.channels == 2
    points = sample_uniform(icosphere, 20, seed=1)
    assert np.array_equal(restored.predict(points, 1), label_net.predict(points, 1))


def test_size_is_predictable(tiny_field, icosphere):
    data = pack(tiny_field)
    assert len(data) == expected_size(icosphere.n_vertices, icosphere.n_faces, 2, 2, (8, 8))
    sizes = section_sizes(tiny_field)
    assert tuple(sizes) == SECTIONS
    assert sum(sizes.values()) == len(data)
    assert expected_size(1002, 2000, 4, 8, (64, 64)) == 83878


def test_scalar_net_from_another_base(tiny_field, make_icosphere):
    other = ScalarNet.create(make_icosphere(1), feature_dim=2, hidden=(4,), layers=2, seed=0)
    with pytest.raises(UsageError):
        pack(tiny_field, scalar_nets=[other])


def test_bad_magic(tiny_field):
    data = pack(tiny_field)
    with pytest.raises(BadMagicError):
        unpack(b'XXXX' + data[4:])
    with pytest.raises(BadMagicError):
        unpack(b'ND')


def test_truncation_names_the_section(tiny_field, label_net):
    data = pack(tiny_field, scalar_nets=[label_net])
    sizes = section_sizes(tiny_field, scalar_nets=[label_net])
    offset = 0
    for name in SECTIONS:
        cut = offset + sizes[name] // 2
        with pytest.raises(TruncatedSectionError) as info:
            unpack(data[:cut])
        assert info.value.section == name
        offset += sizes[name]


def test_version_and_flags(tiny_field):
    data = bytearray(pack(tiny_field))
    newer = data.copy()
    newer[4:6] = struct.pack('<H', 2)
    with pytest.raises(VersionMismatchError):
        unpack(bytes(newer))
    half = data.copy()
    half[6:8] = struct.pack('<H', 1)
    with pytest.raises(PackageError):
        unpack(bytes(half))


def test_trailing_bytes(tiny_field):
    with pytest.raises(PackageError):
        unpack(pack(tiny_field) + b'\x00')


def test_files(package_path, identity_field, tmp_path):
    package = read_package(package_path)
    assert package.field.base.n_vertices == identity_field.base.n_vertices
    with pytest.raises(UsageError):
        read_package(str(tmp_path / 'absent.ndf'))
    path = tmp_path / 'copy.ndf'
    write_package(str(path), pack(package.field, package.transform))
    assert path.read_bytes() == open(package_path, 'rb').read()
