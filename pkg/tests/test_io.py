import struct

import numpy as np
import pytest

from spdelab.gaussian import hermitian_noise
from spdelab.io import HEADER, ensemble_from_bytes, ensemble_to_bytes, read_ensemble, write_ensemble, write_snapshot
from spdelab.spectral import SpectralField, make_grid


@pytest.mark.parametrize("dim,n", [(1, 8), (2, 8), (1, 16)])
def test_round_trip(dim, n, rng, tmp_path):
    g = make_grid(dim, n)
    c = hermitian_noise(g, np.ones(g.shape), rng, (5,))
    path = tmp_path / "ens.bin"
    write_ensemble(path, g, c, seed=2**63 + 7)
    g2, c2, seed = read_ensemble(path)
    assert g2 == g and seed == 2**63 + 7
    np.testing.assert_array_equal(c2, c)


def test_header_and_payload_layout(rng):
    g = make_grid(1, 4)                       # retained modes in C order: 0, 1, -1
    c = np.array([[1.0, 2 + 3j, 0, 2 - 3j], [4.0, 5 + 6j, 0, 5 - 6j]])
    data = ensemble_to_bytes(g, c, 9)
    assert HEADER.size == 32
    assert struct.unpack_from("<3qQ", data) == (1, 4, 2, 9)
    pay = np.frombuffer(data, "<f8", offset=32)
    # mode-major, then sample, then (re, im)
    np.testing.assert_array_equal(pay, [1, 0, 4, 0, 2, 3, 5, 6, 2, -3, 5, -6])
    assert len(data) == 32 + g.n_modes * 2 * 16


def test_truncated_payload_rejected(rng):
    g = make_grid(1, 8)
    data = ensemble_to_bytes(g, hermitian_noise(g, np.ones(8), rng, (3,)), 1)
    with pytest.raises(ValueError):
        ensemble_from_bytes(data[:-8])


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        ensemble_to_bytes(make_grid(1, 8), np.zeros((2, 16)), 0)


def test_snapshot_is_scalar_only(rng, tmp_path):
    g = make_grid(2, 8)
    u = SpectralField(g, hermitian_noise(g, np.ones(g.shape), rng)[None])
    write_snapshot(tmp_path / "s.bin", u, 3)
    _, c, _ = read_ensemble(tmp_path / "s.bin")
    np.testing.assert_array_equal(c, u.coeffs)
    with pytest.raises(ValueError):
        write_snapshot(tmp_path / "v.bin", SpectralField.zeros(g, components=2), 3)
