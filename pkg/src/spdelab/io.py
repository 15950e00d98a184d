"""Flat binary layout for coefficient ensembles.

Header: little-endian int64 dim, int64 N, int64 count, uint64 seed.
Payload: float64 little-endian, mode-major over the retained modes (C order of the
grid, Nyquist slots skipped); for each mode the ``count`` samples as (re, im) pairs.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .spectral import FourierGrid, SpectralField, make_grid

HEADER = struct.Struct("<3qQ")


def ensemble_to_bytes(grid: FourierGrid, coeffs: np.ndarray, seed: int) -> bytes:
    """``coeffs`` has shape (count, *grid.shape)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.shape[1:] != grid.shape:
        raise ValueError(f"expected trailing shape {grid.shape}, got {coeffs.shape[1:]}")
    count = coeffs.shape[0]
    modes = coeffs[:, grid.mask].T                   # (n_modes, count)
    payload = np.stack([modes.real, modes.imag], axis=-1).astype("<f8")
    return HEADER.pack(grid.dim, grid.n, count, int(seed) & (2**64 - 1)) + payload.tobytes()


def ensemble_from_bytes(data: bytes) -> tuple[FourierGrid, np.ndarray, int]:
    dim, n, count, seed = HEADER.unpack_from(data)
    grid = make_grid(dim, n)
    expected = HEADER.size + grid.n_modes * count * 16
    if len(data) != expected:
        raise ValueError(f"payload size {len(data)} does not match header (expected {expected})")
    pay = np.frombuffer(data, dtype="<f8", offset=HEADER.size).reshape(grid.n_modes, count, 2)
    out = np.zeros((count,) + grid.shape, dtype=complex)
    out[:, grid.mask] = (pay[..., 0] + 1j * pay[..., 1]).T
    return grid, out, seed


def write_ensemble(path, grid: FourierGrid, coeffs: np.ndarray, seed: int) -> None:
    Path(path).write_bytes(ensemble_to_bytes(grid, coeffs, seed))


def read_ensemble(path) -> tuple[FourierGrid, np.ndarray, int]:
    return ensemble_from_bytes(Path(path).read_bytes())


def write_snapshot(path, field: SpectralField, seed: int) -> None:
    if field.components != 1:
        raise ValueError("snapshots are scalar fields")
    write_ensemble(path, field.grid, field.coeffs, seed)
