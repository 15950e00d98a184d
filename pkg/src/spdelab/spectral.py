"""Fourier-side fields on the torus T^d = [0, 2π)^d.

Coefficients are stored in numpy FFT ordering with shape ``(c, N)`` or
``(c, N, N)``. The Nyquist index is kept in the array but is always zero, so
the retained wavenumbers are ``{-N/2+1, ..., N/2-1}`` per dimension. With
normalized Haar measure, ``u(x) = sum_k u_k exp(i k.x)`` and Parseval carries
no factors of 2π.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class FourierGrid:
    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 4 or self.n % 2:
            raise ValueError(f"modes_per_dim must be even and >= 4, got {self.n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers per dimension in FFT order (Nyquist slot set to 0)."""
        k = np.fft.fftfreq(self.n, 1.0 / self.n).astype(np.int64)
        k[self.n // 2] = 0
        return k

    @cached_property
    def k(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.wavenumbers] * self.dim), indexing="ij"))

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(ki.astype(float) ** 2 for ki in self.k)

    @cached_property
    def mask(self) -> np.ndarray:
        m1 = np.ones(self.n, dtype=bool)
        m1[self.n // 2] = False
        out = m1
        for _ in range(self.dim - 1):
            out = np.multiply.outer(out, m1)
        return out

    @property
    def n_modes(self) -> int:
        return (self.n - 1) ** self.dim

    @cached_property
    def points(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n) / self.n

    def sorted_wavenumbers(self) -> np.ndarray:
        return np.arange(-self.n // 2 + 1, self.n // 2)


def make_grid(dim: int, modes_per_dim: int) -> FourierGrid:
    return FourierGrid(dim, modes_per_dim)


def reflect(a: np.ndarray, axes=None) -> np.ndarray:
    """Return ``b`` with ``b[..., k] = a[..., -k]`` along the trailing grid axes."""
    if axes is None:
        axes = tuple(range(-1, -a.ndim - 1, -1))
    out = np.flip(a, axis=axes)
    return np.roll(out, 1, axis=axes)


def _grid_axes(grid: FourierGrid) -> tuple[int, ...]:
    return tuple(range(-grid.dim, 0))


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: FourierGrid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape == self.grid.shape:
            c = c[None]
        if c.ndim != self.grid.dim + 1 or c.shape[1:] != self.grid.shape:
            raise ValueError(f"coeffs shape {c.shape} does not match grid {self.grid.shape}")
        c = np.where(self.grid.mask, c, 0.0)
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def components(self) -> int:
        return self.coeffs.shape[0]

    @classmethod
    def zeros(cls, grid: FourierGrid, components: int = 1) -> "SpectralField":
        return cls(grid, np.zeros((components,) + grid.shape, dtype=complex))

    @classmethod
    def from_values(cls, grid: FourierGrid, values) -> "SpectralField":
        values = np.asarray(values, dtype=float)
        if values.shape == grid.shape:
            values = values[None]
        coeffs = np.fft.fftn(values, axes=_grid_axes(grid)) / grid.n**grid.dim
        return cls(grid, coeffs)

    @classmethod
    def from_modes(cls, grid: FourierGrid, modes: dict, components: int = 1) -> "SpectralField":
        """Build a real field from ``{k: value}``; the conjugate partner is filled in."""
        c = np.zeros((components,) + grid.shape, dtype=complex)
        for k, val in modes.items():
            k = (k,) if np.isscalar(k) else tuple(k)
            val = np.broadcast_to(np.asarray(val, dtype=complex), (components,))
            idx = tuple(ki % grid.n for ki in k)
            nidx = tuple((-ki) % grid.n for ki in k)
            c[(slice(None),) + idx] = val
            c[(slice(None),) + nidx] = np.conj(val)
        return cls(grid, c)

    def to_values(self) -> np.ndarray:
        vals = np.fft.ifftn(self.coeffs, axes=_grid_axes(self.grid)) * self.grid.n**self.grid.dim
        return vals.real

    def imag_residual(self) -> float:
        """Relative size of the imaginary part of the inverse transform."""
        vals = np.fft.ifftn(self.coeffs, axes=_grid_axes(self.grid))
        scale = np.linalg.norm(vals)
        return float(np.linalg.norm(vals.imag) / scale) if scale > 0 else 0.0

    def hermitian_defect(self) -> float:
        c = self.coeffs
        return float(np.max(np.abs(c - np.conj(reflect(c, _grid_axes(self.grid)))), initial=0.0))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_grids(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_grids(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def inner(self, other: "SpectralField") -> float:
        _check_grids(self.grid, other.grid)
        return float(np.sum(self.coeffs * np.conj(other.coeffs)).real)


def _check_grids(a: FourierGrid, b: FourierGrid) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


@dataclass(frozen=True, eq=False)
class DiagonalOperator:
    grid: FourierGrid
    symbol: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.broadcast_to(np.asarray(self.symbol), self.grid.shape).copy()
        s.flags.writeable = False
        object.__setattr__(self, "symbol", s)

    def is_real_preserving(self, tol: float = 1e-12) -> bool:
        s = self.symbol
        d = np.abs(s - np.conj(reflect(s)))[self.grid.mask]
        return bool(np.all(d <= tol * (1 + np.abs(s[self.grid.mask]))))

    def exp(self, t: float) -> "DiagonalOperator":
        return DiagonalOperator(self.grid, np.exp(self.symbol * t))

    def power(self, alpha: float) -> "DiagonalOperator":
        return DiagonalOperator(self.grid, self.symbol**alpha)


def laplacian(grid: FourierGrid) -> DiagonalOperator:
    return DiagonalOperator(grid, -grid.k2)


def bessel_potential(grid: FourierGrid, alpha: float) -> DiagonalOperator:
    """(1 - Δ)^alpha, i.e. symbol (1 + |k|^2)^alpha."""
    return DiagonalOperator(grid, (1.0 + grid.k2) ** alpha)


def sobolev_norm(u: SpectralField, s: float) -> float:
    w = (1.0 + u.grid.k2) ** s
    return float(np.sqrt(np.sum(w * np.abs(u.coeffs) ** 2)))


def apply_multiplier(u: SpectralField, A: DiagonalOperator) -> SpectralField:
    _check_grids(u.grid, A.grid)
    return SpectralField(u.grid, u.coeffs * A.symbol)


def smoothing_constant(alpha: float) -> float:
    """A valid C_α with (1+λ)^α e^{-λt} <= C_α (1 + t^{-α}) for all λ, t > 0.

    Uses (1+λ)^α <= max(1, 2^{α-1}) (1 + λ^α) and λ^α e^{-λt} <= (α/e)^α t^{-α}.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if alpha == 0:
        return 1.0
    return max(1.0, 2.0 ** (alpha - 1)) * max(1.0, (alpha / np.e) ** alpha)


def semigroup_smoothing_bound_check(L: DiagonalOperator, alpha: float, t: float) -> tuple[float, float]:
    sym = np.asarray(L.symbol)[L.grid.mask]
    if np.iscomplexobj(sym):
        if np.any(np.abs(sym.imag) > 0):
            raise ValueError("symbol must be real")
        sym = sym.real
    if np.any(sym >= 0):
        raise ValueError("symbol must be strictly negative")
    if t <= 0:
        raise ValueError("t must be positive")
    lhs = float(np.max((1.0 + np.abs(sym)) ** alpha * np.exp(sym * t)))
    rhs = smoothing_constant(alpha) * (1.0 + t ** (-alpha))
    return lhs, rhs


# -- vector calculus on T^2 -------------------------------------------------

def _require_2d(u: SpectralField, components: int) -> None:
    if u.grid.dim != 2 or u.components != components:
        raise ValueError(f"expected {components}-component field on a 2-D grid, got "
                         f"{u.components} components on dim={u.grid.dim}")


def leray_project(u: SpectralField) -> SpectralField:
    _require_2d(u, 2)
    k1, k2 = (ki.astype(float) for ki in u.grid.k)
    kk = u.grid.k2.copy()
    kk[kk == 0] = 1.0
    div = k1 * u.coeffs[0] + k2 * u.coeffs[1]
    out = np.stack([u.coeffs[0] - k1 * div / kk, u.coeffs[1] - k2 * div / kk])
    return SpectralField(u.grid, out)


def divergence(u: SpectralField) -> SpectralField:
    _require_2d(u, 2)
    k1, k2 = u.grid.k
    return SpectralField(u.grid, 1j * (k1 * u.coeffs[0] + k2 * u.coeffs[1]))


def curl(u: SpectralField) -> SpectralField:
    """Scalar vorticity ∂1 u2 - ∂2 u1."""
    _require_2d(u, 2)
    k1, k2 = u.grid.k
    return SpectralField(u.grid, 1j * (k1 * u.coeffs[1] - k2 * u.coeffs[0]))


def gradient(w: SpectralField) -> SpectralField:
    if w.components != 1:
        raise ValueError("gradient expects a scalar field")
    return SpectralField(w.grid, np.stack([1j * ki * w.coeffs[0] for ki in w.grid.k]))


def biot_savart(w: SpectralField, tol: float = 1e-14) -> SpectralField:
    """Divergence-free velocity whose vorticity is ``w``.

    With derivatives acting as multiplication by ``ik``, the real-valued
    inverse of the curl is ``u_k = -i k^⊥ w_k / |k|^2``, ``k^⊥ = (-k2, k1)``.
    """
    _require_2d(w, 1)
    zero = (0,) * w.grid.dim
    if abs(w.coeffs[(0,) + zero]) > tol * max(1.0, np.max(np.abs(w.coeffs))):
        raise ValueError("vorticity must have zero mean")
    k1, k2 = (ki.astype(float) for ki in w.grid.k)
    kk = w.grid.k2.copy()
    kk[kk == 0] = np.inf
    u1 = 1j * k2 * w.coeffs[0] / kk
    u2 = -1j * k1 * w.coeffs[0] / kk
    return SpectralField(w.grid, np.stack([u1, u2]))


# -- products ---------------------------------------------------------------

def _pad(coeffs: np.ndarray, n: int, m: int, dim: int) -> np.ndarray:
    """Zero-pad FFT-ordered coefficients from n to m points per trailing axis."""
    h = n // 2
    out = coeffs
    for ax in range(-dim, 0):
        lo = np.take(out, np.arange(0, h), axis=ax)
        hi = np.take(out, np.arange(h + 1, n), axis=ax)
        shp = list(out.shape)
        shp[ax] = m - (n - 1)
        out = np.concatenate([lo, np.zeros(shp, dtype=out.dtype), hi], axis=ax)
    return out


def _truncate(coeffs: np.ndarray, n: int, m: int, dim: int) -> np.ndarray:
    h = n // 2
    out = coeffs
    for ax in range(-dim, 0):
        lo = np.take(out, np.arange(0, h), axis=ax)
        hi = np.take(out, np.arange(m - h + 1, m), axis=ax)
        shp = list(out.shape)
        shp[ax] = 1
        out = np.concatenate([lo, np.zeros(shp, dtype=out.dtype), hi], axis=ax)
    return out


def padded_size(n: int) -> int:
    return 3 * n // 2


def to_padded_values(coeffs: np.ndarray, grid: FourierGrid) -> np.ndarray:
    m = padded_size(grid.n)
    p = _pad(coeffs, grid.n, m, grid.dim)
    axes = tuple(range(-grid.dim, 0))
    return (np.fft.ifftn(p, axes=axes) * m**grid.dim).real


def from_padded_values(values: np.ndarray, grid: FourierGrid) -> np.ndarray:
    m = padded_size(grid.n)
    axes = tuple(range(-grid.dim, 0))
    c = np.fft.fftn(values, axes=axes) / m**grid.dim
    return _truncate(c, grid.n, m, grid.dim)


def dealiased_product(u: SpectralField, v: SpectralField) -> SpectralField:
    _check_grids(u.grid, v.grid)
    if u.components != 1 or v.components != 1:
        raise ValueError("dealiased_product expects scalar fields")
    g = u.grid
    prod = to_padded_values(u.coeffs, g) * to_padded_values(v.coeffs, g)
    return SpectralField(g, from_padded_values(prod, g))
