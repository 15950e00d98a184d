"""Centred Gaussian measures with diagonal covariance in the Fourier basis."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels
from .spectral import FourierGrid, SpectralField, _check_grids, reflect


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, index)``; used for per-sample / per-trajectory streams."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    grid: FourierGrid
    mode_std: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.broadcast_to(np.asarray(self.mode_std, dtype=float), self.grid.shape).copy()
        if np.any(s < 0):
            raise ValueError("mode standard deviations must be non-negative")
        if not np.allclose(s, reflect(s)):
            raise ValueError("mode_std must satisfy sigma_{-k} = sigma_k")
        s = np.where(self.grid.mask, s, 0.0)
        s.flags.writeable = False
        object.__setattr__(self, "mode_std", s)

    @classmethod
    def from_variance(cls, grid: FourierGrid, variance) -> "GaussianSpec":
        return cls(grid, np.sqrt(np.asarray(variance, dtype=float)))

    @property
    def variance(self) -> np.ndarray:
        return self.mode_std**2

    def trace(self) -> float:
        return float(np.sum(self.variance))

    def operator_norm(self) -> float:
        return float(np.max(self.variance))


def hermitian_noise(grid: FourierGrid, std: np.ndarray, rng: np.random.Generator,
                    size: tuple[int, ...] = ()) -> np.ndarray:
    """Coefficients with E|u_k|^2 = std_k^2 and u_{-k} = conj(u_k).

    For k != 0 the real and imaginary parts are independent N(0, std_k^2/2);
    the zero mode is real N(0, std_0^2).
    """
    shape = tuple(size) + grid.shape
    g = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    axes = tuple(range(-grid.dim, 0))
    u = (g + np.conj(reflect(g, axes))) / np.sqrt(2.0) * std
    return np.where(grid.mask, u, 0.0)


def sample(spec: GaussianSpec, rng: np.random.Generator) -> SpectralField:
    return SpectralField(spec.grid, hermitian_noise(spec.grid, spec.mode_std, rng))


def sample_coeffs(spec: GaussianSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """Batch of ``n`` scalar samples as a coefficient array of shape (n, *grid.shape)."""
    return hermitian_noise(spec.grid, spec.mode_std, rng, (n,))


@dataclass(frozen=True, eq=False)
class SampleEnsemble:
    spec: GaussianSpec
    seed: int
    coeffs: np.ndarray = field(repr=False)

    @classmethod
    def draw(cls, spec: GaussianSpec, seed: int, count: int) -> "SampleEnsemble":
        coeffs = np.stack([hermitian_noise(spec.grid, spec.mode_std, stream(seed, i))
                           for i in range(count)]) if count else np.zeros((0,) + spec.grid.shape, complex)
        return cls(spec, seed, coeffs)

    @property
    def fields(self) -> list[SpectralField]:
        return [SpectralField(self.spec.grid, c) for c in self.coeffs]

    def __len__(self) -> int:
        return self.coeffs.shape[0]

    def squared_norms(self) -> np.ndarray:
        axes = tuple(range(1, self.coeffs.ndim))
        return np.sum(np.abs(self.coeffs) ** 2, axis=axes)


def half_plane(grid: FourierGrid) -> np.ndarray:
    """Boolean mask selecting one representative of each pair {k, -k}, k != 0."""
    flat_idx = np.arange(np.prod(grid.shape)).reshape(grid.shape)
    partner = reflect(flat_idx)
    return grid.mask & (flat_idx < partner)


def zero_index(grid: FourierGrid) -> tuple[int, ...]:
    return (0,) * grid.dim


def whitened_coordinates(spec: GaussianSpec, coeffs: np.ndarray) -> np.ndarray:
    """Map samples to i.i.d. N(0, 1) real coordinates (one per retained mode).

    Only modes with sigma_k > 0 are kept. Works on a single coefficient array or a
    batch with leading sample axis.
    """
    g = spec.grid
    hp = half_plane(g) & (spec.mode_std > 0)
    sig = spec.mode_std
    batch = coeffs.ndim > g.dim
    c = coeffs if batch else coeffs[None]
    parts = []
    z0 = zero_index(g)
    if sig[z0] > 0:
        parts.append((c[(slice(None),) + z0].real / sig[z0])[:, None])
    scale = np.sqrt(2.0) / sig[hp]
    parts.append(c[:, hp].real * scale)
    parts.append(c[:, hp].imag * scale)
    out = np.concatenate(parts, axis=1)
    return out if batch else out[0]


def cameron_martin_norm(spec: GaussianSpec, h: SpectralField) -> float:
    _check_grids(spec.grid, h.grid)
    a2 = np.sum(np.abs(h.coeffs) ** 2, axis=0)
    var = spec.variance
    active = a2 > 0
    if np.any(active & (var == 0)):
        return float("inf")
    return float(np.sqrt(np.sum(a2[active] / var[active])))


@dataclass(frozen=True)
class FerniqueResult:
    mean: float
    threshold: float
    subsample_sizes: tuple[int, ...]
    subsample_means: tuple[float, ...]
    block_sizes: tuple[int, ...] = ()
    block_spreads: tuple[float, ...] = ()
    spread_slope: float = float("nan")

    @property
    def stable(self) -> bool:
        """Spread (IQR) of block means does not grow with the block size."""
        if np.isfinite(self.spread_slope):
            return bool(self.spread_slope <= 0)
        return not self.diverging

    @property
    def diverging(self) -> bool:
        """Nested subsample means increase monotonically."""
        m = np.asarray(self.subsample_means)
        return len(m) >= 2 and bool(np.all(np.diff(m) > 0))


def fernique_diagnostic(squared_norms, alpha: float, spec: GaussianSpec | None = None,
                        max_variance: float | None = None, min_blocks: int = 1000) -> FerniqueResult:
    """Empirical mean of exp(alpha ||u||^2) with two divergence diagnostics.

    ``squared_norms`` is a SampleEnsemble or an array of ||u||^2. The threshold
    1/(2 max_k sigma_k^2) comes from ``spec``/``max_variance`` or the ensemble's spec.
    Nested means use prefixes of size 100 * 10^j. Block spreads are the IQR of
    disjoint block means for block sizes 10^j with at least ``min_blocks`` blocks;
    for a finite mean they shrink as the blocks grow, for an infinite one they grow.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if isinstance(squared_norms, SampleEnsemble):
        spec = squared_norms.spec
        squared_norms = squared_norms.squared_norms()
    x = np.asarray(squared_norms, dtype=float)
    if max_variance is None:
        max_variance = spec.operator_norm() if spec is not None else np.nan
    threshold = 1.0 / (2.0 * max_variance) if max_variance > 0 else float("inf")
    vals = np.exp(alpha * x)
    sizes = []
    n = 100
    while n <= len(x):
        sizes.append(n)
        n *= 10
    if not sizes or sizes[-1] != len(x):
        sizes.append(len(x))
    csum = np.cumsum(vals)
    means = tuple(float(csum[s - 1] / s) for s in sizes)
    bsizes, spreads = [], []
    m = 10
    while len(x) // m >= min_blocks:
        b = vals[: len(x) // m * m].reshape(-1, m).mean(axis=1)
        q75, q25 = np.percentile(b, [75, 25])
        bsizes.append(m)
        spreads.append(float(q75 - q25))
        m *= 10
    slope = float("nan")
    if len(bsizes) >= 2 and min(spreads) > 0:
        slope = float(stats.linregress(np.log10(bsizes), np.log10(spreads)).slope)
    return FerniqueResult(float(vals.mean()), threshold, tuple(sizes), means, tuple(bsizes), tuple(spreads), slope)


@dataclass(frozen=True)
class RotationCheck:
    max_discrepancy: float
    max_se: float
    max_z: float

    @property
    def passed(self) -> bool:
        return self.max_z <= 3.0


def rotation_invariance_check(spec: GaussianSpec, rng: np.random.Generator, phi: float,
                              n_samples: int) -> RotationCheck:
    """Compare first/second moments of (x, y) and its rotation by phi, x, y i.i.d. ~ spec."""
    x = whitened_coordinates(spec, sample_coeffs(spec, rng, n_samples))
    y = whitened_coordinates(spec, sample_coeffs(spec, rng, n_samples))
    s, c = np.sin(phi), np.cos(phi)
    xr, yr = x * s + y * c, x * c - y * s

    def moments(a, b):
        return [a, b, a * a, b * b, a * b]

    worst_d, worst_se, worst_z = 0.0, 0.0, 0.0
    for m0, m1 in zip(moments(x, y), moments(xr, yr)):
        diff = m1 - m0
        d = np.abs(diff.mean(axis=0))
        se = diff.std(axis=0, ddof=1) / np.sqrt(n_samples)
        z = np.where(se > 0, d / np.where(se > 0, se, 1.0), np.where(d > 1e-12, np.inf, 0.0))
        k = int(np.argmax(z))
        if z[k] >= worst_z:
            worst_d, worst_se, worst_z = float(d[k]), float(se[k]), float(z[k])
        worst_d = max(worst_d, float(d.max()))
    return RotationCheck(worst_d, worst_se, worst_z)


def dilate_singularity_diagnostic(spec: GaussianSpec, c: float, n_modes: int,
                                  rng: np.random.Generator) -> float:
    """Whitened statistic (1/M) sum_{k<M} (x_k/sigma_k)^2 for x drawn from the c-dilated law."""
    x = c * sample_coeffs(spec, rng, 1)[0]
    z = whitened_coordinates(spec, x)
    if z.size < n_modes:
        raise ValueError(f"spec has only {z.size} active real coordinates, need {n_modes}")
    return float(np.mean(z[:n_modes] ** 2))


def kurtosis_check(spec: GaussianSpec, rng: np.random.Generator, n: int) -> tuple[np.ndarray, float]:
    """Per-coordinate (Pearson) kurtosis of whitened samples and the 3*sqrt(24/n) band."""
    z = whitened_coordinates(spec, sample_coeffs(spec, rng, n))
    return stats.kurtosis(z, axis=0, fisher=False), 3.0 * np.sqrt(24.0 / n)


@dataclass(frozen=True)
class HolderEstimate:
    alpha: float
    stderr: float
    slope: float
    intercept: float
    lags: np.ndarray
    structure: np.ndarray
    r_squared: float


def holder_exponent_estimate(paths, levels, spacing: float = 1.0) -> HolderEstimate:
    """Regress log2 E|X(x+h) - X(x)|^2 on log2 h over dyadic lags h = 2^j * spacing.

    ``paths`` has shape (n_paths, n_points) on a uniform grid; ``levels`` are the
    exponents j of the lags in grid steps. Returns slope/2.
    """
    paths = np.asarray(paths, dtype=float)
    levels = list(levels)
    if len(levels) < 3:
        raise ValueError("need at least 3 dyadic levels")
    if paths.ndim != 2 or paths.shape[0] < 100:
        raise ValueError("need at least 100 paths")
    lags = np.array([2**j for j in levels], dtype=np.int64)
    if lags.max() >= paths.shape[1]:
        raise ValueError("largest lag exceeds path length")
    sf = _kernels.structure_function(paths, lags)
    fit = stats.linregress(np.log2(lags * spacing), np.log2(sf))
    return HolderEstimate(fit.slope / 2, fit.stderr / 2, fit.slope, fit.intercept,
                          lags * spacing, sf, fit.rvalue**2)
