"""Cylindrical Wiener increments, Itô integrals of step processes, exact OU steps."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gaussian import hermitian_noise, stream
from .spectral import DiagonalOperator, FourierGrid, SpectralField


class WienerIncrementStream:
    """Source of white-in-space increments; each mode has E|dW_k|^2 = dt.

    Single owner: the step counter and generator state advance on every draw.
    """

    def __init__(self, grid: FourierGrid, dt: float, seed: int, index: int = 0):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.grid = grid
        self.dt = float(dt)
        self.seed = int(seed)
        self.step = 0
        self._rng = stream(seed, index)
        self._ones = np.ones(grid.shape)

    def draw_increment(self, duration: float | None = None) -> SpectralField:
        return SpectralField(self.grid, self.draw_coeffs(duration))

    def draw_coeffs(self, duration: float | None = None, size: tuple[int, ...] = ()) -> np.ndarray:
        h = self.dt if duration is None else float(duration)
        if h < 0:
            raise ValueError("duration must be non-negative")
        self.step += 1
        return hermitian_noise(self.grid, np.sqrt(h) * self._ones, self._rng, size)

    @property
    def time(self) -> float:
        return self.step * self.dt


@dataclass(frozen=True, eq=False)
class StepProcess:
    """Deterministic elementary integrand: Phi_n on (t_n, t_{n+1}]."""

    breakpoints: np.ndarray = field(repr=False)
    operators: tuple[DiagonalOperator, ...] = field(repr=False)

    def __post_init__(self):
        t = np.asarray(self.breakpoints, dtype=float)
        if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0) or t[0] < 0:
            raise ValueError("breakpoints must be non-negative and strictly increasing")
        if len(self.operators) != len(t) - 1:
            raise ValueError("need one operator per interval")
        object.__setattr__(self, "breakpoints", t)
        object.__setattr__(self, "operators", tuple(self.operators))

    @property
    def grid(self) -> FourierGrid:
        return self.operators[0].grid

    def isometry_target(self) -> float:
        """sum_n tr(Phi_n Phi_n^*) (t_{n+1} - t_n) on the retained modes."""
        dt = np.diff(self.breakpoints)
        m = self.grid.mask
        return float(sum(np.sum(np.abs(op.symbol[m]) ** 2) * h for op, h in zip(self.operators, dt)))


def ito_integral(phi: StepProcess, noise: WienerIncrementStream) -> SpectralField:
    total = np.zeros(phi.grid.shape, dtype=complex)
    for op, h in zip(phi.operators, np.diff(phi.breakpoints)):
        total += op.symbol * noise.draw_coeffs(h)
    return SpectralField(phi.grid, total)


def ito_isometry_check(phi: StepProcess, rng: np.random.Generator, n_reps: int,
                       chunk: int = 20000) -> tuple[float, float, float]:
    """(empirical E||∫Phi dW||^2, its standard error, target)."""
    g = phi.grid
    ones = np.ones(g.shape)
    dts = np.diff(phi.breakpoints)
    sq = np.empty(n_reps)
    axes = tuple(range(1, g.dim + 1))
    for start in range(0, n_reps, chunk):
        m = min(chunk, n_reps - start)
        acc = np.zeros((m,) + g.shape, dtype=complex)
        for op, h in zip(phi.operators, dts):
            acc += op.symbol * hermitian_noise(g, np.sqrt(h) * ones, rng, (m,))
        sq[start:start + m] = np.sum(np.abs(acc) ** 2, axis=axes)
    return float(sq.mean()), float(sq.std(ddof=1) / np.sqrt(n_reps)), phi.isometry_target()


def ou_variance(lam, q, dt):
    """Variance q^2 (1 - e^{-2 lam dt}) / (2 lam) of the exact OU transition noise (q^2 dt at lam = 0)."""
    lam = np.asarray(lam, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(np.asarray(dt) < 0):
        raise ValueError("dt must be non-negative")
    safe = np.where(lam > 0, lam, 1.0)
    v = np.where(lam > 0, -np.expm1(-2.0 * safe * dt) / (2.0 * safe), dt)
    return q**2 * v


def ou_step(x, lam, q, dt, rng: np.random.Generator):
    """Exact transition of dx = -lam x dt + q dW over dt.

    Complex inputs get circular noise (E|eta|^2 = v); real inputs get N(0, v).
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    x = np.asarray(x)
    sd = np.sqrt(ou_variance(lam, q, dt))
    shape = np.broadcast_shapes(x.shape, np.shape(sd))
    if np.iscomplexobj(x):
        eta = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * (sd / np.sqrt(2.0))
    else:
        eta = rng.standard_normal(shape) * sd
    out = np.exp(-np.asarray(lam) * dt) * x + eta
    return out if out.ndim else out[()]


def brownian_from_white_noise(noise: WienerIncrementStream, t: float,
                              functional: SpectralField | None = None) -> tuple[np.ndarray, np.ndarray]:
    """B(t_j) = <l, W(t_j)> for a unit-norm test functional l (default: the constant 1).

    Returns (times, path) with times = 0, dt, ..., t.
    """
    n = int(round(t / noise.dt))
    if not np.isclose(n * noise.dt, t):
        raise ValueError("t must be a multiple of the stream's dt")
    g = noise.grid
    if functional is None:
        ell = np.zeros(g.shape, dtype=complex)
        ell[(0,) * g.dim] = 1.0
    else:
        ell = functional.coeffs[0]
    norm = np.sqrt(np.sum(np.abs(ell) ** 2))
    path = np.zeros(n + 1)
    for j in range(n):
        dw = noise.draw_coeffs()
        path[j + 1] = path[j] + float(np.sum(np.conj(ell) * dw).real) / norm
    return np.arange(n + 1) * noise.dt, path
