"""Exponential-Euler integration of dx = (Lx + F(x)) dt + Q dW with run-time monitors.

Nonlinearities are a polynomial reaction term f∘u and the 2-D vorticity transport
term -(u·∇)w with u = K w (Biot-Savart). Both are evaluated pseudo-spectrally with
3/2 zero padding.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .gaussian import hermitian_noise
from .spectral import (FourierGrid, SpectralField, biot_savart, from_padded_values,
                       gradient, to_padded_values)
from .stochastic import ou_variance

BLOWUP_CEILING = 1e8
MAX_DEGREE = 5


class BlowUp(RuntimeError):
    def __init__(self, time: float, message: str = "solution left the admissible range"):
        super().__init__(f"{message} at t = {time:g}")
        self.time = time


@dataclass(frozen=True)
class PolynomialReaction:
    """f(u) = sum_j coeffs[j] u^j."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs)
        if len(c) - 1 > MAX_DEGREE:
            raise ValueError(f"degree {len(c) - 1} exceeds {MAX_DEGREE}")
        object.__setattr__(self, "coeffs", c)

    def pointwise(self, u):
        return np.polynomial.polynomial.polyval(u, self.coeffs)

    def derivative(self, u):
        return np.polynomial.polynomial.polyval(u, np.polynomial.polynomial.polyder(self.coeffs))


@dataclass(frozen=True)
class NSVorticity:
    nu: float


@dataclass(frozen=True, eq=False)
class SemilinearProblem:
    grid: FourierGrid
    lam: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)
    nonlinearity: PolynomialReaction | NSVorticity | None
    u0: SpectralField
    dt: float
    t_end: float

    def __post_init__(self):
        lam = np.broadcast_to(np.asarray(self.lam, dtype=float), self.grid.shape).copy()
        q = np.broadcast_to(np.asarray(self.q, dtype=float), self.grid.shape).copy()
        q[~self.grid.mask] = 0.0        # Nyquist slots are never excited
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "q", q)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if isinstance(self.nonlinearity, NSVorticity):
            if self.grid.dim != 2:
                raise ValueError("vorticity form requires d = 2")
            z = (0,) * self.grid.dim
            if abs(self.u0.coeffs[(0,) + z]) > 0 or self.q[z] > 0:
                raise ValueError("vorticity problems need zero-mean initial data and noise")

    @property
    def is_ns(self) -> bool:
        return isinstance(self.nonlinearity, NSVorticity)


def reaction_problem(grid: FourierGrid, coeffs, u0: SpectralField, dt: float, t_end: float,
                     q=0.0, nu: float = 1.0) -> SemilinearProblem:
    return SemilinearProblem(grid, nu * grid.k2, q, PolynomialReaction(tuple(coeffs)), u0, dt, t_end)


def navier_stokes_problem(grid: FourierGrid, nu: float, q, w0: SpectralField, dt: float,
                          t_end: float) -> SemilinearProblem:
    q = np.broadcast_to(np.asarray(q, dtype=float), grid.shape).copy()
    q[(0,) * grid.dim] = 0.0
    return SemilinearProblem(grid, nu * grid.k2, q, NSVorticity(nu), w0, dt, t_end)


def _reaction_array(x: np.ndarray, poly: PolynomialReaction, g: FourierGrid) -> np.ndarray:
    """Horner's rule on raw coefficient arrays (any leading batch axes), truncating after each product."""
    c = poly.coeffs
    z = (Ellipsis,) + (0,) * g.dim
    xv = to_padded_values(x, g)
    acc = np.zeros(x.shape, dtype=complex)
    acc[z] = c[-1]
    for cj in reversed(c[:-1]):
        acc = from_padded_values(to_padded_values(acc, g) * xv, g)
        acc[z] += cj
    return acc


def reaction_nonlinearity(u: SpectralField, coeffs) -> SpectralField:
    """Coefficients of sum_j c_j u^j by Horner's rule with chained dealiased products."""
    poly = coeffs if isinstance(coeffs, PolynomialReaction) else PolynomialReaction(tuple(coeffs))
    if u.components != 1:
        raise ValueError("reaction term expects a scalar field")
    return SpectralField(u.grid, _reaction_array(u.coeffs[0], poly, u.grid))


def ns_vorticity_nonlinearity(w: SpectralField) -> SpectralField:
    """-(u·∇)w with u = K w, computed alias-free; the mean of the result is zero."""
    g = w.grid
    u = biot_savart(w, tol=1e-12)
    gw = gradient(w)
    prod = (to_padded_values(u.coeffs[0], g) * to_padded_values(gw.coeffs[0], g)
            + to_padded_values(u.coeffs[1], g) * to_padded_values(gw.coeffs[1], g))
    out = -from_padded_values(prod, g)
    out[(0,) * g.dim] = 0.0
    return SpectralField(g, out)


def nonlinearity(p: SemilinearProblem, x: SpectralField) -> SpectralField:
    if p.nonlinearity is None:
        return SpectralField.zeros(p.grid)
    if p.is_ns:
        return ns_vorticity_nonlinearity(x)
    return reaction_nonlinearity(x, p.nonlinearity)


def phi1(z):
    """(e^z - 1)/z with phi1(0) = 1."""
    z = np.asarray(z, dtype=float)
    safe = np.where(z == 0, 1.0, z)
    return np.where(z == 0, 1.0, np.expm1(safe) / safe)


class _Stepper:
    """Precomputed per-mode factors for a fixed (problem, dt)."""

    def __init__(self, p: SemilinearProblem):
        self.p = p
        self.decay = np.exp(-p.lam * p.dt)
        self.phi_dt = phi1(-p.lam * p.dt) * p.dt
        self.noise_sd = np.sqrt(ou_variance(p.lam, p.q, p.dt))
        self.noisy = bool(np.any(self.noise_sd > 0))

    def noise(self, rng) -> np.ndarray:
        if not self.noisy:
            return np.zeros(self.p.grid.shape, dtype=complex)
        return hermitian_noise(self.p.grid, self.noise_sd, rng)

    def advance(self, x: np.ndarray, F: np.ndarray, eta: np.ndarray) -> np.ndarray:
        out = self.decay * x + self.phi_dt * F + eta
        if self.p.is_ns:
            out[(0,) * self.p.grid.dim] = 0.0
        return out


def _check_finite(c: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(c)):
        raise BlowUp(t, "non-finite state")


def exponential_euler_step(state: SpectralField, p: SemilinearProblem, rng: np.random.Generator,
                           t: float = 0.0) -> SpectralField:
    """x <- e^{-lam dt} x + phi1(-lam dt) dt F(x) + eta, eta the exact OU increment."""
    st = _Stepper(p)
    F = nonlinearity(p, state).coeffs[0]
    new = st.advance(state.coeffs[0], F, st.noise(rng))
    _check_finite(new, t + p.dt)
    return SpectralField(p.grid, new)


def _sup(c: np.ndarray, g: FourierGrid) -> float:
    return float(np.max(np.abs(to_padded_values(c, g))))


def _l2sq(c: np.ndarray) -> float:
    return float(np.sum(np.abs(c) ** 2))


def _h_norm_sq(c: np.ndarray, g: FourierGrid, s: float) -> float:
    return float(np.sum((1.0 + g.k2) ** s * np.abs(c) ** 2))


@dataclass
class RunMonitor:
    """Per-step time series. NS runs also fill energy, enstrophy, orthogonality and the
    a priori inequality terms for v = w - W_L."""

    t: list = field(default_factory=list)
    sup_norm: list = field(default_factory=list)
    l2: list = field(default_factory=list)
    V_tilde: list = field(default_factory=list)
    wl_sup: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    enstrophy: list = field(default_factory=list)
    palinstrophy: list = field(default_factory=list)
    orthogonality: list = field(default_factory=list)
    divergence: list = field(default_factory=list)
    mean: list = field(default_factory=list)
    v_l2sq: list = field(default_factory=list)
    v_grad_sq: list = field(default_factory=list)
    wl_half_norm: list = field(default_factory=list)
    blew_up: bool = False
    stopping_time: float | None = None

    def arrays(self) -> dict:
        return {k: np.asarray(v) for k, v in self.__dict__.items() if isinstance(v, list) and v}

    def to_csv(self) -> str:
        cols = [k for k, v in self.__dict__.items() if isinstance(v, list) and v]
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(cols + ["blew_up"])
        for i in range(len(self.t)):
            wr.writerow([f"{getattr(self, c)[i]:.17g}" for c in cols] + [int(self.blew_up)])
        return buf.getvalue()


@dataclass(frozen=True)
class MonitorConfig:
    V: str = "square"                 # Lyapunov-type functional for the reaction sup monitor
    track_wl: bool = True             # integrate W_L alongside and monitor v = u - W_L
    ceiling: float = BLOWUP_CEILING
    every: int = 1


def convex_V(name: str):
    if name == "square":
        return lambda u: u * u, lambda u: 2 * u
    if name == "cosh":
        return lambda u: np.cosh(u) - 1.0, np.sinh
    raise ValueError(f"unknown convex function {name!r}")


@dataclass
class RunResult:
    final: SpectralField
    monitor: RunMonitor
    wl: SpectralField | None = None


def run(p: SemilinearProblem, rng: np.random.Generator, config: MonitorConfig = MonitorConfig()) -> RunResult:
    """Step to t_end or blow-up. Blow-up is recorded in the monitor, not raised."""
    g = p.grid
    st = _Stepper(p)
    V, _ = convex_V(config.V)
    mon = RunMonitor()
    x = np.array(p.u0.coeffs[0], dtype=complex)
    wl = np.zeros(g.shape, dtype=complex)
    n_steps = int(round(p.t_end / p.dt))
    k1, k2 = g.k if g.dim == 2 else (None, None)

    def record(t, x, wl, F):
        mon.t.append(t)
        vals = to_padded_values(x, g)
        mon.sup_norm.append(float(np.max(np.abs(vals))))
        mon.l2.append(np.sqrt(_l2sq(x)))
        v = x - wl
        mon.V_tilde.append(float(np.max(V(to_padded_values(v, g)))))
        mon.wl_sup.append(_sup(wl, g))
        if p.is_ns:
            u = biot_savart(SpectralField(g, x), tol=1e-10).coeffs
            mon.energy.append(_l2sq(u))
            mon.enstrophy.append(_l2sq(x))
            mon.palinstrophy.append(float(np.sum(g.k2 * np.abs(x) ** 2)))
            ip = float(np.sum(x * np.conj(F)).real)
            scale = np.sqrt(_l2sq(x) * _l2sq(F))
            mon.orthogonality.append(abs(ip) / scale if scale > 0 else 0.0)
            div = np.max(np.abs(k1 * u[0] + k2 * u[1]))
            un = np.sqrt(_l2sq(u))
            mon.divergence.append(float(div / un) if un > 0 else 0.0)
            mon.mean.append(float(abs(x[0, 0])))
            mon.v_l2sq.append(_l2sq(v))
            mon.v_grad_sq.append(float(np.sum(g.k2 * np.abs(v) ** 2)))
            mon.wl_half_norm.append(np.sqrt(_h_norm_sq(wl, g, 0.5)))

    t = 0.0
    F = nonlinearity(p, SpectralField(g, x)).coeffs[0]
    record(t, x, wl, F)
    for n in range(n_steps):
        eta = st.noise(rng)
        x = st.advance(x, F, eta)
        if config.track_wl:
            wl = st.decay * wl + eta
        t = (n + 1) * p.dt
        if not np.all(np.isfinite(x)) or _sup(x, g) > config.ceiling:
            mon.blew_up = True
            mon.stopping_time = t
            break
        F = nonlinearity(p, SpectralField(g, x)).coeffs[0]
        if (n + 1) % config.every == 0 or n + 1 == n_steps:
            record(t, x, wl, F)
    x = np.where(np.isfinite(x), x, 0.0)
    return RunResult(SpectralField(g, x), mon, SpectralField(g, wl) if config.track_wl else None)


# -- monitors ---------------------------------------------------------------

def gronwall_constant(f: PolynomialReaction, V: str, R: float, x_max: float = 50.0, n: int = 4001) -> float:
    """C with <V'(x), f(x + y)> <= C (1 + V(x)) for |x| <= x_max, |y| <= R.

    x runs over a grid; the maximum over y is exact, since the extremes of f on
    [x - R, x + R] sit at the endpoints or at critical points of f. The affine form
    1 + V is needed because for V = x² the left side is linear in x near x = 0
    whenever f(y) != 0.
    """
    Vf, dV = convex_V(V)
    xs = np.linspace(-x_max, x_max, n)
    crit = np.polynomial.polynomial.polyroots(np.polynomial.polynomial.polyder(f.coeffs)) if len(f.coeffs) > 2 else []
    crit = [r.real for r in np.atleast_1d(crit) if abs(r.imag) < 1e-12]
    z = np.stack([xs - R, xs + R] + [np.clip(r, xs - R, xs + R) for r in crit])
    val = np.max(dV(xs) * f.pointwise(z), axis=0) / (1.0 + Vf(xs))
    return max(0.0, float(val.max()))


@dataclass(frozen=True)
class ConvexityReport:
    t: np.ndarray
    V_tilde: np.ndarray
    constants: np.ndarray
    growth: np.ndarray
    flag: bool


def convexity_monitor(mon: RunMonitor, f: PolynomialReaction, V: str = "square",
                      window: float = 1.0, slack: float = 0.10) -> ConvexityReport:
    """Flag windows where log(1 + Ṽ(v)) grows faster than (1 + slack) C window.

    C is recomputed for each window from the largest recorded sup |W_L| in it.
    """
    t = np.asarray(mon.t)
    Vt = np.asarray(mon.V_tilde)
    wl = np.asarray(mon.wl_sup)
    logV = np.log1p(Vt)
    growths, consts = [], []
    flag = False
    start = 0
    while start < len(t):
        end = np.searchsorted(t, t[start] + window, side="right") - 1
        if end <= start:
            break
        C = gronwall_constant(f, V, float(wl[start:end + 1].max()))
        g = float(np.max(logV[start:end + 1] - logV[start]))
        growths.append(g)
        consts.append(C)
        if g > (1 + slack) * C * (t[end] - t[start]) + 1e-12:
            flag = True
        start = end
    return ConvexityReport(t, Vt, np.asarray(consts), np.asarray(growths), flag)


@dataclass(frozen=True)
class EnergyReport:
    lhs: np.ndarray
    rhs: np.ndarray
    violations: int
    max_ratio: float

    @property
    def holds(self) -> bool:
        return self.violations == 0


def ns_energy_monitor(mon: RunMonitor, nu: float, slack: float = 0.10, dt_tol: float = 0.0) -> EnergyReport:
    """Check (|v_{n+1}|² - |v_n|²)/dt <= (1+slack) max_n,n+1 [(8/nu)|W_L|²_{H^½}|v|² + 2|W_L|³_{H^½}] + dt_tol."""
    t = np.asarray(mon.t)
    v2 = np.asarray(mon.v_l2sq)
    a = np.asarray(mon.wl_half_norm)
    rhs_pt = 8.0 / nu * a**2 * v2 + 2.0 * a**3
    dt = np.diff(t)
    lhs = np.diff(v2) / dt
    rhs = np.maximum(rhs_pt[:-1], rhs_pt[1:])
    bound = (1 + slack) * rhs + dt_tol
    viol = int(np.sum(lhs > bound))
    ratio = float(np.max(np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1), np.where(lhs > 0, np.inf, 0))))
    return EnergyReport(lhs, rhs, viol, ratio)


def enstrophy_balance(mon: RunMonitor, nu: float, q, burn_in: float = 0.0, n_batches: int = 10):
    """Time average of d/dt|w|² + 2 nu |∇w|² - sum_k q_k² in stationarity, with batch-means se."""
    t = np.asarray(mon.t)
    ens = np.asarray(mon.enstrophy)
    pal = np.asarray(mon.palinstrophy)
    trace = float(np.sum(np.asarray(q) ** 2))
    sel = t >= burn_in
    t, ens, pal = t[sel], ens[sel], pal[sel]
    edges = np.linspace(0, len(t) - 1, n_batches + 1).astype(int)
    vals = []
    for i0, i1 in zip(edges[:-1], edges[1:]):
        span = t[i1] - t[i0]
        dissip = trapezoid(2 * nu * pal[i0:i1 + 1], t[i0:i1 + 1])
        vals.append((ens[i1] - ens[i0] + dissip) / span - trace)
    vals = np.asarray(vals)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals))), trace


def strong_order_check(p: SemilinearProblem, n_levels: int = 4, n_samples: int = 16,
                       rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Coupled exponential-Euler runs at dt, dt/2, ..., dt/2^n_levels sharing one noise path.

    Coarse stochastic-convolution increments are composed exactly from the fine ones
    (eta_{2h} = e^{-lam h} eta_h + eta'_h). Returns (errors, ratios) where errors[j] is
    the rms of ||X_{dt_j}(T) - X_{dt_j / 2}(T)||.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    if not isinstance(p.nonlinearity, PolynomialReaction):
        raise ValueError("order check is implemented for reaction problems")
    g = p.grid
    n_coarse = int(round(p.t_end / p.dt))
    fine_dt = p.dt / 2**n_levels
    n_fine = n_coarse * 2**n_levels
    sd = np.sqrt(ou_variance(p.lam, p.q, fine_dt))
    etas = hermitian_noise(g, sd, rng, (n_fine, n_samples))
    finals = []
    for lev in range(n_levels + 1):
        h = fine_dt * 2**lev
        if lev:
            etas = np.exp(-p.lam * h / 2) * etas[0::2] + etas[1::2]
        decay = np.exp(-p.lam * h)
        phi_dt = phi1(-p.lam * h) * h
        x = np.broadcast_to(p.u0.coeffs[0], (n_samples,) + g.shape).astype(complex)
        for eta in etas:
            x = decay * x + phi_dt * _reaction_array(x, p.nonlinearity, g) + eta
        finals.append(x)
    finals = finals[::-1]              # coarse to fine
    axes = tuple(range(1, g.dim + 1))
    err = np.array([np.sqrt(np.mean(np.sum(np.abs(finals[j] - finals[j + 1]) ** 2, axis=axes)))
                    for j in range(n_levels)])
    return err, err[:-1] / err[1:]
