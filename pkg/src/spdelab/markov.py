"""Total-variation tools, Harris certificates and their numerical validation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, stats

from . import _kernels
from .gaussian import half_plane
from .spectral import SpectralField
from .linear import ConfigurationError, LinearProblem, NonDissipativeError, evolve_exact, invariant_covariance

ROW_TOL = 1e-12
GAMMA_GRID = np.round(np.arange(1, 100) * 0.01, 2)


class DriftFailure(ValueError):
    """No drift constant gamma < 1 is supported by the model."""


class CertificateError(ValueError):
    pass


# -- models -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MarkovModel:
    """Finite stochastic matrix ``P`` with Lyapunov function ``V`` and step time ``T0``.

    Lattice discretisations of x -> N(a x, s²) carry ``kernel = (a, s)`` and ``states``;
    their ``PV`` is then evaluated by Gauss-Hermite quadrature on the continuous kernel.
    """

    P: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)
    T0: float = 1.0
    states: np.ndarray | None = field(default=None, repr=False)
    kernel: tuple[float, float] | None = None
    V_func: object = field(default=None, repr=False)

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        V = np.asarray(self.V, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("P must be square")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=1) - 1)) > ROW_TOL:
            raise ValueError("rows of P must be probability vectors")
        if V.shape != (P.shape[0],) or np.any(V < 0):
            raise ValueError("V must be a non-negative vector over the states")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "V", V)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    def PV(self) -> np.ndarray:
        if self.kernel is not None and self.V_func is not None:
            a, s = self.kernel
            z, w = np.polynomial.hermite_e.hermegauss(60)
            w = w / w.sum()
            return self.V_func(a * self.states[:, None] + s * z[None, :]) @ w
        return self.P @ self.V


def finite_model(P, V, T0: float = 1.0) -> MarkovModel:
    return MarkovModel(np.asarray(P, float), np.asarray(V, float), T0)


def gaussian_lattice_model(a: float, s: float = 1.0, half_width: float = 8.0, n: int = 401,
                           V=lambda x: x * x) -> MarkovModel:
    """x -> N(a x, s²) on ``n`` equispaced points of [-L, L]; tail mass goes to the end cells."""
    if s <= 0 or n < 3:
        raise ValueError("need s > 0 and at least 3 lattice points")
    x = np.linspace(-half_width, half_width, n)
    edges = np.concatenate(([-np.inf], 0.5 * (x[1:] + x[:-1]), [np.inf]))
    cdf = stats.norm.cdf((edges[None, :] - a * x[:, None]) / s)
    P = np.diff(cdf, axis=1)
    P /= P.sum(axis=1, keepdims=True)
    return MarkovModel(P, V(x), 1.0, x, (float(a), float(s)), V)


# -- distances --------------------------------------------------------------

def total_variation(mu, nu) -> float:
    """L¹ convention: values in [0, 2]."""
    return float(np.sum(np.abs(np.asarray(mu, float) - np.asarray(nu, float))))


def weighted_tv(mu, nu, V, beta: float = 1.0) -> float:
    """∫ (1 + beta V) |mu - nu|."""
    return float(np.sum((1.0 + beta * np.asarray(V, float)) * np.abs(np.asarray(mu, float) - np.asarray(nu, float))))


def gaussian_tv(m: float, s: float = 1.0) -> float:
    """TV(N(0, s²), N(m, s²)) = 2(2Φ(|m|/2s) - 1)."""
    return float(2.0 * (2.0 * stats.norm.cdf(abs(m) / (2.0 * s)) - 1.0))


def gaussian_tv_quadrature(m: float, s: float = 1.0) -> float:
    f = lambda x: abs(stats.norm.pdf(x, 0, s) - stats.norm.pdf(x, m, s))
    lo, hi = min(0.0, m) - 12 * s, max(0.0, m) + 12 * s
    val, _ = integrate.quad(f, lo, hi, points=[m / 2], epsabs=1e-13, epsrel=1e-13, limit=200)
    return float(val)


def gaussian_tv_lower_bound(m: float) -> float:
    return float(2.0 - 2.0 * np.exp(-m * m / 8.0))


# -- Harris constants -------------------------------------------------------

def drift_constants(m: MarkovModel, ratio_limit: float = 0.99) -> tuple[float, float]:
    """(gamma, K) with PV <= gamma V + K.

    K(gamma) = max_x (PV - gamma V) is non-increasing in gamma; we take its minimum
    over the grid and the smallest gamma attaining it.
    """
    V = m.V
    if np.all(V == 0):
        return 0.5, 0.0
    PV = m.PV()
    if m.kernel is not None:
        edge = V >= np.quantile(V, 0.9)
        if np.max(PV[edge] / np.maximum(V[edge], 1e-300)) >= ratio_limit:
            raise DriftFailure("PV/V approaches 1 at the edge of the state space")
    K = np.array([np.max(PV - g * V) for g in GAMMA_GRID])
    kmin = K.min()
    idx = int(np.argmax(K <= kmin + 1e-12 * max(1.0, abs(kmin))))
    return float(GAMMA_GRID[idx]), float(max(K[idx], 0.0))


def level_pairs_tv(m: MarkovModel, K_prime: float) -> tuple[float, int, int]:
    """Largest TV between rows x, y with V(x) + V(y) <= K' (x != y)."""
    inside = np.flatnonzero(2 * m.V <= K_prime)
    if inside.size == 0:
        raise ValueError("level set {V(x) + V(y) <= K'} is empty")
    if m.kernel is not None:
        a, s = m.kernel
        best, bi, bj = 0.0, int(inside[0]), int(inside[0])
        x = m.states
        for i in inside:
            ok = inside[m.V[i] + m.V[inside] <= K_prime]
            j = ok[np.argmax(np.abs(x[ok] - x[i]))]
            tv = gaussian_tv(a * (x[j] - x[i]), s)
            if tv > best:
                best, bi, bj = tv, int(i), int(j)
        return best, bi, bj
    sub = m.P[inside]
    best, i, j = _kernels.pair_scan(sub, np.ones(m.n), 0.0 + 1.0, np.zeros(inside.size),
                                    m.V[inside], K_prime)
    if i < 0:
        return 0.0, int(inside[0]), int(inside[0])
    return best, int(inside[i]), int(inside[j])


def small_set_delta(m: MarkovModel, K_prime: float) -> float:
    tv, _, _ = level_pairs_tv(m, K_prime)
    return float(2.0 - tv)


def level_K_prime(gamma: float, K: float) -> float:
    return (2.0 * K + 2.0) / (1.0 - gamma)


def beta_supremum(gamma: float, K: float, delta: float) -> float:
    return delta / (4.0 * K) * (1.0 - gamma) / (1.0 + gamma)


@dataclass(frozen=True)
class HarrisCertificate:
    gamma: float
    K: float
    K_prime: float
    delta: float
    beta: float
    alpha: float
    validated: bool = False

    @property
    def alpha1(self) -> float:
        return 1.0 - 0.5 * self.beta / (1.0 - self.gamma + self.beta * self.K + self.beta)

    def invariants_hold(self) -> bool:
        return (0 < self.gamma < 1 and self.K > 0 and 0 < self.delta <= 2 and self.beta > 0
                and self.beta < beta_supremum(self.gamma, self.K, self.delta)
                and abs(self.alpha - max(self.alpha1, 1 - self.delta / 2)) <= 1e-15
                and 0 < self.alpha < 1)

    def to_text(self) -> str:
        lines = [f"{k} = {getattr(self, k):.17g}" for k in ("gamma", "K", "K_prime", "delta", "beta", "alpha")]
        lines.append(f"validated = {str(self.validated).lower()}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "HarrisCertificate":
        kv = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if line:
                k, _, v = line.partition("=")
                kv[k.strip()] = v.strip()
        return cls(**{k: float(kv[k]) for k in ("gamma", "K", "K_prime", "delta", "beta", "alpha")},
                   validated=kv.get("validated", "false") == "true")


def make_certificate(gamma: float, K: float, delta: float) -> HarrisCertificate:
    if not 0 < gamma < 1:
        raise CertificateError("gamma must lie in (0, 1)")
    if not K > 0:
        raise CertificateError("K must be positive")
    if not 0 < delta <= 2:
        raise CertificateError("delta must lie in (0, 2]; no small set, no certificate")
    beta = 0.5 * beta_supremum(gamma, K, delta)
    alpha1 = 1.0 - 0.5 * beta / (1.0 - gamma + beta * K + beta)
    alpha = max(alpha1, 1.0 - delta / 2.0)
    return HarrisCertificate(gamma, K, level_K_prime(gamma, K), delta, beta, alpha)


def certify(m: MarkovModel) -> HarrisCertificate:
    """Drift constants, small-set delta at the proof's level K', then the certificate."""
    gamma, K = drift_constants(m)
    if K <= 0:
        raise CertificateError("K = 0: the drift condition alone is degenerate")
    return make_certificate(gamma, K, small_set_delta(m, level_K_prime(gamma, K)))


# -- Lip_beta ---------------------------------------------------------------

def d_beta(x: int, y: int, V, beta: float) -> float:
    if x == y:
        return 0.0
    V = np.asarray(V, float)
    return float(2.0 + beta * V[x] + beta * V[y])


def lip_beta_seminorm(phi, V, beta: float) -> float:
    phi = np.asarray(phi, float)
    V = np.asarray(V, float)
    if phi.size < 2:
        return 0.0
    diff = np.abs(phi[:, None] - phi[None, :])
    den = 2.0 + beta * (V[:, None] + V[None, :])
    np.fill_diagonal(diff, 0.0)
    return float(np.max(diff / den))


def weighted_sup_norm(psi, V, beta: float) -> float:
    return float(np.max(np.abs(psi) / (1.0 + beta * np.asarray(V, float))))


def lip_equivalence_gap(phi, V, beta: float) -> tuple[float, float]:
    """(inf_c ||phi + c||_{beta V} by 1-D minimisation, ||phi||_{Lip_beta})."""
    phi = np.asarray(phi, float)
    span = float(np.max(np.abs(phi))) + 1.0
    res = optimize.minimize_scalar(lambda c: weighted_sup_norm(phi + c, V, beta),
                                   bounds=(-span, span), method="bounded",
                                   options={"xatol": 1e-14, "maxiter": 2000})
    return float(res.fun), lip_beta_seminorm(phi, V, beta)


def one_step_contraction(P, V, beta: float) -> tuple[float, int, int]:
    """max_{x≠y} sum_z (1 + beta V_z)|P_xz - P_yz| / d_beta(x, y) with the maximising pair.

    This is the exact operator norm of P on Lip_beta: for ||phi||_{Lip_beta} <= 1 the
    centred phi is bounded by 1 + beta V, and the signed weight attains the bound.
    """
    P = np.asarray(P, float)
    V = np.asarray(V, float)
    if P.shape[0] < 2:
        return 0.0, 0, 0
    return _kernels.pair_scan(P, 1.0 + beta * V, 2.0, beta * V, np.zeros_like(V), np.inf)


def stationary_distribution(P) -> np.ndarray:
    P = np.asarray(P, float)
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0, None)
    return pi / pi.sum()


@dataclass(frozen=True)
class ContractionReport:
    c_hat: float
    alpha: float
    witness: tuple[int, int]
    passed: bool
    stationary: np.ndarray = field(repr=False)
    history: np.ndarray = field(repr=False)      # max_x ||P^n δ_x - π||_{TV, beta V}, n = 0..n_steps
    tv_history: np.ndarray = field(repr=False)   # same in plain TV

    def halving_steps(self) -> int | None:
        if self.c_hat <= 0:
            return 1
        if self.c_hat >= 1:
            return None
        return int(np.ceil(np.log(2) / np.log(1 / self.c_hat)))


def contraction_verify(m: MarkovModel, cert: HarrisCertificate, n_steps: int = 50) -> ContractionReport:
    c, i, j = one_step_contraction(m.P, m.V, cert.beta)
    c = max(c, 0.0)
    pi = stationary_distribution(m.P)
    mu = np.eye(m.n)
    w = 1.0 + cert.beta * m.V
    hist, tv = [], []
    for _ in range(n_steps + 1):
        d = np.abs(mu - pi[None, :])
        hist.append(float(np.max(d @ w)))
        tv.append(float(np.max(d.sum(axis=1))))
        mu = mu @ m.P
    return ContractionReport(float(c), cert.alpha, (i, j), bool(c <= cert.alpha + 1e-12), pi,
                             np.asarray(hist), np.asarray(tv))


def random_finite_model(rng: np.random.Generator, n_min: int = 3, n_max: int = 8) -> MarkovModel:
    n = int(rng.integers(n_min, n_max + 1))
    conc = rng.uniform(0.2, 3.0)
    P = rng.dirichlet(np.full(n, conc), size=n)
    V = rng.exponential(rng.uniform(0.5, 5.0), size=n)
    V[rng.integers(n)] = 0.0
    return finite_model(P, V)


def certificate_soundness_sweep(rng: np.random.Generator, n_models: int = 200, max_tries: int = 100000):
    """Draw random finite models until ``n_models`` certify; return (c_hat, alpha) per model
    and the list of violations (model, certificate, report)."""
    rows, violations = [], []
    tries = 0
    while len(rows) < n_models and tries < max_tries:
        tries += 1
        m = random_finite_model(rng)
        try:
            cert = certify(m)
        except (CertificateError, DriftFailure, ValueError):
            continue
        if not cert.alpha < 1:
            continue
        cert = HarrisCertificate(**{**cert.__dict__, "validated": True})
        rep = contraction_verify(m, cert, n_steps=0)
        rows.append((rep.c_hat, cert.alpha))
        if not rep.passed:
            violations.append((m, cert, rep))
    return np.asarray(rows), violations


# -- invariant measure, empirically -----------------------------------------

@dataclass(frozen=True)
class InvariantCheck:
    modes: tuple
    target: np.ndarray
    empirical: np.ndarray      # (2, n_modes): from zero and from the far start
    se: np.ndarray
    max_z: float
    far_mean: np.ndarray       # |empirical mean| from the far start
    far_mean_target: np.ndarray  # |x0_k| e^{-lam_k t}
    far_mean_se: np.ndarray

    @property
    def passed(self) -> bool:
        return self.max_z <= 3.0


def empirical_invariant_check(p: LinearProblem, n_samples: int, t_burn: float, rng: np.random.Generator,
                              far_amplitude: float = 10.0, max_modes: int = 8) -> InvariantCheck:
    """Per-mode variances after burn-in from x0 = 0 and from a large fixed field."""
    lam_min = float(np.min(p.lam[p.grid.mask]))
    if p.non_dissipative or lam_min <= 0:
        raise NonDissipativeError("invariant measure needs lambda_k > 0 on all retained modes")
    if t_burn < 5.0 / lam_min:
        raise ConfigurationError(f"burn-in {t_burn:g} shorter than 5/lambda_min = {5 / lam_min:g}")
    spec = invariant_covariance(p)
    g = p.grid
    order = np.argsort(g.k2, axis=None, kind="stable")
    keep = half_plane(g).ravel()
    keep[0] = True
    flat = [int(i) for i in order if keep[i]][:max_modes]
    modes = tuple(np.unravel_index(flat, g.shape))
    far = np.where(g.mask, far_amplitude, 0.0).astype(complex)
    target = spec.variance[modes]
    emps, ses = [], []
    for x0 in (np.zeros(g.shape, complex), far):
        traj = evolve_exact(p.with_initial(SpectralField(g, x0)), np.array([t_burn]), rng, n_samples)
        c = traj.coeffs[:, -1][(slice(None),) + modes]
        mean = c.mean(axis=0)
        dev = np.abs(c - mean) ** 2 * n_samples / (n_samples - 1)
        emps.append(dev.mean(axis=0))
        ses.append(dev.std(axis=0, ddof=1) / np.sqrt(n_samples))
        if np.any(x0 != 0):
            far_mean = np.abs(mean)
            far_target = np.abs(x0[modes]) * np.exp(-p.lam[modes] * t_burn)
            far_se = np.sqrt(emps[-1] / n_samples)
    emp, se = np.asarray(emps), np.asarray(ses)
    z = np.abs(emp - target[None, :]) / se
    return InvariantCheck(modes, target, emp, se, float(z.max()), far_mean, far_target, far_se)
