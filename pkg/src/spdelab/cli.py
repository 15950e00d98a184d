"""`spde` command line: run configured experiments, the property suite, or print default configs."""
from __future__ import annotations

import argparse
import csv
import io
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gaussian, linear, markov, semilinear, spectral, stochastic
from .gaussian import stream
from .io import ensemble_to_bytes

PROVENANCE = ("paper-formula", "derived-oracle", "trivial")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


# -- config schema ----------------------------------------------------------

def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _grid_ok(dim):
    def check(n):
        spectral.make_grid(dim, n)
    return check


def _positive(v):
    vals = v if isinstance(v, tuple) else (v,)
    if not vals or any(x <= 0 for x in vals):
        raise ValueError("must be positive")


def _nonneg(v):
    if v < 0:
        raise ValueError("must be non-negative")


def _unit_open(v):
    if not 0 < v < 1:
        raise ValueError("must lie in (0, 1)")


def _delta(v):
    if not 0 < v <= 2:
        raise ValueError("must lie in (0, 2]")


def _at_least(m):
    def check(v):
        if v < m:
            raise ValueError(f"must be >= {m}")
    return check


def _grids(dim):
    def check(ns):
        if not ns:
            raise ValueError("need at least one value")
        for n in ns:
            spectral.make_grid(dim, n)
    return check


# key -> (parser, default, validator)
SCHEMAS: dict[str, dict] = {
    "heat-covariance": {
        "N": (int, 2048, _grid_ok(1)), "samples": (int, 100_000, _at_least(2)), "nu": (float, 1.0, _positive),
        "t": (float, 1.0, _positive)},
    "ou-limit": {
        "a": (_floats, (1.0, 4.0), _positive), "N": (int, 512, _grid_ok(1)), "samples": (int, 10_000, _at_least(2)),
        "relax": (float, 10.0, _at_least(5.0)), "tolerance": (float, 0.05, _positive)},
    "holder": {
        "N": (int, 1024, _grid_ok(1)), "paths": (int, 200, _at_least(100)), "tolerance": (float, 0.03, _positive)},
    "regularity": {
        "Ns": (_ints, (128, 256, 512, 1024), _grids(1)), "s": (_floats, (0.4, 0.6), lambda v: None),
        "samples": (int, 200, _at_least(2)), "alpha": (float, 0.0, _nonneg)},
    "invariant": {
        "N": (int, 32, _grid_ok(1)), "samples": (int, 20_000, _at_least(10)), "t_burn": (float, 5.0, _positive),
        "mass": (float, 1.0, _positive), "q": (float, 1.0, _positive), "modes": (int, 8, _at_least(1))},
    "ito-isometry": {
        "N": (int, 8, _grid_ok(1)), "cases": (int, 200, _at_least(1)), "reps": (int, 100_000, _at_least(10)),
        "max_intervals": (int, 5, _at_least(1))},
    "allen-cahn": {
        "N": (int, 128, _grid_ok(1)), "dt": (float, 0.01, _positive), "t_end": (float, 50.0, _positive),
        "noise": (float, 0.1, _nonneg), "bound": (float, 1.5, _positive), "snapshot": (_bool, False, lambda v: None)},
    "navier-stokes": {
        "N": (int, 128, _grid_ok(2)), "dt": (float, 0.01, _positive), "t_end": (float, 10.0, _positive),
        "nu": (float, 0.1, _positive), "forcing": (float, 0.5, _nonneg), "slack": (float, 0.10, _nonneg),
        "snapshot": (_bool, False, lambda v: None)},
    "harris-certify": {
        "gamma": (float, 0.5, _unit_open), "K": (float, 1.0, _positive), "delta": (float, 0.5, _delta),
        "models": (int, 200, _at_least(1))},
}
COMMON = {"kind", "seed", "output"}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    params: dict = field(default_factory=dict)
    output: str | None = None

    def echo(self) -> str:
        lines = [f"kind = {self.kind}", f"seed = {self.seed}"]
        if self.output is not None:
            lines.append(f"output = {self.output}")
        lines += [f"{k} = {_fmt(v)}" for k, v in self.params.items()]
        return "\n".join(lines) + "\n"


def parse_pairs(text: str) -> tuple[list[tuple[str, str]], list[str]]:
    pairs, errors = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        k, _, v = line.partition("=")
        pairs.append((k.strip(), v.strip()))
    return pairs, errors


def validate_config(text: str) -> ExperimentConfig:
    """Parse flat ``key = value`` text; raises ConfigError with one message per bad field."""
    pairs, errors = parse_pairs(text)
    raw: dict[str, str] = {}
    for k, v in pairs:
        if k in raw:
            errors.append(f"{k}: duplicate key")
        raw[k] = v
    kind = raw.get("kind")
    if not kind:
        raise ConfigError(errors + ["kind missing"])
    if kind not in SCHEMAS:
        raise ConfigError(errors + [f"kind: unknown experiment {kind!r} (choose from {', '.join(SCHEMAS)})"])
    schema = SCHEMAS[kind]
    seed = None
    if "seed" not in raw:
        errors.append("seed: missing (a seed is mandatory)")
    else:
        try:
            seed = int(raw["seed"])
            if seed < 0:
                raise ValueError
        except ValueError:
            errors.append(f"seed: expected a non-negative integer, got {raw['seed']!r}")
    for k in raw:
        if k not in COMMON and k not in schema:
            errors.append(f"{k}: unknown key for kind {kind}")
    params = {}
    for k, (parse, default, check) in schema.items():
        if k not in raw:
            params[k] = default
            continue
        try:
            val = parse(raw[k])
        except ValueError as exc:
            errors.append(f"{k}: cannot parse {raw[k]!r} ({exc})")
            continue
        try:
            check(val)
        except ValueError as exc:
            errors.append(f"{k}: {exc}")
            continue
        params[k] = val
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(kind, seed, params, raw.get("output"))


def default_config_text(kind: str) -> str:
    if kind not in SCHEMAS:
        raise ConfigError([f"kind: unknown experiment {kind!r}"])
    cfg = ExperimentConfig(kind, 0, {k: d for k, (_, d, _) in SCHEMAS[kind].items()})
    return cfg.echo()


# -- reports ----------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    name: str
    empirical: float
    target: float
    tolerance: float
    provenance: str
    passed: bool

    def __post_init__(self):
        if self.provenance not in PROVENANCE:
            raise ValueError(f"bad provenance {self.provenance!r}")


def row_within(name, empirical, target, tolerance, provenance) -> ReportRow:
    return ReportRow(name, float(empirical), float(target), float(tolerance), provenance,
                     bool(abs(empirical - target) <= tolerance))


def row_at_most(name, value, bound, provenance, slack: float = 0.0) -> ReportRow:
    """Inequality row: passes when value <= bound + slack; tolerance column holds the slack."""
    return ReportRow(name, float(value), float(bound), float(slack), provenance, bool(value <= bound + slack))


def row_at_least(name, value, bound, provenance, slack: float = 0.0) -> ReportRow:
    return ReportRow(name, float(value), float(bound), float(slack), provenance, bool(value >= bound - slack))


def row_flag(name, ok: bool, provenance="trivial") -> ReportRow:
    return ReportRow(name, float(ok), 1.0, 0.0, provenance, bool(ok))


@dataclass
class ReportBundle:
    config: ExperimentConfig
    rows: list[ReportRow] = field(default_factory=list)
    wall_clock: float = 0.0
    artifacts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @staticmethod
    def versions() -> dict:
        import scipy
        out = {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}
        try:
            import numba
            out["numba"] = numba.__version__
        except ImportError:  # pragma: no cover
            pass
        from . import _kernels
        out["kernels"] = "numba" if _kernels.USE_NUMBA else "numpy"
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["name", "empirical", "target", "tolerance", "provenance", "pass"])
        for r in self.rows:
            wr.writerow([r.name, f"{r.empirical:.17g}", f"{r.target:.17g}", f"{r.tolerance:.17g}",
                         r.provenance, int(r.passed)])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"# wall_clock_s = {self.wall_clock:.3f}"]
        lines += [f"# {k} = {v}" for k, v in self.versions().items()]
        lines.append(f"# overall = {'PASS' if self.passed else 'FAIL'}")
        return self.config.echo() + "\n".join(lines) + "\n"

    def write(self, outdir) -> Path:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.csv", "w", newline="") as fh:
            fh.write(self.to_csv())
        (out / "bundle.txt").write_text(self.summary())
        for name, data in self.artifacts.items():
            if isinstance(data, bytes):
                (out / name).write_bytes(data)
            else:
                with open(out / name, "w", newline="") as fh:
                    fh.write(data)
        return out


# -- experiment runners -----------------------------------------------------

def _from_cov_rows(rows, prefix="") -> list[ReportRow]:
    out = []
    for r in rows:
        tol = r.tolerance if r.tolerance is not None else (3.0 * r.se if r.se > 0 else 1e-12)
        out.append(ReportRow(prefix + r.label, r.empirical, r.target, tol, r.provenance, r.passed))
    return out


def _run_heat(c: ExperimentConfig, b: ReportBundle):
    p = c.params
    rep = linear.verify_heat_covariance(N=p["N"], nu=p["nu"], t_max=p["t"], n_samples=p["samples"],
                                        rng=stream(c.seed, 0))
    b.rows += _from_cov_rows(rep.rows)
    b.artifacts["covariance.csv"] = rep.to_csv()


def _run_ou(c: ExperimentConfig, b: ReportBundle):
    p = c.params
    for i, a in enumerate(p["a"]):
        rep = linear.verify_ou_limit(a, N=p["N"], t_relax_multiplier=p["relax"], n_samples=p["samples"],
                                     rng=stream(c.seed, i), tolerance=p["tolerance"])
        b.rows += _from_cov_rows(rep.rows, prefix=f"a={a:g} ")


def _run_holder(c: ExperimentConfig, b: ReportBundle):
    p = c.params
    t_est, x_est = linear.heat_holder_exponents(N=p["N"], n_paths=p["paths"], rng=stream(c.seed, 0))
    b.rows.append(row_within("time exponent", t_est.alpha, 0.25, p["tolerance"], "paper-formula"))
    b.rows.append(row_within("space exponent", x_est.alpha, 0.5, p["tolerance"], "paper-formula"))


def _run_regularity(c: ExperimentConfig, b: ReportBundle):
    p = c.params
    rep = linear.regularity_report(alpha=p["alpha"], s_values=p["s"], Ns=p["Ns"], n_samples=p["samples"],
                                   rng=stream(c.seed, 0))
    for s in p["s"]:
        want = "saturates" if s < rep.critical_s else "grows"
        b.rows.append(row_flag(f"s={s:g} {want}", rep.verdicts[s] == want, "paper-formula"))
    b.rows.append(row_within("time exponent of L2 increments", rep.time_exponent, rep.time_target,
                             max(0.03, 3 * rep.time_exponent_se), "derived-oracle"))
    b.artifacts["regularity.csv"] = rep.to_csv()


def _run_invariant(c: ExperimentConfig, b: ReportBundle):
    p = c.params
    g = spectral.make_grid(1, p["N"])
    prob = linear.LinearProblem(g, g.k2 + p["mass"], p["q"])
    chk = markov.empirical_invariant_check(prob, p["samples"], p["t_burn"], stream(c.seed, 0),
                                           max_modes=p["modes"])
    for start, emp, se in zip(("zero", "far"), chk.empirical, chk.se):
        for j, k in enumerate(zip(*chk.modes)):
            b.rows.append(row_within(f"var mode {k} from {start}", emp[j], chk.target[j], 3 * se[j], "paper-formula"))
    q_inf = linear.invariant_covariance(prob)
    probes = [gaussian.sample(gaussian.GaussianSpec(g, np.where(g.mask, 1.0, 0.0)), stream(c.seed, 1 + i))
              for i in range(4)]
    b.rows.append(row_at_most("Lyapunov identity residual", linear.lyapunov_identity_residual(prob, q_inf, probes),
                              1e-12, "paper-formula"))


def random_step_process(rng: np.random.Generator, grid, max_intervals: int) -> stochastic.StepProcess:
    n = int(rng.integers(1, max_intervals + 1))
    t = np.concatenate(([0.0], np.sort(rng.uniform(0.05, 2.0, n - 1)), [2.0 + rng.uniform(0, 1)]))
    t = np.unique(t)
    ops = []
    for _ in range(len(t) - 1):
        sym = rng.uniform(0.0, 2.0, grid.n)
        sym = 0.5 * (sym + spectral.reflect(sym))
        ops.append(spectral.DiagonalOperator(grid, sym))
    return stochastic.StepProcess(t, tuple(ops))


def _run_ito(c: ExperimentConfig, b: ReportBundle):
    p = c.params
    g = spectral.make_grid(1, p["N"])
    for i in range(p["cases"]):
        rng = stream(c.seed, i)
        phi = random_step_process(rng, g, p["max_intervals"])
        emp, se, target = stochastic.ito_isometry_check(phi, rng, p["reps"])
        b.rows.append(row_within(f"case {i}", emp, target, 3 * se, "paper-formula"))


def _run_allen_cahn(c: ExperimentConfig, b: ReportBundle):
    p = c.params
    g = spectral.make_grid(1, p["N"])
    prob = semilinear.reaction_problem(g, (0.0, 1.0, 0.0, -1.0), spectral.SpectralField.zeros(g), p["dt"], p["t_end"],
                                       q=p["noise"] * np.ones(g.shape))
    res = semilinear.run(prob, stream(c.seed, 0))
    mon = res.monitor
    b.rows.append(row_flag("no blow-up", not mon.blew_up))
    b.rows.append(row_at_most("max sup-norm", max(mon.sup_norm), p["bound"], "derived-oracle"))
    conv = semilinear.convexity_monitor(mon, prob.nonlinearity)
    b.rows.append(row_flag("convexity monitor clear", not conv.flag, "derived-oracle"))
    b.artifacts["timeseries.csv"] = mon.to_csv()
    if p["snapshot"]:
        b.artifacts["final.bin"] = ensemble_to_bytes(res.final.grid, res.final.coeffs, c.seed)


def _run_navier_stokes(c: ExperimentConfig, b: ReportBundle):
    p = c.params
    g = spectral.make_grid(2, p["N"])
    rng = stream(c.seed, 0)
    std = np.where(g.k2 > 0, (1 + g.k2) ** -1.5, 0.0)
    w0 = spectral.SpectralField(g, gaussian.hermitian_noise(g, std, rng))
    q = np.zeros(g.shape)
    q[1, 2] = q[-1, -2] = p["forcing"]
    prob = semilinear.navier_stokes_problem(g, p["nu"], q, w0, p["dt"], p["t_end"])
    res = semilinear.run(prob, stream(c.seed, 1))
    m = res.monitor
    b.rows.append(row_flag("no blow-up", not m.blew_up))
    b.rows.append(row_at_most("max orthogonality residual", max(m.orthogonality), 1e-11, "paper-formula"))
    b.rows.append(row_at_most("max relative divergence", max(m.divergence), 1e-12, "trivial"))
    b.rows.append(row_at_most("max |mean(w)|", max(m.mean), 1e-14, "trivial"))
    en = semilinear.ns_energy_monitor(m, p["nu"], slack=p["slack"])
    b.rows.append(row_at_most("energy inequality violations", en.violations, 0, "paper-formula"))
    b.artifacts["timeseries.csv"] = m.to_csv()
    if p["snapshot"]:
        b.artifacts["final.bin"] = ensemble_to_bytes(res.final.grid, res.final.coeffs, c.seed)


def _run_harris(c: ExperimentConfig, b: ReportBundle):
    p = c.params
    cert = markov.make_certificate(p["gamma"], p["K"], p["delta"])
    beta = 0.5 * p["delta"] / (4 * p["K"]) * (1 - p["gamma"]) / (1 + p["gamma"])
    a1 = 1 - 0.5 * beta / (1 - p["gamma"] + beta * p["K"] + beta)
    b.rows.append(row_within("alpha", cert.alpha, max(a1, 1 - p["delta"] / 2), 1e-15, "paper-formula"))
    b.rows.append(row_flag("certificate invariants", cert.invariants_hold()))
    b.artifacts["certificate.txt"] = cert.to_text()
    rows, viol = markov.certificate_soundness_sweep(stream(c.seed, 0), p["models"])
    b.rows.append(row_within("certified random models", len(rows), p["models"], 0, "trivial"))
    b.rows.append(row_at_most("contraction violations (c1 > alpha)", len(viol), 0, "derived-oracle"))
    ms = np.linspace(0, 6, 61)
    gap = min(markov.gaussian_tv_quadrature(m) - markov.gaussian_tv_lower_bound(m) for m in ms)
    b.rows.append(row_at_least("min over m of Gaussian TV minus lower bound", gap, 0.0, "paper-formula", slack=1e-12))


RUNNERS = {
    "heat-covariance": _run_heat, "ou-limit": _run_ou, "holder": _run_holder, "regularity": _run_regularity,
    "invariant": _run_invariant, "ito-isometry": _run_ito, "allen-cahn": _run_allen_cahn,
    "navier-stokes": _run_navier_stokes, "harris-certify": _run_harris,
}


def run_experiment(cfg: ExperimentConfig) -> ReportBundle:
    b = ReportBundle(cfg)
    t0 = time.perf_counter()
    try:
        RUNNERS[cfg.kind](cfg, b)
    except (semilinear.BlowUp, FloatingPointError, OverflowError) as exc:
        b.rows.append(ReportRow(f"numerical failure: {exc}", float("nan"), 0.0, 0.0, "trivial", False))
    b.wall_clock = time.perf_counter() - t0
    return b


# -- property suite ---------------------------------------------------------

def property_suite(seed: int = 0, quick: bool = True) -> list[ReportRow]:
    """Structural invariants across the modules; sizes shrink in quick mode."""
    rows: list[ReportRow] = []
    rng = stream(seed, 1000)
    n_fields = 20 if quick else 100

    # spectral: Hermitian symmetry, Parseval, interpolation
    herm, pars, interp = 0.0, 0.0, 0.0
    for i in range(n_fields):
        dim = 1 + i % 2
        g = spectral.make_grid(dim, 32 if dim == 2 else 64)
        std = (1 + g.k2) ** -1.0
        u = spectral.SpectralField(g, gaussian.hermitian_noise(g, std, rng))
        v = spectral.SpectralField(g, gaussian.hermitian_noise(g, std, rng))
        outs = [spectral.apply_multiplier(u, spectral.laplacian(g)), spectral.dealiased_product(u, v),
                spectral.apply_multiplier(u, spectral.bessel_potential(g, -0.7))]
        if dim == 2:
            c0 = u.coeffs[0].copy()
            c0[0, 0] = 0.0
            outs += [spectral.leray_project(spectral.gradient(u)), spectral.biot_savart(spectral.SpectralField(g, c0))]
        herm = max(herm, max(o.imag_residual() for o in outs))
        vals = u.to_values()[0]
        quad = float(np.mean(vals**2))
        pars = max(pars, abs(spectral.sobolev_norm(u, 0) ** 2 - quad) / quad)
        s, r, t = np.sort(rng.uniform(0, 3, 3))
        lhs = spectral.sobolev_norm(u, r) ** (t - s)
        rhs = spectral.sobolev_norm(u, t) ** (r - s) * spectral.sobolev_norm(u, s) ** (t - r)
        interp = max(interp, lhs / rhs - 1.0)
    rows.append(row_at_most("spectral: imaginary residual after operations", herm, 1e-12, "trivial"))
    rows.append(row_at_most("spectral: Parseval relative error", pars, 1e-10, "trivial"))
    rows.append(row_at_most("spectral: interpolation inequality excess", interp, 0.0, "paper-formula", slack=1e-12))

    # gaussian: rotation invariance, dilate singularity, normality
    g = spectral.make_grid(1, 4)
    spec = gaussian.GaussianSpec(g, np.where(g.mask, (1 + g.k2) ** -0.5, 0))
    rot = gaussian.rotation_invariance_check(spec, stream(seed, 1001), 0.7, 20_000 if quick else 100_000)
    rows.append(row_at_most("gaussian: rotation invariance max z", rot.max_z, 3.0, "paper-formula"))
    g = spectral.make_grid(1, 4096 if quick else 16384)
    spec = gaussian.GaussianSpec(g, np.where(g.mask, (1 + g.k2) ** -0.75, 0))
    M = g.n_modes
    band = 4 * np.sqrt(2.0 / M)
    s1 = gaussian.dilate_singularity_diagnostic(spec, 1.0, M, stream(seed, 1002))
    s2 = gaussian.dilate_singularity_diagnostic(spec, 1.1, M, stream(seed, 1003))
    rows.append(row_within("gaussian: whitened statistic, c = 1", s1, 1.0, band, "derived-oracle"))
    rows.append(row_within("gaussian: whitened statistic, c = 1.1", s2, 1.21, 1.21 * band, "derived-oracle"))
    g = spectral.make_grid(1, 8)
    spec = gaussian.GaussianSpec(g, np.where(g.mask, 1.0 / (1 + g.k2), 0))
    kurt, kband = gaussian.kurtosis_check(spec, stream(seed, 1004), 20_000 if quick else 100_000)
    rows.append(row_at_most("gaussian: max |kurtosis - 3|", float(np.max(np.abs(kurt - 3))), kband, "derived-oracle"))

    # stochastic / linear: Chapman-Kolmogorov at the mode level and for whole fields
    ck = chapman_kolmogorov_z(stream(seed, 1005), 40_000 if quick else 200_000)
    rows.append(row_at_most("linear: Chapman-Kolmogorov max z", ck, 3.0, "derived-oracle"))
    sg = semigroup_restart_z(stream(seed, 1006), 20_000 if quick else 100_000)
    rows.append(row_at_most("linear: restart consistency max z", sg, 3.0, "paper-formula"))

    # semilinear: integrator order and NS skew-symmetry
    g = spectral.make_grid(1, 32)
    u0 = spectral.SpectralField.from_values(g, 0.8 * np.cos(g.points) + 0.3 * np.sin(2 * g.points))
    prob = semilinear.reaction_problem(g, (0, 1, 0, -1), u0, 0.05, 1.0, q=0.5 * (1 + g.k2) ** -1.0)
    _, ratios = semilinear.strong_order_check(prob, 4, 400 if quick else 1000, stream(seed, 1007))
    rows.append(row_within("semilinear: min error ratio per halving", float(ratios.min()), 2.0, 0.3, "derived-oracle"))
    rows.append(row_within("semilinear: max error ratio per halving", float(ratios.max()), 2.0, 0.3, "derived-oracle"))
    g = spectral.make_grid(2, 32)
    worst = 0.0
    for _ in range(n_fields):
        std = np.where(g.k2 > 0, (1 + g.k2) ** -1.0, 0)
        w = spectral.SpectralField(g, gaussian.hermitian_noise(g, std, rng))
        F = semilinear.ns_vorticity_nonlinearity(w)
        worst = max(worst, abs(w.inner(F)) / np.sqrt(w.inner(w) * F.inner(F)))
    rows.append(row_at_most("semilinear: NS skew-symmetry residual", worst, 1e-11, "paper-formula"))
    return rows


def chapman_kolmogorov_z(rng: np.random.Generator, n: int, n_compose: int = 8) -> float:
    """n compositions of ou_step(dt) vs one ou_step(n dt): two-sample z for mean and variance."""
    lam, q, dt, x0 = 1.3, 0.8, 0.07, 1.5
    a = np.full(n, x0)
    for _ in range(n_compose):
        a = stochastic.ou_step(a, lam, q, dt, rng)
    b = stochastic.ou_step(np.full(n, x0), lam, q, n_compose * dt, rng)
    return _two_sample_z(a, b)


def _two_sample_z(a, b) -> float:
    n = len(a)
    zm = abs(a.mean() - b.mean()) / np.sqrt((a.var(ddof=1) + b.var(ddof=1)) / n)
    da, db = (a - a.mean()) ** 2, (b - b.mean()) ** 2
    zv = abs(da.mean() - db.mean()) / np.sqrt((da.var(ddof=1) + db.var(ddof=1)) / n)
    return float(max(zm, zv))


def semigroup_restart_z(rng: np.random.Generator, n: int) -> float:
    """evolve_exact to s + t directly vs restarting at s; real part of a low mode."""
    g = spectral.make_grid(1, 16)
    p = linear.LinearProblem(g, g.k2 + 0.5, 1.0, spectral.SpectralField.from_modes(g, {(1,): 2.0, (0,): 1.0}))
    s, t = 0.3, 0.4
    direct = linear.evolve_exact(p, [s + t], rng, n).coeffs[:, -1]
    mid = linear.evolve_exact(p, [s], rng, n).coeffs[:, -1]
    restart = np.empty_like(direct)
    for chunk in range(0, n, 5000):
        sl = slice(chunk, min(n, chunk + 5000))
        sub = mid[sl]
        sd = np.sqrt(stochastic.ou_variance(p.lam, p.q, t))
        restart[sl] = np.exp(-p.lam * t) * sub + gaussian.hermitian_noise(g, sd, rng, (sub.shape[0],))
    z = 0.0
    for k in (0, 1, 3):
        z = max(z, _two_sample_z(direct[:, k].real, restart[:, k].real))
    return z


# -- entry point ------------------------------------------------------------

def _print_rows(rows, stream_out):
    for r in rows:
        stream_out.write(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.empirical:.6g} "
                         f"(target {r.target:.6g}, tol {r.tolerance:.3g}, {r.provenance})\n")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="spde", description="Stochastic PDE experiments and checks.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    pr = sub.add_parser("run", help="run an experiment from a key = value config file")
    pr.add_argument("config")
    pr.add_argument("--output", help="override the output directory")
    pv = sub.add_parser("verify-all", help="run the property suite")
    pv.add_argument("--quick", action="store_true")
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--output")
    pp = sub.add_parser("print-config", help="print a default config for an experiment kind")
    pp.add_argument("kind", choices=sorted(SCHEMAS))
    args = ap.parse_args(argv)

    if args.cmd == "print-config":
        sys.stdout.write(default_config_text(args.kind))
        return 0

    if args.cmd == "verify-all":
        t0 = time.perf_counter()
        rows = property_suite(args.seed, args.quick)
        bundle = ReportBundle(ExperimentConfig("property-suite", args.seed, {"quick": args.quick}), rows,
                              time.perf_counter() - t0)
        _print_rows(rows, sys.stdout)
        if args.output:
            bundle.write(args.output)
        sys.stdout.write(f"{'PASS' if bundle.passed else 'FAIL'} ({bundle.wall_clock:.1f} s)\n")
        return 0 if bundle.passed else 1

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        sys.stderr.write(f"config: {exc}\n")
        return 2
    try:
        cfg = validate_config(text)
    except ConfigError as exc:
        for e in exc.errors:
            sys.stderr.write(f"config error: {e}\n")
        return 2
    bundle = run_experiment(cfg)
    _print_rows(bundle.rows, sys.stdout)
    outdir = args.output or cfg.output
    if outdir:
        bundle.write(outdir)
    sys.stdout.write(f"{'PASS' if bundle.passed else 'FAIL'} ({bundle.wall_clock:.1f} s)\n")
    return 0 if bundle.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
