"""Acceptance criteria 1-9 at their stated sizes and tolerances.

Each test prints one PASS/FAIL line; the lines are repeated in the pytest terminal
summary. Criterion 1 compares against the covariance formula exactly as printed
(½(√(s+t) - √|s-t|) = 0.70711 at s = t = 1). For white noise normalised against
Lebesgue measure the true value is that number divided by √π, so this criterion
is expected to fail; the simulation agrees with the corrected value instead.
"""
import time

import numpy as np
from scipy import integrate

from spdelab import markov, semilinear
from spdelab.cli import main, random_step_process
from spdelab.gaussian import GaussianSpec, sample, stream
from spdelab.linear import (
    LinearProblem, heat_holder_exponents, invariant_covariance, lyapunov_identity_residual, ou_limit_target,
    regularity_report, verify_heat_covariance, verify_ou_limit,
)
from spdelab.spectral import make_grid
from spdelab.stochastic import ito_isometry_check

from conftest import acceptance_line, random_field


def test_criterion_1_heat_temporal_covariance():
    t0 = time.perf_counter()
    rep = verify_heat_covariance(N=2048, t_max=1.0, n_samples=100_000, rng=stream(1, 0), lag_levels=(2, 3, 4, 5, 6))
    wall = time.perf_counter() - t0
    printed = rep.row("C(t,t) vs printed formula")
    slope = rep.row("structure-function slope")
    full = rep.row("C(t,t) vs full-line value")
    ok = printed.passed and slope.passed and wall <= 60
    acceptance_line(1, ok, f"E u(1,0)² = {printed.empirical:.5f} ± {printed.se:.5f} vs 0.70711 "
                           f"(z = {abs(printed.empirical - printed.target) / printed.se:.0f}); "
                           f"vs 1/√(2π) = {full.target:.5f}: {'ok' if full.passed else 'off'}; "
                           f"slope {slope.empirical:.3f} (0.50 ± 0.05); {wall:.0f} s")
    assert slope.passed
    assert wall <= 60
    assert printed.passed, "printed covariance target is not met (see module docstring)"


def test_criterion_2_holder_exponents():
    t0 = time.perf_counter()
    t_est, x_est = heat_holder_exponents(N=1024, n_paths=200, rng=stream(2, 0))
    wall = time.perf_counter() - t0
    ok = abs(t_est.alpha - 0.25) <= 0.03 and abs(x_est.alpha - 0.5) <= 0.03 and wall <= 120
    acceptance_line(2, ok, f"time {t_est.alpha:.3f} (0.25 ± 0.03), space {x_est.alpha:.3f} (0.50 ± 0.03); {wall:.0f} s")
    assert ok


def test_criterion_3_ou_stationary_limit():
    details, ok = [], True
    for a in (1.0, 4.0):
        # confirm the closed-form constants by quadrature of the spectral density
        for r in (0.0, 0.5, 1.5):
            if r == 0.0:
                val, _ = integrate.quad(lambda k: 1 / (k * k + a), 0, np.inf)
            else:
                val, _ = integrate.quad(lambda k: 1 / (k * k + a), 0, np.inf, weight="cos", wvar=r)
            assert abs(val / (2 * np.pi) - ou_limit_target(a, r)) < 1e-9
        rep = verify_ou_limit(a, rng=stream(3, int(a)), tolerance=0.05)
        C, c = rep.row("C_hat"), rep.row("c_hat")
        ok &= C.passed and c.passed
        details.append(f"a={a:g}: C {C.empirical:.4f}/{C.target:.4f}, c {c.empirical:.4f}/{c.target:.4f}")
    acceptance_line(3, ok, "; ".join(details) + " (5%)")
    assert ok


def test_criterion_4_invariant_measure():
    g = make_grid(1, 32)
    p = LinearProblem(g, g.k2 + 1.0, 1.0)
    chk = markov.empirical_invariant_check(p, 20_000, 5.0, stream(4, 0))
    probes = [sample(GaussianSpec(g, np.where(g.mask, 1.0, 0.0)), stream(4, 1 + i)) for i in range(8)]
    res = lyapunov_identity_residual(p, invariant_covariance(p), probes)
    ok = chk.passed and res <= 1e-12
    acceptance_line(4, ok, f"max z over {chk.empirical.size} (start, mode) pairs = {chk.max_z:.2f} (≤ 3); "
                           f"Lyapunov residual {res:.1e} (≤ 1e-12)")
    assert ok


def test_criterion_5_ito_isometry():
    g = make_grid(1, 8)
    zs = []
    for i in range(200):
        rng = stream(5, i)
        phi = random_step_process(rng, g, 5)
        emp, se, target = ito_isometry_check(phi, rng, 100_000)
        zs.append(abs(emp - target) / se)
    zs = np.asarray(zs)
    ok = bool(np.all(zs <= 3))
    acceptance_line(5, ok, f"200 cases at 1e5 repetitions, max z = {zs.max():.2f}, cases beyond 3 se: {(zs > 3).sum()}")
    assert ok


def test_criterion_6_navier_stokes_structure():
    rng = stream(6, 0)
    g = make_grid(2, 128)
    worst = 0.0
    for _ in range(100):
        w = random_field(g, rng, decay=1.0, zero_mean=True)
        F = semilinear.ns_vorticity_nonlinearity(w)
        ip = abs(np.sum(w.coeffs * np.conj(F.coeffs)).real)
        worst = max(worst, ip / np.sqrt(np.sum(np.abs(w.coeffs) ** 2) * np.sum(np.abs(F.coeffs) ** 2)))
    w0 = random_field(g, rng, decay=1.5, zero_mean=True)
    q = np.zeros(g.shape)
    q[1, 2] = q[-1, -2] = 0.5
    nu = 0.1
    prob = semilinear.navier_stokes_problem(g, nu, q, w0, 0.01, 10.0)
    t0 = time.perf_counter()
    m = semilinear.run(prob, stream(6, 1)).monitor
    wall = time.perf_counter() - t0
    en = semilinear.ns_energy_monitor(m, nu, slack=0.10)
    ok = (worst <= 1e-11 and not m.blew_up and max(m.divergence) <= 1e-12 and max(m.mean) <= 1e-12
          and en.violations == 0 and wall <= 120)
    acceptance_line(6, ok, f"orthogonality {worst:.1e} (≤ 1e-11); divergence {max(m.divergence):.1e}, "
                           f"mean {max(m.mean):.1e} (≤ 1e-12); energy violations {en.violations} over "
                           f"{len(en.lhs)} steps; {wall:.0f} s")
    assert ok


def test_criterion_7_harris_certificate():
    cert = markov.make_certificate(0.5, 1.0, 0.5)
    rows, violations = markov.certificate_soundness_sweep(stream(7, 0), 200)
    ms = np.linspace(0, 6, 61)
    gap = min(markov.gaussian_tv_quadrature(m) - markov.gaussian_tv_lower_bound(m) for m in ms)
    ok = abs(cert.alpha - 0.980769) < 1e-6 and len(rows) == 200 and not violations and gap >= -1e-12
    acceptance_line(7, ok, f"alpha = {cert.alpha:.6f}; {len(rows)} certified models, {len(violations)} violations, "
                           f"max c1/alpha = {np.max(rows[:, 0] / rows[:, 1]):.4f}; min TV - bound = {gap:.2e}")
    assert ok


def test_criterion_8_regularity_dichotomy():
    rep = regularity_report(alpha=0.0, s_values=(0.4, 0.6), Ns=(128, 256, 512, 1024), n_samples=200,
                            rng=stream(8, 0))
    ok = rep.verdicts[0.4] == "saturates" and rep.verdicts[0.6] == "grows"
    means = {s: [m for (_, ss, m, _) in rep.rows if ss == s] for s in (0.4, 0.6)}
    acceptance_line(8, ok, "; ".join(f"s={s}: {rep.verdicts[s]} " + "/".join(f"{v:.3f}" for v in means[s])
                                     for s in (0.4, 0.6)))
    assert ok


def test_criterion_9_property_suite(capsys):
    t0 = time.perf_counter()
    code = main(["verify-all", "--quick", "--seed", "9"])
    wall = time.perf_counter() - t0
    out = capsys.readouterr().out
    n_rows = sum(1 for line in out.splitlines() if line.startswith(("PASS  ", "FAIL  ")))
    ok = code == 0 and wall <= 300
    acceptance_line(9, ok, f"spde verify-all --quick: exit {code}, {n_rows} checks, {wall:.1f} s (≤ 300 s)")
    assert ok
