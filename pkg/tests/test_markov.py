import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, optimize, stats

from spdelab.linear import ConfigurationError, LinearProblem, NonDissipativeError
from spdelab.markov import (
    CertificateError, DriftFailure, HarrisCertificate, beta_supremum, certificate_soundness_sweep, certify,
    contraction_verify, d_beta, drift_constants, empirical_invariant_check, finite_model, gaussian_lattice_model,
    gaussian_tv, gaussian_tv_lower_bound, gaussian_tv_quadrature, level_K_prime, lip_beta_seminorm,
    lip_equivalence_gap, make_certificate, one_step_contraction, random_finite_model, small_set_delta,
    stationary_distribution, total_variation, weighted_sup_norm, weighted_tv,
)
from spdelab.spectral import make_grid

TWO_STATE = ([[0.9, 0.1], [0.2, 0.8]], [0.0, 1.0])


# -- drift ---------------------------------------------------------------------

def test_drift_trivial_lyapunov():  # [TRIVIAL]
    assert drift_constants(finite_model(np.eye(3), np.zeros(3))) == (0.5, 0.0)


def test_drift_two_state():  # [DERIVED] PV = (0.1, 0.8), K(γ) = max(0.1, 0.8 - γ)
    m = finite_model(*TWO_STATE)
    np.testing.assert_allclose(m.PV(), [0.1, 0.8])
    gamma, K = drift_constants(m)
    # K is minimal (0.1) for every γ >= 0.7; the smallest such γ is returned
    assert gamma == pytest.approx(0.7) and K == pytest.approx(0.1)
    # the pair (0.8, 0.1) is also a valid drift bound, just not the tightest γ
    for g_, k_ in ((gamma, K), (0.8, 0.1)):
        assert np.all(m.PV() <= g_ * m.V + k_ + 1e-15)


@pytest.mark.parametrize("a", [0.3, 0.5, 0.8])
def test_drift_ar1(a):  # [DERIVED] PV(x) = a²x² + 1
    m = gaussian_lattice_model(a, half_width=10, n=201)
    np.testing.assert_allclose(m.PV(), a * a * m.states**2 + 1, rtol=1e-12)
    gamma, K = drift_constants(m)
    assert gamma == pytest.approx(a * a, abs=0.01)
    assert K == pytest.approx(1.0, abs=1e-9)


def test_drift_failure_for_random_walk():
    with pytest.raises(DriftFailure):
        drift_constants(gaussian_lattice_model(1.0))


def test_lattice_rows_are_stochastic():
    m = gaussian_lattice_model(0.5, n=101)
    np.testing.assert_allclose(m.P.sum(axis=1), 1.0, atol=1e-14)
    with pytest.raises(ValueError):
        gaussian_lattice_model(0.5, s=0.0)


def test_model_validation():
    with pytest.raises(ValueError):
        finite_model([[0.5, 0.6], [0.5, 0.5]], [0, 1])
    with pytest.raises(ValueError):
        finite_model([[1.0, 0.0], [0.0, 1.0]], [0, -1])


# -- small sets and Gaussian TV ------------------------------------------------------

def test_identical_rows_give_full_delta():  # [TRIVIAL]
    m = finite_model([[0.3, 0.7]] * 2, [0.0, 1.0])
    assert small_set_delta(m, 10.0) == 2.0


def test_gaussian_tv_at_two():  # [DERIVED]
    val, _ = integrate.quad(lambda x: abs(stats.norm.pdf(x) - stats.norm.pdf(x - 2)), -20, 22,
                            points=[1.0], epsabs=1e-13, limit=200)
    assert gaussian_tv(2.0) == pytest.approx(val, abs=1e-10)
    assert gaussian_tv(2.0) == pytest.approx(1.3653, abs=1e-4)
    assert 2 - gaussian_tv(2.0) == pytest.approx(0.6347, abs=1e-4)


def test_gaussian_tv_bound_at_two():  # [PAPER]
    assert gaussian_tv_lower_bound(2.0) == pytest.approx(0.7869, abs=1e-4)
    assert gaussian_tv(2.0) >= gaussian_tv_lower_bound(2.0)


def test_gaussian_tv_dominates_bound_on_grid():  # [PAPER] inequality, quadrature vs formula
    for m in np.linspace(0, 6, 61):
        q = gaussian_tv_quadrature(m)
        assert q == pytest.approx(gaussian_tv(m), abs=1e-10)
        assert q >= gaussian_tv_lower_bound(m) - 1e-12


def test_lattice_small_set_uses_exact_kernel():
    m = gaussian_lattice_model(0.5, n=201)
    gamma, K = drift_constants(m)
    Kp = level_K_prime(gamma, K)
    x = m.states[2 * m.V <= Kp]
    assert small_set_delta(m, Kp) == pytest.approx(2 - gaussian_tv(0.5 * (x.max() - x.min())), abs=1e-12)


def test_small_set_empty_level():
    with pytest.raises(ValueError):
        small_set_delta(finite_model(np.eye(2), [5.0, 5.0]), 1.0)


# -- certificates -----------------------------------------------------------------------

def test_certificate_reference_values():  # [PAPER]
    c = make_certificate(0.5, 1.0, 0.5)
    assert beta_supremum(0.5, 1.0, 0.5) == pytest.approx(1 / 24)
    assert c.beta == pytest.approx(1 / 48)
    assert c.alpha == pytest.approx(0.980769, abs=1e-6)
    assert c.K_prime == pytest.approx(8.0)
    assert c.invariants_hold()


def test_certificate_perfect_coupling():  # [TRIVIAL]
    c = make_certificate(0.5, 1.0, 2.0)
    assert c.alpha == c.alpha1 < 1


def test_certificate_weak_small_set_limit():  # [TRIVIAL]
    alphas = [make_certificate(0.5, 1.0, d).alpha for d in (1e-2, 1e-4, 1e-6)]
    assert np.all(np.diff(alphas) > 0)
    assert 1 - alphas[-1] < 1e-6


@pytest.mark.parametrize("args", [(1.0, 1.0, 1.0), (0.5, 0.0, 1.0), (0.5, 1.0, 0.0), (0.5, 1.0, 2.5)])
def test_certificate_rejects_degenerate_inputs(args):
    with pytest.raises(CertificateError):
        make_certificate(*args)


def test_certificate_invariants_over_random_inputs():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        gamma = rng.uniform(1e-3, 1 - 1e-3)
        K = 10 ** rng.uniform(-3, 3)
        delta = rng.uniform(1e-6, 2.0)
        c = make_certificate(gamma, K, delta)
        assert c.invariants_hold(), c


def test_identity_chain_is_refused():  # [TRIVIAL] δ = 0
    with pytest.raises(CertificateError):
        certify(finite_model(np.eye(2), [0.0, 1.0]))


def test_certificate_text_round_trip():
    c = certify(finite_model(*TWO_STATE))
    text = c.to_text()
    assert text.splitlines()[0].startswith("gamma = ")
    assert HarrisCertificate.from_text(text) == c
    assert HarrisCertificate.from_text("# comment\n" + text.replace("false", "true")).validated


# -- Lip_β --------------------------------------------------------------------------------

def test_d_beta():  # [TRIVIAL]
    V = [0.0, 1.0, 3.0]
    assert d_beta(1, 1, V, 0.5) == 0.0
    assert d_beta(0, 2, V, 0.5) == 3.5
    assert d_beta(0, 1, [0, 0, 0], 7.0) == 2.0


def test_lip_without_weight_is_half_oscillation():  # [TRIVIAL]
    phi = np.array([0.3, -1.2, 2.0, 0.5])
    assert lip_beta_seminorm(phi, np.zeros(4), 1.0) == pytest.approx(1.6)


@pytest.mark.parametrize("seed", range(5))
def test_lip_equivalence(seed):  # [DERIVED] dense scan over c as the oracle
    rng = np.random.default_rng(seed)
    phi, V, beta = rng.normal(size=5), rng.exponential(2.0, 5), rng.uniform(0.1, 2.0)
    inf_c, lip = lip_equivalence_gap(phi, V, beta)
    assert abs(inf_c - lip) <= 1e-9
    cs = np.linspace(-5, 5, 200_001)
    dense = np.max(np.abs(phi[None, :] + cs[:, None]) / (1 + beta * V[None, :]), axis=1).min()
    assert dense == pytest.approx(lip, abs=1e-4)


def _lp_contraction(P, V, beta):
    # max over x != y of (P_x - P_y)·φ subject to |φ_i - φ_j| <= d_β(i, j)
    n = len(V)
    rows, rhs = [], []
    for i in range(n):
        for j in range(n):
            if i != j:
                r = np.zeros(n)
                r[i], r[j] = 1.0, -1.0
                rows.append(r)
                rhs.append(2 + beta * (V[i] + V[j]))
    best = 0.0
    for x in range(n):
        for y in range(x + 1, n):
            res = optimize.linprog(-(P[x] - P[y]), A_ub=np.array(rows), b_ub=rhs, bounds=[(None, None)] * n,
                                   method="highs")
            best = max(best, -res.fun / (2 + beta * (V[x] + V[y])))
    return best


@pytest.mark.parametrize("seed", range(6))
def test_one_step_contraction_matches_lp(seed):  # [DERIVED]
    m = random_finite_model(np.random.default_rng(seed), 3, 5)
    beta = 0.3
    c, i, j = one_step_contraction(m.P, m.V, beta)
    assert c == pytest.approx(_lp_contraction(m.P, m.V, beta), rel=1e-7, abs=1e-12)
    assert i != j


# -- distances ----------------------------------------------------------------------------

prob = st.integers(2, 7).flatmap(lambda n: st.lists(
    st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n).filter(lambda v: sum(v) > 0.01), min_size=3, max_size=3))


@given(prob)
def test_tv_axioms(vecs):
    mu, nu, rho = (np.asarray(v) / sum(v) for v in vecs)
    V = np.arange(len(mu), dtype=float) ** 2
    assert total_variation(mu, nu) == total_variation(nu, mu)
    assert total_variation(mu, rho) <= total_variation(mu, nu) + total_variation(nu, rho) + 1e-15
    assert 0 <= total_variation(mu, nu) <= 2 + 1e-15
    assert total_variation(mu, nu) <= weighted_tv(mu, nu, V)
    assert weighted_tv(mu, nu, V, beta=0.0) == pytest.approx(total_variation(mu, nu))


def test_weighted_sup_norm():
    assert weighted_sup_norm([2.0, -3.0], [0.0, 2.0], 1.0) == 2.0


# -- contraction ----------------------------------------------------------------------------

def test_all_rows_equal_contracts_in_one_step():  # [TRIVIAL]
    P = np.tile([0.2, 0.5, 0.3], (3, 1))
    m = finite_model(P, [0.0, 1.0, 4.0])
    rep = contraction_verify(m, make_certificate(0.5, 1.0, 2.0), n_steps=3)
    assert rep.c_hat == 0.0 and rep.passed
    assert rep.tv_history[1] < 1e-15


def test_two_state_contraction():  # [DERIVED] second eigenvalue 0.7
    m = finite_model(*TWO_STATE)
    cert = certify(m)
    rep = contraction_verify(m, cert, n_steps=20)
    ev = np.sort(np.abs(np.linalg.eigvals(m.P)))
    assert ev[0] == pytest.approx(0.7)
    assert rep.c_hat == pytest.approx(0.7, abs=1e-12)
    assert rep.c_hat <= cert.alpha and rep.passed
    np.testing.assert_allclose(rep.tv_history[1:] / rep.tv_history[:-1], 0.7, rtol=1e-9)
    h = rep.halving_steps()
    assert h == int(np.ceil(np.log(2) / np.log(1 / 0.7))) == 2
    assert np.all(rep.tv_history[h:] <= 0.5 * rep.tv_history[:-h])
    np.testing.assert_allclose(rep.stationary, [2 / 3, 1 / 3])


def test_stationary_distribution_is_invariant():
    m = random_finite_model(np.random.default_rng(4))
    pi = stationary_distribution(m.P)
    np.testing.assert_allclose(pi @ m.P, pi, atol=1e-12)


def test_certificate_soundness_over_random_models():
    rows, violations = certificate_soundness_sweep(np.random.default_rng(1), 200)
    assert len(rows) == 200
    assert violations == []
    assert np.all(rows[:, 0] <= rows[:, 1])


def test_lattice_certificate_converges_with_resolution():
    # continuum small set: |x| <= sqrt(K'/2), widest pair at distance 2 sqrt(K'/2);
    # snapping its ends to the lattice moves the kernel shift by at most a·2h
    a, L = 0.5, 8.0
    for n in (201, 401, 801):
        c = certify(gaussian_lattice_model(a, half_width=L, n=n))
        h = 2 * L / (n - 1)
        exact = 2 - gaussian_tv(a * 2 * np.sqrt(c.K_prime / 2))
        assert abs(c.delta - exact) <= 2 * stats.norm.pdf(0) * a * 2 * h      # d TV/dm <= 2φ(0)
        assert c.invariants_hold()


# -- invariant measure ---------------------------------------------------------------------

def test_empirical_invariant_measure():  # [PAPER] λ_k = k² + 1, q = 1 gives 1/(2λ_k)
    g = make_grid(1, 16)
    p = LinearProblem(g, g.k2 + 1.0, 1.0)
    chk = empirical_invariant_check(p, 20000, 6.0, np.random.default_rng(2))
    assert chk.target[0] == pytest.approx(0.5)
    assert chk.passed, chk.max_z
    assert np.all(np.abs(chk.far_mean - chk.far_mean_target) <= 4 * chk.far_mean_se)


def test_invariant_check_scaling():  # [TRIVIAL]
    g = make_grid(1, 16)
    p = LinearProblem(g, g.k2 + 1.0, 1.0)
    a = empirical_invariant_check(p, 10, 5.0, np.random.default_rng(0))
    b = empirical_invariant_check(p.with_noise(2.0), 10, 5.0, np.random.default_rng(0))
    np.testing.assert_allclose(b.target, 4 * a.target)


def test_invariant_check_refusals():
    g = make_grid(1, 16)
    with pytest.raises(ConfigurationError):
        empirical_invariant_check(LinearProblem(g, g.k2 + 1.0, 1.0), 100, 4.9, np.random.default_rng(0))
    with pytest.raises(NonDissipativeError):
        empirical_invariant_check(LinearProblem(g, g.k2, 1.0), 100, 100.0, np.random.default_rng(0))
