import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import betaln, gammaln

from hapt.node_posterior import (
    NodeInput,
    clear_cache,
    local_evidence,
    log_rising_sum,
    node_table,
    t_of_theta,
    theta_of_t,
)
from hapt.quadrature import QuadratureError
from hapt.sis import SisConfig, default_config

from oracles import cubature_log_evidence, grid_log_evidence

CFG = default_config()


def point_mass(value):
    """Two-state chain whose only finite state is a point mass at ``value``."""
    return SisConfig(2, ((value, value),), root_dist=(1.0, 0.0))


def expected_inv_plus_one(lo, hi):
    # E[1/(v+1)] under the log-uniform law on [lo, hi]
    return np.log((hi / (hi + 1)) * ((lo + 1) / lo)) / np.log(hi / lo)


def test_both_absorbing():
    ev = local_evidence(NodeInput(0.5, [[2, 1]]), 3, 3, CFG, CFG)
    assert np.exp(ev.log_evidence) == pytest.approx(0.125, rel=1e-12)
    assert ev.m1 == 0.5 and ev.d == 0.0


def test_point_mass_tau_absorbed_nu():
    tau = SisConfig(3, ((2.0, 2.0), (4.0, 16.0)))
    ev = local_evidence(NodeInput(0.5, [[1, 0]]), 0, 3, tau, CFG)
    assert np.exp(ev.log_evidence) == pytest.approx(0.5, rel=1e-12)
    assert ev.p[0] == pytest.approx(2 / 3, rel=1e-12)


@pytest.mark.parametrize("s_tau", [0, 1, 2, 3])
@pytest.mark.parametrize("s_nu", [0, 1, 2])
def test_zero_counts_give_prior_moments(s_tau, s_nu):
    theta0 = 0.3
    ev = local_evidence(NodeInput(theta0, [[0, 0], [0, 0]]), s_tau, s_nu, CFG, CFG)
    e_nu = expected_inv_plus_one(*CFG.supports[s_nu])
    e_tau = 0.0 if s_tau == 3 else expected_inv_plus_one(*CFG.supports[s_tau])
    var = theta0 * (1 - theta0) * e_nu
    assert ev.log_evidence == pytest.approx(0.0, abs=1e-9)
    assert ev.m1 == pytest.approx(theta0, rel=1e-9)
    assert ev.m2 == pytest.approx(theta0 ** 2 + var, rel=1e-9)
    assert ev.q2 == pytest.approx((1 - theta0) ** 2 + var, rel=1e-9)
    assert ev.d == pytest.approx(theta0 * (1 - theta0) * (1 - e_nu) * e_tau, rel=1e-8, abs=1e-15)
    np.testing.assert_allclose(ev.p, theta0, rtol=1e-9)


counts_st = st.lists(st.tuples(st.integers(0, 60), st.integers(0, 60)), min_size=1, max_size=5)


@settings(max_examples=40, deadline=None)
@given(counts_st, st.floats(0.05, 0.95), st.floats(0.1, 200.0))
def test_conjugate_tau_absorbed_nu_point_mass(counts, theta0, nu0):
    counts = np.array(counts)
    L, R = counts.sum(axis=0)
    ev = local_evidence(NodeInput(theta0, counts), 3, 0, CFG, point_mass(nu0))
    a, b = theta0 * nu0 + L, (1 - theta0) * nu0 + R
    s = a + b
    assert ev.log_evidence == pytest.approx(betaln(a, b) - betaln(theta0 * nu0, (1 - theta0) * nu0),
                                            rel=1e-8, abs=1e-8)
    assert ev.m1 == pytest.approx(a / s, rel=1e-8)
    assert ev.m2 == pytest.approx(a * (a + 1) / (s * (s + 1)), rel=1e-8)
    assert ev.q2 == pytest.approx(b * (b + 1) / (s * (s + 1)), rel=1e-8)
    assert ev.d == 0.0
    np.testing.assert_allclose(ev.p, a / s, rtol=1e-8)


@settings(max_examples=40, deadline=None)
@given(counts_st, st.floats(0.05, 0.95), st.floats(0.1, 200.0))
def test_conjugate_nu_absorbed_tau_point_mass(counts, theta0, tau0):
    counts = np.array(counts)
    ev = local_evidence(NodeInput(theta0, counts), 0, 3, point_mass(tau0), CFG)
    a, b = theta0 * tau0, (1 - theta0) * tau0
    log_z = sum(betaln(a + l, b + r) - betaln(a, b) for l, r in counts)
    assert ev.log_evidence == pytest.approx(log_z, rel=1e-8, abs=1e-8)
    assert ev.m1 == pytest.approx(theta0, rel=1e-12)
    assert ev.m2 == pytest.approx(theta0 ** 2, rel=1e-12)
    assert ev.d == pytest.approx(theta0 * (1 - theta0) / (tau0 + 1), rel=1e-8)
    np.testing.assert_allclose(ev.p, (a + counts[:, 0]) / (tau0 + counts.sum(axis=1)), rtol=1e-8)


@pytest.mark.parametrize("counts, theta0, tau0, nu0", [
    ([[5, 2]], 0.5, 3.0, 7.0),
    ([[0, 9], [4, 4], [12, 1]], 0.35, 1.5, 40.0),
    ([[30, 2], [1, 25]], 0.6, 0.4, 2.0),
])
def test_both_point_masses_match_1d_quadrature(counts, theta0, tau0, nu0):
    counts = np.array(counts)

    def log_f(th):
        lp = ((theta0 * nu0 - 1) * np.log(th) + ((1 - theta0) * nu0 - 1) * np.log1p(-th)
              - betaln(theta0 * nu0, (1 - theta0) * nu0))
        a, b = th * tau0, (1 - th) * tau0
        return lp + sum(betaln(a + l, b + r) - betaln(a, b) for l, r in counts)

    shift = max(log_f(x) for x in np.linspace(0.01, 0.99, 99))
    moments = [quad(lambda th: np.exp(log_f(th) - shift) * g(th), 0, 1, epsabs=0, epsrel=1e-12,
                    limit=400)[0] for g in (lambda th: 1.0, lambda th: th, lambda th: th * th)]
    ev = local_evidence(NodeInput(theta0, counts), 0, 0, point_mass(tau0), point_mass(nu0))
    assert ev.log_evidence == pytest.approx(np.log(moments[0]) + shift, rel=1e-8, abs=1e-8)
    assert ev.m1 == pytest.approx(moments[1] / moments[0], rel=1e-8)
    assert ev.m2 == pytest.approx(moments[2] / moments[0], rel=1e-8)


@pytest.mark.parametrize("seed", range(3))
def test_matches_grid_and_cubature(seed):
    rng = np.random.default_rng(seed)
    counts = rng.integers(0, 21, size=(rng.integers(1, 4), 2))
    theta0 = rng.uniform(0.2, 0.8)
    s_tau, s_nu = rng.integers(0, 3, size=2)
    ev = local_evidence(NodeInput(theta0, counts), s_tau, s_nu, CFG, CFG)
    tau_sup, nu_sup = CFG.supports[s_tau], CFG.supports[s_nu]
    grid = grid_log_evidence(theta0, counts, tau_sup, nu_sup)
    cub, status = cubature_log_evidence(theta0, counts, tau_sup, nu_sup, shift=grid)
    assert status == "converged"
    assert np.exp(grid - ev.log_evidence) == pytest.approx(1.0, abs=1e-4)
    assert np.exp(cub - ev.log_evidence) == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), min_size=1, max_size=3),
       st.floats(0.1, 0.9), st.integers(0, 3), st.integers(0, 3))
def test_mirror_symmetry(counts, theta0, s_tau, s_nu):
    counts = np.array(counts)
    a = local_evidence(NodeInput(theta0, counts), s_tau, s_nu, CFG, CFG)
    b = local_evidence(NodeInput(1 - theta0, counts[:, ::-1]), s_tau, s_nu, CFG, CFG)
    assert a.log_evidence == pytest.approx(b.log_evidence, rel=1e-7, abs=1e-7)
    assert a.m1 == pytest.approx(1 - b.m1, rel=1e-7, abs=1e-9)
    assert a.m2 == pytest.approx(b.q2, rel=1e-7)
    assert a.d == pytest.approx(b.d, rel=1e-7, abs=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 40), st.integers(0, 40)), min_size=1, max_size=4),
       st.floats(0.05, 0.95))
def test_moment_invariants(counts, theta0):
    table = node_table(NodeInput(theta0, counts), CFG, CFG)
    assert np.all(np.isfinite(table.log_z))
    assert np.all((table.m1 > 0) & (table.m1 < 1))
    assert np.all(table.m2 >= table.m1 ** 2 * (1 - 1e-9))
    assert np.all(table.q2 >= (1 - table.m1) ** 2 * (1 - 1e-9))
    assert np.all(table.d >= 0)
    assert np.all((table.p > 0) & (table.p < 1))


def test_left_mean_increases_with_left_count():
    means = [local_evidence(NodeInput(0.5, [[n, 10]]), 1, 1, CFG, CFG).m1 for n in range(0, 40, 4)]
    assert np.all(np.diff(means) > 0)


def test_sample_order_does_not_matter():
    clear_cache()
    counts = np.array([[3, 9], [0, 0], [14, 2], [3, 9]])
    a = node_table(NodeInput(0.4, counts), CFG, CFG)
    b = node_table(NodeInput(0.4, counts[[2, 0, 3, 1]]), CFG, CFG)
    np.testing.assert_array_equal(a.log_z, b.log_z)
    np.testing.assert_array_equal(a.p[..., [2, 0, 3, 1]], b.p)


def test_restricted_states_mark_others_empty():
    table = node_table(NodeInput(0.5, [[1, 2]]), CFG, CFG, tau_states=(1,), nu_states=(0, 3))
    assert np.isfinite(table.log_z[1, [0, 3]]).all()
    assert np.isneginf(table.log_z[0]).all() and np.isneginf(table.log_z[2]).all()


def test_moments_off_keeps_evidence():
    inp = NodeInput(0.5, [[7, 3], [2, 8]])
    with_m = node_table(inp, CFG, CFG)
    without = node_table(inp, CFG, CFG, moments=False)
    np.testing.assert_allclose(without.log_z, with_m.log_z, rtol=1e-8)


def test_input_validation():
    with pytest.raises(ValueError):
        NodeInput(0.5, [[-1, 2]])
    with pytest.raises(ValueError):
        NodeInput(1.0, [[1, 2]])
    with pytest.raises(ValueError):
        NodeInput(0.5, np.zeros((0, 2)))
    with pytest.raises(ValueError):
        local_evidence(NodeInput(0.5, [[1, 2]]), 4, 0, CFG, CFG)


def test_unreachable_tolerance_names_node():
    clear_cache()
    with pytest.raises(QuadratureError) as info:
        node_table(NodeInput(0.5, [[400, 3], [2, 350]]), CFG, CFG, tol=1e-17, node=5)
    assert info.value.node == 5


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 50.0), st.lists(st.integers(0, 600), min_size=1, max_size=12))
def test_log_rising_sum_matches_gammaln(a, n):
    n = np.array(n)
    w = np.arange(1, len(n) + 1, dtype=float)
    expected = np.sum(w * (gammaln(a + n) - gammaln(a)))
    assert log_rising_sum(a, n, w) == pytest.approx(expected, rel=1e-11, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(-2.0, 2.0))
def test_theta_transform_round_trip(t):
    log_th, log_1m, _ = theta_of_t(t)
    assert np.exp(log_th) + np.exp(log_1m) == pytest.approx(1.0, abs=1e-15)
    assert t_of_theta(np.exp(log_th)) == pytest.approx(t, abs=1e-8)
