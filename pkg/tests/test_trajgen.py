import math

import mpmath as mp

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mergeplan import trajgen as tg
from mergeplan.trajgen import DynamicLimits, State1D, TrajKind

from oracles import collocation_min_cost, quintic_symbolic_energy, unit_integral_mp

W_SET = (1.0, 2.0, 5.0, 12.5, 25.0)
X0 = State1D(0.0, 8.33, 0.0)
XF = State1D(60.0, 12.0, 0.0)


def random_bvp(rng, tf_range=(1.0, 10.0)):
    x0 = State1D(rng.uniform(-50, 50), rng.uniform(0, 15), rng.uniform(-3, 2))
    t_f = rng.uniform(*tf_range)
    vf = rng.uniform(0, 15)
    sf = x0.s + 0.5 * (x0.v + vf) * t_f + rng.uniform(-20, 20)
    return x0, State1D(sf, vf, rng.uniform(-1, 1)), t_f


def all_kinds(rng):
    x0, xf, t_f = random_bvp(rng)
    yield tg.solve_quintic(x0, xf, t_f)
    for w in (2.0, 12.5, 25.0):
        yield tg.solve_time_weighted(x0, xf, t_f, w)
    yield tg.constant_deceleration(State1D(0.0, 10.0, 0.0), 2.5)


# -- solve_quintic ------------------------------------------------------------

def test_quintic_rest_to_rest_is_zero():
    tr = tg.solve_quintic(State1D(0, 0, 0), State1D(0, 0, 0), 4.0)
    s, v, a, j = tg.evaluate(tr, np.linspace(0, 4, 50))
    assert np.all(s == 0) and np.all(j == 0)


def test_quintic_constant_velocity():
    tr = tg.solve_quintic(State1D(0, 10, 0), State1D(50, 10, 0), 5.0)
    t = np.linspace(0, 5, 50)
    s, v, a, j = tg.evaluate(tr, t)
    assert np.allclose(s, 10 * t, atol=1e-12)
    assert tg.jerk_cost(tr) == pytest.approx(0.0, abs=1e-20)


def test_quintic_matches_collocation():
    tr = tg.solve_quintic(X0, XF, 6.0)
    oracle, _, _ = collocation_min_cost(X0, XF, 6.0, 1.0, n=500)
    assert tg.jerk_cost(tr) == pytest.approx(oracle, rel=0.01)
    # the piecewise-constant minimiser can only do worse than the true optimum
    assert tg.jerk_cost(tr) <= oracle * (1 + 1e-9)


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
def test_quintic_rejects_bad_horizon(bad):
    with pytest.raises(ValueError):
        tg.solve_quintic(X0, XF, bad)


def test_state_rejects_non_finite():
    with pytest.raises(ValueError):
        State1D(0.0, float("nan"), 0.0)


# -- solve_time_weighted ------------------------------------------------------

def test_time_weighted_zero_solution():
    tr = tg.solve_time_weighted(State1D(0, 0, 0), State1D(0, 0, 0), 4.0, 5.0)
    c = tr.coefficients
    assert all(x == 0 for x in c.alpha) and c.beta == 0
    assert np.all(tg.evaluate(tr, np.linspace(0, 4, 20))[3] == 0)


@pytest.mark.parametrize("w_t", [12.5] + list(W_SET))
def test_time_weighted_matches_collocation(w_t):
    tr = tg.solve_time_weighted(X0, XF, 6.0, w_t)
    oracle, _, _ = collocation_min_cost(X0, XF, 6.0, w_t, n=500)
    cost = tg.time_weighted_cost(tr, w_t)
    assert cost == pytest.approx(oracle, rel=0.01)
    quint = tg.time_weighted_cost(tg.solve_quintic(X0, XF, 6.0), w_t)
    if w_t > 1:
        assert cost < quint
    else:
        assert cost == pytest.approx(quint, rel=1e-9)


def test_reduction_to_quintic():
    rng = np.random.default_rng(1)
    for _ in range(200):
        x0, xf, t_f = random_bvp(rng)
        tw = tg.solve_time_weighted(x0, xf, t_f, 1.0)
        q = tg.solve_quintic(x0, xf, t_f)
        t = np.linspace(0, t_f, 100)
        assert tw.coefficients.beta == 0.0
        assert np.max(np.abs(tg.evaluate(tw, t)[0] - tg.evaluate(q, t)[0])) <= 1e-9


@pytest.mark.parametrize("w_t", [0.5, 0.0, -2.0, float("nan")])
def test_time_weighted_rejects_small_weight(w_t):
    with pytest.raises(ValueError):
        tg.solve_time_weighted(X0, XF, 6.0, w_t)


def test_initial_jerk_decreases_with_weight():
    u0 = [abs(tg.evaluate(tg.solve_time_weighted(X0, XF, 6.0, w), 0.0)[1]) for w in W_SET]
    assert all(b <= a + 1e-12 for a, b in zip(u0, u0[1:]))
    assert u0[-1] < u0[0]


def test_time_weighted_jerk_form():
    # u(t) = quadratic + beta/(w + t): (w + t) u(t) is a cubic polynomial
    w = 5.0
    tr = tg.solve_time_weighted(X0, XF, 6.0, w)
    t = np.linspace(0, 6, 40)
    u = tg.evaluate(tr, t)[3]
    fit = np.polyfit(t, (w + t) * u, 3)
    assert np.max(np.abs(np.polyval(fit, t) - (w + t) * u)) < 1e-9


def test_beta_consistency_relation():
    # the jerk quadratic extended to t = -1 vanishes together with the log term residue
    for w in (2.0, 12.5, 25.0):
        c = tg.solve_time_weighted(X0, XF, 6.0, w).coefficients
        a1, a2, a3 = 60 * c.alpha[0], 24 * c.alpha[1], 6 * c.alpha[2]
        # u(-1) = a1 - a2 + a3 + beta / (w - 1) must be zero
        u_m1 = a1 - a2 + a3 + c.beta / (w - 1.0)
        assert abs(u_m1) < 1e-9 * max(1.0, abs(a3), abs(c.beta))


@settings(max_examples=60, deadline=None)
@given(k=st.floats(0.1, 10.0), w=st.sampled_from(W_SET))
def test_scale_consistency(k, w):
    x0, xf = State1D(1.0, 8.0, 0.5), State1D(70.0, 11.0, -0.2)
    a = tg.solve_time_weighted(x0, xf, 7.0, w)
    b = tg.solve_time_weighted(State1D(k * x0.s, k * x0.v, k * x0.a),
                               State1D(k * xf.s, k * xf.v, k * xf.a), 7.0, w)
    t = np.linspace(0, 7, 30)
    assert np.allclose(tg.evaluate(b, t)[0], k * tg.evaluate(a, t)[0], rtol=1e-10, atol=1e-9)


# -- evaluation ---------------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), w=st.floats(1.0, 25.0))
def test_boundary_exactness(seed, w):
    x0, xf, t_f = random_bvp(np.random.default_rng(seed))
    tr = tg.solve_time_weighted(x0, xf, t_f, w)
    e0, ef = tg.evaluate(tr, 0.0)[0], tg.evaluate(tr, t_f)[0]
    assert np.max(np.abs(e0.as_array() - x0.as_array())) <= 1e-9
    assert np.max(np.abs(ef.as_array() - xf.as_array())) <= 1e-9


def _fd_check(tr, h=1e-4):
    t = np.linspace(0.05, tr.duration - 0.05, 20)
    s_p, v_p, a_p, _ = tg.evaluate(tr, t + h)
    s_m, v_m, a_m, _ = tg.evaluate(tr, t - h)
    s, v, a, j = tg.evaluate(tr, t)
    for num, ref, in (((s_p - s_m) / (2 * h), v), ((v_p - v_m) / (2 * h), a),
                      ((a_p - a_m) / (2 * h), j)):
        scale = np.maximum(np.abs(ref), 1.0)
        assert np.max(np.abs(num - ref) / scale) <= 1e-4


def test_derivative_chain_all_kinds():
    rng = np.random.default_rng(7)
    for _ in range(20):
        for tr in all_kinds(rng):
            _fd_check(tr)


def test_evaluate_out_of_range():
    tr = tg.solve_quintic(X0, XF, 6.0)
    with pytest.raises(ValueError):
        tg.evaluate(tr, 6.5)
    with pytest.raises(ValueError):
        tg.evaluate(tr, -0.1)
    cd = tg.constant_deceleration(State1D(0, 10, 0), 2.0)
    st_, _ = tg.evaluate(cd, 100.0)
    assert st_.s == pytest.approx(25.0) and st_.v == 0.0 and st_.a == 0.0


def test_shifted_plan_continues_original():
    tr = tg.solve_time_weighted(X0, XF, 6.0, 12.5)
    sh = tr.shifted(1.6)
    t = np.linspace(0, 4.4, 30)
    assert np.array_equal(tg.evaluate(sh, t)[0], tg.evaluate(tr, t + 1.6)[0])
    assert sh.duration == pytest.approx(4.4)


def test_shape_integrals_match_high_precision():
    # the series (x < 0.5) and closed-form branches against 50-digit closed forms
    mp.mp.dps = 50
    xs = np.concatenate([np.geomspace(1e-5, 3.0, 60), [0.5 - 1e-12, 0.5]])
    F = tg._unit_integrals(xs)
    for i, x in enumerate(xs):
        for m in range(4):
            for d in range(3):
                ref = unit_integral_mp(d, m, x)
                assert abs(float((F[d, m][i] - ref) / ref)) < 1e-12


def test_well_conditioned_short_horizon():
    # t_f << w_t: the log coefficient is huge but boundary errors stay tiny
    x0, xf = State1D(13.7, 4.05, -2.8), State1D(39.5, 12.2, 0.21)
    tr = tg.solve_time_weighted(x0, xf, 1.15, 25.0)
    assert abs(tr.coefficients.beta) > 1e8
    err = tg.evaluate(tr, 1.15)[0].as_array() - xf.as_array()
    assert np.max(np.abs(err)) < 1e-11


# -- costs --------------------------------------------------------------------

def test_cost_of_zero_jerk_is_zero():
    tr = tg.solve_quintic(State1D(0, 5, 0), State1D(25, 5, 0), 5.0)
    assert tg.jerk_cost(tr) == pytest.approx(0.0, abs=1e-20)
    assert tg.time_weighted_cost(tr, 5.0) == pytest.approx(0.0, abs=1e-20)
    assert tg.jerk_cost(tg.constant_deceleration(State1D(0, 10, 0), 3.0)) == 0.0


def test_quintic_cost_matches_symbolic():
    rng = np.random.default_rng(3)
    for _ in range(10):
        x0, xf, t_f = random_bvp(rng)
        tr = tg.solve_quintic(x0, xf, t_f)
        ref = quintic_symbolic_energy(tr.coefficients.c, t_f)
        assert tg.jerk_cost_quad(tr) == pytest.approx(ref, rel=1e-8)
        assert tg.jerk_cost(tr) == pytest.approx(ref, rel=1e-10)


def test_closed_form_cost_matches_quadrature():
    rng = np.random.default_rng(4)
    for _ in range(20):
        x0, xf, t_f = random_bvp(rng)
        for w in W_SET:
            tr = tg.solve_time_weighted(x0, xf, t_f, w)
            assert tg.jerk_cost(tr) == pytest.approx(tg.jerk_cost_quad(tr), rel=1e-7)


def test_time_weighted_cost_properties():
    rng = np.random.default_rng(5)
    for _ in range(10):
        x0, xf, t_f = random_bvp(rng)
        tr = tg.solve_time_weighted(x0, xf, t_f, 5.0)
        assert tg.time_weighted_cost(tr, 1.0) == pytest.approx(tg.jerk_cost(tr), rel=1e-9)
        assert tg.time_weighted_cost(tr, 5.0) >= tg.jerk_cost(tr)
    with pytest.raises(ValueError):
        tg.time_weighted_cost(tr, 0.9)


# -- constraints --------------------------------------------------------------

def test_constant_velocity_is_valid():
    tr = tg.solve_quintic(State1D(0, 10, 0), State1D(50, 10, 0), 5.0)
    assert tg.check_constraints(tr, DynamicLimits(v_max=20.0)).valid


def test_velocity_violation_reported():
    tr = tg.solve_quintic(State1D(0, 0, 0), State1D(200, 0, 0), 5.0)
    rep = tg.check_constraints(tr, DynamicLimits(a_min=-100, a_max=100, v_max=20.0), 0.2)
    assert not rep.valid and rep.kind == "v_max"
    assert 0 < rep.t_violation < 5


def test_reverse_motion_reported():
    # decelerate hard towards a target behind the reachable stop point
    tr = tg.solve_quintic(State1D(0, 10, 0), State1D(5, 0, 0), 3.0)
    rep = tg.check_constraints(tr, DynamicLimits(a_min=-100, a_max=100), 0.2)
    assert not rep.valid and rep.kind == "v_min"


def test_coarse_and_dense_check_agree():
    rng = np.random.default_rng(11)
    lim = DynamicLimits(a_min=-4.0, a_max=2.5, v_max=50 / 3.6)
    agree = 0
    for _ in range(1000):
        x0 = State1D(0.0, rng.uniform(0, 13), rng.uniform(-2, 2))
        t_f = rng.uniform(1, 10)
        vf = rng.uniform(0, 13)
        xf = State1D(0.5 * (x0.v + vf) * t_f + rng.uniform(-10, 10), vf, 0.0)
        tr = tg.solve_time_weighted(x0, xf, t_f, rng.choice(W_SET))
        agree += tg.check_constraints(tr, lim, 0.2).valid == tg.check_constraints(tr, lim, 0.01).valid
    assert agree >= 990


def test_short_plans_get_minimum_samples():
    assert tg.check_step(0.5, 0.2) == pytest.approx(0.05)
    assert tg.check_step(10.0, 0.2) == 0.2


# -- point of no return -------------------------------------------------------

def test_pnr_stationary():
    tr = tg.solve_quintic(State1D(96, 0, 0), State1D(96, 0, 0), 3.0)
    t, x = tg.compute_pnr(tr, 97.0, 4.0, 0.08)
    assert t == pytest.approx(3.0)


def test_pnr_envelope_value():
    tr = tg.solve_quintic(State1D(50, 10, 0), State1D(100, 10, 0), 5.0)
    t, x = tg.compute_pnr(tr, 100.0, 4.0, 0.08)
    assert x.s == pytest.approx(100 - 12.5)
    assert x.v == pytest.approx(10.0)
    assert t == pytest.approx(3.68)  # last 0.08 s sample with s <= 87.5


def test_pnr_absent_beyond_envelope():
    tr = tg.solve_quintic(State1D(95, 10, 0), State1D(145, 10, 0), 5.0)
    assert tg.compute_pnr(tr, 97.0, 4.0) is None


def test_pnr_matches_brute_force():
    rng = np.random.default_rng(8)
    for _ in range(100):
        x0 = State1D(rng.uniform(0, 60), rng.uniform(2, 14), 0.0)
        t_f = rng.uniform(3, 12)
        xf = State1D(100.0, rng.uniform(4, 12), 0.0)
        tr = tg.solve_time_weighted(x0, xf, t_f, rng.choice(W_SET))
        got = tg.compute_pnr(tr, 97.0, 4.0, 0.08)
        best = None
        for t in tg.sample_times(t_f, 0.08):
            st_ = tg.evaluate(tr, float(t))[0]
            if st_.s + st_.v ** 2 / 8.0 <= 97.0:
                best = float(t)
        assert (got is None) == (best is None)
        if best is not None:
            assert got[0] == best


# -- constant deceleration and export -----------------------------------------

def test_constant_deceleration_shape():
    cd = tg.constant_deceleration(State1D(10, 8, 0), 4.0)
    assert cd.kind is TrajKind.CONSTANT_DECELERATION
    assert cd.t_f == pytest.approx(2.0)
    assert cd.xf.s == pytest.approx(18.0) and cd.xf.v == 0.0
    zero = tg.constant_deceleration(State1D(10, 0, 0), 4.0)
    assert zero.t_f == 0.0 and zero.xf.s == 10


def test_trajectory_csv(tmp_path):
    tr = tg.solve_time_weighted(X0, XF, 6.0, 5.0)
    p = tmp_path / "traj.csv"
    tg.write_trajectory_csv(p, tr, dt=0.5)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,s,v,a,j"
    assert len(lines) == 1 + 13
    last = [float(x) for x in lines[-1].split(",")]
    assert last[0] == 6.0 and last[1] == pytest.approx(60.0, abs=1e-9)
