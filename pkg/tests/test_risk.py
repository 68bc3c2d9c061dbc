import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from mergeplan.predict import ObjectEstimate, predict_horizon
from mergeplan.risk import (
    SafetyParams,
    exceedance,
    gaussian_cdf,
    risk_ahead,
    risk_behind,
    safety_positions,
)


def phi_mp(z):
    mp.mp.dps = 40
    return float(mp.ncdf(mp.mpf(z)))


def track(s, v, var):
    return predict_horizon(ObjectEstimate(s, v, (var, 0.0, 0.0)), 10.0, 0.08, q=0.0)


# -- gaussian_cdf --------------------------------------------------------------

def test_phi_examples():
    assert gaussian_cdf(0.0) == 0.5
    assert gaussian_cdf(1.96) == pytest.approx(0.9750021, abs=1e-6)
    for z in (0.5, 1.0, 2.0, 3.0):
        assert abs(gaussian_cdf(-z) - (1 - gaussian_cdf(z))) < 1e-12


@given(st.floats(-30, 30))
def test_phi_matches_high_precision(z):
    assert abs(gaussian_cdf(z) - phi_mp(z)) < 1e-12
    # the lower tail keeps relative precision
    if z < -5:
        assert gaussian_cdf(z) == pytest.approx(phi_mp(z), rel=1e-10)


# -- safety_positions ----------------------------------------------------------

def test_safety_position_examples():
    p = SafetyParams(t_safety=1.0, s_margin=2.0)
    s_a, s_b = safety_positions(100.0, 8.33, 8.33, 4.0, 4.0, p)
    assert s_a == pytest.approx(112.33)
    assert s_b == pytest.approx(87.67)
    s_a, s_b = safety_positions(100.0, 8.33, 8.33, 0.0, 0.0, SafetyParams(0.0, 0.0))
    assert s_a == s_b == 100.0


def test_params_validation():
    with pytest.raises(ValueError):
        SafetyParams(t_safety=-1)
    with pytest.raises(ValueError):
        SafetyParams(p_residual_max=1.5)


# -- risks ---------------------------------------------------------------------

def test_risk_examples():
    sd = 1.7
    assert risk_ahead(track(50.0, 0.0, sd * sd), 50.0, 2.0) == pytest.approx(0.5, abs=1e-12)
    assert risk_ahead(track(50.0 + 3 * sd, 0.0, sd * sd), 50.0, 2.0) == pytest.approx(phi_mp(-3), abs=1e-9)
    assert risk_ahead(track(50.1, 0.0, 0.0), 50.0, 2.0) == 0.0
    assert risk_behind(track(50.0, 0.0, sd * sd), 50.0, 2.0) == pytest.approx(0.5, abs=1e-12)
    assert risk_behind(track(50.0 - 3 * sd, 0.0, sd * sd), 50.0, 2.0) == pytest.approx(0.00135, abs=1e-5)
    assert risk_behind(track(49.9, 0.0, 0.0), 50.0, 2.0) == 0.0


def test_exceedance_vectorised():
    p = exceedance(np.array([-1.0, 0.0, 1.0]), np.array([0.0, 0.0, 1.0]))
    assert p[0] == 1.0 and p[1] == 0.0 and p[2] == pytest.approx(phi_mp(-1))


def random_config(rng):
    return dict(s_pga=rng.uniform(50, 150), v_a=rng.uniform(0, 15), v_b=rng.uniform(0, 15),
                l_a=rng.uniform(3, 6), l_b=rng.uniform(3, 6),
                sa=rng.uniform(40, 200), sb=rng.uniform(0, 150), va=rng.uniform(0, 15),
                vb=rng.uniform(0, 15), var_a=rng.uniform(0.01, 4), var_b=rng.uniform(0.01, 4),
                t_f=rng.uniform(0.5, 9.5), t_s=rng.uniform(0, 2), m=rng.uniform(0, 5))


def risks(c, t_s, m):
    s_a, s_b = safety_positions(c["s_pga"], c["v_a"], c["v_b"], c["l_a"], c["l_b"], SafetyParams(t_s, m))
    pa = risk_ahead(track(c["sa"], c["va"], c["var_a"]), s_a, c["t_f"])
    pb = risk_behind(track(c["sb"], c["vb"], c["var_b"]), s_b, c["t_f"])
    return pa, pb


def test_corridor_monotonicity():
    rng = np.random.default_rng(9)
    for _ in range(10_000):
        c = random_config(rng)
        pa0, pb0 = risks(c, c["t_s"], c["m"])
        pa1, pb1 = risks(c, c["t_s"] + rng.uniform(0, 1), c["m"] + rng.uniform(0, 2))
        assert 0.0 <= pa0 <= 1.0 and 0.0 <= pb0 <= 1.0
        assert pa1 >= pa0 and pb1 >= pb0


def test_risk_strictly_monotone_in_position():
    s = np.linspace(40, 60, 200)
    pa = [risk_ahead(track(x, 0.0, 4.0), 50.0, 1.0) for x in s]
    pb = [risk_behind(track(x, 0.0, 4.0), 50.0, 1.0) for x in s]
    assert np.all(np.diff(pa) < 0) and np.all(np.diff(pb) > 0)
