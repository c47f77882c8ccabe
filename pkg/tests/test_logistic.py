import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from carleman_hydro.logistic import (BlowUpError, LogisticParams, blowup_time, carleman_hierarchy,
                                     carleman_series, carleman_series_checked, convergence_horizon,
                                     exact_solution, hierarchy_matrix, series_tail, singular_time)

DECAY = LogisticParams(1.0, 1.0, 0.45)
GROW = LogisticParams(-1.0, -1.0, 0.5)


def integrate(p, t):
    sol = solve_ivp(lambda _, x: -p.a * x + p.b * x * x, (0.0, t), [p.x0],
                    method="DOP853", rtol=1e-13, atol=1e-15)
    return sol.y[0, -1]


def test_exact_initial_value():
    assert exact_solution(DECAY, 0.0) == 0.45


def test_exact_at_one_matches_integration():
    x = exact_solution(DECAY, 1.0)
    assert x == pytest.approx(0.231356, abs=1e-6)
    assert abs(x - integrate(DECAY, 1.0)) < 1e-10


def test_exact_decays_to_attractor():
    assert abs(exact_solution(DECAY, 40.0)) < 1e-12


def test_exact_vectorised():
    ts = np.linspace(0, 2, 5)
    out = exact_solution(DECAY, ts)
    assert out.shape == (5,)
    assert out[2] == pytest.approx(exact_solution(DECAY, 1.0))


def test_exact_raises_past_singularity():
    p = LogisticParams(1.0, 1.0, 2.0)
    with pytest.raises(BlowUpError) as info:
        exact_solution(p, 1.0)
    assert info.value.t_sing == pytest.approx(math.log(2))


def test_blowup_times():
    assert blowup_time(LogisticParams(1.0, 1.0, 2.0)) == pytest.approx(0.693147, abs=1e-6)
    assert blowup_time(DECAY) is None
    assert blowup_time(LogisticParams(2.0, 1.0, 4.0)) == pytest.approx(0.5 * math.log(2))
    with pytest.raises(ValueError):
        blowup_time(GROW)


def test_blowup_time_against_integration():
    p = LogisticParams(1.0, 1.0, 2.0)
    ts = blowup_time(p)
    assert integrate(p, 0.98 * ts) > 20
    assert singular_time(p) == pytest.approx(ts)


def test_convergence_horizon():
    assert convergence_horizon(GROW) == pytest.approx(math.log(3))
    assert convergence_horizon(LogisticParams(-2.0, -2.0, 0.5)) == pytest.approx(math.log(3) / 2)
    assert convergence_horizon(LogisticParams(-1.0, -1.0, 1e6)) < 1e-5
    with pytest.raises(ValueError):
        convergence_horizon(DECAY)


def test_horizon_scaled_case_diverges_just_past():
    p = LogisticParams(-2.0, -2.0, 0.5)
    th = convergence_horizon(p)
    before = abs(carleman_series(p, 0.8 * th, 40) - exact_solution(p, 0.8 * th))
    after = abs(carleman_series(p, 1.2 * th, 40) - exact_solution(p, 1.2 * th))
    assert before < 1e-3
    assert after > 1.0


def test_series_order_zero():
    for t in (0.0, 0.3, 2.0):
        assert carleman_series(GROW, t, 0) == pytest.approx(0.5 * math.exp(t))
    with pytest.raises(ValueError):
        carleman_series(GROW, 1.0, -1)


def test_series_k40_at_one():
    assert abs(carleman_series(DECAY, 1.0, 40) - exact_solution(DECAY, 1.0)) < 1e-10


def test_series_monotone_approach_inside_horizon():
    errs = [abs(carleman_series(GROW, 1.0, K) - exact_solution(GROW, 1.0)) for K in range(1, 30)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


@given(st.floats(0.0, 5.0), st.integers(0, 30))
def test_tail_identity(t, K):
    err = abs(carleman_series(DECAY, t, K) - exact_solution(DECAY, t))
    assert err == pytest.approx(series_tail(DECAY, t, K), abs=1e-12)


def test_divergence_flag():
    outside = carleman_series_checked(GROW, 2.0, 200)
    assert outside.diverging
    inside = carleman_series_checked(GROW, 0.5, 200)
    assert not inside.diverging
    assert inside.value == pytest.approx(exact_solution(GROW, 0.5))


@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.floats(0.01, 0.9), st.floats(0.0, 3.0))
def test_duality(a, b, frac, t):
    p = LogisticParams(a, b, frac * a / b)
    d = p.dual()
    assert d.a == -a and d.b == -b
    assert exact_solution(d, t) == pytest.approx(1.0 / p.R - exact_solution(p, t), rel=1e-9, abs=1e-12)


def test_hierarchy_matrix():
    m = hierarchy_matrix(LogisticParams(1.0, 2.0, 0.1), 3)
    assert np.array_equal(m, [[-1, 2, 0], [0, -2, 4], [0, 0, -3]])
    with pytest.raises(ValueError):
        hierarchy_matrix(DECAY, 0)


def test_hierarchy_first_order_is_exponential():
    p = LogisticParams(1.0, 5.0, 0.3)
    out = carleman_hierarchy(p, 0.01, 50, 1)
    assert np.allclose(out, 0.3 * 0.99 ** np.arange(51), rtol=1e-14)


def test_hierarchy_converges_first_order_in_dt():
    # level K of the hierarchy tends to the series truncated after q**(K-1)
    K = 10
    target = carleman_series(DECAY, 1.0, K - 1)
    errs = []
    for dt in (1e-3, 5e-4, 2.5e-4):
        errs.append(carleman_hierarchy(DECAY, dt, round(1.0 / dt), K)[-1] - target)
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(r == pytest.approx(2.0, rel=0.02) for r in ratios)
    richardson = 2 * carleman_hierarchy(DECAY, 1e-4, 10000, K)[-1] \
        - carleman_hierarchy(DECAY, 2e-4, 5000, K)[-1]
    assert abs(richardson - target) < 1e-7


def test_hierarchy_higher_order_closer_below_horizon():
    t = 1.05
    steps = 10500
    exact = exact_solution(GROW, t)
    e4 = abs(carleman_hierarchy(GROW, t / steps, steps, 4)[-1] - exact)
    e8 = abs(carleman_hierarchy(GROW, t / steps, steps, 8)[-1] - exact)
    assert e8 < e4


def test_hierarchy_rejects_bad_dt():
    with pytest.raises(ValueError):
        carleman_hierarchy(DECAY, 0.0, 10, 2)


def test_r_undefined_for_zero_a():
    with pytest.raises(ValueError):
        LogisticParams(0.0, 1.0, 0.1).R
