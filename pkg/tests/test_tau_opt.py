import math

import numpy as np
import pytest

from eed2d.channel import ChannelSet, draw_channels, generate_topology, trial_rng
from eed2d.errors import Infeasible
from eed2d.params import SystemParams
from eed2d.tau_opt import (
    TauProblem,
    compute_tau_coefficients,
    dinkelbach_inner,
    dinkelbach_solve,
    tau_feasible_interval,
)

LN2 = math.log(2.0)


def golden_section_max(f, lo, hi, iters=200):
    """Independent 1-D maximizer used as the Dinkelbach oracle."""
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def simple_problem(a, b, c, slopes=(), consts=(), a_err=0.0):
    return TauProblem(
        a=a,
        b=b,
        c=c,
        slopes=np.asarray(slopes, dtype=float),
        consts=np.asarray(consts, dtype=float),
        a_err=a_err,
    )


def test_coefficients_zero_beams():
    params = SystemParams(k=3, m=2, sigma2=0.7, p_c=2e-3)
    rng = trial_rng(0, 0)
    ch = draw_channels(generate_topology(params, rng), params, rng)
    w = np.zeros((3, 2), dtype=complex)
    co = compute_tau_coefficients(w, ch, params)
    assert co.a == 0.0
    assert co.b == pytest.approx(params.p_c)
    assert co.c == pytest.approx(params.p_c)
    assert all(v == 0.0 for v in co.d_t.values())
    assert np.all(co.f_k == 0.0)
    assert all(v == pytest.approx(params.sigma2) for v in co.e_kt.values())
    assert np.allclose(co.g_k, params.sigma2)


def test_coefficients_reject_zero_gamma():
    params = SystemParams(k=2, m=2, r_min=0.0)
    rng = trial_rng(1, 0)
    ch = draw_channels(generate_topology(params, rng), params, rng)
    with pytest.raises(ValueError):
        compute_tau_coefficients(np.ones((2, 2), dtype=complex), ch, params)


def test_coefficients_scalar_hand_computation():
    params = SystemParams(k=1, m=1, sigma2=0.5, eta=0.2, p_c=1e-2, r_min=0.3)
    ch = ChannelSet(
        h_users=np.array([[2.0 + 0j]]),
        h_dt=np.array([3.0 + 0j]),
        h_dr=np.array([1.5 + 0j]),
        h_dd=4.0 + 0j,
        h_dt_users=np.array([0.5 + 0j]),
    )
    w = np.array([[0.7 + 0j]])
    co = compute_tau_coefficients(w, ch, params)
    p_r = (3.0 * 0.7) ** 2
    p_i = (1.5 * 0.7) ** 2
    gamma = 2**0.3 - 1.0
    assert co.a == pytest.approx(0.2 * p_r * 16.0 / (p_i + 0.5), rel=1e-12)
    assert co.b == pytest.approx(0.2 * p_r + 1e-2, rel=1e-12)
    assert co.f_k[0] == pytest.approx(0.2 * p_r * 0.25, rel=1e-12)
    assert co.g_k[0] == pytest.approx(0.5 - (2.0 * 0.7) ** 2 / gamma, rel=1e-12)
    # flattening preserves the single own-signal constraint
    flat = co.flatten()
    assert flat.slopes.shape == (1,)


def test_interval_single_constraint():
    assert tau_feasible_interval(simple_problem(1, 1, 1, [1.0], [-2.0])) == pytest.approx(2.0)


def test_interval_constant_violation():
    with pytest.raises(Infeasible):
        tau_feasible_interval(simple_problem(1, 1, 1, [0.0], [1.0]))


def test_interval_min_rule():
    tb = tau_feasible_interval(simple_problem(1, 1, 1, [1.0, 2.0], [-2.0, -1.0]))
    assert tb == pytest.approx(0.5)


def test_interval_unbounded():
    assert tau_feasible_interval(simple_problem(1, 1, 1)) == math.inf


def test_inner_stationary_point():
    q = 1.0 / (math.e * LN2)
    tb = dinkelbach_inner(simple_problem(1.0, 1.0, 1.0), q, math.inf)
    assert tb == pytest.approx(math.e - 1.0, rel=1e-10)
    # cross-check with the golden-section oracle
    f = lambda t: math.log2(1 + t) - q * (t + 1.0)
    tb_gs, _ = golden_section_max(f, 0.0, 100.0)
    assert tb == pytest.approx(tb_gs, abs=1e-6)


def test_inner_endpoint_cases():
    p = simple_problem(1.0, 1.0, 1.0)
    assert dinkelbach_inner(p, 0.0, 5.0) == 5.0  # q = 0: increasing objective
    q = 1.0 / (math.e * LN2)
    assert dinkelbach_inner(p, q, 0.3) == pytest.approx(0.3)  # clipped
    assert dinkelbach_inner(simple_problem(0.0, 1.0, 1.0), 0.5, 5.0) == 0.0


def test_solve_unconstrained_example():
    res = dinkelbach_solve(simple_problem(1.0, 1.0, 1.0))
    assert res.q == pytest.approx(1.0 / (math.e * LN2), rel=1e-6)
    assert res.tau_bar == pytest.approx(math.e - 1.0, rel=1e-6)
    assert abs(res.f_value) < 1e-8
    assert res.tau == pytest.approx((math.e - 1.0) / math.e, rel=1e-6)


def test_solve_zero_gain():
    res = dinkelbach_solve(simple_problem(0.0, 1.0, 1.0))
    assert res.q == 0.0
    assert res.tau_bar == 0.0


def test_q_sequence_monotone():
    rng = np.random.default_rng(0)
    for _ in range(50):
        p = simple_problem(
            rng.uniform(0.1, 50.0),
            rng.uniform(0.01, 2.0),
            rng.uniform(0.001, 1.0),
            [rng.uniform(0.0, 1.0)],
            [-rng.uniform(0.1, 10.0)],
        )
        res = dinkelbach_solve(p)
        q = np.asarray(res.q_trace)
        assert np.all(np.diff(q) >= -1e-15)
        assert abs(res.f_value) < 1e-8


@pytest.mark.parametrize("seed", range(25))
def test_solve_matches_golden_section(seed):
    rng = np.random.default_rng(300 + seed)
    slopes = rng.uniform(0.0, 1.0, size=3)
    consts = -rng.uniform(0.05, 20.0, size=3)
    p = simple_problem(
        rng.uniform(0.05, 100.0),
        rng.uniform(0.005, 5.0),
        rng.uniform(0.001, 1.0),
        slopes,
        consts,
    )
    res = dinkelbach_solve(p)
    tb_max = tau_feasible_interval(p)
    hi = min(tb_max, 1e3)
    ratio = lambda t: p.numerator(t) / p.denominator(t)
    _, best = golden_section_max(ratio, 0.0, hi, iters=300)
    assert res.q == pytest.approx(best, rel=1e-4, abs=1e-12)
    assert -1e-12 <= res.tau_bar <= tb_max + 1e-12


def test_solve_with_error_term_matches_oracle():
    # imperfect-CSI form: numerator saturates through the a_err term
    rng = np.random.default_rng(9)
    for _ in range(10):
        p = simple_problem(
            rng.uniform(0.5, 50.0),
            rng.uniform(0.01, 2.0),
            rng.uniform(0.001, 0.5),
            a_err=rng.uniform(0.01, 5.0),
        )
        res = dinkelbach_solve(p)
        ratio = lambda t: p.numerator(t) / p.denominator(t)
        _, best = golden_section_max(ratio, 0.0, 1e3, iters=300)
        assert res.q == pytest.approx(best, rel=1e-4)
