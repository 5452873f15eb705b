import math

import numpy as np
import pytest

from eed2d.algorithms import (
    alternating_optimize,
    exhaustive_tau_optimize,
    feasible_initialization,
    oma_baseline_optimize,
    tau_grid,
)
from eed2d.channel import ChannelSet, draw_channels, generate_topology, trial_rng
from eed2d.errors import Infeasible
from eed2d.model import build_model
from eed2d.params import SystemParams
from eed2d.physics import oma_qos_feasible, qos_feasible, total_power


def paper_instance(seed, **overrides):
    params = SystemParams(**overrides) if overrides else SystemParams()
    rng = trial_rng(seed, 0)
    channels = draw_channels(generate_topology(params, rng), params, rng)
    return params, channels


def test_initialization_is_feasible():
    params, channels = paper_instance(0)
    w0, ts = feasible_initialization(channels, params)
    ok, _ = qos_feasible(w0, ts, channels, params)
    assert ok
    assert total_power(w0) == pytest.approx(params.p_max, rel=1e-9)


def test_initialization_easy_instance_keeps_tau_half():
    # a single strong user with a tiny rate target accepts tau0 = 0.5
    params = SystemParams(k=1, m=2, r_min=0.01)
    ch = ChannelSet(
        h_users=np.array([[1.0 + 0j, 0.5 + 0j]]),
        h_dt=np.array([0.01 + 0j, 0.0]),
        h_dr=np.array([0.01 + 0j, 0.0]),
        h_dd=1.0 + 0j,
        h_dt_users=np.array([0.001 + 0j]),
    )
    w0, ts = feasible_initialization(ch, params)
    assert ts.tau == 0.5
    ok, _ = qos_feasible(w0, ts, ch, params)
    assert ok


def test_initialization_raises_on_colinear_channels():
    # identical user directions, steep rate target, loud noise: only the
    # along-h beam components count, and already the weakest user's own
    # constraint needs more power than the whole budget.  An exhaustive
    # sweep over random beam sets confirms nothing is feasible.
    params = SystemParams(k=3, m=2, r_min=4.0, sigma2=0.3)
    h = np.array([1.0 + 0j, 0.5 + 0j])
    ch = ChannelSet(
        h_users=np.stack([1.0 * h, 1.1 * h, 1.2 * h]),
        h_dt=np.array([0.01 + 0j, 0.0]),
        h_dr=np.array([0.01 + 0j, 0.0]),
        h_dd=1.0 + 0j,
        h_dt_users=np.array([0.001 + 0j, 0.001 + 0j, 0.001 + 0j]),
    )
    model = build_model(ch, params)
    # the strongest user alone needs |h_3^H w_3|^2 >= gamma*sigma2, i.e.
    # ||w_3||^2 >= gamma*sigma2/||h_3||^2 > p_max
    gamma = params.gamma_min
    assert gamma * params.sigma2 / np.sum(np.abs(1.2 * h) ** 2) > params.p_max
    rng = np.random.default_rng(0)
    for _ in range(500):
        w = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        w *= math.sqrt(params.p_max) / np.linalg.norm(w)
        assert not model.feasible(w, 0.0)
    with pytest.raises(Infeasible):
        feasible_initialization(ch, params)


def test_alternating_monotone_and_feasible():
    params, channels = paper_instance(1)
    sol = alternating_optimize(channels, params)
    t = np.asarray(sol.trace)
    assert np.all(np.diff(t) >= -1e-8 * np.maximum(1.0, np.abs(t[:-1])))
    assert sol.ee >= t[0]
    ok, _ = qos_feasible(sol.w, sol.tau, channels, params)
    assert ok
    assert total_power(sol.w) <= params.p_max * (1 + 1e-8)
    assert sol.converged
    assert sol.scheme == "noma" and sol.algorithm == "alt"


def brute_force_k1(channels, params, n=400):
    """Dense (power, tau) grid for the K = M = 1 problem, refined once."""
    h1 = abs(channels.h_users[0, 0]) ** 2
    hdt = abs(channels.h_dt[0]) ** 2
    hdr = abs(channels.h_dr[0]) ** 2
    hdd = abs(channels.h_dd) ** 2
    hd1 = abs(channels.h_dt_users[0]) ** 2
    gamma = params.gamma_min

    def ee(p, tau):
        tb = tau / (1.0 - tau)
        p_t = params.eta * tb * hdt * p
        if gamma > 0 and h1 * p / (p_t * hd1 + params.sigma2) < gamma:
            return -math.inf
        r_d = (1 - tau) * math.log2(1 + p_t * hdd / (hdr * p + params.sigma2))
        return r_d / (params.eta * tau * hdt * p + params.p_c)

    def scan(p_lo, p_hi, t_lo, t_hi):
        best = (-math.inf, 0, 0)
        for p in np.linspace(p_lo, p_hi, n):
            if p <= 0:
                continue
            for t in np.linspace(t_lo, t_hi, n):
                val = ee(p, t)
                if val > best[0]:
                    best = (val, p, t)
        return best

    best = scan(params.p_max / n, params.p_max, 1e-3, 1 - 1e-3)
    _, p0, t0 = best
    dp, dt = params.p_max / n, 1.0 / n
    best2 = scan(
        max(p0 - dp, 1e-12), min(p0 + dp, params.p_max), max(t0 - dt, 1e-4), min(t0 + dt, 1 - 1e-4)
    )
    return max(best, best2)[0]


@pytest.mark.parametrize("seed", range(3))
def test_small_instance_matches_grid_oracle(seed):
    params, channels = paper_instance(seed, k=1, m=1)
    sol = alternating_optimize(channels, params)
    oracle = brute_force_k1(channels, params)
    assert sol.ee >= oracle * (1 - 0.01)
    assert sol.ee <= oracle * (1 + 0.01)


def test_tau_grid_contents():
    g = tau_grid(0.1)
    assert len(g) == 10
    assert g[0] == pytest.approx(0.001)
    assert g[-1] == pytest.approx(0.901)
    assert np.all(g <= 0.999)
    g5 = tau_grid(0.5)
    assert np.allclose(g5, [0.001, 0.501])


def test_exhaustive_beats_coarser_grid():
    params, channels = paper_instance(2)
    fine = exhaustive_tau_optimize(channels, params, xi=0.1)
    coarse = exhaustive_tau_optimize(channels, params, xi=0.5)
    assert fine.ee >= coarse.ee - 1e-9
    assert fine.algorithm == "exhaustive"
    ok, _ = qos_feasible(fine.w, fine.tau, channels, params)
    assert ok


def test_exhaustive_close_to_alternating():
    params, channels = paper_instance(3)
    alt = alternating_optimize(channels, params)
    exh = exhaustive_tau_optimize(channels, params, xi=0.1)
    assert exh.ee <= alt.ee + 1e-6
    assert exh.ee >= 0.8 * alt.ee  # the grid search is only slightly worse


def test_oma_equals_noma_for_single_user():
    params, channels = paper_instance(4, k=1, m=4)
    noma = alternating_optimize(channels, params)
    oma = oma_baseline_optimize(channels, params)
    assert oma.ee == pytest.approx(noma.ee, abs=1e-9 * max(1.0, noma.ee))
    assert oma.scheme == "oma"


def test_oma_solution_feasible():
    params, channels = paper_instance(5)
    sol = oma_baseline_optimize(channels, params)
    ok, _ = oma_qos_feasible(sol.w, sol.tau, channels, params)
    assert ok
    assert total_power(sol.w) <= params.p_max * (1 + 1e-8)


def test_noma_beats_oma_on_matched_channels():
    params, channels = paper_instance(6)
    noma = alternating_optimize(channels, params)
    oma = oma_baseline_optimize(channels, params)
    assert noma.ee > oma.ee


def test_full_power_at_fixed_point():
    params, channels = paper_instance(7)
    sol = alternating_optimize(channels, params)
    assert abs(total_power(sol.w) - params.p_max) / params.p_max < 1e-4


def test_power_scaling_decreases_ee_at_fixed_point():
    params, channels = paper_instance(8)
    sol = alternating_optimize(channels, params)
    model = build_model(channels, params)
    tb = sol.tau.tau_bar
    base = model.ee(sol.w, tb)
    for c in (0.5, 0.8, 0.95):
        w_scaled = math.sqrt(c) * sol.w
        if model.feasible(w_scaled, tb):
            assert base >= model.ee(w_scaled, tb) - 1e-9
