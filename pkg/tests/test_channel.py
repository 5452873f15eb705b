import numpy as np
import pytest

from eed2d.channel import (
    ChannelSet,
    Topology,
    apply_csi_error,
    draw_channels,
    generate_topology,
    trial_rng,
)
from eed2d.params import SystemParams


@pytest.fixture
def params():
    return SystemParams()


def test_fixed_node_positions(params):
    topo = generate_topology(params, trial_rng(1, 0))
    assert np.allclose(topo.bs_position, [0.0, 0.0])
    assert np.allclose(topo.dt_position, [0.0, 9.0])
    assert np.allclose(topo.dr_position, [0.0, 10.0])
    assert topo.distance_dt_dr() == pytest.approx(1.0)


def test_user_box_limits(params):
    topo = generate_topology(params, trial_rng(2, 0))
    assert topo.user_positions.shape == (params.k, 2)
    assert np.all(topo.user_positions >= 3.0)
    assert np.all(topo.user_positions <= 8.0)
    d = topo.distances_bs_users()
    assert np.all(d >= np.sqrt(18.0) - 1e-12)
    assert np.all(d <= np.sqrt(128.0) + 1e-12)


def test_sic_ordering_and_shapes(params):
    rng = trial_rng(3, 0)
    ch = draw_channels(generate_topology(params, rng), params, rng)
    assert ch.h_users.shape == (params.k, params.m)
    assert ch.h_dt.shape == (params.m,)
    assert ch.is_sic_sorted()
    norms = ch.user_norms_sq()
    assert np.all(np.diff(norms) >= 0)


def test_sort_is_idempotent(params):
    rng = trial_rng(4, 0)
    ch = draw_channels(generate_topology(params, rng), params, rng)
    again = ch.sic_sorted()
    assert np.array_equal(again.h_users, ch.h_users)
    assert np.array_equal(again.h_dt_users, ch.h_dt_users)


def test_sort_permutes_dt_channels_jointly():
    # unsorted construction: the strongest user first
    h_users = np.array([[2.0 + 0j, 0.0], [1.0 + 0j, 0.0]])
    h_dk = np.array([20.0 + 0j, 10.0 + 0j])
    ch = ChannelSet(
        h_users=h_users,
        h_dt=np.zeros(2, dtype=complex),
        h_dr=np.zeros(2, dtype=complex),
        h_dd=1.0 + 0j,
        h_dt_users=h_dk,
    ).sic_sorted()
    assert ch.h_users[0, 0] == 1.0
    assert ch.h_dt_users[0] == 10.0  # moved with its user


def test_deterministic_reproduction(params):
    def one():
        rng = trial_rng(99, 5)
        return draw_channels(generate_topology(params, rng), params, rng)

    a, b = one(), one()
    assert np.array_equal(a.h_users, b.h_users)
    assert np.array_equal(a.h_dt, b.h_dt)
    assert np.array_equal(a.h_dr, b.h_dr)
    assert a.h_dd == b.h_dd
    assert np.array_equal(a.h_dt_users, b.h_dt_users)


def test_path_loss_scaling_halves_magnitude():
    # doubling every distance with alpha = 2 divides coefficients by 2
    params = SystemParams(k=2, m=3).replace(
        alpha_bs_users=2.0, alpha_d2d=2.0, alpha_bs_d2d=2.0, alpha_dt_users=2.0
    )
    near = Topology(
        bs_position=np.zeros(2),
        dt_position=np.array([0.0, 9.0]),
        dr_position=np.array([0.0, 10.0]),
        user_positions=np.array([[3.0, 4.0], [4.0, 3.0]]),
    )
    far = Topology(
        bs_position=np.zeros(2),
        dt_position=np.array([0.0, 18.0]),
        dr_position=np.array([0.0, 20.0]),
        user_positions=np.array([[6.0, 8.0], [8.0, 6.0]]),
    )
    a = draw_channels(near, params, trial_rng(7, 0))
    b = draw_channels(far, params, trial_rng(7, 0))
    # Dt->Dr distance doubles from 1 to 2
    assert abs(b.h_dd) == pytest.approx(abs(a.h_dd) / 2.0, rel=1e-12)
    assert np.allclose(np.abs(b.h_dt), np.abs(a.h_dt) / 2.0, rtol=1e-12)


def test_dd_coefficient_unit_variance():
    # Dt->Dr sits at distance 1 with alpha = 2, so the path loss is 1 and
    # the empirical per-entry variance must match the unit-variance fading
    params = SystemParams(k=1, m=1)
    rng = trial_rng(11, 0)
    topo = generate_topology(params, rng)
    n = 100_000
    draws = np.empty(n, dtype=complex)
    for i in range(n):
        draws[i] = draw_channels(topo, params, rng).h_dd
    var = np.mean(np.abs(draws) ** 2)
    assert var == pytest.approx(1.0, abs=0.02)


def test_csi_error_zero_variance_is_identity(params):
    rng = trial_rng(12, 0)
    ch = draw_channels(generate_topology(params, rng), params, rng)
    est, real = apply_csi_error(ch, 0.0, rng)
    assert np.array_equal(est.h_users, ch.h_users)
    assert est.h_dd == ch.h_dd
    assert np.all(real.eps_users == 0)
    assert real.eps_dd == 0


def test_csi_error_only_touches_users_and_dd(params):
    rng = trial_rng(13, 0)
    ch = draw_channels(generate_topology(params, rng), params, rng)
    est, real = apply_csi_error(ch, 0.05, rng)
    assert np.array_equal(est.h_dt, ch.h_dt)
    assert np.array_equal(est.h_dr, ch.h_dr)
    assert np.array_equal(est.h_dt_users, ch.h_dt_users)
    assert not np.array_equal(est.h_users, ch.h_users)
    assert est.h_dd != ch.h_dd
    assert np.allclose(est.h_users - ch.h_users, real.eps_users)


def test_csi_error_mean_is_zero():
    params = SystemParams(k=1, m=1)
    rng = trial_rng(14, 0)
    ch = draw_channels(generate_topology(params, rng), params, rng)
    var = 0.3
    n = 100_000
    eps = np.empty(n, dtype=complex)
    for i in range(n):
        _, real = apply_csi_error(ch, var, rng)
        eps[i] = real.eps_dd
    bound = 3.0 * np.sqrt(var) / np.sqrt(n)
    assert abs(np.mean(eps.real)) < bound
    assert abs(np.mean(eps.imag)) < bound


def test_negative_variance_rejected(params):
    rng = trial_rng(15, 0)
    ch = draw_channels(generate_topology(params, rng), params, rng)
    with pytest.raises(ValueError):
        apply_csi_error(ch, -1.0, rng)
