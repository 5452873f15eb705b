"""Rates, powers, energy and feasibility quantities of the link model.

All rates use log base 2 (per-Hz, unit slot), so the SINR threshold
matching a rate target r is 2^r - 1.  Beamformers are (K, M) complex
arrays, one row per user, and channels come from channel.ChannelSet.

Two-stage slot: during tau the BS serves the users while the D2D
transmitter harvests; during 1-tau the D2D pair transmits with power
eta*tau_bar*P_r and interferes with the downlink.

The OMA variants model equal-share TDMA: each stage splits into K
sub-slots, in sub-slot k only beam k is active, so the user rates carry
a 1/K slot fraction, there is no inter-user interference, and the
harvested/interference powers average to (1/K) * sum_k |h^H w_k|^2.
The K beams share the same total budget sum_k ||w_k||^2 <= p_max that
NOMA superposes.  This is a modeling choice flagged on every Solution:
the reference scheme is any orthogonal split, and equal-share TDMA on
the common power budget is the simplest one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import beam_gains
from .channel import ChannelSet, CsiErrorRealization
from .params import SystemParams, TimeSwitch

QOS_SLACK = 1e-9


@dataclass(frozen=True)
class RatesReport:
    """Every rate/power/energy quantity of one (W, tau) operating point."""

    r_users: np.ndarray  # (K,) whole-slot own-signal rates, bps/Hz
    r_cross: dict  # (t, k) -> whole-slot rate of user t decoding user k, k < t
    r_d2d: float  # D2D rate, bps/Hz
    p_harvested: float  # watts
    p_d2d: float  # watts
    energy: float  # joules per unit slot
    ee: float  # r_d2d / energy


def total_power(w: np.ndarray) -> float:
    return float(np.sum(np.abs(w) ** 2))


def within_power_budget(w: np.ndarray, params: SystemParams, rel_slack: float = 1e-8) -> bool:
    return total_power(w) <= params.p_max * (1.0 + rel_slack)


def harvested_power(w: np.ndarray, h_dt: np.ndarray) -> float:
    """Power collected by the D2D transmitter: sum_k |h_dt^H w_k|^2."""
    if w.shape[1] != h_dt.shape[0]:
        raise ValueError("antenna dimensions disagree")
    return float(np.sum(beam_gains(h_dt[None, :], w)))


def d2d_transmit_power(ts: TimeSwitch, eta: float, p_harvested: float) -> float:
    """eta * tau * P_r / (1 - tau), i.e. eta * tau_bar * P_r."""
    if ts.tau >= 1.0:
        raise ValueError("tau = 1 leaves no transmission phase")
    return eta * ts.tau_bar * p_harvested


def _suffix_interference(gains: np.ndarray) -> np.ndarray:
    """S[t, k] = sum_{j > k} gains[t, j]."""
    k = gains.shape[1]
    s = np.zeros_like(gains)
    if k > 1:
        s[:, : k - 1] = np.cumsum(gains[:, ::-1], axis=1)[:, ::-1][:, 1:]
    return s


def _log2_rates(sinr: np.ndarray) -> np.ndarray:
    return np.log2(1.0 + sinr)


def stage_rates(
    w: np.ndarray,
    ts: TimeSwitch,
    channels: ChannelSet,
    params: SystemParams,
) -> RatesReport:
    """Evaluate all NOMA rates of the two-stage slot.

    Stage-1 SINR of user t decoding user k:
        |h_t^H w_k|^2 / (sum_{j>k} |h_t^H w_j|^2 + sigma^2)
    Stage-2 adds P_t |h_{d,t}|^2 to the denominator.  Whole-slot rates sum
    the two stages weighted by tau and 1-tau.
    """
    return _rates_noma(w, ts, channels, params, eps_users_term=0.0, eps_dd_term=0.0)


def imperfect_rates(
    w: np.ndarray,
    ts: TimeSwitch,
    estimated: ChannelSet,
    realization: CsiErrorRealization,
    params: SystemParams,
) -> RatesReport:
    """Rates achieved when channel estimates carry Gaussian errors.

    The stage-2 user denominators gain sum_k |eps_k^H w_k|^2 and the D2D
    denominator gains P_t |eps_dd|^2; stage-1 rates are unchanged.
    """
    eps_users_term = float(np.sum(np.diag(beam_gains(realization.eps_users, w))))
    eps_dd_sq = abs(realization.eps_dd) ** 2
    return _rates_noma(
        w, ts, estimated, params, eps_users_term=eps_users_term, eps_dd_term=eps_dd_sq
    )


def _rates_noma(
    w: np.ndarray,
    ts: TimeSwitch,
    channels: ChannelSet,
    params: SystemParams,
    eps_users_term: float,
    eps_dd_term: float,
) -> RatesReport:
    k = channels.k
    if w.shape != (k, channels.m):
        raise ValueError(f"beamformer shape {w.shape} does not match ({k}, {channels.m})")
    tau = ts.tau
    sigma2 = params.sigma2

    gains = beam_gains(channels.h_users, w)  # (K, K): rows receivers, cols beams
    suffix = _suffix_interference(gains)
    p_r = harvested_power(w, channels.h_dt)
    p_t = d2d_transmit_power(ts, params.eta, p_r)
    d2d_gain_users = np.abs(channels.h_dt_users) ** 2  # |h_{d,t}|^2 per receiver t

    sinr1 = gains / (suffix + sigma2)
    denom2 = suffix + p_t * d2d_gain_users[:, None] + eps_users_term + sigma2
    sinr2 = gains / denom2

    rates = tau * _log2_rates(sinr1) + (1.0 - tau) * _log2_rates(sinr2)

    r_users = np.diag(rates).copy()
    r_cross = {(t, kk): float(rates[t, kk]) for t in range(1, k) for kk in range(t)}

    p_i = float(np.sum(beam_gains(channels.h_dr[None, :], w)))
    sinr_d = p_t * abs(channels.h_dd) ** 2 / (p_i + p_t * eps_dd_term + sigma2)
    r_d2d = (1.0 - tau) * float(np.log2(1.0 + sinr_d))

    energy = params.eta * tau * p_r + params.p_c
    return RatesReport(
        r_users=r_users,
        r_cross=r_cross,
        r_d2d=r_d2d,
        p_harvested=p_r,
        p_d2d=p_t,
        energy=energy,
        ee=r_d2d / energy,
    )


def qos_margins(
    w: np.ndarray,
    ts: TimeSwitch,
    channels: ChannelSet,
    params: SystemParams,
    eps_users_term: float = 0.0,
) -> np.ndarray:
    """Slacks of the reduced (tau-free) QoS constraints.

    One entry per pair (k, t) with t >= k, ordered k-major: the stage-2
    SINR of user t decoding user k minus gamma_min.  Stage-1 satisfaction
    follows whenever these hold, so only the second stage is checked.
    """
    k = channels.k
    gains = beam_gains(channels.h_users, w)
    suffix = _suffix_interference(gains)
    p_t = d2d_transmit_power(ts, params.eta, harvested_power(w, channels.h_dt))
    d2d_gain_users = np.abs(channels.h_dt_users) ** 2
    denom2 = suffix + p_t * d2d_gain_users[:, None] + eps_users_term + params.sigma2
    sinr2 = gains / denom2
    return np.array(
        [sinr2[t, kk] - params.gamma_min for kk in range(k) for t in range(kk, k)]
    )


def qos_feasible(
    w: np.ndarray,
    ts: TimeSwitch,
    channels: ChannelSet,
    params: SystemParams,
    eps_users_term: float = 0.0,
) -> tuple[bool, np.ndarray]:
    margins = qos_margins(w, ts, channels, params, eps_users_term)
    return bool(np.all(margins >= -QOS_SLACK)), margins


# ---------------------------------------------------------------------------
# OMA (equal-share TDMA) variants


def oma_gamma_min(params: SystemParams) -> float:
    """Per-sub-slot SINR threshold: the 1/K slot share must still carry r_min."""
    return 2.0 ** (params.k * params.r_min) - 1.0


def oma_rates(
    w: np.ndarray,
    ts: TimeSwitch,
    channels: ChannelSet,
    params: SystemParams,
    eps_users: np.ndarray | None = None,
    eps_dd: complex = 0.0,
) -> RatesReport:
    """Rates of the TDMA reference scheme (see module docstring)."""
    k = channels.k
    tau = ts.tau
    sigma2 = params.sigma2

    own_gains = np.diag(beam_gains(channels.h_users, w)).copy()  # |h_k^H w_k|^2
    p_r = harvested_power(w, channels.h_dt) / k
    p_t = d2d_transmit_power(ts, params.eta, p_r)
    d2d_gain_users = np.abs(channels.h_dt_users) ** 2

    err_users = np.zeros(k)
    if eps_users is not None:
        err_users = np.diag(beam_gains(eps_users, w)).copy()

    sinr1 = own_gains / sigma2
    sinr2 = own_gains / (p_t * d2d_gain_users + err_users + sigma2)
    r_users = (tau * _log2_rates(sinr1) + (1.0 - tau) * _log2_rates(sinr2)) / k

    p_i = float(np.sum(beam_gains(channels.h_dr[None, :], w))) / k
    sinr_d = p_t * abs(channels.h_dd) ** 2 / (p_i + p_t * abs(eps_dd) ** 2 + sigma2)
    r_d2d = (1.0 - tau) * float(np.log2(1.0 + sinr_d))

    energy = params.eta * tau * p_r + params.p_c
    return RatesReport(
        r_users=r_users,
        r_cross={},
        r_d2d=r_d2d,
        p_harvested=p_r,
        p_d2d=p_t,
        energy=energy,
        ee=r_d2d / energy,
    )


def oma_qos_margins(
    w: np.ndarray,
    ts: TimeSwitch,
    channels: ChannelSet,
    params: SystemParams,
    eps_users: np.ndarray | None = None,
) -> np.ndarray:
    k = channels.k
    own_gains = np.diag(beam_gains(channels.h_users, w))
    p_r = harvested_power(w, channels.h_dt) / k
    p_t = d2d_transmit_power(ts, params.eta, p_r)
    err_users = np.zeros(k)
    if eps_users is not None:
        err_users = np.diag(beam_gains(eps_users, w)).copy()
    sinr2 = own_gains / (p_t * np.abs(channels.h_dt_users) ** 2 + err_users + params.sigma2)
    return sinr2 - oma_gamma_min(params)


def oma_qos_feasible(
    w: np.ndarray,
    ts: TimeSwitch,
    channels: ChannelSet,
    params: SystemParams,
    eps_users: np.ndarray | None = None,
) -> tuple[bool, np.ndarray]:
    margins = oma_qos_margins(w, ts, channels, params, eps_users)
    return bool(np.all(margins >= -QOS_SLACK)), margins
