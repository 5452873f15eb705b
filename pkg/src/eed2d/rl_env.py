"""Line-delimited JSON environment exposing the link physics to RL agents.

One JSON object per line on stdin, one per line on stdout:

    {"cmd": "reset", "seed": 7}
        -> {"state": [...], "k": K, "m": M}
    {"cmd": "step", "action": [tau_bar_raw, Re w_1.., Re w_K.., Im w_1.., Im w_K..]}
        -> {"state": [...], "reward": r, "feasible": b, "ee": e, "rates": {...}}
    {"cmd": "close"}
        -> {"closed": true} and the loop exits

A malformed line answers {"error": ..., "fatal": false} and the loop
continues.  The state vector is

    [ ||h_1||^2 .. ||h_K||^2, ||h_Dt||^2, ||h_Dr||^2, |h_dd|^2,
      |h_d1|^2 .. |h_dK|^2, R_1 .. R_K, R_cross (t-major, k < t),
      ||w_1||^2 .. ||w_K||^2 ]

of length 4K + 3 + K(K-1)/2; the rate and beam-power entries reflect the
previous step's action and are zero right after a reset.  The raw action
beams are rescaled to the full power budget (optimal beams saturate it)
and tau comes from a sigmoid squashed into [1e-3, 1-1e-3], keeping the
agent's raw outputs unconstrained.  Rewards are the physics EE when
every reduced-rate constraint (own and cross-decoding) meets the target,
and 0 otherwise; punished transitions still return the full state.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from .channel import (
    ChannelSet,
    CsiErrorRealization,
    apply_csi_error,
    draw_channels,
    generate_topology,
    trial_rng,
)
from .errors import AllZeroBeams
from .params import SystemParams, TimeSwitch
from .physics import RatesReport, imperfect_rates, qos_feasible, stage_rates

TAU_CLIP = 1e-3


def state_length(k: int) -> int:
    return 4 * k + 3 + k * (k - 1) // 2


def action_length(k: int, m: int) -> int:
    return 1 + 2 * m * k


def cross_pairs(k: int) -> list[tuple[int, int]]:
    """(t, k) pairs with k < t, t-major, matching the state layout."""
    return [(t, kk) for t in range(1, k) for kk in range(t)]


def state_vector(
    channels: ChannelSet,
    params: SystemParams,
    rates: RatesReport | None = None,
    w: np.ndarray | None = None,
) -> np.ndarray:
    k = params.k
    parts = [
        channels.user_norms_sq(),
        [float(np.sum(np.abs(channels.h_dt) ** 2))],
        [float(np.sum(np.abs(channels.h_dr) ** 2))],
        [abs(channels.h_dd) ** 2],
        np.abs(channels.h_dt_users) ** 2,
    ]
    if rates is None:
        parts.append(np.zeros(k))
        parts.append(np.zeros(k * (k - 1) // 2))
    else:
        parts.append(rates.r_users)
        parts.append([rates.r_cross[pair] for pair in cross_pairs(k)])
    if w is None:
        parts.append(np.zeros(k))
    else:
        parts.append(np.sum(np.abs(w) ** 2, axis=1))
    state = np.concatenate([np.asarray(p, dtype=float) for p in parts])
    assert state.shape == (state_length(k),)
    return state


def normalize_action(raw: np.ndarray, params: SystemParams) -> tuple[np.ndarray, TimeSwitch]:
    """Rescale raw beams to the exact power budget, squash tau_bar to tau.

    Raises AllZeroBeams when the beam block is identically zero (the
    caller rewards such a step with 0).
    """
    raw = np.asarray(raw, dtype=float)
    k, m = params.k, params.m
    if raw.shape != (action_length(k, m),):
        raise ValueError(f"action length {raw.shape} != {action_length(k, m)}")
    re = raw[1 : 1 + k * m].reshape(k, m)
    im = raw[1 + k * m :].reshape(k, m)
    w = re + 1j * im
    p_o = float(np.sum(np.abs(w) ** 2))
    if p_o == 0.0:
        raise AllZeroBeams("cannot rescale an all-zero beam set")
    w = w * math.sqrt(params.p_max / p_o)
    x = float(raw[0])
    if x >= 0:  # overflow-safe in both tails
        tau = 1.0 / (1.0 + math.exp(-x))
    else:
        tau = math.exp(x) / (1.0 + math.exp(x))
    tau = min(max(tau, TAU_CLIP), 1.0 - TAU_CLIP)
    return w, TimeSwitch(tau)


def compute_reward(
    w: np.ndarray,
    ts: TimeSwitch,
    channels: ChannelSet,
    params: SystemParams,
    realization: CsiErrorRealization | None = None,
) -> tuple[float, bool, RatesReport]:
    """EE when all reduced-rate constraints hold, 0 otherwise."""
    if realization is None:
        rates = stage_rates(w, ts, channels, params)
        eps_term = 0.0
    else:
        rates = imperfect_rates(w, ts, channels, realization, params)
        eps_term = float(
            np.sum(
                np.abs(np.sum(realization.eps_users.conj() * w, axis=1)) ** 2
            )
        )
    feasible, _ = qos_feasible(w, ts, channels, params, eps_users_term=eps_term)
    reward = rates.ee if feasible else 0.0
    return reward, feasible, rates


@dataclass
class EnvSession:
    """Protocol state machine; one instance per served process."""

    params: SystemParams
    mode: str = "fixed"  # "fixed" | "redraw"
    seed: int = 0
    csi: str = "perfect"
    sigma_eps2: float = 0.0

    def __post_init__(self):
        if self.mode not in ("fixed", "redraw"):
            raise ValueError("mode must be 'fixed' or 'redraw'")
        if self.csi not in ("perfect", "imperfect"):
            raise ValueError("csi must be 'perfect' or 'imperfect'")
        self._resets = 0
        self._channels: ChannelSet | None = None
        self._realization: CsiErrorRealization | None = None
        self._draw(self.seed)

    def _draw(self, seed: int) -> None:
        rng = trial_rng(seed, 0)
        topology = generate_topology(self.params, rng)
        channels = draw_channels(topology, self.params, rng)
        if self.csi == "imperfect":
            channels, self._realization = apply_csi_error(channels, self.sigma_eps2, rng)
        else:
            self._realization = None
        self._channels = channels

    def reset(self, seed: int | None = None) -> dict:
        self._resets += 1
        if self.mode == "redraw":
            self._draw(seed if seed is not None else self.seed + self._resets)
        elif seed is not None and seed != self.seed:
            # fixed mode keeps the training channels unless reseeded explicitly
            self.seed = seed
            self._draw(seed)
        state = state_vector(self._channels, self.params)
        return {
            "state": state.tolist(),
            "k": self.params.k,
            "m": self.params.m,
        }

    def step(self, action: list[float]) -> dict:
        if self._channels is None:
            raise RuntimeError("step before reset")
        try:
            w, ts = normalize_action(np.asarray(action, dtype=float), self.params)
        except AllZeroBeams:
            state = state_vector(self._channels, self.params)
            return {
                "state": state.tolist(),
                "reward": 0.0,
                "feasible": False,
                "ee": 0.0,
                "rates": {"users": [0.0] * self.params.k, "d2d": 0.0},
            }
        reward, feasible, rates = compute_reward(
            w, ts, self._channels, self.params, self._realization
        )
        state = state_vector(self._channels, self.params, rates=rates, w=w)
        return {
            "state": state.tolist(),
            "reward": reward,
            "feasible": feasible,
            "ee": rates.ee,
            "rates": {
                "users": rates.r_users.tolist(),
                "d2d": rates.r_d2d,
                "harvested_w": rates.p_harvested,
                "d2d_tx_w": rates.p_d2d,
            },
        }


def serve(
    params: SystemParams,
    mode: str = "fixed",
    seed: int = 0,
    csi: str = "perfect",
    sigma_eps2: float = 0.0,
    stdin=None,
    stdout=None,
) -> None:
    """Blocking request/response loop over line-delimited JSON."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    session = EnvSession(params, mode=mode, seed=seed, csi=csi, sigma_eps2=sigma_eps2)

    def send(obj: dict) -> None:
        stdout.write(json.dumps(obj) + "\n")
        stdout.flush()

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
            cmd = msg.get("cmd")
            if cmd == "reset":
                send(session.reset(msg.get("seed")))
            elif cmd == "step":
                send(session.step(msg["action"]))
            elif cmd == "close":
                send({"closed": True})
                return
            else:
                send({"error": f"unknown cmd {cmd!r}", "fatal": False})
        except Exception as exc:  # malformed input keeps the loop alive
            send({"error": str(exc), "fatal": False})
