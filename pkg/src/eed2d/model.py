"""Scheme-resolved optimization model shared by the two subproblem solvers.

A ProblemModel pins down everything the tau and beamforming subproblems
need: effective harvesting/interference channels (the TDMA 1/K share is
folded into them as a sqrt(1/K) scaling), the list of reduced QoS
constraints, the power constraint groups, and the CSI error terms.  The
NOMA perfect-CSI model reproduces the paper-facing operations exactly;
the OMA and imperfect-CSI variants only change the model data, never the
solver code.

Every reduced QoS constraint has the shape

    |rx^H w_b|^2  >=  gamma * (tau_bar * eta * d2d_gain * P_r(W)
                               + sum_{j in interferers} |rx^H w_j|^2
                               + sum_{(e, j) in err_pairs} |e^H w_j|^2
                               + sigma^2)

which is linear in tau_bar and quadratic in the beamformers, so both
subproblems stay tractable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import beam_gains
from .channel import ChannelSet, CsiErrorRealization
from .params import SystemParams
from .physics import QOS_SLACK, oma_gamma_min


@dataclass(frozen=True)
class QosSpec:
    rx: np.ndarray  # (M,) receiver channel used for decoding
    beam: int  # index of the decoded beam
    interferers: tuple[int, ...]  # beams left in the SIC denominator
    d2d_gain: float  # |h_{d,rx}|^2
    gamma: float  # SINR threshold
    label: tuple[int, int]  # (t, k) receiver/decoded pair, 0-indexed
    err_pairs: tuple[tuple[np.ndarray, int], ...] = ()  # (error vec, beam)

    def err_term(self, w: np.ndarray) -> float:
        if not self.err_pairs:
            return 0.0
        return float(
            sum(beam_gains(e[None, :], w[j : j + 1])[0, 0] for e, j in self.err_pairs)
        )


@dataclass(frozen=True)
class ProblemModel:
    params: SystemParams
    scheme: str  # "noma" | "oma"
    g_dt: np.ndarray  # (M,) effective harvesting channel (scale folded in)
    g_dr: np.ndarray  # (M,) effective BS->Dr interference channel
    h_dd_sq: float  # |h_dd|^2 used in the D2D rate numerator
    eps_dd_sq: float  # |eps_dd|^2 (0 under perfect CSI)
    qos: tuple[QosSpec, ...]
    power_groups: tuple[tuple[tuple[int, ...], float], ...]

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def m(self) -> int:
        return self.params.m

    def p_harvested(self, w: np.ndarray) -> float:
        return float(np.sum(beam_gains(self.g_dt[None, :], w)))

    def p_interference(self, w: np.ndarray) -> float:
        return float(np.sum(beam_gains(self.g_dr[None, :], w)))

    def ee(self, w: np.ndarray, tau_bar: float) -> float:
        """Objective in its tau_bar form; equals R_D / E_c of the slot."""
        p = self.params
        p_r = self.p_harvested(w)
        p_i = self.p_interference(w)
        den = p_i + tau_bar * p.eta * self.eps_dd_sq * p_r + p.sigma2
        num = np.log2(1.0 + tau_bar * p.eta * self.h_dd_sq * p_r / den)
        return float(num / (tau_bar * p.eta * p_r + (1.0 + tau_bar) * p.p_c))

    def qos_values(self, w: np.ndarray, tau_bar: float) -> np.ndarray:
        """SINR value of each QoS constraint at (w, tau_bar)."""
        p_r = self.p_harvested(w)
        sigma2 = self.params.sigma2
        eta = self.params.eta
        out = np.empty(len(self.qos))
        for i, spec in enumerate(self.qos):
            g = beam_gains(spec.rx[None, :], w)[0]
            num = g[spec.beam]
            den = tau_bar * eta * spec.d2d_gain * p_r + sigma2 + spec.err_term(w)
            for j in spec.interferers:
                den += g[j]
            out[i] = num / den
        return out

    def qos_margins(self, w: np.ndarray, tau_bar: float) -> np.ndarray:
        return self.qos_values(w, tau_bar) - np.array([s.gamma for s in self.qos])

    def group_powers(self, w: np.ndarray) -> np.ndarray:
        return np.array(
            [sum(float(np.sum(np.abs(w[j]) ** 2)) for j in idx) for idx, _ in self.power_groups]
        )

    def feasible(self, w: np.ndarray, tau_bar: float, slack: float = QOS_SLACK) -> bool:
        if self.qos and np.any(self.qos_margins(w, tau_bar) < -slack):
            return False
        bounds = np.array([b for _, b in self.power_groups])
        return bool(np.all(self.group_powers(w) <= bounds * (1 + 1e-8)))


def build_model(
    channels: ChannelSet,
    params: SystemParams,
    scheme: str = "noma",
    realization: CsiErrorRealization | None = None,
) -> ProblemModel:
    """Resolve channels + scheme + CSI assumption into a ProblemModel.

    With r_min = 0 the QoS constraints are dropped entirely (the SINR
    threshold would be 0, and the tau subproblem divides by gamma).
    Under imperfect CSI the supplied channel set should be the estimated
    one; the realization contributes the extra interference terms.
    """
    if scheme not in ("noma", "oma"):
        raise ValueError(f"unknown scheme {scheme!r}")
    k = params.k
    all_beams = tuple(range(k))
    eps_dd_sq = abs(realization.eps_dd) ** 2 if realization is not None else 0.0
    d2d_gains = np.abs(channels.h_dt_users) ** 2

    qos: list[QosSpec] = []
    if scheme == "noma":
        scale = 1.0
        power_groups = ((all_beams, params.p_max),)
        if params.r_min > 0:
            # every user constraint sees the full sum of error leakage terms
            err_pairs = (
                tuple((realization.eps_users[j], j) for j in range(k))
                if realization is not None
                else ()
            )
            for kk in range(k):
                for t in range(kk, k):
                    qos.append(
                        QosSpec(
                            rx=channels.h_users[t],
                            beam=kk,
                            interferers=tuple(range(kk + 1, k)),
                            d2d_gain=float(d2d_gains[t]),
                            gamma=params.gamma_min,
                            label=(t, kk),
                            err_pairs=err_pairs,
                        )
                    )
    else:
        scale = 1.0 / k
        # the TDMA beams split the same BS budget that NOMA superposes; a
        # per-sub-slot budget of p_max each would hand OMA K times the
        # radiated energy and make the two schemes' optima coincide
        power_groups = ((all_beams, params.p_max),)
        if params.r_min > 0:
            gamma = oma_gamma_min(params)
            for kk in range(k):
                # sub-slot k only carries beam k, so only its own leakage
                err_pairs = (
                    ((realization.eps_users[kk], kk),) if realization is not None else ()
                )
                qos.append(
                    QosSpec(
                        rx=channels.h_users[kk],
                        beam=kk,
                        interferers=(),
                        d2d_gain=float(d2d_gains[kk]),
                        gamma=gamma,
                        label=(kk, kk),
                        err_pairs=err_pairs,
                    )
                )

    root = np.sqrt(scale)
    return ProblemModel(
        params=params,
        scheme=scheme,
        g_dt=root * channels.h_dt,
        g_dr=root * channels.h_dr,
        h_dd_sq=abs(channels.h_dd) ** 2,
        eps_dd_sq=eps_dd_sq,
        qos=tuple(qos),
        power_groups=power_groups,
    )
