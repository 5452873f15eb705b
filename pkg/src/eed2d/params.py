"""Scenario constants and unit helpers."""

from __future__ import annotations

from dataclasses import dataclass


def dbm_to_watts(dbm: float) -> float:
    """Convert a dBm power level to watts: P[W] = 10^((dBm - 30)/10)."""
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0:
        raise ValueError("power must be positive to express in dBm")
    import math

    return 10.0 * math.log10(watts) + 30.0


@dataclass(frozen=True)
class SystemParams:
    """Scalar constants of one scenario.

    gamma_min is derived from r_min (gamma_min = 2^r_min - 1) and is never
    set independently.

    Attributes:
        k: number of downlink users.
        m: number of BS antennas.
        p_max: BS transmit power budget, watts.
        sigma2: noise power, watts.
        eta: RF energy conversion coefficient, in (0, 1].
        p_c: D2D transmitter circuit power, watts.
        r_min: per-user QoS rate, bps/Hz.
        alpha_bs_users, alpha_d2d, alpha_bs_d2d, alpha_dt_users:
            path-loss exponents for the four link classes.
    """

    k: int = 4
    m: int = 10
    p_max: float = dbm_to_watts(20.0)
    sigma2: float = dbm_to_watts(-94.0)
    eta: float = 0.1
    p_c: float = 1e-3
    r_min: float = 0.1
    alpha_bs_users: float = 2.5
    alpha_d2d: float = 2.0
    alpha_bs_d2d: float = 3.0
    alpha_dt_users: float = 3.0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.p_max <= 0 or self.sigma2 <= 0 or self.p_c <= 0:
            raise ValueError("p_max, sigma2 and p_c must be positive")
        if not (0.0 < self.eta <= 1.0):
            raise ValueError("eta must lie in (0, 1]")
        if self.r_min < 0:
            raise ValueError("r_min must be >= 0")

    @property
    def gamma_min(self) -> float:
        """SINR threshold 2^r_min - 1 matching the reduced QoS constraints."""
        return 2.0 ** self.r_min - 1.0

    def replace(self, **kwargs) -> "SystemParams":
        from dataclasses import replace

        return replace(self, **kwargs)


@dataclass(frozen=True)
class TimeSwitch:
    """Time-switching coefficient tau in [0, 1) and its transform tau/(1-tau)."""

    tau: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.tau < 1.0):
            raise ValueError("tau must lie in [0, 1)")

    @property
    def tau_bar(self) -> float:
        return self.tau / (1.0 - self.tau)

    @classmethod
    def from_tau_bar(cls, tau_bar: float) -> "TimeSwitch":
        if tau_bar < 0:
            raise ValueError("tau_bar must be >= 0")
        return cls(tau_bar / (1.0 + tau_bar))
