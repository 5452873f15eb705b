"""Network topology, Rayleigh/path-loss channel draws and CSI error model.

The deployment is fixed: BS at the origin, D2D transmitter at (0, 9),
D2D receiver at (0, 10), downlink users uniform on the [3, 8]^2 box.
Each channel coefficient is a unit-variance complex normal draw divided
by sqrt(d^alpha) with the exponent of the corresponding link class.
Users are kept sorted by ||h_k||^2 so that user 1 is always the weakest
(the ordering SIC relies on).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import SystemParams


@dataclass(frozen=True)
class Topology:
    bs_position: np.ndarray
    dt_position: np.ndarray
    dr_position: np.ndarray
    user_positions: np.ndarray  # (K, 2)

    def distances_bs_users(self) -> np.ndarray:
        return np.linalg.norm(self.user_positions - self.bs_position, axis=1)

    def distances_dt_users(self) -> np.ndarray:
        return np.linalg.norm(self.user_positions - self.dt_position, axis=1)

    def distance_dt_dr(self) -> float:
        return float(np.linalg.norm(self.dr_position - self.dt_position))


@dataclass(frozen=True)
class ChannelSet:
    """All channel coefficients of one network realization.

    h_users rows are sorted so ||h_1||^2 <= ... <= ||h_K||^2; h_dt_users is
    permuted jointly so index k always refers to the same physical user.
    """

    h_users: np.ndarray  # (K, M) BS -> user k
    h_dt: np.ndarray  # (M,)  BS -> D2D transmitter
    h_dr: np.ndarray  # (M,)  BS -> D2D receiver
    h_dd: complex  # Dt -> Dr
    h_dt_users: np.ndarray  # (K,) Dt -> user k

    @property
    def k(self) -> int:
        return self.h_users.shape[0]

    @property
    def m(self) -> int:
        return self.h_users.shape[1]

    def user_norms_sq(self) -> np.ndarray:
        return np.sum(np.abs(self.h_users) ** 2, axis=1)

    def is_sic_sorted(self) -> bool:
        n = self.user_norms_sq()
        return bool(np.all(np.diff(n) >= 0))

    def sic_sorted(self) -> "ChannelSet":
        """Return a copy obeying the SIC ordering (idempotent)."""
        order = np.argsort(self.user_norms_sq(), kind="stable")
        return ChannelSet(
            h_users=self.h_users[order],
            h_dt=self.h_dt,
            h_dr=self.h_dr,
            h_dd=self.h_dd,
            h_dt_users=self.h_dt_users[order],
        )


@dataclass(frozen=True)
class CsiErrorRealization:
    """Zero-mean circularly-symmetric Gaussian estimation errors.

    Only the downlink user channels and the D2D link carry estimation
    error; the harvesting and BS->Dr channels are assumed known.
    """

    eps_users: np.ndarray  # (K, M)
    eps_dd: complex
    variance: float


def _complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def generate_topology(params: SystemParams, rng: np.random.Generator) -> Topology:
    """Drop K users uniformly on [3, 8]^2; BS/Dt/Dr positions are fixed."""
    users = rng.uniform(3.0, 8.0, size=(params.k, 2))
    return Topology(
        bs_position=np.array([0.0, 0.0]),
        dt_position=np.array([0.0, 9.0]),
        dr_position=np.array([0.0, 10.0]),
        user_positions=users,
    )


def draw_channels(
    topology: Topology, params: SystemParams, rng: np.random.Generator
) -> ChannelSet:
    """Draw one Rayleigh + path-loss realization, SIC-sorted.

    Every coefficient is CN(0, 1) per entry divided by sqrt(d^alpha):
    alpha_bs_users for BS->users, alpha_d2d for Dt->Dr, alpha_bs_d2d for
    BS->Dt and BS->Dr, alpha_dt_users for Dt->users.
    """
    k, m = params.k, params.m

    d_bs_users = topology.distances_bs_users()
    d_dt_users = topology.distances_dt_users()
    d_bs_dt = float(np.linalg.norm(topology.dt_position - topology.bs_position))
    d_bs_dr = float(np.linalg.norm(topology.dr_position - topology.bs_position))
    d_dt_dr = topology.distance_dt_dr()
    if min(d_bs_users.min(), d_dt_users.min(), d_bs_dt, d_bs_dr, d_dt_dr) <= 0:
        raise ValueError("all link distances must be strictly positive")

    h_users = _complex_normal(rng, (k, m)) / np.sqrt(
        d_bs_users[:, None] ** params.alpha_bs_users
    )
    h_dt = _complex_normal(rng, m) / np.sqrt(d_bs_dt**params.alpha_bs_d2d)
    h_dr = _complex_normal(rng, m) / np.sqrt(d_bs_dr**params.alpha_bs_d2d)
    h_dd = complex(_complex_normal(rng, ()) / np.sqrt(d_dt_dr**params.alpha_d2d))
    h_dt_users = _complex_normal(rng, k) / np.sqrt(d_dt_users**params.alpha_dt_users)

    raw = ChannelSet(
        h_users=h_users, h_dt=h_dt, h_dr=h_dr, h_dd=h_dd, h_dt_users=h_dt_users
    )
    return raw.sic_sorted()


def apply_csi_error(
    channels: ChannelSet, variance: float, rng: np.random.Generator
) -> tuple[ChannelSet, CsiErrorRealization]:
    """Perturb h_users and h_dd with CN(0, variance) errors.

    Returns the estimated channel set (NOT re-sorted: the SIC order was
    fixed when the true channels were measured) together with the drawn
    realization, which is needed to evaluate the achieved rates.
    """
    if variance < 0:
        raise ValueError("error variance must be >= 0")
    eps_users = _complex_normal(rng, channels.h_users.shape, variance)
    eps_dd = complex(_complex_normal(rng, (), variance))
    estimated = ChannelSet(
        h_users=channels.h_users + eps_users,
        h_dt=channels.h_dt,
        h_dr=channels.h_dr,
        h_dd=channels.h_dd + eps_dd,
        h_dt_users=channels.h_dt_users,
    )
    return estimated, CsiErrorRealization(eps_users=eps_users, eps_dd=eps_dd, variance=variance)


def trial_rng(master_seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Independent per-trial generator from a master seed (splittable)."""
    return np.random.default_rng(np.random.SeedSequence((master_seed, trial, stream)))
