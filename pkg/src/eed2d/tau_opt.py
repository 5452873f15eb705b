"""Time-switching subproblem: optimal tau_bar for fixed beamformers.

For fixed W the objective reduces to a single-ratio concave/linear
fraction of tau_bar,

    maximize  log2(1 + A*tb / (1 + A_err*tb)) / (B*tb + C)
    s.t.      slope_i * tb + const_i <= 0,   tb >= 0,

solved with the Dinkelbach method.  Under perfect CSI A_err = 0 and the
inner maximization has the closed-form stationary point
1/(q B ln2) - 1/A; with estimation error on the D2D link the stationary
point is the positive root of a quadratic instead (same derivation, the
denominator of the SINR picks up an A_err*tb term).  Each constraint is
linear in tb, so the feasible set is an interval [0, tb_max].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import beam_gains
from .channel import ChannelSet
from .errors import Infeasible, NonConvergence
from .model import ProblemModel
from .params import SystemParams

# surrogate endpoint when q = 0 meets an unbounded feasible interval; the
# first Dinkelbach update only needs some finite feasible point
TAU_BAR_CAP = 1e3


@dataclass(frozen=True)
class TauProblem:
    """Flat coefficient form consumed by the Dinkelbach iteration."""

    a: float  # harvested-signal gain of the D2D SINR
    b: float  # energy slope eta*P_r + P_c
    c: float  # energy constant P_c
    slopes: np.ndarray  # QoS slopes, all >= 0
    consts: np.ndarray  # QoS constants
    a_err: float = 0.0  # error-leakage gain (imperfect CSI only)

    def numerator(self, tb: float) -> float:
        return math.log2(1.0 + self.a * tb / (1.0 + self.a_err * tb))

    def denominator(self, tb: float) -> float:
        return self.b * tb + self.c


@dataclass(frozen=True)
class TauSubproblemCoefficients:
    """Named coefficients of the reduced tau subproblem (perfect CSI).

    d_t / e_kt cover the cross-decoding constraints (receiver t, decoded
    user k < t); f_k / g_k cover each user decoding its own signal.  The
    e/g constants contain the -|.|^2/gamma_min term, hence gamma_min > 0.
    """

    a: float
    b: float
    c: float
    d_t: dict[int, float]
    e_kt: dict[tuple[int, int], float]
    f_k: np.ndarray
    g_k: np.ndarray

    def flatten(self) -> TauProblem:
        slopes = [self.d_t[t] for (t, k) in sorted(self.e_kt)]
        consts = [self.e_kt[(t, k)] for (t, k) in sorted(self.e_kt)]
        slopes.extend(self.f_k)
        consts.extend(self.g_k)
        return TauProblem(
            a=self.a,
            b=self.b,
            c=self.c,
            slopes=np.asarray(slopes, dtype=float),
            consts=np.asarray(consts, dtype=float),
        )


@dataclass
class DinkelbachResult:
    tau_bar: float
    q: float
    f_value: float
    iterations: int
    q_trace: list[float] = field(default_factory=list)

    @property
    def tau(self) -> float:
        return self.tau_bar / (1.0 + self.tau_bar)


def compute_tau_coefficients(
    w: np.ndarray, channels: ChannelSet, params: SystemParams
) -> TauSubproblemCoefficients:
    """Coefficients of the reduced NOMA tau subproblem for fixed W.

    Rejects gamma_min = 0: the constraint constants divide by gamma_min,
    and the r_min = 0 case should drop the QoS constraints upstream.
    """
    gamma = params.gamma_min
    if gamma == 0:
        raise ValueError("gamma_min = 0: handle r_min = 0 by dropping QoS constraints")
    k = channels.k
    p_r = float(np.sum(beam_gains(channels.h_dt[None, :], w)))
    p_i = float(np.sum(beam_gains(channels.h_dr[None, :], w)))
    gains = beam_gains(channels.h_users, w)  # (K, K)
    d2d_gains = np.abs(channels.h_dt_users) ** 2

    a = params.eta * p_r * abs(channels.h_dd) ** 2 / (p_i + params.sigma2)
    b = params.eta * p_r + params.p_c
    c = params.p_c

    d_t = {t: params.eta * p_r * float(d2d_gains[t]) for t in range(1, k)}
    e_kt = {}
    for t in range(1, k):
        for kk in range(t):
            interf = float(np.sum(gains[t, kk + 1 :]))
            e_kt[(t, kk)] = interf + params.sigma2 - gains[t, kk] / gamma
    f_k = params.eta * p_r * d2d_gains
    g_k = np.array(
        [
            float(np.sum(gains[kk, kk + 1 :])) + params.sigma2 - gains[kk, kk] / gamma
            for kk in range(k)
        ]
    )
    return TauSubproblemCoefficients(a=a, b=b, c=c, d_t=d_t, e_kt=e_kt, f_k=f_k, g_k=g_k)


def tau_problem_from_model(model: ProblemModel, w: np.ndarray) -> TauProblem:
    """Generic construction covering OMA and imperfect-CSI models."""
    p = model.params
    p_r = model.p_harvested(w)
    p_i = model.p_interference(w)
    a = p.eta * p_r * model.h_dd_sq / (p_i + p.sigma2)
    a_err = p.eta * p_r * model.eps_dd_sq / (p_i + p.sigma2)
    slopes = []
    consts = []
    for spec in model.qos:
        g = beam_gains(spec.rx[None, :], w)[0]
        interf = float(sum(g[j] for j in spec.interferers)) + spec.err_term(w)
        slopes.append(p.eta * p_r * spec.d2d_gain)
        consts.append(interf + p.sigma2 - g[spec.beam] / spec.gamma)
    return TauProblem(
        a=a,
        b=p.eta * p_r + p.p_c,
        c=p.p_c,
        slopes=np.asarray(slopes, dtype=float),
        consts=np.asarray(consts, dtype=float),
        a_err=a_err,
    )


def tau_feasible_interval(problem: TauProblem | TauSubproblemCoefficients) -> float:
    """Largest feasible tau_bar (inf when nothing binds).

    Raises Infeasible when some constraint fails for every tau_bar >= 0:
    a positive constant with zero slope, or a negative bound.
    """
    if isinstance(problem, TauSubproblemCoefficients):
        problem = problem.flatten()
    tb_max = math.inf
    for slope, const in zip(problem.slopes, problem.consts):
        if slope <= 0.0:
            if const > 0.0:
                raise Infeasible(f"constant QoS violation (const={const:.3e})")
            continue
        bound = -const / slope
        if bound < 0.0:
            raise Infeasible(f"negative tau_bar bound ({bound:.3e})")
        tb_max = min(tb_max, bound)
    return tb_max


def _inner_objective(problem: TauProblem, q: float, tb: float) -> float:
    return problem.numerator(tb) - q * problem.denominator(tb)


def dinkelbach_inner(problem: TauProblem, q: float, tb_max: float) -> float:
    """Maximizer of log2(1 + a*tb/(1+a_err*tb)) - q*(b*tb + c) on [0, tb_max].

    The objective is concave, so the clipped stationary point is optimal;
    with a = 0 or q = 0 the maximizing endpoint is returned (an unbounded
    interval is capped at TAU_BAR_CAP in the q = 0 case).
    """
    if q < 0:
        raise ValueError("q must be >= 0")
    cap = tb_max if math.isfinite(tb_max) else TAU_BAR_CAP
    if problem.a == 0.0:
        return 0.0
    if q == 0.0:
        return cap

    # stationary point: (1 + (a+a_err)tb)(1 + a_err tb) = a/(q b ln2)
    rhs = problem.a / (q * problem.b * math.log(2.0))
    a, ae = problem.a, problem.a_err
    if ae == 0.0:
        tb0 = 1.0 / (q * problem.b * math.log(2.0)) - 1.0 / a
    else:
        p2 = ae * (a + ae)
        p1 = a + 2.0 * ae
        p0 = 1.0 - rhs
        disc = p1 * p1 - 4.0 * p2 * p0
        tb0 = (-p1 + math.sqrt(disc)) / (2.0 * p2) if disc >= 0.0 else -1.0
    candidates = [0.0, min(max(tb0, 0.0), cap), cap]
    return max(candidates, key=lambda tb: _inner_objective(problem, q, tb))


def dinkelbach_solve(
    problem: TauProblem | TauSubproblemCoefficients,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> DinkelbachResult:
    """Iterate tb <- argmax(N - qD), q <- N(tb)/D(tb) until |F(q)| < tol.

    q starts at 0, which guarantees F(0) >= 0 and a nondecreasing q
    sequence (recorded in q_trace).
    """
    if isinstance(problem, TauSubproblemCoefficients):
        problem = problem.flatten()
    tb_max = tau_feasible_interval(problem)

    q = 0.0
    q_trace = [q]
    for it in range(1, max_iter + 1):
        tb = dinkelbach_inner(problem, q, tb_max)
        n = problem.numerator(tb)
        d = problem.denominator(tb)
        f = n - q * d
        if abs(f) < tol:
            return DinkelbachResult(tau_bar=tb, q=q, f_value=f, iterations=it, q_trace=q_trace)
        q = n / d
        q_trace.append(q)
    raise NonConvergence(f"Dinkelbach did not reach |F| < {tol} in {max_iter} iterations")
