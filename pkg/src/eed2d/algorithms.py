"""End-to-end optimizers: alternating algorithm, exhaustive tau search, OMA.

The alternating loop interleaves one quadratic-transform beam update
(auxiliaries + one convex solve) with one Dinkelbach step for tau_bar per
outer iteration, tracks the true EE objective, and stops when it changes
by less than tol relative.  Every block is an ascent step, so the trace
is nondecreasing up to solver tolerance.

The exhaustive variant fixes tau on the grid {0.001, 0.001+xi, ...} and
runs the inner beam loop to convergence at each point, each from a fresh
matched-beam start (the previous grid point's beams only rescue points
whose fresh start is infeasible).

The OMA baseline runs the same alternating optimizer on the equal-share
TDMA model (see physics/model docstrings); this resource split is a
modeling choice and is flagged on every Solution via the scheme field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .barrier import SolverOptions
from .channel import ChannelSet, CsiErrorRealization
from .errors import Infeasible, NonConvergence, NotStrictlyFeasible
from .model import ProblemModel, build_model
from .params import SystemParams, TimeSwitch
from .physics import RatesReport, imperfect_rates, oma_rates, stage_rates
from .beam_opt import solve_beams_model
from .tau_opt import (
    dinkelbach_inner,
    dinkelbach_solve,
    tau_feasible_interval,
    tau_problem_from_model,
)

# relative QoS margin required of a feasible start
_INIT_MARGIN = 0.1

# Subproblem solves inside the outer loops terminate at a 1e-6 relative
# duality gap (the objective is normalized to O(1)), comfortably inside the
# 1e-5 outer tolerance; the public convex-solver defaults stay at the
# tighter 1e-8 for standalone use.
_INNER_FEAS_TOL = 1e-6
_COLD_OPTS = SolverOptions(feas_tol=_INNER_FEAS_TOL)


def _warm_opts(n_constraints: int, rel_change: float) -> SolverOptions:
    """Match the starting duality gap to the expected remaining improvement.

    A warm start sits near the end of the previous central path, so
    restarting the homotopy at small t would first drag it into the
    interior and then crawl back out; t0 ~ m / (expected gain) resumes
    roughly where the previous solve left off.
    """
    t0 = min(max(n_constraints / max(rel_change, 1e-9), 1.0), 1e6)
    return SolverOptions(barrier_t0=t0, feas_tol=_INNER_FEAS_TOL)


@dataclass
class Solution:
    """Result of one optimization run on one channel realization."""

    w: np.ndarray
    tau: TimeSwitch
    ee: float
    rates: RatesReport
    trace: list[float]
    iterations: int
    scheme: str  # "noma" | "oma"
    algorithm: str  # "alt" | "exhaustive"
    converged: bool = True


def _rates_for(
    w: np.ndarray,
    ts: TimeSwitch,
    channels: ChannelSet,
    params: SystemParams,
    scheme: str,
    realization: CsiErrorRealization | None,
) -> RatesReport:
    if scheme == "noma":
        if realization is None:
            return stage_rates(w, ts, channels, params)
        return imperfect_rates(w, ts, channels, realization, params)
    eps_users = realization.eps_users if realization is not None else None
    eps_dd = realization.eps_dd if realization is not None else 0.0
    return oma_rates(w, ts, channels, params, eps_users=eps_users, eps_dd=eps_dd)


def _mrt_beams(channels: ChannelSet, params: SystemParams, scheme: str) -> np.ndarray:
    """Full-power matched beamformers: h_k directions, uniform power split."""
    norms = np.linalg.norm(channels.h_users, axis=1, keepdims=True)
    dirs = channels.h_users / norms
    return math.sqrt(params.p_max / params.k) * dirs


def _margins_ok(model: ProblemModel, w: np.ndarray, tau_bar: float, rel: float) -> bool:
    if not model.qos:
        return True
    values = model.qos_values(w, tau_bar)
    gammas = np.array([s.gamma for s in model.qos])
    return bool(np.all(values >= (1.0 + rel) * gammas))


def mrt_feasible_start(
    channels: ChannelSet,
    params: SystemParams,
    model: ProblemModel,
    tau_bar: float,
) -> np.ndarray | None:
    """Matched-direction start whose QoS margins exceed 10% of gamma.

    Uniform powers are probed first: every reduced SINR is increasing in a
    uniform power scale s (all W-dependent terms scale with s while
    sigma^2 stays), so s = 1 decides feasibility of the whole scale
    window.  With SIC cross-decoding the uniform split usually fails (the
    decoder's own matched beam lands in the denominator), so the fallback
    solves the small power-allocation LP before restoring full power,
    which only widens the margins.
    """
    w_full = _mrt_beams(channels, params, model.scheme)
    if _margins_ok(model, w_full, tau_bar, _INIT_MARGIN):
        return w_full
    w_fill = _sic_power_fill(channels, params, model, tau_bar)
    if w_fill is not None and _margins_ok(model, w_fill, tau_bar, _INIT_MARGIN):
        return w_fill
    return None


def _sic_power_fill(
    channels: ChannelSet,
    params: SystemParams,
    model: ProblemModel,
    tau_bar: float,
) -> np.ndarray | None:
    """Per-beam powers on matched directions honoring the SIC structure.

    At fixed directions every reduced constraint is linear in the power
    vector (SIC interference, error leakage and the harvested-power term
    all are), so the minimum-power allocation meeting each constraint
    with the required headroom is a small linear program.  Scaling its
    solution up to the full budget only widens the margins, since noise
    is the only term that does not scale.
    """
    import scipy.optimize

    k_users = params.k
    dirs = channels.h_users / np.linalg.norm(channels.h_users, axis=1, keepdims=True)
    # beam j's own estimation error leaks into every constraint; pointing
    # the matched beam into the error's orthogonal complement removes that
    # term at a tiny alignment cost (only possible with M > 1)
    err_vecs = {}
    for spec in model.qos:
        for e_vec, j in spec.err_pairs:
            err_vecs[j] = e_vec
    if err_vecs and params.m > 1:
        dirs = dirs.copy()
        for j, e_vec in err_vecs.items():
            e_sq = float(np.vdot(e_vec, e_vec).real)
            if e_sq > 0:
                proj = dirs[j] - (np.vdot(e_vec, dirs[j]) / e_sq) * e_vec
                nrm = np.linalg.norm(proj)
                if nrm > 1e-12:
                    dirs[j] = proj / nrm
    # a[t, j] = |h_t^H d_j|^2
    a = np.abs(channels.h_users.conj() @ dirs.T) ** 2
    if np.any(a[np.arange(k_users), np.arange(k_users)] <= 0):
        return None
    if not model.qos:
        return _mrt_beams(channels, params, model.scheme)

    harvest_gain = np.abs(dirs.conj() @ model.g_dt) ** 2  # P_r(p) = harvest_gain @ p
    margin = 1.0 + _INIT_MARGIN
    rows = []
    rhs = []
    for spec in model.qos:
        t = spec.label[0]
        coeff = np.zeros(k_users)
        coeff[spec.beam] = -a[t, spec.beam]
        for j in spec.interferers:
            coeff[j] += margin * spec.gamma * a[t, j]
        for e_vec, j in spec.err_pairs:
            coeff[j] += margin * spec.gamma * abs(np.vdot(e_vec, dirs[j])) ** 2
        coeff += margin * spec.gamma * tau_bar * params.eta * spec.d2d_gain * harvest_gain
        rows.append(coeff)
        rhs.append(-margin * spec.gamma)

    # powers expressed in noise units: sigma2 sits 12+ orders below p_max,
    # far outside the LP solver's feasibility tolerances otherwise
    res = scipy.optimize.linprog(
        c=np.ones(k_users),
        A_ub=np.asarray(rows),
        b_ub=np.asarray(rhs),
        bounds=[(0.0, None)] * k_users,
        method="highs",
    )
    if not res.success:
        return None
    p = res.x * params.sigma2
    total = float(np.sum(p))
    if total <= 0 or total > params.p_max:
        return None
    p = p * (params.p_max / total)
    return np.sqrt(p)[:, None] * dirs


def feasible_initialization(
    channels: ChannelSet,
    params: SystemParams,
    scheme: str = "noma",
    realization: CsiErrorRealization | None = None,
) -> tuple[np.ndarray, TimeSwitch]:
    """Feasible (W0, tau0): tau starts at 0.5 and halves until QoS holds.

    Raises Infeasible when matched beams cannot satisfy the QoS at any
    scale even as tau -> 0; such trials are reported infeasible upstream.
    """
    model = build_model(channels, params, scheme, realization)
    tau = 0.5
    for _ in range(12):
        w0 = mrt_feasible_start(channels, params, model, tau / (1.0 - tau))
        if w0 is not None:
            return w0, TimeSwitch(tau)
        tau *= 0.5
    w0 = mrt_feasible_start(channels, params, model, 0.0)
    if w0 is not None:
        return w0, TimeSwitch(0.0)
    raise Infeasible("matched-beam initialization violates QoS for every tau")


def alternating_optimize(
    channels: ChannelSet,
    params: SystemParams,
    tol: float = 1e-5,
    max_outer: int = 30,
    scheme: str = "noma",
    realization: CsiErrorRealization | None = None,
    power_probes: tuple[float, ...] = (0.25, 0.5, 0.75),
) -> Solution:
    """Alternate beam and tau blocks until the EE stalls (Algorithm 1).

    Per outer iteration: update the transform auxiliaries, solve the
    convex beam subproblem warm-started at the current W, refresh the
    Dinkelbach ratio q at the current tau_bar, and solve the tau
    subproblem for the new tau_bar.  Returns the best iterate.
    """
    model = build_model(channels, params, scheme, realization)
    w, ts = feasible_initialization(channels, params, scheme, realization)
    tau_bar = ts.tau_bar

    ee = model.ee(w, tau_bar)
    trace = [ee]
    best = [ee, w, tau_bar]
    converged = False
    iterations = 0

    def ascend(w, tau_bar, ee, cold: bool) -> bool:
        n_cons = len(model.qos) + len(model.power_groups)
        rel_change = 1.0
        nonlocal iterations
        for outer in range(1, max_outer + 1):
            if cold:
                iterations = outer
            try:
                beam = solve_beams_model(
                    model,
                    tau_bar,
                    w,
                    max_rounds=1,
                    solver_opts=_COLD_OPTS
                    if (cold and outer == 1)
                    else _warm_opts(n_cons, rel_change),
                )
                w = beam.w
            except NotStrictlyFeasible:
                if outer == 1 and cold:
                    raise
                # a binding constraint blocks the beam block this round;
                # the current beams stay feasible, the tau block continues

            problem = tau_problem_from_model(model, w)
            tb_max = tau_feasible_interval(problem)
            q = problem.numerator(tau_bar) / problem.denominator(tau_bar)
            tau_bar = dinkelbach_inner(problem, q, tb_max)

            ee_new = model.ee(w, tau_bar)
            trace.append(ee_new)
            if ee_new > best[0]:
                best[:] = [ee_new, w, tau_bar]
            rel_change = abs(ee_new - ee) / max(abs(ee), 1e-12)
            if rel_change < tol:
                return True
            ee = ee_new
        return False

    converged = ascend(w, tau_bar, ee, cold=True)

    # Corner escape: a block fixed point can sit at full power while lower
    # power with a re-optimized tau does better (power is corner-optimal
    # given tau and tau given power).  Probe scaled-down beams with the
    # closed-form tau solve and resume the ascent from a strict improver.
    # In the regime where EE grows with the harvested power (the Lemma-2
    # setting) every probe loses and the fixed point is untouched.
    for _ in range(4 if power_probes else 0):
        restart = None
        for c in power_probes:
            w_c = math.sqrt(c) * best[1]
            try:
                problem = tau_problem_from_model(model, w_c)
                tb_c = dinkelbach_solve(problem).tau_bar
            except (Infeasible, NonConvergence):
                continue
            if not model.feasible(w_c, tb_c):
                continue
            ee_c = model.ee(w_c, tb_c)
            if ee_c > best[0] * (1.0 + 10.0 * tol) and (
                restart is None or ee_c > restart[0]
            ):
                restart = (ee_c, w_c, tb_c)
        if restart is None:
            break
        trace.append(restart[0])
        best[:] = list(restart)
        converged = ascend(restart[1], restart[2], restart[0], cold=False)

    ee_best, w_best, tb_best = best
    ts_best = TimeSwitch.from_tau_bar(tb_best)
    rates = _rates_for(w_best, ts_best, channels, params, scheme, realization)
    return Solution(
        w=w_best,
        tau=ts_best,
        ee=rates.ee,
        rates=rates,
        trace=trace,
        iterations=iterations,
        scheme=scheme,
        algorithm="alt",
        converged=converged,
    )


def tau_grid(xi: float) -> np.ndarray:
    """Search grid {0.001, 0.001 + xi, ...} capped at 0.999."""
    if xi <= 0:
        raise ValueError("step size must be positive")
    points = []
    tau = 0.001
    while tau <= 0.999 + 1e-12:
        points.append(round(tau, 12))
        tau += xi
    return np.array(points)


def exhaustive_tau_optimize(
    channels: ChannelSet,
    params: SystemParams,
    xi: float = 0.1,
    tol: float = 1e-5,
    scheme: str = "noma",
    realization: CsiErrorRealization | None = None,
) -> Solution:
    """Partial exhaustive search over tau (Algorithm 2).

    For each grid tau the inner beam loop (auxiliary updates + convex
    solves) runs to convergence with tau fixed.  Every point restarts
    from a fresh matched-beam initialization: carrying the previous
    beams along the grid drags the degenerate tau ~ 0 solution into all
    later points, so the carry is used only to rescue points whose fresh
    initialization is infeasible.  If every point is infeasible the
    trial is infeasible.
    """
    model = build_model(channels, params, scheme, realization)
    best: tuple[float, np.ndarray, float] | None = None
    w_carry: np.ndarray | None = None
    trace = []
    evaluated = 0

    for tau in tau_grid(xi):
        tb = tau / (1.0 - tau)
        w0 = mrt_feasible_start(channels, params, model, tb)
        if w0 is None:
            if w_carry is not None and _margins_ok(model, w_carry, tb, 1e-3):
                w0 = w_carry
            else:
                continue
        try:
            res = solve_beams_model(
                model, tb, w0, tol=tol, max_rounds=12, solver_opts=_COLD_OPTS
            )
        except NotStrictlyFeasible:
            continue
        evaluated += 1
        w_carry = res.w
        ee = model.ee(res.w, tb)
        trace.append(ee)
        if best is None or ee > best[0]:
            best = (ee, res.w, tb)

    if best is None:
        raise Infeasible("every tau grid point violates QoS")
    ee_best, w_best, tb_best = best
    ts_best = TimeSwitch.from_tau_bar(tb_best)
    rates = _rates_for(w_best, ts_best, channels, params, scheme, realization)
    return Solution(
        w=w_best,
        tau=ts_best,
        ee=rates.ee,
        rates=rates,
        trace=trace,
        iterations=evaluated,
        scheme=scheme,
        algorithm="exhaustive",
    )


def oma_baseline_optimize(
    channels: ChannelSet,
    params: SystemParams,
    tol: float = 1e-5,
    realization: CsiErrorRealization | None = None,
) -> Solution:
    """Alternating optimizer on the equal-share TDMA model."""
    return alternating_optimize(
        channels, params, tol=tol, scheme="oma", realization=realization
    )


def optimize(
    channels: ChannelSet,
    params: SystemParams,
    scheme: str = "noma",
    algorithm: str = "alt",
    xi: float = 0.1,
    tol: float = 1e-5,
    realization: CsiErrorRealization | None = None,
) -> Solution:
    if algorithm == "alt":
        return alternating_optimize(
            channels, params, tol=tol, scheme=scheme, realization=realization
        )
    if algorithm == "exhaustive":
        return exhaustive_tau_optimize(
            channels, params, xi=xi, scheme=scheme, realization=realization
        )
    raise ValueError(f"unknown algorithm {algorithm!r}")
