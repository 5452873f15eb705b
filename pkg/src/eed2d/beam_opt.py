"""Beamforming subproblem: quadratic transform with closed-form auxiliaries.

For fixed tau_bar the EE ratio is decoupled in two steps: a single-ratio
quadratic transform introduces y (square-root lifting of the whole
fraction), then the sum-of-ratios inside the log is linearized per beam
with auxiliaries z_k.  The resulting surrogate

    f_qq(W) = 2 y sqrt(log2(1 + kappa * S(W))) - y^2 (tb*eta*P_r(W) + (1+tb)*P_c)

with kappa = tb*eta*|h_dd|^2 and

    S(W) = sum_k 2 Re{z_k^* h_Dt^H w_k} - (sum_k |z_k|^2) (P_i(W) + sigma^2)

is concave in the real-lifted W, touches the true ratio at the auxiliary
update point, and lower-bounds it elsewhere.  S is clamped at zero before
the log: away from the update point the inner surrogate can go negative,
and the clamp preserves the ascent property.  The same per-ratio device
turns every reduced QoS constraint into a convex quadratic, so the
subproblem is solved by the log-barrier Newton solver.

Notation pitfalls inherited from the system model: the numerator channel
of S is the harvesting link h_Dt (energy flows through it into P_t), and
the z denominator carries sigma^2, consistent with the optimal-z formula.
Under imperfect CSI the z/S denominator gains tb*eta*|eps_dd|^2*P_r(W) and
the QoS denominators gain the error-leakage quadratics; both keep the
structure above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .barrier import (
    ConvexProgram,
    Objective,
    QuadraticConstraints,
    SolverOptions,
    barrier_solve,
    lift,
    unlift,
)
from .channel import ChannelSet
from .errors import NotStrictlyFeasible
from .model import ProblemModel, build_model
from .params import SystemParams

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class AuxiliaryVars:
    """Quadratic-transform auxiliaries for one (W, tau_bar) point.

    qos_aux is aligned with the model's QoS constraint list; nu/mu expose
    the cross-decoding and own-signal entries under their usual names.
    """

    y: float
    z: np.ndarray  # (K,) complex
    qos_aux: np.ndarray  # (n_qos,) complex, aligned with model.qos
    qos_labels: tuple[tuple[int, int], ...]

    @property
    def nu(self) -> dict[tuple[int, int], complex]:
        return {
            lab: complex(v)
            for lab, v in zip(self.qos_labels, self.qos_aux)
            if lab[0] != lab[1]
        }

    @property
    def mu(self) -> np.ndarray:
        return np.array(
            [v for lab, v in zip(self.qos_labels, self.qos_aux) if lab[0] == lab[1]]
        )


def _inner_products(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """a^H w_k for every beam, shape (K,) complex."""
    return w @ a.conj()


def update_auxiliaries_model(
    model: ProblemModel, w: np.ndarray, tau_bar: float
) -> AuxiliaryVars:
    p = model.params
    p_r = model.p_harvested(w)
    p_i = model.p_interference(w)
    den_d = p_i + tau_bar * p.eta * model.eps_dd_sq * p_r + p.sigma2

    z = _inner_products(model.g_dt, w) / den_d
    r_val = math.log2(1.0 + tau_bar * p.eta * model.h_dd_sq * p_r / den_d)
    e_val = tau_bar * p.eta * p_r + (1.0 + tau_bar) * p.p_c
    y = math.sqrt(r_val) / e_val

    qos_aux = np.empty(len(model.qos), dtype=complex)
    for i, spec in enumerate(model.qos):
        inner = _inner_products(spec.rx, w)
        alpha = tau_bar * p.eta * spec.d2d_gain * p_r + p.sigma2 + spec.err_term(w)
        for j in spec.interferers:
            alpha += abs(inner[j]) ** 2
        qos_aux[i] = inner[spec.beam] / alpha
    return AuxiliaryVars(
        y=y, z=z, qos_aux=qos_aux, qos_labels=tuple(s.label for s in model.qos)
    )


def update_auxiliaries(
    w: np.ndarray, tau_bar: float, channels: ChannelSet, params: SystemParams
) -> AuxiliaryVars:
    """Optimal y, z_k, nu_{t,k}, mu_k at (W, tau_bar) for the NOMA model."""
    return update_auxiliaries_model(build_model(channels, params), w, tau_bar)


# ---------------------------------------------------------------------------
# real lifting of the quadratic structure


def _functionals(a: np.ndarray, beam: int, k: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows u, v with u.x = Re(a^H w_beam), v.x = Im(a^H w_beam)."""
    n = 2 * k * m
    u = np.zeros(n)
    v = np.zeros(n)
    re = slice(beam * m, (beam + 1) * m)
    im = slice(k * m + beam * m, k * m + (beam + 1) * m)
    u[re] = a.real
    u[im] = a.imag
    v[re] = -a.imag
    v[im] = a.real
    return u, v


class _QuadCache:
    """Caches |a^H w_beam|^2 lift matrices within one subproblem build."""

    def __init__(self, k: int, m: int):
        self.k = k
        self.m = m
        self._store: dict[tuple[int, int], np.ndarray] = {}

    def gain_quad(self, a: np.ndarray, beam: int) -> np.ndarray:
        key = (id(a), beam)
        if key not in self._store:
            u, v = _functionals(a, beam, self.k, self.m)
            self._store[key] = np.outer(u, u) + np.outer(v, v)
        return self._store[key]

    def sum_over_beams(self, a: np.ndarray) -> np.ndarray:
        total = self.gain_quad(a, 0).copy()
        for j in range(1, self.k):
            total += self.gain_quad(a, j)
        return total


class TransformedObjective(Objective):
    """f_qq as a function of the real-lifted beamformers (fixed y, z).

    Values are divided by `scale`; scaling the objective only reparametrizes
    the barrier path (t -> t/scale), so solutions are unchanged while the
    Newton systems stay well-conditioned across P_c choices.
    """

    def __init__(
        self,
        a_r: np.ndarray,
        a_den: np.ndarray,
        ell: np.ndarray,
        zeta: float,
        kappa: float,
        y: float,
        tb_eta: float,
        e_const: float,
        sigma2: float,
        scale: float = 1.0,
    ):
        self.a_r = a_r  # P_r(x) = x^T a_r x
        self.a_den = a_den  # z-denominator quadratic (P_i + err share)
        self.ell = ell  # linear term of S
        self.zeta = zeta  # sum_k |z_k|^2
        self.kappa = kappa
        self.y = y
        self.tb_eta = tb_eta  # tau_bar * eta
        self.e_const = e_const  # (1 + tau_bar) * P_c
        self.sigma2 = sigma2
        self.scale = scale

    @property
    def _degenerate(self) -> bool:
        # tau_bar = 0 or a zero-rate point: the log term vanishes identically
        return self.y == 0.0 or self.kappa == 0.0

    def _s(self, x: np.ndarray) -> float:
        return float(self.ell @ x - self.zeta * (x @ self.a_den @ x + self.sigma2))

    def in_domain(self, x: np.ndarray) -> bool:
        return self._degenerate or self._s(x) > 0.0

    def max_step(self, x: np.ndarray, direction: np.ndarray) -> float:
        """Where S(x + s*d) hits zero: S is concave quadratic along the ray."""
        if self._degenerate:
            return np.inf
        s0 = self._s(x)
        sb = float((self.ell - 2.0 * self.zeta * (self.a_den @ x)) @ direction)
        sa = -self.zeta * float(direction @ self.a_den @ direction)
        if sa < 0.0:
            disc = sb * sb - 4.0 * sa * s0
            return (-sb - math.sqrt(disc)) / (2.0 * sa)
        if sb < 0.0:
            return -s0 / sb
        return np.inf

    def value(self, x: np.ndarray) -> float:
        energy = self.tb_eta * float(x @ self.a_r @ x) + self.e_const
        if self._degenerate:
            return -self.y**2 * energy / self.scale
        s = max(self._s(x), 0.0)
        l_val = math.log2(1.0 + self.kappa * s)
        return (2.0 * self.y * math.sqrt(l_val) - self.y**2 * energy) / self.scale

    def _pieces(self, x: np.ndarray):
        s = self._s(x)
        u = 1.0 + self.kappa * s
        l_val = math.log(u) / _LN2
        grad_s = self.ell - 2.0 * self.zeta * (self.a_den @ x)
        return s, u, l_val, grad_s

    def grad(self, x: np.ndarray) -> np.ndarray:
        energy_grad = self.y**2 * self.tb_eta * 2.0 * (self.a_r @ x)
        if self._degenerate:
            return -energy_grad / self.scale
        _, u, l_val, grad_s = self._pieces(x)
        beta1 = self.y * self.kappa / (math.sqrt(l_val) * u * _LN2)
        return (beta1 * grad_s - energy_grad) / self.scale

    def hess(self, x: np.ndarray) -> np.ndarray:
        energy_hess = self.y**2 * self.tb_eta * 2.0 * self.a_r
        if self._degenerate:
            return -energy_hess / self.scale
        _, u, l_val, grad_s = self._pieces(x)
        sqrt_l = math.sqrt(l_val)
        beta1 = self.y * self.kappa / (sqrt_l * u * _LN2)
        c2 = (
            -self.y
            * self.kappa**2
            * (1.0 / (2.0 * sqrt_l * _LN2) + sqrt_l)
            / (_LN2 * l_val * u * u)
        )
        h = beta1 * (-2.0 * self.zeta) * self.a_den
        h = h + c2 * np.outer(grad_s, grad_s)
        h = h - energy_hess
        return h / self.scale


def build_subproblem_model(
    model: ProblemModel,
    aux: AuxiliaryVars,
    tau_bar: float,
    scale: float = 1.0,
) -> ConvexProgram:
    """Assemble the convex beamforming program for fixed auxiliaries."""
    p = model.params
    k, m = model.k, model.m
    n = 2 * k * m
    cache = _QuadCache(k, m)

    a_r = cache.sum_over_beams(model.g_dt)
    a_i = cache.sum_over_beams(model.g_dr)
    c_err = tau_bar * p.eta * model.eps_dd_sq
    a_den = a_i + c_err * a_r if c_err != 0.0 else a_i

    ell = np.zeros(n)
    for kk in range(k):
        u, v = _functionals(model.g_dt, kk, k, m)
        ell += 2.0 * (aux.z[kk].real * u + aux.z[kk].imag * v)
    zeta = float(np.sum(np.abs(aux.z) ** 2))

    objective = TransformedObjective(
        a_r=a_r,
        a_den=a_den,
        ell=ell,
        zeta=zeta,
        kappa=tau_bar * p.eta * model.h_dd_sq,
        y=aux.y,
        tb_eta=tau_bar * p.eta,
        e_const=(1.0 + tau_bar) * p.p_c,
        sigma2=p.sigma2,
        scale=scale,
    )

    rows: list[tuple[np.ndarray, np.ndarray, float]] = []
    for spec, nu in zip(model.qos, aux.qos_aux):
        nu_sq = abs(nu) ** 2
        q = nu_sq * tau_bar * p.eta * spec.d2d_gain * a_r
        for j in spec.interferers:
            q = q + nu_sq * cache.gain_quad(spec.rx, j)
        for e_vec, j in spec.err_pairs:
            q = q + nu_sq * cache.gain_quad(e_vec, j)
        u, v = _functionals(spec.rx, spec.beam, k, m)
        b = -2.0 * (nu.real * u + nu.imag * v)
        c = spec.gamma + nu_sq * p.sigma2
        rows.append((q, b, c))

    for idx, bound in model.power_groups:
        diag = np.zeros(n)
        for j in idx:
            diag[j * m : (j + 1) * m] = 1.0
            diag[k * m + j * m : k * m + (j + 1) * m] = 1.0
        rows.append((np.diag(diag), np.zeros(n), -bound))

    return ConvexProgram(
        objective=objective, constraints=QuadraticConstraints.stack(rows), dimension=n
    )


def build_subproblem(
    aux: AuxiliaryVars, tau_bar: float, channels: ChannelSet, params: SystemParams
) -> ConvexProgram:
    """NOMA subproblem: C(K,2)+K QoS rows plus the total-power row."""
    return build_subproblem_model(build_model(channels, params), aux, tau_bar)


def transformed_objective(
    w: np.ndarray,
    y: float,
    z: np.ndarray,
    tau_bar: float,
    channels: ChannelSet,
    params: SystemParams,
) -> float:
    """Evaluate f_qq at (W, y, z) for the NOMA model."""
    model = build_model(channels, params)
    aux = AuxiliaryVars(y=y, z=np.asarray(z, dtype=complex), qos_aux=np.empty(0, dtype=complex), qos_labels=())
    stripped = ProblemModel(
        params=model.params,
        scheme=model.scheme,
        g_dt=model.g_dt,
        g_dr=model.g_dr,
        h_dd_sq=model.h_dd_sq,
        eps_dd_sq=model.eps_dd_sq,
        qos=(),
        power_groups=model.power_groups,
    )
    program = build_subproblem_model(stripped, aux, tau_bar)
    return program.objective.value(lift(w))


def _nudged_inside(program: ConvexProgram, x: np.ndarray) -> np.ndarray:
    """Pull a boundary start strictly inside by shrinking the beamformers.

    Warm starts sit exactly on the power boundary (the previous solve
    saturates it), and a uniform shrink restores strict feasibility
    without perturbing the QoS margins measurably.
    """
    cand = x
    for _ in range(64):
        vals = program.constraints.values(cand)
        if np.all(vals < 0.0) and program.objective.in_domain(cand):
            return cand
        cand = cand * (1.0 - 1e-7)
    raise NotStrictlyFeasible("could not nudge the start strictly inside")


@dataclass
class BeamSolveResult:
    w: np.ndarray
    f_qq_trace: list[float]
    rounds: int
    barrier_steps: int


def solve_beams_model(
    model: ProblemModel,
    tau_bar: float,
    w_init: np.ndarray,
    tol: float = 1e-6,
    max_rounds: int = 50,
    solver_opts: SolverOptions | None = None,
    warm_opts: SolverOptions | None = None,
) -> BeamSolveResult:
    """Alternate auxiliary updates with barrier solves until f_qq stalls.

    The f_qq sequence is nondecreasing (block-coordinate ascent on a
    touching surrogate); convergence is declared when the improvement
    drops below tol relative.  Rounds after the first start next to the
    previous central path, so unless warm_opts pins them down their
    barrier weight t0 is matched to the previous round's improvement:
    restarting the homotopy too low wastes Newton steps pulling the
    point into the interior, restarting too high strands it.
    """
    base = solver_opts or SolverOptions()
    w = w_init
    trace: list[float] = []
    steps = 0
    f_prev: float | None = None
    rel_gain = 1.0
    for rnd in range(1, max_rounds + 1):
        aux = update_auxiliaries_model(model, w, tau_bar)
        ee_now = model.ee(w, tau_bar)
        scale = max(abs(ee_now), 1e-9)
        program = build_subproblem_model(model, aux, tau_bar, scale=scale)
        if rnd == 1:
            opts = base
        elif warm_opts is not None:
            opts = warm_opts
        else:
            # floor the gap estimate at 10*tol: a round capped by its own
            # high t0 reports a tiny gain that must not strand the next one
            gap = max(rel_gain, 10.0 * tol, 1e-9)
            t0 = min(max(program.constraints.m / gap, 1.0), 1e6)
            opts = SolverOptions(
                barrier_t0=t0,
                barrier_mu=base.barrier_mu,
                newton_tol=base.newton_tol,
                max_newton=base.max_newton,
                feas_tol=base.feas_tol,
            )
        try:
            x0 = _nudged_inside(program, lift(w))
            result = barrier_solve(program, x0, opts)
        except NotStrictlyFeasible:
            # a binding QoS constraint leaves no interior around the warm
            # start; the current beams stay (they are feasible) and the
            # round sequence ends here
            if trace:
                return BeamSolveResult(
                    w=w, f_qq_trace=trace, rounds=rnd - 1, barrier_steps=steps
                )
            raise
        steps += result.newton_steps
        # the barrier answer is within its duality gap of the subproblem
        # optimum, which can sit below an already near-optimal warm start;
        # keeping the better point makes the ascent property exact
        f_start = program.objective.value(x0)
        if result.objective >= f_start:
            w = unlift(result.x, model.k, model.m)
            f_now = result.objective * scale
        else:
            w = unlift(x0, model.k, model.m)
            f_now = f_start * scale
        trace.append(f_now)
        if f_prev is not None:
            gain = f_now - f_prev
            rel_gain = gain / max(1.0, abs(f_prev))
            if gain < tol * max(1.0, abs(f_prev)):
                return BeamSolveResult(
                    w=w, f_qq_trace=trace, rounds=rnd, barrier_steps=steps
                )
        f_prev = f_now
    return BeamSolveResult(w=w, f_qq_trace=trace, rounds=max_rounds, barrier_steps=steps)


def solve_beams(
    channels: ChannelSet,
    tau_bar: float,
    w_init: np.ndarray,
    params: SystemParams,
    tol: float = 1e-6,
) -> tuple[np.ndarray, list[float]]:
    """Spec-facing NOMA wrapper around solve_beams_model."""
    res = solve_beams_model(build_model(channels, params), tau_bar, w_init, tol=tol)
    return res.w, res.f_qq_trace
