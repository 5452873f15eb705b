"""Generic log-barrier maximizer for smooth concave programs.

maximize f(x)  s.t.  g_i(x) <= 0,  with every g_i a convex quadratic
g_i(x) = x^T Q_i x + b_i^T x + c_i.  The objective is any concave
callable exposing value/grad/hess (and optionally a domain indicator for
compositions that are only defined on an open set).

Classic path-following: maximize t*f(x) + sum_i log(-g_i(x)) with damped
Newton, multiply t by mu, stop once m/t < feas_tol.  Every accepted
iterate is strictly feasible; the line search rejects candidates outside
the domain or on the boundary before testing the Armijo condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._kernels import barrier_hessian, quad_grads, quad_vals_grads, quad_values
from .errors import LineSearchStall, NotStrictlyFeasible

_ARMIJO = 0.1
_BACKTRACK = 0.5
_MIN_STEP = 1e-14
_BOUNDARY_FRACTION = 0.99


@dataclass(frozen=True)
class SolverOptions:
    barrier_t0: float = 1.0
    barrier_mu: float = 10.0
    newton_tol: float = 1e-8
    max_newton: int = 50
    feas_tol: float = 1e-8
    record_iterates: bool = False

    def __post_init__(self) -> None:
        if self.barrier_mu <= 1:
            raise ValueError("barrier_mu must exceed 1")
        if min(self.barrier_t0, self.newton_tol, self.feas_tol) <= 0:
            raise ValueError("tolerances and t0 must be positive")


class Objective:
    """Interface expected from barrier_solve objectives (maximized)."""

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def in_domain(self, x: np.ndarray) -> bool:
        return True

    def max_step(self, x: np.ndarray, direction: np.ndarray) -> float:
        """Largest step along direction keeping x + s*d inside the domain."""
        return np.inf


class QuadraticObjective(Objective):
    """f(x) = x^T Q x + b^T x + c with Q negative semidefinite."""

    def __init__(self, q: np.ndarray, b: np.ndarray, c: float = 0.0):
        self.q = np.asarray(q, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.c = float(c)

    def value(self, x: np.ndarray) -> float:
        return float(x @ self.q @ x + self.b @ x + self.c)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * (self.q @ x) + self.b

    def hess(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * self.q


@dataclass(frozen=True)
class QuadraticConstraints:
    """Batch of m convex quadratics g_i(x) = x^T Q_i x + b_i^T x + c_i."""

    q: np.ndarray  # (m, n, n), each symmetric PSD
    b: np.ndarray  # (m, n)
    c: np.ndarray  # (m,)

    @property
    def m(self) -> int:
        return self.c.shape[0]

    def values(self, x: np.ndarray) -> np.ndarray:
        return quad_values(self.q, self.b, self.c, x)

    def grads(self, x: np.ndarray) -> np.ndarray:
        return quad_grads(self.q, self.b, x)

    def values_and_grads(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return quad_vals_grads(self.q, self.b, self.c, x)

    @classmethod
    def stack(cls, rows: list[tuple[np.ndarray, np.ndarray, float]]) -> "QuadraticConstraints":
        q = np.ascontiguousarray(np.stack([r[0] for r in rows]))
        b = np.ascontiguousarray(np.stack([r[1] for r in rows]))
        c = np.asarray([r[2] for r in rows], dtype=float)
        return cls(q=q, b=b, c=c)


@dataclass(frozen=True)
class ConvexProgram:
    objective: Objective
    constraints: QuadraticConstraints
    dimension: int


@dataclass
class BarrierResult:
    x: np.ndarray
    objective: float
    outer_objectives: list[float]
    newton_steps: int
    t_final: float
    iterates: list[np.ndarray] = field(default_factory=list)


def lift(w: np.ndarray) -> np.ndarray:
    """Pack K complex M-vectors into 2MK reals: [Re user-major | Im user-major]."""
    return np.concatenate([w.real.ravel(), w.imag.ravel()])


def unlift(x: np.ndarray, k: int, m: int) -> np.ndarray:
    if x.shape != (2 * k * m,):
        raise ValueError(f"expected length {2 * k * m}, got {x.shape}")
    re = x[: k * m].reshape(k, m)
    im = x[k * m :].reshape(k, m)
    return re + 1j * im


def _strictly_feasible(program: ConvexProgram, x: np.ndarray) -> bool:
    if not program.objective.in_domain(x):
        return False
    return bool(np.all(program.constraints.values(x) < 0.0))


def _feasible_step_bound(
    cons: QuadraticConstraints,
    g_vals: np.ndarray,
    g_grads: np.ndarray,
    direction: np.ndarray,
) -> float:
    """Largest s with g_i(x + s*d) < 0 for all i, computed in closed form.

    Along a ray each quadratic is a_i s^2 + b_i s + c_i with c_i = g_i(x) < 0
    and a_i >= 0, so the boundary hit is its smallest positive root.
    """
    a = quad_values(cons.q, np.zeros_like(g_grads), np.zeros_like(g_vals), direction)
    b = g_grads @ direction
    bound = np.inf
    for ai, bi, ci in zip(a, b, g_vals):
        if ai > 1e-300:
            disc = bi * bi - 4.0 * ai * ci
            root = (-bi + math.sqrt(disc)) / (2.0 * ai)
            bound = min(bound, root)
        elif bi > 0.0:
            bound = min(bound, -ci / bi)
    return bound


def _psi(program: ConvexProgram, x: np.ndarray, t: float, g_vals: np.ndarray) -> float:
    return t * program.objective.value(x) + float(np.sum(np.log(-g_vals)))


def _newton_direction(hess_psi: np.ndarray, grad_psi: np.ndarray) -> np.ndarray:
    """Solve (-hess) d = grad with escalating regularization on failure.

    The system is solved in a Jacobi-scaled basis: the barrier terms make
    the raw Hessian condition number explode near active constraints, and
    equilibrating the diagonal recovers several digits in the direction.
    """
    a = -hess_psi
    d = np.sqrt(np.abs(np.diag(a)))
    d[d == 0.0] = 1.0
    inv_d = 1.0 / d
    a_s = a * np.outer(inv_d, inv_d)
    g_s = grad_psi * inv_d
    reg = 0.0
    for _ in range(6):
        try:
            cf = scipy.linalg.cho_factor(
                a_s if reg == 0.0 else a_s + reg * np.eye(a_s.shape[0]),
                check_finite=False,
            )
            return scipy.linalg.cho_solve(cf, g_s, check_finite=False) * inv_d
        except scipy.linalg.LinAlgError:
            reg = 1e-10 if reg == 0.0 else reg * 1e2
    raise LineSearchStall("Newton system not positive definite even with regularization")


def barrier_solve(
    program: ConvexProgram, x0: np.ndarray, opts: SolverOptions | None = None
) -> BarrierResult:
    """Maximize the program objective from a strictly feasible start.

    Raises NotStrictlyFeasible when some g_i(x0) >= 0 (or x0 is outside the
    objective's domain) and LineSearchStall when backtracking underflows,
    which signals ill-conditioning; retrying with a smaller barrier_mu is
    the usual fix.
    """
    opts = opts or SolverOptions()
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (program.dimension,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({program.dimension},)")
    if not _strictly_feasible(program, x):
        raise NotStrictlyFeasible("barrier start must satisfy g_i(x0) < 0")

    obj = program.objective
    cons = program.constraints
    m = cons.m
    t = opts.barrier_t0
    outer_objectives: list[float] = []
    iterates: list[np.ndarray] = []
    steps = 0

    eps = float(np.finfo(float).eps)
    unresolved = 0.0
    while True:
        for _ in range(opts.max_newton):
            g_vals, g_grads = cons.values_and_grads(x)
            inv_g = 1.0 / g_vals  # negative entries
            grad_psi = t * obj.grad(x) + g_grads.T @ inv_g
            hess_psi = t * obj.hess(x) + barrier_hessian(
                cons.q, g_grads, inv_g, -(inv_g**2)
            )
            direction = _newton_direction(hess_psi, grad_psi)
            decrement_sq = float(grad_psi @ direction)
            # psi increments below its floating-point resolution cannot be
            # resolved; stop centering once the decrement drops under it
            psi_x = _psi(program, x, t, g_vals)
            noise_floor = 256.0 * eps * abs(psi_x)
            tol_here = max(opts.newton_tol, noise_floor)
            if decrement_sq / 2.0 <= tol_here:
                unresolved = 0.0
                break

            s_bound = min(
                _feasible_step_bound(cons, g_vals, g_grads, direction),
                obj.max_step(x, direction),
            )
            step = min(1.0, _BOUNDARY_FRACTION * s_bound)
            stalled = step < _MIN_STEP
            while not stalled:
                cand = x + step * direction
                if obj.in_domain(cand):
                    cand_vals = cons.values(cand)
                    if np.all(cand_vals < 0.0) and _psi(
                        program, cand, t, cand_vals
                    ) >= psi_x + _ARMIJO * step * decrement_sq:
                        break
                step *= _BACKTRACK
                if step < _MIN_STEP:
                    stalled = True
                    break
            if stalled:
                # the Newton direction cannot be resolved beyond this point
                # (conditioning times machine epsilon): this stage is as
                # centered as float64 allows, so move to the next one
                unresolved = decrement_sq / (2.0 * tol_here)
                break
            steps += 1
            x = cand
            if opts.record_iterates:
                iterates.append(x.copy())

        outer_objectives.append(obj.value(x))
        if m / t < opts.feas_tol:
            break
        t *= opts.barrier_mu

    if steps == 0 and unresolved > 1e6:
        # never moved despite a direction predicting real progress
        raise LineSearchStall("line search cannot advance from the given start")

    return BarrierResult(
        x=x,
        objective=outer_objectives[-1],
        outer_objectives=outer_objectives,
        newton_steps=steps,
        t_final=t,
        iterates=iterates,
    )
