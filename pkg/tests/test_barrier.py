import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eed2d.barrier import (
    ConvexProgram,
    QuadraticConstraints,
    QuadraticObjective,
    SolverOptions,
    barrier_solve,
    lift,
    unlift,
)
from eed2d.errors import NotStrictlyFeasible


def ball(center, radius, n):
    """||x - c||^2 <= r^2 as x^T I x - 2c^T x + (c^T c - r^2) <= 0."""
    c = np.asarray(center, dtype=float)
    return (np.eye(n), -2.0 * c, float(c @ c - radius**2))


def make_program(objective, rows, n):
    return ConvexProgram(
        objective=objective, constraints=QuadraticConstraints.stack(rows), dimension=n
    )


def test_lift_single_complex_entry():
    w = np.array([[1.0 + 2.0j]])
    assert np.array_equal(lift(w), [1.0, 2.0])


@given(
    st.integers(min_value=1, max_value=4),
    st.integers(min_value=1, max_value=5),
    st.integers(min_value=0, max_value=2**31 - 1),
)
@settings(max_examples=30, deadline=None)
def test_lift_round_trip_and_isometry(k, m, seed):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))
    x = lift(w)
    assert x.shape == (2 * k * m,)
    assert np.array_equal(unlift(x, k, m), w)
    assert np.sum(x**2) == pytest.approx(np.sum(np.abs(w) ** 2), rel=1e-12)


def test_unlift_shape_check():
    with pytest.raises(ValueError):
        unlift(np.zeros(5), 1, 2)


def test_interior_optimum():
    program = make_program(
        QuadraticObjective(-np.eye(2), np.zeros(2)),
        [(np.zeros((2, 2)), np.array([1.0, 0.0]), -1.0)],  # x1 <= 1
        2,
    )
    res = barrier_solve(program, np.array([0.5, 0.0]))
    assert np.linalg.norm(res.x) < 1e-4


def test_boundary_optimum():
    program = make_program(
        QuadraticObjective(np.zeros((2, 2)), np.array([1.0, 0.0])),  # max x1
        [ball([0.0, 0.0], 1.0, 2)],
        2,
    )
    res = barrier_solve(program, np.zeros(2))
    assert np.allclose(res.x, [1.0, 0.0], atol=1e-4)


def test_rejects_infeasible_start():
    program = make_program(
        QuadraticObjective(-np.eye(2), np.zeros(2)),
        [ball([0.0, 0.0], 1.0, 2)],
        2,
    )
    with pytest.raises(NotStrictlyFeasible):
        barrier_solve(program, np.array([2.0, 0.0]))
    with pytest.raises(NotStrictlyFeasible):
        barrier_solve(program, np.array([1.0, 0.0]))  # exactly on the boundary


def _random_program(rng, n, n_cons):
    a = rng.standard_normal((n, n))
    q_obj = -(a @ a.T / n + 0.3 * np.eye(n))
    b_obj = rng.standard_normal(n)
    rows = []
    for _ in range(n_cons):
        center = 0.3 * rng.standard_normal(n)
        radius = rng.uniform(0.8, 2.0) + np.linalg.norm(center)
        rows.append(ball(center, radius, n))
    return make_program(QuadraticObjective(q_obj, b_obj), rows, n)


def _polish_oracle(program, rng, n, samples=40000, rounds=60):
    """Sampling + shrinking local search, independent of the solver."""
    cons = program.constraints
    obj = program.objective

    def feasible(pts):
        vals = np.stack([cons.values(p) for p in pts])
        return pts[np.all(vals < 0, axis=1)]

    pts = feasible(rng.uniform(-3, 3, size=(samples, n)))
    assert len(pts) > 0
    best = max(pts, key=obj.value)
    width = 1.0
    for _ in range(rounds):
        cloud = feasible(best + width * rng.standard_normal((400, n)))
        if len(cloud):
            cand = max(cloud, key=obj.value)
            if obj.value(cand) > obj.value(best):
                best = cand
        width *= 0.85
    return best


@pytest.mark.parametrize("seed,n,n_cons", [(0, 2, 1), (1, 3, 2), (2, 3, 3)])
def test_matches_sampling_oracle(seed, n, n_cons):
    rng = np.random.default_rng(seed)
    program = _random_program(rng, n, n_cons)
    res = barrier_solve(program, np.zeros(n))
    oracle = _polish_oracle(program, rng, n)
    f_solver = program.objective.value(res.x)
    f_oracle = program.objective.value(oracle)
    assert f_solver >= f_oracle - 1e-3 * (1.0 + abs(f_oracle))


def test_iterates_strictly_feasible_and_outer_monotone():
    rng = np.random.default_rng(5)
    program = _random_program(rng, 4, 3)
    res = barrier_solve(
        program, np.zeros(4), SolverOptions(record_iterates=True)
    )
    for x in res.iterates:
        assert np.all(program.constraints.values(x) < 0.0)
    outer = np.asarray(res.outer_objectives)
    assert np.all(np.diff(outer) >= -1e-12)


def test_kkt_residual_at_solution():
    rng = np.random.default_rng(6)
    for seed in range(5):
        rng = np.random.default_rng(seed)
        program = _random_program(rng, 3, 2)
        res = barrier_solve(program, np.zeros(3))
        g_vals = program.constraints.values(res.x)
        g_grads = program.constraints.grads(res.x)
        lam = 1.0 / (-res.t_final * g_vals)
        grad_f = program.objective.grad(res.x)
        residual = grad_f - g_grads.T @ lam
        assert np.linalg.norm(residual) <= 1e-3 * (1.0 + np.linalg.norm(grad_f))


def test_constraint_slack_at_solution():
    rng = np.random.default_rng(7)
    program = _random_program(rng, 3, 2)
    opts = SolverOptions()
    res = barrier_solve(program, np.zeros(3), opts)
    assert np.all(program.constraints.values(res.x) <= opts.feas_tol)


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(barrier_mu=1.0)
    with pytest.raises(ValueError):
        SolverOptions(newton_tol=0.0)
