"""Tests for the embedded simplex solver.

The random battery compares against brute-force vertex enumeration on
instances constructed to be feasible and bounded; status classification is
checked on hand-built programs.
"""

import numpy as np
import pytest
from scipy import sparse

from lcbands.lpsolve import BasisState, LinearProgram, LpSolution, dump_lp, solve_lp
from lp_oracle import brute_force_min


def simple_lp(objective, rows, rhs, nonneg=None, lower=None, upper=None):
    objective = np.asarray(objective, dtype=float)
    n = objective.size
    if nonneg is None:
        nonneg = np.ones(n, dtype=bool)
    return LinearProgram(
        objective=objective,
        rows=np.asarray(rows, dtype=float).reshape(-1, n),
        rhs=np.asarray(rhs, dtype=float),
        nonneg_mask=np.asarray(nonneg, dtype=bool),
        lower=lower,
        upper=upper,
    )


def test_one_var_nonneg():
    sol = solve_lp(simple_lp([1.0], [[-1.0]], [-1.0]))
    assert sol.status == "optimal"
    assert abs(sol.z[0] - 1.0) <= 1e-9
    assert abs(sol.objective_value - 1.0) <= 1e-9


def test_one_var_free():
    sol = solve_lp(simple_lp([1.0], [[-1.0]], [-1.0], nonneg=[False]))
    assert sol.status == "optimal"
    assert abs(sol.z[0] - 1.0) <= 1e-9


def test_infeasible_pair_of_rows():
    # x <= -1 and -x <= -1 cannot both hold
    sol = solve_lp(simple_lp([0.0], [[1.0], [-1.0]], [-1.0, -1.0], nonneg=[False]))
    assert sol.status == "infeasible"
    assert sol.z is None


def test_unbounded():
    sol = solve_lp(simple_lp([-1.0], [[-1.0]], [0.0]))
    assert sol.status == "unbounded"


def test_two_var_simplex_face():
    sol = solve_lp(simple_lp([-1.0, -1.0], [[1.0, 1.0]], [1.0]))
    assert sol.status == "optimal"
    assert abs(sol.objective_value + 1.0) <= 1e-9
    assert abs(sol.z.sum() - 1.0) <= 1e-9


def test_equality_via_row_pair():
    lp = simple_lp(
        [2.0, 3.0],
        [[1.0, 1.0], [-1.0, -1.0], [1.0, 0.0]],
        [1.0, -1.0, 0.7],
    )
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    assert abs(sol.z.sum() - 1.0) <= 1e-9
    # cheap variable loaded to its cap: 2(0.7) + 3(0.3)
    assert abs(sol.objective_value - 2.3) <= 1e-9


def test_upper_bounds_and_negative_lower():
    lp = simple_lp(
        [-1.0, 1.0],
        [[1.0, 1.0]],
        [10.0],
        nonneg=[False, False],
        lower=np.array([-1.0, -2.5]),
        upper=np.array([2.5, np.inf]),
    )
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    assert abs(sol.z[0] - 2.5) <= 1e-9
    assert abs(sol.z[1] + 2.5) <= 1e-9


def test_fixed_variable():
    lp = simple_lp(
        [1.0, 1.0],
        [[-1.0, -1.0]],
        [-2.0],
        lower=np.array([0.7, 0.0]),
        upper=np.array([0.7, np.inf]),
    )
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    assert abs(sol.z[0] - 0.7) <= 1e-9
    assert abs(sol.z[1] - 1.3) <= 1e-9


def _random_bounded_lp(rng, n=6, extra_rows=5):
    # z >= 0 plus a simplex cap keeps the feasible set bounded; rhs chosen
    # so an interior point exists
    a = rng.normal(size=(extra_rows, n))
    z0 = rng.uniform(0.2, 1.0, n)
    b = a @ z0 + rng.uniform(0.1, 1.0, extra_rows)
    cap = np.ones((1, n))
    bcap = np.array([z0.sum() + rng.uniform(1.0, 3.0)])
    c = rng.normal(size=n)
    return simple_lp(c, np.vstack([a, cap]), np.concatenate([b, bcap]))


def test_random_battery_matches_vertex_enumeration():
    rng = np.random.default_rng(42)
    for trial in range(40):
        lp = _random_bounded_lp(rng)
        sol = solve_lp(lp)
        assert sol.status == "optimal", f"trial {trial}: {sol.status}"
        ref = brute_force_min(lp)
        assert abs(sol.objective_value - ref) <= 1e-6, f"trial {trial}"


def test_duality_certificate():
    rng = np.random.default_rng(43)
    for _ in range(20):
        lp = _random_bounded_lp(rng)
        sol = solve_lp(lp)
        assert sol.status == "optimal"
        y = sol.dual
        rows = np.asarray(lp.rows, dtype=float)
        # multipliers of <= rows in a minimization are nonpositive
        assert (y <= 1e-9).all()
        resid = rows @ sol.z - lp.rhs
        assert np.abs(y * resid).max() <= 1e-6  # complementary slackness
        rc = lp.objective - rows.T @ y
        assert (rc >= -1e-8).all()  # dual feasibility for z >= 0
        assert np.abs(rc * sol.z).max() <= 1e-6
        # objective reproduced through the certificate
        assert abs(sol.objective_value - (y @ lp.rhs + rc @ sol.z)) <= 1e-6


def test_warm_start_agrees_with_cold():
    rng = np.random.default_rng(44)
    lp = _random_bounded_lp(rng, n=8, extra_rows=7)
    cold = solve_lp(lp)
    assert cold.status == "optimal"
    # drift the rhs and objective slightly, as successive CCP iterations do
    lp2 = LinearProgram(
        objective=lp.objective + 1e-3 * rng.normal(size=8),
        rows=lp.rows,
        rhs=lp.rhs + 1e-3 * rng.normal(size=lp.rhs.size),
        nonneg_mask=lp.nonneg_mask,
    )
    warm = solve_lp(lp2, warm=cold.basis)
    cold2 = solve_lp(lp2)
    assert warm.status == cold2.status == "optimal"
    assert abs(warm.objective_value - cold2.objective_value) <= 1e-8
    assert warm.iterations <= cold2.iterations + 2


def test_warm_start_shape_mismatch_falls_back():
    rng = np.random.default_rng(45)
    lp_small = _random_bounded_lp(rng, n=4, extra_rows=3)
    lp_big = _random_bounded_lp(rng, n=6, extra_rows=5)
    cold = solve_lp(lp_small)
    sol = solve_lp(lp_big, warm=cold.basis)
    assert sol.status == "optimal"
    assert abs(sol.objective_value - brute_force_min(lp_big)) <= 1e-6


def test_determinism():
    rng = np.random.default_rng(46)
    lp = _random_bounded_lp(rng, n=7, extra_rows=6)
    a = solve_lp(lp)
    b = solve_lp(lp)
    np.testing.assert_array_equal(a.z, b.z)
    assert a.iterations == b.iterations
    assert a.objective_value == b.objective_value


def test_row_scaling_invariance():
    rng = np.random.default_rng(47)
    lp = _random_bounded_lp(rng)
    scale = 1000.0
    lp_scaled = LinearProgram(
        objective=lp.objective,
        rows=np.asarray(lp.rows) * scale,
        rhs=lp.rhs * scale,
        nonneg_mask=lp.nonneg_mask,
    )
    a, b = solve_lp(lp), solve_lp(lp_scaled)
    assert a.status == b.status == "optimal"
    assert abs(a.objective_value - b.objective_value) <= 1e-6


def test_degenerate_overdetermined_vertex_terminates():
    # many redundant rows through the same optimal vertex
    n = 5
    rows = [np.ones(n)]
    rhs = [1.0]
    for i in range(n):
        for j in range(i + 1, n):
            r = np.zeros(n)
            r[i] = r[j] = 1.0
            rows.append(r)
            rhs.append(1.0)
    lp = simple_lp(-np.ones(n), np.array(rows), np.array(rhs))
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    assert abs(sol.objective_value + 1.0) <= 1e-8


def test_sparse_rows_accepted():
    rows = sparse.csr_matrix(np.array([[1.0, 1.0], [-1.0, 0.0]]))
    lp = LinearProgram(
        objective=np.array([-1.0, -2.0]),
        rows=rows,
        rhs=np.array([1.0, 0.0]),
        nonneg_mask=np.array([True, True]),
    )
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    assert abs(sol.objective_value + 2.0) <= 1e-9


def test_redundant_equality_rows_phase1():
    # duplicated equality pair leaves a redundant row in phase 1
    lp = simple_lp(
        [1.0, 1.0],
        [[1.0, 1.0], [-1.0, -1.0], [1.0, 1.0], [-1.0, -1.0]],
        [1.0, -1.0, 1.0, -1.0],
    )
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    assert abs(sol.objective_value - 1.0) <= 1e-9


def test_dump_lp_golden():
    lp = simple_lp(
        [1.0, -2.5],
        [[1.0, 1.0], [0.5, 0.0]],
        [3.0, 1.25],
        nonneg=[True, False],
    )
    expected = (
        "c: 1 -2.5\n"
        "r: 1 1 <= 3\n"
        "r: 0.5 0 <= 1.25\n"
        "n: 1 0\n"
    )
    assert dump_lp(lp) == expected


def test_validation_errors():
    with pytest.raises(ValueError):
        simple_lp([1.0, np.nan], [[1.0, 1.0]], [1.0])
    with pytest.raises(ValueError):
        simple_lp([1.0], [[1.0, 2.0]], [1.0])
    with pytest.raises(ValueError):
        LinearProgram(
            objective=np.array([1.0]),
            rows=np.array([[1.0]]),
            rhs=np.array([1.0]),
            nonneg_mask=np.array([True, False]),
        )
    with pytest.raises(ValueError):
        solve_lp(
            LinearProgram(
                objective=np.array([1.0]),
                rows=np.empty((0, 1)),
                rhs=np.empty(0),
                nonneg_mask=np.array([True]),
            )
        )
    lp = simple_lp(
        [1.0], [[1.0]], [1.0], lower=np.array([2.0]), upper=np.array([1.0])
    )
    with pytest.raises(ValueError):
        solve_lp(lp)
