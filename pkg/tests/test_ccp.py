"""Tests for the penalty iteration over linearized subproblems.

Covers the subproblem assembly (variable and row counts, tangent rows
touching at the expansion point), the penalty schedule, the stopping
behavior, and the interval-level contracts: min <= max, feasibility at
convergence, subset independence, determinism, and agreement across
random initializations.
"""

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from lcbands.ccp import (
    CcpConfig,
    SubproblemTemplate,
    build_subproblem,
    default_log_bounds,
    initial_point,
    pointwise_intervals,
    run_ccp_point,
)
from lcbands.design import (
    Block,
    DesignGrid,
    IntervalSystem,
    build_interval_system,
    select_design_points,
)
from lcbands.lpsolve import solve_lp
from lcbands.relax import FeasiblePoint, check_feasible, eval_L, eval_U, eval_V


def toy_grid(x) -> DesignGrid:
    x = np.asarray(x, dtype=float)
    return DesignGrid(n=60, s_n=2, spacing=10, m=x.size, b_max=0, x=x)


def toy_system(m, c, d) -> IntervalSystem:
    i = np.arange(1, m)
    pairs = np.column_stack([i, i + 1])
    block = Block(B=0, n_B=m - 1, pairs=pairs, c_B=c, d_B=d)
    return IntervalSystem(alpha=0.1, B_max=0, t_n=0.5, blocks=(block,))


def gaussian_instance(n, seed, alpha=0.05):
    rng = np.random.Generator(np.random.Philox(key=[seed, 0]))
    grid = select_design_points(rng.normal(size=n))
    return grid, build_interval_system(grid, alpha)


def test_config_validation():
    with pytest.raises(ValueError):
        CcpConfig(tau0=0.0)
    with pytest.raises(ValueError):
        CcpConfig(kappa=1.0)
    with pytest.raises(ValueError):
        CcpConfig(tau0=1.0, tau_max=1.0)
    with pytest.raises(ValueError):
        CcpConfig(k_max=0)
    with pytest.raises(ValueError):
        CcpConfig(init="warm")
    with pytest.raises(ValueError):
        CcpConfig(step_max=0.0)


def test_subproblem_counts_match_design_n100():
    # m=13 design: 13 levels + 11 slopes + 12 slacks = 36 variables and
    # 22 concavity + 12 chord-cap + 24 tangent rows, slacks bounded below
    grid, system = gaussian_instance(100, seed=0)
    assert grid.m == 13
    assert system.pair_count == 12
    point = initial_point(grid, system, CcpConfig())
    lp = build_subproblem(grid, system, point, t=3, sense="min", tau=1.0)
    assert lp.num_vars == 36
    assert lp.num_rows == 22 + 12 + 24
    assert int(lp.nonneg_mask.sum()) == 12
    lo, hi = lp.bound_arrays()
    np.testing.assert_array_equal(lo[24:], np.zeros(12))
    assert np.all(np.isinf(hi[24:]))


def test_slack_count_equals_pair_count():
    grid = toy_grid(np.linspace(0.0, 2.0, 7))
    system = toy_system(7, c=0.05, d=0.5)
    template = SubproblemTemplate(grid, system)
    assert template.nvar - (2 * grid.m - 2) == system.pair_count


def test_objective_encoding():
    grid = toy_grid(np.linspace(0.0, 2.0, 6))
    system = toy_system(6, c=0.05, d=0.5)
    point = FeasiblePoint(ell=np.zeros(6) - 1.0, g=np.zeros(4))
    lo = build_subproblem(grid, system, point, t=2, sense="min", tau=7.5)
    hi = build_subproblem(grid, system, point, t=2, sense="max", tau=7.5)
    base = np.zeros(lo.num_vars)
    base[2 * 6 - 2 :] = 7.5
    want_lo, want_hi = base.copy(), base.copy()
    want_lo[1] = 1.0
    want_hi[1] = -1.0  # max encoded as minimizing the negation
    np.testing.assert_array_equal(lo.objective, want_lo)
    np.testing.assert_array_equal(hi.objective, want_hi)


def test_tangent_rows_touch_at_expansion_point():
    # with zero slacks the Uhat-row residuals equal c_B - sum U_i exactly,
    # the Vhat rows c_B - sum V_i, and the chord rows sum L_i - d_B
    rng = np.random.default_rng(8)
    x = np.sort(rng.uniform(-1.5, 1.5, 6))
    grid = toy_grid(x)
    system = toy_system(6, c=0.07, d=0.6)
    point = FeasiblePoint(
        ell=rng.uniform(-2.0, 0.5, 6), g=rng.uniform(-2.0, 2.0, 4)
    )
    lp = build_subproblem(grid, system, point, t=3, sense="min", tau=1.0)
    z = np.concatenate([point.ell, point.g, np.zeros(system.pair_count)])
    resid = np.asarray(lp.rows @ z).ravel() - lp.rhs
    n_conc, P = 2 * (6 - 2), system.pair_count
    for p in range(P):  # pair p covers the single cell p+1
        u = eval_U(grid, point.ell, point.g, p + 1)
        v = eval_V(grid, point.ell, point.g, p + 1)
        chord = eval_L(grid, point.ell, p + 1)
        assert abs(resid[n_conc + p] - (chord - 0.6)) <= 1e-12
        assert abs(resid[n_conc + P + p] - (0.07 - u)) <= 1e-12
        assert abs(resid[n_conc + 2 * P + p] - (0.07 - v)) <= 1e-12


class _RecordingTemplate(SubproblemTemplate):
    def __init__(self, grid, system):
        super().__init__(grid, system)
        self.taus = []

    def instantiate(self, point, t, sense, tau, **kwargs):
        self.taus.append(tau)
        return super().instantiate(point, t, sense, tau, **kwargs)


def test_penalty_schedule_exact():
    grid, system = gaussian_instance(100, seed=0)
    cfg = CcpConfig()
    template = _RecordingTemplate(grid, system)
    _, diag = run_ccp_point(grid, system, 7, "min", cfg, template=template)
    assert diag.status == "converged"
    assert 1 < diag.iterations <= cfg.k_max  # no settle or retry pass
    assert len(template.taus) == diag.iterations
    want = [min(cfg.tau0 * cfg.kappa**k, cfg.tau_max) for k in range(diag.iterations)]
    assert template.taus == want


def test_monotone_criterion_fixed_tau():
    # textbook fixed-penalty iteration on an instance whose chord caps
    # never bind: the penalized objective is nonincreasing in the min sense
    grid = toy_grid(np.linspace(0.0, 1.0, 6))
    system = toy_system(6, c=0.05, d=50.0)
    template = SubproblemTemplate(grid, system)
    cfg = CcpConfig(init="random", seed=5)
    point = initial_point(grid, system, cfg, t=3, sense="min")
    prev = math.inf
    for _ in range(12):
        lp = template.instantiate(point, 3, "min", tau=25.0)
        sol = solve_lp(lp)
        assert sol.status == "optimal"
        assert sol.objective_value <= prev + 1e-9
        prev = sol.objective_value
        point = FeasiblePoint(ell=sol.z[:6], g=sol.z[6:10])


def test_intervals_ordered_feasible_and_complete():
    grid, system = gaussian_instance(100, seed=3)
    res = pointwise_intervals(grid, system, CcpConfig(seed=3), range(1, 14))
    assert res.indices == tuple(range(1, 14))
    assert res.lo.shape == res.hi.shape == (13,)
    assert np.all(res.lo <= res.hi + 1e-9)
    assert res.all_converged
    for d in res.diagnostics:
        assert d.final_slack <= 1e-6
        assert d.worst_violation <= 1e-5


def test_subset_runs_are_independent():
    grid, system = gaussian_instance(100, seed=1)
    cfg = CcpConfig(seed=1)
    full = pointwise_intervals(grid, system, cfg, range(1, 14))
    odd = pointwise_intervals(grid, system, cfg, range(1, 14, 2))
    shared = [full.indices.index(t) for t in odd.indices]
    np.testing.assert_array_equal(full.lo[shared], odd.lo)
    np.testing.assert_array_equal(full.hi[shared], odd.hi)


def test_subset_validation():
    grid, system = gaussian_instance(100, seed=0)
    with pytest.raises(ValueError):
        pointwise_intervals(grid, system, CcpConfig(), [])
    with pytest.raises(ValueError):
        pointwise_intervals(grid, system, CcpConfig(), [0, 3])
    with pytest.raises(ValueError):
        pointwise_intervals(grid, system, CcpConfig(), [14])


def test_point_validation():
    grid, system = gaussian_instance(100, seed=0)
    with pytest.raises(ValueError):
        run_ccp_point(grid, system, 0, "min", CcpConfig())
    with pytest.raises(ValueError):
        run_ccp_point(grid, system, 14, "min", CcpConfig())
    with pytest.raises(ValueError):
        run_ccp_point(grid, system, 3, "lower", CcpConfig())


def test_endpoint_minimum_is_box_floor():
    # the first and last levels enter no tangent row, so their minimum is
    # the variable box floor and needs no iteration
    grid, system = gaussian_instance(100, seed=2)
    floor = default_log_bounds(grid)[0]
    for t in (1, 13):
        val, diag = run_ccp_point(grid, system, t, "min", CcpConfig(seed=2))
        assert diag.status == "converged"
        assert diag.iterations == 0
        assert val == floor
    val, diag = run_ccp_point(grid, system, 1, "max", CcpConfig(seed=2))
    assert diag.status == "converged"
    assert val > floor + 1.0


def test_initial_point_satisfies_hard_rows():
    grid, system = gaussian_instance(100, seed=4)
    for cfg in (CcpConfig(), CcpConfig(init="random", seed=9)):
        point = initial_point(grid, system, cfg, t=5, sense="max")
        report = check_feasible(grid, system, point)
        assert report.conc <= 1e-9
        assert report.up <= 1e-9


def test_deterministic_across_repeats_and_threads():
    grid, system = gaussian_instance(100, seed=6)
    cfg = CcpConfig(init="random", seed=6)
    jobs = [(t, sense) for t in (2, 5, 9) for sense in ("min", "max")]
    template = SubproblemTemplate(grid, system)

    def solve(job):
        t, sense = job
        return run_ccp_point(grid, system, t, sense, cfg, template=template)[0]

    serial = [solve(job) for job in jobs]
    repeat = [solve(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=4) as pool:
        threaded = list(pool.map(solve, jobs))
    assert serial == repeat
    assert serial == threaded


def test_random_initializations_agree():
    grid, system = gaussian_instance(100, seed=7)
    for t, sense in ((7, "min"), (7, "max")):
        vals = []
        for seed in range(10):
            cfg = CcpConfig(init="random", seed=seed)
            val, diag = run_ccp_point(grid, system, t, sense, cfg)
            assert diag.status == "converged"
            vals.append(val)
        assert max(vals) - min(vals) <= 1e-4


def test_linearized_up_is_conservative():
    # the linearized chord rows enlarge the feasible set, so the default
    # intervals contain the exact-cap intervals up to LP tolerance
    grid, system = gaussian_instance(100, seed=5)
    for t in (4, 8):
        for sense in ("min", "max"):
            relaxed, rd = run_ccp_point(
                grid, system, t, sense, CcpConfig(seed=5)
            )
            exact, ed = run_ccp_point(
                grid, system, t, sense, CcpConfig(seed=5, exact_up=True)
            )
            assert rd.status == ed.status == "converged"
            if sense == "min":
                assert relaxed <= exact + 1e-6
            else:
                assert relaxed >= exact - 1e-6


def test_build_subproblem_matches_template():
    grid, system = gaussian_instance(100, seed=0)
    point = initial_point(grid, system, CcpConfig())
    a = build_subproblem(grid, system, point, t=5, sense="max", tau=3.0)
    b = SubproblemTemplate(grid, system).instantiate(point, 5, "max", 3.0)
    np.testing.assert_array_equal(a.objective, b.objective)
    np.testing.assert_array_equal(a.rhs, b.rhs)
    assert (a.rows != b.rows).nnz == 0
