"""Embedded linear-programming solver.

Solves   min c @ z   subject to   rows @ z <= rhs   and per-variable bounds,
where bounds default to z_j >= 0 when nonneg_mask[j] is set and free
otherwise; explicit lower/upper vectors override the mask.

The algorithm is a bounded-variable two-phase revised simplex.  Slack
variables turn the rows into equalities; rows whose slack would start
negative receive artificial variables that phase 1 drives to zero.  The
basis inverse is never formed: a sparse LU factorization (SuperLU) is
refactorized every few dozen pivots and product-form eta updates cover the
pivots in between.  Pricing is full Dantzig with a switch to Bland's rule
after a run of degenerate pivots, which guarantees termination.

Solutions carry the basis so a caller solving a drifting sequence of
structurally identical programs can warm-start.  A warm basis whose basic
point violates the new bounds is repaired in place: the violated bounds are
relaxed to the current values and a short phase-1 run with unit costs on
the offending variables pushes them back inside, after which phase 2
proceeds as usual.  Only an irreparable basis falls back to a cold start.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

__all__ = [
    "LinearProgram",
    "LpSolution",
    "BasisState",
    "solve_lp",
    "dump_lp",
]

_DUAL_TOL = 1e-9       # reduced-cost threshold for entering candidates
_PIVOT_TOL = 1e-9      # minimum pivot magnitude in the ratio test
_FEAS_TOL = 1e-8       # bound/row violation accepted as feasible
_PHASE1_TOL = 1e-7     # residual infeasibility treated as infeasible
_DEGEN_STEP = 1e-12    # step below this counts toward the stall counter
_STALL_LIMIT = 50      # consecutive degenerate pivots before Bland's rule
_REFACTOR_EVERY = 60   # pivots between LU refactorizations
_REPAIR_ROUNDS = 4     # warm-start bound-repair passes before cold fallback

_AT_LOWER, _AT_UPPER, _FREE = 0, 1, 2


@dataclass(frozen=True)
class LinearProgram:
    """Inequality-form program: minimize objective @ z with rows @ z <= rhs.

    nonneg_mask marks variables bounded below by zero; others are free.
    Optional lower/upper arrays (entries may be +-inf) override the mask.
    """

    objective: np.ndarray
    rows: object            # (r, n) ndarray or scipy.sparse matrix
    rhs: np.ndarray
    nonneg_mask: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "objective", np.asarray(self.objective, dtype=float))
        object.__setattr__(self, "rhs", np.asarray(self.rhs, dtype=float))
        object.__setattr__(self, "nonneg_mask", np.asarray(self.nonneg_mask, dtype=bool))
        n = self.objective.size
        r = self.rhs.size
        rows = self.rows
        if not sparse.issparse(rows):
            rows = np.asarray(rows, dtype=float)
            if rows.size == 0:
                rows = rows.reshape(r, n)
            object.__setattr__(self, "rows", rows)
        if self.rows.shape != (r, n):
            raise ValueError(f"rows shape {self.rows.shape}, expected ({r}, {n})")
        if self.nonneg_mask.shape != (n,):
            raise ValueError("nonneg_mask length mismatch")
        if not np.isfinite(self.objective).all() or not np.isfinite(self.rhs).all():
            raise ValueError("objective and rhs must be finite")
        data = self.rows.data if sparse.issparse(self.rows) else self.rows
        if not np.isfinite(data).all():
            raise ValueError("row coefficients must be finite")
        for name, arr in (("lower", self.lower), ("upper", self.upper)):
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if arr.shape != (n,):
                    raise ValueError(f"{name} bound length mismatch")
                if np.isnan(arr).any():
                    raise ValueError(f"{name} bounds must not be NaN")
                object.__setattr__(self, name, arr)

    @property
    def num_vars(self) -> int:
        return self.objective.size

    @property
    def num_rows(self) -> int:
        return self.rhs.size

    def bound_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.num_vars
        lo = np.where(self.nonneg_mask, 0.0, -np.inf)
        up = np.full(n, np.inf)
        if self.lower is not None:
            lo = self.lower.copy()
        if self.upper is not None:
            up = self.upper.copy()
        if (lo > up).any():
            raise ValueError("lower bound exceeds upper bound")
        return lo, up


@dataclass(frozen=True)
class BasisState:
    """Opaque warm-start token: basis columns and nonbasic bound sides."""

    basis: np.ndarray
    nb_state: np.ndarray
    num_vars: int
    num_rows: int


@dataclass(frozen=True)
class LpSolution:
    status: str  # optimal | infeasible | unbounded | iteration_limit
    z: np.ndarray | None
    objective_value: float | None
    dual: np.ndarray | None
    iterations: int
    basis: BasisState | None
    message: str = ""


def dump_lp(lp: LinearProgram) -> str:
    """Plain-text rendering for debugging and golden tests."""

    def fmt(vec):
        return " ".join(f"{v:.12g}" for v in vec)

    rows = lp.rows.toarray() if sparse.issparse(lp.rows) else lp.rows
    lines = [f"c: {fmt(lp.objective)}"]
    for row, b in zip(rows, lp.rhs):
        lines.append(f"r: {fmt(row)} <= {b:.12g}")
    lines.append("n: " + " ".join("1" if v else "0" for v in lp.nonneg_mask))
    if lp.lower is not None:
        lines.append(f"l: {fmt(lp.lower)}")
    if lp.upper is not None:
        lines.append(f"u: {fmt(lp.upper)}")
    return "\n".join(lines) + "\n"


class _Simplex:
    """One solve's worth of state for the bounded-variable revised simplex."""

    def __init__(self, lp: LinearProgram, safe: bool = False):
        self.lp = lp
        n, r = lp.num_vars, lp.num_rows
        self.n, self.r = n, r
        # safe mode: exact ratio-test ties and an early switch to Bland's
        # rule; used to retry a solve whose final point failed the audit
        self.harris_delta = 0.0 if safe else 1e-10
        self.stall_limit = 20 if safe else _STALL_LIMIT
        a = lp.rows if sparse.issparse(lp.rows) else sparse.csc_matrix(lp.rows)
        lo, up = lp.bound_arrays()

        # columns: structural | slack identity | artificial slots (-identity,
        # activated per negative-residual row during phase 1)
        eye = sparse.identity(r, format="csc")
        self.cols = sparse.hstack([a.tocsc(), eye, -eye], format="csc")
        self.ncols = n + 2 * r
        self.lower = np.concatenate([lo, np.zeros(r), np.zeros(r)])
        self.upper = np.concatenate([up, np.full(r, np.inf), np.zeros(r)])
        self.cost = np.zeros(self.ncols)
        self.cost[:n] = lp.objective
        self.b = lp.rhs

        self.basis = np.empty(r, dtype=np.int64)
        self.nb_state = np.full(self.ncols, _AT_LOWER, dtype=np.int8)
        self.in_basis = np.zeros(self.ncols, dtype=bool)
        self.x_basic = np.zeros(r)

        self.lu = None
        self.etas: list[tuple[int, np.ndarray]] = []
        self.iterations = 0
        self.degenerate_run = 0
        self.max_iter = 50 * (r + n)

    # -- factorization ---------------------------------------------------

    def _refactor(self) -> bool:
        try:
            self.lu = splu(self.cols[:, self.basis].tocsc())
        except RuntimeError:
            return False
        self.etas = []
        return True

    def _ftran(self, v: np.ndarray) -> np.ndarray:
        x = self.lu.solve(v)
        for rpos, d in self.etas:
            alpha = x[rpos] / d[rpos]
            if alpha != 0.0:
                x = x - alpha * d
            x[rpos] = alpha
        return x

    def _btran(self, v: np.ndarray) -> np.ndarray:
        y = v.copy()
        for rpos, d in reversed(self.etas):
            beta = (d @ y - y[rpos]) / d[rpos]
            y[rpos] -= beta
        return self.lu.solve(y, trans="T")

    def _nonbasic_values(self) -> np.ndarray:
        v = np.where(self.nb_state == _AT_UPPER, self.upper, self.lower)
        v[self.nb_state == _FREE] = 0.0
        v[~np.isfinite(v)] = 0.0
        v[self.in_basis] = 0.0
        return v

    def _recompute_basics(self) -> None:
        xn = self._nonbasic_values()
        residual = self.b - self.cols @ xn
        self.x_basic = self._ftran(residual)

    # -- setup -----------------------------------------------------------

    def start_cold(self) -> None:
        n, r = self.n, self.r
        self.nb_state[:] = _AT_LOWER
        free = ~np.isfinite(self.lower) & ~np.isfinite(self.upper)
        self.nb_state[free] = _FREE
        at_upper = ~np.isfinite(self.lower) & np.isfinite(self.upper)
        self.nb_state[at_upper] = _AT_UPPER

        xn = np.where(self.nb_state[:n] == _AT_UPPER, self.upper[:n], self.lower[:n])
        xn[self.nb_state[:n] == _FREE] = 0.0
        xn[~np.isfinite(xn)] = 0.0
        residual = self.b - self.cols[:, :n] @ xn

        self.in_basis[:] = False
        self.artificial_rows = residual < 0
        for row in range(r):
            col = n + r + row if self.artificial_rows[row] else n + row
            self.basis[row] = col
            self.in_basis[col] = True
        # artificial columns are -e_row, so their basic value is -residual
        self.x_basic = np.where(self.artificial_rows, -residual, residual)
        # unused artificials stay fixed at zero; used ones are free to leave
        self.upper[n + r :] = 0.0
        self.upper[n + r + np.flatnonzero(self.artificial_rows)] = np.inf
        self._refactor()

    def try_warm(self, state: BasisState) -> bool:
        if not self._load_warm(state):
            return False
        return self._repair_warm()

    def _load_warm(self, state: BasisState) -> bool:
        n, r = self.n, self.r
        if state.num_vars != n or state.num_rows != r:
            return False
        basis = np.asarray(state.basis, dtype=np.int64)
        if basis.size != r or (basis < 0).any() or (basis >= n + r).any():
            return False
        if np.unique(basis).size != r:
            return False
        self.basis = basis.copy()
        self.in_basis[:] = False
        self.in_basis[self.basis] = True
        self.nb_state = state.nb_state.copy()
        # a variable can sit at a bound only if that bound is finite
        nb = ~self.in_basis
        bad_lo = nb & (self.nb_state == _AT_LOWER) & ~np.isfinite(self.lower)
        bad_up = nb & (self.nb_state == _AT_UPPER) & ~np.isfinite(self.upper)
        self.nb_state[bad_lo | bad_up] = _FREE
        self.upper[n + r :] = 0.0
        if not self._refactor():
            return False
        self._recompute_basics()
        return True

    def _full_point(self) -> np.ndarray:
        x = self._nonbasic_values()
        x[self.basis] = self.x_basic
        return x

    def _repair_warm(self) -> bool:
        """Restore primal feasibility of a loaded warm basis.

        Changed bounds or row data can leave the reloaded basic point a
        little outside its bounds.  Each round confines every violated
        variable to the interval between its current value and the bound it
        violates (so the point is feasible for the modified program and the
        variable cannot overshoot or run off along a ray), then minimizes
        the total excursion with unit costs on the offenders.  At the
        optimum each offender sits on its original bound, so restoring the
        bounds moves nothing.
        """
        lo0 = self.lower.copy()
        up0 = self.upper.copy()
        best = np.inf
        for _ in range(_REPAIR_ROUNDS):
            x = self._full_point()
            over = x - up0
            under = lo0 - x
            total = float(np.maximum(over, 0.0).sum() + np.maximum(under, 0.0).sum())
            if total <= _FEAS_TOL:
                break
            if total >= best:
                self._restore_bounds(lo0, up0)
                return False
            best = total
            cost1 = np.zeros(self.ncols)
            bad_up = over > _FEAS_TOL
            bad_lo = under > _FEAS_TOL
            self._restore_bounds(lo0, up0)
            self.upper[bad_up] = x[bad_up]
            self.lower[bad_up] = up0[bad_up]
            cost1[bad_up] = 1.0
            self.lower[bad_lo] = x[bad_lo]
            self.upper[bad_lo] = lo0[bad_lo]
            cost1[bad_lo] = -1.0
            status = self.run_phase(cost1)
            if status != "optimal":
                self._restore_bounds(lo0, up0)
                return False
            self._refactor()
            self._recompute_basics()
        else:
            x = self._full_point()
            total = float(
                np.maximum(x - up0, 0.0).sum() + np.maximum(lo0 - x, 0.0).sum()
            )
            if total > _FEAS_TOL:
                self._restore_bounds(lo0, up0)
                return False
        self._restore_bounds(lo0, up0)
        self._recompute_basics()
        lo_b = self.lower[self.basis]
        up_b = self.upper[self.basis]
        ok = (self.x_basic >= lo_b - 1e-7) & (self.x_basic <= up_b + 1e-7)
        return bool(ok.all())

    def _restore_bounds(self, lo0: np.ndarray, up0: np.ndarray) -> None:
        """Put original bounds back and relabel nonbasic variables.

        A variable that left the basis while its bounds were modified is
        parked at a modified-bound value; its lower/upper label may point
        at the other original bound.  Matching parked values against the
        original bounds keeps every nonbasic value unchanged by the
        restore (offenders parked strictly outside both bounds stay
        mislabeled, but every such path returns False and discards the
        basis anyway).
        """
        x = self._full_point()
        self.lower[:] = lo0
        self.upper[:] = up0
        nb = ~self.in_basis
        at_lo = nb & np.isfinite(lo0) & (x == lo0)
        at_up = nb & np.isfinite(up0) & (x == up0)
        self.nb_state[at_lo] = _AT_LOWER
        self.nb_state[at_up] = _AT_UPPER

    # -- pivoting --------------------------------------------------------

    def _reduced_costs(self, cost: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = self._btran(cost[self.basis])
        rc = cost - self.cols.T @ y
        return rc, y

    def _choose_entering(self, rc: np.ndarray, bland: bool) -> tuple[int, float] | None:
        movable = ~self.in_basis & (self.upper - self.lower > _PIVOT_TOL)
        state = self.nb_state
        can_up = movable & (rc < -_DUAL_TOL) & (
            (state == _AT_LOWER) | (state == _FREE)
        )
        can_dn = movable & (rc > _DUAL_TOL) & (
            (state == _AT_UPPER) | (state == _FREE)
        )
        any_candidates = can_up | can_dn
        if not any_candidates.any():
            return None
        if bland:
            j = int(np.flatnonzero(any_candidates)[0])
            return j, 1.0 if can_up[j] else -1.0
        score = np.where(any_candidates, np.abs(rc), -1.0)
        j = int(np.argmax(score))
        return j, 1.0 if can_up[j] else -1.0

    def _ratio_test(
        self, q: int, sigma: float, d: np.ndarray, bland: bool
    ) -> tuple[float, int | None]:
        """Return (step, leaving row) with leaving None for a bound flip or
        unbounded step.

        Two-pass Harris test: pass one computes the largest step that keeps
        every basic variable within harris_delta of its bound (a tolerance
        in primal units, so large direction entries cannot amplify it);
        pass two picks the best-conditioned pivot among rows whose exact
        ratio fits under that allowance.
        """
        lo_b = self.lower[self.basis]
        up_b = self.upper[self.basis]
        sd = sigma * d
        theta = np.full(self.r, np.inf)
        allow = np.full(self.r, np.inf)
        dec = sd > _PIVOT_TOL
        gap_d = np.maximum(self.x_basic[dec] - lo_b[dec], 0.0)
        theta[dec] = gap_d / sd[dec]
        allow[dec] = (gap_d + self.harris_delta) / sd[dec]
        inc = sd < -_PIVOT_TOL
        gap_i = np.maximum(up_b[inc] - self.x_basic[inc], 0.0)
        theta[inc] = gap_i / (-sd[inc])
        allow[inc] = (gap_i + self.harris_delta) / (-sd[inc])
        theta = np.where(np.isnan(theta), np.inf, theta)
        allow = np.where(np.isnan(allow), np.inf, allow)

        best = theta.min(initial=np.inf)
        flip = self.upper[q] - self.lower[q]
        if flip <= best:
            return flip, None
        if not np.isfinite(best):
            return np.inf, None
        cand = theta <= allow.min(initial=np.inf)
        if bland:
            rows = np.flatnonzero(cand)
            r_leave = int(rows[np.argmin(self.basis[rows])])
        else:
            r_leave = int(np.argmax(np.where(cand, np.abs(d), -1.0)))
        return float(theta[r_leave]), r_leave

    def _apply_pivot(
        self, q: int, sigma: float, theta: float, r_leave: int | None, d: np.ndarray
    ) -> None:
        if r_leave is None:
            # entering variable runs to its other bound
            if theta > 0.0:
                self.x_basic = self.x_basic - sigma * theta * d
            self.nb_state[q] = _AT_UPPER if sigma > 0 else _AT_LOWER
            return
        leaving = int(self.basis[r_leave])
        enter_from = self._entry_value(q)
        self.x_basic = self.x_basic - sigma * theta * d
        self.x_basic[r_leave] = enter_from + sigma * theta
        leave_down = sigma * d[r_leave] > 0
        self.nb_state[leaving] = _AT_LOWER if leave_down else _AT_UPPER
        if not np.isfinite(self.lower[leaving]) and not np.isfinite(self.upper[leaving]):
            self.nb_state[leaving] = _FREE
        self.in_basis[leaving] = False
        self.in_basis[q] = True
        self.basis[r_leave] = q
        self.etas.append((r_leave, d))

    def _entry_value(self, q: int) -> float:
        if self.nb_state[q] == _AT_UPPER:
            return float(self.upper[q])
        if self.nb_state[q] == _FREE:
            return 0.0
        v = self.lower[q]
        return float(v) if np.isfinite(v) else 0.0

    def run_phase(self, cost: np.ndarray) -> str:
        bland = False
        while True:
            if self.iterations >= self.max_iter:
                return "iteration_limit"
            if len(self.etas) >= _REFACTOR_EVERY:
                if not self._refactor():
                    return "numerical"
                self._recompute_basics()
            rc, _ = self._reduced_costs(cost)
            choice = self._choose_entering(rc, bland)
            if choice is None:
                return "optimal"
            q, sigma = choice
            d = self._ftran(np.asarray(self.cols[:, q].todense()).ravel())
            theta, r_leave = self._ratio_test(q, sigma, d, bland)
            if not np.isfinite(theta):
                return "unbounded"
            self._apply_pivot(q, sigma, theta, r_leave, d)
            self.iterations += 1
            if theta <= _DEGEN_STEP:
                self.degenerate_run += 1
                if self.degenerate_run >= self.stall_limit:
                    bland = True
            else:
                self.degenerate_run = 0
                bland = False

    # -- phases ----------------------------------------------------------

    def phase1(self) -> str:
        n, r = self.n, self.r
        cost1 = np.zeros(self.ncols)
        cost1[n + r :] = 1.0
        status = self.run_phase(cost1)
        if status != "optimal":
            return status
        infeas = float(self.x_basic[self.basis >= n + r].sum())
        if infeas > _PHASE1_TOL:
            return "infeasible"
        self._evict_artificials()
        return "optimal"

    def _evict_artificials(self) -> None:
        n, r = self.n, self.r
        for rpos in range(r):
            if self.basis[rpos] < n + r:
                continue
            # degenerate pivot: swap the zero-valued artificial for any
            # nonbasic real column with a usable pivot element
            ei = np.zeros(r)
            ei[rpos] = 1.0
            wr = self._btran(ei)
            alpha = self.cols.T @ wr
            candidates = ~self.in_basis & (np.abs(alpha) > 1e-7)
            candidates[n + r :] = False
            idx = np.flatnonzero(candidates)
            if idx.size == 0:
                continue  # redundant row; artificial stays pinned at zero
            q = int(idx[0])
            d = self._ftran(np.asarray(self.cols[:, q].todense()).ravel())
            art = int(self.basis[rpos])
            self.in_basis[art] = False
            self.nb_state[art] = _AT_LOWER
            self.in_basis[q] = True
            self.basis[rpos] = q
            self.x_basic[rpos] = self._entry_value(q)
            self.etas.append((rpos, d))
        # pin all artificials for phase 2
        self.upper[n + r :] = 0.0

    def solve(self, warm: BasisState | None) -> LpSolution:
        warm_ok = False
        if warm is not None:
            try:
                warm_ok = self.try_warm(warm)
            except (ValueError, IndexError):
                warm_ok = False
        if not warm_ok:
            self.start_cold()
            status = self.phase1()
            if status != "optimal":
                return self._finish(status)
            self._refactor()
            self._recompute_basics()
        status = self.run_phase(self.cost)
        if status == "numerical":
            return self._finish("iteration_limit", "basis factorization failed")
        return self._finish(status)

    def _finish(self, status: str, message: str = "") -> LpSolution:
        n, r = self.n, self.r
        if status != "optimal":
            return LpSolution(
                status=status, z=None, objective_value=None, dual=None,
                iterations=self.iterations, basis=None, message=message,
            )
        self._refactor()
        self._recompute_basics()
        x = self._nonbasic_values()
        x[self.basis] = self.x_basic
        z = x[:n]
        rows = self.lp.rows
        row_resid = (rows @ z) - self.lp.rhs
        lo, up = self.lp.bound_arrays()
        scale = max(1.0, float(np.abs(self.lp.rhs).max(initial=0.0)))
        if (
            row_resid.max(initial=-np.inf) > _FEAS_TOL * scale
            or (z - up).max(initial=-np.inf) > _FEAS_TOL
            or (lo - z).max(initial=-np.inf) > _FEAS_TOL
        ):
            return LpSolution(
                status="iteration_limit", z=None, objective_value=None, dual=None,
                iterations=self.iterations, basis=None,
                message="final point failed the feasibility audit",
            )
        y = self._btran(self.cost[self.basis])
        state = BasisState(
            basis=self.basis.copy(),
            nb_state=self.nb_state.copy(),
            num_vars=n,
            num_rows=r,
        )
        # clamp slack-basis artifacts: any basis column >= n+r would have
        # survived only on a redundant row and carries value 0
        return LpSolution(
            status="optimal",
            z=z,
            objective_value=float(self.lp.objective @ z),
            dual=y,
            iterations=self.iterations,
            basis=state,
        )


def solve_lp(lp: LinearProgram, warm: BasisState | None = None) -> LpSolution:
    """Solve the program, optionally warm-starting from a previous basis.

    The returned basis (when optimal) can seed the next solve of a
    structurally identical program; an unusable warm basis falls back to a
    cold two-phase start.
    """
    if lp.num_rows == 0:
        raise ValueError("program must have at least one row")
    sol = _Simplex(lp).solve(warm)
    if sol.status == "iteration_limit" and "audit" in sol.message:
        sol = _Simplex(lp, safe=True).solve(None)
    return sol
