"""Convex bounds on cell masses of a log-concave density.

A candidate log-density is represented by its values ell_1..ell_m at the
design points and supporting slopes g_2..g_{m-1} at the interior ones
(indices are 1-based throughout, matching the design grid).  Concavity plus
the supporting-slope property give closed-form bounds on the mass of each
cell (x_i, x_{i+1}), with dx_i = x_{i+1} - x_i and E = exp_mean:

    chord lower bound   L_i = dx_i exp(ell_i) E(ell_{i+1} - ell_i)

    tangent upper bounds, anchored at an interior design point whose slope
    exists; the tangent line at the anchor dominates the log-density:

        U_i = exp(ell_{i+1}) dx_i E(-g_{i+1} dx_i)   for i <= m-2
        U_{m-1} = exp(ell_{m-1}) dx_{m-1} E(g_{m-1} dx_{m-1})

        V_i = exp(ell_i) dx_i E(g_i dx_i)            for i >= 2
        V_1 = exp(ell_2) dx_1 E(-g_2 dx_1)

All three bounds are jointly convex in (ell, g) because s -> log E(s) is
convex, so first-order linearizations are global minorants; that is what
the convex-concave procedure exploits.

The feasibility test combines three constraint families against a
calibrated interval system: concavity of ell with supporting slopes (CONC),
pair masses bounded below through U and through V (DOWN1, DOWN2), and pair
masses bounded above through L (UP).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import DesignGrid, IntervalSystem
from .specfun import (
    log_exp_mean_arr,
    log_exp_mean_deriv_arr,
    log_exp_mean_gap_arr,
)

__all__ = [
    "FeasiblePoint",
    "AffineFunction",
    "ConstraintReport",
    "CellLinearization",
    "ell_index",
    "g_index",
    "num_vars",
    "eval_L",
    "eval_U",
    "eval_V",
    "grad_L",
    "grad_U",
    "grad_V",
    "linearize_L",
    "linearize_U",
    "linearize_V",
    "linearize_cells",
    "check_feasible",
]


def ell_index(i: int, m: int) -> int:
    """Global variable index of ell_i (i in 1..m)."""
    if not 1 <= i <= m:
        raise ValueError(f"ell index {i} outside 1..{m}")
    return i - 1


def g_index(i: int, m: int) -> int:
    """Global variable index of g_i (i in 2..m-1)."""
    if not 2 <= i <= m - 1:
        raise ValueError(f"g index {i} outside 2..{m - 1}")
    return m + i - 2


def num_vars(m: int) -> int:
    """Length of the global (ell, g) variable vector."""
    return 2 * m - 2


@dataclass(frozen=True)
class FeasiblePoint:
    """Candidate log-density values and interior supporting slopes."""

    ell: np.ndarray  # (m,)
    g: np.ndarray    # (m-2,), slopes at design points 2..m-1

    def __post_init__(self) -> None:
        object.__setattr__(self, "ell", np.asarray(self.ell, dtype=float))
        object.__setattr__(self, "g", np.asarray(self.g, dtype=float))
        if self.ell.ndim != 1 or self.g.ndim != 1:
            raise ValueError("ell and g must be one-dimensional")
        if self.g.size != self.ell.size - 2:
            raise ValueError(
                f"expected {self.ell.size - 2} slopes for {self.ell.size} levels, "
                f"got {self.g.size}"
            )
        if not (np.isfinite(self.ell).all() and np.isfinite(self.g).all()):
            raise ValueError("ell and g must be finite")

    @property
    def m(self) -> int:
        return self.ell.size

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.ell, self.g])

    def slope(self, i: int) -> float:
        """g_i for 1-based interior index i."""
        return float(self.g[i - 2])


@dataclass(frozen=True)
class AffineFunction:
    """const + sum(coeffs[idx] * z[idx]) over the global variable ordering."""

    const: float
    coeffs: dict[int, float]

    def value(self, point: FeasiblePoint) -> float:
        z = point.as_vector()
        return self.const + sum(c * z[i] for i, c in self.coeffs.items())

    def as_dense(self, nvar: int) -> np.ndarray:
        out = np.zeros(nvar)
        for i, c in self.coeffs.items():
            out[i] = c
        return out


def _check_point(grid: DesignGrid, ell: np.ndarray, g: np.ndarray | None) -> None:
    if grid.m < 3:
        raise ValueError("grid must have at least 3 design points")
    if ell.shape != (grid.m,):
        raise ValueError(f"ell has shape {ell.shape}, expected ({grid.m},)")
    if g is not None and g.shape != (grid.m - 2,):
        raise ValueError(f"g has shape {g.shape}, expected ({grid.m - 2},)")


def _check_cell(grid: DesignGrid, i: int) -> None:
    if not 1 <= i <= grid.m - 1:
        raise ValueError(f"cell index {i} outside 1..{grid.m - 1}")


def _u_anchor_sign(i: int, m: int) -> tuple[int, float]:
    """Anchor design point and slope sign for the right-tangent bound U_i."""
    return (i + 1, -1.0) if i <= m - 2 else (m - 1, 1.0)


def _v_anchor_sign(i: int, m: int) -> tuple[int, float]:
    """Anchor design point and slope sign for the left-tangent bound V_i."""
    return (i, 1.0) if i >= 2 else (2, -1.0)


def eval_L(grid: DesignGrid, ell: np.ndarray, i: int) -> float:
    """Chord lower bound on the mass of cell i."""
    ell = np.asarray(ell, dtype=float)
    _check_point(grid, ell, None)
    _check_cell(grid, i)
    dx = grid.x[i] - grid.x[i - 1]
    s = np.asarray(ell[i] - ell[i - 1])
    return float(dx * np.exp(ell[i - 1] + log_exp_mean_arr(s)))


def _tangent_value(grid, ell, g, i, anchor, sign):
    # computed as dx * exp(ell_a + log E(...)) so huge slopes degrade to
    # inf or 0 instead of NaN
    dx = grid.x[i] - grid.x[i - 1]
    ga = g[anchor - 2]
    s = np.asarray(sign * ga * dx)
    return float(dx * np.exp(ell[anchor - 1] + log_exp_mean_arr(s)))


def eval_U(grid: DesignGrid, ell: np.ndarray, g: np.ndarray, i: int) -> float:
    """Tangent upper bound on cell i anchored at its right interior point."""
    ell = np.asarray(ell, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_point(grid, ell, g)
    _check_cell(grid, i)
    anchor, sign = _u_anchor_sign(i, grid.m)
    return _tangent_value(grid, ell, g, i, anchor, sign)


def eval_V(grid: DesignGrid, ell: np.ndarray, g: np.ndarray, i: int) -> float:
    """Tangent upper bound on cell i anchored at its left interior point."""
    ell = np.asarray(ell, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_point(grid, ell, g)
    _check_cell(grid, i)
    anchor, sign = _v_anchor_sign(i, grid.m)
    return _tangent_value(grid, ell, g, i, anchor, sign)


def grad_L(grid: DesignGrid, ell: np.ndarray, i: int) -> dict[int, float]:
    """Gradient of eval_L over the global ordering (two nonzero entries)."""
    ell = np.asarray(ell, dtype=float)
    _check_point(grid, ell, None)
    _check_cell(grid, i)
    m = grid.m
    dx = grid.x[i] - grid.x[i - 1]
    s = np.asarray(ell[i] - ell[i - 1])
    base = ell[i - 1] + np.log(dx)
    return {
        ell_index(i, m): float(np.exp(base + log_exp_mean_gap_arr(s))),
        ell_index(i + 1, m): float(np.exp(base + log_exp_mean_deriv_arr(s))),
    }


def _tangent_grad(grid, ell, g, i, anchor, sign):
    m = grid.m
    dx = grid.x[i] - grid.x[i - 1]
    ga = g[anchor - 2]
    s = np.asarray(sign * ga * dx)
    value = dx * np.exp(ell[anchor - 1] + log_exp_mean_arr(s))
    dval_dg = sign * dx * dx * np.exp(ell[anchor - 1] + log_exp_mean_deriv_arr(s))
    return {ell_index(anchor, m): float(value), g_index(anchor, m): float(dval_dg)}


def grad_U(grid: DesignGrid, ell: np.ndarray, g: np.ndarray, i: int) -> dict[int, float]:
    """Gradient of eval_U; the ell-partial equals the bound itself."""
    ell = np.asarray(ell, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_point(grid, ell, g)
    _check_cell(grid, i)
    anchor, sign = _u_anchor_sign(i, grid.m)
    return _tangent_grad(grid, ell, g, i, anchor, sign)


def grad_V(grid: DesignGrid, ell: np.ndarray, g: np.ndarray, i: int) -> dict[int, float]:
    """Gradient of eval_V; the ell-partial equals the bound itself."""
    ell = np.asarray(ell, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_point(grid, ell, g)
    _check_cell(grid, i)
    anchor, sign = _v_anchor_sign(i, grid.m)
    return _tangent_grad(grid, ell, g, i, anchor, sign)


def _linearize(value: float, grad: dict[int, float], z0: np.ndarray) -> AffineFunction:
    const = value - sum(c * z0[idx] for idx, c in grad.items())
    return AffineFunction(const=float(const), coeffs=grad)


def linearize_L(grid: DesignGrid, point: FeasiblePoint, i: int) -> AffineFunction:
    """First-order expansion of eval_L at point; a global minorant by convexity."""
    value = eval_L(grid, point.ell, i)
    grad = grad_L(grid, point.ell, i)
    return _linearize(value, grad, point.as_vector())


def linearize_U(grid: DesignGrid, point: FeasiblePoint, i: int) -> AffineFunction:
    """First-order expansion of eval_U at point; a global minorant by convexity."""
    value = eval_U(grid, point.ell, point.g, i)
    grad = grad_U(grid, point.ell, point.g, i)
    return _linearize(value, grad, point.as_vector())


def linearize_V(grid: DesignGrid, point: FeasiblePoint, i: int) -> AffineFunction:
    """First-order expansion of eval_V at point; a global minorant by convexity."""
    value = eval_V(grid, point.ell, point.g, i)
    grad = grad_V(grid, point.ell, point.g, i)
    return _linearize(value, grad, point.as_vector())


@dataclass(frozen=True)
class CellLinearization:
    """Vectorized values and gradient pieces for all m-1 cells at one point.

    Anchor arrays hold 1-based design indices.  For the tangent bounds the
    ell-partial equals the value, so only the g-partial is stored separately.
    For the chord bound the two ell-partials are stored per cell.
    """

    u_val: np.ndarray
    u_dg: np.ndarray
    u_anchor: np.ndarray
    v_val: np.ndarray
    v_dg: np.ndarray
    v_anchor: np.ndarray
    l_val: np.ndarray
    l_dlo: np.ndarray   # partial wrt ell_i
    l_dhi: np.ndarray   # partial wrt ell_{i+1}


def _anchor_arrays(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    i = np.arange(1, m)
    u_anchor = np.where(i <= m - 2, i + 1, m - 1)
    u_sign = np.where(i <= m - 2, -1.0, 1.0)
    v_anchor = np.where(i >= 2, i, 2)
    v_sign = np.where(i >= 2, 1.0, -1.0)
    return u_anchor, u_sign, v_anchor, v_sign


def linearize_cells(grid: DesignGrid, point: FeasiblePoint) -> CellLinearization:
    """All cell bounds and gradient pieces at once (vectorized).

    Values overflow to inf (never NaN) for astronomically steep candidates,
    which keeps violation comparisons meaningful.
    """
    _check_point(grid, point.ell, point.g)
    m = grid.m
    ell, g = point.ell, point.g
    dx = np.diff(grid.x)
    u_anchor, u_sign, v_anchor, v_sign = _anchor_arrays(m)

    with np.errstate(over="ignore"):
        su = u_sign * g[u_anchor - 2] * dx
        base_u = ell[u_anchor - 1] + np.log(dx)
        u_val = np.exp(base_u + log_exp_mean_arr(su))
        u_dg = u_sign * dx * np.exp(base_u + log_exp_mean_deriv_arr(su))

        sv = v_sign * g[v_anchor - 2] * dx
        base_v = ell[v_anchor - 1] + np.log(dx)
        v_val = np.exp(base_v + log_exp_mean_arr(sv))
        v_dg = v_sign * dx * np.exp(base_v + log_exp_mean_deriv_arr(sv))

        s = np.diff(ell)
        base_l = ell[:-1] + np.log(dx)
        l_val = np.exp(base_l + log_exp_mean_arr(s))
        l_dlo = np.exp(base_l + log_exp_mean_gap_arr(s))
        l_dhi = np.exp(base_l + log_exp_mean_deriv_arr(s))

    return CellLinearization(
        u_val=u_val, u_dg=u_dg, u_anchor=u_anchor,
        v_val=v_val, v_dg=v_dg, v_anchor=v_anchor,
        l_val=l_val, l_dlo=l_dlo, l_dhi=l_dhi,
    )


@dataclass(frozen=True)
class ConstraintReport:
    """Worst positive violation per constraint family (0 when satisfied)."""

    conc: float
    up: float
    down1: float
    down2: float
    eps: float

    @property
    def worst(self) -> float:
        return max(self.conc, self.up, self.down1, self.down2)

    @property
    def feasible(self) -> bool:
        return self.worst <= self.eps


def _pair_sums(values: np.ndarray, system: IntervalSystem) -> list[np.ndarray]:
    """Sum of per-cell values over each pair's cells, per block."""
    if np.isinf(values).any():
        # prefix differences across an inf cell would give inf - inf
        return [
            np.array(
                [values[j - 1 : k - 1].sum() for j, k in block.pairs], dtype=float
            )
            for block in system.blocks
        ]
    prefix = np.concatenate([[0.0], np.cumsum(values)])
    return [
        prefix[block.pairs[:, 1] - 1] - prefix[block.pairs[:, 0] - 1]
        for block in system.blocks
    ]


def check_feasible(
    grid: DesignGrid,
    system: IntervalSystem,
    point: FeasiblePoint,
    eps: float = 1e-7,
) -> ConstraintReport:
    """Test all constraint families at once.

    CONC:  ell_j <= ell_i + g_i (x_j - x_i) for interior i, j = i +/- 1
    DOWN1: c_B <= sum of U over the pair's cells
    DOWN2: c_B <= sum of V over the pair's cells
    UP:    sum of L over the pair's cells <= d_B
    """
    _check_point(grid, point.ell, point.g)
    cells = linearize_cells(grid, point)
    x, ell, g = grid.x, point.ell, point.g

    left = ell[:-2] - ell[1:-1] - g * (x[:-2] - x[1:-1])
    right = ell[2:] - ell[1:-1] - g * (x[2:] - x[1:-1])
    conc = max(0.0, float(left.max()), float(right.max()))

    up = down1 = down2 = 0.0
    u_sums = _pair_sums(cells.u_val, system)
    v_sums = _pair_sums(cells.v_val, system)
    l_sums = _pair_sums(cells.l_val, system)
    for block, us, vs, ls in zip(system.blocks, u_sums, v_sums, l_sums):
        down1 = max(down1, float((block.c_B - us).max()))
        down2 = max(down2, float((block.c_B - vs).max()))
        up = max(up, float((ls - block.d_B).max()))
    return ConstraintReport(
        conc=conc, up=max(0.0, up), down1=max(0.0, down1), down2=max(0.0, down2),
        eps=eps,
    )
