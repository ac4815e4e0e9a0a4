"""Design grid and calibrated interval system.

A sample of size n fixes a thinned grid of order statistics

    x_i = X_(1 + (i-1) * 2^{s_n}),   i = 1..m,

with s_n = ceil(log2(ln n)) and m = floor((n-1) / 2^{s_n}) + 1.  Pairs of
design points at dyadic separations carry two-sided beta-quantile bounds on
the probability mass between them: for depth B the pairs

    (j, k) = (1 + (i-1) 2^B, 1 + i 2^B),   i = 1..n_B,

span r = 2^{B + s_n} sample gaps, and F(x_k) - F(x_j) is distributed
Beta(r, n + 1 - r) under the true F.  Splitting an overall budget alpha as
alpha / (2 (B+2) n_B t_n) per pair tail, with t_n the normalizing sum of
1/(B+2), gives simultaneous coverage at least 1 - alpha for the whole system
by the union bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .specfun import BetaParams, qbeta

__all__ = [
    "DesignGrid",
    "Block",
    "IntervalSystem",
    "TooFewSamples",
    "DuplicateDesignPoint",
    "InvalidAlpha",
    "select_design_points",
    "build_interval_system",
]


class TooFewSamples(ValueError):
    """Sample too small to support even one interval depth."""


class DuplicateDesignPoint(ValueError):
    """Tied order statistics landed on two design positions."""


class InvalidAlpha(ValueError):
    """Coverage level outside (0, 1)."""


@dataclass(frozen=True)
class DesignGrid:
    """Thinned order-statistic grid underlying all bounds.

    x holds the m design points in strictly increasing order; spacing is
    2^{s_n}, the number of sample gaps between adjacent design points.
    """

    n: int
    s_n: int
    spacing: int
    m: int
    b_max: int
    x: np.ndarray


@dataclass(frozen=True)
class Block:
    """All design-point pairs at one dyadic depth with their mass bounds."""

    B: int
    n_B: int
    pairs: np.ndarray  # (n_B, 2) int, 1-based design indices (j, k)
    c_B: float
    d_B: float


@dataclass(frozen=True)
class IntervalSystem:
    alpha: float
    B_max: int
    t_n: float
    blocks: tuple[Block, ...]

    @property
    def pair_count(self) -> int:
        return sum(b.n_B for b in self.blocks)

    def iter_pairs(self) -> Iterator[tuple[Block, int, int]]:
        """Yield (block, j, k) over all pairs in depth order."""
        for block in self.blocks:
            for j, k in block.pairs:
                yield block, int(j), int(k)


def _depth_cap(n: int, s_n: int) -> int:
    return math.floor(math.log2(n / 8.0)) - s_n


def select_design_points(samples: np.ndarray) -> DesignGrid:
    """Sort the sample and pick every 2^{s_n}-th order statistic.

    Raises TooFewSamples when no dyadic depth fits (n below ~32), and
    DuplicateDesignPoint when ties collapse two design positions.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1:
        raise ValueError(f"samples must be one-dimensional, got shape {samples.shape}")
    if not np.isfinite(samples).all():
        raise ValueError("samples must be finite")
    n = samples.size
    if n < 3:
        raise TooFewSamples(f"n={n} is too small for any design grid")
    s_n = math.ceil(math.log2(math.log(n)))
    b_max = _depth_cap(n, s_n)
    if b_max < 0:
        raise TooFewSamples(
            f"n={n} gives spacing 2^{s_n} and no valid interval depth"
        )
    spacing = 2 ** s_n
    m = (n - 1) // spacing + 1
    x = np.sort(samples)[:: spacing][:m].copy()
    if not (np.diff(x) > 0).all():
        raise DuplicateDesignPoint(
            "tied order statistics on design positions; jitter the sample"
        )
    return DesignGrid(n=n, s_n=s_n, spacing=spacing, m=m, b_max=b_max, x=x)


def build_interval_system(grid: DesignGrid, alpha: float) -> IntervalSystem:
    """Beta-quantile mass bounds for every dyadic pair depth.

    Each pair (j, k) at depth B receives bounds c_B < d_B, the
    alpha/(2 (B+2) n_B t_n) and complementary quantiles of
    Beta(2^{B+s_n}, n + 1 - 2^{B+s_n}).
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0 or not math.isfinite(alpha):
        raise InvalidAlpha(f"alpha={alpha!r} outside (0, 1)")
    n, s_n, b_max = grid.n, grid.s_n, grid.b_max
    t_n = sum(1.0 / (B + 2.0) for B in range(b_max + 1))
    blocks = []
    for B in range(b_max + 1):
        step = 2 ** B
        n_B = (n - 1) // (2 ** (B + s_n))
        i = np.arange(1, n_B + 1)
        pairs = np.column_stack([1 + (i - 1) * step, 1 + i * step])
        assert pairs[-1, 1] <= grid.m
        r = float(2 ** (B + s_n))
        params = BetaParams(r, n + 1.0 - r)
        tail = alpha / (2.0 * (B + 2.0) * n_B * t_n)
        c_b = qbeta(tail, params)
        d_b = qbeta(1.0 - tail, params)
        if not 0.0 < c_b < d_b < 1.0:
            raise ArithmeticError(
                f"degenerate mass bounds at depth {B}: c={c_b}, d={d_b}"
            )
        blocks.append(Block(B=B, n_B=n_B, pairs=pairs, c_B=c_b, d_B=d_b))
    return IntervalSystem(alpha=alpha, B_max=b_max, t_n=t_n, blocks=tuple(blocks))
