"""Uniform time grids and dyadic refinement."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

# Hard cap on grid size; refinement beyond this is a resource error.
MAX_STEPS = 2**24


class GridResourceError(RuntimeError):
    """Requested grid exceeds MAX_STEPS."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition {k*T/n, k=0..n} of [0, T].

    Nodes are always computed as k*T/n so that dyadic refinements contain
    the coarse nodes bit-for-bit: (j*2^m)*T/(n*2^m) rounds to the same
    float as j*T/n.
    """

    horizon: float
    n: int

    def __post_init__(self):
        if not (self.horizon > 0.0 and np.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ValueError(f"step count must be a positive integer, got {self.n}")
        if self.n > MAX_STEPS:
            raise GridResourceError(f"n={self.n} exceeds MAX_STEPS={MAX_STEPS}")

    @property
    def delta(self) -> float:
        return self.horizon / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = np.arange(self.n + 1, dtype=float) * self.horizon / self.n
        nodes.setflags(write=False)
        return nodes

    def floor_index(self, u: float | np.ndarray) -> int | np.ndarray:
        """Index of t^delta_u = max{node <= u}; u must lie in [0, T]."""
        u = np.asarray(u, dtype=float)
        if np.any(u < 0.0) or np.any(u > self.horizon * (1.0 + 1e-12)):
            raise ValueError("query time outside [0, T]")
        idx = np.minimum((u / self.delta).astype(np.int64), self.n)
        # guard against float rounding placing u just below its own node
        idx = np.where(self.nodes[np.minimum(idx + 1, self.n)] <= u, idx + 1, idx)
        idx = np.minimum(idx, self.n)
        return idx if idx.ndim else int(idx)

    def node_index(self, u: float) -> int:
        """Exact node index of u, or raise if u is not resolvable on this grid."""
        j = int(round(u / self.delta))
        if j < 0 or j > self.n or abs(self.nodes[min(j, self.n)] - u) > 1e-9 * max(1.0, self.horizon):
            raise ValueError(f"time {u!r} is not a node of this grid (n={self.n}, T={self.horizon})")
        return j

    def refine(self, m: int) -> "TimeGrid":
        return refine_dyadic(self, m)

    def refinement_stride(self, fine: "TimeGrid") -> int:
        """Stride such that self.nodes == fine.nodes[::stride]; error if not nested."""
        if fine.horizon != self.horizon or fine.n % self.n != 0:
            raise ValueError("grids are not nested")
        return fine.n // self.n


def refine_dyadic(grid: TimeGrid, m: int) -> TimeGrid:
    """Fine grid {j*T/(n*2^m)}; contains the coarse nodes exactly."""
    if not (isinstance(m, (int, np.integer)) and m >= 1):
        raise ValueError(f"refinement exponent m must be a positive integer, got {m}")
    fine_n = grid.n * (1 << int(m))
    if fine_n > MAX_STEPS:
        raise GridResourceError(f"refined grid n={fine_n} exceeds MAX_STEPS={MAX_STEPS}")
    return TimeGrid(grid.horizon, fine_n)
