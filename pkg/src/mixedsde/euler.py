"""Explicit Euler scheme for the mixed equation
dX = a(t, X) dt + b(t, X) dW + c(t, X) dB^H,
its continuous interpolation, and localization by the stopping time tau_N.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientSet
from .fbm import NoisePair, pair_holder_cumulative
from .grid import TimeGrid

__all__ = [
    "SolverConfig",
    "EulerSolution",
    "StoppedSolution",
    "EulerBlowupError",
    "euler_solve",
    "interpolate",
    "stopping_time",
    "stop",
    "write_solution_csv",
]

# abort a path once |X| passes this; user coefficients may violate hypotheses
STATE_CAP = 1e12


class EulerBlowupError(RuntimeError):
    def __init__(self, step: int):
        self.step = step
        super().__init__(f"state became non-finite or exceeded {STATE_CAP:g} at step {step}")


@dataclass(frozen=True)
class SolverConfig:
    """Localization and norm parameters: alpha for the norms, eta for the
    Holder functionals, threshold N for tau_N, epsilon the rate slack."""

    alpha: float
    eta: float = 0.1
    threshold: float = 50.0
    epsilon: float = 0.05

    def __post_init__(self):
        if not (0.0 < self.alpha < 0.5):
            raise ValueError(f"alpha must lie in (0, 1/2), got {self.alpha}")
        if not (0.0 < self.eta < 0.5):
            raise ValueError(f"eta must lie in (0, 1/2), got {self.eta}")
        if not self.threshold > 0.0:
            raise ValueError("localization threshold N must be positive")
        if not self.epsilon > 0.0:
            raise ValueError("rate slack epsilon must be positive")

    def validate(self, h: float, beta: float) -> None:
        """Check the admissible windows against the model's H and beta."""
        kap = min(0.5, beta)
        if not (1.0 - h < self.alpha < kap):
            raise ValueError(
                f"alpha={self.alpha} outside (1-H, kappa) = ({1.0 - h:.3f}, {kap:.3f})"
            )
        if not (self.eta < kap - self.alpha):
            raise ValueError(
                f"eta={self.eta} must be below kappa - alpha = {kap - self.alpha:.3f}"
            )
        if not (self.eta < h):
            raise ValueError(f"eta={self.eta} must be below H={h}")
        if not (self.epsilon < kap - self.alpha):
            raise ValueError(
                f"epsilon={self.epsilon} must be below kappa - alpha = {kap - self.alpha:.3f}"
            )


@dataclass(frozen=True)
class EulerSolution:
    """Node values of X^delta plus everything needed to interpolate.

    noise always refers to the pair on its generation grid; when the solve
    grid is coarser the solver subsamples, so refinements of one solution
    stay coupled to the same driving paths.
    """

    grid: TimeGrid
    values: np.ndarray
    noise: NoisePair
    coeffs: CoefficientSet
    x0: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n + 1,):
            raise ValueError("values must have one entry per node")
        if v[0] != self.x0:
            raise ValueError("values[0] must equal x0")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def _noise_on_grid(noise: NoisePair, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    stride = grid.refinement_stride(noise.grid)
    return noise.w.values[::stride], noise.bh.values[::stride]


def euler_solve(
    coeffs: CoefficientSet, noise: NoisePair, x0: float, grid: TimeGrid | None = None
) -> EulerSolution:
    """Run the explicit recursion on the given grid (default: the noise grid).

    X_{k+1} = X_k + a dt + b dW + c dB^H with coefficients frozen at the
    left node. Deterministic in its inputs; no refinement happens here.
    """
    grid = noise.grid if grid is None else grid
    w, bh = _noise_on_grid(noise, grid)
    t = grid.nodes
    delta = grid.delta
    a, b, c = coeffs.a, coeffs.b, coeffs.c
    x = np.empty(grid.n + 1)
    x[0] = float(x0)
    for k in range(grid.n):
        xk = x[k]
        x[k + 1] = (
            xk
            + a(t[k], xk) * delta
            + b(t[k], xk) * (w[k + 1] - w[k])
            + c(t[k], xk) * (bh[k + 1] - bh[k])
        )
        if not np.isfinite(x[k + 1]) or abs(x[k + 1]) > STATE_CAP:
            raise EulerBlowupError(k + 1)
    return EulerSolution(grid=grid, values=x, noise=noise, coeffs=coeffs, x0=float(x0))


def _euler_solve_batch(
    coeffs: CoefficientSet,
    t: np.ndarray,
    w: np.ndarray,
    bh: np.ndarray,
    x0: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized solve across paths: w, bh are (paths, n+1).

    Returns (values, aborted_step) where aborted_step[p] is the first step
    at which path p blew up, or -1; blown paths hold nan from there on.
    """
    paths, n1 = w.shape
    n = n1 - 1
    delta = t[1] - t[0]
    a, b, c = coeffs.a, coeffs.b, coeffs.c
    x = np.empty((paths, n1))
    x[:, 0] = x0
    aborted = np.full(paths, -1, dtype=np.int64)
    alive = np.ones(paths, dtype=bool)
    for k in range(n):
        xk = x[:, k]
        xn = (
            xk
            + a(t[k], xk) * delta
            + b(t[k], xk) * (w[:, k + 1] - w[:, k])
            + c(t[k], xk) * (bh[:, k + 1] - bh[:, k])
        )
        bad = alive & (~np.isfinite(xn) | (np.abs(xn) > STATE_CAP))
        if np.any(bad):
            aborted[bad] = k + 1
            alive &= ~bad
            xn = np.where(bad, np.nan, xn)
        x[:, k + 1] = np.where(alive | (aborted == k + 1), xn, np.nan)
    return x, aborted


def _interpolate_on_fine(
    coeffs: CoefficientSet,
    coarse_t: np.ndarray,
    coarse_x: np.ndarray,
    fine_t: np.ndarray,
    fine_w: np.ndarray,
    fine_bh: np.ndarray,
    stride: int,
) -> np.ndarray:
    """Continuous interpolation of a coarse solution at all fine nodes.

    Works on (paths, n+1) arrays; at fine nodes that are coarse nodes the
    recursion is reproduced exactly.
    """
    nf = fine_t.size - 1
    base = np.arange(nf + 1) // stride  # coarse floor index of each fine node
    tk = coarse_t[base]
    xk = coarse_x[:, base]
    wk = fine_w[:, base * stride]
    bk = fine_bh[:, base * stride]
    return (
        xk
        + coeffs.a(tk, xk) * (fine_t - tk)
        + coeffs.b(tk, xk) * (fine_w - wk)
        + coeffs.c(tk, xk) * (fine_bh - bk)
    )


def interpolate(sol: EulerSolution, u: float) -> float:
    """Value of the continuously interpolated solution at time u.

    u must be resolvable on the noise grid; between nodes the coefficients
    are frozen at the last solve node and applied to the actual noise
    increments, matching the integral form of the scheme.
    """
    j = sol.noise.grid.node_index(float(u))
    k = int(sol.grid.floor_index(u))
    if k == sol.grid.n:
        return float(sol.values[-1])
    tk = sol.grid.nodes[k]
    xk = float(sol.values[k])
    stride = sol.grid.refinement_stride(sol.noise.grid)
    w = sol.noise.w.values
    bh = sol.noise.bh.values
    return float(
        xk
        + sol.coeffs.a(tk, xk) * (u - tk)
        + sol.coeffs.b(tk, xk) * (w[j] - w[k * stride])
        + sol.coeffs.c(tk, xk) * (bh[j] - bh[k * stride])
    )


def stopping_time(noise: NoisePair, eta: float, threshold: float, kind: str = "sum") -> float:
    """First grid node where the cumulative Holder functional reaches the
    threshold N, else the horizon. kind selects K^W, K^B or their sum."""
    if not threshold > 0.0:
        raise ValueError("threshold must be positive")
    k_cum = pair_holder_cumulative(noise, eta, kind)
    hit = np.nonzero(k_cum >= threshold)[0]
    if hit.size == 0:
        return float(noise.grid.horizon)
    return float(noise.grid.nodes[hit[0]])


@dataclass(frozen=True)
class StoppedSolution:
    """X^{delta,N}: the solution frozen at the last node <= tau."""

    base: EulerSolution
    tau: float
    values: np.ndarray

    @property
    def grid(self) -> TimeGrid:
        return self.base.grid


def stop(sol: EulerSolution, tau: float) -> StoppedSolution:
    if not (0.0 <= tau <= sol.grid.horizon * (1.0 + 1e-12)):
        raise ValueError(f"tau must lie in [0, T], got {tau}")
    k = int(sol.grid.floor_index(min(tau, sol.grid.horizon)))
    frozen = sol.values.copy()
    frozen[k + 1 :] = sol.values[k]
    return StoppedSolution(base=sol, tau=float(tau), values=frozen)


def write_solution_csv(sol: EulerSolution, file) -> None:
    file.write("t,x\n")
    for t, x in zip(sol.grid.nodes, sol.values):
        file.write(f"{t:.17g},{x:.17g}\n")
