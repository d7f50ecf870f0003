"""Riemann-Liouville fractional derivatives, the pathwise Young integral,
and the weighted Holder-type norms, all by product integration.

Functions are represented by samples on a uniform grid with piecewise
linear interpolation. Singular kernels are never evaluated at their
singularity: on every cell the kernel is integrated analytically against
the linear interpolant.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import TimeGrid

__all__ = [
    "SampledFunction",
    "left_derivative",
    "right_derivative",
    "young_integral",
    "norm_inf_alpha",
    "norm_2_alpha",
    "integral_bound",
    "norms_comparison_constant",
]


@dataclass(frozen=True)
class SampledFunction:
    """Samples of a continuous function on a uniform grid, PL in between."""

    t: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if t.ndim != 1 or t.shape != y.shape or t.size < 2:
            raise ValueError("need matching 1-d node and value arrays with >= 2 nodes")
        steps = np.diff(t)
        if np.any(steps <= 0.0):
            raise ValueError("nodes must be strictly increasing")
        if np.max(np.abs(steps - steps[0])) > 1e-9 * steps[0]:
            raise ValueError("nodes must be uniformly spaced")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
            raise ValueError("non-finite samples")
        t.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_callable(cls, fn, a: float, b: float, n: int) -> "SampledFunction":
        t = a + (b - a) * np.arange(n + 1) / n
        return cls(t, np.asarray(fn(t), dtype=float) * np.ones(n + 1))

    @classmethod
    def from_grid(cls, grid: TimeGrid, values) -> "SampledFunction":
        return cls(grid.nodes, values)

    @property
    def a(self) -> float:
        return float(self.t[0])

    @property
    def b(self) -> float:
        return float(self.t[-1])

    @property
    def delta(self) -> float:
        return float(self.t[1] - self.t[0])

    def __call__(self, u):
        return np.interp(u, self.t, self.y)

    def restrict(self, a: float, b: float) -> "SampledFunction":
        i = _node_of(self.t, a)
        j = _node_of(self.t, b)
        if j - i < 1:
            raise ValueError("restriction interval contains fewer than two nodes")
        return SampledFunction(self.t[i : j + 1], self.y[i : j + 1])


def _node_of(t: np.ndarray, u: float) -> int:
    delta = t[1] - t[0]
    j = int(round((u - t[0]) / delta))
    if j < 0 or j >= t.size or abs(t[j] - u) > 1e-9 * max(1.0, abs(t[-1] - t[0])):
        raise ValueError(f"{u!r} is not a grid node")
    return j


def _validate_order(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"fractional order must lie in (0, 1), got {alpha}")
    return alpha


# ---------------------------------------------------------------------------
# product-integration cell weights
#
# On the cell v in [(m-1)d, md] the integrand (f(x) - f(x - v)) v^(-1-s) is
# integrated with f piecewise linear. The value at the node pair (i-m+1, i-m)
# enters through the Toeplitz weights A(m), B(m) below:
#   contribution = A(m) (f_i - f_{i-m+1}) + B(m) (f_i - f_{i-m}).


@lru_cache(maxsize=64)
def _cell_weights(n: int, delta: float, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    m = np.arange(0, n + 1, dtype=float)
    scale = delta**-sigma
    with np.errstate(divide="ignore"):
        i0 = (m[:-1] ** -sigma - m[1:] ** -sigma) / sigma
    i0[0] = 0.0  # m = 1 cell never uses i0; its left node value cancels exactly
    j_m = (m[1:] ** (1.0 - sigma) - m[:-1] ** (1.0 - sigma)) / (1.0 - sigma) - m[:-1] * i0
    a_w = np.zeros(n + 1)
    b_w = np.zeros(n + 1)
    b_w[1:] = scale * j_m
    a_w[2:] = scale * (i0[1:] - j_m[1:])
    b_w[1] = scale / (1.0 - sigma)  # m = 1 cell: integrand is s_k * v exactly
    a_w.setflags(write=False)
    b_w.setflags(write=False)
    return a_w, b_w


def _conv_full(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Full linear convolution via real FFT."""
    n = x.size + w.size - 1
    nfft = 1 << (n - 1).bit_length()
    return np.fft.irfft(np.fft.rfft(x, nfft) * np.fft.rfft(w, nfft), nfft)[:n]


def _left_deriv_nodes(values: np.ndarray, delta: float, sigma: float) -> np.ndarray:
    """(D^sigma_{a+} f) at all grid nodes; entry 0 is nan (undefined at a)."""
    f = np.asarray(values, dtype=float)
    n = f.size - 1
    a_w, b_w = _cell_weights(n, float(delta), float(sigma))
    csum = np.cumsum(a_w + b_w)
    conv_a = _conv_full(f[1:], a_w[1:])[:n]
    conv_b = _conv_full(f[:-1], b_w[1:])[:n]
    i = np.arange(1, n + 1, dtype=float)
    integral = f[1:] * csum[1:] - conv_a - conv_b
    bracket = f[1:] * (i * delta) ** -sigma + sigma * integral
    out = np.empty(n + 1)
    out[0] = np.nan
    out[1:] = bracket / math.gamma(1.0 - sigma)
    return out


def _right_deriv_nodes(values: np.ndarray, delta: float, sigma: float) -> np.ndarray:
    """(D^sigma_{b-} g) at all grid nodes; entry n is nan. Phase stripped."""
    return _left_deriv_nodes(np.asarray(values, dtype=float)[::-1], delta, sigma)[::-1]


def left_derivative(f: SampledFunction, alpha: float, x: float) -> float:
    """(D^alpha_{a+} f)(x) for x in (a, b], singular kernel integrated exactly."""
    alpha = _validate_order(alpha)
    a = f.a
    if not (a < x <= f.b + 1e-12 * max(1.0, abs(f.b))):
        raise ValueError(f"x must lie in (a, b], got {x}")
    delta = f.delta
    pos = (x - a) / delta
    j = int(np.ceil(pos - 1e-9)) - 1  # cell [t_j, x] is the (possibly partial) tip
    fx = float(f(x))
    t, y = f.t, f.y
    slope_j = (y[j + 1] - y[j]) / delta
    v_tip = x - t[j]
    integral = slope_j * v_tip ** (1.0 - alpha) / (1.0 - alpha)
    if j > 0:
        k = np.arange(j)
        v_a = x - t[k + 1]
        v_b = x - t[k]
        i0 = (v_a**-alpha - v_b**-alpha) / alpha
        i1 = (v_b ** (1.0 - alpha) - v_a ** (1.0 - alpha)) / (1.0 - alpha) - v_a * i0
        q_l = fx - y[k + 1]
        q_r = fx - y[k]
        integral += float(np.sum(q_l * i0 + (q_r - q_l) / delta * i1))
    bracket = fx * (x - a) ** -alpha + alpha * integral
    return bracket / math.gamma(1.0 - alpha)


def right_derivative(g: SampledFunction, alpha: float, x: float) -> float:
    """(D^{1-alpha}_{b-} g)(x) for x in [a, b), with the phase factor dropped."""
    alpha = _validate_order(alpha)
    if not (g.a - 1e-12 * max(1.0, abs(g.a)) <= x < g.b):
        raise ValueError(f"x must lie in [a, b), got {x}")
    reflected = SampledFunction(g.t, g.y[::-1])
    return left_derivative(reflected, 1.0 - alpha, g.a + (g.b - x))


# ---------------------------------------------------------------------------
# Young integral


def young_integral(
    f: SampledFunction,
    g: SampledFunction,
    alpha: float,
    a: float | None = None,
    b: float | None = None,
    refine: int = 8,
) -> float:
    """Pathwise integral of f against dg via fractional derivatives.

    Computes -int phi_f(x) psi(x) dx with phi_f = D^alpha_{a+} f and
    psi = D^{1-alpha}_{b-} (g - g(b)); the two unimodular phase factors
    cancel, and the endpoint compensation of g makes the real-valued form
    agree with the Riemann-Stieltjes integral (f == 1 gives g(b) - g(a)).
    The f(a) (x-a)^{-alpha} singularity is split off and integrated against
    analytic cell moments; the remainder is trapezoidal.

    refine resamples the piecewise-linear interpolants on a mesh that many
    times finer before quadrature (same function, better resolution of the
    product of the two derivatives; rough integrands need it).
    """
    alpha = _validate_order(alpha)
    if alpha > 0.5:
        warnings.warn(
            "alpha > 1/2: the Young construction is only guaranteed for "
            "integrators smoother than Lipschitz",
            stacklevel=2,
        )
    if not np.array_equal(f.t, g.t):
        raise ValueError("f and g must be sampled on the same nodes")
    if a is not None or b is not None:
        a = f.a if a is None else a
        b = f.b if b is None else b
        f = f.restrict(a, b)
        g = g.restrict(a, b)
    if f.t.size - 1 < 4:
        raise ValueError("Young quadrature needs at least 4 cells")
    if refine > 1:
        nf = (f.t.size - 1) * int(refine)
        tf = f.a + (f.b - f.a) * np.arange(nf + 1) / nf
        f = SampledFunction(tf, np.interp(tf, f.t, f.y))
        g = SampledFunction(tf, np.interp(tf, g.t, g.y))
    n = f.t.size - 1
    delta = f.delta
    phi = _left_deriv_nodes(f.y, delta, alpha)
    psi = _right_deriv_nodes(g.y - g.y[-1], delta, 1.0 - alpha)
    psi[-1] = 0.0  # compensated integrator vanishes at b
    if not (np.all(np.isfinite(phi[1:])) and np.all(np.isfinite(psi))):
        raise ValueError("non-finite fractional derivative (bad samples?)")
    gamma1 = math.gamma(1.0 - alpha)
    i = np.arange(1, n + 1, dtype=float)
    phi_reg = np.empty(n + 1)
    phi_reg[0] = 0.0
    phi_reg[1:] = phi[1:] - f.y[0] * (i * delta) ** -alpha / gamma1
    k = np.arange(n, dtype=float)
    m0 = delta ** (1.0 - alpha) * ((k + 1.0) ** (1.0 - alpha) - k ** (1.0 - alpha)) / (1.0 - alpha)
    m1 = (
        delta ** (2.0 - alpha) * ((k + 1.0) ** (2.0 - alpha) - k ** (2.0 - alpha)) / (2.0 - alpha)
        - k * delta * m0
    )
    i_sing = f.y[0] / gamma1 * float(np.sum(psi[:-1] * m0 + np.diff(psi) / delta * m1))
    i_reg = float(np.trapezoid(phi_reg * psi, dx=delta))
    return -(i_sing + i_reg)


# ---------------------------------------------------------------------------
# weighted norms


def _bracket_row_weights(a_w: np.ndarray, b_w: np.ndarray, i: int) -> np.ndarray:
    """Weights on |f_i - f_j|, j = 0..i-1, for the singular increment integral."""
    row = b_w[1 : i + 1][::-1].copy()
    if i >= 2:
        row[1:] += a_w[2 : i + 1][::-1]
    return row


def increment_bracket(values: np.ndarray, delta: float, alpha: float) -> np.ndarray:
    """int_a^s |f(s)-f(z)| (s-z)^(-1-alpha) dz at every node s."""
    f = np.asarray(values, dtype=float)
    n = f.size - 1
    a_w, b_w = _cell_weights(n, float(delta), float(alpha))
    out = np.zeros(n + 1)
    for i in range(1, n + 1):
        out[i] = float(np.sum(_bracket_row_weights(a_w, b_w, i) * np.abs(f[i] - f[:i])))
    return out


@lru_cache(maxsize=16)
def _bracket_weight_matrix(n: int, delta: float, alpha: float) -> np.ndarray:
    """Dense (n+1, n+1) lower-triangular weight matrix; for modest n only."""
    if n > 2048:
        raise ValueError("dense bracket weights are limited to n <= 2048")
    a_w, b_w = _cell_weights(n, delta, alpha)
    w = np.zeros((n + 1, n + 1))
    for i in range(1, n + 1):
        w[i, :i] = _bracket_row_weights(a_w, b_w, i)
    w.setflags(write=False)
    return w


def _increment_bracket_batch(
    values: np.ndarray, delta: float, alpha: float, block: int = 64
) -> np.ndarray:
    """Batched increment_bracket: (paths, n+1) -> (paths, n+1)."""
    v = np.asarray(values, dtype=float)
    w = _bracket_weight_matrix(v.shape[1] - 1, float(delta), float(alpha))
    out = np.empty_like(v)
    for lo in range(0, v.shape[0], block):
        part = v[lo : lo + block]
        out[lo : lo + block] = np.einsum(
            "ij,pij->pi", w, np.abs(part[:, :, None] - part[:, None, :])
        )
    return out


def norm_inf_alpha(f: SampledFunction, alpha: float) -> float:
    """sup_s ( |f(s)| + int_a^s |f(s)-f(z)| (s-z)^(-1-alpha) dz )."""
    alpha = _validate_order(alpha)
    return float(np.max(np.abs(f.y) + increment_bracket(f.y, f.delta, alpha)))


@lru_cache(maxsize=32)
def _norm2_weight_cells(n: int, delta: float, alpha: float, length: float) -> np.ndarray:
    """Analytic cell integrals of (s-a)^(-alpha) + (b-s)^(-alpha-1/2)."""
    k = np.arange(n, dtype=float)
    left = delta ** (1.0 - alpha) * ((k + 1.0) ** (1.0 - alpha) - k ** (1.0 - alpha)) / (1.0 - alpha)
    r = length - k * delta  # distance from b to cell's left node
    r_next = np.maximum(length - (k + 1.0) * delta, 0.0)
    p = 0.5 - alpha
    right = (r**p - r_next**p) / p
    cells = left + right
    cells.setflags(write=False)
    return cells


def _norm_2_from_bracket(bracket_sq: np.ndarray, delta: float, alpha: float, length: float) -> float:
    cells = _norm2_weight_cells(bracket_sq.size - 1, float(delta), float(alpha), float(length))
    return math.sqrt(float(np.sum(0.5 * (bracket_sq[:-1] + bracket_sq[1:]) * cells)))


def norm_2_alpha(f: SampledFunction, alpha: float) -> float:
    """Weighted L2 norm: the squared bracket is piecewise constant per cell,
    the endpoint-singular weight is integrated analytically."""
    alpha = _validate_order(alpha)
    if alpha >= 0.5:
        raise ValueError("the (b-s)^(-alpha-1/2) weight is integrable only for alpha < 1/2")
    bracket = np.abs(f.y) + increment_bracket(f.y, f.delta, alpha)
    return _norm_2_from_bracket(bracket**2, f.delta, alpha, f.b - f.a)


def norms_comparison_constant(alpha: float, a: float, b: float) -> float:
    """C with norm_2_alpha <= C * norm_inf_alpha on [a, b]."""
    length = b - a
    return math.sqrt(
        length ** (1.0 - alpha) / (1.0 - alpha) + length ** (0.5 - alpha) / (0.5 - alpha)
    )


def integral_bound(f: SampledFunction, alpha: float, k_b: float) -> float:
    """Diagnostic majorant of |int f dB^H| on the sample interval.

    k_b times int_u^v ( |f(s)| (s-u)^(-alpha) + inner increment integral ) ds
    with the GRR constant taken as 1.
    """
    alpha = _validate_order(alpha)
    n = f.t.size - 1
    delta = f.delta
    absf = np.abs(f.y)
    k = np.arange(n, dtype=float)
    m0 = delta ** (1.0 - alpha) * ((k + 1.0) ** (1.0 - alpha) - k ** (1.0 - alpha)) / (1.0 - alpha)
    m1 = (
        delta ** (2.0 - alpha) * ((k + 1.0) ** (2.0 - alpha) - k ** (2.0 - alpha)) / (2.0 - alpha)
        - k * delta * m0
    )
    outer_sing = float(np.sum(absf[:-1] * m0 + np.diff(absf) / delta * m1))
    bracket = increment_bracket(f.y, delta, alpha)
    return float(k_b) * (outer_sing + float(np.trapezoid(bracket, dx=delta)))
