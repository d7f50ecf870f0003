"""Fractional Brownian motion and Wiener path generation.

Exact-in-law samplers (Cholesky of the node covariance, Davies-Harte
circulant embedding of the increments), dependent (W, B^H) pairs, and the
Garsia-Rodemich-Rumsey Holder-constant functionals used for localization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grid import TimeGrid
from .rng import stream

__all__ = [
    "fbm_covariance",
    "generate_fbm",
    "generate_wiener",
    "generate_noise_pair",
    "holder_functional",
    "holder_cumulative",
    "NoisePath",
    "NoisePair",
    "HolderFunctional",
    "Independent",
    "VolterraFromWiener",
    "JointGaussian",
    "validate_hurst",
    "write_path_csv",
    "write_pair_csv",
]

# Relative tolerance on circulant eigenvalues; anything more negative than
# -CIRCULANT_EIG_TOL * max(eig) signals a covariance bug, not roundoff.
CIRCULANT_EIG_TOL = 1e-10


def validate_hurst(h: float, allow_brownian: bool = False) -> float:
    """Check H is in (1/2, 1); H = 1/2 only in the Brownian cross-check mode."""
    h = float(h)
    if allow_brownian and h == 0.5:
        return h
    if not (0.5 < h < 1.0):
        raise ValueError(f"Hurst index must lie in (1/2, 1), got {h}")
    return h


def fbm_covariance(s, t, h: float):
    """E[B^H_s B^H_t] = (s^2H + t^2H - |t-s|^2H) / 2."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0.0) or np.any(t < 0.0):
        raise ValueError("fBm covariance requires nonnegative times")
    h = float(h)
    if not (0.0 < h < 1.0):
        raise ValueError(f"Hurst index must lie in (0, 1), got {h}")
    two_h = 2.0 * h
    out = 0.5 * (s**two_h + t**two_h - np.abs(t - s) ** two_h)
    return out if out.ndim else float(out)


def _fbm_node_covariance(grid: TimeGrid, h: float) -> np.ndarray:
    """Covariance matrix of (B_{nu_1}, ..., B_{nu_n})."""
    t = grid.nodes[1:]
    return fbm_covariance(t[:, None], t[None, :], h)


@dataclass(frozen=True)
class NoisePath:
    """A process sampled at the nodes of a uniform grid; values[0] = 0."""

    grid: TimeGrid
    values: np.ndarray
    kind: str  # "wiener" or "fbm"
    hurst: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n + 1,):
            raise ValueError("values must have one entry per grid node")
        if v[0] != 0.0:
            raise ValueError("paths start at 0")
        if not np.all(np.isfinite(v)):
            raise ValueError("path contains non-finite values")
        if self.kind not in ("wiener", "fbm"):
            raise ValueError(f"unknown path kind {self.kind!r}")
        if self.kind == "fbm" and self.hurst is None:
            raise ValueError("fbm paths carry their Hurst index")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def restrict(self, coarse: TimeGrid) -> "NoisePath":
        stride = coarse.refinement_stride(self.grid)
        return NoisePath(coarse, self.values[::stride], self.kind, self.hurst)


# ---------------------------------------------------------------------------
# dependence modes for (W, B^H) pairs


@dataclass(frozen=True)
class Independent:
    name: str = field(default="independent", init=False)


@dataclass(frozen=True)
class VolterraFromWiener:
    """B^H built from the same Wiener increments via the Molchan-Golosov kernel."""

    name: str = field(default="volterra-from-same-wiener", init=False)


@dataclass(frozen=True)
class JointGaussian:
    """Joint Gaussian pair with user-specified cross covariance E[W_s B^H_t]."""

    cross_covariance: object  # callable (s, t) -> float, vectorized
    name: str = field(default="joint-gaussian", init=False)


_DEPENDENCE_ALIASES = {
    "independent": Independent(),
    "volterra": VolterraFromWiener(),
    "volterra-from-same-wiener": VolterraFromWiener(),
}


def _resolve_dependence(spec) -> Independent | VolterraFromWiener | JointGaussian:
    if isinstance(spec, (Independent, VolterraFromWiener, JointGaussian)):
        return spec
    if isinstance(spec, str):
        try:
            return _DEPENDENCE_ALIASES[spec]
        except KeyError:
            raise ValueError(
                f"unknown dependence {spec!r}; use 'independent', 'volterra-from-same-wiener' "
                "or a JointGaussian spec"
            ) from None
    raise TypeError(f"cannot interpret dependence spec {spec!r}")


@dataclass(frozen=True)
class NoisePair:
    """Coupled (W, B^H) sample paths on a shared grid."""

    w: NoisePath
    bh: NoisePath
    dependence: object
    seed: int

    def __post_init__(self):
        if self.w.grid != self.bh.grid:
            raise ValueError("paths of a pair share one grid")

    @property
    def grid(self) -> TimeGrid:
        return self.w.grid

    @property
    def provenance(self) -> tuple:
        return (self.seed, _resolve_dependence(self.dependence).name, self.grid.n, self.grid.horizon)


# ---------------------------------------------------------------------------
# generators


def _fgn_unit_circulant(n: int, h: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """(size, n) unit-step fractional Gaussian noise via Davies-Harte.

    Draw order fixed as: Z_0 block, Z_n block, real block, imaginary block.
    """
    k = np.arange(n + 1, dtype=float)
    gamma = 0.5 * ((k + 1.0) ** (2 * h) - 2.0 * k ** (2 * h) + np.abs(k - 1.0) ** (2 * h))
    # first row of the 2n circulant: [gamma_0..gamma_n, gamma_{n-1}..gamma_1]
    row = np.concatenate([gamma, gamma[n - 1 : 0 : -1]])
    eigs = np.fft.fft(row).real
    if eigs.min() < -CIRCULANT_EIG_TOL * eigs.max():
        raise RuntimeError(
            f"circulant embedding produced eigenvalue {eigs.min():.3e}; "
            "the increment covariance is wrong"
        )
    eigs = np.clip(eigs, 0.0, None)
    m = 2 * n
    z0 = rng.standard_normal(size)
    zn = rng.standard_normal(size)
    v_re = rng.standard_normal((size, n - 1))
    v_im = rng.standard_normal((size, n - 1))
    y = np.zeros((size, m), dtype=complex)
    y[:, 0] = np.sqrt(eigs[0]) * z0
    y[:, n] = np.sqrt(eigs[n]) * zn
    half = np.sqrt(eigs[1:n] / 2.0)
    y[:, 1:n] = half * (v_re + 1j * v_im)
    y[:, n + 1 :] = np.conj(y[:, 1:n][:, ::-1])
    return math.sqrt(m) * np.fft.ifft(y, axis=1).real[:, :n]


def _fbm_values_batch(
    grid: TimeGrid, h: float, rng: np.random.Generator, size: int, method: str
) -> np.ndarray:
    """(size, n+1) fBm node values, exact in distribution for both methods."""
    n = grid.n
    if method in ("circulant", "circulant-embedding"):
        fgn = _fgn_unit_circulant(n, h, rng, size) * grid.delta**h
        out = np.zeros((size, n + 1))
        np.cumsum(fgn, axis=1, out=out[:, 1:])
        return out
    if method == "cholesky":
        cov = _fbm_node_covariance(grid, h)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError("fBm node covariance is not positive definite") from exc
        z = rng.standard_normal((size, n))
        out = np.zeros((size, n + 1))
        out[:, 1:] = z @ chol.T
        return out
    raise ValueError(f"unknown method {method!r}; use 'cholesky' or 'circulant-embedding'")


def generate_fbm(
    grid: TimeGrid,
    h: float,
    seed: int,
    method: str = "circulant-embedding",
    allow_brownian: bool = False,
) -> NoisePath:
    """Sample one fBm path on the grid; exact in law, deterministic in seed."""
    h = validate_hurst(h, allow_brownian=allow_brownian)
    values = _fbm_values_batch(grid, h, stream(seed, 1), 1, method)[0]
    return NoisePath(grid, values, "fbm", h)


def _wiener_values_batch(grid: TimeGrid, rng: np.random.Generator, size: int) -> np.ndarray:
    dw = rng.standard_normal((size, grid.n)) * math.sqrt(grid.delta)
    out = np.zeros((size, grid.n + 1))
    np.cumsum(dw, axis=1, out=out[:, 1:])
    return out


def generate_wiener(grid: TimeGrid, seed: int) -> NoisePath:
    """Sample one standard Wiener path on the grid."""
    return NoisePath(grid, _wiener_values_batch(grid, stream(seed, 0), 1)[0], "wiener")


@lru_cache(maxsize=8)
def _volterra_weights(n: int, horizon: float, h: float) -> np.ndarray:
    """(n, n) lower-triangular map from Wiener increments to fBm node values.

    Row j-1 gives B_{nu_j} = sum_i K[j-1, i] dW_i. Cells i >= 1 evaluate the
    Molchan-Golosov kernel at the cell's left point; the first cell replaces
    the singular s^{1/2-H} factor by its analytic cell average and uses the
    exact s = 0 inner integral. H = 1/2 degenerates to the identity map.
    """
    if h == 0.5:
        return np.tril(np.ones((n, n)))
    p = h - 0.5
    delta = horizon / n
    nodes = np.arange(n + 1, dtype=float) * horizon / n
    g = nodes**p  # u^{H-1/2} at the nodes
    dg = np.diff(g)
    c_h = math.sqrt(
        h * (2.0 * h - 1.0) * math.gamma(1.5 - h) / (math.gamma(2.0 - 2.0 * h) * math.gamma(p))
    )
    kmat = np.zeros((n, n))
    # inner integral phi(nu_j, nu_i) = int_{nu_i}^{nu_j} (u-nu_i)^{p-1} u^p du,
    # product-integrated cell by cell (PL in u^p, analytic in (u-nu_i)^{p-1})
    for i in range(1, n):
        d = np.arange(n - i, dtype=float)  # cell offsets k-i for k = i..n-1
        pow_p = (d + 1.0) ** p - d**p
        m0 = delta**p * pow_p / p
        m1 = delta ** (p + 1.0) * (((d + 1.0) ** (p + 1.0) - d ** (p + 1.0)) / (p + 1.0)) - (
            d * delta
        ) * m0
        cells = g[i:n] * m0 + (dg[i:n] / delta) * m1
        kmat[i:, i] = c_h * nodes[i] ** (-p) * np.cumsum(cells)
    # first cell: cell-averaged singular factor times the exact inner integral
    j = np.arange(1, n + 1, dtype=float)
    phi0 = (j * delta) ** (2.0 * p) / (2.0 * p)
    kmat[:, 0] = c_h * (delta ** (-p) / (1.0 - p)) * phi0
    return kmat


def volterra_marginal_covariance(grid: TimeGrid, h: float) -> np.ndarray:
    """Exact covariance of the discretized Volterra fBm at nodes 1..n."""
    k = _volterra_weights(grid.n, grid.horizon, h)
    return grid.delta * (k @ k.T)


def generate_noise_pair(
    grid: TimeGrid,
    h: float,
    seed: int,
    dependence="independent",
    method: str = "circulant-embedding",
    allow_brownian: bool = False,
) -> NoisePair:
    """Coupled (W, B^H) on a shared grid under the requested dependence.

    independent: disjoint streams (seed, 0) for W and (seed, 1) for B^H.
    volterra-from-same-wiener: B^H = (Molchan-Golosov weights) @ dW.
    joint-gaussian: Cholesky of the full joint node covariance, stream (seed, 2).
    """
    h = validate_hurst(h, allow_brownian=allow_brownian)
    dep = _resolve_dependence(dependence)
    n = grid.n
    if isinstance(dep, Independent):
        w_vals = _wiener_values_batch(grid, stream(seed, 0), 1)[0]
        b_vals = _fbm_values_batch(grid, h, stream(seed, 1), 1, method)[0]
    elif isinstance(dep, VolterraFromWiener):
        w_vals = _wiener_values_batch(grid, stream(seed, 0), 1)[0]
        b_vals = np.zeros(n + 1)
        b_vals[1:] = _volterra_weights(n, grid.horizon, h) @ np.diff(w_vals)
    elif isinstance(dep, JointGaussian):
        t = grid.nodes[1:]
        cov = np.empty((2 * n, 2 * n))
        cov[:n, :n] = np.minimum(t[:, None], t[None, :])
        cov[n:, n:] = _fbm_node_covariance(grid, h)
        cross = np.asarray(dep.cross_covariance(t[:, None], t[None, :]), dtype=float)
        if cross.shape != (n, n):
            raise ValueError("cross covariance must evaluate on the full node mesh")
        cov[:n, n:] = cross
        cov[n:, :n] = cross.T
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            smallest = float(np.linalg.eigvalsh(cov)[0])
            raise ValueError(
                f"joint covariance is not positive semidefinite (smallest eigenvalue {smallest:.6e})"
            ) from None
        z = stream(seed, 2).standard_normal(2 * n)
        joint = chol @ z
        w_vals = np.zeros(n + 1)
        b_vals = np.zeros(n + 1)
        w_vals[1:] = joint[:n]
        b_vals[1:] = joint[n:]
    else:  # pragma: no cover
        raise TypeError(f"unhandled dependence {dep!r}")
    return NoisePair(
        NoisePath(grid, w_vals, "wiener"),
        NoisePath(grid, b_vals, "fbm", h),
        dep,
        int(seed),
    )


# ---------------------------------------------------------------------------
# Garsia-Rodemich-Rumsey Holder functionals


@dataclass(frozen=True)
class HolderFunctional:
    """Value of K^{.,eta}_t for one path; the GRR constant C_eta is set to 1."""

    eta: float
    horizon: float
    kind: str
    value: float


def _holder_exponents(kind: str, eta: float, hurst: float | None) -> float:
    """Denominator exponent q of |x-y|^q in the GRR double integral."""
    eta = float(eta)
    if kind == "wiener":
        if not (0.0 < eta < 0.5):
            raise ValueError(f"eta must lie in (0, 1/2) for Wiener paths, got {eta}")
        return 1.0 / eta
    if kind == "fbm":
        if hurst is None:
            raise ValueError("fbm paths need a Hurst index")
        if not (0.0 < eta < hurst):
            raise ValueError(f"eta must lie in (0, H) for fBm paths, got {eta}")
        return 2.0 * hurst / eta
    raise ValueError(f"unknown path kind {kind!r}")


def _abs_power(x: np.ndarray, p: float) -> np.ndarray:
    """|x|**p, using square-and-multiply when p is a small integer."""
    ax = np.abs(x)
    if p == int(p) and 1 <= p <= 64:
        k = int(p)
        out = None
        sq = ax
        while k:
            if k & 1:
                out = sq.copy() if out is None else out * sq
            k >>= 1
            if k:
                sq = sq * sq
        return out
    return ax**p


def holder_cumulative(values: np.ndarray, delta: float, eta: float, q: float) -> np.ndarray:
    """K at every node: (double integral over [0, nu_k]^2)^{eta/2}, k = 0..n.

    Node-pair rectangle rule with weight delta^2 on every off-diagonal pair;
    diagonal (zero-width) cells are skipped. Monotone in k by construction.
    """
    values = np.asarray(values, dtype=float)
    n = values.size - 1
    power = 2.0 / eta
    inv_sep = (np.arange(1, n + 1, dtype=float) * delta) ** (-q)
    total = np.zeros(n + 1)
    acc = 0.0
    for k in range(1, n + 1):
        row = _abs_power(values[k] - values[:k], power) * inv_sep[k - 1 :: -1]
        acc += 2.0 * float(row.sum())
        total[k] = acc
    return (total * delta * delta) ** (eta / 2.0)


def _holder_cumulative_batch(values: np.ndarray, delta: float, eta: float, q: float) -> np.ndarray:
    """Batched holder_cumulative: values (paths, n+1) -> K (paths, n+1)."""
    v = np.ascontiguousarray(values, dtype=float)
    paths, n1 = v.shape
    n = n1 - 1
    inv_sep = (np.arange(1, n + 1, dtype=float) * delta) ** (-q)
    power = 2.0 / eta
    total = np.zeros_like(v)
    acc = np.zeros(paths)
    for k in range(1, n + 1):
        row = _abs_power(v[:, k, None] - v[:, :k], power)
        row *= inv_sep[k - 1 :: -1]
        acc += 2.0 * row.sum(axis=1)
        total[:, k] = acc
    return (total * delta * delta) ** (eta / 2.0)


def holder_functional(path: NoisePath, eta: float, t: float | None = None) -> HolderFunctional:
    """GRR Holder-constant functional of a sampled path on [0, t]."""
    t = path.grid.horizon if t is None else float(t)
    k = path.grid.node_index(t)
    if k < 8:
        raise ValueError("holder_functional needs at least 8 grid nodes in [0, t]")
    q = _holder_exponents(path.kind, eta, path.hurst)
    value = holder_cumulative(path.values[: k + 1], path.grid.delta, eta, q)[-1]
    return HolderFunctional(eta=float(eta), horizon=t, kind=path.kind, value=float(value))


def pair_holder_cumulative(pair: NoisePair, eta: float, kind: str = "sum") -> np.ndarray:
    """Cumulative K^eta at the pair's grid nodes; kind in {wiener, fbm, sum}."""
    if kind not in ("wiener", "fbm", "sum"):
        raise ValueError(f"unknown functional kind {kind!r}")
    out = None
    if kind in ("wiener", "sum"):
        q = _holder_exponents("wiener", eta, None)
        out = holder_cumulative(pair.w.values, pair.grid.delta, eta, q)
    if kind in ("fbm", "sum"):
        q = _holder_exponents("fbm", eta, pair.bh.hurst)
        k_b = holder_cumulative(pair.bh.values, pair.grid.delta, eta, q)
        out = k_b if out is None else out + k_b
    return out


# ---------------------------------------------------------------------------
# CSV export (17 significant digits, round-trip safe)


def write_path_csv(path: NoisePath, file) -> None:
    file.write("t,value\n")
    for t, v in zip(path.grid.nodes, path.values):
        file.write(f"{t:.17g},{v:.17g}\n")


def write_pair_csv(pair: NoisePair, file) -> None:
    file.write("t,w,bh\n")
    for t, w, b in zip(pair.grid.nodes, pair.w.values, pair.bh.values):
        file.write(f"{t:.17g},{w:.17g},{b:.17g}\n")
