"""Monte Carlo harness for strong errors between nested dyadic Euler
solutions, in the sup norm and the weighted 2-norm, with a log-log fit of
the convergence rate.

Coupling: noise is generated once per path on the finest grid; every
coarse solution subsamples it. tau_N is computed once per path from the
noise (it does not depend on the level) and the same tau stops every
level. The Holder functionals and both norms are quadratured on a fixed
dyadic evaluation subgrid (default 256 cells) for runtime; sup errors use
every fine node.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict, field

import numpy as np

from . import __version__ as _version
from .coefficients import CoefficientSet
from .euler import SolverConfig, StoppedSolution, _euler_solve_batch, _interpolate_on_fine
from .fbm import (
    VolterraFromWiener,
    _fbm_values_batch,
    _holder_cumulative_batch,
    _holder_exponents,
    _resolve_dependence,
    _volterra_weights,
    _wiener_values_batch,
    validate_hurst,
)
from .fraccalc import (
    _increment_bracket_batch,
    _norm2_weight_cells,
    increment_bracket,
    norms_comparison_constant,
)
from .grid import TimeGrid
from .rng import stream

__all__ = ["LevelStats", "ErrorReport", "pathwise_error", "mc_strong_error", "fit_rate"]

DEFAULT_R = 1000.0
_CHUNK = 256  # fixed path chunk; results never depend on worker count


@dataclass(frozen=True)
class LevelStats:
    n: int
    delta: float
    err2_norm2: float
    err2_sup: float
    se_norm2: float
    se_sup: float
    retained: int
    discarded: int
    aborted: int
    mean_norm_inf_sq: float  # E ||X^{delta,N}||^2_{inf,alpha}, the moment monitor
    restricted_fraction: float  # fraction of paths inside B^R


@dataclass(frozen=True)
class ErrorReport:
    """Per-level strong errors with the fitted rate and localization stats."""

    coefficients: str
    h: float
    t_horizon: float
    x0: float
    seed: int
    paths: int
    levels: list
    fine_n: int
    eval_n: int
    r_bound: float
    alpha: float
    eta: float
    threshold: float
    epsilon: float
    kappa: float
    rate_floor: float
    localization_fraction: float
    dependence: str
    method: str
    fit_norm2: tuple | None  # (slope, slope stderr, intercept) of log err2 vs log delta
    fit_sup: tuple | None
    degenerate: bool
    version: str = field(default=_version)

    def to_json(self) -> str:
        payload = asdict(self)
        payload["levels"] = [asdict(l) for l in self.levels]
        return json.dumps(payload, sort_keys=True, indent=2)

    def write_csv(self, file) -> None:
        file.write("level_n,delta,err2_norm2,err2_sup,se_norm2,se_sup,discarded,aborted\n")
        for l in self.levels:
            file.write(
                f"{l.n},{l.delta:.17g},{l.err2_norm2:.17g},{l.err2_sup:.17g},"
                f"{l.se_norm2:.17g},{l.se_sup:.17g},{l.discarded},{l.aborted}\n"
            )

    def write_loglog_csv(self, file) -> None:
        file.write("level_n,log10_delta,log10_err2_norm2,log10_err2_sup\n")
        for l in self.levels:
            ln2 = math.log10(l.err2_norm2) if l.err2_norm2 > 0 else float("nan")
            lsup = math.log10(l.err2_sup) if l.err2_sup > 0 else float("nan")
            file.write(f"{l.n},{math.log10(l.delta):.17g},{ln2:.17g},{lsup:.17g}\n")

    def passes_rate_floor(self) -> bool:
        if self.degenerate:
            return True
        if self.fit_norm2 is None or self.fit_sup is None:
            return False
        return (
            self.fit_norm2[0] / 2.0 >= self.rate_floor
            and self.fit_sup[0] / 2.0 >= self.rate_floor
        )


def _ols_loglog(deltas: np.ndarray, err2: np.ndarray) -> tuple[float, float, float]:
    """Slope, slope standard error, and intercept of log err2 on log delta."""
    x = np.log(deltas)
    y = np.log(err2)
    m = x.size
    xbar = x.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    if sxx == 0.0:
        raise ValueError("cannot fit a rate from a single distinct level")
    slope = float(np.sum((x - xbar) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * xbar)
    resid = y - (intercept + slope * x)
    se = math.sqrt(float(np.sum(resid**2)) / max(m - 2, 1) / sxx)
    return slope, se, intercept


def _fit_from_levels(levels: list, functional: str) -> tuple[float, float, float]:
    if functional not in ("norm2", "sup"):
        raise ValueError("functional must be 'norm2' or 'sup'")
    pick = [
        (l.delta, l.err2_norm2 if functional == "norm2" else l.err2_sup)
        for l in levels
        if l.retained > 0
    ]
    pick = [(d, e) for d, e in pick if e > 0.0]
    if len(pick) < 3:
        raise ValueError("fewer than 3 usable levels; cannot fit a rate")
    deltas = np.array([d for d, _ in pick])
    err2 = np.array([e for _, e in pick])
    return _ols_loglog(deltas, err2)


def fit_rate(report: ErrorReport, functional: str = "norm2") -> tuple[float, float]:
    """OLS slope of log squared error against log delta, with its standard
    error; slope/2 estimates the per-norm rate. Zero-error levels are
    excluded; at least 3 levels must remain."""
    slope, se, _ = _fit_from_levels(report.levels, functional)
    return slope, se


# ---------------------------------------------------------------------------
# pathwise error (public, full-resolution by default)


def pathwise_error(
    coarse: StoppedSolution,
    fine: StoppedSolution,
    alpha: float,
    norm_grid_n: int | None = None,
) -> tuple[float, float]:
    """(sup over fine nodes, ||.||_{2,alpha}) of X^{delta,N} - X^{mu,N}.

    Both solutions must be driven by the same noise pair, share tau, and
    the fine grid must refine the coarse one. The coarse solution is
    evaluated at fine nodes through its continuous interpolation.
    """
    csol, fsol = coarse.base, fine.base
    if csol.noise.provenance != fsol.noise.provenance or csol.noise is not fsol.noise:
        raise ValueError("solutions are not driven by the same noise (coupling violated)")
    if coarse.tau != fine.tau:
        raise ValueError("stopped solutions must share one stopping time")
    stride = csol.grid.refinement_stride(fsol.grid)
    fine_grid = fsol.grid
    noise_stride = fine_grid.refinement_stride(csol.noise.grid)
    w = csol.noise.w.values[::noise_stride][None, :]
    bh = csol.noise.bh.values[::noise_stride][None, :]
    interp = _interpolate_on_fine(
        csol.coeffs, csol.grid.nodes, csol.values[None, :], fine_grid.nodes, w, bh, stride
    )[0]
    j_tau = fine_grid.node_index(coarse.tau)
    idx = np.minimum(np.arange(fine_grid.n + 1), j_tau)
    coarse_stopped = interp[idx]
    fine_stopped = fsol.values.copy()
    fine_stopped[j_tau + 1 :] = fsol.values[j_tau]
    diff = coarse_stopped - fine_stopped
    sup_error = float(np.max(np.abs(diff)))
    if norm_grid_n is not None:
        if fine_grid.n % norm_grid_n:
            raise ValueError("norm_grid_n must divide the fine grid size")
        diff_n = diff[:: fine_grid.n // norm_grid_n]
    else:
        diff_n = diff
    delta_n = fine_grid.horizon / (diff_n.size - 1)
    bracket = np.abs(diff_n) + increment_bracket(diff_n, delta_n, alpha)
    cells = _norm2_weight_cells(diff_n.size - 1, delta_n, float(alpha), fine_grid.horizon)
    norm2 = math.sqrt(float(np.sum(0.5 * (bracket[:-1] ** 2 + bracket[1:] ** 2) * cells)))
    return sup_error, norm2


# ---------------------------------------------------------------------------
# Monte Carlo harness


def _chunk_noise(
    dep, grid: TimeGrid, h: float, seed: int, chunk_idx: int, size: int, method: str
) -> tuple[np.ndarray, np.ndarray]:
    """(W, B^H) values for one chunk of paths, (size, n+1) each."""
    if isinstance(dep, VolterraFromWiener):
        w = _wiener_values_batch(grid, stream(seed, 0, chunk_idx), size)
        kmat = _volterra_weights(grid.n, grid.horizon, h)
        b = np.zeros_like(w)
        b[:, 1:] = np.diff(w, axis=1) @ kmat.T
        return w, b
    w = _wiener_values_batch(grid, stream(seed, 0, chunk_idx), size)
    b = _fbm_values_batch(grid, h, stream(seed, 1, chunk_idx), size, method)
    return w, b


def _stop_batch(values: np.ndarray, tau_idx: np.ndarray) -> np.ndarray:
    """Freeze each row after its own node index."""
    n1 = values.shape[1]
    idx = np.minimum(np.arange(n1)[None, :], tau_idx[:, None])
    return np.take_along_axis(values, idx, axis=1)


def mc_strong_error(
    coeffs: CoefficientSet,
    h: float,
    config: SolverConfig,
    levels: list[int],
    m_fine: int,
    paths: int,
    r_bound: float = DEFAULT_R,
    *,
    t_horizon: float = 1.0,
    x0: float = 1.0,
    seed: int = 0,
    dependence="independent",
    method: str = "circulant-embedding",
    eval_n: int = 256,
    workers: int | None = None,
) -> ErrorReport:
    """Strong errors E||X^{delta,N} - X^{mu,N}||^2 on the event B^R for each
    coarse level against the common fine solution, with MC standard errors,
    localization and restriction statistics, and fitted rates.

    The fine grid has max(levels) * 2^m_fine cells. Paths outside B^R are
    reported as discarded instead of entering the restricted means; paths
    whose state explodes are aborted and counted separately.
    """
    h = validate_hurst(h)
    coeffs.validate_for_hurst(h)
    config.validate(h, coeffs.beta)
    levels = sorted(int(n) for n in levels)
    if len(set(levels)) != len(levels):
        raise ValueError("levels must be distinct")
    if m_fine < 1:
        raise ValueError("m_fine must be at least 1")
    fine_n = max(levels) << m_fine
    for n in levels:
        ratio = fine_n // n
        if n < 2 or fine_n % n or (ratio & (ratio - 1)):
            raise ValueError(f"level n={n} is not a dyadic coarsening of fine n={fine_n}")
    eval_n = min(int(eval_n), fine_n)
    if fine_n % eval_n or (fine_n // eval_n) & (fine_n // eval_n - 1):
        raise ValueError(f"eval_n={eval_n} must be a dyadic divisor of fine n={fine_n}")
    if paths < 1:
        raise ValueError("need at least one path")

    fine = TimeGrid(float(t_horizon), fine_n)
    eval_stride = fine_n // eval_n
    delta_eval = fine.horizon / eval_n
    dep = _resolve_dependence(dependence)
    alpha = config.alpha
    q_w = _holder_exponents("wiener", config.eta, None)
    q_b = _holder_exponents("fbm", config.eta, h)
    comparison_sq = norms_comparison_constant(alpha, 0.0, fine.horizon) ** 2
    eval_cells = _norm2_weight_cells(eval_n, delta_eval, float(alpha), fine.horizon)
    n_levels = len(levels)

    sup2 = np.empty((n_levels, paths))
    norm2sq = np.empty((n_levels, paths))
    ninf_sq = np.empty((n_levels, paths))
    in_b = np.empty((n_levels, paths), dtype=bool)
    aborted = np.zeros((n_levels, paths), dtype=bool)
    tau_lt_t = np.empty(paths, dtype=bool)

    def run_chunk(ci: int) -> None:
        lo = ci * _CHUNK
        hi = min(lo + _CHUNK, paths)
        size = hi - lo
        w, bh = _chunk_noise(dep, fine, h, seed, ci, size, method)
        x_fine, ab_fine = _euler_solve_batch(coeffs, fine.nodes, w, bh, x0)
        k_eta = _holder_cumulative_batch(
            w[:, ::eval_stride], delta_eval, config.eta, q_w
        ) + _holder_cumulative_batch(bh[:, ::eval_stride], delta_eval, config.eta, q_b)
        crossed = k_eta >= config.threshold
        tau_eval = np.where(crossed.any(axis=1), crossed.argmax(axis=1), eval_n)
        tau_lt_t[lo:hi] = tau_eval < eval_n
        tau_fine = tau_eval * eval_stride
        fine_stopped = _stop_batch(x_fine, tau_fine)
        fs_eval = fine_stopped[:, ::eval_stride]
        br_fine = np.abs(fs_eval) + _increment_bracket_batch(fs_eval, delta_eval, alpha)
        ninf_fine = np.max(br_fine, axis=1)
        for li, n in enumerate(levels):
            stride = fine_n // n
            coarse_t = fine.nodes[::stride]
            x_coarse, ab_coarse = _euler_solve_batch(
                coeffs, coarse_t, w[:, ::stride], bh[:, ::stride], x0
            )
            interp = _interpolate_on_fine(coeffs, coarse_t, x_coarse, fine.nodes, w, bh, stride)
            coarse_stopped = _stop_batch(interp, tau_fine)
            bad = (ab_fine >= 0) | (ab_coarse >= 0)
            aborted[li, lo:hi] = bad
            diff = coarse_stopped - fine_stopped
            with np.errstate(invalid="ignore"):
                sup2[li, lo:hi] = np.max(diff * diff, axis=1)
                de = diff[:, ::eval_stride]
                br = np.abs(de) + _increment_bracket_batch(de, delta_eval, alpha)
                n2 = np.sum(0.5 * (br[:, :-1] ** 2 + br[:, 1:] ** 2) * eval_cells, axis=1)
                norm2sq[li, lo:hi] = n2
                ninf_d_sq = np.max(br, axis=1) ** 2
                violated = ~bad & (n2 > comparison_sq * ninf_d_sq * (1.0 + 1e-9) + 1e-300)
                if np.any(violated):
                    raise AssertionError("norm comparison ||f||_2 <= C ||f||_inf violated")
                cs_eval = coarse_stopped[:, ::eval_stride]
                br_c = np.abs(cs_eval) + _increment_bracket_batch(cs_eval, delta_eval, alpha)
                ninf_coarse = np.max(br_c, axis=1)
                ninf_sq[li, lo:hi] = ninf_coarse**2
                in_b[li, lo:hi] = (ninf_coarse + ninf_fine) <= r_bound

    n_chunks = (paths + _CHUNK - 1) // _CHUNK
    if workers is None or workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_chunk, range(n_chunks)))
    else:
        for ci in range(n_chunks):
            run_chunk(ci)

    level_stats = []
    for li, n in enumerate(levels):
        keep = ~aborted[li] & in_b[li]
        retained = int(keep.sum())
        discarded = int((~aborted[li] & ~in_b[li]).sum())
        n_aborted = int(aborted[li].sum())
        if retained:
            e_n2 = float(np.sum(norm2sq[li][keep]) / retained)
            e_sup = float(np.sum(sup2[li][keep]) / retained)
            se_n2 = float(np.std(norm2sq[li][keep], ddof=1) / math.sqrt(retained)) if retained > 1 else 0.0
            se_sup = float(np.std(sup2[li][keep], ddof=1) / math.sqrt(retained)) if retained > 1 else 0.0
            m_inf = float(np.sum(ninf_sq[li][keep]) / retained)
        else:
            e_n2 = e_sup = se_n2 = se_sup = m_inf = float("nan")
        level_stats.append(
            LevelStats(
                n=n,
                delta=fine.horizon / n,
                err2_norm2=e_n2,
                err2_sup=e_sup,
                se_norm2=se_n2,
                se_sup=se_sup,
                retained=retained,
                discarded=discarded,
                aborted=n_aborted,
                mean_norm_inf_sq=m_inf,
                restricted_fraction=retained / max(retained + discarded, 1),
            )
        )
    # order levels by decreasing delta (increasing n) as reported
    kap = coeffs.kappa
    report = ErrorReport(
        coefficients=coeffs.name,
        h=h,
        t_horizon=fine.horizon,
        x0=float(x0),
        seed=int(seed),
        paths=paths,
        levels=level_stats,
        fine_n=fine_n,
        eval_n=eval_n,
        r_bound=float(r_bound),
        alpha=alpha,
        eta=config.eta,
        threshold=config.threshold,
        epsilon=config.epsilon,
        kappa=kap,
        rate_floor=kap - alpha - config.epsilon,
        localization_fraction=float(np.mean(tau_lt_t)),
        dependence=dep.name,
        method=method,
        fit_norm2=None,
        fit_sup=None,
        degenerate=all(l.err2_norm2 == 0.0 and l.err2_sup == 0.0 for l in level_stats),
        version=_version,
    )
    fits = {}
    for functional in ("norm2", "sup"):
        try:
            fits[functional] = _fit_from_levels(level_stats, functional)
        except ValueError:
            fits[functional] = None
    return ErrorReport(**{**_asdict_shallow(report), "fit_norm2": fits["norm2"], "fit_sup": fits["sup"]})


def _asdict_shallow(report: ErrorReport) -> dict:
    d = {f: getattr(report, f) for f in report.__dataclass_fields__}
    return d
