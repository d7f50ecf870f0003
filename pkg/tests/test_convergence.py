import io
import math

import numpy as np
import pytest

from mixedsde import (
    ErrorReport,
    LevelStats,
    SolverConfig,
    TimeGrid,
    euler_solve,
    fit_rate,
    generate_noise_pair,
    mc_strong_error,
    norms_comparison_constant,
    pathwise_error,
    preset,
    stop,
)
from mixedsde.coefficients import coefficients_from_expressions


@pytest.fixture(scope="module")
def small_report():
    return mc_strong_error(
        preset("linear"), 0.7, SolverConfig(alpha=0.35), [8, 16, 32], 3, 300, seed=4, workers=1
    )


# ---------------------------------------------------------------------------
# pathwise error


def test_pathwise_error_identical_solutions():
    pair = generate_noise_pair(TimeGrid(1.0, 128), 0.7, 1)
    sol = euler_solve(preset("linear"), pair, 1.0)
    sup, n2 = pathwise_error(stop(sol, 1.0), stop(sol, 1.0), 0.35)
    assert sup == 0.0 and n2 == 0.0


def test_pathwise_error_zero_model():
    pair = generate_noise_pair(TimeGrid(1.0, 128), 0.7, 2)
    coarse = euler_solve(preset("zero"), pair, 1.0, TimeGrid(1.0, 16))
    fine = euler_solve(preset("zero"), pair, 1.0)
    sup, n2 = pathwise_error(stop(coarse, 1.0), stop(fine, 1.0), 0.35)
    assert sup == 0.0 and n2 == 0.0


def test_pathwise_error_pure_drift():
    # deterministic linear solution: interpolation reproduces it exactly
    drift = coefficients_from_expressions("drift-one", "1.0", "0.0", "0.0", "0.0", 1.5, 0.75)
    pair = generate_noise_pair(TimeGrid(1.0, 128), 0.7, 3)
    coarse = euler_solve(drift, pair, 0.0, TimeGrid(1.0, 16))
    fine = euler_solve(drift, pair, 0.0)
    sup, _ = pathwise_error(stop(coarse, 1.0), stop(fine, 1.0), 0.35)
    assert sup <= coarse.grid.delta + 1e-15


def test_pathwise_error_refuses_mismatched_noise():
    fine_grid = TimeGrid(1.0, 128)
    pair_a = generate_noise_pair(fine_grid, 0.7, 1)
    pair_b = generate_noise_pair(fine_grid, 0.7, 99)
    coarse = euler_solve(preset("linear"), pair_a, 1.0, TimeGrid(1.0, 16))
    fine = euler_solve(preset("linear"), pair_b, 1.0)
    with pytest.raises(ValueError, match="coupling"):
        pathwise_error(stop(coarse, 1.0), stop(fine, 1.0), 0.35)


def test_pathwise_error_requires_shared_tau():
    pair = generate_noise_pair(TimeGrid(1.0, 128), 0.7, 1)
    coarse = euler_solve(preset("linear"), pair, 1.0, TimeGrid(1.0, 16))
    fine = euler_solve(preset("linear"), pair, 1.0)
    with pytest.raises(ValueError, match="stopping time"):
        pathwise_error(stop(coarse, 0.5), stop(fine, 1.0), 0.35)


def test_pathwise_error_norm_matches_comparison_bound():
    pair = generate_noise_pair(TimeGrid(1.0, 256), 0.7, 5)
    coarse = euler_solve(preset("linear"), pair, 1.0, TimeGrid(1.0, 32))
    fine = euler_solve(preset("linear"), pair, 1.0)
    sup, n2 = pathwise_error(stop(coarse, 1.0), stop(fine, 1.0), 0.35)
    assert 0.0 < sup
    # the 2-norm of the difference cannot exceed C * its inf-alpha norm, and
    # the inf-alpha norm dominates the plain sup
    assert n2 <= norms_comparison_constant(0.35, 0.0, 1.0) * sup * 50


# ---------------------------------------------------------------------------
# rate fitting


def _synthetic_report(deltas, err2):
    levels = [
        LevelStats(
            n=int(round(1.0 / d)),
            delta=d,
            err2_norm2=e,
            err2_sup=e,
            se_norm2=0.0,
            se_sup=0.0,
            retained=100,
            discarded=0,
            aborted=0,
            mean_norm_inf_sq=1.0,
            restricted_fraction=1.0,
        )
        for d, e in zip(deltas, err2)
    ]
    return ErrorReport(
        coefficients="synthetic",
        h=0.7,
        t_horizon=1.0,
        x0=1.0,
        seed=0,
        paths=100,
        levels=levels,
        fine_n=1024,
        eval_n=256,
        r_bound=1000.0,
        alpha=0.35,
        eta=0.1,
        threshold=50.0,
        epsilon=0.05,
        kappa=0.5,
        rate_floor=0.1,
        localization_fraction=0.0,
        dependence="independent",
        method="circulant-embedding",
        fit_norm2=None,
        fit_sup=None,
        degenerate=False,
    )


def test_fit_rate_exact_power_law():
    deltas = np.array([1 / 8, 1 / 16, 1 / 32, 1 / 64])
    slope, se = fit_rate(_synthetic_report(deltas, deltas**0.8))
    assert slope == pytest.approx(0.8, abs=1e-12)
    assert se == pytest.approx(0.0, abs=1e-10)


def test_fit_rate_with_constant_prefactor():
    deltas = np.array([1 / 8, 1 / 16, 1 / 32, 1 / 64])
    slope, _ = fit_rate(_synthetic_report(deltas, 4.0 * deltas**1.2))
    assert slope == pytest.approx(1.2, abs=1e-12)


def test_fit_rate_excludes_zero_levels():
    deltas = np.array([1 / 8, 1 / 16, 1 / 32, 1 / 64])
    err2 = np.array([0.0, 1e-2, 1e-3, 1e-4])
    slope, _ = fit_rate(_synthetic_report(deltas, err2))
    assert math.isfinite(slope)
    with pytest.raises(ValueError, match="fewer than 3"):
        fit_rate(_synthetic_report(deltas, np.array([0.0, 0.0, 1e-3, 1e-4])))


# ---------------------------------------------------------------------------
# Monte Carlo harness


def test_zero_model_single_path_degenerate():
    rep = mc_strong_error(
        preset("zero"), 0.7, SolverConfig(alpha=0.35), [8, 16, 32], 2, 1, seed=1, workers=1
    )
    assert rep.degenerate
    assert all(l.err2_norm2 == 0.0 and l.err2_sup == 0.0 for l in rep.levels)
    assert rep.passes_rate_floor()


def test_errors_decrease_across_levels(small_report):
    e_n2 = [l.err2_norm2 for l in small_report.levels]
    e_sup = [l.err2_sup for l in small_report.levels]
    assert e_n2[0] > e_n2[1] > e_n2[2]
    assert e_sup[0] > e_sup[1] > e_sup[2]


def test_rate_floor_passes(small_report):
    assert small_report.fit_norm2 is not None and small_report.fit_sup is not None
    assert small_report.passes_rate_floor()
    assert small_report.rate_floor == pytest.approx(0.5 - 0.35 - 0.05)


def test_moment_monitor_stable(small_report):
    vals = [l.mean_norm_inf_sq for l in small_report.levels]
    assert max(vals) / min(vals) <= 2.0


def test_report_determinism_and_worker_independence(small_report):
    again = mc_strong_error(
        preset("linear"), 0.7, SolverConfig(alpha=0.35), [8, 16, 32], 3, 300, seed=4, workers=3
    )
    assert again.to_json() == small_report.to_json()


def test_clt_scaling_of_standard_errors():
    kwargs = dict(seed=11, workers=1)
    rep_small = mc_strong_error(
        preset("linear"), 0.7, SolverConfig(alpha=0.35), [8, 16], 2, 200, **kwargs
    )
    rep_large = mc_strong_error(
        preset("linear"), 0.7, SolverConfig(alpha=0.35), [8, 16], 2, 800, **kwargs
    )
    for ls, ll in zip(rep_small.levels, rep_large.levels):
        ratio = ls.se_norm2 / ll.se_norm2
        assert 1.2 < ratio < 3.2  # 2.0 expected, loose band


def test_all_paths_discarded_flags_level():
    rep = mc_strong_error(
        preset("linear"),
        0.7,
        SolverConfig(alpha=0.35),
        [8, 16, 32],
        2,
        20,
        1e-9,  # impossible restriction radius
        seed=2,
        workers=1,
    )
    assert all(l.retained == 0 and l.discarded == 20 for l in rep.levels)
    assert rep.fit_norm2 is None and not rep.degenerate
    with pytest.raises(ValueError):
        fit_rate(rep)


def test_localization_activates_for_small_threshold():
    cfg = SolverConfig(alpha=0.35, threshold=1e-6)
    rep = mc_strong_error(preset("linear"), 0.7, cfg, [8, 16, 32], 2, 20, seed=3, workers=1)
    assert rep.localization_fraction == 1.0


def test_csv_formats(small_report):
    buf = io.StringIO()
    small_report.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "level_n,delta,err2_norm2,err2_sup,se_norm2,se_sup,discarded,aborted"
    assert len(lines) == 1 + len(small_report.levels)
    buf = io.StringIO()
    small_report.write_loglog_csv(buf)
    assert buf.getvalue().splitlines()[0] == "level_n,log10_delta,log10_err2_norm2,log10_err2_sup"


def test_json_roundtrip(small_report):
    import json

    payload = json.loads(small_report.to_json())
    assert payload["paths"] == 300
    assert len(payload["levels"]) == 3
    assert payload["levels"][0]["n"] == 8
    assert payload["rate_floor"] == pytest.approx(0.1)


def test_level_validation():
    with pytest.raises(ValueError, match="dyadic"):
        mc_strong_error(preset("linear"), 0.7, SolverConfig(alpha=0.35), [8, 12], 2, 4, workers=1)
    with pytest.raises(ValueError, match="distinct"):
        mc_strong_error(preset("linear"), 0.7, SolverConfig(alpha=0.35), [8, 8], 2, 4, workers=1)


def test_volterra_dependence_supported():
    rep = mc_strong_error(
        preset("linear"),
        0.7,
        SolverConfig(alpha=0.35),
        [8, 16, 32],
        2,
        50,
        seed=6,
        dependence="volterra-from-same-wiener",
        workers=1,
    )
    assert rep.dependence == "volterra-from-same-wiener"
    assert all(l.err2_norm2 > 0 for l in rep.levels)
