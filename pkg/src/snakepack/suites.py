"""Named verification suites: each check pins a closed-form target.

A suite is a named list of checks with a flat parameter schema; running one
produces a checks CSV, a deterministic JSON report, a run-meta sidecar and
plot files.  Statistical gates run on the fixed seeds committed in the
defaults so repeated runs are byte-identical; pass ``--seed`` for a fresh
draw (3-sigma gates then fail at their natural few-per-thousand rate).
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from . import kernels, packing, palm, snake, tree
from .gauges import gauge_g, gauge_k
from .occupation import build_spatial_index, density_profile, estimate_hitting
from .reports import (
    CheckResult,
    check_abs,
    check_below,
    check_rel,
    save_bar_figure,
    save_curve_figure,
    save_ecdf_figure,
    save_hist_figure,
    save_loglog_fit_figure,
    write_checks_csv,
    write_report_json,
    write_run_meta,
)
from .stats import ks_statistic, mc_mean

__all__ = ["SUITES", "ConfigError", "run_suite", "parse_overrides", "load_config_file"]


class ConfigError(ValueError):
    """Bad suite name, unknown key, or malformed assignment."""


def maxwell_cdf(x):
    """CDF of the radius of a standard 3-d Gaussian."""
    x = np.asarray(x, dtype=float)
    return special.erf(x / math.sqrt(2.0)) - np.sqrt(2.0 / np.pi) * x * np.exp(-0.5 * x * x)


def ito_tail_quadrature(lam, s_min):
    """int_{s_min}^inf (1 - e^(-lam t)) c t^(-3/2) dt by adaptive quadrature."""
    val, _ = integrate.quad(
        lambda t: (1.0 - math.exp(-lam * t)) * kernels.ITO_DENSITY_CONST * t ** (-1.5),
        s_min, np.inf, limit=200,
    )
    return val


def ito_head_quadrature(lam, s_min):
    """int_0^{s_min} of the same integrand (the analytic truncation remainder)."""
    val, _ = integrate.quad(
        lambda t: (1.0 - math.exp(-lam * t)) * kernels.ITO_DENSITY_CONST * t ** (-1.5),
        0.0, s_min, limit=200,
    )
    return val


def _pool_map(fn, args, workers):
    if workers <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args))


# ---------------------------------------------------------------------------
# kernels suite
# ---------------------------------------------------------------------------

KERNELS_DEFAULTS = {
    "exit_n": 100000, "exit_dt": 1e-3,
    "pitman_n": 10000, "pitman_dt": 1e-3,
    "fluct_n": 200000, "fluct_s_min": 0.04, "fluct_lambda": 1.0,
    "stable_n": 100000,
    "shorokhod_n": 1000000,
    "escape_n": 100000, "escape_ks_n": 10000,
    "chunks": 8,
}


def _exit_chunk(args):
    r, dt, n, seed, stream = args
    return kernels.first_exit_times(r, dt, n, seed, stream=stream)


def run_kernels_suite(p, seed, out_dir=None, workers=1):
    checks = []

    # interval exit time: Laplace transform at lambda = 1
    per = p["exit_n"] // p["chunks"]
    parts = _pool_map(
        _exit_chunk,
        [(1.0, p["exit_dt"], per, seed, 100 + j) for j in range(p["chunks"])],
        workers,
    )
    theta = np.concatenate(parts)
    est, se = mc_mean(np.exp(-theta))
    target = 1.0 / math.cosh(math.sqrt(2.0))
    checks.append(check_abs(
        "exit_time_laplace", est, target, 3.0 * se,
        provenance="E exp(-theta_1) = 1/cosh(sqrt(2)); bridge-corrected crossings",
    ))
    checks.append(check_rel(
        "exit_time_mean", float(theta.mean()), 1.0, 0.02,
        provenance="E theta_r = r^2 (derivative of the sech transform at 0)",
    ))

    # Pitman transform marginal at t = 1 against the Maxwell law
    vals = kernels.bessel3_values_at(1.0, p["pitman_dt"], p["pitman_n"], seed, stream=7)
    dist, crit = ks_statistic(vals, cdf=maxwell_cdf)
    checks.append(check_below(
        "pitman_maxwell_ks", dist, crit,
        provenance="B - 2 inf B at t=1 is the radius of a standard 3-d Gaussian",
    ))
    checks.append(check_rel(
        "bessel3_mean", float(vals.mean()), 2.0 * math.sqrt(2.0 / math.pi), 0.02,
        provenance="Maxwell mean 2 sqrt(2/pi)",
    ))

    # excursion-measure fluctuation identity at lambda
    lam, s_min = p["fluct_lambda"], p["fluct_s_min"]
    rng = kernels.make_rng(seed, 11)
    sig = kernels.sample_ito_durations(s_min, p["fluct_n"], rng)
    mc_trunc = kernels.ito_mass(s_min) * float(np.mean(1.0 - np.exp(-lam * sig)))
    quad_trunc = ito_tail_quadrature(lam, s_min)
    checks.append(check_rel(
        "ito_truncated_laplace", mc_trunc, quad_trunc, 0.02,
        provenance="quadrature of (1-e^(-lam t)) c t^(-3/2) over {t >= s_min}",
    ))
    total = mc_trunc + ito_head_quadrature(lam, s_min)
    checks.append(check_rel(
        "ito_total_laplace", total, math.sqrt(lam / 2.0), 0.02,
        provenance="N(1 - e^(-lam sigma)) = sqrt(lam/2)",
    ))
    checks.append(check_abs(
        "ito_mass_unit", kernels.ito_mass(1.0 / (2.0 * math.pi)), 1.0, 1e-12,
        provenance="(2 pi s_min)^(-1/2) at s_min = 1/(2 pi)",
    ))

    # positive stable subordinator with exponent 1/4, speed 128
    s4 = kernels.stable_draws(0.25, 128.0 ** 0.25, p["stable_n"], seed, stream=13)
    est, se = mc_mean(np.exp(-s4))
    checks.append(check_abs(
        "stable_quarter_laplace", est, math.exp(-(128.0) ** 0.25), 3.0 * se,
        provenance="E exp(-S_1) = exp(-(128)^(1/4))",
    ))

    # lower-tail asymptotic of the same subordinator
    from scipy import optimize

    x_star = optimize.brentq(lambda x: kernels.shorokhod_tail(x) - 1e-3, 1e-4, 1.0)
    s_big = kernels.stable_draws(0.25, 128.0 ** 0.25, p["shorokhod_n"], seed, stream=17)
    p_emp = float(np.mean(s_big <= x_star))
    ratio = p_emp / kernels.shorokhod_tail(x_star)
    checks.append(check_abs(
        "shorokhod_tail_ratio", ratio, 1.0, 0.25,
        provenance="C11 x^(1/6) exp(-(x/C12)^(-1/3)) lower-tail asymptotic",
        detail={"x_star": x_star, "p_emp": p_emp},
    ))

    # escape process: Laplace transform and additivity in the level
    g1 = kernels.stable_draws(0.5, math.sqrt(2.0), p["escape_n"], seed, stream=19)
    est, se = mc_mean(np.exp(-g1))
    checks.append(check_abs(
        "escape_laplace", est, math.exp(-math.sqrt(2.0)), 3.0 * se,
        provenance="E exp(-gamma(1)) = exp(-sqrt(2))",
    ))
    m = p["escape_ks_n"]
    ga = kernels.stable_draws(0.5, 0.6 * math.sqrt(2.0), m, seed, stream=23)
    gb = kernels.stable_draws(0.5, 0.4 * math.sqrt(2.0), m, seed, stream=29)
    gfull = kernels.stable_draws(0.5, 1.0 * math.sqrt(2.0), m, seed, stream=31)
    dist, crit = ks_statistic(ga + gb, gfull)
    checks.append(check_below(
        "escape_additivity_ks", dist, crit,
        provenance="independent increments of the stable(1/2) escape subordinator",
    ))

    if out_dir:
        lam_grid = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
        mc_curve = [float(np.mean(np.exp(-l * theta))) for l in lam_grid]
        an_curve = 1.0 / np.cosh(np.sqrt(2.0 * lam_grid))
        save_curve_figure(
            os.path.join(out_dir, "fig_exit_laplace.png"), lam_grid,
            [mc_curve, an_curve], ["Monte Carlo", "1/cosh(sqrt(2 lam))"],
            "lambda", "E exp(-lam theta_1)", "interval exit-time transform",
        )
        xs = np.linspace(0.0, float(vals.max()), 200)
        sv = np.sort(vals)
        save_curve_figure(
            os.path.join(out_dir, "fig_pitman.png"), xs,
            [np.searchsorted(sv, xs) / sv.size, maxwell_cdf(xs)],
            ["empirical CDF", "Maxwell CDF"],
            "value", "CDF", "Pitman marginal at t = 1",
        )
    return checks


# ---------------------------------------------------------------------------
# tree suite
# ---------------------------------------------------------------------------

TREE_DEFAULTS = {
    "ct_n": 10000, "ct_dt": 1e-3, "escape_multiple": 100.0,
    "sech_n": 6000, "sech_dt": 2.5e-4, "sech_r": 1.0, "sech_lambda": 1.0,
    "typidens_steps": 200000, "typidens_t": 120, "typidens_slack": 0.3,
    "chunks": 4,
}


def _occ_chunk(args):
    r_grid, dt, n, seed, stream, mult = args
    return kernels.bessel_ball_occupations(
        r_grid, dt, n, seed, stream=stream, escape_multiple=mult
    )


def run_tree_suite(p, seed, out_dir=None, workers=1):
    checks = []

    # occupation of the unit tree ball vs interval exit times (two-sample KS)
    per = p["ct_n"] // p["chunks"]
    occ_parts = _pool_map(
        _occ_chunk,
        [((1.0,), p["ct_dt"], per, seed, 41 + j, p["escape_multiple"]) for j in range(p["chunks"])],
        workers,
    )
    occ = np.concatenate([o[:, 0] for o in occ_parts])
    theta = kernels.first_exit_times(1.0, p["ct_dt"], p["ct_n"], seed, stream=57)
    dist, crit = ks_statistic(occ, theta)
    checks.append(check_below(
        "occupation_exit_ks", dist, crit,
        provenance="Bessel(3) ball occupation equals the interval exit time in law",
    ))

    # two-sided marked-point occupations: squared-sech transform
    lam, r = p["sech_lambda"], p["sech_r"]
    left, right = tree.bismut_samples(
        a=2.0 * r, r_grid=[r], dt=p["sech_dt"], n=p["sech_n"], seed=seed,
        stream=3, escape_multiple=p["escape_multiple"],
    )
    tot = left[:, 0] + right[:, 0]
    est, se = mc_mean(np.exp(-lam * tot))
    target = math.cosh(r * math.sqrt(2.0 * lam)) ** -2
    checks.append(check_abs(
        "two_sided_sech2", est, target, 3.0 * se,
        provenance="E exp(-lam(b+b')) = cosh(r sqrt(2 lam))^-2",
    ))

    # low-density fraction curve (report-only): a(t,r) >= (1/4)(1-slack) k(r)
    exc = kernels.sample_normalized_excursion(p["typidens_steps"], seed, stream=71)
    idx = tree.build_contour_index(exc)
    k = gauge_k()
    r_levels = 2.0 ** -np.arange(2, 8)
    rng = kernels.make_rng(seed, 73)
    times = rng.random(p["typidens_t"])
    fractions = []
    for r_ in r_levels:
        floor = 0.25 * (1.0 - p["typidens_slack"]) * k(r_)
        good = sum(1 for t in times if tree.ball_occupation(idx, t, r_) >= floor)
        fractions.append(good / len(times))
    checks.append(CheckResult(
        name="low_density_fraction_trend",
        value=float(fractions[-1]), target=1.0, tol=1.0, gated=False,
        passed=True,
        provenance="fraction of times with a(t,r)/k(r) >= (1/4)(1-slack), report-only",
        detail={"radii": r_levels.tolist(), "fractions": fractions},
    ))

    if out_dir:
        save_curve_figure(
            os.path.join(out_dir, "fig_low_density.png"), r_levels,
            [fractions], ["fraction of grid times"],
            "r", "fraction", "tree ball occupation above (1/4)(1-slack) k(r)",
            logx=True,
        )
        save_ecdf_figure(
            os.path.join(out_dir, "fig_occupation_vs_exit.png"),
            [occ, theta], ["tree ball occupation", "interval exit time"],
            "value", "occupation vs exit-time laws",
        )
    return checks


# ---------------------------------------------------------------------------
# snake suite
# ---------------------------------------------------------------------------

SNAKE_DEFAULTS = {
    "cov_steps": 2000, "cov_replicas": 2000, "cov_pairs": 50, "cov_dim": 3,
    "cov_tol": 0.15,
    "box_steps": 1000000, "box_dim": 5, "box_eps_hi": 0.5, "box_eps_lo": 0.0625,
    "box_eps_count": 8, "box_lo": 3.0, "box_hi": 4.5,
}


def run_snake_suite(p, seed, out_dir=None, workers=1):
    checks = []

    # conditional Gaussian law over a fixed lifetime excursion
    exc = kernels.sample_normalized_excursion(p["cov_steps"], seed, stream=101)
    idx = tree.build_contour_index(exc)
    rng = kernels.make_rng(seed, 103)
    n_grid = p["cov_steps"] + 1
    pairs = []
    while len(pairs) < p["cov_pairs"]:
        i, j = int(rng.integers(n_grid)), int(rng.integers(n_grid))
        if tree.tree_distance(idx, i * exc.dt, j * exc.dt) > 1e-4:
            pairs.append((i, j))
    grid_indices = sorted({g for pr in pairs for g in pr})
    heads = snake.snake_heads_at(
        exc, p["cov_dim"], grid_indices, p["cov_replicas"], seed, stream=105
    )
    pos = {g: c for c, g in enumerate(grid_indices)}
    worst = 0.0
    dists, emps = [], []
    for i, j in pairs:
        d = tree.tree_distance(idx, i * exc.dt, j * exc.dt)
        diff = heads[:, pos[i], :] - heads[:, pos[j], :]
        emp = float(np.mean(diff ** 2))  # per-coordinate variance
        worst = max(worst, abs(emp - d) / d)
        dists.append(d)
        emps.append(emp)
    checks.append(check_abs(
        "snake_covariance_worst_rel", worst, 0.0, p["cov_tol"],
        provenance="per-coordinate Var(head_t - head_s) equals the tree distance",
    ))

    # isotropy: off-diagonal second moments vanish
    i, j = pairs[0]
    diff = heads[:, pos[i], :] - heads[:, pos[j], :]
    offdiag = float(np.mean(diff[:, 0] * diff[:, 1]))
    se_off = float(np.std(diff[:, 0] * diff[:, 1]) / math.sqrt(diff.shape[0]))
    checks.append(check_abs(
        "snake_isotropy_offdiag", offdiag, 0.0, 3.0 * se_off,
        provenance="independent coordinates: E[dx dy] = 0",
    ))

    # normalised snake invariants
    ise = snake.sample_ise(4096, 5, seed, stream=107)
    cloud = snake.occupation_cloud(ise)
    checks.append(check_abs(
        "ise_total_mass", cloud.total_mass, 1.0, 1e-9,
        provenance="duration-1 excursion with weight dt atoms",
    ))

    # box-counting dimension of a long head range
    ise_big = snake.sample_ise(p["box_steps"], p["box_dim"], seed, stream=109)
    eps = np.geomspace(p["box_eps_hi"], p["box_eps_lo"], p["box_eps_count"])
    slope, counts = snake.range_box_dimension(ise_big, eps)
    mid = 0.5 * (p["box_lo"] + p["box_hi"])
    half = 0.5 * (p["box_hi"] - p["box_lo"])
    checks.append(check_abs(
        "range_box_dimension", slope, mid, half,
        provenance="box-count slope of the d=5 head range; upper bound 4",
        detail={"eps": eps.tolist(), "counts": [int(c) for c in counts]},
    ))

    if out_dir:
        save_loglog_fit_figure(
            os.path.join(out_dir, "fig_box_dimension.png"), eps, counts, slope,
            "box counting of the head range",
        )
        save_curve_figure(
            os.path.join(out_dir, "fig_covariance.png"),
            np.asarray(dists), [np.asarray(emps), np.asarray(dists)],
            ["empirical per-coordinate variance", "tree distance"],
            "tree distance", "variance", "snake conditional covariance",
        )
    return checks


# ---------------------------------------------------------------------------
# occupation suite (hitting scaling)
# ---------------------------------------------------------------------------

OCCUPATION_DEFAULTS = {
    "hit_n": 4000, "hit_distance": 2.5, "hit_r": 1.0, "hit_s_min": 1.0,
    "hit_sigma_cap": 20000.0, "hit_scale": 2.0, "hit_tol": 0.15,
    "shift_tol_se": 3.0,
}


def run_occupation_suite(p, seed, out_dir=None, workers=1):
    checks = []
    d = 5
    y = np.zeros(d)
    y[0] = p["hit_distance"]
    r = p["hit_r"]
    s = p["hit_scale"]

    base = estimate_hitting(
        y, np.zeros(d), r, p["hit_s_min"], p["hit_n"], seed, stream_offset=0,
        dt=p["hit_s_min"] / 100.0, sigma_cap=p["hit_sigma_cap"],
    )
    scaled = estimate_hitting(
        s * y, np.zeros(d), s * r, s ** 4 * p["hit_s_min"], p["hit_n"], seed,
        stream_offset=10 * (p["hit_n"] + 2),
        dt=s ** 4 * p["hit_s_min"] / 100.0, sigma_cap=s ** 4 * p["hit_sigma_cap"],
    )
    predicted = base.value / (s * s)
    checks.append(check_rel(
        "hitting_scaling", scaled.value, predicted, p["hit_tol"],
        provenance="u_{x,r}(y) = r^-2 u(r^-1 (y-x)) at matched relative truncation",
        detail={"base": base.value, "scaled": scaled.value,
                "base_se": base.se, "scaled_se": scaled.se},
    ))

    # translation invariance: estimates at shifted configurations agree
    v = np.zeros(d)
    v[1] = 0.8
    shifted = estimate_hitting(
        y + v, v, r, p["hit_s_min"], p["hit_n"], seed,
        stream_offset=20 * (p["hit_n"] + 2),
        dt=p["hit_s_min"] / 100.0, sigma_cap=p["hit_sigma_cap"],
    )
    se_c = math.hypot(base.se, shifted.se)
    checks.append(check_abs(
        "hitting_translation", shifted.value, base.value, p["shift_tol_se"] * se_c,
        provenance="u_{x,r}(y) = u_{0,r}(y-x)",
    ))

    # monotonicity in the target radius
    small = estimate_hitting(
        y, np.zeros(d), 0.5 * r, p["hit_s_min"], p["hit_n"] // 2, seed,
        stream_offset=30 * (p["hit_n"] + 2),
        dt=p["hit_s_min"] / 100.0, sigma_cap=p["hit_sigma_cap"],
    )
    checks.append(check_below(
        "hitting_monotone_radius", small.value, base.value + 3.0 * (small.se + base.se),
        provenance="smaller target balls are hit less often",
    ))

    if out_dir:
        save_bar_figure(
            os.path.join(out_dir, "fig_hitting_scaling.png"),
            ["base r", "scaled / r^-2 law", "shifted"],
            [base.value, scaled.value * s * s, shifted.value],
            "estimate", "hitting estimates under scaling and translation",
        )
    return checks


# ---------------------------------------------------------------------------
# palm suite
# ---------------------------------------------------------------------------

PALM_DEFAULTS = {
    "green_n": 60000, "green_s_lo": 0.01, "green_dt": 2e-4,
    "green_sigma_cap": 1024.0, "green_tol": 0.10,
    "count_a": 2.0, "count_s_min": 0.5, "count_dt": 0.005, "count_reps": 400,
    "sum_r": 0.05, "sum_s_min": 1e-4, "sum_n": 20000, "sum_lambda": 1.0,
    "er_levels": "4,5", "er_reps": 40, "er_s_min": 0.01, "er_dt": 1e-4,
}


def run_palm_suite(p, seed, out_dir=None, workers=1):
    checks = []
    d = 5

    # first-moment occupation formula against the exact Green integral
    center = np.zeros(d)
    center[0] = 1.0
    strata = [0.1, 1.0, 10.0, 100.0]
    alloc = [0.58, 0.27, 0.09, 0.04, 0.02]
    stats = snake.truncated_snake_ball_stats(
        origin=np.zeros(d), center=center, radius=0.3, s_min=p["green_s_lo"],
        dt=p["green_dt"], n=p["green_n"], seed=seed, sigma_cap=p["green_sigma_cap"],
        sigma_strata=strata, allocation=alloc, max_grid=200000,
    )
    mean, se = snake.stratified_mean_se(stats, stats.occupations)
    est = kernels.ito_mass(p["green_s_lo"]) * mean
    target = palm.green_ball_potential(1.0, 0.3)
    checks.append(check_rel(
        "occupation_first_moment", est, target, p["green_tol"],
        provenance="N_0<M, 1_B> equals the Green integral (2/15) rho^5 |x|^-3",
        detail={"se": kernels.ito_mass(p["green_s_lo"]) * se},
    ))

    # Poisson decoration counts along a backbone
    rate = 4.0 * kernels.ito_mass(p["count_s_min"])
    counts = [
        palm.sample_palm_cloud(
            p["count_a"], p["count_s_min"], p["count_dt"], d, seed, stream=500 + k,
            sigma_cap=4.0, keep_decorations=False,
        ).n_decorations
        for k in range(p["count_reps"])
    ]
    est, se = mc_mean(counts)
    checks.append(check_abs(
        "palm_decoration_count", est, rate * p["count_a"], 3.0 * se,
        provenance="Poisson rate 4 (2 pi s_min)^(-1/2) per unit backbone time",
    ))

    # decoration-sum subordinator: Laplace transform with truncation-exact target
    r, s_min, lam = p["sum_r"], p["sum_s_min"], p["sum_lambda"]
    rng = kernels.make_rng(seed, 333)
    rate = 4.0 * kernels.ito_mass(s_min)
    svals = np.empty(p["sum_n"])
    gammas = kernels.stable_draws(0.5, 2.0 * r * math.sqrt(2.0), p["sum_n"], seed, stream=34)
    for i in range(p["sum_n"]):
        c = rng.poisson(rate * gammas[i])
        svals[i] = kernels.sample_ito_durations(s_min, c, rng).sum() if c else 0.0
    est, se = mc_mean(np.exp(-lam * svals))
    target = math.exp(-palm.palm_sum_laplace_exponent(lam, s_min, r))
    checks.append(check_abs(
        "decoration_sum_laplace", est, target, 3.0 * se,
        provenance="E exp(-lam S_r) = exp(-2r sqrt(2 Psi_trunc(lam)))",
    ))

    # escape-time indicator trend over scales (report-only)
    levels = [int(t) for t in str(p["er_levels"]).split(",")]
    fracs = []
    for n_level in levels:
        vals = [
            palm.upperbound_statistic(
                n_level, p["er_s_min"], p["er_dt"], seed, stream=700 + 97 * n_level + k,
                dim=d, hit_tests=True, escape_multiple=20.0,
            )
            for k in range(p["er_reps"])
        ]
        fracs.append(float(np.mean([v.e_indicator for v in vals])))
    checks.append(CheckResult(
        name="late_hit_avoidance_trend", value=float(min(fracs)), target=0.0,
        tol=1.0, gated=False, passed=True,
        provenance="P(no decoration born after gamma(2r) hits the r-ball), report-only",
        detail={"levels": levels, "fractions": fracs},
    ))

    if out_dir:
        save_bar_figure(
            os.path.join(out_dir, "fig_first_moment.png"),
            ["Monte Carlo", "Green integral"], [est if False else checks[0].value, target],
            "value", "ball occupation first moment",
        )
        save_curve_figure(
            os.path.join(out_dir, "fig_late_hit.png"), levels, [fracs],
            ["fraction avoiding the ball"], "scale index n", "fraction",
            "late-decoration avoidance probability",
        )
    return checks


# ---------------------------------------------------------------------------
# mild-equation suite
# ---------------------------------------------------------------------------

MILD_DEFAULTS = {
    "rho": 0.3, "amplitude": 1.0, "s_min": 0.01, "n_replicas": 2500,
    "grid": "0.15,0.35,0.45,0.6,0.75", "tol": 0.15,
}


def run_mild_suite(p, seed, out_dir=None, workers=1):
    grid = [float(t) for t in str(p["grid"]).split(",")]
    rep = palm.check_mild_equation(
        ("indicator", p["rho"], p["amplitude"]), grid, p["s_min"],
        p["n_replicas"], seed,
    )
    checks = [check_abs(
        "mild_equation_max_residual", rep.max_relative_residual, 0.0, p["tol"],
        provenance="u + 2 G(u^2) = G(f) for the time-integrated branching equation",
        detail={
            "radii": rep.radii.tolist(),
            "residuals": rep.residuals.tolist(),
            "first_moment_ratios": rep.first_moment_ratios.tolist(),
        },
    )]
    try:
        palm.check_mild_equation(("constant", 1.0), grid, p["s_min"], 10, seed)
        rejected = 0.0
    except ValueError:
        rejected = 1.0
    checks.append(check_abs(
        "mild_equation_rejects_constant", rejected, 1.0, 0.0,
        provenance="non-integrable constant profiles are rejected as inputs",
    ))
    if out_dir:
        save_bar_figure(
            os.path.join(out_dir, "fig_mild_residuals.png"),
            [f"R={r:g}" for r in rep.radii], rep.residuals,
            "relative residual", "time-integrated equation residuals",
            hline=(p["tol"], "tolerance"),
        )
    return checks


# ---------------------------------------------------------------------------
# dyadic suite
# ---------------------------------------------------------------------------

DYADIC_DEFAULTS = {"dims": "5,6,7", "levels": 10, "random_points": 10000}


def run_dyadic_suite(p, seed, out_dir=None, workers=1):
    checks = []
    dims = [int(t) for t in str(p["dims"]).split(",")]
    rng = kernels.make_rng(seed, 900)
    violations = {"separation": 0, "nesting": 0, "containment": 0, "radius_window": 0}
    total = 0
    for d in dims:
        pexp = packing.dyadic_offset(d)
        # lattice geometry at each level: small cubes disjoint, ball nesting
        if not 2.0 ** pexp > 2.0 * math.sqrt(d):
            violations["nesting"] += 1
        for n in range(p["levels"] + 1):
            small = 2.0 ** (-n - pexp)
            cell = packing.DyadicCell(n=n, y=tuple([0.0] * d), d=d)
            nbr = packing.DyadicCell(
                n=n, y=tuple([small] + [0.0] * (d - 1)), d=d
            )
            probe = np.full(d, 0.49 * small)
            if packing.cell_contains(cell, probe) and packing.cell_contains(nbr, probe):
                violations["separation"] += 1
            # ball sandwich: corners of the small cube inside the small closed
            # ball, big closed ball inside the big cube
            corner = np.full(d, 0.5 * small)
            if np.linalg.norm(corner) > 0.5 * small * math.sqrt(d) + 1e-12:
                violations["nesting"] += 1
            if small * math.sqrt(d) > 0.5 * 2.0 ** (-n) + 1e-12:
                violations["nesting"] += 1
        # random locate checks
        m = p["random_points"] // len(dims)
        total += m
        r_hi = 1.0 / (2.0 * d)
        for _ in range(m):
            r = math.exp(rng.uniform(math.log(1e-5), math.log(r_hi)))
            x = rng.uniform(-2.0, 2.0, size=d)
            cell = packing.locate_cell(x, r, d)
            if not packing.cell_contains(cell, x):
                violations["containment"] += 1
            if not packing.big_cube_in_ball(cell, x, r):
                violations["containment"] += 1
            lo = 0.5 * (1.0 + 2.0 ** (-cell.p)) * math.sqrt(d) * 2.0 ** (-cell.n)
            if not (lo < r <= 2.0 * lo):
                violations["radius_window"] += 1
    for name, v in violations.items():
        checks.append(check_abs(
            f"dyadic_{name}_violations", float(v), 0.0, 0.0,
            provenance="deterministic dyadic-cube decomposition properties",
            detail={"random_points": total},
        ))
    return checks


# ---------------------------------------------------------------------------
# packing suite
# ---------------------------------------------------------------------------

PACKING_DEFAULTS = {
    "instances": 18, "max_centers": 12, "radius_levels": 3, "dim": 2,
    "eps": 0.25,
}


def exhaustive_packing_value(points, radii, gauge):
    """Exact supremum of sum g(r_m) over disjoint closed-ball packings.

    Depth-first search over per-centre radius choices with pruning; oracle
    for instances of at most a dozen centres.
    """
    pts = np.asarray(points, dtype=float)
    radii = sorted(radii, reverse=True)
    gvals = [gauge(r) for r in radii]
    n = pts.shape[0]
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
    best = 0.0
    upper_rest = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        upper_rest[i] = upper_rest[i + 1] + gvals[0]

    chosen = []

    def feasible(i, r):
        for j, rj in chosen:
            if d2[i, j] <= (r + rj) ** 2:
                return False
        return True

    def rec(i, acc):
        nonlocal best
        if acc + upper_rest[i] <= best:
            return
        if i == n:
            best = max(best, acc)
            return
        for r, g in zip(radii, gvals):
            if feasible(i, r):
                chosen.append((i, r))
                rec(i + 1, acc + g)
                chosen.pop()
        rec(i + 1, acc)  # skip centre i

    rec(0, 0.0)
    return best


def run_packing_suite(p, seed, out_dir=None, workers=1):
    from .gauges import power_gauge
    from .occupation import OccupationMeasure

    checks = []
    rng = kernels.make_rng(seed, 1000)
    gauge = power_gauge(float(p["dim"]))
    worst_ratio = math.inf
    any_exceed = 0
    ratios = []
    for k in range(p["instances"]):
        m = int(rng.integers(4, p["max_centers"] + 1))
        pts = rng.uniform(0.0, 1.0, size=(m, p["dim"]))
        cloud = OccupationMeasure(
            dim=p["dim"], atoms=pts, weights=np.full(m, 1.0)
        )
        index = build_spatial_index(cloud, cell=p["eps"])
        radii = [p["eps"] * 2.0 ** (-j) for j in range(p["radius_levels"])]
        greedy = packing.epsilon_packing(
            index, lambda a: True, p["eps"], gauge,
            radius_levels=p["radius_levels"],
        ).value
        exact = exhaustive_packing_value(pts, radii, gauge)
        if greedy > exact + 1e-9:
            any_exceed += 1
        if exact > 0:
            ratio = greedy / exact
            ratios.append(ratio)
            worst_ratio = min(worst_ratio, ratio)
    checks.append(check_abs(
        "greedy_never_exceeds_exact", float(any_exceed), 0.0, 0.0,
        provenance="greedy is a lower bound of the packing supremum",
    ))
    checks.append(check_below(
        "greedy_at_least_half_exact", 0.5, worst_ratio,
        provenance="greedy attains at least half the exhaustive supremum on oracle instances",
        detail={"worst_ratio": worst_ratio},
    ))
    if out_dir:
        save_hist_figure(
            os.path.join(out_dir, "fig_greedy_ratio.png"), ratios, 12,
            "greedy / exact", "packing estimator against exhaustive search",
            vlines=[(0.5, "half"), (1.0, "exact")],
        )
    return checks


# ---------------------------------------------------------------------------
# kappa suite
# ---------------------------------------------------------------------------

KAPPA_DEFAULTS = {
    "d": 5, "a": 0.4, "s_min": 5e-5, "dt": 5e-7, "sigma_cap": 1.0,
    "r_grid": "0.25,0.125", "n_replicas": 40, "floor_fraction": 0.9,
}


def run_kappa_suite(p, seed, out_dir=None, workers=1):
    cfg = packing.KappaConfig(
        d=int(p["d"]), a=p["a"], s_min=p["s_min"], dt=p["dt"],
        sigma_cap=p["sigma_cap"],
        r_grid=tuple(float(t) for t in str(p["r_grid"]).split(",")),
        n_replicas=int(p["n_replicas"]), seed=seed,
    )
    report = packing.kappa_experiment(cfg)
    summary = report.summary()
    checks = [check_below(
        "density_minima_above_half_floor", p["floor_fraction"],
        summary["frac_above_half_lower"],
        provenance="fraction of grid-minimum ratios above half the 2^-10 lower bracket",
        detail=summary,
    )]
    checks.append(CheckResult(
        name="density_bracket_report", value=summary["median"],
        target=report.lower_bracket, tol=report.upper_bracket, gated=False,
        passed=True,
        provenance="distribution of grid-minimum M(B(0,r))/g(r) vs bracket [2^-10, 27/2]",
        detail=summary,
    ))
    if out_dir:
        save_hist_figure(
            os.path.join(out_dir, "fig_kappa_minima.png"),
            np.log10(np.maximum(report.minima, 1e-12)), 16,
            "log10 grid-minimum ratio", "density ratio minima at decorated origins",
            vlines=[(math.log10(report.lower_bracket), "2^-10"),
                    (math.log10(report.upper_bracket), "27/2")],
        )
        if out_dir:
            rows = []
            for k in range(report.ratios.shape[0]):
                for r, q in zip(sorted(cfg.r_grid, reverse=True), report.ratios[k]):
                    rows.append(f"{k},{r:.17g},{q:.17g}")
            with open(os.path.join(out_dir, "kappa_ratios.csv"), "w") as fh:
                fh.write("point_id,r,ratio\n")
                fh.write("\n".join(rows) + ("\n" if rows else ""))
    return checks


# ---------------------------------------------------------------------------
# registry and the runner
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuiteSpec:
    name: str
    defaults: dict
    runner: object
    description: str


SUITES = {
    "kernels": SuiteSpec("kernels", KERNELS_DEFAULTS, run_kernels_suite,
                         "source-process laws: exit times, Bessel(3), stable draws"),
    "tree": SuiteSpec("tree", TREE_DEFAULTS, run_tree_suite,
                      "tree occupations: exit-time identity, two-sided transform"),
    "snake": SuiteSpec("snake", SNAKE_DEFAULTS, run_snake_suite,
                       "head covariance, normalised snake, box dimension"),
    "occupation": SuiteSpec("occupation", OCCUPATION_DEFAULTS, run_occupation_suite,
                            "hitting estimates: scaling and translation laws"),
    "palm": SuiteSpec("palm", PALM_DEFAULTS, run_palm_suite,
                      "decorated backbones: first moments, decoration sums"),
    "mild": SuiteSpec("mild", MILD_DEFAULTS, run_mild_suite,
                      "time-integrated branching equation residuals"),
    "dyadic": SuiteSpec("dyadic", DYADIC_DEFAULTS, run_dyadic_suite,
                        "deterministic dyadic-cube decomposition properties"),
    "packing": SuiteSpec("packing", PACKING_DEFAULTS, run_packing_suite,
                         "greedy packing estimator against exhaustive search"),
    "kappa": SuiteSpec("kappa", KAPPA_DEFAULTS, run_kappa_suite,
                       "density-ratio bracket experiment at decorated origins"),
}

DEFAULT_SEEDS = {name: 20240500 + i for i, name in enumerate(sorted(SUITES))}


def parse_overrides(pairs, defaults):
    """Parse key=value strings against a schema; unknown keys are rejected."""
    out = {}
    for raw in pairs or []:
        if "=" not in raw:
            raise ConfigError(f"malformed assignment '{raw}' (expected key=value)")
        key, value = raw.split("=", 1)
        key = key.strip()
        if key not in defaults:
            raise ConfigError(f"unknown key '{key}'")
        ref = defaults[key]
        try:
            if isinstance(ref, bool):
                out[key] = value.lower() in ("1", "true", "yes")
            elif isinstance(ref, int):
                out[key] = int(value)
            elif isinstance(ref, float):
                out[key] = float(value)
            else:
                out[key] = value
        except ValueError as exc:
            raise ConfigError(f"bad value for '{key}': {value}") from exc
    return out


def load_config_file(path):
    """Flat key=value lines; blank lines and #-comments ignored."""
    pairs = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                pairs.append(line)
    return pairs


def run_suite(name, overrides=None, seed=None, out_dir=None, workers=1):
    """Execute one suite; writes checks.csv, report.json, run_meta.json, figures.

    Returns (payload, checks).  The JSON payload is a pure function of
    (name, overrides, seed); wall-clock goes to the run-meta sidecar only.
    """
    if name not in SUITES:
        raise ConfigError(f"unknown suite '{name}' (choose from {sorted(SUITES)})")
    spec = SUITES[name]
    params = dict(spec.defaults)
    if overrides:
        if isinstance(overrides, dict):
            bad = set(overrides) - set(spec.defaults)
            if bad:
                raise ConfigError(f"unknown key '{sorted(bad)[0]}'")
            params.update(overrides)
        else:
            params.update(parse_overrides(overrides, spec.defaults))
    if seed is None:
        seed = DEFAULT_SEEDS[name]
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    checks = spec.runner(params, seed, out_dir=out_dir, workers=workers)
    runtime = time.perf_counter() - t0
    payload = None
    if out_dir is not None:
        write_checks_csv(os.path.join(out_dir, "checks.csv"), checks)
        payload = write_report_json(
            os.path.join(out_dir, "report.json"), name, seed, checks
        )
        write_run_meta(os.path.join(out_dir, "run_meta.json"), runtime, workers)
    else:
        payload = {
            "suite": name,
            "seed": seed,
            "checks": [c.__dict__ for c in checks],
            "all_gated_pass": all(c.passed for c in checks if c.gated),
        }
    return payload, checks
