"""Experiment drivers: configs, runners, and artifact manifests.

Each experiment kind has a frozen params dataclass (defaults reproduce the
standard study), loads from JSON with unknown-key rejection, and writes CSV
artifacts plus a manifest.json into the output directory.  Artifacts that
contain wall-clock measurements are flagged deterministic=false in the
manifest; everything else is byte-identical across reruns with the same
config and seed.  The SSPG_SEED environment variable overrides the config's
base seed.

"10 rounds" in the solver-comparison study means 10 epochs of m stochastic
iterations each (one full pass over the components per round).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from .analysis import (
    RateReport,
    constant_step_bound,
    emit_trace_csv,
    fit_rate_exponent,
    loglog_fit,
    plateau_level,
    semilog_fit,
    write_csv,
)
from .core import TheoryConstants, constant_schedule, polynomial_schedule
from .engine import DivergenceError, dist_rule, run_monte_carlo, run_sspg
from .feasibility import CFPProblem, Hyperplane, cfp_oracles, estimate_kappa
from .proximal_gradient import PGConfig, run_pg, reference_solution
from .rng import GENERATOR_SCHEME
from .sparse_representation import (
    generate_sr_instance,
    sr_constants,
    sr_oracles,
    zero_mean_subgradient_sigma,
)

FORMAT_VERSION = 1

EXPERIMENT_KINDS = (
    "atoms_scaling",
    "iterations_comparison",
    "rate_sweep",
    "cfp_linear",
    "recurrence_check",
)


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


@dataclass(frozen=True)
class AtomsScalingParams:
    """Solve time vs problem size n, m = m_ratio * n, both solvers to eps."""

    n_min: int = 5
    n_max: int = 125
    n_step: int = 5
    m_ratio: int = 4
    alpha: float = 0.5
    lam: float = 5.0
    eps: float = 1e-6
    gamma: float = 1.0
    mu0: float | None = None  # None -> 1/(2 L_f) per instance
    init_scale: float = 1.0  # both solvers start at init_scale * ones(n)
    ref_tol: float = 1e-8
    iter_cap: int = 5_000_000
    pg_iter_cap: int = 100_000
    trend_n_min: int = 50
    sspg_slope_max: float = 1.3

    def __post_init__(self):
        _require(self.n_min >= 1 and self.n_step >= 1, "need n_min >= 1 and n_step >= 1")
        _require(self.m_ratio >= 1, "need m_ratio >= 1")
        _require(self.alpha > 0 and self.lam >= 0, "need alpha > 0 and lam >= 0")
        _require(self.eps > 0 and self.ref_tol > 0, "need positive tolerances")
        _require(0 < self.gamma <= 1, "gamma must lie in (0, 1]")
        _require(self.iter_cap >= 1 and self.pg_iter_cap >= 1, "caps must be >= 1")


@dataclass(frozen=True)
class IterationsComparisonParams:
    """Fixed SSPG epoch budget vs PG wall time to the same accuracy."""

    n_list: tuple[int, ...] = (100, 250, 500, 750)
    m_ratio: int = 6
    alpha: float = 0.2
    lam: float = 5e-4
    rounds: int = 10
    rel_sq_accuracy: float = 1e-3  # target: ||x-x*||^2 <= rel * ||x0-x*||^2
    init_scale: float = 100.0
    mu0: float | None = None  # None -> 1/(2 L_f) per instance
    ref_tol: float = 1e-8
    pg_iter_cap: int = 100_000

    def __post_init__(self):
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        _require(all(n >= 1 for n in self.n_list), "n_list entries must be >= 1")
        _require(self.m_ratio >= 1, "need m_ratio >= 1")
        _require(self.alpha > 0 and self.lam >= 0, "need alpha > 0 and lam >= 0")
        _require(self.rounds >= 1, "need rounds >= 1")
        _require(0 < self.rel_sq_accuracy < 1, "rel_sq_accuracy must lie in (0, 1)")
        _require(self.ref_tol > 0 and self.pg_iter_cap >= 1, "bad tolerance or cap")


@dataclass(frozen=True)
class RateSweepParams:
    """Mean-trace decay exponents under mu_k = mu0 / k^gamma, started at x*."""

    n: int = 5
    m: int = 20
    alpha: float = 50.0
    lam: float = 0.01
    instance_seed: int = 0
    gammas: tuple[float, ...] = (0.5, 0.75)
    seeds: int = 100
    horizon: int = 10_000
    window: tuple[int, int] = (100, 10_000)
    mu0: float | None = None  # None -> 1/(2 L_f)
    ref_tol: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        object.__setattr__(self, "window", tuple(int(k) for k in self.window))
        _require(self.n >= 1 and self.m >= 1, "need n >= 1 and m >= 1")
        _require(self.alpha > 0 and self.lam >= 0, "need alpha > 0 and lam >= 0")
        _require(all(0 < g <= 1 for g in self.gammas), "gammas must lie in (0, 1]")
        _require(self.seeds >= 2, "need at least 2 seeds")
        _require(len(self.window) == 2 and 1 <= self.window[0] < self.window[1],
                 "window must be (k_min, k_max) with 1 <= k_min < k_max")
        _require(self.window[1] <= self.horizon, "window exceeds horizon")


@dataclass(frozen=True)
class CfpLinearParams:
    """Randomized projections onto two lines through the origin in R^2."""

    angle: float = math.pi / 3  # angle between the two lines
    x0: tuple[float, float] = (3.0, 4.0)
    seeds: int = 200
    horizon: int = 500
    kappa_samples: int = 2000
    radius_factor: float = 10.0  # sampling radius = factor * dist to intersection
    kappa_grid_points: int = 100_000
    kappa_rel_tol: float = 0.05
    fit_r2_min: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        _require(0 < self.angle < math.pi, "angle must lie in (0, pi)")
        _require(len(self.x0) == 2, "x0 must be a point in R^2")
        _require(self.seeds >= 2 and self.horizon >= 1, "need seeds >= 2, horizon >= 1")
        _require(self.kappa_samples >= 100, "need kappa_samples >= 100")
        _require(self.radius_factor > 0, "radius_factor must be positive")
        _require(self.kappa_grid_points >= 1000, "need kappa_grid_points >= 1000")


@dataclass(frozen=True)
class RecurrenceCheckParams:
    """One-step contraction bound checked against a seed-averaged trace."""

    n: int = 10
    m: int = 40
    alpha: float = 0.5
    lam: float = 0.01
    instance_seed: int = 1
    seeds: int = 200
    horizon: int = 5000
    mu_frac: float = 0.25  # mu = mu_frac / L_f
    slack: float = 5.0
    cert_tol: float = 1e-6
    sigma_scale: float = 1.0  # inflate sigma_f to demo that violations are caught
    ref_tol: float = 1e-9
    tail_fraction: float = 0.1

    def __post_init__(self):
        _require(self.n >= 1 and self.m >= 1, "need n >= 1 and m >= 1")
        _require(self.alpha > 0 and self.lam >= 0, "need alpha > 0 and lam >= 0")
        _require(self.seeds >= 2, "need at least 2 seeds")
        _require(1 <= self.horizon <= 100_000, "horizon out of range")
        _require(0 < self.mu_frac <= 0.5, "mu_frac must lie in (0, 0.5]")
        _require(self.slack > 0 and self.cert_tol > 0, "slack and cert_tol positive")
        _require(self.sigma_scale > 0, "sigma_scale must be positive")
        _require(0 < self.tail_fraction <= 0.5, "tail_fraction must lie in (0, 0.5]")


PARAMS_BY_KIND = {
    "atoms_scaling": AtomsScalingParams,
    "iterations_comparison": IterationsComparisonParams,
    "rate_sweep": RateSweepParams,
    "cfp_linear": CfpLinearParams,
    "recurrence_check": RecurrenceCheckParams,
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 0
    format_version: int = FORMAT_VERSION
    params: object = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_KINDS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENT_KINDS}"
            )
        if self.format_version != FORMAT_VERSION:
            raise ConfigError(
                f"unsupported format_version {self.format_version!r} (expected {FORMAT_VERSION})"
            )
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        cls = PARAMS_BY_KIND[self.experiment]
        if self.params is None:
            object.__setattr__(self, "params", cls())
        elif not isinstance(self.params, cls):
            raise ConfigError(f"params must be {cls.__name__} for {self.experiment}")


def default_config(experiment: str, seed: int = 0) -> ExperimentConfig:
    return ExperimentConfig(experiment=experiment, seed=seed)


def _params_from_dict(experiment: str, d: dict) -> object:
    cls = PARAMS_BY_KIND[experiment]
    if not isinstance(d, dict):
        raise ConfigError(f"params must be an object, got {type(d).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError(f"unknown params keys for {experiment}: {', '.join(unknown)}")
    clean = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()}
    try:
        return cls(**clean)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid params for {experiment}: {exc}") from exc


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError(f"config must be a JSON object, got {type(d).__name__}")
    allowed = {"format_version", "experiment", "seed", "params"}
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "format_version" not in d:
        raise ConfigError("config is missing format_version")
    if "experiment" not in d:
        raise ConfigError("config is missing experiment")
    experiment = d["experiment"]
    if experiment not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; expected one of {EXPERIMENT_KINDS}"
        )
    params = _params_from_dict(experiment, d.get("params", {}))
    try:
        return ExperimentConfig(
            experiment=experiment,
            seed=d.get("seed", 0),
            format_version=d["format_version"],
            params=params,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "format_version": config.format_version,
        "experiment": config.experiment,
        "seed": config.seed,
        "params": dataclasses.asdict(config.params),
    }


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def save_config(config: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(config_to_dict(config), fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- runners ---------------------------------------------------------------------


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _verdict(name: str, passed: bool, detail: str) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def _run_atoms_scaling(p: AtomsScalingParams, seed: int, out_dir: str, workers):
    ns = list(range(p.n_min, p.n_max + 1, p.n_step))
    rows = []
    unconverged = []
    for i, n in enumerate(ns):
        m = p.m_ratio * n
        problem = generate_sr_instance(n, m, p.alpha, p.lam, seed + i)
        x_star, _ = reference_solution(problem, p.ref_tol)
        consts = sr_constants(problem)
        smooth, prox = sr_oracles(problem)
        mu0 = p.mu0 if p.mu0 is not None else 0.5 / consts.lipschitz
        sched = polynomial_schedule(mu0, p.gamma, constants=consts)
        x0 = np.full(n, p.init_scale)

        tr_pg, t_pg = _timed(lambda: run_pg(
            problem,
            PGConfig(outer_tol=p.eps, outer_cap=p.pg_iter_cap),
            reference=x_star,
            x0=x0,
            record_walltime=False,
            record_every=10**9,
        ))
        try:
            tr_s, t_s = _timed(lambda: run_sspg(
                smooth, prox, sched,
                seed=seed + 10_000 + i,
                stop=dist_rule(p.eps, p.iter_cap),
                reference=x_star,
                x0=x0,
                record_every=10**9,
            ))
            iters_s, conv_s = tr_s.n_iters, tr_s.converged
        except DivergenceError:
            t_s, iters_s, conv_s = math.nan, -1, False
        rows.append((n, m, t_pg, t_s, tr_pg.n_iters, iters_s))
        if not (conv_s and tr_pg.converged):
            unconverged.append(n)

    write_csv(os.path.join(out_dir, "scaling.csv"),
              ("n", "m", "t_pg_s", "t_sspg_s", "iters_pg", "iters_sspg"), rows)
    artifacts = [("scaling.csv", False)]

    verdicts = []
    if ns:
        verdicts.append(_verdict(
            "all_runs_converged", not unconverged,
            "every solve reached its target" if not unconverged
            else f"unconverged at n = {unconverged}"))
        trend = [(r[0], r[2], r[3]) for r in rows if r[0] >= p.trend_n_min
                 and math.isfinite(r[3])]
        if len(trend) >= 2:
            tn = np.array([r[0] for r in trend], dtype=float)
            slope_pg, _, _ = loglog_fit(tn, np.array([r[1] for r in trend]))
            slope_s, _, _ = loglog_fit(tn, np.array([r[2] for r in trend]))
            verdicts.append(_verdict(
                "sspg_time_growth_at_most_linear", slope_s <= p.sspg_slope_max,
                f"fitted slope {slope_s:.3f} vs cap {p.sspg_slope_max} over n >= {p.trend_n_min}"))
            verdicts.append(_verdict(
                "pg_time_growth_exceeds_sspg", slope_pg > slope_s,
                f"pg slope {slope_pg:.3f} vs sspg slope {slope_s:.3f}"))
        else:
            verdicts.append(_verdict(
                "time_trend", False,
                f"fewer than 2 sizes at n >= {p.trend_n_min}; cannot fit a trend"))
    return artifacts, verdicts


def _run_iterations_comparison(p: IterationsComparisonParams, seed: int,
                               out_dir: str, workers):
    artifacts = []
    rows = []
    per_n = {}
    for i, n in enumerate(p.n_list):
        m = p.m_ratio * n
        problem = generate_sr_instance(n, m, p.alpha, p.lam, seed + i)
        x_star, _ = reference_solution(problem, p.ref_tol)
        consts = sr_constants(problem)
        smooth, prox = sr_oracles(problem)
        mu0 = p.mu0 if p.mu0 is not None else 0.5 / consts.lipschitz
        sched = constant_schedule(mu0, constants=consts)
        x0 = np.full(n, p.init_scale)
        d0_sq = float(np.sum((x0 - x_star) ** 2))
        target_sq = p.rel_sq_accuracy * d0_sq
        thr = math.sqrt(target_sq)
        cap = p.rounds * m
        run_seed = seed + 10_000 + i

        tr_s, t_s = _timed(lambda: run_sspg(
            smooth, prox, sched, seed=run_seed,
            stop=dist_rule(thr, cap), reference=x_star, x0=x0,
            record_every=10**9,
        ))
        pg_cfg = PGConfig(outer_tol=thr, outer_cap=p.pg_iter_cap)
        tr_p, t_p = _timed(lambda: run_pg(
            problem, pg_cfg, reference=x_star, x0=x0,
            record_walltime=False, record_every=10**9,
        ))

        # same seeds and schedules, re-run with per-iteration recording for the
        # progress artifacts (identical iterates; timing kept separate above)
        rec_s = run_sspg(smooth, prox, sched, seed=run_seed,
                         stop=dist_rule(thr, cap), reference=x_star, x0=x0,
                         record_walltime=True)
        rec_p = run_pg(problem, pg_cfg, reference=x_star, x0=x0,
                       record_walltime=True)
        for tag, rec in (("sspg", rec_s), ("pg", rec_p)):
            prog = f"progress_{tag}_n{n}.csv"
            times = f"times_{tag}_n{n}.csv"
            emit_trace_csv(dataclasses.replace(rec, wall_time_s=None),
                           os.path.join(out_dir, prog))
            write_csv(os.path.join(out_dir, times), ("k", "wall_time_s"),
                      list(zip(rec.ks.tolist(), rec.wall_time_s.tolist())))
            artifacts.append((prog, True))
            artifacts.append((times, False))

        rows.append((n, m, d0_sq, target_sq, int(tr_s.converged), tr_s.n_iters,
                     t_s, int(tr_p.converged), tr_p.n_iters, t_p))
        per_n[n] = (tr_s.converged, t_s, tr_p.converged, t_p)

    write_csv(os.path.join(out_dir, "comparison_summary.csv"),
              ("n", "m", "d0_sq", "target_sq", "reached_sspg", "iters_sspg",
               "t_sspg_s", "reached_pg", "iters_pg", "t_pg_s"), rows)
    artifacts.append(("comparison_summary.csv", False))

    verdicts = []
    if p.n_list:
        n_big = max(p.n_list)
        reached_s, t_s, reached_p, t_p = per_n[n_big]
        verdicts.append(_verdict(
            "sspg_reaches_target_within_rounds", reached_s,
            f"n={n_big}: target {p.rel_sq_accuracy:g} rel sq-dist within "
            f"{p.rounds} rounds: {reached_s}"))
        faster = reached_s and (not reached_p or t_s < t_p)
        verdicts.append(_verdict(
            "sspg_faster_than_pg_at_largest_n", faster,
            f"n={n_big}: sspg {t_s:.3f}s vs pg {t_p:.3f}s"))
    return artifacts, verdicts


def _run_rate_sweep(p: RateSweepParams, seed: int, out_dir: str, workers):
    problem = generate_sr_instance(p.n, p.m, p.alpha, p.lam, p.instance_seed)
    x_star, _ = reference_solution(problem, p.ref_tol)
    consts = sr_constants(problem)
    smooth, prox = sr_oracles(problem)
    mu0 = p.mu0 if p.mu0 is not None else 0.5 / consts.lipschitz

    artifacts = []
    verdicts = []
    rows = []
    for g in p.gammas:
        sched = polynomial_schedule(mu0, g, constants=consts)
        mt = run_monte_carlo(smooth, prox, sched, seeds=p.seeds,
                             horizon=p.horizon, reference=x_star,
                             base_seed=seed, x0=x_star, workers=workers)
        rep: RateReport = fit_rate_exponent(mt, p.window, g)
        name = f"rate_mean_gamma{g:g}.csv"
        emit_trace_csv(mt, os.path.join(out_dir, name))
        artifacts.append((name, True))
        rows.append((g, mu0, rep.slope, rep.r_squared,
                     rep.window[0], rep.window[1], int(rep.passed)))
        verdicts.append(_verdict(
            f"rate_exponent_gamma{g:g}", rep.passed,
            f"fitted slope {rep.slope:.3f} vs -{g:g} (tol 0.2), "
            f"R^2 {rep.r_squared:.3f} (min 0.9)"))

    write_csv(os.path.join(out_dir, "rates.csv"),
              ("gamma", "mu0", "slope", "r_squared", "window_lo", "window_hi",
               "passed"), rows)
    artifacts.append(("rates.csv", True))
    return artifacts, verdicts


def _grid_kappa_two_lines(problem: CFPProblem, grid_points: int) -> float:
    """Directional grid minimum of E[dist^2]/dist_X^2 for lines through 0.

    Both sets pass through the origin, so the ratio is scale-invariant and a
    dense sweep over directions is an oracle for the regularity constant.
    """
    phis = np.linspace(0.0, math.pi, grid_points, endpoint=False)
    pts = np.stack([np.cos(phis), np.sin(phis)], axis=1)
    total = np.zeros(grid_points)
    for s in problem.sets:
        a = s.a / np.linalg.norm(s.a)
        total += (pts @ a) ** 2
    return float(total.min() / len(problem.sets))


def _run_cfp_linear(p: CfpLinearParams, seed: int, out_dir: str, workers):
    theta = p.angle
    sets = (
        Hyperplane(a=np.array([0.0, 1.0]), b=0.0),
        Hyperplane(a=np.array([math.sin(theta), -math.cos(theta)]), b=0.0),
    )
    problem = CFPProblem(sets=sets, x_feas=np.zeros(2))
    x0 = np.array(p.x0)
    d0 = float(np.linalg.norm(x0))  # intersection of distinct lines through 0
    kappa_grid = _grid_kappa_two_lines(problem, p.kappa_grid_points)
    kappa_hat = estimate_kappa(problem, p.kappa_samples,
                               radius=p.radius_factor * d0, seed=seed + 77)
    rel_err = abs(kappa_hat - kappa_grid) / kappa_grid

    smooth, prox = cfp_oracles(problem)
    mt = run_monte_carlo(smooth, prox, constant_schedule(1.0), seeds=p.seeds,
                         horizon=p.horizon, reference=np.zeros(2),
                         base_seed=seed, x0=x0, workers=workers)
    env = (1.0 - kappa_grid / 8.0) ** mt.ks.astype(float) * mt.mean_sq_dist[0]
    below = bool(np.all(mt.mean_sq_dist <= env * (1.0 + 1e-12)))
    pos = mt.mean_sq_dist > 0
    if pos.sum() < 10:
        raise RuntimeError("mean trace hit zero too early for a geometric fit")
    slope, _, r2 = semilog_fit(mt.ks[pos].astype(float), mt.mean_sq_dist[pos])

    emit_trace_csv(mt, os.path.join(out_dir, "cfp_mean.csv"))
    write_csv(os.path.join(out_dir, "cfp_summary.csv"),
              ("kappa_hat", "kappa_grid", "kappa_rel_err", "d0_sq",
               "envelope_ok", "fit_slope", "fit_r2"),
              [(kappa_hat, kappa_grid, rel_err, d0 * d0, int(below), slope, r2)])
    artifacts = [("cfp_mean.csv", True), ("cfp_summary.csv", True)]
    verdicts = [
        _verdict("mean_sq_dist_below_linear_envelope", below,
                 f"E[dist^2] vs (1 - kappa/8)^k with kappa {kappa_grid:.6f}"),
        _verdict("geometric_fit_r2", r2 >= p.fit_r2_min,
                 f"R^2 {r2:.4f} (min {p.fit_r2_min}), slope {slope:.4f}/iter"),
        _verdict("kappa_estimate_matches_grid", rel_err <= p.kappa_rel_tol,
                 f"sampled {kappa_hat:.6f} vs grid {kappa_grid:.6f} "
                 f"(rel err {rel_err:.3%}, tol {p.kappa_rel_tol:.0%})"),
    ]
    return artifacts, verdicts


def _run_recurrence_check(p: RecurrenceCheckParams, seed: int, out_dir: str,
                          workers):
    from .engine import check_recurrence

    problem = generate_sr_instance(p.n, p.m, p.alpha, p.lam, p.instance_seed)
    x_star, _ = reference_solution(problem, p.ref_tol)
    sigma_sq, certificate = zero_mean_subgradient_sigma(problem, x_star,
                                                        tol=p.cert_tol)
    base = sr_constants(problem)
    consts = TheoryConstants(
        lipschitz=base.lipschitz,
        strong_convexity=base.strong_convexity * p.sigma_scale,
        noise_bound=sigma_sq,
    )
    mu = p.mu_frac / base.lipschitz
    sched = constant_schedule(mu)
    smooth, prox = sr_oracles(problem)
    mt = run_monte_carlo(smooth, prox, sched, seeds=p.seeds, horizon=p.horizon,
                         reference=x_star, base_seed=seed, workers=workers)
    report = check_recurrence(mt, consts, sched, slack=p.slack)

    plateau = plateau_level(mt, p.tail_fraction)
    plateau_bound = (mu / consts.strong_convexity) * sigma_sq
    tail = max(1, int(math.ceil(p.tail_fraction * len(mt.ks))))
    plateau_ok = plateau <= plateau_bound * 1.1 + 5.0 * float(np.mean(mt.stderr[-tail:]))
    env = constant_step_bound(float(mt.mean_sq_dist[0]), consts, mu, mt.ks)
    trace_ok = bool(np.all(mt.mean_sq_dist <= env + 5.0 * mt.stderr
                           + 1e-12 * (1.0 + env)))

    emit_trace_csv(mt, os.path.join(out_dir, "recurrence_mean.csv"))
    write_csv(os.path.join(out_dir, "recurrence_report.csv"),
              ("n", "m", "mu", "sigma_f", "lipschitz", "sigma_sq_hat",
               "certificate", "n_checked", "n_violations",
               "max_violation_sigma", "slack", "plateau", "plateau_bound",
               "trace_below_envelope", "passed"),
              [(p.n, p.m, mu, consts.strong_convexity, consts.lipschitz,
                sigma_sq, certificate, report.n_checked, len(report.violations),
                report.max_violation_sigma, p.slack, plateau, plateau_bound,
                int(trace_ok), int(report.passed))])
    artifacts = [("recurrence_mean.csv", True), ("recurrence_report.csv", True)]
    verdicts = [
        _verdict("zero_mean_subgradient_certificate", certificate <= p.cert_tol,
                 f"||mean subgradient|| = {certificate:.2e} (tol {p.cert_tol:g})"),
        _verdict("one_step_recurrence_holds", report.passed,
                 f"{len(report.violations)} violations over {report.n_checked} "
                 f"steps at {p.slack}-sigma slack "
                 f"(max {report.max_violation_sigma:.2f} sigma)"),
        _verdict("plateau_below_theory_level", plateau_ok,
                 f"tail level {plateau:.4g} vs (mu/sigma) Sigma = {plateau_bound:.4g}"),
        _verdict("trace_below_bound_curve", trace_ok,
                 "mean trace under (1 - mu sigma)^k d0^2 + (mu/sigma) Sigma "
                 "at every recorded k"),
    ]
    return artifacts, verdicts


_RUNNERS = {
    "atoms_scaling": _run_atoms_scaling,
    "iterations_comparison": _run_iterations_comparison,
    "rate_sweep": _run_rate_sweep,
    "cfp_linear": _run_cfp_linear,
    "recurrence_check": _run_recurrence_check,
}


def resolve_seed(config: ExperimentConfig) -> int:
    """Config seed, unless SSPG_SEED is set in the environment."""
    raw = os.environ.get("SSPG_SEED")
    if raw is None:
        return config.seed
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"SSPG_SEED must be an integer, got {raw!r}") from exc


def run_experiment(config: ExperimentConfig, out_dir, plot: bool = False,
                   workers: int | None = None) -> dict:
    """Run one experiment, write artifacts + manifest.json, return the manifest."""
    seed = resolve_seed(config)
    out_dir = str(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    save_config(config, os.path.join(out_dir, "config.json"))
    artifacts = [("config.json", True)]

    arts, verdicts = _RUNNERS[config.experiment](config.params, seed, out_dir,
                                                 workers)
    artifacts.extend(arts)
    if plot:
        artifacts.extend(_plot_experiment(config.experiment, out_dir))

    manifest = {
        "format_version": FORMAT_VERSION,
        "experiment": config.experiment,
        "generator_scheme": GENERATOR_SCHEME,
        "seed": seed,
        # normalized through JSON so the returned dict equals the file contents
        "config": json.loads(json.dumps(config_to_dict(config))),
        "artifacts": [
            {"path": rel, "sha256": _sha256(os.path.join(out_dir, rel)),
             "deterministic": bool(det)}
            for rel, det in sorted(artifacts)
        ],
        "verdicts": verdicts,
        "all_passed": all(v["passed"] for v in verdicts),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8",
              newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


# --- plots (optional; CSV stays the authoritative artifact) -----------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "sspg"
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def _plot_experiment(kind: str, out_dir: str) -> list[tuple[str, bool]]:
    from .analysis import read_mean_trace_csv

    plt = _pyplot()
    made = []

    def figure(name):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        made.append((name, False))
        return fig, ax

    if kind == "atoms_scaling":
        rows = np.genfromtxt(os.path.join(out_dir, "scaling.csv"),
                             delimiter=",", names=True)
        if rows.size == 0:
            return []
        rows = np.atleast_1d(rows)
        fig, ax = figure("scaling.svg")
        ax.loglog(rows["n"], rows["t_pg_s"], "o-", label="pg")
        ax.loglog(rows["n"], rows["t_sspg_s"], "s-", label="sspg")
        ax.set_xlabel("n")
        ax.set_ylabel("time to reach eps [s]")
        ax.legend()
        _save(fig, os.path.join(out_dir, "scaling.svg"))
        plt.close(fig)
    elif kind == "iterations_comparison":
        summary = np.atleast_1d(np.genfromtxt(
            os.path.join(out_dir, "comparison_summary.csv"),
            delimiter=",", names=True))
        if summary.size == 0:
            return []
        n_big = int(summary["n"].max())
        fig, ax = figure("comparison.svg")
        for tag in ("sspg", "pg"):
            prog = np.atleast_1d(np.genfromtxt(
                os.path.join(out_dir, f"progress_{tag}_n{n_big}.csv"),
                delimiter=",", names=True))
            times = np.atleast_1d(np.genfromtxt(
                os.path.join(out_dir, f"times_{tag}_n{n_big}.csv"),
                delimiter=",", names=True))
            ax.semilogy(times["wall_time_s"], prog["sq_dist_to_opt"],
                        label=f"{tag} (n={n_big})")
        ax.set_xlabel("wall time [s]")
        ax.set_ylabel("squared distance to x*")
        ax.legend()
        _save(fig, os.path.join(out_dir, "comparison.svg"))
        plt.close(fig)
    elif kind == "rate_sweep":
        rates = np.atleast_1d(np.genfromtxt(os.path.join(out_dir, "rates.csv"),
                                            delimiter=",", names=True))
        fig, ax = figure("rates.svg")
        for row in rates:
            g = float(row["gamma"])
            mt = read_mean_trace_csv(os.path.join(out_dir,
                                                  f"rate_mean_gamma{g:g}.csv"))
            pos = (mt.ks >= 1) & (mt.mean_sq_dist > 0)
            ax.loglog(mt.ks[pos], mt.mean_sq_dist[pos],
                      label=f"gamma={g:g} (slope {row['slope']:.2f})")
        ax.set_xlabel("k")
        ax.set_ylabel("mean squared distance")
        ax.legend()
        _save(fig, os.path.join(out_dir, "rates.svg"))
        plt.close(fig)
    elif kind == "cfp_linear":
        mt = read_mean_trace_csv(os.path.join(out_dir, "cfp_mean.csv"))
        summary = np.atleast_1d(np.genfromtxt(
            os.path.join(out_dir, "cfp_summary.csv"), delimiter=",", names=True))
        kappa = float(summary["kappa_grid"][0])
        env = (1 - kappa / 8) ** mt.ks.astype(float) * mt.mean_sq_dist[0]
        fig, ax = figure("cfp.svg")
        pos = mt.mean_sq_dist > 0
        ax.semilogy(mt.ks[pos], mt.mean_sq_dist[pos], label="mean sq distance")
        ax.semilogy(mt.ks, env, "--", label="(1 - kappa/8)^k envelope")
        ax.set_xlabel("k")
        ax.set_ylabel("E[dist^2]")
        ax.legend()
        _save(fig, os.path.join(out_dir, "cfp.svg"))
        plt.close(fig)
    elif kind == "recurrence_check":
        mt = read_mean_trace_csv(os.path.join(out_dir, "recurrence_mean.csv"))
        rep = np.atleast_1d(np.genfromtxt(
            os.path.join(out_dir, "recurrence_report.csv"), delimiter=",",
            names=True))
        mu = float(rep["mu"][0])
        sig = float(rep["sigma_f"][0])
        noise = float(rep["sigma_sq_hat"][0])
        env = (1 - mu * sig) ** mt.ks.astype(float) * mt.mean_sq_dist[0] \
            + (mu / sig) * noise
        fig, ax = figure("recurrence.svg")
        ax.semilogy(mt.ks, mt.mean_sq_dist, label="mean sq distance")
        ax.semilogy(mt.ks, env, "--", label="theory bound")
        ax.set_xlabel("k")
        ax.set_ylabel("E||x^k - x*||^2")
        ax.legend()
        _save(fig, os.path.join(out_dir, "recurrence.svg"))
        plt.close(fig)
    return made
