"""Acceptance gate: eleven end-to-end criteria, one printed verdict line each.

Run with ``pytest tests/test_acceptance.py -s`` to watch the verdict lines
appear live; without -s they show up in pytest's captured output.  Several
criteria are Monte-Carlo heavy (minutes-scale in total); the recurrence run
is shared between criteria 4 and 6 through a session fixture.
"""

import math
import os
import time

import numpy as np
import pytest

from sspg import (
    Ball,
    CFPProblem,
    Halfspace,
    Hyperplane,
    IdentityProxOracle,
    IndicatorProxOracle,
    PGConfig,
    SolverState,
    TheoryConstants,
    ZeroSmoothOracle,
    cfp_oracles,
    check_recurrence,
    constant_schedule,
    constant_step_bound,
    draw_index,
    estimate_kappa,
    fit_rate_exponent,
    generate_sr_instance,
    make_rng,
    max_iter_rule,
    plateau_level,
    polynomial_schedule,
    project_set,
    reference_solution,
    run_experiment,
    run_monte_carlo,
    run_pg,
    run_rap,
    run_sspg,
    semilog_fit,
    set_distance,
    sr_constants,
    sr_grad,
    sr_oracles,
    sr_prox,
    sr_prox_residual,
    sr_value,
    sspg_step,
    stepsize,
    zero_mean_subgradient_sigma,
)
from sspg.experiments import (
    AtomsScalingParams,
    CfpLinearParams,
    ExperimentConfig,
    IterationsComparisonParams,
    RateSweepParams,
    RecurrenceCheckParams,
    default_config,
)

from conftest import prox_line_oracle

_WORKERS = min(8, os.cpu_count() or 1)

# collected verdict lines; conftest replays them in the terminal summary so
# they stay visible without -s
VERDICT_LINES = []


def _verdict(num, name, passed, detail):
    tag = "PASS" if passed else "FAIL"
    line = f"[{tag}] criterion {num:2d} {name}: {detail}"
    VERDICT_LINES.append(line)
    print(line, flush=True)
    assert passed, f"criterion {num} {name}: {detail}"


# --- shared Monte Carlo for criteria 4 and 6 -------------------------------------------


@pytest.fixture(scope="session")
def recurrence_mc():
    prob = generate_sr_instance(n=10, m=40, alpha=0.5, lam=0.01, seed=1)
    base = sr_constants(prob)
    x_star, _ = reference_solution(prob, tol=1e-9)
    sigma_hat, cert = zero_mean_subgradient_sigma(prob, x_star, tol=1e-6)
    consts = TheoryConstants(lipschitz=base.lipschitz,
                             strong_convexity=base.strong_convexity,
                             noise_bound=sigma_hat)
    mu = 0.25 / consts.lipschitz
    schedule = constant_schedule(mu)
    smooth, prox = sr_oracles(prob)
    mt = run_monte_carlo(smooth, prox, schedule, seeds=200, horizon=5000,
                         reference=x_star, base_seed=1000, workers=_WORKERS)
    return {"trace": mt, "constants": consts, "schedule": schedule, "mu": mu,
            "certificate": cert}


# --- 1: prox correctness ----------------------------------------------------------------


def test_criterion_01_prox_correctness():
    t0 = time.perf_counter()
    worst_gap = 0.0
    worst_resid = 0.0

    # family 1: sampled analysis-sparsity prox vs golden-section line search
    instances = [generate_sr_instance(n=n, m=m, alpha=a, lam=l, seed=s)
                 for n, m, a, l, s in [(5, 10, 0.5, 0.05, 101), (8, 16, 0.3, 1.0, 102),
                                       (6, 24, 1.0, 5.0, 103), (12, 12, 0.2, 0.4, 104)]]
    rng = np.random.default_rng(2024)
    for i in range(1000):
        prob = instances[i % 4]
        y_vec = 4.0 * rng.standard_normal(prob.n)
        xi = int(rng.integers(prob.m))
        mu = float(np.exp(rng.uniform(np.log(1e-3), np.log(10.0))))
        z = sr_prox(prob, y_vec, xi, mu)
        z_ref = prox_line_oracle(prob, y_vec, xi, mu)
        worst_gap = max(worst_gap, float(np.linalg.norm(z - z_ref)))
        worst_resid = max(worst_resid, sr_prox_residual(prob, y_vec, z, xi, mu))

    # family 2: projections vs sampled variational inequality
    sets = [Halfspace(a=np.array([1.0, -2.0, 0.5]), b=0.3),
            Hyperplane(a=np.array([0.7, 0.7, -1.0]), b=-0.4),
            Ball(center=np.array([0.5, 0.0, -1.0]), radius=1.2)]
    problems = [CFPProblem(sets=(s,)) for s in sets]
    oracles = [IndicatorProxOracle(p) for p in problems]
    for i in range(1000):
        s = sets[i % 3]
        x = 4.0 * rng.standard_normal(3)
        mu = float(np.exp(rng.uniform(np.log(1e-3), np.log(10.0))))
        z = project_set(s, x)
        u = 3.0 * rng.standard_normal((100, 3))
        if isinstance(s, Halfspace):
            gap = u @ s.a - s.b
            w = u - np.outer(np.clip(gap, 0.0, None) / float(s.a @ s.a), s.a)
            assert np.max(w @ s.a) <= s.b + 1e-9
        elif isinstance(s, Hyperplane):
            w = u - np.outer((u @ s.a - s.b) / float(s.a @ s.a), s.a)
            assert np.max(np.abs(w @ s.a - s.b)) <= 1e-9
        else:
            d = u - s.center
            nd = np.linalg.norm(d, axis=1)
            frac = rng.random(100) ** (1.0 / 3.0)
            w = s.center + d * (s.radius * frac / np.maximum(nd, 1e-300))[:, None]
        scale = 1.0 + float(x @ x) + float(np.max(np.einsum("ij,ij->i", w, w)))
        vi = float(np.max((w - z) @ (x - z)))
        worst_gap = max(worst_gap, vi / scale if vi > 0 else 0.0)
        # no sampled feasible point may lie closer than the projection
        closest = float(np.min(np.linalg.norm(w - x, axis=1)))
        assert closest >= float(np.linalg.norm(z - x)) - 1e-8
        assert set_distance(s, z) <= 1e-9 * (1 + np.linalg.norm(z))
        worst_resid = max(worst_resid,
                          oracles[i % 3].stationarity_residual(x, z, 0, mu))

    elapsed = time.perf_counter() - t0
    passed = worst_gap <= 1e-8 and worst_resid <= 1e-9 and elapsed < 10.0
    _verdict(1, "prox_correctness", passed,
             f"2x1000 triples, max oracle gap {worst_gap:.2e} (tol 1e-8), "
             f"max residual {worst_resid:.2e} (tol 1e-9), {elapsed:.1f}s (limit 10s)")


# --- 2: gradient correctness -------------------------------------------------------------


def test_criterion_02_gradient_correctness():
    instances = [generate_sr_instance(n=n, m=m, alpha=a, lam=0.1, seed=s)
                 for n, m, a, s in [(6, 12, 0.4, 201), (10, 5, 1.5, 202)]]
    rng = np.random.default_rng(2025)
    h = 1e-5
    worst = 0.0
    for i in range(500):
        prob = instances[i % 2]
        x = 3.0 * rng.standard_normal(prob.n)
        xi = int(rng.integers(prob.m))
        g = sr_grad(prob, x, xi)
        fd = np.empty(prob.n)
        for j in range(prob.n):
            e = np.zeros(prob.n)
            e[j] = h
            fd[j] = (sr_value(prob, x + e, xi) - sr_value(prob, x - e, xi)) / (2 * h)
        rel = float(np.linalg.norm(fd - g)) / max(float(np.linalg.norm(g)), 1e-30)
        worst = max(worst, rel)
    _verdict(2, "gradient_correctness", worst <= 1e-6,
             f"500 points, max relative error vs central differences {worst:.2e} "
             "(tol 1e-6)")


# --- 3: exact reductions ------------------------------------------------------------------


def _iterates_equal(chain_xs, hand_xs):
    return all(np.array_equal(a, b) for a, b in zip(chain_xs, hand_xs))


def test_criterion_03_reductions():
    steps = 1000
    prob = generate_sr_instance(n=6, m=12, alpha=0.3, lam=0.05, seed=3)
    smooth, prox_sr = sr_oracles(prob)
    results = {}

    def chain(sm, px, sched, seed, x0):
        state = SolverState(x=x0.copy(), k=0, rng=make_rng(seed))
        xs = []
        for k in range(steps):
            state = sspg_step(sm, px, state, stepsize(sched, k + 1))
            xs.append(state.x.copy())
        return xs

    # (i) h = 0 -> SGD
    sched = polynomial_schedule(0.05, 0.6)
    xs = chain(smooth, IdentityProxOracle(dim=prob.n, m=prob.m), sched, 61,
               np.ones(prob.n))
    rng, x, hand = make_rng(61), np.ones(prob.n), []
    for k in range(steps):
        x = x - stepsize(sched, k + 1) * sr_grad(prob, x, draw_index(rng, prob.m))
        hand.append(x.copy())
    results["sgd"] = _iterates_equal(xs, hand)

    # (ii) fixed prox -> proximal SGD (soft thresholding)
    lam_reg = 0.2

    def soft(y, mu):
        return np.sign(y) * np.maximum(np.abs(y) - lam_reg * mu, 0.0)

    from sspg import FixedProxOracle

    prox_fixed = FixedProxOracle(dim=prob.n, m=prob.m, prox_fn=soft,
                                 value_fn=lambda v: lam_reg * float(np.abs(v).sum()),
                                 subgrad_fn=lambda v: lam_reg * np.sign(v))
    sched = constant_schedule(0.04)
    xs = chain(smooth, prox_fixed, sched, 62, np.zeros(prob.n))
    rng, x, hand = make_rng(62), np.zeros(prob.n), []
    for k in range(steps):
        x = soft(x - 0.04 * sr_grad(prob, x, draw_index(rng, prob.m)), 0.04)
        hand.append(x.copy())
    results["prox_sgd"] = _iterates_equal(xs, hand)

    # (iii) f = 0 -> stochastic proximal point
    sched = polynomial_schedule(0.5, 1.0)
    xs = chain(ZeroSmoothOracle(dim=prob.n, m=prob.m), prox_sr, sched, 63,
               np.full(prob.n, 2.0))
    rng, x, hand = make_rng(63), np.full(prob.n, 2.0), []
    for k in range(steps):
        x = sr_prox(prob, x, draw_index(rng, prob.m), stepsize(sched, k + 1))
        hand.append(x.copy())
    results["spp"] = _iterates_equal(xs, hand)

    # (iv) f = 0, indicator h -> randomized alternating projections
    cfp = CFPProblem(sets=(
        Halfspace(a=np.array([1.0, 0.0, 0.0]), b=1.0),
        Ball(center=np.array([0.0, 0.5, 0.0]), radius=2.0),
        Hyperplane(a=np.array([0.0, 0.0, 1.0]), b=0.0),
    ), x_feas=np.zeros(3))
    trace = run_rap(cfp, seed=64, horizon=steps, x0=np.array([4.0, -3.0, 2.0]))
    rng, x = make_rng(64), np.array([4.0, -3.0, 2.0])
    for _ in range(steps):
        x = project_set(cfp.sets[draw_index(rng, cfp.m)], x)
    results["rap"] = np.array_equal(trace.x_final, x)

    passed = all(results.values())
    status = ", ".join(f"{k}={'exact' if v else 'MISMATCH'}" for k, v in results.items())
    _verdict(3, "reduction_equivalences", passed, f"{steps} steps each: {status}")


# --- 4: one-step recurrence ----------------------------------------------------------------


def test_criterion_04_recurrence(recurrence_mc):
    mt = recurrence_mc["trace"]
    report = check_recurrence(mt, recurrence_mc["constants"],
                              recurrence_mc["schedule"], slack=5.0)
    cert = recurrence_mc["certificate"]
    passed = report.passed and cert <= 1e-6
    _verdict(4, "one_step_recurrence", passed,
             f"R=200, K=5000, mu=1/(4L): {len(report.violations)} violations at "
             f"5-sigma (worst {report.max_violation_sigma:+.2f} sigma), "
             f"zero-mean certificate {cert:.2e} (tol 1e-6)")


# --- 5: decaying-stepsize rates --------------------------------------------------------------


def test_criterion_05_rate_exponents():
    p = RateSweepParams()  # n=5, m=20, alpha=50, lam=0.01, R=100, K=10^4
    prob = generate_sr_instance(n=p.n, m=p.m, alpha=p.alpha, lam=p.lam,
                                seed=p.instance_seed)
    consts = sr_constants(prob)
    x_star, _ = reference_solution(prob, tol=p.ref_tol)
    smooth, prox = sr_oracles(prob)
    mu0 = 0.5 / consts.lipschitz
    details = []
    passed = True
    for gamma in p.gammas:
        sched = polynomial_schedule(mu0, gamma, constants=consts)
        mt = run_monte_carlo(smooth, prox, sched, seeds=p.seeds, horizon=p.horizon,
                             reference=x_star, base_seed=0, x0=x_star,
                             workers=_WORKERS)
        report = fit_rate_exponent(mt, window=p.window, gamma_theory=gamma)
        passed = passed and report.passed
        details.append(f"gamma={gamma}: slope {report.slope:+.3f} "
                       f"(want -{gamma}+-0.2), R^2 {report.r_squared:.3f}")
    _verdict(5, "rate_exponents", passed,
             f"R={p.seeds}, window {p.window}: " + "; ".join(details))


# --- 6: constant-stepsize plateau --------------------------------------------------------------


def test_criterion_06_plateau(recurrence_mc):
    mt = recurrence_mc["trace"]
    consts = recurrence_mc["constants"]
    mu = recurrence_mc["mu"]
    sigma, noise = consts.strong_convexity, consts.noise_bound
    level = plateau_level(mt, tail_fraction=0.1)
    tail = len(mt.ks) - int(math.ceil(0.1 * len(mt.ks)))
    level_cap = (mu / sigma) * noise * 1.1 + 5.0 * float(np.mean(mt.stderr[tail:]))
    plateau_ok = level <= level_cap

    bound = constant_step_bound(float(mt.mean_sq_dist[0]), consts, mu, mt.ks)
    slack = 5.0 * mt.stderr + 1e-12 * (1.0 + bound)
    trace_ok = bool(np.all(mt.mean_sq_dist <= bound + slack))
    passed = plateau_ok and trace_ok
    _verdict(6, "plateau_level", passed,
             f"tail mean {level:.4e} vs cap {level_cap:.4e}; "
             f"trace below bound curve at all {len(mt.ks)} recorded k: {trace_ok}")


# --- 7: CFP linear rate ---------------------------------------------------------------------


def test_criterion_07_cfp_linear_rate():
    theta = math.pi / 3
    sets = (Hyperplane(a=np.array([0.0, 1.0]), b=0.0),
            Hyperplane(a=np.array([math.sin(theta), -math.cos(theta)]), b=0.0))
    problem = CFPProblem(sets=sets, x_feas=np.zeros(2))

    # gridded kappa: worst direction of the mean-square set distance on the
    # unit circle (distance to the intersection {0} is 1 there)
    phis = np.linspace(0.0, math.pi, 100_000, endpoint=False)
    u = np.stack([np.cos(phis), np.sin(phis)], axis=1)
    ratios = 0.5 * ((u @ sets[0].a) ** 2 + (u @ sets[1].a) ** 2)
    kappa_grid = float(ratios.min())
    analytic = math.sin(theta / 2) ** 2
    grid_ok = abs(kappa_grid - analytic) <= 1e-6

    x0 = np.array([3.0, 4.0])
    d0_sq = float(x0 @ x0)
    smooth, prox = cfp_oracles(problem)
    mt = run_monte_carlo(smooth, prox, constant_schedule(1.0), seeds=200,
                         horizon=500, reference=np.zeros(2), base_seed=7000,
                         x0=x0, workers=_WORKERS)
    envelope = (1.0 - kappa_grid / 8.0) ** mt.ks * d0_sq
    env_ok = bool(np.all(mt.mean_sq_dist <= envelope * (1.0 + 1e-12)))
    pos = mt.mean_sq_dist > 0
    slope, _, r2 = semilog_fit(mt.ks[pos], mt.mean_sq_dist[pos])
    fit_ok = r2 >= 0.95
    passed = grid_ok and env_ok and fit_ok
    _verdict(7, "cfp_linear_rate", passed,
             f"kappa_grid {kappa_grid:.6f} (analytic {analytic:.6f}); R=200, "
             f"E[dist^2] below (1-kappa/8)^k envelope for all k<=500: {env_ok}; "
             f"geometric fit R^2 {r2:.4f} (min 0.95)")


# --- 8: deterministic m=1 agreement -----------------------------------------------------------


def test_criterion_08_deterministic_m1():
    prob = generate_sr_instance(n=4, m=1, alpha=0.7, lam=0.3, seed=11)
    consts = sr_constants(prob)
    pg_trace = run_pg(prob, cfg=PGConfig(outer_tol=1e-9))
    x_pg = pg_trace.x_final
    smooth, prox = sr_oracles(prob)
    mu = 0.5 / consts.lipschitz
    trace = run_sspg(smooth, prox, constant_schedule(mu), seed=0,
                     stop=max_iter_rule(5000), reference=x_pg)
    gap = float(np.linalg.norm(trace.x_final - x_pg))
    # with a single component the method is deterministic; the distance to the
    # limit must have collapsed from its starting value, not merely wandered
    sq = np.asarray(trace.sq_dist_to_opt)
    decayed = bool(sq[-1] <= 1e-12 * max(sq[0], 1.0))
    passed = gap <= 1e-6 and decayed and pg_trace.converged
    _verdict(8, "deterministic_m1_agreement", passed,
             f"|x_sspg - x_pg| = {gap:.2e} (tol 1e-6), sq-dist collapsed "
             f"{sq[0]:.2e} -> {sq[-1]:.2e}")


# --- 9: figure-1 trend -------------------------------------------------------------------------


def test_criterion_09_size_scaling_trend(tmp_path):
    cfg = default_config("atoms_scaling")  # n in {5..125}, m=4n, alpha=.5, lam=5
    manifest = run_experiment(cfg, tmp_path / "atoms")
    verdicts = {v["name"]: v for v in manifest["verdicts"]}
    passed = manifest["all_passed"]
    detail = "; ".join(
        f"{name}: {v['detail']}" for name, v in verdicts.items())
    _verdict(9, "size_scaling_trend", passed, detail)


# --- 10: figure-2 trend ------------------------------------------------------------------------


def test_criterion_10_epoch_budget_trend(tmp_path):
    cfg = default_config("iterations_comparison")  # m=6n, alpha=.2, lam=5e-4
    manifest = run_experiment(cfg, tmp_path / "cmp")
    verdicts = {v["name"]: v for v in manifest["verdicts"]}
    passed = manifest["all_passed"]
    detail = "; ".join(f"{name}: {v['detail']}" for name, v in verdicts.items())
    _verdict(10, "epoch_budget_trend", passed, detail)


# --- 11: byte-identical artifacts --------------------------------------------------------------


def test_criterion_11_determinism(tmp_path):
    reduced = [
        ("atoms_scaling", AtomsScalingParams(n_min=5, n_max=10, n_step=5, eps=1e-3)),
        ("iterations_comparison", IterationsComparisonParams(n_list=(30,))),
        ("rate_sweep", RateSweepParams(gammas=(0.5,), seeds=8, horizon=300,
                                       window=(50, 300))),
        ("cfp_linear", CfpLinearParams(seeds=30, horizon=100, kappa_samples=200,
                                       kappa_grid_points=5000)),
        ("recurrence_check", RecurrenceCheckParams(seeds=10, horizon=300)),
    ]
    mismatches = []
    n_compared = 0
    for kind, params in reduced:
        cfg = ExperimentConfig(experiment=kind, seed=12, params=params)
        m1 = run_experiment(cfg, tmp_path / f"{kind}_a", workers=2)
        m2 = run_experiment(cfg, tmp_path / f"{kind}_b", workers=1)
        paths1 = {a["path"]: a for a in m1["artifacts"]}
        paths2 = {a["path"]: a for a in m2["artifacts"]}
        if set(paths1) != set(paths2):
            mismatches.append(f"{kind}: artifact sets differ")
            continue
        for rel, art in paths1.items():
            if not art["deterministic"]:
                continue
            n_compared += 1
            b1 = (tmp_path / f"{kind}_a" / rel).read_bytes()
            b2 = (tmp_path / f"{kind}_b" / rel).read_bytes()
            if b1 != b2:
                mismatches.append(f"{kind}: {rel} differs between re-runs")
    passed = not mismatches and n_compared >= 10
    detail = (f"5 experiment kinds re-run; {n_compared} deterministic artifacts "
              "byte-identical" if passed else "; ".join(mismatches))
    _verdict(11, "artifact_determinism", passed, detail)
