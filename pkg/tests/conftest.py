"""Shared fixtures and the independent 1-D prox oracle used by several suites."""

import math
import sys

import numpy as np
import pytest

from sspg import CFPProblem, Ball, Halfspace, Hyperplane, generate_sr_instance


@pytest.fixture(scope="session")
def small_sr():
    """6-dimensional, 12-component instance used across the unit tests."""
    return generate_sr_instance(n=6, m=12, alpha=0.3, lam=0.05, seed=3)


@pytest.fixture(scope="session")
def mixed_cfp():
    """Halfspace + ball + hyperplane in R^3 with a known common point."""
    sets = (
        Halfspace(a=np.array([1.0, 0.0, 0.0]), b=1.0),
        Ball(center=np.array([0.0, 0.5, 0.0]), radius=2.0),
        Hyperplane(a=np.array([0.0, 0.0, 1.0]), b=0.0),
    )
    return CFPProblem(sets=sets, x_feas=np.zeros(3))


def golden_bracket(g, lo, hi, iters=80):
    """Golden-section search; returns the final bracketing interval."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = g(c), g(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = g(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = g(d)
    return a, b


def golden_min(g, lo, hi, iters=140):
    a, b = golden_bracket(g, lo, hi, iters)
    return 0.5 * (a + b)


def prox_line_oracle(prob, y_vec, xi, mu):
    """Brute-force minimizer of h(z; xi) + ||z - y||^2 / (2 mu) for the
    sampled analysis-sparsity penalty h(z; xi) = m lam |delta_xi . z|.

    The quadratic part is minimized over the orthogonal complement of
    delta_xi at z = y, so the search is scalar: z(c) = y - c delta_xi.
    Golden-section localizes c by pure value comparison; bisection on the
    sign of the (sub)derivative of the definition then polishes it to
    machine precision (value comparisons alone stall near sqrt(eps) on the
    flat quadratic branch).  Nothing here uses the closed-form prox.
    """
    y_vec = np.asarray(y_vec, dtype=float)
    d = prob.delta[xi]
    s = float(d @ d)
    q = float(d @ y_vec)
    weight = prob.m * prob.lam
    if weight == 0.0:
        return y_vec.copy()

    def g(c):
        return weight * abs(q - c * s) + c * c * s / (2.0 * mu)

    def gprime(c):
        r = q - c * s
        if r == 0.0:
            # subdifferential endpoint closest to zero
            lo_sd = c * s / mu - weight * s
            hi_sd = c * s / mu + weight * s
            if lo_sd <= 0.0 <= hi_sd:
                return 0.0
            return lo_sd if lo_sd > 0.0 else hi_sd
        return -weight * s * math.copysign(1.0, r) + c * s / mu

    span = abs(q) / s + weight * mu + 1.0
    lo, hi = -span, span
    lo_g, hi_g = golden_bracket(g, lo, hi, iters=40)
    if gprime(lo_g) < 0.0 < gprime(hi_g):
        lo, hi = lo_g, hi_g
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if gprime(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    c_star = 0.5 * (lo + hi)
    return y_vec - c_star * d


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Replay the acceptance verdict lines after the run (they are captured
    stdout otherwise, invisible unless pytest runs with -s)."""
    lines = getattr(sys.modules.get("test_acceptance"), "VERDICT_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
