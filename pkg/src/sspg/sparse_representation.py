"""Cosparse sparse-representation problem with per-row sampling.

The full objective is

    F(x) = (1/2m) ||T x - y||^2 + lam ||Delta x||_1 + (alpha/2) ||x||^2

split into m components, the xi-th pairing data row T_xi with analysis row
Delta_xi (so p = m by construction):

    f(x; xi) = (1/2) (T_xi . x - y_xi)^2 + (alpha/2) ||x||^2
    h(x; xi) = m lam |Delta_xi . x|

Averaging over xi recovers F.  The point of this split is that both sampled
maps are O(n): the gradient touches one row of T and the prox of h(.; xi) has
a closed form along Delta_xi (hyperplane projection or a fixed-size shift,
depending on which side of the kink the minimizer lands).
"""

from __future__ import annotations

import json
import math
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .core import ProxOracle, SmoothOracle, TheoryConstants, spectral_norm_sq
from .rng import make_rng

Array = np.ndarray

SR_FORMAT_VERSION = 1

# Relative floor under which a generated analysis row counts as degenerate
# and is redrawn (the prox divides by its squared norm).
_MIN_ROW_NORM = 1e-12


@dataclass(frozen=True)
class SRProblem:
    """Immutable instance data. p = m: row xi of delta belongs to component xi."""

    T: Array
    y: Array
    delta: Array
    lam: float
    alpha: float
    seed: int = 0

    def __post_init__(self):
        T = np.ascontiguousarray(self.T, dtype=float)
        y = np.ascontiguousarray(self.y, dtype=float)
        delta = np.ascontiguousarray(self.delta, dtype=float)
        if T.ndim != 2 or delta.ndim != 2 or y.ndim != 1:
            raise ValueError("T and delta must be matrices, y a vector")
        m, n = T.shape
        if m < 1 or n < 1:
            raise ValueError(f"need m, n >= 1, got T of shape {T.shape}")
        if y.shape != (m,):
            raise ValueError(f"y has shape {y.shape}, expected ({m},)")
        if delta.shape != (m, n):
            raise ValueError(
                f"delta has shape {delta.shape}, expected ({m}, {n}): "
                "the sampled split pairs row xi of T with row xi of delta"
            )
        if not (np.all(np.isfinite(T)) and np.all(np.isfinite(y)) and np.all(np.isfinite(delta))):
            raise ValueError("instance data must be finite")
        if self.lam < 0 or not math.isfinite(self.lam):
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.alpha <= 0 or not math.isfinite(self.alpha):
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        delta_sq = np.einsum("ij,ij->i", delta, delta)
        if np.min(delta_sq) < _MIN_ROW_NORM**2:
            raise ValueError("delta contains a (near-)zero row; the prox is undefined there")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "_delta_sq", delta_sq)

    @property
    def m(self) -> int:
        return self.T.shape[0]

    @property
    def n(self) -> int:
        return self.T.shape[1]

    @property
    def p(self) -> int:
        return self.delta.shape[0]


def generate_sr_instance(n: int, m: int, alpha: float, lam: float, seed: int) -> SRProblem:
    """Standard-normal instance from the seeded generator.

    Draw order is fixed (T, then delta, then y) so instances are reproducible
    across versions.  An analysis row with norm below 1e-12 is redrawn in
    place (probability ~0, but the prox needs every row nonzero).
    """
    if n < 1 or m < 1:
        raise ValueError(f"need n, m >= 1, got n={n}, m={m}")
    rng = make_rng(seed)
    T = rng.standard_normal((m, n))
    delta = rng.standard_normal((m, n))
    for i in range(m):
        while np.linalg.norm(delta[i]) < _MIN_ROW_NORM:
            delta[i] = rng.standard_normal(n)
    y = rng.standard_normal(m)
    return SRProblem(T=T, y=y, delta=delta, lam=lam, alpha=alpha, seed=seed)


# --- sampled oracles ----------------------------------------------------------


def sr_value(problem: SRProblem, x: Array, xi: int) -> float:
    """f(x; xi) = (1/2)(T_xi . x - y_xi)^2 + (alpha/2)||x||^2."""
    r = float(problem.T[xi] @ x) - problem.y[xi]
    return 0.5 * r * r + 0.5 * problem.alpha * float(x @ x)


def sr_grad(problem: SRProblem, x: Array, xi: int) -> Array:
    """(T_xi^T T_xi + alpha I) x - T_xi^T y_xi, without the rank-1 matrix."""
    t = problem.T[xi]
    return (float(t @ x) - problem.y[xi]) * t + problem.alpha * x


def sr_h_value(problem: SRProblem, x: Array, xi: int) -> float:
    """h(x; xi) = m lam |Delta_xi . x|."""
    return problem.m * problem.lam * abs(float(problem.delta[xi] @ x))


def sr_prox(problem: SRProblem, y_vec: Array, xi: int, mu: float) -> Array:
    """Closed-form prox of h(.; xi) = m lam |Delta_xi . |.

    With beta = Delta_xi . y / ||Delta_xi||^2 and tau = m lam mu:
    |beta| <= tau projects onto the hyperplane Delta_xi . z = 0, otherwise the
    point shifts by tau along -sgn(beta) Delta_xi (the kink is not reached).
    The two branches agree at |beta| = tau; ties are resolved with a 1e-12
    relative tolerance toward the projection branch.
    """
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    w = problem.delta[xi]
    beta = float(w @ y_vec) / problem._delta_sq[xi]
    tau = problem.m * problem.lam * mu
    if abs(beta) <= tau * (1.0 + 1e-12):
        return y_vec - beta * w
    return y_vec - math.copysign(tau, beta) * w


def sr_subgrad(problem: SRProblem, x: Array, xi: int) -> Array:
    """Minimal-norm subgradient of h(.; xi): m lam sgn(Delta_xi . x) Delta_xi."""
    s = np.sign(float(problem.delta[xi] @ x))
    return (problem.m * problem.lam * s) * problem.delta[xi]


def sr_prox_residual(problem: SRProblem, y_vec: Array, z: Array, xi: int, mu: float) -> float:
    """Distance from -(z - y)/mu to the subdifferential of h(.; xi) at z.

    On the kink (Delta_xi . z = 0) the subdifferential is the segment
    {s m lam Delta_xi : |s| <= 1}, so the distance is minimized over s rather
    than against the single minimal-norm selection.
    """
    w = problem.delta[xi]
    ml = problem.m * problem.lam
    r = (y_vec - z) / mu
    t = float(w @ z)
    kink = abs(t) <= 1e-10 * (1.0 + math.sqrt(problem._delta_sq[xi]) * np.linalg.norm(z))
    if not kink:
        return float(np.linalg.norm(r - math.copysign(ml, t) * w))
    if ml == 0.0:
        return float(np.linalg.norm(r))
    s = float(w @ r) / (ml * problem._delta_sq[xi])
    s = min(1.0, max(-1.0, s))
    return float(np.linalg.norm(r - s * ml * w))


def sr_objective(problem: SRProblem, x: Array) -> float:
    """Full objective (1/2m)||Tx-y||^2 + lam ||Delta x||_1 + (alpha/2)||x||^2."""
    r = problem.T @ x - problem.y
    return (
        0.5 * float(r @ r) / problem.m
        + problem.lam * float(np.sum(np.abs(problem.delta @ x)))
        + 0.5 * problem.alpha * float(x @ x)
    )


def sr_constants(problem: SRProblem, tight: bool = True) -> TheoryConstants:
    """Smoothness/strong-convexity constants of the sampled split.

    L_f = max_xi ||T_xi||^2 + alpha bounds every per-component Hessian.
    The strong-convexity modulus of the averaged smooth part is
    alpha + lambda_min((1/m) T^T T); ``tight=False`` falls back to the crude
    floor alpha (always valid, often much smaller).
    """
    row_sq = np.einsum("ij,ij->i", problem.T, problem.T)
    lipschitz = float(np.max(row_sq)) + problem.alpha
    if tight:
        evals = np.linalg.eigvalsh(problem.T.T @ problem.T / problem.m)
        sigma = problem.alpha + max(float(evals[0]), 0.0)
    else:
        sigma = problem.alpha
    return TheoryConstants(lipschitz=lipschitz, strong_convexity=sigma)


class SRSmoothOracle(SmoothOracle):
    def __init__(self, problem: SRProblem):
        self.problem = problem
        self.m = problem.m
        self.dim = problem.n

    def value(self, x, xi):
        return sr_value(self.problem, x, xi)

    def grad(self, x, xi):
        return sr_grad(self.problem, x, xi)


class SRProxOracle(ProxOracle):
    def __init__(self, problem: SRProblem):
        self.problem = problem
        self.m = problem.m
        self.dim = problem.n

    def value(self, x, xi):
        return sr_h_value(self.problem, x, xi)

    def prox(self, y, xi, mu):
        return sr_prox(self.problem, y, xi, mu)

    def subgrad(self, x, xi):
        return sr_subgrad(self.problem, x, xi)

    def stationarity_residual(self, y, z, xi, mu):
        return sr_prox_residual(self.problem, y, z, xi, mu)


def sr_oracles(problem: SRProblem) -> tuple[SRSmoothOracle, SRProxOracle]:
    return SRSmoothOracle(problem), SRProxOracle(problem)


# --- noise constant at the minimizer ------------------------------------------


def _box_lsq(A: Array, b: Array, max_iter: int = 50000, tol: float = 1e-13) -> Array:
    """min_s ||A s - b||^2 over the box ||s||_inf <= 1, by accelerated
    projected gradient with a gradient-based momentum restart."""
    q = A.shape[1]
    L = spectral_norm_sq(A) * 1.02
    if L == 0.0:
        return np.zeros(q)
    ref = 1.0 + float(np.linalg.norm(b))
    s = np.zeros(q)
    v = s
    t = 1.0
    for it in range(max_iter):
        g = A.T @ (A @ v - b)
        s_new = np.clip(v - g / L, -1.0, 1.0)
        if float(g @ (s_new - s)) > 0.0:
            # momentum points uphill: restart
            v = s
            t = 1.0
            g = A.T @ (A @ v - b)
            s_new = np.clip(v - g / L, -1.0, 1.0)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        v = s_new + ((t - 1.0) / t_new) * (s_new - s)
        s, t = s_new, t_new
        if it % 50 == 0:
            gs = A.T @ (A @ s - b)
            pg = s - np.clip(s - gs / L, -1.0, 1.0)
            if float(np.linalg.norm(pg)) * L <= tol * ref:
                break
    return s


def zero_mean_subgradient_sigma(
    problem: SRProblem,
    x_star: Array,
    tol: float = 1e-6,
    zero_tol: float = 1e-9,
    max_iter: int = 50000,
) -> tuple[float, float]:
    """Noise constant Sigma = 2 E||g_F(x*; xi)||^2 for a zero-mean selection.

    Each component's composite gradient is grad f(x*; xi) + m lam s_xi Delta_xi
    with s_xi = sgn(Delta_xi . x*) forced on rows where the kink is not active
    and s_xi in [-1, 1] free otherwise.  The free coefficients are chosen to
    zero the mean (a box-constrained least-squares problem); since x* is a
    minimizer such a selection exists, up to the accuracy of x* itself.

    Returns (Sigma, certificate) where certificate = ||mean_xi g_xi||.  A
    certificate above ``tol`` signals that no representation was found at
    this tolerance (inaccurate x*, or the zero-mean selection genuinely fails)
    and raises a warning.
    """
    x_star = np.asarray(x_star, dtype=float)
    m, ml = problem.m, problem.m * problem.lam
    resid = problem.T @ x_star - problem.y
    grads = problem.T * resid[:, None] + problem.alpha * x_star  # (m, n)
    dx = problem.delta @ x_star
    scale = 1.0 + np.sqrt(problem._delta_sq) * float(np.linalg.norm(x_star))
    active = np.abs(dx) > zero_tol * scale
    coef = np.where(active, np.sign(dx), 0.0)
    g_fixed = grads.sum(axis=0) + ml * (coef[:, None] * problem.delta).sum(axis=0)
    free = ~active
    if ml > 0.0 and bool(free.any()):
        A = ml * problem.delta[free].T
        s = _box_lsq(A, -g_fixed, max_iter=max_iter)
        coef[free] = s
        mean_g = (g_fixed + A @ s) / m
    else:
        mean_g = g_fixed / m
    certificate = float(np.linalg.norm(mean_g))
    if certificate > tol:
        warnings.warn(
            f"representation not found at tolerance: certificate {certificate:.3e} > {tol:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )
    g_all = grads + ml * coef[:, None] * problem.delta
    sigma = 2.0 / m * float(np.einsum("ij,ij->", g_all, g_all))
    return sigma, certificate


# --- binary instance container -------------------------------------------------


def save_sr_instance(problem: SRProblem, path) -> None:
    """Flat binary container: 8-byte LE header length, JSON header, then T,
    delta, y as C-order little-endian float64."""
    header = {
        "format_version": SR_FORMAT_VERSION,
        "n": problem.n,
        "m": problem.m,
        "p": problem.p,
        "lambda": problem.lam,
        "alpha": problem.alpha,
        "seed": problem.seed,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(problem.T, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(problem.delta, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(problem.y, dtype="<f8").tobytes())


def load_sr_instance(path) -> SRProblem:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise ValueError(f"{path}: truncated container (no header length)")
    (hlen,) = struct.unpack("<Q", raw[:8])
    if len(raw) < 8 + hlen:
        raise ValueError(f"{path}: truncated container (header shorter than declared)")
    header = json.loads(raw[8 : 8 + hlen].decode("utf-8"))
    version = header.get("format_version")
    if version != SR_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format_version {version!r}")
    n, m, p = int(header["n"]), int(header["m"]), int(header["p"])
    if p != m:
        raise ValueError(f"{path}: p={p} != m={m}; the sampled split requires p = m")
    body = raw[8 + hlen :]
    expected = 8 * (m * n + p * n + m)
    if len(body) != expected:
        raise ValueError(f"{path}: payload is {len(body)} bytes, expected {expected}")
    T = np.frombuffer(body[: 8 * m * n], dtype="<f8").reshape(m, n)
    delta = np.frombuffer(body[8 * m * n : 8 * (m * n + p * n)], dtype="<f8").reshape(p, n)
    y = np.frombuffer(body[8 * (m * n + p * n) :], dtype="<f8")
    return SRProblem(
        T=T.copy(),
        y=y.copy(),
        delta=delta.copy(),
        lam=float(header["lambda"]),
        alpha=float(header["alpha"]),
        seed=int(header["seed"]),
    )
