"""Problem-agnostic building blocks for stochastic proximal splitting.

The solver acts on a pair of sampled oracles for the composite objective

    F(x) = (1/m) sum_xi [ f(x; xi) + h(x; xi) ],

where each ``xi`` indexes one component: ``f(.; xi)`` is smooth with a
Lipschitz gradient and ``h(.; xi)`` is convex, possibly nonsmooth, with a
cheap proximal map.  This module defines the oracle interfaces, the stepsize
schedules, the per-problem constants used by the convergence analysis, and
two diagnostic maps (Moreau envelope, prox optimality residual).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Array = np.ndarray


class SmoothOracle:
    """Sampled smooth part: ``value``/``grad`` of f(.; xi) for xi in [0, m).

    Implementations expose ``m`` (number of components) and ``dim`` (ambient
    dimension) and must be safe to call concurrently: methods never mutate the
    oracle or their arguments.
    """

    m: int
    dim: int

    def value(self, x: Array, xi: int) -> float:
        raise NotImplementedError

    def grad(self, x: Array, xi: int) -> Array:
        raise NotImplementedError


class ProxOracle:
    """Sampled nonsmooth part h(.; xi): extended-real value, prox, subgradient.

    ``value`` may return ``inf`` (indicator-type components).  ``prox`` solves
    ``argmin_z h(z; xi) + ||z - y||^2 / (2 mu)`` exactly.  ``subgrad`` returns
    one member of the subdifferential (the minimal-norm one where cheap).
    Implementations whose subdifferential is genuinely set-valued should also
    provide ``stationarity_residual(y, z, xi, mu)`` returning the distance
    from ``-(z - y)/mu`` to the subdifferential at ``z``; see
    ``prox_optimality_residual``.
    """

    m: int
    dim: int

    def value(self, x: Array, xi: int) -> float:
        raise NotImplementedError

    def prox(self, y: Array, xi: int, mu: float) -> Array:
        raise NotImplementedError

    def subgrad(self, x: Array, xi: int) -> Array:
        raise NotImplementedError


@dataclass(frozen=True)
class TheoryConstants:
    """Constants of one problem instance used by bounds and stepsize rules.

    lipschitz
        L_f: a Lipschitz constant of every per-component gradient x -> grad f(x; xi).
    strong_convexity
        sigma_f: strong-convexity modulus of the averaged smooth part (1/m) sum f.
    noise_bound
        Sigma = 2 E||g_F(x*; xi)||^2 for a zero-mean optimal subgradient
        selection; None until estimated, 0 for deterministic problems.
    opt_grad_bound
        E||g_F(x*; xi)||^2 itself (half of noise_bound) when known.
    linear_regularity
        kappa in (0, 1] for feasibility problems; None elsewhere.
    """

    lipschitz: float
    strong_convexity: float
    noise_bound: float | None = None
    opt_grad_bound: float | None = None
    linear_regularity: float | None = None

    def __post_init__(self):
        if not (self.lipschitz > 0 and math.isfinite(self.lipschitz)):
            raise ValueError(f"lipschitz must be positive and finite, got {self.lipschitz}")
        if not (0 < self.strong_convexity <= self.lipschitz * (1 + 1e-12)):
            raise ValueError(
                "strong_convexity must lie in (0, lipschitz]: "
                f"got {self.strong_convexity} vs L={self.lipschitz}"
            )
        if self.noise_bound is not None and self.noise_bound < 0:
            raise ValueError("noise_bound must be nonnegative")
        if self.opt_grad_bound is not None and self.opt_grad_bound < 0:
            raise ValueError("opt_grad_bound must be nonnegative")
        if self.linear_regularity is not None and not (0 < self.linear_regularity <= 1):
            raise ValueError("linear_regularity must lie in (0, 1]")


@dataclass(frozen=True)
class StepsizeSchedule:
    """Stepsize rule mu_k for k = 1, 2, ...

    kind="constant":   mu_k = min(mu0, clamp)
    kind="polynomial": mu_k = min(mu0 / k**gamma, clamp), gamma in (0, 1]

    The clamp defaults to +inf; build schedules through
    ``constant_schedule`` / ``polynomial_schedule`` to get the stability
    default clamp = 1/(2 L_f) from the problem constants.
    """

    kind: str
    mu0: float
    gamma: float = 1.0
    clamp: float = math.inf

    def __post_init__(self):
        if self.kind not in ("constant", "polynomial"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not (self.mu0 > 0 and math.isfinite(self.mu0)):
            raise ValueError(f"mu0 must be positive and finite, got {self.mu0}")
        if self.kind == "polynomial" and not (0 < self.gamma <= 1):
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.clamp > 0:
            raise ValueError(f"clamp must be positive, got {self.clamp}")

    def describe(self) -> str:
        if self.kind == "constant":
            return f"constant(mu0={self.mu0:.6g}, clamp={self.clamp:.6g})"
        return f"polynomial(mu0={self.mu0:.6g}, gamma={self.gamma:.6g}, clamp={self.clamp:.6g})"


def default_clamp(constants: TheoryConstants) -> float:
    """Stability clamp 1/(2 L_f) under which the one-step contraction holds."""
    return 1.0 / (2.0 * constants.lipschitz)


def constant_schedule(mu0: float, constants: TheoryConstants | None = None,
                      clamp: float | None = None) -> StepsizeSchedule:
    if clamp is None:
        clamp = default_clamp(constants) if constants is not None else math.inf
    return StepsizeSchedule(kind="constant", mu0=mu0, clamp=clamp)


def polynomial_schedule(mu0: float, gamma: float, constants: TheoryConstants | None = None,
                        clamp: float | None = None) -> StepsizeSchedule:
    if clamp is None:
        clamp = default_clamp(constants) if constants is not None else math.inf
    return StepsizeSchedule(kind="polynomial", mu0=mu0, gamma=gamma, clamp=clamp)


def stepsize(schedule: StepsizeSchedule, k: int) -> float:
    """mu_k for iteration k >= 1 (the step producing iterate x^k)."""
    if k < 1:
        raise ValueError(f"iteration index starts at 1, got k={k}")
    if schedule.kind == "constant":
        base = schedule.mu0
    else:
        base = schedule.mu0 / k ** schedule.gamma
    return base if base < schedule.clamp else schedule.clamp


def eval_full_objective(smooth: SmoothOracle, prox: ProxOracle, x: Array) -> float:
    """F(x) = (1/m) sum_xi [f(x; xi) + h(x; xi)]; inf when x is infeasible."""
    if smooth.m != prox.m:
        raise ValueError(f"oracles disagree on component count: {smooth.m} vs {prox.m}")
    total = 0.0
    for xi in range(smooth.m):
        total += smooth.value(x, xi) + prox.value(x, xi)
    return total / smooth.m


def moreau_envelope(prox: ProxOracle, x: Array, xi: int, mu: float) -> tuple[float, Array]:
    """Envelope value min_z h(z;xi) + ||z-x||^2/(2 mu) and its minimizer."""
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    z = prox.prox(x, xi, mu)
    d = z - x
    return prox.value(z, xi) + float(d @ d) / (2.0 * mu), z


def prox_optimality_residual(prox: ProxOracle, y: Array, z: Array, xi: int, mu: float) -> float:
    """How far z is from being prox_{h,mu}(y; xi), as a stationarity norm.

    For an exact prox output this is zero: the optimality condition is
    ``g + (z - y)/mu = 0`` for some subgradient g of h(.; xi) at z.  Oracles
    with set-valued subdifferentials provide ``stationarity_residual`` which
    minimizes over the whole subdifferential; otherwise the single ``subgrad``
    selection is used.  Raises when h(z; xi) is infinite (z outside the
    component's domain).
    """
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if not math.isfinite(prox.value(z, xi)):
        raise ValueError(f"h(z; xi={xi}) is not finite: z lies outside the component domain")
    method = getattr(prox, "stationarity_residual", None)
    if method is not None:
        return float(method(y, z, xi, mu))
    r = prox.subgrad(z, xi) + (z - y) / mu
    return float(np.linalg.norm(r))


def spectral_norm_sq(a: Array, n_iter: int = 60) -> float:
    """Largest squared singular value of ``a`` by power iteration.

    Deterministic start vector (all ones), so results are reproducible.  The
    final Rayleigh quotient slightly underestimates the true value for
    near-degenerate top pairs; callers that need an upper bound for stepsize
    purposes should inflate by a couple of percent.
    """
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    v = np.ones(a.shape[1]) / math.sqrt(a.shape[1])
    for _ in range(n_iter):
        w = a.T @ (a @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return float(v @ (a.T @ (a @ v)))


# --- trivial oracles used by the exact-reduction special cases ---------------


@dataclass(frozen=True)
class ZeroSmoothOracle(SmoothOracle):
    """f identically zero: turns the solver into stochastic proximal point."""

    dim: int
    m: int

    def value(self, x, xi):
        return 0.0

    def grad(self, x, xi):
        return np.zeros(self.dim)


@dataclass(frozen=True)
class IdentityProxOracle(ProxOracle):
    """h identically zero: prox is the identity, recovering plain SGD."""

    dim: int
    m: int

    def value(self, x, xi):
        return 0.0

    def prox(self, y, xi, mu):
        return y

    def subgrad(self, x, xi):
        return np.zeros(self.dim)

    def stationarity_residual(self, y, z, xi, mu):
        return float(np.linalg.norm((z - y) / mu))


@dataclass(frozen=True)
class FixedProxOracle(ProxOracle):
    """Adapter giving every component the same (xi-independent) prox map.

    With this oracle the solver is exactly proximal/projected SGD.  ``prox_fn``
    maps (y, mu) -> z; ``value_fn`` maps x -> h(x); ``subgrad_fn`` maps
    x -> one subgradient.  ``residual_fn`` is optional: (y, z, mu) -> distance
    from -(z-y)/mu to the subdifferential at z.
    """

    dim: int
    m: int
    prox_fn: object
    value_fn: object
    subgrad_fn: object
    residual_fn: object = None

    def value(self, x, xi):
        return self.value_fn(x)

    def prox(self, y, xi, mu):
        return self.prox_fn(y, mu)

    def subgrad(self, x, xi):
        return self.subgrad_fn(x)

    def stationarity_residual(self, y, z, xi, mu):
        if self.residual_fn is not None:
            return float(self.residual_fn(y, z, mu))
        r = self.subgrad_fn(z) + (z - y) / mu
        return float(np.linalg.norm(r))
