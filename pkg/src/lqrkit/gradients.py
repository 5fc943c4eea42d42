"""Gradient estimators: bounded-noise robust pipeline and two-point baseline.

The robust estimator reproduces a three-stage measurement pipeline as
bounded-noise emulation.  Each stage's contract is an exact error bound:

* stage ``b`` perturbs the exact gradient within Frobenius radius ``eps_b``,
* stage ``r`` replaces the vectorized unit direction by a unit vector at
  chordal distance at most ``eps_r``,
* stage ``a`` perturbs the Frobenius norm by at most ``eps_a``,

and the assembled estimate ``a_est * direction`` is certified against the
multiplicative target ``norm(G - grad f) <= theta * norm(grad f)``.  Noise
magnitudes are drawn uniformly in ``[0, bound]`` so interior cases are
exercised, and every draw is deterministic per seed.

The two-point baseline is the classical sphere-smoothing estimator
``(m n / (2 r N)) sum_i [f(K + r U_i) - f(K - r U_i)] U_i`` with directions
uniform on the unit Frobenius sphere.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, RadiusError, StabilityError, ValidationError
from .linalg import as_matrix
from .lqr import ProblemInstance, SublevelConstants, exact_gradient, gain, objective

__all__ = [
    "ErrorBudget",
    "GradientReport",
    "split_budget",
    "vectorize_gradient",
    "devectorize_gradient",
    "emulate_entry_tomography",
    "emulate_norm_estimation",
    "robust_gradient",
    "two_point_estimator",
]


class BudgetWarning(UserWarning):
    """The assembled-error inequality cannot be certified for this budget."""


@dataclass(frozen=True)
class ErrorBudget:
    """Error split for the robust pipeline at robustness ``theta`` and scale ``eps``.

    Under the ``"nominal"`` rule the fields are ``eps_b = eps_a = c theta eps / 3``
    and ``eps_r = 1 / (3 + c theta)``; the direction error then does not
    shrink with ``theta``, so the assembled deviation can exceed ``theta``
    (surfaced as :class:`BudgetError` by :func:`robust_gradient`).  The
    ``"certified"`` rule replaces ``eps_r`` by ``theta / (3 (1 + theta))``,
    which guarantees the assembled bound whenever
    ``norm(grad f) >= c * eps``.
    """

    theta: float
    eps: float
    eps_b: float
    eps_a: float
    eps_r: float
    rule: str = "nominal"
    assembly_certified: bool = False


def split_budget(consts: SublevelConstants, theta: float, eps: float, rule: str = "nominal") -> ErrorBudget:
    """Allocate stage errors for a ``theta``-robust estimate at scale ``eps``."""
    if not (0.0 < theta < 0.5):
        raise ValidationError(f"theta must lie in (0, 0.5), got {theta}")
    if not (eps > 0 and math.isfinite(eps)):
        raise ValidationError(f"eps must be positive and finite, got {eps}")
    c = consts.c_lower
    eps_b = c * theta * eps / 3.0
    eps_a = c * theta * eps / 3.0
    if rule == "nominal":
        eps_r = 1.0 / (3.0 + c * theta)
    elif rule == "certified":
        eps_r = theta / (3.0 * (1.0 + theta))
    else:
        raise ValidationError(f"unknown budget rule {rule!r}")
    # Assembled-estimate check at the gradient-norm floor g = c * eps:
    # eps_a + (g + eps_b) * eps_r + eps_b <= theta * g.
    g = c * eps
    certified = eps_a + (g + eps_b) * eps_r + eps_b <= theta * g * (1 + 1e-12)
    if not certified:
        warnings.warn(
            f"budget rule {rule!r} cannot certify the assembled deviation at the "
            f"gradient floor (theta = {theta}, c = {c:.3e}); robust calls may "
            "raise BudgetError",
            BudgetWarning,
            stacklevel=2,
        )
    return ErrorBudget(
        theta=theta, eps=eps, eps_b=eps_b, eps_a=eps_a, eps_r=eps_r,
        rule=rule, assembly_certified=certified,
    )


@dataclass(frozen=True)
class GradientReport:
    """Estimated gradient with its measured deviation from the exact one."""

    G: np.ndarray
    exact: np.ndarray
    deviation_ratio: float
    budget: ErrorBudget | None
    evaluations: int
    encoded_norm: float | None = None
    norm_estimate: float | None = None
    direction_error: float | None = None


def vectorize_gradient(G) -> tuple[np.ndarray, float]:
    """Column-stack ``G`` into a unit vector, returning it with the norm."""
    G = as_matrix(G, "G")
    norm = float(np.linalg.norm(G))
    if norm == 0:
        raise ValidationError("cannot vectorize the zero matrix")
    return G.reshape(-1, order="F") / norm, norm


def devectorize_gradient(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vectorize_gradient` up to the norm factor."""
    v = np.asarray(v, dtype=float)
    if v.size != rows * cols:
        raise ValidationError(f"vector of length {v.size} cannot fill a {rows}x{cols} matrix")
    return v.reshape(rows, cols, order="F")


def _unit_sphere(rng: np.random.Generator, shape) -> np.ndarray:
    while True:
        U = rng.standard_normal(shape)
        norm = np.linalg.norm(U)
        if norm > 1e-12:
            return U / norm


def emulate_entry_tomography(v, eps_r: float, seed) -> np.ndarray:
    """Unit vector at seeded chordal distance at most ``eps_r`` from ``v``.

    The output stays on the unit sphere: it is rotated away from ``v`` inside
    the plane spanned by ``v`` and a seeded random orthogonal direction, by an
    angle whose chordal distance is drawn uniformly in ``[0, eps_r]``.
    """
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise ValidationError("entry tomography expects a unit vector")
    if eps_r < 0:
        raise ValidationError(f"eps_r must be non-negative, got {eps_r}")
    if eps_r == 0 or v.size == 1:
        return v.copy()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    distance = rng.uniform(0.0, min(eps_r, 2.0))
    w = _unit_sphere(rng, v.shape)
    w -= (w @ v) * v
    wn = np.linalg.norm(w)
    if wn < 1e-12:  # pragma: no cover - measure-zero draw
        return v.copy()
    w /= wn
    angle = 2.0 * math.asin(distance / 2.0)
    return math.cos(angle) * v + math.sin(angle) * w


def emulate_norm_estimation(true_norm: float, eps_a: float, seed) -> float:
    """Seeded norm estimate within additive error ``eps_a`` of ``true_norm``."""
    if true_norm < 0:
        raise ValidationError("true_norm must be non-negative")
    if eps_a < 0:
        raise ValidationError(f"eps_a must be non-negative, got {eps_a}")
    if eps_a == 0:
        return float(true_norm)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    shift = rng.uniform(-eps_a, eps_a)
    return max(0.0, float(true_norm + shift))


def robust_gradient(
    prob: ProblemInstance,
    K,
    budget: ErrorBudget,
    seed,
) -> GradientReport:
    """Run the three-stage bounded-noise pipeline and certify its deviation.

    The exact gradient is computed alongside, so the multiplicative contract
    ``norm(G - grad f) <= theta * norm(grad f)`` is machine-checked on every
    call; a violation (possible under the ``"nominal"`` direction-error rule)
    raises :class:`BudgetError` carrying the measured ratio.  The caller is
    responsible for ``norm(K - K*) > budget.eps``, outside of which the
    gradient-norm floor backing the budget no longer applies.
    """
    fb = gain(prob, K)
    if not fb.stabilizing:
        raise StabilityError("robust gradient requires a stabilizing gain", fb.max_re)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    exact = exact_gradient(prob, fb)
    noise_b = rng.uniform(0.0, budget.eps_b) * _unit_sphere(rng, exact.shape)
    encoded = exact + noise_b

    direction, encoded_norm = vectorize_gradient(encoded)
    measured = emulate_entry_tomography(direction, budget.eps_r, rng)
    norm_estimate = emulate_norm_estimation(encoded_norm, budget.eps_a, rng)
    G = devectorize_gradient(norm_estimate * measured, prob.m, prob.n)

    exact_norm = float(np.linalg.norm(exact))
    deviation = float(np.linalg.norm(G - exact))
    ratio = deviation / exact_norm if exact_norm > 0 else math.inf
    if ratio > budget.theta:
        raise BudgetError(
            f"assembled deviation ratio {ratio:.6f} exceeds theta = {budget.theta} "
            f"(rule {budget.rule!r}); the direction-error allocation is too loose here",
            measured=ratio,
        )
    inner = float(np.sum(G * exact))
    if inner < (1.0 - budget.theta) * exact_norm**2 * (1 - 1e-12) or float(
        np.linalg.norm(G) ** 2
    ) > (1.0 + budget.theta) ** 2 * exact_norm**2 * (1 + 1e-12):
        raise BudgetError(  # pragma: no cover - implied by the ratio check
            "robust estimate violated the inner-product/norm inequalities", measured=ratio
        )
    return GradientReport(
        G=G,
        exact=exact,
        deviation_ratio=ratio,
        budget=budget,
        evaluations=0,
        encoded_norm=encoded_norm,
        norm_estimate=norm_estimate,
        direction_error=float(np.linalg.norm(measured - direction)),
    )


def two_point_estimator(
    prob: ProblemInstance,
    K,
    r: float,
    samples: int,
    seed,
) -> GradientReport:
    """Two-point sphere-smoothing estimate of the policy gradient.

    Each sample perturbs the gain by ``r`` along a fresh unit-Frobenius
    direction drawn from a counter-derived substream, so parallel evaluation
    of the samples would reproduce the sequential result bit for bit.
    Destabilizing directions are redrawn up to ten times before
    :class:`RadiusError` suggests a smaller radius.
    """
    fb = gain(prob, K)
    if not fb.stabilizing:
        raise StabilityError("two-point estimator requires a stabilizing gain", fb.max_re)
    if not (r > 0 and math.isfinite(r)):
        raise ValidationError(f"r must be positive and finite, got {r}")
    if samples < 1:
        raise ValidationError(f"samples must be >= 1, got {samples}")

    m, n = prob.m, prob.n
    total = np.zeros((m, n))
    evaluations = 0
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    streams = root.spawn(samples)
    for stream in streams:
        sub = np.random.default_rng(stream)
        for attempt in range(10):
            U = _unit_sphere(sub, (m, n))
            plus = gain(prob, fb.K + r * U)
            minus = gain(prob, fb.K - r * U)
            if plus.stabilizing and minus.stabilizing:
                break
        else:
            raise RadiusError(
                f"perturbation radius {r} destabilized the closed loop 10 times in a row",
                suggested_radius=r / 10.0,
            )
        diff = objective(prob, plus) - objective(prob, minus)
        evaluations += 2
        total += diff * U
    G = (m * n / (2.0 * r * samples)) * total

    exact = exact_gradient(prob, fb)
    exact_norm = float(np.linalg.norm(exact))
    ratio = float(np.linalg.norm(G - exact)) / exact_norm if exact_norm > 0 else math.inf
    return GradientReport(G=G, exact=exact, deviation_ratio=ratio, budget=None, evaluations=evaluations)
