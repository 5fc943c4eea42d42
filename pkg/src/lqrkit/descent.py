"""Policy gradient descent with convergence monitoring.

Runs ``K <- K - sigma * G`` with the exact gradient, the bounded-noise robust
estimate, or the two-point baseline, while tracking the objective gap,
gradient norm, and distance to the Riccati optimum.  Companion checks fit the
linear convergence rate and verify the per-step contraction inequalities
``f(K - sigma G) - f* <= (1 - sigma/mu)(f(K) - f*)`` and
``norm(K_k - K*)^2 <= b * rate^k * norm(K_0 - K*)^2``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConvergenceError, StabilityError, StepSizeError, ValidationError
from .gradients import ErrorBudget, robust_gradient, split_budget, two_point_estimator
from .lqr import (
    FeedbackGain,
    ProblemInstance,
    exact_gradient,
    gain,
    newton_kleinman,
    objective,
    state_covariance_X,
    sublevel_constants,
)

__all__ = [
    "OptimizerConfig",
    "IterationTrace",
    "RateFit",
    "DescentCheck",
    "ContractionCheck",
    "policy_gradient_descent",
    "fit_linear_rate",
    "verify_descent_lemma",
    "verify_gain_contraction",
]

ESTIMATORS = ("exact", "robust", "two_point")

#: Gradient-norm stopping threshold.
GRAD_TOL = 1e-10


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for one descent run.

    ``sigma=None`` selects the step size automatically: backtracking halving
    from ``1 / (2 L_hat)`` where ``L_hat`` is a finite-difference estimate of
    the local gradient Lipschitz constant along the first descent direction.
    ``target_eps`` is both the stopping distance to the optimal gain and the
    scale fed to the robust error budget.
    """

    sigma: float | None = None
    theta: float = 0.1
    max_iters: int = 10_000
    target_eps: float = 1e-6
    estimator: str = "exact"
    seed: int = 0
    budget_rule: str = "certified"
    two_point_radius: float = 1e-3
    two_point_samples: int = 1

    def __post_init__(self):
        if self.sigma is not None and not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValidationError(f"sigma must be >= 0 (or None for auto), got {self.sigma}")
        if not (0.0 <= self.theta < 0.5):
            raise ValidationError(f"theta must lie in [0, 0.5), got {self.theta}")
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if not (self.target_eps > 0):
            raise ValidationError(f"target_eps must be positive, got {self.target_eps}")
        if self.estimator not in ESTIMATORS:
            raise ValidationError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")


@dataclass
class IterationTrace:
    """Per-iteration history of one descent run."""

    prob: ProblemInstance
    K0: np.ndarray
    estimator: str
    sigma: float
    iterations: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    f: np.ndarray = field(default_factory=lambda: np.empty(0))
    f_gap: np.ndarray = field(default_factory=lambda: np.empty(0))
    grad_norm: np.ndarray = field(default_factory=lambda: np.empty(0))
    gain_err: np.ndarray = field(default_factory=lambda: np.empty(0))
    wall_ms: np.ndarray = field(default_factory=lambda: np.empty(0))
    evals: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    final_K: np.ndarray | None = None
    termination: str = ""
    f_star: float = math.nan
    K_star: np.ndarray | None = None
    polish_from: int | None = None

    def __len__(self) -> int:
        return len(self.iterations)


class RateFit(NamedTuple):
    """Least-squares fit of ``log(f-gap)`` against the iteration index."""

    rate: float
    r_squared: float


@dataclass(frozen=True)
class DescentCheck:
    """Per-step-size verdicts of the descent inequality at one iterate."""

    sigmas: tuple[float, ...]
    holds: tuple[bool, ...]
    ratios: tuple[float, ...]
    mu_fit: float


@dataclass(frozen=True)
class ContractionCheck:
    """Verdict of the squared-gain-error contraction along a trace."""

    ok: bool
    b_hat: float
    b_effective: float
    rate: float
    max_ratio: float
    first_violation: int | None
    b_hat_at_least_one: bool


def _estimate_lipschitz(prob: ProblemInstance, fb: FeedbackGain, G0: np.ndarray) -> float:
    direction = -G0 / np.linalg.norm(G0)
    delta = 1e-5 * max(1.0, float(np.linalg.norm(fb.K)))
    for _ in range(40):
        probe = gain(prob, fb.K + delta * direction)
        if probe.stabilizing:
            G1 = exact_gradient(prob, probe)
            return float(np.linalg.norm(G1 - G0)) / delta
        delta /= 2.0
    raise StepSizeError("could not probe the gradient Lipschitz constant", 0, 0.0)


def _select_sigma(prob: ProblemInstance, fb: FeedbackGain, G0: np.ndarray, f0: float) -> float:
    """Pick a fixed step size from the first iterate.

    Starts at ``1 / (2 L_hat)``, backtracks by halving until the first step
    descends, then greedily doubles while the one-step objective keeps
    strictly improving (each candidate still has to descend from ``f0``).
    """
    lips = _estimate_lipschitz(prob, fb, G0)
    sigma = 0.5 / lips if lips > 0 else 1.0
    f_try = math.inf
    for _ in range(60):
        f_try = objective(prob, fb.K - sigma * G0)
        if f_try < f0:
            break
        sigma /= 2.0
    else:
        raise StepSizeError(
            f"no admissible step size found backtracking from 1/(2 L) = {0.5 / lips:.3e}",
            0,
            sigma / 2.0,
        )
    best_sigma, best_f = sigma, f_try
    for _ in range(20):
        candidate = 2.0 * best_sigma
        f_cand = objective(prob, fb.K - candidate * G0)
        if not (f_cand < best_f and f_cand < f0):
            break
        best_sigma, best_f = candidate, f_cand
    return best_sigma


def policy_gradient_descent(prob: ProblemInstance, K0, cfg: OptimizerConfig) -> IterationTrace:
    """Iterate ``K <- K - sigma G`` until the gain error or gradient vanishes.

    Every accepted iterate stays stabilizing and inside the starting sublevel
    set (a violation raises :class:`StepSizeError` with the offending
    iteration and a halved step suggestion).  With the robust estimator, the
    run switches to exact-gradient polishing once the iterate is within
    ``target_eps`` of the optimum, where the gradient-norm floor behind the
    robust budget no longer applies.
    """
    fb = gain(prob, K0)
    if not fb.stabilizing:
        raise StabilityError("policy gradient needs a stabilizing initial gain", fb.max_re)
    f0 = objective(prob, fb)
    sublevel = f0 * (1.0 + 1e-12) + 1e-12

    try:
        _, K_star_fb = newton_kleinman(prob, tol=1e-11)
        K_star = np.asarray(K_star_fb.K)
        f_star = objective(prob, K_star_fb)
    except ConvergenceError:
        K_star, f_star = None, math.nan

    budget: ErrorBudget | None = None
    if cfg.estimator == "robust":
        consts = sublevel_constants(prob, a=f0 * (1 + 1e-9), seed=cfg.seed)
        budget = split_budget(consts, cfg.theta, cfg.target_eps, rule=cfg.budget_rule)

    G = exact_gradient(prob, fb)
    if cfg.sigma is not None:
        sigma = cfg.sigma
    else:
        sigma = _select_sigma(prob, fb, G, f0)
        if cfg.estimator == "two_point":
            # A two-point sample has norm ~ m n |directional derivative|, so
            # per-step descent is guaranteed only for sigma < 2 / (L m n);
            # averaging N samples relaxes this by N.
            sigma /= max(1.0, prob.m * prob.n / max(1, cfg.two_point_samples))

    trace = IterationTrace(prob=prob, K0=np.asarray(fb.K), estimator=cfg.estimator, sigma=sigma)
    rows_iter, rows_f, rows_gap, rows_gn, rows_ge, rows_ms, rows_ev = [], [], [], [], [], [], []
    polish_from: int | None = None
    termination = "max_iters"

    f_k = f0
    for k in range(cfg.max_iters):
        t_iter = time.perf_counter()
        gain_err = float(np.linalg.norm(fb.K - K_star)) if K_star is not None else math.nan

        evals = 0
        if cfg.estimator == "exact":
            G = exact_gradient(prob, fb)
        elif cfg.estimator == "robust":
            if K_star is not None and gain_err <= budget.eps:
                if polish_from is None:
                    polish_from = k
                G = exact_gradient(prob, fb)
            else:
                seed_k = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(k,))
                report = robust_gradient(prob, fb, budget, np.random.default_rng(seed_k))
                G, evals = report.G, report.evaluations
        else:
            seed_k = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(k,))
            report = two_point_estimator(
                prob, fb, cfg.two_point_radius, cfg.two_point_samples, seed_k
            )
            G, evals = report.G, report.evaluations

        grad_norm = float(np.linalg.norm(G))
        rows_iter.append(k)
        rows_f.append(f_k)
        rows_gap.append(f_k - f_star if K_star is not None else math.nan)
        rows_gn.append(grad_norm)
        rows_ge.append(gain_err)
        rows_ms.append((time.perf_counter() - t_iter) * 1e3)
        rows_ev.append(evals)

        if K_star is not None and gain_err <= cfg.target_eps:
            termination = "gain_tol"
            break
        if grad_norm <= GRAD_TOL:
            termination = "grad_tol"
            break
        if k == cfg.max_iters - 1:
            break

        fb_next = gain(prob, fb.K - sigma * G)
        f_next = objective(prob, fb_next)
        if not fb_next.stabilizing or f_next > sublevel:
            raise StepSizeError(
                f"iterate {k + 1} left the stabilizing sublevel set "
                f"(f = {f_next:.6e} vs f(K0) = {f0:.6e}); retry with sigma = {sigma / 2:.3e}",
                iteration=k + 1,
                suggested_sigma=sigma / 2.0,
            )
        fb, f_k = fb_next, f_next

    trace.iterations = np.asarray(rows_iter, dtype=int)
    trace.f = np.asarray(rows_f)
    trace.f_gap = np.asarray(rows_gap)
    trace.grad_norm = np.asarray(rows_gn)
    trace.gain_err = np.asarray(rows_ge)
    trace.wall_ms = np.asarray(rows_ms)
    trace.evals = np.asarray(rows_ev, dtype=int)
    trace.final_K = np.asarray(fb.K)
    trace.termination = termination
    trace.polish_from = polish_from
    if K_star is not None:
        trace.f_star, trace.K_star = f_star, K_star
    else:
        best = float(np.min(trace.f))
        trace.f_star = best
        trace.f_gap = trace.f - best
    return trace


def fit_linear_rate(trace: IterationTrace, min_points: int = 10) -> RateFit:
    """Fit ``log(f-gap)`` against ``k`` and return ``(exp(slope), r^2)``.

    Trailing non-positive gaps (already converged) are trimmed before
    fitting; fewer than ``min_points`` usable points is an error.
    """
    gaps = np.asarray(trace.f_gap, dtype=float)
    usable = len(gaps)
    for i, g in enumerate(gaps):
        if not (g > 0) or not math.isfinite(g):
            usable = i
            break
    gaps = gaps[:usable]
    if usable < min_points:
        raise ValidationError(
            f"rate fit needs at least {min_points} positive-gap iterations, found {usable}"
        )
    k = np.arange(usable, dtype=float)
    logs = np.log(gaps)
    slope, intercept = np.polyfit(k, logs, 1)
    residuals = logs - (slope * k + intercept)
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return RateFit(rate=float(np.exp(slope)), r_squared=r_squared)


def verify_descent_lemma(
    prob: ProblemInstance, K, G: np.ndarray, sigma_grid: Sequence[float]
) -> DescentCheck:
    """Check ``f(K - sigma G) - f* <= (1 - sigma/mu)(f(K) - f*)`` over a grid.

    ``mu`` is fitted as the smallest value that makes the inequality hold at
    the largest step size with a strict gap reduction; each grid entry is then
    judged against that fitted ``mu``.
    """
    fb = gain(prob, K)
    if not fb.stabilizing:
        raise StabilityError("descent check requires a stabilizing gain", fb.max_re)
    sigmas = tuple(float(s) for s in sigma_grid)
    if any(s < 0 for s in sigmas):
        raise ValidationError("sigma grid entries must be non-negative")
    _, K_star_fb = newton_kleinman(prob)
    f_star = objective(prob, K_star_fb)
    f0 = objective(prob, fb)
    gap0 = f0 - f_star
    ratios = []
    for s in sigmas:
        f_s = objective(prob, fb.K - s * G)
        ratios.append((f_s - f_star) / gap0 if gap0 > 0 else (0.0 if f_s <= f0 else math.inf))
    passing = [s for s, r in zip(sigmas, ratios) if s > 0 and r < 1.0]
    if passing:
        s_max = max(passing)
        mu_fit = s_max / (1.0 - ratios[sigmas.index(s_max)])
    else:
        mu_fit = math.inf
    holds = tuple(
        r <= (1.0 - (s / mu_fit if mu_fit != math.inf else 0.0)) + 1e-12
        for s, r in zip(sigmas, ratios)
    )
    return DescentCheck(sigmas=sigmas, holds=holds, ratios=tuple(ratios), mu_fit=mu_fit)


def verify_gain_contraction(trace: IterationTrace, b_cap: float = 2.0) -> ContractionCheck:
    """Check ``gain_err[k]^2 <= b_cap * b_hat * rate^k * gain_err[0]^2``.

    ``b_hat = lambda_max(R X(K0))`` and ``rate`` is the largest observed
    per-step gap ratio (falling back to the least-squares rate when some step
    increased the gap).
    """
    if trace.K_star is None or len(trace) < 2:
        raise ValidationError("gain contraction needs a converging trace with ground truth")
    # lambda_max of the Kronecker-product weight X(K0) (x) R, which bounds
    # trace(D' R D X(K0)) / norm(D)^2 over all gain perturbations D.  The
    # k = 0 case forces any valid absolute constant to be >= 1, so the
    # effective bound clamps b_hat up from below.
    X0 = state_covariance_X(trace.prob, trace.K0).X
    b_hat = float(np.linalg.eigvalsh(trace.prob.R)[-1] * np.linalg.eigvalsh(X0)[-1])
    b_effective = b_cap * max(b_hat, 1.0)

    gaps = trace.f_gap
    steps = [gaps[i + 1] / gaps[i] for i in range(len(gaps) - 1) if gaps[i] > 0 and gaps[i + 1] > 0]
    rate = max(steps) if steps else math.nan
    if not (0 < rate < 1):
        rate = fit_linear_rate(trace).rate

    err0_sq = float(trace.gain_err[0]) ** 2
    max_ratio, first_violation = 0.0, None
    for k in range(len(trace)):
        bound = b_effective * rate**k * err0_sq
        ratio = float(trace.gain_err[k]) ** 2 / bound if bound > 0 else math.inf
        max_ratio = max(max_ratio, ratio)
        if ratio > 1.0 + 1e-9 and first_violation is None:
            first_violation = k
    return ContractionCheck(
        ok=first_violation is None and 0 < rate < 1,
        b_hat=b_hat,
        b_effective=b_effective,
        rate=rate,
        max_ratio=max_ratio,
        first_violation=first_violation,
        b_hat_at_least_one=b_hat >= 1.0,
    )
