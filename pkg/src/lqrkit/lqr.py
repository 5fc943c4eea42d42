"""Continuous-time LQR model: objective, value matrices, exact policy gradient.

The objective of a stabilizing feedback gain ``K`` is
``f(K) = trace(P(K) @ Sigma0)`` where ``P(K)`` solves

    (A - B K)' P + P (A - B K) + Q + K' R K = 0,

and the policy gradient has the closed form
``grad f(K) = 2 (R K - B' P(K)) X(K)`` with ``X(K)`` the closed-loop Gramian
driven by ``Sigma0``.  Non-stabilizing gains evaluate to ``inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DimensionError, StabilityError, ValidationError
from .linalg import DEFAULT_HURWITZ_MARGIN, as_matrix, is_hurwitz, require_symmetric
from .lyapunov import LyapunovSolution, solve_lyapunov_direct, solve_lyapunov_quadrature

__all__ = [
    "ProblemInstance",
    "FeedbackGain",
    "SublevelConstants",
    "problem",
    "gain",
    "controllability_matrix",
    "value_matrix_P",
    "state_covariance_X",
    "objective",
    "exact_gradient",
    "are_residual",
    "newton_kleinman",
    "initial_gain",
    "sublevel_constants",
    "value_matrix_floor",
]

#: Singular-value threshold for the controllability rank test, relative to
#: the largest singular value of the controllability matrix.
CTRB_RTOL = 1e-8

#: Safety factor applied to the empirical gradient-dominance constant before
#: it enters any error budget.
MU_SAFETY = 0.5


@dataclass(frozen=True)
class ProblemInstance:
    """LQR problem data ``(A, B, Q, R, Sigma0)`` with dimensions ``n``, ``m``.

    Build through :func:`problem`, which validates shapes, symmetry,
    positive-definiteness, and controllability.
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    Sigma0: np.ndarray
    n: int
    m: int


@dataclass(frozen=True)
class FeedbackGain:
    """A feedback gain with its cached closed-loop matrix and stability status."""

    K: np.ndarray
    closed_loop: np.ndarray
    stabilizing: bool
    max_re: float


@dataclass(frozen=True)
class SublevelConstants:
    """Bounds valid on the sublevel set ``{K : f(K) <= a}``.

    ``nu`` is the conditioning constant
    ``(1/4) (norm(A)/sqrt(lmin(Q)) + norm(B)/sqrt(lmin(R)))^-2``;
    ``c_lower`` multiplies the distance-to-optimum in the gradient-norm
    lower bound ``norm(grad f) >= c * eps`` and uses the (safety-discounted)
    gradient-dominance estimate ``mu_f``.
    """

    a: float
    nu: float
    trace_X_bound: float
    K_norm_bound: float
    c_lower: float
    mu_f: float


def _freeze(M: np.ndarray) -> np.ndarray:
    M = np.array(M, dtype=float)
    M.flags.writeable = False
    return M


def controllability_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Stacked controllability matrix ``[B, AB, ..., A^(n-1) B]``."""
    blocks, current = [], B
    for _ in range(A.shape[0]):
        blocks.append(current)
        current = A @ current
    return np.hstack(blocks)


def problem(A, B, Q, R, Sigma0=None) -> ProblemInstance:
    """Validate LQR data and return an immutable :class:`ProblemInstance`.

    ``Q``, ``R`` and ``Sigma0`` (default identity) must be symmetric positive
    definite, and ``(A, B)`` must be controllable under the singular-value
    rank test.
    """
    A = as_matrix(A, "A", square=True)
    B = as_matrix(B, "B")
    n = A.shape[0]
    if B.shape[0] != n:
        raise DimensionError(f"B must have {n} rows, got {B.shape}")
    m = B.shape[1]
    Q = require_symmetric(as_matrix(Q, "Q", square=True), "Q")
    R = require_symmetric(as_matrix(R, "R", square=True), "R")
    if Q.shape[0] != n:
        raise DimensionError(f"Q must be {n}x{n}, got {Q.shape}")
    if R.shape[0] != m:
        raise DimensionError(f"R must be {m}x{m}, got {R.shape}")
    Sigma0 = np.eye(n) if Sigma0 is None else require_symmetric(as_matrix(Sigma0, "Sigma0", square=True), "Sigma0")
    if Sigma0.shape[0] != n:
        raise DimensionError(f"Sigma0 must be {n}x{n}, got {Sigma0.shape}")
    for name, M in (("Q", Q), ("R", R), ("Sigma0", Sigma0)):
        lmin = float(np.linalg.eigvalsh(M)[0])
        if lmin <= 0:
            raise ValidationError(f"{name} must be positive definite (lambda_min = {lmin:.3e})")
    svals = np.linalg.svd(controllability_matrix(A, B), compute_uv=False)
    if svals[-1] <= CTRB_RTOL * svals[0]:
        raise ValidationError(
            f"(A, B) fails the controllability rank test (sigma_min/sigma_max = {svals[-1] / svals[0]:.3e})"
        )
    return ProblemInstance(
        A=_freeze(A), B=_freeze(B), Q=_freeze(Q), R=_freeze(R), Sigma0=_freeze(Sigma0), n=n, m=m
    )


def gain(prob: ProblemInstance, K, margin: float = DEFAULT_HURWITZ_MARGIN) -> FeedbackGain:
    """Wrap a gain matrix with its closed loop and stability verdict."""
    if isinstance(K, FeedbackGain):
        return K
    K = as_matrix(K, "K")
    if K.shape != (prob.m, prob.n):
        raise DimensionError(f"K must be {prob.m}x{prob.n}, got {K.shape}")
    closed = prob.A - prob.B @ K
    stable, max_re = is_hurwitz(closed, margin)
    return FeedbackGain(K=_freeze(K), closed_loop=_freeze(closed), stabilizing=stable, max_re=max_re)


def value_matrix_P(
    prob: ProblemInstance,
    K,
    eps: float = 1e-9,
    method: str = "direct",
    node_cap: int | None = None,
) -> LyapunovSolution:
    """Value matrix ``P(K)``: solution of the closed-loop cost equation.

    Raises :class:`StabilityError` for non-stabilizing gains (their objective
    is the infinity sentinel, see :func:`objective`).  With
    ``method="quadrature"`` the truncated-integral solver is used at accuracy
    ``eps``; the default direct solve is accurate to machine precision.

    The result is certified against the eigenvalue floor
    ``lambda_min(P) >= lambda_min(Q) / (2 norm(A - B K))``, which follows from
    ``norm(exp((A - B K) t) v) >= exp(-norm(A - B K) t) norm(v)`` in the
    integral representation of ``P``.
    """
    fb = gain(prob, K)
    if not fb.stabilizing:
        raise StabilityError(
            f"K is not stabilizing (max Re = {fb.max_re:.3e}); objective is infinite", fb.max_re
        )
    cost = prob.Q + fb.K.T @ prob.R @ fb.K
    if method == "direct":
        sol = solve_lyapunov_direct(fb.closed_loop.T, cost)
    elif method == "quadrature":
        kwargs = {} if node_cap is None else {"node_cap": node_cap}
        sol = solve_lyapunov_quadrature(fb.closed_loop.T, cost, eps, **kwargs)
    else:
        raise ValidationError(f"unknown method {method!r}")
    lmin_P = float(np.linalg.eigvalsh(sol.X)[0])
    floor = value_matrix_floor(prob, fb)
    if lmin_P < floor - eps - 1e-8 * max(1.0, floor):
        raise ConvergenceError(
            f"value matrix violated lambda_min(P) >= lambda_min(Q) / (2 norm(A - B K)) - eps "
            f"({lmin_P:.6e} < {floor:.6e} - {eps:.1e})"
        )
    return sol


def value_matrix_floor(prob: ProblemInstance, K) -> float:
    """Certified eigenvalue floor ``lambda_min(Q) / (2 norm(A - B K))`` of ``P(K)``."""
    fb = gain(prob, K)
    lmin_Q = float(np.linalg.eigvalsh(prob.Q)[0])
    return lmin_Q / (2.0 * float(np.linalg.norm(fb.closed_loop, 2)))


def state_covariance_X(prob: ProblemInstance, K, eps: float = 1e-9, method: str = "direct") -> LyapunovSolution:
    """Closed-loop state Gramian ``X(K)`` driven by ``Sigma0``."""
    fb = gain(prob, K)
    if not fb.stabilizing:
        raise StabilityError(
            f"K is not stabilizing (max Re = {fb.max_re:.3e}); covariance diverges", fb.max_re
        )
    if method == "direct":
        return solve_lyapunov_direct(fb.closed_loop, prob.Sigma0)
    if method == "quadrature":
        return solve_lyapunov_quadrature(fb.closed_loop, prob.Sigma0, eps)
    raise ValidationError(f"unknown method {method!r}")


def objective(prob: ProblemInstance, K, eps: float = 1e-9) -> float:
    """LQR objective ``f(K) = trace(P(K) Sigma0)``; ``inf`` when not stabilizing."""
    fb = gain(prob, K)
    if not fb.stabilizing:
        return math.inf
    P = value_matrix_P(prob, fb, eps).X
    return float(np.trace(P @ prob.Sigma0))


def exact_gradient(prob: ProblemInstance, K, eps: float = 1e-9) -> np.ndarray:
    """Closed-form policy gradient ``2 (R K - B' P(K)) X(K)``."""
    fb = gain(prob, K)
    if not fb.stabilizing:
        raise StabilityError(f"gradient undefined off the stabilizing set (max Re = {fb.max_re:.3e})", fb.max_re)
    P = value_matrix_P(prob, fb, eps).X
    X = state_covariance_X(prob, fb, eps).X
    return 2.0 * (prob.R @ fb.K - prob.B.T @ P) @ X


def are_residual(prob: ProblemInstance, P: np.ndarray) -> float:
    """Frobenius residual of the algebraic Riccati equation at ``P``."""
    BtP = prob.B.T @ P
    return float(
        np.linalg.norm(prob.A.T @ P + P @ prob.A + prob.Q - BtP.T @ np.linalg.solve(prob.R, BtP))
    )


def newton_kleinman(
    prob: ProblemInstance,
    K0: FeedbackGain | np.ndarray | None = None,
    tol: float = 1e-11,
    max_iters: int = 200,
) -> tuple[np.ndarray, FeedbackGain]:
    """Solve the Riccati equation by gain iteration ``K <- R^-1 B' P(K)``.

    Each sweep solves one Lyapunov equation; from a stabilizing start the
    iterates stay stabilizing and converge quadratically.  Returns the value
    matrix with ARE residual at most ``tol`` and the associated gain.
    """
    fb = initial_gain(prob) if K0 is None else gain(prob, K0)
    if not fb.stabilizing:
        raise StabilityError("Newton-Kleinman requires a stabilizing initial gain", fb.max_re)
    P = value_matrix_P(prob, fb).X
    for it in range(max_iters):
        if are_residual(prob, P) <= tol:
            break
        K_next = np.linalg.solve(prob.R, prob.B.T @ P)
        fb_next = gain(prob, K_next)
        if not fb_next.stabilizing:
            raise ConvergenceError(
                f"gain iteration left the stabilizing set at sweep {it} "
                f"(max Re = {fb_next.max_re:.3e}); input data may be near-singular",
                iterations=it,
            )
        fb = fb_next
        P = value_matrix_P(prob, fb).X
    else:
        raise ConvergenceError(
            f"Riccati residual {are_residual(prob, P):.3e} above tol {tol:.1e} "
            f"after {max_iters} sweeps",
            iterations=max_iters,
        )
    return P, gain(prob, np.linalg.solve(prob.R, prob.B.T @ P))


def initial_gain(prob: ProblemInstance) -> FeedbackGain:
    """Construct a stabilizing gain when the caller provides none.

    A pole-shifted Gramian ``S`` solving ``(A + beta I) S + S (A + beta I)' =
    2 B B'`` yields the stabilizing gain ``B' S^-1`` (the closed loop then
    satisfies a strict Lyapunov inequality with certificate ``S``), which
    seeds a cheap auxiliary Riccati solve with unit weights to produce a
    well-scaled starting point.
    """
    beta = float(np.linalg.norm(prob.A, 2)) + 1.0
    S = solve_lyapunov_direct(-(prob.A + beta * np.eye(prob.n)), 2.0 * prob.B @ prob.B.T).X
    K_shift = gain(prob, prob.B.T @ np.linalg.solve(S, np.eye(prob.n)))
    if not K_shift.stabilizing:
        raise ConvergenceError(
            f"pole-shifted seed gain failed to stabilize (max Re = {K_shift.max_re:.3e})"
        )
    aux = ProblemInstance(
        A=prob.A, B=prob.B, Q=_freeze(np.eye(prob.n)), R=_freeze(np.eye(prob.m)),
        Sigma0=prob.Sigma0, n=prob.n, m=prob.m,
    )
    _, fb = newton_kleinman(aux, K_shift, tol=1e-9)
    return gain(prob, fb.K)


def sublevel_constants(
    prob: ProblemInstance,
    a: float,
    mu_f: float | None = None,
    samples: int = 24,
    seed: int = 0,
) -> SublevelConstants:
    """Constants controlling the sublevel set ``{f <= a}``.

    ``mu_f`` (the gradient-dominance constant) has no closed form; when not
    supplied it is estimated as the smallest observed ratio
    ``norm(grad f)^2 / (2 (f - f*))`` over a seeded sample of sublevel-set
    gains, then discounted by the safety factor before entering ``c_lower``.
    """
    lmin_Q = float(np.linalg.eigvalsh(prob.Q)[0])
    lmin_R = float(np.linalg.eigvalsh(prob.R)[0])
    nu = 0.25 / (
        np.linalg.norm(prob.A, 2) / math.sqrt(lmin_Q) + np.linalg.norm(prob.B, 2) / math.sqrt(lmin_R)
    ) ** 2
    Pstar, Kstar = newton_kleinman(prob)
    f_star = float(np.trace(Pstar @ prob.Sigma0))
    if not a > f_star:
        raise ValidationError(f"a = {a} must exceed the optimal value f* = {f_star:.6e}")
    if mu_f is None:
        mu_f = _estimate_mu(prob, a, Kstar.K, f_star, samples, seed)
    c_lower = math.sqrt(2.0 * MU_SAFETY * mu_f * nu * lmin_R / a)
    return SublevelConstants(
        a=a,
        nu=float(nu),
        trace_X_bound=a / lmin_Q,
        K_norm_bound=a / math.sqrt(nu * lmin_R),
        c_lower=c_lower,
        mu_f=mu_f,
    )


def _estimate_mu(
    prob: ProblemInstance, a: float, Kstar: np.ndarray, f_star: float, samples: int, seed: int
) -> float:
    rng = np.random.default_rng(seed)
    ratios = []
    attempts = 0
    while len(ratios) < samples and attempts < 40 * samples:
        attempts += 1
        U = rng.standard_normal(Kstar.shape)
        U /= np.linalg.norm(U)
        radius = 10 ** rng.uniform(-2.0, 0.5)
        fb = gain(prob, Kstar + radius * U)
        if not fb.stabilizing:
            continue
        f = objective(prob, fb)
        if not (f_star < f <= a):
            continue
        grad_sq = float(np.linalg.norm(exact_gradient(prob, fb)) ** 2)
        ratios.append(grad_sq / (2.0 * (f - f_star)))
    if len(ratios) < max(4, samples // 4):
        raise ConvergenceError(
            f"could not draw enough sublevel-set samples to estimate mu_f "
            f"({len(ratios)} of {samples})"
        )
    return float(min(ratios))
