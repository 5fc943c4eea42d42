"""Continuous-time Lyapunov equation solvers.

Solves ``A X + X A' + Omega = 0`` two ways:

* a direct solve of the vectorized linear system (the reference route), and
* a truncated-integral method that approximates
  ``X = integral_0^inf exp(A t) Omega exp(A' t) dt`` with a trapezoidal rule
  whose horizon and node count are chosen from certified error bounds.

The truncation horizon comes from the exponential-envelope tail bound
``norm(X - X_tau) <= (norm(Omega) * norm(X) * kappa / lambda_min(X)) * exp(-tau/kappa)``
with ``kappa = norm(X) / lambda_min(Omega)``; the node count comes from the
trapezoid error ``tau^3 / (12 K^2) * max|F''|`` with
``max|F''| <= 4 norm(A)^2 norm(Omega) rho^2``.  The ``rho^2`` factor accounts
for transient growth of ``exp(A t)`` on non-normal matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Literal

import numpy as np

from .errors import BudgetError, ConvergenceError, DimensionError, StabilityError, ValidationError
from .linalg import (
    DecayEnvelope,
    as_matrix,
    decay_envelope,
    is_hurwitz,
    kron_vectorize,
    matrix_exponential,
    require_symmetric,
    unvec,
    vec,
)

__all__ = [
    "LyapunovSolution",
    "QuadraturePlan",
    "solve_lyapunov_direct",
    "truncation_horizon",
    "quadrature_plan",
    "solve_lyapunov_quadrature",
    "node_exponentials",
]

#: Largest panel count the quadrature solver will attempt.
DEFAULT_NODE_CAP = 1_000_000

#: Dimension up to which the horizon bounds are bootstrapped by a direct solve.
BOOTSTRAP_MAX_DIM = 64

#: Steps between re-anchoring of the incremental node exponentials.
ANCHOR_EVERY = 64


@dataclass(frozen=True)
class LyapunovSolution:
    """Solution matrix with its residual and the method that produced it."""

    X: np.ndarray
    residual_norm: float
    method: Literal["direct", "quadrature"]
    tau: float | None = None
    nodes: int | None = None
    error_budget: float | None = None

    def __post_init__(self):
        require_symmetric(self.X, "X")
        if self.residual_norm < 0:
            raise ValidationError("residual_norm must be non-negative")
        if self.method not in ("direct", "quadrature"):
            raise ValidationError(f"unknown method {self.method!r}")
        if self.method == "quadrature":
            if self.tau is None or self.tau <= 0:
                raise ValidationError("quadrature solutions must record tau > 0")
            if self.nodes is None or self.nodes < 2:
                raise ValidationError("quadrature solutions must record nodes >= 2")


@dataclass(frozen=True)
class QuadraturePlan:
    """Trapezoid rule over ``[0, tau]`` with ``nodes`` panels (``nodes + 1`` points).

    Endpoint weights are ``tau / (2 K)``, interior weights ``tau / K``, and the
    weights sum to ``tau``.
    """

    tau: float
    nodes: int
    weights: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        if self.tau <= 0:
            raise ValidationError("tau must be positive")
        if self.nodes < 2:
            raise ValidationError("nodes must be >= 2")
        if len(self.weights) != self.nodes + 1 or len(self.times) != self.nodes + 1:
            raise DimensionError("weights/times must have nodes + 1 entries")


def _residual(A: np.ndarray, X: np.ndarray, Omega: np.ndarray) -> float:
    return float(np.linalg.norm(A @ X + X @ A.T + Omega))


def solve_lyapunov_direct(A, Omega, hurwitz_margin: float = 1e-9) -> LyapunovSolution:
    """Solve ``A X + X A' + Omega = 0`` via the vectorized linear system.

    ``A`` must be Hurwitz (the equation has a unique solution exactly then)
    and ``Omega`` symmetric.  The result is symmetrized and, when ``Omega`` is
    positive semidefinite, checked for positive semidefiniteness.
    """
    A = as_matrix(A, "A", square=True)
    Omega = require_symmetric(as_matrix(Omega, "Omega", square=True), "Omega")
    if A.shape != Omega.shape:
        raise DimensionError(f"A and Omega must share shape, got {A.shape} vs {Omega.shape}")
    stable, max_re = is_hurwitz(A, hurwitz_margin)
    if not stable:
        raise StabilityError(
            f"Lyapunov equation requires a Hurwitz coefficient matrix (max Re = {max_re:.3e})",
            max_re,
        )
    n = A.shape[0]
    X = unvec(np.linalg.solve(kron_vectorize(A), -vec(Omega)), n, n)
    X = 0.5 * (X + X.T)
    omega_eigs = np.linalg.eigvalsh(Omega)
    if omega_eigs[0] >= -1e-12 * max(1.0, float(omega_eigs[-1])):
        x_eigs = np.linalg.eigvalsh(X)
        if x_eigs[0] < -1e-10 * max(1.0, float(np.abs(x_eigs).max())):
            raise ConvergenceError(
                f"direct solution lost positive semidefiniteness (lambda_min = {x_eigs[0]:.3e})"
            )
    return LyapunovSolution(X=X, residual_norm=_residual(A, X, Omega), method="direct")


def truncation_horizon(
    envelope: DecayEnvelope,
    omega_norm: float,
    xstar_norm_bound: float,
    xstar_lambda_min: float,
    eps: float,
) -> float:
    """Integration horizon guaranteeing a truncation tail of at most ``eps``.

    Evaluates ``tau = kappa * log(omega_norm * xstar_norm * kappa /
    (eps * xstar_lambda_min))``, clamped below by ``kappa`` so degenerate
    (large ``eps``) requests still return a valid horizon.
    """
    for name, value in (
        ("omega_norm", omega_norm),
        ("xstar_norm_bound", xstar_norm_bound),
        ("xstar_lambda_min", xstar_lambda_min),
        ("eps", eps),
    ):
        if not (value > 0 and math.isfinite(value)):
            raise ValidationError(f"{name} must be positive and finite, got {value}")
    kappa = envelope.kappa
    tau = kappa * math.log(omega_norm * xstar_norm_bound * kappa / (eps * xstar_lambda_min))
    return max(tau, kappa)


def quadrature_plan(tau: float, alpha: float, eta: float, rho: float, eps1: float) -> QuadraturePlan:
    """Trapezoid plan meeting a quadrature-error budget of ``eps1``.

    ``alpha`` and ``eta`` bound the spectral norms of the coefficient matrix
    and the forcing term; ``rho`` bounds the transient growth of the
    propagator.  The panel count is
    ``K = ceil(sqrt(tau^3 * 4 alpha^2 eta rho^2 / (12 eps1)))`` with a floor
    of 2, so halving ``eps1`` multiplies ``K`` by ``sqrt(2)``.
    """
    for name, value in (("tau", tau), ("alpha", alpha), ("eta", eta), ("rho", rho), ("eps1", eps1)):
        if not (value > 0 and math.isfinite(value)):
            raise ValidationError(f"{name} must be positive and finite, got {value}")
    K = max(2, math.ceil(math.sqrt(tau**3 * 4.0 * alpha**2 * eta * rho**2 / (12.0 * eps1))))
    times = np.arange(K + 1) * (tau / K)
    weights = np.full(K + 1, tau / K)
    weights[0] = weights[-1] = tau / (2 * K)
    return QuadraturePlan(tau=tau, nodes=K, weights=weights, times=times)


def node_exponentials(A: np.ndarray, tau: float, nodes: int, anchor_every: int = ANCHOR_EVERY) -> Iterator[np.ndarray]:
    """Yield ``exp(A * k tau / nodes)`` for ``k = 0..nodes``.

    Consecutive nodes are advanced by a single precomputed step factor and
    re-anchored with a fresh evaluation every ``anchor_every`` steps to limit
    multiplicative drift.
    """
    n = A.shape[0]
    step = tau / nodes
    E_step = matrix_exponential(A, step)
    E = np.eye(n)
    for k in range(nodes + 1):
        if k > 0:
            E = matrix_exponential(A, k * step) if k % anchor_every == 0 else E @ E_step
        yield E


def _weighted_propagator_sum(A: np.ndarray, Omega: np.ndarray, plan: QuadraturePlan, chunk: int = 512) -> np.ndarray:
    """Accumulate ``sum_k w_k exp(A t_k) Omega exp(A t_k)'`` in fixed order.

    Node propagators are advanced incrementally (re-anchored every
    ``ANCHOR_EVERY`` steps) and reduced chunk by chunk with a batched product,
    which keeps the reduction order deterministic.
    """
    n = A.shape[0]
    K = plan.nodes
    step = plan.tau / K
    E_step = matrix_exponential(A, step)
    E = np.eye(n)
    total = np.zeros((n, n))
    buf = np.empty((min(chunk, K + 1), n, n))
    start = 0
    while start <= K:
        count = min(chunk, K + 1 - start)
        for j in range(count):
            k = start + j
            if k > 0:
                E = matrix_exponential(A, k * step) if k % ANCHOR_EVERY == 0 else E @ E_step
            buf[j] = E
        W = buf[:count]
        total += np.einsum("k,kij,klj->il", plan.weights[start : start + count], W @ Omega, W)
        start += count
    return total


def solve_lyapunov_quadrature(
    A,
    Omega,
    eps: float,
    node_cap: int = DEFAULT_NODE_CAP,
    grid_points: int = 64,
    xstar_bounds: tuple[float, float] | None = None,
) -> LyapunovSolution:
    """Solve the Lyapunov equation by truncated-integral trapezoid quadrature.

    The total budget ``eps`` is split as ``2 eps / 3`` for the truncated tail
    and ``eps / 3`` for the quadrature error.  Both bounds are evaluated with
    the Frobenius norm of ``Omega``, so the guarantee
    ``norm(X - X_direct, 'fro') <= eps`` holds in the Frobenius norm.

    Parameters
    ----------
    eps : float
        Requested Frobenius-norm accuracy of the returned solution.
    node_cap : int
        Largest admissible panel count; a finer requirement raises
        :class:`BudgetError` telling the caller ``eps`` is infeasible here.
    xstar_bounds : (norm, lambda_min), optional
        Bounds on the exact solution used by the horizon formula.  When
        omitted they are bootstrapped from a direct solve (dimension <= 64).
    """
    A = as_matrix(A, "A", square=True)
    Omega = require_symmetric(as_matrix(Omega, "Omega", square=True), "Omega")
    if A.shape != Omega.shape:
        raise DimensionError(f"A and Omega must share shape, got {A.shape} vs {Omega.shape}")
    if not (eps > 0 and math.isfinite(eps)):
        raise ValidationError(f"eps must be positive and finite, got {eps}")
    omega_eigs = np.linalg.eigvalsh(Omega)
    if omega_eigs[0] <= 0:
        raise ValidationError(
            f"quadrature route requires positive-definite Omega (lambda_min = {omega_eigs[0]:.3e})"
        )

    envelope = decay_envelope(A, grid_points)
    if xstar_bounds is not None:
        xstar_norm, xstar_lambda_min = xstar_bounds
    elif A.shape[0] <= BOOTSTRAP_MAX_DIM:
        boot = solve_lyapunov_direct(A, Omega)
        boot_eigs = np.linalg.eigvalsh(boot.X)
        xstar_norm = float(boot_eigs[-1])
        xstar_lambda_min = float(max(boot_eigs[0], np.finfo(float).tiny))
    else:
        raise ValidationError(
            "xstar_bounds must be supplied for dimensions above "
            f"{BOOTSTRAP_MAX_DIM} (no bootstrap solve available)"
        )

    omega_norm_fro = float(np.linalg.norm(Omega))
    kappa = xstar_norm / float(omega_eigs[0])
    tail_envelope = DecayEnvelope(rho=envelope.rho, kappa=kappa)
    tau = truncation_horizon(tail_envelope, omega_norm_fro, xstar_norm, xstar_lambda_min, 2.0 * eps / 3.0)

    alpha = float(np.linalg.norm(A, 2))
    plan = quadrature_plan(tau, alpha, omega_norm_fro, envelope.rho, eps / 3.0)
    if plan.nodes > node_cap:
        raise BudgetError(
            f"eps = {eps:.3e} needs {plan.nodes} trapezoid panels, above the cap of {node_cap}",
            measured=float(plan.nodes),
        )

    X = _weighted_propagator_sum(A, Omega, plan)
    X = 0.5 * (X + X.T)
    return LyapunovSolution(
        X=X,
        residual_norm=_residual(A, X, Omega),
        method="quadrature",
        tau=tau,
        nodes=plan.nodes,
        error_budget=eps,
    )
