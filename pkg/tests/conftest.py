"""Shared generators for randomized test instances."""

import numpy as np
import pytest


def random_hurwitz(n: int, rng: np.random.Generator, margin: float = 0.3) -> np.ndarray:
    """Random dense Hurwitz matrix with spectral abscissa below ``-margin``."""
    G = rng.standard_normal((n, n)) / np.sqrt(n)
    shift = float(np.max(np.linalg.eigvals(G).real)) + margin
    return G - shift * np.eye(n)


def random_spd(n: int, rng: np.random.Generator, spread: float = 2.0) -> np.ndarray:
    """Random symmetric positive-definite matrix with modest conditioning."""
    G = rng.standard_normal((n, n))
    return G @ G.T / n + spread * np.eye(n) / 2.0


def lyapunov_bench_instance(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Well-damped Lyapunov test pair (A, Omega) with bounded certified cost.

    Contraction rates are spread over [1.5, 7] with a small skew coupling, so
    the truncated-integral solver's certified node counts stay in the 1e3-1e5
    range across the acceptance tolerance ladder.
    """
    G = rng.standard_normal((n, n))
    Uq, _ = np.linalg.qr(G)
    D = Uq @ np.diag(rng.uniform(1.5, 7.0, n)) @ Uq.T
    W = rng.standard_normal((n, n))
    W = 0.3 * (W - W.T)
    S = rng.standard_normal((n, n))
    Omega = 2.0 * (np.eye(n) + 0.25 * (S @ S.T) / n)
    return -(D + W), Omega


def fd_gradient(prob, K: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of the LQR objective, entry by entry."""
    from lqrkit.lqr import objective

    K = np.asarray(K, dtype=float)
    G = np.zeros_like(K)
    for i in range(K.shape[0]):
        for j in range(K.shape[1]):
            bump = np.zeros_like(K)
            bump[i, j] = h
            G[i, j] = (objective(prob, K + bump) - objective(prob, K - bump)) / (2.0 * h)
    return G


def stabilizing_gains(prob, K_star: np.ndarray, count: int, rng: np.random.Generator,
                      r_min: float = 0.05, r_max: float = 1.0) -> list[np.ndarray]:
    """Seeded stabilizing gains at various distances from the optimum."""
    from lqrkit.lqr import gain, objective

    out = []
    attempts = 0
    while len(out) < count and attempts < 100 * count:
        attempts += 1
        U = rng.standard_normal(K_star.shape)
        U /= np.linalg.norm(U)
        radius = 10 ** rng.uniform(np.log10(r_min), np.log10(r_max))
        K = K_star + radius * U
        fb = gain(prob, K)
        if fb.stabilizing and np.isfinite(objective(prob, fb)):
            out.append(K)
    assert len(out) == count, f"only drew {len(out)} of {count} stabilizing gains"
    return out


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
