"""Dense real-matrix primitives: exponentials, stability tests, spectra.

Everything here operates on plain 2-D ``float64`` ndarrays.  Inputs are
validated at the boundary (finite entries, shape, symmetry where required)
and all operations are pure, so the functions are safe to call from
multiple threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, DimensionError, StabilityError, ValidationError

__all__ = [
    "SpectralSummary",
    "DecayEnvelope",
    "HurwitzResult",
    "as_matrix",
    "matrix_exponential",
    "is_hurwitz",
    "spectral_summary",
    "decay_envelope",
    "kron_vectorize",
    "vec",
    "unvec",
]

#: Default eigenvalue margin below which a system counts as marginal.
DEFAULT_HURWITZ_MARGIN = 1e-9

#: Relative asymmetry tolerated before a matrix stops counting as symmetric.
SYMMETRY_RTOL = 1e-10

#: Multiplicative headroom on the measured transient-growth bound.
RHO_HEADROOM = 1.1


def as_matrix(M, name: str = "matrix", square: bool = False) -> np.ndarray:
    """Validate and return ``M`` as a 2-D float64 array with finite entries."""
    A = np.asarray(M, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got ndim={A.ndim}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise DimensionError(f"{name} must be non-empty, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{name} contains non-finite entries")
    if square and A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    return A


def require_symmetric(M: np.ndarray, name: str = "matrix", rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """Raise unless ``M`` is symmetric within relative tolerance ``rtol``."""
    asym = np.linalg.norm(M - M.T)
    scale = max(1.0, np.linalg.norm(M))
    if asym > rtol * scale:
        raise ValidationError(
            f"{name} is not symmetric: relative asymmetry {asym / scale:.3e} exceeds {rtol:.1e}"
        )
    return 0.5 * (M + M.T)


def vec(X: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization of a matrix."""
    return X.reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return v.reshape(rows, cols, order="F")


# Pade-13 numerator coefficients and the 1-norm threshold above which the
# argument is scaled by a power of two before evaluation.
_PADE13_B = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_PADE13_THETA = 5.371920351148152


def _expm_pade13(A: np.ndarray) -> np.ndarray:
    b = _PADE13_B
    n = A.shape[0]
    ident = np.eye(n)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
    return np.linalg.solve(V - U, V + U)


def matrix_exponential(M, t: float = 1.0, tol: float = 1e-9) -> np.ndarray:
    """Evaluate ``exp(M t)`` by scaling-and-squaring with a degree-13 Pade core.

    The number of squarings is chosen from the 1-norm of ``M t``; the
    backward error of this scheme is well below ``tol`` for every admissible
    tolerance, so the result satisfies
    ``norm(E - exp(M t)) <= tol * norm(exp(M t))``.

    Parameters
    ----------
    M : array_like, square
    t : float, >= 0
        Evaluation time.
    tol : float in (0, 1e-3]
        Requested relative accuracy (validated; the Pade-13 core overshoots it).
    """
    A = as_matrix(M, "M", square=True)
    if not np.isfinite(t) or t < 0:
        raise ValidationError(f"t must be finite and >= 0, got {t}")
    if not (0 < tol <= 1e-3):
        raise ValidationError(f"tol must lie in (0, 1e-3], got {tol}")
    if t == 0:
        return np.eye(A.shape[0])
    At = A * t
    norm1 = np.linalg.norm(At, 1)
    if norm1 == 0:
        return np.eye(A.shape[0])
    s = max(0, int(np.ceil(np.log2(norm1 / _PADE13_THETA)))) if norm1 > _PADE13_THETA else 0
    E = _expm_pade13(At / 2.0**s)
    for _ in range(s):
        E = E @ E
    return E


class HurwitzResult(NamedTuple):
    """Stability verdict plus the largest eigenvalue real part."""

    is_stable: bool
    max_real_part: float


def is_hurwitz(M, margin_tol: float = DEFAULT_HURWITZ_MARGIN) -> HurwitzResult:
    """Test whether every eigenvalue of ``M`` has real part below ``-margin_tol``."""
    A = as_matrix(M, "M", square=True)
    try:
        eigs = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceError(f"eigenvalue iteration did not converge: {exc}") from exc
    max_re = float(np.max(eigs.real))
    return HurwitzResult(max_re < -margin_tol, max_re)


@dataclass(frozen=True)
class SpectralSummary:
    """Eigen-derived scalars of a symmetric matrix."""

    lambda_min: float
    lambda_max: float
    spectral_norm: float
    frobenius_norm: float


def spectral_summary(M) -> SpectralSummary:
    """Return extreme eigenvalues and norms of a symmetric matrix.

    The eigenvalue fields are only meaningful for symmetric input, so
    asymmetric matrices are rejected.
    """
    A = as_matrix(M, "M", square=True)
    S = require_symmetric(A, "M")
    eigs = np.linalg.eigvalsh(S)
    lo, hi = float(eigs[0]), float(eigs[-1])
    return SpectralSummary(
        lambda_min=lo,
        lambda_max=hi,
        spectral_norm=max(abs(lo), abs(hi)),
        frobenius_norm=float(np.linalg.norm(S)),
    )


@dataclass(frozen=True)
class DecayEnvelope:
    """Transient bound ``rho >= sup_t norm(exp(M t))`` and decay constant ``kappa``.

    ``kappa`` is the time scale of the certified envelope
    ``norm(exp(M t))^2 <= cond * exp(-t / kappa)``; it equals the spectral
    norm of the solution of ``M X + X M' + I = 0``.
    """

    rho: float
    kappa: float

    def __post_init__(self):
        if not (self.rho >= 1.0):
            raise ValidationError(f"rho must be >= 1 for a Hurwitz generator, got {self.rho}")
        if not (self.kappa > 0):
            raise ValidationError(f"kappa must be positive, got {self.kappa}")


def _lyapunov_gramian(A: np.ndarray, Omega: np.ndarray) -> np.ndarray:
    """Solve ``A X + X A' + Omega = 0`` through the vectorized linear system."""
    n = A.shape[0]
    L = kron_vectorize(A)
    X = unvec(np.linalg.solve(L, -vec(Omega)), n, n)
    return 0.5 * (X + X.T)


def decay_envelope(M, grid_points: int = 64) -> DecayEnvelope:
    """Estimate the transient envelope of a Hurwitz matrix.

    ``rho`` is the maximum of ``norm(exp(M t))`` over a geometric time grid
    spanning ``[1e-3 * kappa, 20 * kappa]``, inflated by 10% headroom (and
    never below the ``t -> 0`` limit of 1).  ``kappa`` comes from the
    identity-forced Lyapunov solution.
    """
    A = as_matrix(M, "M", square=True)
    if grid_points < 16:
        raise ValidationError(f"grid_points must be >= 16, got {grid_points}")
    stable, max_re = is_hurwitz(A)
    if not stable:
        raise StabilityError(f"decay envelope requires a Hurwitz matrix (max Re = {max_re:.3e})", max_re)
    X = _lyapunov_gramian(A, np.eye(A.shape[0]))
    kappa = float(np.linalg.norm(X, 2))
    peak = 1.0
    for t in np.geomspace(1e-3 * kappa, 20.0 * kappa, grid_points):
        peak = max(peak, float(np.linalg.norm(matrix_exponential(A, t), 2)))
    return DecayEnvelope(rho=RHO_HEADROOM * peak, kappa=kappa)


def kron_vectorize(A) -> np.ndarray:
    """Matrix of the map ``X -> A X + X A'`` in column-stacked coordinates.

    Returns ``L = kron(I, A) + kron(A, I)`` so that
    ``L @ vec(X) == vec(A X + X A')`` for every ``X``.
    """
    M = as_matrix(A, "A", square=True)
    eye = np.eye(M.shape[0])
    return np.kron(eye, M) + np.kron(M, eye)
