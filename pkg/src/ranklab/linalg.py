"""Dense matrix primitives: SVD, numerical rank, the rank-bump operator, matrix cosine.

All operations work on real double-precision numpy arrays and are pure; there is
no shared mutable state, so everything here is safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, FullRankError, InvalidInput, PerturbationTooLarge

# Singular values below this fraction of sigma_1 are treated as exact zeros when
# deciding where the bumped entry goes.
_MACHINE_TAIL = 1e-12


@dataclass(frozen=True)
class RankTolerance:
    """Relative threshold defining numerical rank: count sigma_i > threshold * sigma_1."""

    relative_threshold: float = 1e-9

    def __post_init__(self):
        if not 0.0 < self.relative_threshold < 1.0:
            raise InvalidInput(
                f"relative_threshold must lie in (0, 1), got {self.relative_threshold}"
            )


DEFAULT_TOLERANCE = RankTolerance()


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD A = U @ diag(singular_values) @ V.T with descending singular values."""

    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.singular_values) @ self.V.T


def as_matrix(A, name="matrix") -> np.ndarray:
    """Validate and convert input to a non-empty finite float64 2-D array."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.size == 0:
        raise InvalidInput(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return A


def svd(A) -> SvdFactors:
    """Thin singular value decomposition of a dense matrix."""
    A = as_matrix(A)
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    return SvdFactors(U=U, singular_values=s, V=Vh.T)


def numerical_rank(A, tol: RankTolerance = DEFAULT_TOLERANCE) -> int:
    """Count of singular values above tol.relative_threshold * sigma_1 (0 for the zero matrix)."""
    A = as_matrix(A)
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol.relative_threshold * s[0]))


def rank_bump(A, eps: float, tol: RankTolerance = DEFAULT_TOLERANCE) -> np.ndarray:
    """Raise the numerical rank of A by one at spectral distance eps.

    Replaces the (r+1)-th singular value of the rank-r input with eps, zeroing the
    trailing tail, so that ||A - A_hat||_2 = eps and rank(A_hat) = r + 1.
    Requires eps < sigma_r so the bumped spectrum stays descending; for the zero
    matrix eps becomes sigma_1.
    """
    A = as_matrix(A)
    if eps <= 0:
        raise InvalidInput(f"eps must be positive, got {eps}")
    factors = svd(A)
    s = factors.singular_values.copy()
    if s[0] > 0:
        s[s < _MACHINE_TAIL * s[0]] = 0.0
    r = int(np.count_nonzero(s > tol.relative_threshold * s[0])) if s[0] > 0 else 0
    if r >= min(A.shape):
        raise FullRankError(f"matrix of shape {A.shape} already has full rank {r}")
    if r > 0 and eps >= s[r - 1]:
        raise PerturbationTooLarge(
            f"eps={eps} must be smaller than the smallest retained singular value {s[r - 1]}"
        )
    bumped = np.zeros_like(s)
    bumped[:r] = s[:r]
    bumped[r] = eps
    return (factors.U * bumped) @ factors.V.T


def matrix_cosine(A, B) -> float:
    """trace(A.T @ B) / (||A||_F ||B||_F), the cosine of the angle between two matrices."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape != B.shape:
        raise InvalidInput(f"shape mismatch: {A.shape} vs {B.shape}")
    na = np.linalg.norm(A)
    nb = np.linalg.norm(B)
    if na == 0.0 or nb == 0.0:
        raise DegenerateInput("matrix cosine is undefined for the zero matrix")
    return float(np.trace(A.T @ B) / (na * nb))


def spectral_norm(A) -> float:
    return float(np.linalg.svd(as_matrix(A), compute_uv=False)[0])
