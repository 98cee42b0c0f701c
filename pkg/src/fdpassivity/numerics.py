"""Dense complex linear algebra kernel.

Thin, contract-enforcing layer over LAPACK (via numpy): Hermitian and
general eigendecomposition, determinant, adjugate, trace, inverse and
linear solve, all at desk scale (matrices up to a few hundred rows).

Eigenvalue ordering is deterministic: Hermitian values ascend; general
values sort by (real part, imaginary part) with ties broken by original
index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    NoConvergenceError,
    NonFiniteError,
    NotHermitianError,
    SingularMatrixError,
)

# Relative symmetry tolerance for the Hermitian path.
HERMITIAN_RTOL = 1e-9
# Condition-number gates.
COND_LIMIT = 1e14        # inverse / solve refuse beyond this
DEFECTIVE_COND = 1e12    # general eigenvector matrix flagged beyond this
# Cofactor expansion up to this size; LU column replacement above.
_ADJUGATE_COFACTOR_MAX = 8


@dataclass(frozen=True)
class HermitianEigen:
    """Eigendecomposition of a Hermitian matrix.

    values are real and ascending, so values[0] is the minimum eigenvalue;
    vectors holds the matching orthonormal right eigenvectors as columns.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def min_value(self) -> float:
        return float(self.values[0])

    @property
    def min_vector(self) -> np.ndarray:
        return self.vectors[:, 0]

    @property
    def eigen_gap(self) -> float:
        """Separation between the two smallest eigenvalues (0 for 1x1)."""
        if self.values.size < 2:
            return 0.0
        return float(self.values[1] - self.values[0])


@dataclass(frozen=True)
class GeneralEigen:
    """Eigendecomposition of a general complex matrix.

    right holds right eigenvectors as columns, left holds left eigenvectors
    as rows, normalized so left @ right == I when the matrix is not
    defective. defective is set when the right-eigenvector matrix has a
    condition number above DEFECTIVE_COND.
    """

    values: np.ndarray
    right: np.ndarray
    left: np.ndarray
    defective: bool


def _as_square(a, op: str) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{op} expects a square matrix, got shape {a.shape}")
    return a


def _check_finite(a: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise NonFiniteError(f"{op}: matrix contains non-finite entries")


def hermitian_eigen(h) -> HermitianEigen:
    """Eigendecomposition of a Hermitian matrix, values ascending.

    Raises NotHermitianError when ||H - H^dagger|| exceeds
    HERMITIAN_RTOL * ||H||, NonFiniteError on NaN/inf entries.
    """
    h = _as_square(h, "hermitian_eigen")
    _check_finite(h, "hermitian_eigen")
    scale = np.linalg.norm(h)
    asym = np.linalg.norm(h - h.conj().T)
    if asym > HERMITIAN_RTOL * max(scale, 1e-300):
        raise NotHermitianError(
            f"matrix is not Hermitian: ||H - H^dagger|| = {asym:.3e} "
            f"(limit {HERMITIAN_RTOL * scale:.3e})"
        )
    try:
        values, vectors = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NoConvergenceError(f"hermitian_eigen failed to converge: {exc}") from exc
    return HermitianEigen(values=values, vectors=vectors)


def general_eigen(a) -> GeneralEigen:
    """Eigendecomposition of a general complex matrix.

    Values are sorted by (real, imag), ties by original index.  Left
    eigenvectors are the rows of the inverse of the right-eigenvector
    matrix; when that matrix is numerically singular the decomposition is
    flagged defective and a pseudo-inverse is returned instead.
    """
    a = _as_square(a, "general_eigen")
    _check_finite(a, "general_eigen")
    try:
        values, right = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise NoConvergenceError(f"general_eigen failed to converge: {exc}") from exc

    order = np.lexsort((np.arange(values.size), values.imag, values.real))
    values = values[order]
    right = right[:, order]

    cond = np.linalg.cond(right)
    defective = bool(not np.isfinite(cond) or cond > DEFECTIVE_COND)
    if defective:
        left = np.linalg.pinv(right)
    else:
        left = np.linalg.inv(right)
    return GeneralEigen(values=values, right=right, left=left, defective=defective)


def determinant(a) -> complex:
    """Determinant via LU. Never raises on singular input."""
    a = _as_square(a, "determinant")
    _check_finite(a, "determinant")
    return complex(np.linalg.det(a))


def trace(a) -> complex:
    a = _as_square(a, "trace")
    _check_finite(a, "trace")
    return complex(np.trace(a))


def _minor_det(a: np.ndarray, i: int, j: int) -> complex:
    keep_r = [r for r in range(a.shape[0]) if r != i]
    keep_c = [c for c in range(a.shape[1]) if c != j]
    sub = a[np.ix_(keep_r, keep_c)]
    if sub.size == 0:
        return 1.0 + 0.0j
    return complex(np.linalg.det(sub))


def adjugate(a) -> np.ndarray:
    """Adjugate matrix, stable near singularity.

    Satisfies A @ adj(A) == det(A) * I even when A is nearly singular.
    Cofactor (minor) expansion for n <= 8; for larger matrices each
    cofactor is the determinant of A with one column replaced by a unit
    vector, evaluated by LU.
    """
    a = _as_square(a, "adjugate")
    _check_finite(a, "adjugate")
    n = a.shape[0]
    if n == 1:
        return np.ones((1, 1), dtype=complex)
    adj = np.empty((n, n), dtype=complex)
    if n <= _ADJUGATE_COFACTOR_MAX:
        for i in range(n):
            for j in range(n):
                adj[j, i] = (-1) ** (i + j) * _minor_det(a, i, j)
    else:
        work = a.copy()  # keep the caller's matrix untouched
        for j in range(n):
            col = work[:, j].copy()
            for i in range(n):
                work[:, j] = 0.0
                work[i, j] = 1.0
                adj[j, i] = np.linalg.det(work)
            work[:, j] = col
    return adj


def _cond_or_inf(a: np.ndarray) -> float:
    try:
        c = np.linalg.cond(a)
    except np.linalg.LinAlgError:
        return np.inf
    return float(c) if np.isfinite(c) else np.inf


def inverse(a) -> np.ndarray:
    """Matrix inverse; raises SingularMatrixError when cond exceeds COND_LIMIT."""
    a = _as_square(a, "inverse")
    _check_finite(a, "inverse")
    if _cond_or_inf(a) > COND_LIMIT:
        raise SingularMatrixError(
            f"matrix is singular to working precision (cond > {COND_LIMIT:.0e})"
        )
    return np.linalg.inv(a)


def solve(a, b) -> np.ndarray:
    """Solve A x = b; raises SingularMatrixError when cond exceeds COND_LIMIT."""
    a = _as_square(a, "solve")
    _check_finite(a, "solve")
    b = np.asarray(b, dtype=complex)
    if _cond_or_inf(a) > COND_LIMIT:
        raise SingularMatrixError(
            f"matrix is singular to working precision (cond > {COND_LIMIT:.0e})"
        )
    return np.linalg.solve(a, b)
