"""Singular values and complex eigenvalues of dense real matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InputError, NumericalError


@dataclass(frozen=True, eq=False)
class SingularSpectrum:
    """Singular values sorted descending.

    When ``squared`` is set the values are sigma**2, i.e. the eigenvalues of
    ``A @ A.T``.
    """

    values: np.ndarray
    squared: bool = False

    def __len__(self):
        return len(self.values)

    @property
    def minimum(self) -> float:
        v = float(self.values[-1])
        return float(np.sqrt(v)) if self.squared else v


@dataclass(frozen=True, eq=False)
class ComplexSpectrum:
    values: np.ndarray

    def __len__(self):
        return len(self.values)


def _as_square(A, *, min_size=1) -> np.ndarray:
    A = np.asarray(A)
    if np.iscomplexobj(A):
        raise InputError("expected a real matrix")
    A = A.astype(float, copy=False)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] < min_size:
        raise InputError(f"matrix must be at least {min_size}x{min_size}")
    if not np.isfinite(A).all():
        raise InputError("matrix has non-finite entries")
    return A


def singular_values(A, squared: bool = False, context=None) -> SingularSpectrum:
    """Singular values of ``A`` via LAPACK bidiagonalization (gesdd).

    ``context`` is attached to the :class:`NumericalError` raised if the
    solver fails, so a failing realization can be regenerated.
    """
    A = _as_square(A, min_size=2)
    try:
        sigma = scipy.linalg.svdvals(A, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"SVD did not converge: {exc}", context) from exc
    # gesdd already returns descending order; keep the contract explicit
    sigma = np.sort(sigma)[::-1]
    if squared:
        return SingularSpectrum(sigma * sigma, squared=True)
    return SingularSpectrum(sigma, squared=False)


def complex_eigenvalues(A, context=None) -> ComplexSpectrum:
    """All eigenvalues of the real, generally non-symmetric matrix ``A``."""
    A = _as_square(A)
    try:
        w = scipy.linalg.eigvals(A, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}", context) from exc
    return ComplexSpectrum(np.asarray(w, dtype=complex))
