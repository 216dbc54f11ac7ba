"""Dense linear algebra over the package's two scalar backends.

Float-mode matrices are ordinary numpy float/complex arrays in orthonormal
bases; spectral operations go through numpy/scipy. Exact-mode matrices are
object arrays of ``fractions.Fraction`` (or int), optionally expressed in an
orthogonal-but-not-normalized basis whose squared norms are carried
separately as ``weights``; adjoints then pick up the weight ratios. Exact
mode supports only the spectral operations that stay rational, namely square
roots, ranges and pseudo-inverses of diagonal matrices with perfect-square
entries. Anything else raises :class:`ExactnessError`, signalling that float
mode is the right backend for that computation.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


class ExactnessError(ArithmeticError):
    """An operation cannot be carried out in exact rational arithmetic."""


def is_exact_array(a: np.ndarray) -> bool:
    return a.dtype == object


def exact_zeros(shape) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    out[...] = Fraction(0)
    return out


def exact_eye(n: int) -> np.ndarray:
    out = exact_zeros((n, n))
    for i in range(n):
        out[i, i] = Fraction(1)
    return out


def eye_like(a: np.ndarray, n: int) -> np.ndarray:
    return exact_eye(n) if is_exact_array(a) else np.eye(n, dtype=a.dtype)


def to_float_array(a: np.ndarray) -> np.ndarray:
    if not is_exact_array(a):
        return a
    return a.astype(np.float64) if _exact_is_real(a) else a.astype(np.complex128)


def _exact_is_real(a: np.ndarray) -> bool:
    return all(not isinstance(x, complex) for x in a.flat)


def adjoint(a: np.ndarray, weights=None) -> np.ndarray:
    """Adjoint of the operator with matrix ``a`` on a basis with squared norms ``weights``.

    weights None means orthonormal basis (plain conjugate transpose).
    Otherwise [a*]_{ij} = (w_j / w_i) conj(a_{ji}).
    """
    at = a.conj().T
    if weights is None:
        return at
    w = np.asarray(weights, dtype=object if is_exact_array(a) else None)
    return at * (w[None, :] / w[:, None])


def weighted_inner(x, y, weights=None):
    """<x, y> = sum_i w_i x_i conj(y_i)."""
    yc = np.conjugate(y)
    if weights is None:
        return (np.asarray(x) * yc).sum()
    return (np.asarray(weights) * np.asarray(x) * yc).sum()


def max_abs(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(to_float_array(a))))


def spectral_norm(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(to_float_array(a), 2))


def is_exactly_zero(a: np.ndarray) -> bool:
    return all(x == 0 for x in a.flat)


def is_diagonal(a: np.ndarray) -> bool:
    if a.shape[0] != a.shape[1]:
        return False
    return all(
        a[i, j] == 0 for i in range(a.shape[0]) for j in range(a.shape[1]) if i != j
    )


def frac_sqrt(x) -> Fraction:
    """Exact square root of a perfect-square rational; ExactnessError otherwise."""
    f = Fraction(x)
    if f < 0:
        raise ExactnessError(f"square root of negative rational {f}")
    pn, pd = math.isqrt(f.numerator), math.isqrt(f.denominator)
    if pn * pn != f.numerator or pd * pd != f.denominator:
        raise ExactnessError(f"{f} is not a perfect square")
    return Fraction(pn, pd)


def sqrt_scalar(x, exact: bool):
    return frac_sqrt(x) if exact else math.sqrt(float(x))


def psd_sqrt(a: np.ndarray, clamp_tol: float = 1e-10) -> np.ndarray:
    """Principal square root of a positive semidefinite Hermitian matrix.

    Float mode: symmetric eigendecomposition; eigenvalues in
    [-clamp_tol, 0) are clamped to 0, anything below raises. Exact mode is
    limited to diagonal matrices with perfect-square entries.
    """
    if is_exact_array(a):
        if not is_diagonal(a):
            raise ExactnessError("exact matrix square root needs a diagonal matrix")
        out = exact_zeros(a.shape)
        for i in range(a.shape[0]):
            out[i, i] = frac_sqrt(a[i, i])
        return out
    sym = (a + a.conj().T) / 2
    vals, vecs = np.linalg.eigh(sym)
    if vals.min(initial=0.0) < -clamp_tol:
        raise ValueError(f"matrix is not PSD: eigenvalue {vals.min()} < -{clamp_tol}")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def min_eigenvalue(a: np.ndarray) -> float:
    sym = to_float_array(a)
    sym = (sym + sym.conj().T) / 2
    return float(np.linalg.eigvalsh(sym).min())


def range_basis(a: np.ndarray, cutoff: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the column space, as columns.

    Exact mode handles diagonal matrices (the basis is then a coordinate
    selection). Float mode uses a singular value cutoff relative to
    max(1, largest singular value).
    """
    if is_exact_array(a):
        if not is_diagonal(a):
            raise ExactnessError("exact range basis needs a diagonal matrix")
        cols = [i for i in range(a.shape[0]) if a[i, i] != 0]
        out = exact_zeros((a.shape[0], len(cols)))
        for j, i in enumerate(cols):
            out[i, j] = Fraction(1)
        return out
    if a.size == 0:
        return np.zeros((a.shape[0], 0))
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    rank = int(np.sum(s > cutoff * max(1.0, s[0] if s.size else 0.0)))
    return u[:, :rank]


def orth_complement_of_range(a: np.ndarray, cutoff: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (columns) of the orthogonal complement of Ran(a)."""
    m = a.shape[0]
    if is_exact_array(a):
        rank = exact_rank(a)
        if rank == m:
            return exact_zeros((m, 0))
        if is_diagonal_rectangular(a):
            rows = [i for i in range(m) if all(a[i, j] == 0 for j in range(a.shape[1]))]
            out = exact_zeros((m, len(rows)))
            for j, i in enumerate(rows):
                out[i, j] = Fraction(1)
            return out
        raise ExactnessError("exact complement needs full rank or diagonal structure")
    if a.shape[1] == 0:
        return np.eye(m)
    u, s, _ = np.linalg.svd(a, full_matrices=True)
    rank = int(np.sum(s > cutoff * max(1.0, s[0] if s.size else 0.0)))
    return u[:, rank:]


def is_diagonal_rectangular(a: np.ndarray) -> bool:
    """True when every row has at most one nonzero entry and columns don't collide."""
    seen = set()
    for i in range(a.shape[0]):
        nz = [j for j in range(a.shape[1]) if a[i, j] != 0]
        if len(nz) > 1:
            return False
        if nz:
            if nz[0] in seen:
                return False
            seen.add(nz[0])
    return True


def pinv_hermitian(a: np.ndarray, cutoff: float = 1e-10) -> np.ndarray:
    """Pseudo-inverse of a Hermitian PSD matrix with a rank cutoff."""
    if is_exact_array(a):
        if not is_diagonal(a):
            raise ExactnessError("exact pseudo-inverse needs a diagonal matrix")
        out = exact_zeros(a.shape)
        for i in range(a.shape[0]):
            out[i, i] = Fraction(0) if a[i, i] == 0 else 1 / Fraction(a[i, i])
        return out
    sym = (a + a.conj().T) / 2
    vals, vecs = np.linalg.eigh(sym)
    scale = max(1.0, float(np.abs(vals).max(initial=0.0)))
    inv = np.where(np.abs(vals) > cutoff * scale, 1.0 / np.where(vals == 0, 1.0, vals), 0.0)
    return (vecs * inv) @ vecs.conj().T


def exact_rank(a: np.ndarray) -> int:
    """Rank over the rationals, by Gaussian elimination."""
    rows = [list(r) for r in a.tolist()]
    m = len(rows)
    n = len(rows[0]) if m else 0
    rank = 0
    col = 0
    for col in range(n):
        pivot = next((r for r in range(rank, m) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        pv = rows[rank][col]
        for r in range(rank + 1, m):
            if rows[r][col] != 0:
                factor = rows[r][col] / pv
                rows[r] = [x - factor * y for x, y in zip(rows[r], rows[rank])]
        rank += 1
        if rank == m:
            break
    return rank


def polar_orthogonal(a: np.ndarray) -> np.ndarray:
    """The unitary factor of the polar decomposition (closest unitary to a)."""
    u, _, vh = np.linalg.svd(to_float_array(a))
    return u @ vh
