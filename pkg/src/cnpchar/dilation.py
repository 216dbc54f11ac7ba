"""The canonical dilation of a pure tuple into its kernel space.

For a pure 1/k-contraction T on H, the map

    V : h  |->  sum_alpha a_alpha z^alpha (x) Defect (T^alpha)^* h

is an isometry from H into H_k (x) Ran(Defect) intertwining the adjoints of
the coordinate multipliers with the T_i. Everything here lives on a finite
monomial window of the target space; for nilpotent tuples the rows of V
vanish beyond the nilpotency degree, so any window at least that deep
represents V with no truncation error at all.

The kernel of V^* carries the associated tuple (the restriction of the
coordinate multipliers), whose 1/l-contractivity decides whether T admits a
characteristic function through the kernel l. The test here examines the
finite window and certifies violations; non-negative outcomes are evidence
bounded by the window.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._linalg import (
    ExactnessError,
    exact_zeros,
    is_exact_array,
    max_abs,
    min_eigenvalue,
    orth_complement_of_range,
    range_basis,
    spectral_norm,
    sqrt_scalar,
    to_float_array,
)
from .multiindex import MultiIndex, add, degree, enumerate_up_to_degree, monomial_value, unit
from .operators import (
    DefectData,
    NotPureError,
    OperatorTuple,
    conjugated_sum,
    defect_data,
    operator_series,
)
from .series import KernelSeries, reciprocal_complement


class TruncationError(RuntimeError):
    """Two representations that must agree differ beyond tolerance."""


class MonomialWindow:
    """The truncated space H_k^{<=degree} (x) C^r in the normalized monomial basis.

    Coordinates are grouped in blocks of size r per monomial label, in graded
    label order.
    """

    def __init__(self, kernel: KernelSeries, fiber_dim: int, max_degree: int, exact: bool = False):
        if max_degree > kernel.truncation:
            raise ValueError("window degree exceeds the kernel truncation")
        self.kernel = kernel
        self.r = fiber_dim
        self.max_degree = max_degree
        self.exact = exact
        self.labels = tuple(enumerate_up_to_degree(kernel.dim, max_degree))
        self.label_index = {lab: i for i, lab in enumerate(self.labels)}
        self.dim = len(self.labels) * fiber_dim
        self.degrees = np.array([degree(lab) for lab in self.labels])

    def block(self, label: MultiIndex) -> slice:
        i = self.label_index[label]
        return slice(i * self.r, (i + 1) * self.r)

    def degree_mask(self, max_degree: int) -> np.ndarray:
        """Boolean coordinate mask selecting blocks of degree <= max_degree."""
        return np.repeat(self.degrees <= max_degree, self.r)

    def multiplication_matrix(self, i: int) -> np.ndarray:
        """Matrix of (M_{z_i} tensor I_r) on the window; top degree is compressed to 0."""
        out = exact_zeros((self.dim, self.dim)) if self.exact else np.zeros((self.dim, self.dim))
        for lab in self.labels:
            if degree(lab) == self.max_degree:
                continue
            target = add(lab, unit(self.kernel.dim, i))
            ratio = self.kernel.coeff(lab) / self.kernel.coeff(target)
            entry = sqrt_scalar(ratio, self.exact)
            src, dst = self.block(lab), self.block(target)
            for j in range(self.r):
                out[dst.start + j, src.start + j] = entry
        return out

    def kernel_vector(self, point: Sequence, fiber: np.ndarray) -> np.ndarray:
        """Coordinates of k_point (x) fiber on the window.

        The coefficient of the normalized monomial at alpha is
        sqrt(a_alpha) * conj(point^alpha).
        """
        fiber = np.asarray(fiber)
        if fiber.shape != (self.r,):
            raise ValueError("fiber vector has wrong length")
        out = np.zeros(self.dim, dtype=complex)
        for lab in self.labels:
            scale = np.sqrt(float(self.kernel.coeff(lab)))
            mono = monomial_value(point, lab)
            out[self.block(lab)] = scale * np.conjugate(mono) * fiber
        return out


@dataclass(eq=False)
class DilationData:
    """The dilation isometry of a pure tuple, materialized on a monomial window."""

    ops: OperatorTuple
    kernel: KernelSeries
    defect: DefectData
    window: MonomialWindow
    ran_defect_basis: np.ndarray
    matrix: np.ndarray
    isometry_residual: float
    exact_regime: bool

    @property
    def target_degree(self) -> int:
        return self.window.max_degree

    @property
    def fiber_dim(self) -> int:
        return self.window.r


def build_dilation(
    t: OperatorTuple,
    kernel: KernelSeries,
    defect: DefectData,
    target_degree: int,
    purity_tol: float = 1e-10,
    rank_cutoff: float = 1e-10,
) -> DilationData:
    """Assemble the dilation isometry on the window of degrees <= target_degree.

    Requires a pure tuple: the isometry property is exactly the purity
    identity, so a purity residual above tolerance is rejected up front.
    The row block at alpha is sqrt(a_alpha) * Q^* Defect (T^alpha)^*, with Q
    an orthonormal basis of Ran(Defect); rows vanish above the nilpotency
    degree.
    """
    if defect.purity_residual > purity_tol and not defect.purity_exact:
        raise NotPureError(
            f"tuple is not pure: purity residual {defect.purity_residual:.3e} > {purity_tol}"
        )
    if t.weights is not None:
        raise ExactnessError(
            "dilation needs an orthonormal basis for the tuple's space; "
            "use to_float() or a weightless exact tuple"
        )
    delta = defect.defect
    if delta is None:
        raise ExactnessError("defect square root unavailable; use float mode")
    exact = t.exact and is_exact_array(delta)
    # the squared defect fixes the range; taking the root first would amplify
    # eigenvalue dust past the rank cutoff
    q = range_basis(defect.defect_sq, rank_cutoff)
    window = MonomialWindow(kernel, q.shape[1], target_degree, exact=exact)
    v = exact_zeros((window.dim, t.size)) if exact else np.zeros((window.dim, t.size))
    bound = t.nilpotency_bound
    for lab in window.labels:
        if bound is not None and degree(lab) > bound:
            continue
        scale = sqrt_scalar(kernel.coeff(lab), exact)
        v[window.block(lab)] = scale * (q.conj().T @ delta @ t.power_adjoint(lab))
    gram_gap = v.conj().T @ v - t.identity()
    residual = spectral_norm(gram_gap)
    exact_regime = bound is not None and target_degree >= bound
    return DilationData(
        ops=t,
        kernel=kernel,
        defect=defect,
        window=window,
        ran_defect_basis=q,
        matrix=v,
        isometry_residual=residual,
        exact_regime=exact_regime,
    )


def intertwining_residuals(dil: DilationData) -> list[float]:
    """||V^* (M_i tensor I) - T_i V^*|| per coordinate, on the window."""
    v = dil.matrix
    vh = v.conj().T
    out = []
    for i in range(dil.ops.num_vars):
        m = dil.window.multiplication_matrix(i)
        out.append(spectral_norm(vh @ m - dil.ops.mats[i] @ vh))
    return out


def kernel_vector_action(
    dil: DilationData, point: Sequence, fiber: np.ndarray, tol: float = 1e-10
) -> np.ndarray:
    """V^* applied to k_point (x) fiber, cross-checked against k_point(T) Defect fiber.

    Computes both sides of the identity and raises TruncationError when they
    disagree beyond ``tol`` (which signals a window that is too shallow);
    returns the operator-series side.
    """
    vec = dil.window.kernel_vector(point, np.asarray(fiber))
    lhs = to_float_array(dil.matrix).conj().T @ vec
    series = operator_series(dil.ops, dil.kernel, point)
    delta = to_float_array(dil.defect.defect)
    rhs = series @ delta @ (to_float_array(dil.ran_defect_basis) @ np.asarray(fiber))
    gap = float(np.linalg.norm(lhs - rhs))
    if gap > tol:
        raise TruncationError(f"kernel vector identity off by {gap:.3e} (window too small?)")
    return rhs


@dataclass(frozen=True)
class AssociatedTupleCertificate:
    """Window-bounded evidence about the tuple on Ker V^*.

    A negative ``min_eigenvalue`` certifies that the associated tuple is not
    a 1/l-contraction (so no characteristic function through l exists); a
    non-negative minimum is supporting evidence only, bounded by the window.
    ``vacuous`` marks an empty kernel within the window.
    """

    min_eigenvalue: Optional[float]
    holds: bool
    vacuous: bool
    window_degree: int
    subspace_dim: int


def associated_tuple_test(
    t: OperatorTuple,
    kernel: KernelSeries,
    form_kernel: KernelSeries,
    window_degree: Optional[int] = None,
    rank_cutoff: float = 1e-10,
    tol: float = 1e-10,
) -> AssociatedTupleCertificate:
    """Evaluate the 1/l-contraction form of the tuple restricted to Ker V^*.

    Builds the dilation on the window, takes the orthogonal complement of
    Ran V as the window part of Ker V^*, restricts the coordinate
    multipliers there, and reports the minimum eigenvalue of

        I - sum_{alpha != 0} b_alpha^{(l)} B^alpha (B^alpha)^*.

    Lowering-then-raising preserves degrees, so values on the window part
    are exact values of the infinite form.
    """
    if t.exact:
        t = t.to_float()
    bound = t.nilpotency_bound
    if window_degree is None:
        if bound is None:
            raise ValueError("window_degree is required for tuples without a nilpotency bound")
        window_degree = bound + 3
    if bound is not None and window_degree < bound:
        raise ValueError(
            f"window degree {window_degree} below the nilpotency bound {bound}: "
            "Ran V would not fit"
        )
    defect = defect_data(t, kernel)
    dil = build_dilation(t, kernel, defect, window_degree)
    kernel_basis = orth_complement_of_range(to_float_array(dil.matrix), rank_cutoff)
    q = kernel_basis.shape[1]
    if q == 0:
        return AssociatedTupleCertificate(None, True, True, window_degree, 0)
    mats = tuple(
        kernel_basis.conj().T @ dil.window.multiplication_matrix(i) @ kernel_basis
        for i in range(t.num_vars)
    )
    restricted = OperatorTuple(mats, None, None, window_degree, kernel)
    b_form = reciprocal_complement(form_kernel)
    total, _, _, _ = conjugated_sum(restricted, b_form, degree_cap=window_degree)
    form = restricted.identity() - total
    lo = min_eigenvalue(form)
    return AssociatedTupleCertificate(lo, lo >= -tol, False, window_degree, q)
