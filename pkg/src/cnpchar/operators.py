"""Commuting matrix tuples, graded multiplication models, and defect calculus.

The central object is a commuting d-tuple T = (T_1, ..., T_d) of square
matrices. For a kernel with coefficients a_n and derived sequence b_n
(coefficients of 1 - 1/k), the tuple is a 1/k-contraction when

    I - sum_{alpha != 0} b_alpha T^alpha (T^alpha)^*   is positive,

and its defect operator is the square root of that positive operator. The
tuple is pure when the a-weighted sum of conjugations of the squared defect
reproduces the identity. Both sums are finite and exact for the graded
multiplication models built here, which are nilpotent; otherwise they are
truncated with increment-based stopping.

Exact-mode model tuples are expressed in the monomial basis z^alpha with the
squared norms 1/a_alpha carried as basis weights, so the matrices stay
rational and all squared-defect identities can be asserted with no rounding.
Float-mode tuples use the orthonormalized monomial basis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from ._linalg import (
    ExactnessError,
    adjoint,
    eye_like,
    exact_zeros,
    is_exact_array,
    max_abs,
    min_eigenvalue,
    psd_sqrt,
    range_basis,
    spectral_norm,
    to_float_array,
    weighted_inner,
)
from .multiindex import (
    MultiIndex,
    add,
    compositions,
    degree,
    enumerate_up_to_degree,
    unit,
)
from .series import KernelSeries, RealSeries, reciprocal_complement

Series = Union[KernelSeries, RealSeries]


class ConvergenceError(RuntimeError):
    """A truncated operator series did not settle below tolerance."""


class NotContractionError(ValueError):
    """The defining positivity of a 1/k-contraction fails."""


class NotPureError(ValueError):
    """An operation requires a pure tuple and the purity residual is too large."""


@dataclass(eq=False)
class OperatorTuple:
    """A commuting d-tuple of square matrices on an n-dimensional space.

    ``weights`` are the squared norms of the (orthogonal) basis vectors; None
    means the basis is orthonormal. ``basis_labels`` names basis vectors by
    multi-indices for graded models. ``nilpotency_bound`` is a degree nu with
    T^alpha = 0 whenever |alpha| > nu, when one is known; it makes all
    operator series finite and exact.

    Tuples are immutable after construction apart from the power cache,
    whose entries are idempotent, so concurrent readers see pure-function
    behavior.
    """

    mats: tuple
    weights: Optional[np.ndarray] = None
    basis_labels: Optional[tuple] = None
    nilpotency_bound: Optional[int] = None
    kernel: Optional[KernelSeries] = None
    commutation_tol: float = 1e-12
    _powers: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.mats = tuple(np.asarray(m) for m in self.mats)
        if not self.mats:
            raise ValueError("empty tuple")
        n = self.mats[0].shape[0]
        for m in self.mats:
            if m.shape != (n, n):
                raise ValueError("tuple entries must be square matrices of equal size")
        if self.weights is not None:
            self.weights = np.asarray(self.weights)
            if self.weights.shape != (n,):
                raise ValueError("weights must match the matrix size")
        self._check_commutation()

    def _check_commutation(self):
        scale = max(1.0, max(spectral_norm(m) for m in self.mats) ** 2)
        for i in range(len(self.mats)):
            for j in range(i + 1, len(self.mats)):
                gap = self.mats[i] @ self.mats[j] - self.mats[j] @ self.mats[i]
                if self.exact:
                    ok = all(x == 0 for x in gap.flat)
                else:
                    ok = max_abs(gap) <= self.commutation_tol * scale
                if not ok:
                    raise ValueError(f"tuple does not commute: [T_{i}, T_{j}] != 0")

    @property
    def num_vars(self) -> int:
        return len(self.mats)

    @property
    def size(self) -> int:
        return self.mats[0].shape[0]

    @property
    def exact(self) -> bool:
        return is_exact_array(self.mats[0])

    def identity(self) -> np.ndarray:
        return eye_like(self.mats[0], self.size)

    def power(self, alpha: MultiIndex) -> np.ndarray:
        """T^alpha = T_1^a1 ... T_d^ad, memoized along the graded recursion."""
        alpha = tuple(alpha)
        if len(alpha) != self.num_vars:
            raise ValueError("multi-index dimension mismatch")
        cached = self._powers.get(alpha)
        if cached is not None:
            return cached
        if all(a == 0 for a in alpha):
            out = self.identity()
        elif self.nilpotency_bound is not None and degree(alpha) > self.nilpotency_bound:
            out = exact_zeros((self.size, self.size)) if self.exact else np.zeros_like(self.mats[0])
        else:
            i = next(j for j, a in enumerate(alpha) if a > 0)
            out = self.mats[i] @ self.power(subtract_unit(alpha, i))
        self._powers[alpha] = out
        return out

    def power_adjoint(self, alpha: MultiIndex) -> np.ndarray:
        return adjoint(self.power(alpha), self.weights)

    def mat_adjoint(self, i: int) -> np.ndarray:
        return adjoint(self.mats[i], self.weights)

    def to_float(self) -> "OperatorTuple":
        """Re-express in the orthonormalized basis with float entries."""
        if not self.exact:
            return self
        if self.weights is None:
            mats = tuple(to_float_array(m) for m in self.mats)
        else:
            scale = np.sqrt(to_float_array(self.weights).astype(float))
            mats = tuple(to_float_array(m) * scale[:, None] / scale[None, :] for m in self.mats)
        return OperatorTuple(
            mats, None, self.basis_labels, self.nilpotency_bound, self.kernel
        )


def subtract_unit(alpha: MultiIndex, i: int) -> MultiIndex:
    return tuple(a - 1 if j == i else a for j, a in enumerate(alpha))


def model_tuple(kernel: KernelSeries, dim: int, degree_cut: int, mode: str = "float") -> OperatorTuple:
    """Compression of the coordinate multiplication tuple to polynomials of degree <= degree_cut.

    In float mode the basis is the orthonormalized monomials, so the matrix
    entries are the norm ratios sqrt(a_alpha / a_{alpha+e_i}). In exact mode
    the basis is the monomials themselves with squared norms 1/a_alpha kept
    as weights, and every entry is 0 or 1.
    """
    if degree_cut > kernel.truncation:
        raise ValueError("model degree exceeds the kernel truncation")
    labels = tuple(enumerate_up_to_degree(dim, degree_cut))
    index = {lab: i for i, lab in enumerate(labels)}
    n = len(labels)
    exact = mode == "exact"
    if mode not in ("exact", "float"):
        raise ValueError(f"unknown mode {mode!r}")
    mats = [exact_zeros((n, n)) if exact else np.zeros((n, n)) for _ in range(dim)]
    for lab in labels:
        if degree(lab) == degree_cut:
            continue
        src = index[lab]
        for i in range(dim):
            target = add(lab, unit(dim, i))
            if exact:
                mats[i][index[target], src] = Fraction(1)
            else:
                ratio = kernel.coeff(lab) / kernel.coeff(target)
                mats[i][index[target], src] = np.sqrt(float(ratio))
    weights = None
    if exact:
        weights = np.array([Fraction(1, 1) / kernel.coeff(lab) for lab in labels], dtype=object)
    return OperatorTuple(tuple(mats), weights, labels, degree_cut, kernel)


# ---------------------------------------------------------------------------
# conjugated operator sums


def conjugated_sum(
    t: OperatorTuple,
    series: Series,
    middle: Optional[np.ndarray] = None,
    include_zero: bool = False,
    degree_cap: int = 64,
    stop_tol: float = 1e-13,
):
    """sum over alpha of series.coeff(alpha) T^alpha [middle] (T^alpha)^*.

    Stops exactly at the nilpotency bound when one is known; otherwise runs
    degree by degree until the increment norm falls below ``stop_tol`` or
    ``degree_cap`` is hit (then raises ConvergenceError). Returns
    (total, increment_norms, stop_degree, exact_stop).
    """
    if series.dim != t.num_vars:
        raise ValueError("series dimension does not match the tuple")
    n = t.size
    total = exact_zeros((n, n)) if t.exact else np.zeros((n, n), dtype=t.mats[0].dtype)
    if include_zero:
        term = middle if middle is not None else t.identity()
        c0 = series.coeff_1d(0)
        total = total + (c0 if t.exact else float(c0)) * term
    bound = t.nilpotency_bound
    top = min(degree_cap, series.truncation, bound if bound is not None else degree_cap)
    support_max = max((i for i, c in enumerate(series.coefficients) if i >= 1 and c != 0), default=0)
    loop_top = min(top, support_max)
    increments = []
    for deg in range(1, loop_top + 1):
        inc = exact_zeros((n, n)) if t.exact else np.zeros((n, n), dtype=t.mats[0].dtype)
        for alpha in compositions(deg, t.num_vars):
            c = series.coeff(alpha)
            if c == 0:
                continue
            if not t.exact:
                c = float(c)
            p = t.power(alpha)
            conj = adjoint(p, t.weights)
            inc = inc + c * (p @ middle @ conj if middle is not None else p @ conj)
        total = total + inc
        increments.append(max_abs(inc))
    if bound is None:
        settled = loop_top < top or not increments or increments[-1] <= stop_tol
        if degree_cap <= series.truncation and not settled:
            raise ConvergenceError(
                f"conjugated series increments did not fall below {stop_tol} "
                f"by degree {top}"
            )
        exact_stop = False
    else:
        exact_stop = top >= min(bound, series.truncation) and series.truncation >= bound
    return total, increments, top, exact_stop


@dataclass
class DefectData:
    """Defect operators of a tuple for a kernel and, optionally, its CNP factor.

    ``defect_sq`` is I minus the b-weighted conjugation sum for the kernel;
    ``pick_defect_sq`` the analogue for the factor. Square roots are stored
    when representable in the tuple's arithmetic (always in float mode), else
    None. ``purity_residual`` is the distance of the a-weighted conjugation
    sum of defect_sq from the identity.
    """

    ops: OperatorTuple
    kernel: KernelSeries
    pick_factor: Optional[KernelSeries]
    defect_sq: np.ndarray
    defect: Optional[np.ndarray]
    pick_defect_sq: Optional[np.ndarray]
    pick_defect: Optional[np.ndarray]
    support_degree: int
    increments: tuple
    purity_residual: float
    purity_exact: bool


def defect_data(
    t: OperatorTuple,
    kernel: KernelSeries,
    pick_factor: Optional[KernelSeries] = None,
    degree_cap: int = 64,
    stop_tol: float = 1e-13,
    psd_tol: float = 1e-10,
) -> DefectData:
    """Defect operators and purity diagnostics for t as a 1/kernel-contraction.

    Raises NotContractionError when I minus the b-sum has an eigenvalue below
    -psd_tol, ConvergenceError when a non-nilpotent sum does not settle.
    """
    b = reciprocal_complement(kernel)
    s_sum, increments, stop_degree, _ = conjugated_sum(
        t, b, degree_cap=degree_cap, stop_tol=stop_tol
    )
    delta_sq = t.identity() - s_sum
    _require_psd(delta_sq, psd_tol, f"not a 1/k-contraction for {_kname(kernel)}")
    delta = _try_sqrt(delta_sq, psd_tol)

    pick_defect_sq = None
    pick_defect = None
    if pick_factor is not None:
        b_s = reciprocal_complement(pick_factor)
        s_sum_pick, _, _, _ = conjugated_sum(t, b_s, degree_cap=degree_cap, stop_tol=stop_tol)
        pick_defect_sq = t.identity() - s_sum_pick
        _require_psd(pick_defect_sq, psd_tol, "not a 1/s-contraction for the CNP factor")
        pick_defect = _try_sqrt(pick_defect_sq, psd_tol)

    purity = purity_check(t, kernel, delta_sq, degree_cap=degree_cap, stop_tol=stop_tol)
    return DefectData(
        ops=t,
        kernel=kernel,
        pick_factor=pick_factor,
        defect_sq=delta_sq,
        defect=delta,
        pick_defect_sq=pick_defect_sq,
        pick_defect=pick_defect,
        support_degree=stop_degree,
        increments=tuple(increments),
        purity_residual=purity.residual,
        purity_exact=purity.exact,
    )


def _kname(kernel: KernelSeries) -> str:
    return f"kernel(dim={kernel.dim}, N={kernel.truncation})"


def _require_psd(a: np.ndarray, tol: float, message: str):
    lo = min_eigenvalue(a)
    if lo < -tol:
        raise NotContractionError(f"{message}: eigenvalue {lo:.3e} < -{tol}")


def _try_sqrt(a: np.ndarray, clamp_tol: float) -> Optional[np.ndarray]:
    try:
        return psd_sqrt(a, clamp_tol)
    except ExactnessError:
        return None


@dataclass(frozen=True)
class PurityReport:
    residual: float
    exact: bool


def purity_check(
    t: OperatorTuple,
    kernel: KernelSeries,
    defect_sq: np.ndarray,
    degree_cap: int = 64,
    stop_tol: float = 1e-13,
) -> PurityReport:
    """Distance of sum_alpha a_alpha T^alpha defect_sq (T^alpha)^* from the identity.

    Purity failure is a verdict (nonzero residual), not an error. The exact
    flag is set when the sum terminated at a nilpotency bound and the
    difference vanishes identically.
    """
    total, _, _, exact_stop = conjugated_sum(
        t, kernel, middle=defect_sq, include_zero=True, degree_cap=degree_cap, stop_tol=stop_tol
    )
    gap = total - t.identity()
    residual = spectral_norm(gap)
    exact = bool(t.exact and exact_stop and all(x == 0 for x in gap.flat))
    return PurityReport(residual, exact)


def operator_series(
    t: OperatorTuple,
    series: Series,
    point: Sequence,
    degree_cap: int = 64,
    stop_tol: float = 1e-13,
) -> np.ndarray:
    """sum_alpha series.coeff(alpha) conj(point^alpha) T^alpha.

    Finite (hence exact) for nilpotent tuples; otherwise truncated with
    increment stopping and ConvergenceError on failure.
    """
    if series.dim != t.num_vars or len(point) != t.num_vars:
        raise ValueError("dimension mismatch")
    point_exact = all(isinstance(p, (Fraction, int)) for p in point)
    exact = t.exact and point_exact
    n = t.size
    total = exact_zeros((n, n)) if exact else np.zeros((n, n), dtype=complex)
    bound = t.nilpotency_bound
    top = min(degree_cap, series.truncation, bound if bound is not None else degree_cap)
    prev = None
    for deg in range(0, top + 1):
        inc = exact_zeros((n, n)) if exact else np.zeros((n, n), dtype=complex)
        for alpha in compositions(deg, t.num_vars):
            c = series.coeff(alpha)
            if c == 0:
                continue
            mono = 1
            for p, a in zip(point, alpha):
                mono = mono * p**a
            scalar = c * _conj(mono)
            term = t.power(alpha)
            if not exact:
                term = to_float_array(term)
                scalar = complex(scalar)
            inc = inc + scalar * term
        total = total + inc
        prev = max_abs(inc)
    if bound is None and degree_cap <= series.truncation and (prev is None or prev > stop_tol):
        raise ConvergenceError(f"operator series did not settle below {stop_tol} by degree {top}")
    if not exact and not any(isinstance(x, complex) for x in np.asarray(point).flat):
        # real point, real tuple: keep the result real when it is
        if np.allclose(total.imag, 0.0):
            return total.real
    return total


def _conj(x):
    return x.conjugate() if hasattr(x, "conjugate") else x


def compress(t: OperatorTuple, basis: np.ndarray, coinvariance_tol: float = 1e-10) -> OperatorTuple:
    """Compression P* T_i P to the span of orthonormal basis columns.

    Checks co-invariance ||(I - PP*) T_i* P|| <= tol and only warns on
    violation (invariant complements are legitimately compressed too); the
    nilpotency bound is inherited only when the check passes.
    """
    if t.exact:
        raise ExactnessError("compress expects a float-mode tuple; call to_float() first")
    basis = np.asarray(basis)
    n = t.size
    if basis.ndim != 2 or basis.shape[0] != n:
        raise ValueError("basis must be a matrix of column vectors on the tuple's space")
    gram_gap = max_abs(basis.conj().T @ basis - np.eye(basis.shape[1]))
    if gram_gap > 1e-8:
        raise ValueError(f"non-orthonormal basis: Gram deviation {gram_gap:.3e}")
    proj_out = np.eye(n) - basis @ basis.conj().T
    residuals = [spectral_norm(proj_out @ t.mat_adjoint(i) @ basis) for i in range(t.num_vars)]
    co_invariant = max(residuals) <= coinvariance_tol
    if not co_invariant:
        warnings.warn(
            f"compression subspace is not co-invariant (residual {max(residuals):.3e}); "
            "defect identities may fail",
            stacklevel=2,
        )
    mats = tuple(basis.conj().T @ m @ basis for m in t.mats)
    return OperatorTuple(
        mats,
        None,
        None,
        t.nilpotency_bound if co_invariant else None,
        t.kernel,
    )


def random_coinvariant_compression(
    t: OperatorTuple, rng: np.random.Generator, num_seeds: int = 1
) -> OperatorTuple:
    """Compression to the adjoint-invariant subspace generated by random vectors.

    The span of {T^{*alpha} v} over the seed vectors v is invariant for every
    adjoint, hence co-invariant for the tuple, so the compression of a pure
    tuple stays pure.
    """
    if t.exact:
        t = t.to_float()
    n = t.size
    vecs = rng.standard_normal((n, num_seeds))
    basis = range_basis(vecs)
    while True:
        extended = [basis]
        for i in range(t.num_vars):
            extended.append(t.mats[i].conj().T @ basis)
        new_basis = range_basis(np.hstack(extended))
        if new_basis.shape[1] == basis.shape[1]:
            return compress(t, new_basis)
        basis = new_basis


def tuple_to_spec(t: OperatorTuple) -> dict:
    """JSON-compatible dict: dense row-major matrices, rational strings in exact mode."""
    from .series import _scalar_to_string, kernel_to_spec

    def encode(m):
        if t.exact:
            return [[_scalar_to_string(x) for x in row] for row in m.tolist()]
        return [[float(x) for x in row] for row in m.tolist()]

    return {
        "mode": "exact" if t.exact else "float",
        "matrices": [encode(m) for m in t.mats],
        "weights": None if t.weights is None else [_scalar_to_string(w) for w in t.weights],
        "basis_labels": None if t.basis_labels is None else [list(l) for l in t.basis_labels],
        "nilpotency_bound": t.nilpotency_bound,
        "kernel": None if t.kernel is None else kernel_to_spec(t.kernel),
    }


def tuple_from_spec(spec: dict) -> OperatorTuple:
    from .series import _scalar_from_string, kernel_from_spec

    try:
        mode = spec["mode"]
        raw = spec["matrices"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"tuple spec missing field {exc}") from exc
    if mode == "exact":
        mats = tuple(
            np.array([[_scalar_from_string(x) if isinstance(x, str) else Fraction(x) for x in row] for row in m], dtype=object)
            for m in raw
        )
    elif mode == "float":
        mats = tuple(np.array(m, dtype=float) for m in raw)
    else:
        raise ValueError(f"unknown tuple mode {mode!r}")
    weights = spec.get("weights")
    if weights is not None:
        weights = np.array([_scalar_from_string(w) if isinstance(w, str) else w for w in weights], dtype=object)
    labels = spec.get("basis_labels")
    if labels is not None:
        labels = tuple(tuple(l) for l in labels)
    kernel = spec.get("kernel")
    if kernel is not None:
        kernel = kernel_from_spec(kernel)
    return OperatorTuple(mats, weights, labels, spec.get("nilpotency_bound"), kernel)


def quadratic_form_certificate(
    kernel: KernelSeries,
    form_kernel: KernelSeries,
    base_degree: int,
    vectors: Sequence,
    window_degree: Optional[int] = None,
    mode: str = "exact",
):
    """Values of the contraction form of ``form_kernel`` on a co-invariant window.

    Builds the multiplication model of ``kernel`` up to ``window_degree`` and
    evaluates, for each test vector v,

        < (I - sum_{alpha != 0} b_alpha M^alpha P M^{alpha *}) v, v > / <v, v>

    where P projects onto the span of monomials of degree above
    ``base_degree`` (within the window) and b comes from ``form_kernel``.
    Vectors may be given as multi-index labels (meaning the corresponding
    normalized monomial) or as coordinate arrays. Values are exact rationals
    in exact mode. Lowering-then-raising keeps every test vector's degree, so
    the window truncation does not perturb the values.
    """
    if kernel.dim != form_kernel.dim:
        raise ValueError("kernel dimensions differ")
    dim = kernel.dim
    label_vectors = [v for v in vectors if isinstance(v, tuple)]
    needed = max((degree(v) for v in label_vectors), default=0)
    window = window_degree if window_degree is not None else max(base_degree + 2, needed)
    if needed > window:
        raise ValueError("test vector outside the window")
    t = model_tuple(kernel, dim, window, mode=mode)
    labels = t.basis_labels
    index = {lab: i for i, lab in enumerate(labels)}
    n = t.size
    exact = t.exact
    mask = np.array([degree(lab) > base_degree for lab in labels])
    adjoints = [adjoint(m, t.weights) for m in t.mats]
    b = reciprocal_complement(form_kernel)
    support = max((i for i, c in enumerate(b.coefficients) if i >= 1 and c != 0), default=0)
    top = min(window, support)
    values = []
    for v in vectors:
        if isinstance(v, tuple):
            if v not in index:
                raise ValueError(f"test vector {v} outside the window")
            vec = exact_zeros(n) if exact else np.zeros(n)
            vec[index[v]] = Fraction(1) if exact else 1.0
        else:
            vec = np.asarray(v, dtype=object if exact else None)
            if vec.shape != (n,):
                raise ValueError("test vector has the wrong length for the window")
        # <(I - sum b_alpha M^a P M^a*) v, v> via lowered copies of v only:
        # each term is b_alpha <P (M^a)* v, (M^a)* v>
        lowered = {(0,) * dim: vec}
        total = weighted_inner(vec, vec, t.weights)
        value = total
        for deg in range(1, top + 1):
            next_lowered = {}
            for alpha in compositions(deg, dim):
                i = next(j for j, a in enumerate(alpha) if a > 0)
                w = adjoints[i] @ lowered[subtract_unit(alpha, i)]
                next_lowered[alpha] = w
                c = b.coeff(alpha)
                if c == 0:
                    continue
                if not exact:
                    c = float(c)
                value = value - c * weighted_inner(np.where(mask, w, 0 * w), w, t.weights)
            lowered = next_lowered
        values.append(value / total)
    return values
