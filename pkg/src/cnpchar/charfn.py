"""Characteristic functions of pure tuples for kernels with a CNP factor.

Given a factorization k = s * g with s a complete Nevanlinna-Pick kernel and
g a non-negative coefficient series, and a pure 1/k-contraction T, the
construction assembles a block unitary

    U = [[R*, B], [P, D]] : H (+) (defect(R) (+) complement)  ->  Hrow (+) E

out of four ingredients: the row contraction R = (sqrt(b_alpha^{(s)}) T^alpha)
acting from finitely many labelled copies of H, the g-weighted embedding
P : h -> (sqrt(g_alpha) Defect (T^alpha)^* h) into E (one copy of Ran Defect
per nonzero g coefficient), the unitary identification u of Ran(pick defect)
with Ran P, and the defect of R. The characteristic function is then

    theta(z) = sum_alpha sqrt(g_alpha) D_alpha z^alpha
               + Defect k_z(T)^* Z(z) B,

with Z(z) the scalar row (sqrt(b_alpha^{(s)}) z^alpha). Its Taylor
coefficients are the primary representation here; pointwise evaluation is a
derived, cross-checked view. The induced multiplier M_theta from the
s-space to the k-space complements the dilation isometry:
V V^* + M_theta M_theta^* = I.

All row/column index sets are materialized on finite degree windows. For
nilpotent tuples the windowed Taylor coefficients on the retained domain
columns equal the true ones exactly; windowing only removes domain columns,
whose contributions live at target degrees above the window. The
factorization residual is therefore reported both restricted to the exact
degree range and unrestricted.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from ._linalg import (
    ExactnessError,
    exact_zeros,
    is_exact_array,
    is_exactly_zero,
    max_abs,
    min_eigenvalue,
    orth_complement_of_range,
    pinv_hermitian,
    polar_orthogonal,
    spectral_norm,
    sqrt_scalar,
    to_float_array,
)
from .dilation import DilationData, MonomialWindow, TruncationError
from .multiindex import (
    MultiIndex,
    add,
    degree,
    enumerate_up_to_degree,
    monomial_value,
    subtract,
)
from .operators import NotPureError, OperatorTuple, defect_data, operator_series
from .series import KernelFactorization, KernelSeries, reciprocal_complement

Point = Sequence


class CharFnBuildError(RuntimeError):
    """The block construction failed one of its defining identities."""


class EmptyKInnerError(RuntimeError):
    """No unit eigenvalue in the multiplier Gram: the isometric subspace is missing."""


class BlockSpace:
    """A direct sum of identical blocks indexed by multi-index labels."""

    def __init__(self, labels: Sequence[MultiIndex], block_dim: int):
        self.labels = tuple(labels)
        self.block_dim = block_dim
        self.index = {lab: i for i, lab in enumerate(self.labels)}
        self.dim = len(self.labels) * block_dim

    def block(self, label: MultiIndex) -> slice:
        i = self.index[label]
        return slice(i * self.block_dim, (i + 1) * self.block_dim)


def _root_package(a_sq: np.ndarray, rank_cutoff: float, psd_tol: float):
    """(cleaned root, pseudo-inverse of root, range basis) of a PSD matrix.

    Everything is derived from one eigendecomposition of the squared matrix;
    eigenvalues below the cutoff are treated as exact zeros so that roots and
    inverses never amplify rounding dust.
    """
    if is_exact_array(a_sq):
        from ._linalg import frac_sqrt, is_diagonal

        if not is_diagonal(a_sq):
            raise ExactnessError("exact root package needs a diagonal matrix")
        n = a_sq.shape[0]
        root = exact_zeros((n, n))
        pinv = exact_zeros((n, n))
        cols = []
        for i in range(n):
            if a_sq[i, i] == 0:
                continue
            r = frac_sqrt(a_sq[i, i])
            root[i, i] = r
            pinv[i, i] = 1 / r
            cols.append(i)
        basis = exact_zeros((n, len(cols)))
        for j, i in enumerate(cols):
            basis[i, j] = Fraction(1)
        return root, pinv, basis
    sym = (a_sq + a_sq.conj().T) / 2
    vals, vecs = np.linalg.eigh(sym)
    if vals.min(initial=0.0) < -psd_tol:
        raise CharFnBuildError(f"matrix is not PSD: eigenvalue {vals.min():.3e}")
    keep = vals > rank_cutoff * max(1.0, float(vals.max(initial=0.0)))
    roots = np.where(keep, np.sqrt(np.clip(vals, 0.0, None)), 0.0)
    inv = np.where(keep, 1.0 / np.where(roots == 0, 1.0, roots), 0.0)
    root = (vecs * roots) @ vecs.conj().T
    pinv = (vecs * inv) @ vecs.conj().T
    return root, pinv, vecs[:, keep]


@dataclass(eq=False)
class CharFnData:
    """All blocks of the characteristic-function construction for one tuple.

    ``taylor`` maps multi-indices to the r x (p+q) coefficient matrices of
    theta, from coordinates of defect(R) (+) complement to coordinates of
    Ran Defect. ``diagnostics`` records the residuals of every defining
    identity checked during the build.
    """

    factorization: KernelFactorization
    ops: OperatorTuple
    defect_sq: np.ndarray
    defect: np.ndarray
    pick_defect_sq: np.ndarray
    pick_defect: np.ndarray
    purity_residual: float
    ran_defect_basis: np.ndarray
    b_support: BlockSpace
    g_support: BlockSpace
    embedding: np.ndarray
    range_unitary: np.ndarray
    complement_basis: np.ndarray
    row_contraction: np.ndarray
    row_defect: np.ndarray
    row_defect_basis: np.ndarray
    b_block: np.ndarray
    d_block: np.ndarray
    taylor: dict
    support_cap: int
    constant_cap: int
    exact: bool
    diagnostics: dict

    @property
    def kernel(self) -> KernelSeries:
        return self.factorization.kernel

    @property
    def pick_factor(self) -> KernelSeries:
        return self.factorization.pick_factor

    @property
    def fiber_dim(self) -> int:
        return self.ran_defect_basis.shape[1]

    @property
    def domain_dim(self) -> int:
        return self.row_defect_basis.shape[1] + self.complement_basis.shape[1]

    @property
    def max_taylor_degree(self) -> int:
        return max((degree(g) for g in self.taylor), default=0)


def build_charfn(
    t: OperatorTuple,
    factorization: KernelFactorization,
    support_cap: Optional[int] = None,
    constant_cap: Optional[int] = None,
    purity_tol: float = 1e-10,
    rank_cutoff: float = 1e-10,
    psd_tol: float = 1e-10,
    identity_tol: float = 1e-8,
) -> CharFnData:
    """Run the whole block construction and return its data.

    ``support_cap`` bounds the degrees of the row-contraction labels (nonzero
    b coefficients of the CNP factor), ``constant_cap`` the labels of E
    (nonzero g coefficients); both default to nilpotency degree + 3. Raises
    NotPureError for impure tuples, CharFnBuildError when the row defect
    fails positivity ("R is not a contraction") or when the range
    identification u is ill-defined.
    """
    kernel = factorization.kernel
    pick = factorization.pick_factor
    g = factorization.positive_part
    if kernel.dim != t.num_vars:
        raise ValueError("factorization dimension does not match the tuple")
    if t.weights is not None:
        raise ExactnessError("the tuple must be given on an orthonormal basis")
    bound = t.nilpotency_bound
    if support_cap is None or constant_cap is None:
        if bound is None:
            raise ValueError("caps are required for tuples without a nilpotency bound")
        support_cap = support_cap if support_cap is not None else bound + 3
        constant_cap = constant_cap if constant_cap is not None else bound + 3
    b_s = reciprocal_complement(pick)
    if b_s.truncation < support_cap or g.truncation < constant_cap:
        raise ValueError("series truncation below the requested caps")

    dd = defect_data(t, kernel, pick_factor=pick, psd_tol=psd_tol)
    if dd.purity_residual > purity_tol and not dd.purity_exact:
        raise NotPureError(
            f"tuple is not pure: purity residual {dd.purity_residual:.3e} > {purity_tol}"
        )
    exact = t.exact
    delta_sq = dd.defect_sq
    delta, _, q_delta = _root_package(delta_sq, rank_cutoff, psd_tol)
    gamma_sq = dd.pick_defect_sq
    gamma, gamma_pinv, _ = _root_package(gamma_sq, rank_cutoff, psd_tol)
    r = q_delta.shape[1]
    n = t.size
    diagnostics: dict = {"purity_residual": dd.purity_residual}

    dim = t.num_vars
    b_labels = [
        a
        for a in enumerate_up_to_degree(dim, support_cap)
        if degree(a) >= 1 and b_s.coeff_1d(degree(a)) != 0
    ]
    g_labels = [a for a in enumerate_up_to_degree(dim, constant_cap) if g.coeff_1d(degree(a)) != 0]
    row_space = BlockSpace(b_labels, n)
    e_space = BlockSpace(g_labels, r)

    # g-weighted embedding of H into E
    embedding = exact_zeros((e_space.dim, n)) if exact else np.zeros((e_space.dim, n))
    qd_adj = q_delta.conj().T
    for lab in g_labels:
        if bound is not None and degree(lab) > bound:
            continue
        scale = sqrt_scalar(g.coeff(lab), exact)
        embedding[e_space.block(lab)] = scale * (qd_adj @ delta @ t.power_adjoint(lab))
    diagnostics["embedding_gram_residual"] = spectral_norm(
        embedding.conj().T @ embedding - gamma_sq
    )
    if exact:
        diagnostics["embedding_gram_exact"] = is_exactly_zero(
            embedding.conj().T @ embedding - gamma_sq
        )

    # unitary identification of Ran(pick defect) with Ran(embedding)
    range_unitary = embedding @ gamma_pinv
    u_residual = spectral_norm(range_unitary @ gamma - embedding)
    diagnostics["range_unitary_residual"] = u_residual
    if u_residual > identity_tol:
        raise CharFnBuildError(
            f"u ill-defined: ||u Gamma - embedding|| = {u_residual:.3e} "
            "(embedding Gram does not match the pick defect)"
        )
    complement_basis = orth_complement_of_range(embedding, rank_cutoff)

    # row contraction from the weighted powers, and its defect
    row = exact_zeros((n, row_space.dim)) if exact else np.zeros((n, row_space.dim))
    for lab in b_labels:
        scale = sqrt_scalar(b_s.coeff(lab), exact)
        row[:, row_space.block(lab)] = scale * t.power(lab)
    row_gram = row.conj().T @ row
    row_defect_sq = _eye(row_space.dim, exact) - row_gram
    lo = min_eigenvalue(row_defect_sq)
    if lo < -psd_tol:
        raise CharFnBuildError(f"row contraction fails: eigenvalue {lo:.3e} of I - R*R")
    row_defect, _, row_defect_basis = _root_package(row_defect_sq, rank_cutoff, psd_tol)
    diagnostics["row_defect_intertwining"] = spectral_norm(
        row @ row_defect - gamma @ row
    )
    diagnostics["row_gram_vs_pick_defect"] = spectral_norm(
        row @ row.conj().T - (_eye(n, exact) - gamma_sq)
    )

    p = row_defect_basis.shape[1]
    q_h = complement_basis.shape[1]
    b_block = _hstack(row_defect @ row_defect_basis, _zeros((row_space.dim, q_h), exact))
    d_block = _hstack(-(range_unitary @ (row @ row_defect_basis)), -complement_basis)

    # block unitarity of U = [[R*, B], [P, D]]
    eye_row = _eye(row_space.dim, exact)
    eye_e = _eye(e_space.dim, exact)
    rel1 = row_gram + b_block @ b_block.conj().T - eye_row
    rel2 = embedding @ row + d_block @ b_block.conj().T
    rel3 = embedding @ embedding.conj().T + d_block @ d_block.conj().T - eye_e
    diagnostics["block_relation_row"] = spectral_norm(rel1)
    diagnostics["block_relation_cross"] = spectral_norm(rel2)
    diagnostics["block_relation_e"] = spectral_norm(rel3)
    u_top = _hstack(row.conj().T, b_block)
    u_bottom = _hstack(embedding, d_block)
    u_full = _vstack(u_top, u_bottom)
    eye_full = _eye(n + p + q_h, exact)
    eye_target = _eye(row_space.dim + e_space.dim, exact)
    diagnostics["unitary_gram"] = spectral_norm(u_full.conj().T @ u_full - eye_full)
    diagnostics["unitary_cogram"] = spectral_norm(u_full @ u_full.conj().T - eye_target)

    beta_cap = bound if bound is not None else max(support_cap, constant_cap)
    taylor = _taylor_coefficients(
        t, kernel, g, b_s, qd_adj, delta, row_space, e_space, d_block, b_block, exact, beta_cap
    )

    return CharFnData(
        factorization=factorization,
        ops=t,
        defect_sq=delta_sq,
        defect=delta,
        pick_defect_sq=gamma_sq,
        pick_defect=gamma,
        purity_residual=dd.purity_residual,
        ran_defect_basis=q_delta,
        b_support=row_space,
        g_support=e_space,
        embedding=embedding,
        range_unitary=range_unitary,
        complement_basis=complement_basis,
        row_contraction=row,
        row_defect=row_defect,
        row_defect_basis=row_defect_basis,
        b_block=b_block,
        d_block=d_block,
        taylor=taylor,
        support_cap=support_cap,
        constant_cap=constant_cap,
        exact=exact,
        diagnostics=diagnostics,
    )


def _taylor_coefficients(
    t, kernel, g, b_s, qd_adj, delta, row_space, e_space, d_block, b_block, exact, beta_cap
):
    """theta_gamma = sqrt(g_gamma) D_gamma + sum_{alpha+beta=gamma} a_beta sqrt(b_alpha) Q* Defect (T^beta)^* B_alpha."""
    dim = t.num_vars
    taylor: dict = {}

    def bump(label, term):
        if label in taylor:
            taylor[label] = taylor[label] + term
        else:
            taylor[label] = term

    for lab in e_space.labels:
        scale = sqrt_scalar(g.coeff(lab), exact)
        bump(lab, scale * d_block[e_space.block(lab)])
    power_rows = {}
    for beta in enumerate_up_to_degree(dim, min(beta_cap, kernel.truncation)):
        power_rows[beta] = qd_adj @ delta @ t.power_adjoint(beta)
    for alpha in row_space.labels:
        scale = sqrt_scalar(b_s.coeff(alpha), exact)
        block = b_block[row_space.block(alpha)]
        for beta, rows in power_rows.items():
            coeff = kernel.coeff(beta) * scale
            if not exact:
                coeff = float(coeff)
            bump(add(alpha, beta), coeff * (rows @ block))
    return {lab: m for lab, m in taylor.items() if not is_exactly_zero(np.asarray(m))}


def _eye(n, exact):
    from ._linalg import exact_eye

    return exact_eye(n) if exact else np.eye(n)


def _zeros(shape, exact):
    return exact_zeros(shape) if exact else np.zeros(shape)


def _hstack(a, b):
    return np.hstack([np.asarray(a), np.asarray(b)])


def _vstack(a, b):
    return np.vstack([np.asarray(a), np.asarray(b)])


def charfn_blocks_dict(cfd: CharFnData) -> dict:
    """All block matrices and Taylor coefficients as dense row-major float arrays.

    Every matrix entry carries a shape header so consumers can reassemble the
    blocks without knowing the window layouts.
    """

    def dense(m) -> dict:
        arr = to_float_array(np.asarray(m))
        return {"shape": list(arr.shape), "entries": np.real_if_close(arr).astype(float).tolist()}

    return {
        "fiber_dim": cfd.fiber_dim,
        "domain_dim": cfd.domain_dim,
        "b_support": [list(l) for l in cfd.b_support.labels],
        "g_support": [list(l) for l in cfd.g_support.labels],
        "defect": dense(cfd.defect),
        "pick_defect": dense(cfd.pick_defect),
        "ran_defect_basis": dense(cfd.ran_defect_basis),
        "embedding": dense(cfd.embedding),
        "range_unitary": dense(cfd.range_unitary),
        "complement_basis": dense(cfd.complement_basis),
        "row_contraction": dense(cfd.row_contraction),
        "row_defect": dense(cfd.row_defect),
        "b_block": dense(cfd.b_block),
        "d_block": dense(cfd.d_block),
        "taylor": {
            ",".join(map(str, gamma)): dense(coeff) for gamma, coeff in sorted(cfd.taylor.items())
        },
    }


# ---------------------------------------------------------------------------
# evaluation and pointwise identities


def theta_taylor_at(cfd: CharFnData, point: Point) -> np.ndarray:
    """sum_gamma theta_gamma point^gamma."""
    exact = cfd.exact and all(isinstance(p, (Fraction, int)) for p in point)
    out = _zeros((cfd.fiber_dim, cfd.domain_dim), exact) if exact else np.zeros(
        (cfd.fiber_dim, cfd.domain_dim), dtype=complex
    )
    for lab, mat in cfd.taylor.items():
        mono = monomial_value(point, lab)
        term = mat if exact else to_float_array(np.asarray(mat))
        out = out + (mono if exact else complex(mono)) * term
    return out


def evaluate_charfn(cfd: CharFnData, point: Point, tol: float = 1e-10) -> np.ndarray:
    """theta at a point, evaluated two ways and cross-checked.

    The direct formula (operator series times the scalar row Z) must agree
    with the Taylor-coefficient sum within ``tol``; disagreement raises
    TruncationError since it means the windows were too shallow.
    """
    exact = cfd.exact and all(isinstance(p, (Fraction, int)) for p in point)
    t = cfd.ops
    g = cfd.factorization.positive_part
    b_s = reciprocal_complement(cfd.pick_factor)
    n = t.size
    dom = cfd.domain_dim
    direct = _zeros((cfd.fiber_dim, dom), exact) if exact else np.zeros(
        (cfd.fiber_dim, dom), dtype=complex
    )
    for lab in cfd.g_support.labels:
        scale = sqrt_scalar(g.coeff(lab), cfd.exact)
        mono = monomial_value(point, lab)
        block = cfd.d_block[cfd.g_support.block(lab)]
        if not exact:
            block = to_float_array(np.asarray(block))
            mono = complex(mono)
            scale = float(scale)
        direct = direct + scale * mono * block
    # Defect k_z(T)^* Z(z) B
    kz_adj = operator_series(t, cfd.kernel, point).conj().T
    zb = _zeros((n, dom), exact) if exact else np.zeros((n, dom), dtype=complex)
    for alpha in cfd.b_support.labels:
        scale = sqrt_scalar(b_s.coeff(alpha), cfd.exact)
        mono = monomial_value(point, alpha)
        block = cfd.b_block[cfd.b_support.block(alpha)]
        if not exact:
            block = to_float_array(np.asarray(block))
            mono = complex(mono)
            scale = float(scale)
        zb = zb + scale * mono * block
    qd_adj = cfd.ran_defect_basis.conj().T
    delta = cfd.defect
    if not exact:
        qd_adj = to_float_array(qd_adj)
        delta = to_float_array(delta)
        kz_adj = kz_adj.astype(complex)
    direct = direct + qd_adj @ delta @ kz_adj @ zb
    taylor_sum = theta_taylor_at(cfd, point)
    gap = max_abs(np.asarray(direct) - np.asarray(taylor_sum))
    if gap > tol:
        raise TruncationError(f"theta evaluations disagree by {gap:.3e}")
    return taylor_sum


def pointwise_identity_residual(cfd: CharFnData, pairs: Sequence) -> float:
    """max over (z, w) of || s(z,w) theta(z) theta(w)* - k(z,w) I + Q* Defect k_z(T)* k_w(T) Defect Q ||."""
    t = cfd.ops
    q = to_float_array(cfd.ran_defect_basis)
    delta = to_float_array(cfd.defect)
    eye = np.eye(cfd.fiber_dim)
    worst = 0.0
    for z, w in pairs:
        tz = np.asarray(theta_taylor_at(cfd, z), dtype=complex)
        tw = np.asarray(theta_taylor_at(cfd, w), dtype=complex)
        s_val = complex(cfd.pick_factor.evaluate(z, w, truncated=True).value)
        k_val = complex(cfd.kernel.evaluate(z, w, truncated=True).value)
        kz_adj = operator_series(t, cfd.kernel, z).conj().T
        kw = operator_series(t, cfd.kernel, w)
        mid = q.conj().T @ delta @ kz_adj @ kw @ delta @ q
        gap = s_val * (tz @ tw.conj().T) - k_val * eye + mid
        worst = max(worst, spectral_norm(gap))
    return worst


def inverse_identity_residual(cfd: CharFnData, points: Sequence[Point]) -> float:
    """max over z of || g_z(T)^* - k_z(T)^* (I - Z(z) R^*) ||."""
    t = cfd.ops
    b_s = reciprocal_complement(cfd.pick_factor)
    g_series = cfd.factorization.positive_part
    n = t.size
    worst = 0.0
    for z in points:
        g_adj = operator_series(t, g_series, z).conj().T
        k_adj = operator_series(t, cfd.kernel, z).conj().T
        zr = np.zeros((n, n), dtype=complex)
        for alpha in cfd.b_support.labels:
            mono = complex(monomial_value(z, alpha))
            zr += float(b_s.coeff(alpha)) * mono * to_float_array(t.power_adjoint(alpha))
        gap = g_adj - k_adj @ (np.eye(n) - zr)
        worst = max(worst, spectral_norm(gap))
    return worst


def row_symbol_margin(cfd: CharFnData, points: Sequence[Point]):
    """(min of 1 - sum b_alpha |z^alpha|^2, max mismatch against 1/s(z,z)) over points.

    The quantity is the squared-norm defect of the scalar row Z(z); strict
    positivity witnesses that Z is a strict contraction.
    """
    b_s = reciprocal_complement(cfd.pick_factor)
    margin = np.inf
    mismatch = 0.0
    for z in points:
        total = 0.0
        for alpha in cfd.b_support.labels:
            total += float(b_s.coeff(alpha)) * abs(complex(monomial_value(z, alpha))) ** 2
        value = 1.0 - total
        margin = min(margin, value)
        s_val = cfd.pick_factor.evaluate(z, z, truncated=True).value
        mismatch = max(mismatch, abs(value - 1.0 / float(abs(complex(s_val)))))
    return margin, mismatch


# ---------------------------------------------------------------------------
# the induced multiplier


@dataclass(eq=False)
class MultiplierMatrix:
    """Dense matrix of M_theta between truncated monomial windows.

    Source coordinates are grouped as (source label) x (domain coordinate),
    target coordinates as (target label) x (Ran Defect coordinate). The
    ``exact_window`` flag is set when no Taylor mass was discarded, which the
    caller guarantees by target_degree >= source_degree + max Taylor degree.
    ``discarded_mass`` bounds the squared column mass dropped by truncation.
    """

    matrix: np.ndarray
    source_labels: tuple
    window: MonomialWindow
    domain_dim: int
    source_degree: int
    target_degree: int
    max_taylor_degree: int
    exact_window: bool
    discarded_mass: float

    @property
    def source_dim(self) -> int:
        return len(self.source_labels) * self.domain_dim


def build_multiplier(cfd: CharFnData, source_degree: int, target_degree: int) -> MultiplierMatrix:
    """Assemble M_theta from the Taylor coefficients.

    A source monomial block at beta lands at target blocks beta + gamma with
    weight sqrt(a_beta^{(s)} / a_{beta+gamma}^{(k)}) theta_gamma; degrees
    beyond the target window are discarded and their mass recorded.
    """
    return multiplier_from_taylor(
        cfd.taylor,
        cfd.pick_factor,
        cfd.kernel,
        cfd.fiber_dim,
        cfd.domain_dim,
        source_degree,
        target_degree,
        exact=cfd.exact,
    )


def multiplier_from_taylor(
    taylor: dict,
    pick: KernelSeries,
    kernel: KernelSeries,
    fiber_dim: int,
    domain_dim: int,
    source_degree: int,
    target_degree: int,
    exact: bool = False,
) -> MultiplierMatrix:
    max_deg = max((degree(g) for g in taylor), default=0)
    if kernel.truncation < source_degree + max_deg or pick.truncation < source_degree:
        raise ValueError("kernel truncation too small for the requested windows")
    source_labels = tuple(enumerate_up_to_degree(kernel.dim, source_degree))
    window = MonomialWindow(kernel, fiber_dim, target_degree, exact=exact)
    matrix = _zeros((window.dim, len(source_labels) * domain_dim), exact)
    discarded = 0.0
    for j, beta in enumerate(source_labels):
        cols = slice(j * domain_dim, (j + 1) * domain_dim)
        for gamma, coeff in taylor.items():
            target = add(beta, gamma)
            ratio = pick.coeff(beta) / kernel.coeff(target)
            if degree(target) > target_degree:
                discarded = max(discarded, float(ratio) * float(max_abs(np.asarray(coeff))) ** 2)
                continue
            scale = sqrt_scalar(ratio, exact)
            matrix[window.block(target), cols] = (
                matrix[window.block(target), cols] + scale * coeff
            )
    exact_window = target_degree >= source_degree + max_deg
    return MultiplierMatrix(
        matrix=matrix,
        source_labels=source_labels,
        window=window,
        domain_dim=domain_dim,
        source_degree=source_degree,
        target_degree=target_degree,
        max_taylor_degree=max_deg,
        exact_window=exact_window,
        discarded_mass=discarded,
    )


@dataclass(frozen=True)
class FactorizationResidual:
    """|| V V^* + M_theta M_theta^* - I || on the target window.

    ``restricted`` is measured on the degree range where the finite windows
    represent the infinite objects with no discarded mass; ``unrestricted``
    covers the whole window and is generally nonzero for truncation reasons
    alone.
    """

    restricted: float
    unrestricted: float
    restricted_degree: int
    restricted_exact: bool


def factorization_residual(
    cfd: CharFnData, dil: DilationData, mult: MultiplierMatrix
) -> FactorizationResidual:
    if dil.window.max_degree != mult.target_degree or dil.fiber_dim != mult.window.r:
        raise ValueError("dilation and multiplier windows do not match")
    v = dil.matrix
    m = mult.matrix
    eye = _eye(dil.window.dim, cfd.exact and is_exact_array(v) and is_exact_array(m))
    total = v @ v.conj().T + m @ m.conj().T - eye
    restricted_degree = min(
        mult.source_degree,
        mult.target_degree - mult.max_taylor_degree,
        cfd.support_cap,
        cfd.constant_cap,
    )
    mask = dil.window.degree_mask(restricted_degree)
    sub = np.asarray(total)[np.ix_(mask, mask)]
    exact_zero = bool(is_exact_array(np.asarray(total)) and is_exactly_zero(sub))
    return FactorizationResidual(
        restricted=spectral_norm(sub),
        unrestricted=spectral_norm(np.asarray(total)),
        restricted_degree=restricted_degree,
        restricted_exact=exact_zero,
    )


# ---------------------------------------------------------------------------
# the isometric subspace of constants (k-inner restriction)


@dataclass(eq=False)
class KInnerData:
    """The maximal constant subspace on which the multiplier is isometric.

    ``basis`` columns span { x : ||M_theta x|| = ||x|| }. On it theta is a
    k-inner function: the induced map is isometric and its range is
    orthogonal to all positive-degree coordinate shifts of itself;
    ``shift_residual`` is the largest tested violation.
    """

    basis: np.ndarray
    gram_eigenvalues: np.ndarray
    shift_residual: float
    gram_excess: float

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def k_inner_subspace(cfd: CharFnData, check_degree: int = 3, eig_tol: float = 1e-9) -> KInnerData:
    dom = cfd.domain_dim
    gram = np.zeros((dom, dom))
    for gamma, coeff in cfd.taylor.items():
        c = to_float_array(np.asarray(coeff))
        gram += (c.conj().T @ c).real / float(cfd.kernel.coeff(gamma))
    vals, vecs = np.linalg.eigh((gram + gram.T) / 2)
    excess = max(0.0, float(vals.max(initial=0.0)) - 1.0)
    sel = vals >= 1.0 - eig_tol
    if not sel.any():
        raise EmptyKInnerError(
            f"empty k-inner space: largest Gram eigenvalue {vals.max(initial=0.0):.6f} < 1"
        )
    basis = vecs[:, sel]
    worst = 0.0
    dim = cfd.kernel.dim
    for alpha in enumerate_up_to_degree(dim, check_degree):
        if degree(alpha) == 0:
            continue
        shift = np.zeros((dom, dom), dtype=complex)
        for gamma, coeff in cfd.taylor.items():
            upper = add(gamma, alpha)
            other = cfd.taylor.get(upper)
            if other is None:
                continue
            c = to_float_array(np.asarray(coeff))
            o = to_float_array(np.asarray(other))
            shift += (c.conj().T @ o) / float(cfd.kernel.coeff(upper))
        worst = max(worst, max_abs(basis.conj().T @ shift @ basis))
    return KInnerData(basis, vals, worst, excess)


# ---------------------------------------------------------------------------
# comparing two factorizations of the same kernel


@dataclass(eq=False)
class AlignmentData:
    """Alignment of the multipliers of two CNP factorizations of one kernel.

    The Gram matrices of the families s_{i,z} (x) theta_i(z)^* eta must agree
    (both equal the compression of I - V V^*); ``correspondence`` is the
    partial isometry matching the two sampled families, computed from the
    common Gram factorization.
    """

    gram_residual: float
    correspondence: np.ndarray
    map_residual: float
    idempotency_residual: float
    reference_residual: Optional[float]


def align_factorizations(
    cfd1: CharFnData,
    cfd2: CharFnData,
    points: Sequence[Point],
    source_degree: int = 16,
    dil: Optional[DilationData] = None,
    rank_cutoff: float = 1e-10,
    mismatch_tol: float = 1e-6,
) -> AlignmentData:
    if cfd1.ops is not cfd2.ops:
        if cfd1.ops.size != cfd2.ops.size or any(
            max_abs(to_float_array(a) - to_float_array(b)) > 1e-12
            for a, b in zip(cfd1.ops.mats, cfd2.ops.mats)
        ):
            raise ValueError("mismatched tuples: alignments need the same operator tuple")
    if tuple(cfd1.kernel.coefficients) != tuple(cfd2.kernel.coefficients):
        raise ValueError("mismatched kernels")
    r = cfd1.fiber_dim
    if cfd2.fiber_dim != r:
        raise ValueError("defect ranks differ")
    for z in points:
        if sum(abs(complex(p)) ** 2 for p in z) >= 1:
            raise ValueError("sample point on or outside the unit sphere")

    def family(cfd: CharFnData) -> np.ndarray:
        s = cfd.pick_factor
        labels = enumerate_up_to_degree(s.dim, source_degree)
        dom = cfd.domain_dim
        cols = []
        for z in points:
            theta_adj = np.asarray(theta_taylor_at(cfd, z), dtype=complex).conj().T
            for a in range(r):
                vec = np.zeros(len(labels) * dom, dtype=complex)
                for i, beta in enumerate(labels):
                    scale = np.sqrt(float(s.coeff(beta)))
                    mono = np.conjugate(complex(monomial_value(z, beta)))
                    vec[i * dom : (i + 1) * dom] = scale * mono * theta_adj[:, a]
                cols.append(vec)
        return np.array(cols).T

    fam1, fam2 = family(cfd1), family(cfd2)
    gram1 = fam1.conj().T @ fam1
    gram2 = fam2.conj().T @ fam2
    gram_residual = max_abs(gram1 - gram2)
    if gram_residual > mismatch_tol:
        raise ValueError(
            f"Gram mismatch {gram_residual:.3e} beyond {mismatch_tol}: "
            "the inputs do not factor the same projection"
        )
    reference = None
    if dil is not None:
        # closed form of the compression of I - V V^*:
        # <(I - VV*)(k_w (x) e_a), k_z (x) e_b> = k(z, w) delta_ab
        #     - <k_w(T) Defect Q e_a, k_z(T) Defect Q e_b>
        t = cfd1.ops
        dq = to_float_array(cfd1.defect) @ to_float_array(cfd1.ran_defect_basis)
        series = [operator_series(t, cfd1.kernel, z).astype(complex) @ dq for z in points]
        m = len(points)
        gram_ref = np.zeros((m * r, m * r), dtype=complex)
        for i, zi in enumerate(points):
            for j, zj in enumerate(points):
                k_val = complex(cfd1.kernel.evaluate(zi, zj, truncated=True).value)
                block = k_val * np.eye(r) - series[i].conj().T @ series[j]
                gram_ref[i * r : (i + 1) * r, j * r : (j + 1) * r] = block
        reference = max(max_abs(gram1 - gram_ref), max_abs(gram2 - gram_ref))
    # common Gram factorization: orthonormalize both families against the
    # shared Gram, then match the orthonormal frames
    gram = (gram1 + gram2) / 2
    vals, vecs = np.linalg.eigh((gram + gram.conj().T) / 2)
    keep = vals > 1e-8 * max(1.0, float(vals.max(initial=0.0)))
    whiten = vecs[:, keep] / np.sqrt(vals[keep])
    frame1 = fam1 @ whiten
    frame2 = fam2 @ whiten
    correspondence = frame2 @ frame1.conj().T
    map_residual = max_abs(correspondence @ fam1 - fam2)
    p = correspondence.conj().T @ correspondence
    idem = max_abs(p @ p - p)
    return AlignmentData(gram_residual, correspondence, map_residual, idem, reference)


# ---------------------------------------------------------------------------
# functional model and coincidence


@dataclass(frozen=True)
class FunctionalModelReport:
    intertwining_residuals: tuple
    equality_residual: float
    factorization: FactorizationResidual


def functional_model(
    cfd: CharFnData,
    dil: DilationData,
    mult: MultiplierMatrix,
    residual_tol: float = 1e-8,
):
    """The compression of the coordinate multipliers to Ran V, with verification.

    Since V V^* + M_theta M_theta^* = I, Ran V is the orthogonal complement
    of Ran M_theta, and V itself is an orthonormal basis of it; in
    V-coordinates the compressed tuple must reproduce T. Returns the model
    tuple and a report of the intertwining and equality residuals.
    """
    fr = factorization_residual(cfd, dil, mult)
    if fr.restricted > residual_tol:
        raise ValueError(
            f"factorization residual {fr.restricted:.3e} exceeds {residual_tol}; "
            "the model space is not trustworthy"
        )
    v = to_float_array(dil.matrix)
    t = cfd.ops
    mats = []
    inter = []
    equality = 0.0
    for i in range(t.num_vars):
        m = to_float_array(dil.window.multiplication_matrix(i))
        compressed = v.conj().T @ m @ v
        mats.append(compressed)
        ti = to_float_array(t.mats[i])
        inter.append(spectral_norm(m.conj().T @ v - v @ ti.conj().T))
        equality = max(equality, spectral_norm(compressed - ti))
    model = OperatorTuple(tuple(mats), None, None, t.nilpotency_bound, cfd.kernel)
    return model, FunctionalModelReport(tuple(inter), equality, fr)


def coincidence_residual(
    cfd_a: CharFnData,
    cfd_b: CharFnData,
    rng: Optional[np.random.Generator] = None,
    starts: int = 8,
    iterations: int = 60,
) -> float:
    """How far the two Taylor families are from a constant-unitary match.

    Coincidence of characteristic functions is operationalized as the
    existence of unitaries U2 (on Ran Defect coordinates) and U1 (on the
    domain) with theta'_gamma = U2 theta_gamma U1 for every gamma. The
    bilinear orthogonal Procrustes problem is solved by alternating polar
    updates from several starts; the returned value is the best relative
    Frobenius mismatch (inf for incompatible shapes).
    """
    if cfd_a.fiber_dim != cfd_b.fiber_dim or cfd_a.domain_dim != cfd_b.domain_dim:
        return float("inf")
    if tuple(cfd_a.kernel.coefficients) != tuple(cfd_b.kernel.coefficients):
        raise ValueError("coincidence comparison requires the same kernel")
    rng = rng if rng is not None else np.random.default_rng(0)
    labels = sorted(set(cfd_a.taylor) | set(cfd_b.taylor), key=lambda g: (degree(g), g))
    r, dom = cfd_a.fiber_dim, cfd_a.domain_dim

    def stack(cfd):
        mats = []
        for lab in labels:
            w = 1.0 / float(cfd.kernel.coeff(lab))
            m = cfd.taylor.get(lab)
            m = np.zeros((r, dom)) if m is None else to_float_array(np.asarray(m))
            mats.append(np.sqrt(w) * m)
        return mats

    stack_a, stack_b = stack(cfd_a), stack(cfd_b)
    scale = max(np.sqrt(sum(np.linalg.norm(m) ** 2 for m in stack_a)), 1e-30)

    def residual(u2, u1):
        total = 0.0
        for ma, mb in zip(stack_a, stack_b):
            total += np.linalg.norm(u2 @ ma @ u1 - mb) ** 2
        return float(np.sqrt(total)) / scale

    candidates = [np.eye(r)]
    guess = sum(mb @ ma.conj().T for ma, mb in zip(stack_a, stack_b))
    if np.linalg.norm(guess) > 1e-12:
        candidates.append(polar_orthogonal(guess))
    for _ in range(starts):
        candidates.append(polar_orthogonal(rng.standard_normal((r, r))))
    best = float("inf")
    for u2 in candidates:
        u1 = np.eye(dom)
        for _ in range(iterations):
            m1 = sum((u2 @ ma).conj().T @ mb for ma, mb in zip(stack_a, stack_b))
            u1 = polar_orthogonal(m1)
            m2 = sum(mb @ (ma @ u1).conj().T for ma, mb in zip(stack_a, stack_b))
            u2 = polar_orthogonal(m2)
            current = residual(u2, u1)
            if current < best:
                best = current
            if best < 1e-13:
                return best
    return best
