"""Named configurations and the reusable verification checks.

A configuration bundles a kernel factorization with a concrete pure tuple
(a graded multiplication model, a seeded co-invariant compression of one, or
a hand-built nilpotent tuple) plus the degree windows every construction
step should use. The same configurations drive the command-line suite and
the acceptance tests, so residuals reported by either are comparable.

All randomness (sample points, compression seeds, conjugating orthogonals)
is drawn from generators seeded by the suite seed and the configuration
name, which makes reports reproducible and independent of execution order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .charfn import (
    CharFnData,
    align_factorizations,
    build_charfn,
    build_multiplier,
    coincidence_residual,
    evaluate_charfn,
    factorization_residual,
    functional_model,
    inverse_identity_residual,
    k_inner_subspace,
    pointwise_identity_residual,
    row_symbol_margin,
)
from .dilation import TruncationError, build_dilation, intertwining_residuals, kernel_vector_action
from .operators import (
    OperatorTuple,
    defect_data,
    model_tuple,
    random_coinvariant_compression,
)
from .series import (
    KernelFactorization,
    KernelSeries,
    bergman_kernel,
    cauchy_product,
    dirichlet_kernel,
    drury_arveson_kernel,
    factor_through_pick,
    reciprocal_complement,
    szego_kernel,
)

TRUNCATION = 48


@dataclass(eq=False)
class Configuration:
    """One entry of the verification matrix."""

    name: str
    dim: int
    factorization: KernelFactorization
    ops: OperatorTuple
    support_cap: int
    constant_cap: int
    source_degree: int
    sample_scale: float = 0.5
    description: str = ""

    @property
    def kernel(self) -> KernelSeries:
        return self.factorization.kernel

    @property
    def pick_factor(self) -> KernelSeries:
        return self.factorization.pick_factor


def _kernel_named(kind: str, dim: int) -> KernelSeries:
    if kind == "szego":
        return szego_kernel(dim, TRUNCATION)
    if kind == "da":
        return drury_arveson_kernel(dim, TRUNCATION)
    if kind == "dirichlet":
        return dirichlet_kernel(dim, TRUNCATION)
    if kind == "da*dirichlet":
        return cauchy_product(drury_arveson_kernel(dim, TRUNCATION), dirichlet_kernel(dim, TRUNCATION))
    if kind.startswith("bergman"):
        return bergman_kernel(int(kind[7:]), dim, TRUNCATION)
    raise ValueError(f"unknown kernel name {kind!r}")


def default_caps(pick: KernelSeries, dim: int, nilpotency_bound: int) -> tuple[int, int]:
    """Degree windows deep enough for 1e-8 pointwise residuals at the sample radii.

    The row-support window only needs the nilpotency degree when the pick
    factor's b-sequence is finitely supported below it; infinitely supported
    factors (Dirichlet-like) need the tail of b_n |z|^(2n) below tolerance.
    The constant window bounds the g-tail the same way, and quotient
    coefficients can grow polynomially (g_n = n + 1 for the cubed kernel
    through DA), so the windows and the sample radii below are sized
    together: with |z| |w| <= 0.24 a depth-16 tail of (n+1) t^n stays under
    1e-9, an order below the composite tolerance.
    """
    b = reciprocal_complement(pick)
    shallow = nilpotency_bound + 3
    deep = 16 if dim == 1 else 14
    finite_b = all(c == 0 for c in b.coefficients[min(shallow, b.truncation) + 1 :])
    support_cap = shallow if finite_b else deep
    return support_cap, deep


def _model_config(
    name, k_kind, s_kind, dim, model_degree, compress_seed=None, description=""
) -> Configuration:
    kernel = _kernel_named(k_kind, dim)
    pick = _kernel_named(s_kind, dim)
    fac = factor_through_pick(kernel, pick)
    t = model_tuple(kernel, dim, model_degree, mode="float")
    if compress_seed is not None:
        t = random_coinvariant_compression(t, np.random.default_rng(compress_seed))
    bound = t.nilpotency_bound or model_degree
    support_cap, constant_cap = default_caps(pick, dim, bound)
    return Configuration(
        name=name,
        dim=dim,
        factorization=fac,
        ops=t,
        support_cap=support_cap,
        constant_cap=constant_cap,
        source_degree=bound + 2,
        sample_scale=0.45 if dim >= 2 else 0.48,
        description=description,
    )


def _jordan_config() -> Configuration:
    kernel = szego_kernel(1, TRUNCATION)
    fac = factor_through_pick(kernel, kernel)
    t = model_tuple(kernel, 1, 1, mode="float")
    return Configuration(
        name="jordan",
        dim=1,
        factorization=fac,
        ops=t,
        support_cap=4,
        constant_cap=4,
        source_degree=3,
        description="2x2 nilpotent Jordan cell; theta(z) = z^2, all identities exact",
    )


def _two_cells_config() -> Configuration:
    kernel = szego_kernel(1, TRUNCATION)
    fac = factor_through_pick(kernel, kernel)
    mat = np.zeros((4, 4))
    mat[1, 0] = 1.0
    mat[3, 2] = 1.0
    t = OperatorTuple((mat,), None, None, 1, kernel)
    return Configuration(
        name="two_cells",
        dim=1,
        factorization=fac,
        ops=t,
        support_cap=4,
        constant_cap=4,
        source_degree=3,
        description="direct sum of two Jordan cells; defect rank 2",
    )


def _nonpure_config() -> Configuration:
    kernel = szego_kernel(1, TRUNCATION)
    fac = factor_through_pick(kernel, kernel)
    t = OperatorTuple((np.array([[1.0]]),), None, None, None, kernel)
    return Configuration(
        name="nonpure",
        dim=1,
        factorization=fac,
        ops=t,
        support_cap=4,
        constant_cap=4,
        source_degree=3,
        description="the 1x1 isometry: a 1/k-contraction that is not pure",
    )


_BUILDERS: dict[str, Callable[[], Configuration]] = {
    "jordan": _jordan_config,
    "two_cells": _two_cells_config,
    "nonpure": _nonpure_config,
    "k2_da_d1_n1": lambda: _model_config("k2_da_d1_n1", "bergman2", "da", 1, 1),
    "k2_da_d1_n2": lambda: _model_config("k2_da_d1_n2", "bergman2", "da", 1, 2),
    "k2_da_d1_n3": lambda: _model_config("k2_da_d1_n3", "bergman2", "da", 1, 3),
    "k2_da_d2_n1": lambda: _model_config("k2_da_d2_n1", "bergman2", "da", 2, 1),
    "k2_da_d2_n2": lambda: _model_config("k2_da_d2_n2", "bergman2", "da", 2, 2),
    "k2_da_d2_n3": lambda: _model_config("k2_da_d2_n3", "bergman2", "da", 2, 3),
    "k3_da_d1_n1": lambda: _model_config("k3_da_d1_n1", "bergman3", "da", 1, 1),
    "k3_da_d1_n2": lambda: _model_config("k3_da_d1_n2", "bergman3", "da", 1, 2),
    "k3_da_d2_n1": lambda: _model_config("k3_da_d2_n1", "bergman3", "da", 2, 1),
    "dadir_da_d1_n2": lambda: _model_config("dadir_da_d1_n2", "da*dirichlet", "da", 1, 2),
    "dadir_da_d2_n1": lambda: _model_config("dadir_da_d2_n1", "da*dirichlet", "da", 2, 1),
    "dadir_dir_d1_n1": lambda: _model_config("dadir_dir_d1_n1", "da*dirichlet", "dirichlet", 1, 1),
    "k2_da_d1_n3_c": lambda: _model_config(
        "k2_da_d1_n3_c", "bergman2", "da", 1, 3, compress_seed=1031,
        description="random co-invariant compression",
    ),
    "k2_da_d2_n2_c": lambda: _model_config(
        "k2_da_d2_n2_c", "bergman2", "da", 2, 2, compress_seed=1032,
        description="random co-invariant compression",
    ),
    "k3_da_d1_n2_c": lambda: _model_config(
        "k3_da_d1_n2_c", "bergman3", "da", 1, 2, compress_seed=1033,
        description="random co-invariant compression",
    ),
    "dadir_da_d1_n2_c": lambda: _model_config(
        "dadir_da_d1_n2_c", "da*dirichlet", "da", 1, 2, compress_seed=1034,
        description="random co-invariant compression",
    ),
}

# the verification matrix exercised by the suite and the acceptance tests
SUITE_CONFIGS = (
    "jordan",
    "two_cells",
    "k2_da_d1_n1",
    "k2_da_d1_n2",
    "k2_da_d1_n3",
    "k2_da_d2_n1",
    "k2_da_d2_n2",
    "k2_da_d2_n3",
    "k3_da_d1_n1",
    "k3_da_d1_n2",
    "k3_da_d2_n1",
    "dadir_da_d1_n2",
    "dadir_da_d2_n1",
    "dadir_dir_d1_n1",
    "k2_da_d1_n3_c",
    "k2_da_d2_n2_c",
    "k3_da_d1_n2_c",
    "dadir_da_d1_n2_c",
)

CONFIG_NAMES = tuple(_BUILDERS)


def configuration(name: str) -> Configuration:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown configuration {name!r}; known: {', '.join(_BUILDERS)}") from None
    return builder()


# ---------------------------------------------------------------------------
# checks


@dataclass(frozen=True)
class CheckResult:
    name: str
    verdict: str  # pass | fail | certificate-only
    residual: Optional[float]
    exact: Optional[bool]
    elapsed: float

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "verdict": self.verdict,
            "residual": self.residual,
            "exact": self.exact,
            "elapsed": self.elapsed,
        }


def _check(name, residual, tol, exact=None) -> CheckResult:
    residual = float(residual)
    return CheckResult(name, "pass" if residual <= tol else "fail", residual, exact, 0.0)


def _timed(result: CheckResult, start: float) -> CheckResult:
    return CheckResult(result.name, result.verdict, result.residual, result.exact, time.perf_counter() - start)


def sample_points(rng: np.random.Generator, count: int, dim: int, scale: float = 0.5):
    """Complex points in the ball of radius ``scale``, seeded."""
    pts = []
    for _ in range(count):
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        v = v / np.linalg.norm(v) * scale * rng.uniform(0.3, 1.0)
        pts.append(v)
    return pts


def config_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed] + list(name.encode()))


# default tolerances: single-step identities, composite constructions
TOL_SINGLE = 1e-10
TOL_COMPOSITE = 1e-8
TOL_BLOCK = 1e-9
TOL_MODEL = 1e-9


def run_configuration_checks(
    config: Configuration,
    seed: int = 0,
    composite_tol: float = TOL_COMPOSITE,
    gram_pairs: int = 50,
    point_count: int = 20,
) -> list[CheckResult]:
    """Build everything for one configuration and run the invariant suite.

    Purity failure aborts the construction; it is reported as the single
    failing check so the caller can exit nonzero with the residual in hand.
    """
    rng = config_rng(seed, config.name)
    checks: list[CheckResult] = []
    t0 = time.perf_counter()
    dd = defect_data(config.ops, config.kernel, config.pick_factor)
    checks.append(_timed(_check("purity", dd.purity_residual, TOL_SINGLE, dd.purity_exact), t0))
    if checks[-1].verdict == "fail":
        return checks

    t0 = time.perf_counter()
    cfd = build_charfn(
        config.ops,
        config.factorization,
        support_cap=config.support_cap,
        constant_cap=config.constant_cap,
    )
    target_degree = config.source_degree + cfd.max_taylor_degree
    dil = build_dilation(config.ops, config.kernel, dd, target_degree)
    checks.append(_timed(_check("dilation_isometry", dil.isometry_residual, TOL_SINGLE), t0))

    t0 = time.perf_counter()
    checks.append(
        _timed(_check("dilation_intertwining", max(intertwining_residuals(dil)), TOL_SINGLE), t0)
    )

    t0 = time.perf_counter()
    worst = 0.0
    for point in sample_points(rng, point_count, config.dim, config.sample_scale):
        fiber = rng.standard_normal(dil.fiber_dim)
        fiber /= np.linalg.norm(fiber)
        vec = dil.window.kernel_vector(point, fiber)
        lhs = np.asarray(dil.matrix, dtype=complex).conj().T @ vec
        rhs = kernel_vector_action(dil, point, fiber, tol=np.inf)
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    checks.append(_timed(_check("kernel_vector_identity", worst, TOL_SINGLE), t0))

    t0 = time.perf_counter()
    checks.append(
        _timed(
            _check(
                "defect_embedding_gram",
                cfd.diagnostics["embedding_gram_residual"],
                TOL_BLOCK,
                cfd.diagnostics.get("embedding_gram_exact"),
            ),
            t0,
        )
    )

    t0 = time.perf_counter()
    block = max(
        cfd.diagnostics["block_relation_row"],
        cfd.diagnostics["block_relation_cross"],
        cfd.diagnostics["block_relation_e"],
        cfd.diagnostics["unitary_gram"],
        cfd.diagnostics["unitary_cogram"],
    )
    checks.append(_timed(_check("block_unitarity", block, TOL_BLOCK), t0))

    t0 = time.perf_counter()
    points = sample_points(rng, point_count, config.dim, config.sample_scale)
    checks.append(
        _timed(_check("series_inverse_identity", inverse_identity_residual(cfd, points), TOL_SINGLE), t0)
    )

    t0 = time.perf_counter()
    margin, mismatch = row_symbol_margin(cfd, points)
    strict_ok = margin > 0 and mismatch <= composite_tol
    checks.append(
        _timed(
            CheckResult(
                "row_symbol_strict_contraction",
                "pass" if strict_ok else "fail",
                float(mismatch),
                None,
                0.0,
            ),
            t0,
        )
    )

    t0 = time.perf_counter()
    try:
        for point in sample_points(rng, 5, config.dim, config.sample_scale):
            evaluate_charfn(cfd, point)
        checks.append(_timed(_check("theta_taylor_cross_check", 0.0, 1.0), t0))
    except TruncationError:
        checks.append(
            _timed(CheckResult("theta_taylor_cross_check", "fail", None, None, 0.0), t0)
        )

    t0 = time.perf_counter()
    pairs = list(
        zip(
            sample_points(rng, gram_pairs, config.dim, config.sample_scale),
            sample_points(rng, gram_pairs, config.dim, config.sample_scale),
        )
    )
    checks.append(
        _timed(_check("pointwise_gram_identity", pointwise_identity_residual(cfd, pairs), composite_tol), t0)
    )

    t0 = time.perf_counter()
    mult = build_multiplier(cfd, config.source_degree, target_degree)
    norm = float(np.linalg.norm(np.asarray(mult.matrix, dtype=float), 2))
    checks.append(_timed(_check("multiplier_contraction", max(0.0, norm - 1.0), TOL_SINGLE), t0))

    t0 = time.perf_counter()
    fr = factorization_residual(cfd, dil, mult)
    checks.append(
        _timed(_check("projection_partition", fr.restricted, composite_tol, fr.restricted_exact), t0)
    )

    t0 = time.perf_counter()
    ki = k_inner_subspace(cfd)
    ki_ok = ki.dim >= 1 and ki.shift_residual <= TOL_BLOCK
    checks.append(
        _timed(
            CheckResult("k_inner_space", "pass" if ki_ok else "fail", float(ki.shift_residual), None, 0.0),
            t0,
        )
    )

    t0 = time.perf_counter()
    _, report = functional_model(cfd, dil, mult)
    fm = max(report.equality_residual, max(report.intertwining_residuals))
    checks.append(_timed(_check("functional_model", fm, TOL_MODEL), t0))

    return checks


def run_alignment_check(seed: int = 0, samples: int = 30) -> CheckResult:
    """Gram alignment of the two CNP factorizations of the DA*Dirichlet kernel."""
    t0 = time.perf_counter()
    dim = 1
    da = drury_arveson_kernel(dim, TRUNCATION)
    dirichlet = dirichlet_kernel(dim, TRUNCATION)
    kernel = cauchy_product(da, dirichlet)
    t = model_tuple(kernel, dim, 1, mode="float")
    cfd1 = build_charfn(t, factor_through_pick(kernel, da), support_cap=14, constant_cap=14)
    cfd2 = build_charfn(t, factor_through_pick(kernel, dirichlet), support_cap=14, constant_cap=14)
    rng = config_rng(seed, "alignment")
    points = sample_points(rng, samples, dim, 0.5)
    dd = defect_data(t, kernel, da)
    dil = build_dilation(t, kernel, dd, 4)
    alignment = align_factorizations(cfd1, cfd2, points, source_degree=18, dil=dil)
    residual = max(alignment.gram_residual, alignment.reference_residual)
    return _timed(_check("alignment_two_factorizations", residual, TOL_COMPOSITE), t0)


def run_coincidence_checks(seed: int = 0) -> list[CheckResult]:
    """Conjugated tuples must coincide; distinct Jordan structures must not."""
    out = []
    t0 = time.perf_counter()
    kernel = bergman_kernel(2, 1, TRUNCATION)
    fac = factor_through_pick(kernel, drury_arveson_kernel(1, TRUNCATION))
    t = model_tuple(kernel, 1, 2, mode="float")
    rng = config_rng(seed, "coincidence")
    w = np.linalg.qr(rng.standard_normal((t.size, t.size)))[0]
    conjugated = OperatorTuple(
        tuple(w.T @ m @ w for m in t.mats), None, None, t.nilpotency_bound, kernel
    )
    cfd = build_charfn(t, fac, support_cap=5, constant_cap=10)
    cfd_conj = build_charfn(conjugated, fac, support_cap=5, constant_cap=10)
    res = coincidence_residual(cfd, cfd_conj, config_rng(seed, "coincidence-solve"))
    out.append(_timed(_check("coincidence_conjugated", res, 1e-6), t0))

    t0 = time.perf_counter()
    jordan = configuration("two_cells")
    chain = np.zeros((4, 4))
    chain[1, 0] = 1.0
    chain[2, 1] = 1.0
    other = OperatorTuple((chain,), None, None, 3, jordan.kernel)
    cfd_a = build_charfn(jordan.ops, jordan.factorization, support_cap=6, constant_cap=6)
    cfd_b = build_charfn(other, jordan.factorization, support_cap=6, constant_cap=6)
    res_distinct = coincidence_residual(cfd_a, cfd_b, config_rng(seed, "coincidence-distinct"))
    verdict = "pass" if res_distinct >= 1e-3 else "fail"
    out.append(_timed(CheckResult("coincidence_distinct", verdict, float(res_distinct), None, 0.0), t0))
    return out
