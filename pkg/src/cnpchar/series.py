"""Coefficient calculus for unitarily invariant kernels on the unit ball.

A kernel k(z, w) = sum_n a_n <z, w>^n with a_0 = 1 and a_n > 0 is stored as
its truncated coefficient sequence. Two scalar backends coexist: exact
``fractions.Fraction`` entries (default for the built-in kernels, so that
every coefficient identity can be asserted exactly) and plain floats.

The signed sequence b_n defined by

    sum_{n>=1} b_n t^n = 1 - 1 / (sum_{n>=0} a_n t^n)

drives most of the operator theory downstream: non-negativity of all b_n is
equivalent to the irreducible complete Nevanlinna-Pick property for this
class of kernels, and the multi-index lifts

    a_alpha = a_|alpha| * multinomial(alpha),   b_alpha likewise

are the coefficients appearing in every operator series. Products of two
kernels correspond exactly to Cauchy products of the one-variable
sequences, which is what makes the one-variable calculus sufficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence, Union

from .multiindex import MultiIndex, degree, multinomial

Scalar = Union[Fraction, int, float]

DEFAULT_TRUNCATION = 32


class FactorizationError(ValueError):
    """Raised when a claimed kernel factorization fails coefficientwise."""


def _is_exact(x) -> bool:
    return isinstance(x, (Fraction, int))


@dataclass(frozen=True)
class RealSeries:
    """A truncated signed coefficient sequence c_0..c_N in one variable.

    Carries the ambient ball dimension so multi-index lifts are available via
    :meth:`coeff`. No sign or normalization constraints.
    """

    coefficients: tuple
    dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(self.coefficients))
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if not self.coefficients:
            raise ValueError("empty coefficient sequence")

    @property
    def truncation(self) -> int:
        return len(self.coefficients) - 1

    @property
    def exact(self) -> bool:
        return all(_is_exact(c) for c in self.coefficients)

    def coeff_1d(self, n: int):
        if n < 0 or n > self.truncation:
            raise ValueError(f"degree {n} beyond truncation {self.truncation}")
        return self.coefficients[n]

    def coeff(self, alpha: Optional[MultiIndex]):
        """Multi-index lift c_alpha = c_|alpha| * multinomial(alpha); 0 off the cone."""
        if alpha is None:
            return 0
        if len(alpha) != self.dim:
            raise ValueError(f"multi-index dimension {len(alpha)} != {self.dim}")
        return self.coeff_1d(degree(alpha)) * multinomial(alpha)

    def support_degrees(self) -> list[int]:
        return [n for n, c in enumerate(self.coefficients) if c != 0]

    def to_float(self) -> "RealSeries":
        return RealSeries(tuple(float(c) for c in self.coefficients), self.dim)


class KernelValue(NamedTuple):
    value: Scalar
    tail_bound: float


@dataclass(frozen=True)
class KernelSeries:
    """A unitarily invariant kernel sum_n a_n <z,w>^n, truncated at order N.

    Invariants enforced at construction: a_0 = 1 and a_n > 0 for every stored
    coefficient. ``radius_one_declared`` records the (unverifiable at finite
    truncation) assumption that the power series has radius of convergence 1;
    the built-in kernels declare it.
    """

    coefficients: tuple
    dim: int
    radius_one_declared: bool = False

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(self.coefficients))
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if not self.coefficients:
            raise ValueError("empty coefficient sequence")
        if self.coefficients[0] != 1:
            raise ValueError(f"a_0 must be 1, got {self.coefficients[0]}")
        for n, a in enumerate(self.coefficients):
            if not a > 0:
                raise ValueError(f"coefficient a_{n} = {a} is not strictly positive")

    @property
    def truncation(self) -> int:
        return len(self.coefficients) - 1

    @property
    def exact(self) -> bool:
        return all(_is_exact(c) for c in self.coefficients)

    def coeff_1d(self, n: int):
        if n < 0 or n > self.truncation:
            raise ValueError(f"degree {n} beyond truncation {self.truncation}")
        return self.coefficients[n]

    def coeff(self, alpha: Optional[MultiIndex]):
        """Multi-index lift a_alpha = a_|alpha| * multinomial(alpha); 0 off the cone."""
        if alpha is None:
            return 0
        if len(alpha) != self.dim:
            raise ValueError(f"multi-index dimension {len(alpha)} != {self.dim}")
        return self.coeff_1d(degree(alpha)) * multinomial(alpha)

    def monomial_norm_sq(self, alpha: MultiIndex):
        """Squared norm of z^alpha in the kernel's space: 1 / a_alpha."""
        a = self.coeff(alpha)
        return Fraction(1, 1) / a if _is_exact(a) else 1.0 / a

    def to_float(self) -> "KernelSeries":
        return KernelSeries(
            tuple(float(c) for c in self.coefficients), self.dim, self.radius_one_declared
        )

    def evaluate(self, z: Sequence, w: Sequence, truncated: bool = False) -> KernelValue:
        """Partial sum of the kernel at a pair of points inside the ball.

        Returns the truncated value together with a geometric tail estimate
        derived from the largest observed coefficient ratio. The estimate is
        heuristic in that ratios beyond the truncation are assumed not to
        exceed the observed maximum. With ``truncated=True`` the partial sum
        is the requested semantics and the tail bound is reported as 0.
        """
        if len(z) != self.dim or len(w) != self.dim:
            raise ValueError("point dimension mismatch")
        if _norm_sq(z) >= 1 or _norm_sq(w) >= 1:
            raise ValueError("point on or outside the unit sphere")
        t = sum(zi * _conj(wi) for zi, wi in zip(z, w))
        value = self.coefficients[-1]
        for a in reversed(self.coefficients[:-1]):
            value = value * t + a
        if truncated:
            return KernelValue(value, 0.0)
        growth = max(
            float(self.coefficients[n + 1]) / float(self.coefficients[n])
            for n in range(self.truncation)
        )
        r = abs(complex(t)) * growth
        if r < 1:
            tail = abs(float(self.coefficients[-1])) * abs(complex(t)) ** self.truncation
            tail *= r / (1 - r)
        else:
            tail = math.inf
        return KernelValue(value, tail)


def _conj(x):
    return x.conjugate() if hasattr(x, "conjugate") else x


def _norm_sq(point) -> float:
    return sum(abs(complex(p)) ** 2 for p in point)


# ---------------------------------------------------------------------------
# series arithmetic


def reciprocal_complement(k: KernelSeries) -> RealSeries:
    """The sequence b with sum_{n>=1} b_n t^n = 1 - 1/k, stored as b_0 = 0, b_1, ...

    Uses the reciprocal recurrence: with c the coefficients of 1/k,
    c_0 = 1 and c_n = -sum_{i=1}^{n} a_i c_{n-i}; then b_n = -c_n. Exact in
    rational mode.
    """
    a = k.coefficients
    inv = [a[0] ** 0]  # one of the right scalar type
    for n in range(1, len(a)):
        inv.append(-sum(a[i] * inv[n - i] for i in range(1, n + 1)))
    b = [0 * inv[0]] + [-c for c in inv[1:]]
    return RealSeries(tuple(b), k.dim)


def cauchy_product(p, q):
    """Coefficientwise convolution, truncated to the shorter of the two inputs.

    The product of two kernels is again a kernel; in that case a
    KernelSeries is returned, otherwise a RealSeries.
    """
    if p.dim != q.dim:
        raise ValueError("dimension mismatch")
    n = min(len(p.coefficients), len(q.coefficients))
    pa, qa = p.coefficients, q.coefficients
    out = tuple(sum(pa[i] * qa[m - i] for i in range(m + 1)) for m in range(n))
    if isinstance(p, KernelSeries) and isinstance(q, KernelSeries):
        return KernelSeries(out, p.dim, p.radius_one_declared and q.radius_one_declared)
    return RealSeries(out, p.dim)


def quotient(numerator, denominator) -> RealSeries:
    """Coefficients q with cauchy_product(denominator, q) = numerator.

    Requires the denominator to be normalized (leading coefficient 1).
    """
    if numerator.dim != denominator.dim:
        raise ValueError("dimension mismatch")
    if denominator.coefficients[0] != 1:
        raise ValueError("denominator must have leading coefficient 1")
    n = min(len(numerator.coefficients), len(denominator.coefficients))
    a, l = numerator.coefficients, denominator.coefficients
    q: list = []
    for m in range(n):
        q.append(a[m] - sum(q[i] * l[m - i] for i in range(m)))
    return RealSeries(tuple(q), numerator.dim)


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class NonnegativityCertificate:
    """Outcome of checking coefficient signs up to a truncation order.

    ``holds_up_to`` is the truncation actually examined; the verdict never
    claims anything beyond it.
    """

    holds: bool
    holds_up_to: int
    first_negative: Optional[int]
    tolerance: float

    def __bool__(self) -> bool:
        return self.holds


def _sign_certificate(coeffs, start: int, tol: float) -> NonnegativityCertificate:
    first = None
    for n in range(start, len(coeffs)):
        c = coeffs[n]
        negative = c < 0 if _is_exact(c) else c < -tol
        if negative:
            first = n
            break
    return NonnegativityCertificate(first is None, len(coeffs) - 1, first, tol)


def is_complete_pick(k: KernelSeries, tol: float = 1e-12) -> NonnegativityCertificate:
    """Certificate that k is an (irreducible) complete Nevanlinna-Pick kernel.

    For unitarily invariant kernels this is equivalent to b_n >= 0 for all n,
    checked here up to the truncation. Exact comparison in rational mode,
    tolerance ``tol`` in float mode.
    """
    b = reciprocal_complement(k)
    return _sign_certificate(b.coefficients, 1, 0.0 if b.exact else tol)


def is_positive_quotient(k: KernelSeries, l: KernelSeries, tol: float = 1e-12) -> NonnegativityCertificate:
    """Certificate that k/l has non-negative coefficients up to truncation.

    For unitarily invariant series, non-negative coefficients make the
    quotient a positive kernel; this is the operational test for the
    coordinate multipliers of k forming a 1/l-contraction.
    """
    q = quotient(k, l)
    return _sign_certificate(q.coefficients, 0, 0.0 if q.exact else tol)


@dataclass(frozen=True)
class KernelFactorization:
    """A verified factorization kernel = pick_factor * positive_part.

    ``positive_part`` is the quotient g = k/s with g_0 = 1 and g_n >= 0; the
    Cauchy product of the factor and g reproduces k coefficientwise up to the
    shared truncation (exactly in rational mode).
    """

    kernel: KernelSeries
    pick_factor: KernelSeries
    positive_part: RealSeries
    tolerance: float = 0.0

    def __post_init__(self):
        g = self.positive_part
        if g.coefficients[0] != 1:
            raise FactorizationError("positive part must have leading coefficient 1")
        prod = cauchy_product(self.pick_factor, g)
        for n, (p, a) in enumerate(zip(prod.coefficients, self.kernel.coefficients)):
            err = p - a
            bad = err != 0 if _is_exact(err) else abs(err) > self.tolerance
            if bad:
                raise FactorizationError(
                    f"product deviates from kernel at degree {n}: {p} != {a}"
                )

    @property
    def truncation(self) -> int:
        return min(self.kernel.truncation, self.pick_factor.truncation)

    @property
    def dim(self) -> int:
        return self.kernel.dim


def factor_through_pick(k: KernelSeries, s: KernelSeries, tol: float = 1e-12) -> KernelFactorization:
    """Factor k = s * g for a complete Nevanlinna-Pick kernel s.

    Fails with FactorizationError when some quotient coefficient is negative
    (s is then not a CNP factor of k at this truncation), and with ValueError
    when s itself does not certify as CNP.
    """
    cert = is_complete_pick(s, tol)
    if not cert.holds:
        raise ValueError(
            f"factor is not a complete Nevanlinna-Pick kernel: "
            f"b_{cert.first_negative} < 0"
        )
    g = quotient(k, s)
    g_cert = _sign_certificate(g.coefficients, 0, 0.0 if g.exact else tol)
    if not g_cert.holds:
        raise FactorizationError(
            f"not a factorization: quotient coefficient at degree "
            f"{g_cert.first_negative} is negative"
        )
    # coefficient monotonicity forced by g >= 0, g_0 = 1; checked defensively
    n = min(k.truncation, s.truncation)
    for m in range(n + 1):
        if not (s.coefficients[m] <= k.coefficients[m] or _close(s.coefficients[m], k.coefficients[m], tol)):
            raise FactorizationError(f"factor coefficient exceeds kernel at degree {m}")
        if not (g.coefficients[m] <= k.coefficients[m] or _close(g.coefficients[m], k.coefficients[m], tol)):
            raise FactorizationError(f"quotient coefficient exceeds kernel at degree {m}")
    return KernelFactorization(k, s, g, 0.0 if (k.exact and s.exact) else tol)


def _close(x, y, tol: float) -> bool:
    return abs(float(x) - float(y)) <= tol


@dataclass(frozen=True)
class AdmissibilityReport:
    """Truncation-level evidence that a kernel is admissible.

    ``ratio_sup`` is max a_n / a_{n+1} over the stored range (boundedness of
    this ratio is equivalent to bounded coordinate multipliers).
    ``partial_sum_bound`` is the largest absolute diagonal value of
    I - (partial b-sums) on monomials, a uniform-boundedness certificate for
    the defining series of the contraction condition. Both are certificates
    up to the truncation only, never global claims.
    """

    ratio_sup: Scalar
    partial_sum_bound: Scalar
    checked_to: int
    verdict: str


def admissibility_report(k: KernelSeries) -> AdmissibilityReport:
    a = k.coefficients
    n_max = k.truncation
    ratio_sup = max((a[n] / a[n + 1] for n in range(n_max)), default=a[0] / a[0])
    b = reciprocal_complement(k).coefficients
    bound = 0 * a[0]
    for n in range(n_max + 1):
        partial = 0 * a[0]
        for d in range(0, n + 1):
            if d >= 1:
                partial += b[d] * a[n - d]
            value = 1 - partial / a[n]
            bound = max(bound, abs(value))
    return AdmissibilityReport(ratio_sup, bound, n_max, f"certified up to {n_max}")


# ---------------------------------------------------------------------------
# built-in kernels


def bergman_kernel(m: int, dim: int, truncation: int = DEFAULT_TRUNCATION) -> KernelSeries:
    """The m-th power of the Szego-type ball kernel: a_n = binom(n+m-1, n).

    m = 1 is the Drury-Arveson kernel. Exact integer coefficients; the lifted
    coefficient at alpha equals (m+|alpha|-1)! / (alpha! (m-1)!).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    coeffs = tuple(Fraction(math.comb(n + m - 1, n)) for n in range(truncation + 1))
    return KernelSeries(coeffs, dim, radius_one_declared=True)


def drury_arveson_kernel(dim: int, truncation: int = DEFAULT_TRUNCATION) -> KernelSeries:
    """1 / (1 - <z,w>): all coefficients 1."""
    return bergman_kernel(1, dim, truncation)


def szego_kernel(dim: int, truncation: int = DEFAULT_TRUNCATION) -> KernelSeries:
    """Alias for the a_n = 1 kernel (the Hardy-space kernel when dim = 1)."""
    return bergman_kernel(1, dim, truncation)


def dirichlet_kernel(dim: int, truncation: int = DEFAULT_TRUNCATION) -> KernelSeries:
    """a_n = 1/(n+1), the kernel -log(1 - <z,w>) / <z,w>."""
    coeffs = tuple(Fraction(1, n + 1) for n in range(truncation + 1))
    return KernelSeries(coeffs, dim, radius_one_declared=True)


def kernel_from_coefficients(a: Sequence[Scalar], dim: int, radius_one_declared: bool = False) -> KernelSeries:
    return KernelSeries(tuple(a), dim, radius_one_declared)


# ---------------------------------------------------------------------------
# kernel spec files (JSON-compatible dicts)


def _scalar_to_string(x) -> str:
    f = Fraction(x) if _is_exact(x) else None
    if f is not None:
        return f"{f.numerator}/{f.denominator}"
    return repr(float(x))


def _scalar_from_string(s: str):
    s = s.strip()
    if "/" in s:
        num, den = s.split("/")
        return Fraction(int(num), int(den))
    return float(s)


def kernel_from_spec(spec: dict) -> KernelSeries:
    """Build a kernel from a spec dict, e.g. parsed from a JSON file.

    Supported kinds: bergman (fields m, d, truncation), szego, dirichlet
    (fields d, truncation), coeffs (fields a: list of "p/q" strings, d).
    """
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError("kernel spec must be an object with a 'kind' field")
    kind = spec["kind"]
    trunc = int(spec.get("truncation", DEFAULT_TRUNCATION))
    try:
        if kind == "bergman":
            return bergman_kernel(int(spec["m"]), int(spec["d"]), trunc)
        if kind == "szego":
            return szego_kernel(int(spec["d"]), trunc)
        if kind == "dirichlet":
            return dirichlet_kernel(int(spec["d"]), trunc)
        if kind == "coeffs":
            a = [_scalar_from_string(s) if isinstance(s, str) else s for s in spec["a"]]
            return kernel_from_coefficients(a, int(spec["d"]), bool(spec.get("radius_one", False)))
    except KeyError as exc:
        raise ValueError(f"kernel spec missing field {exc}") from exc
    raise ValueError(f"unknown kernel kind {kind!r}")


def kernel_to_spec(k: KernelSeries) -> dict:
    return {
        "kind": "coeffs",
        "a": [_scalar_to_string(c) for c in k.coefficients],
        "d": k.dim,
        "radius_one": k.radius_one_declared,
    }
