"""Multi-index combinatorics over Z^d_+.

Multi-indices are plain tuples of non-negative integers. Everything in the
package enumerates them in graded order: by total degree first and, within a
degree, with the leading exponents largest first, so (1,0) precedes (0,1).
This makes every degree-raising operator matrix block-lower-triangular.
"""

from __future__ import annotations

import math
from typing import Iterator, Optional

MultiIndex = tuple[int, ...]


def degree(alpha: MultiIndex) -> int:
    return sum(alpha)


def compositions(total: int, parts: int) -> Iterator[MultiIndex]:
    """All multi-indices of the given total degree, leading entry largest first."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for rest in compositions(total - head, parts - 1):
            yield (head,) + rest


def enumerate_up_to_degree(dim: int, max_degree: int) -> list[MultiIndex]:
    """All alpha in Z^dim_+ with |alpha| <= max_degree, in graded order."""
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    out: list[MultiIndex] = []
    for n in range(max_degree + 1):
        out.extend(compositions(n, dim))
    return out


def count_up_to_degree(dim: int, max_degree: int) -> int:
    return math.comb(max_degree + dim, dim)


def multinomial(alpha: MultiIndex) -> int:
    """|alpha|! / (alpha_1! ... alpha_d!), exactly.

    Computed as a product of binomials of partial sums so intermediate values
    stay integral.
    """
    out = 1
    partial = 0
    for a in alpha:
        if a < 0:
            raise ValueError(f"negative entry in multi-index {alpha}")
        partial += a
        out *= math.comb(partial, a)
    return out


def subtract(alpha: MultiIndex, gamma: MultiIndex) -> Optional[MultiIndex]:
    """Componentwise alpha - gamma, or None when the result leaves Z^d_+.

    None encodes the convention that coefficient sequences vanish off the
    positive cone; callers treat it as coefficient zero.
    """
    if len(alpha) != len(gamma):
        raise ValueError(f"dimension mismatch: {len(alpha)} vs {len(gamma)}")
    diff = tuple(a - g for a, g in zip(alpha, gamma))
    if any(x < 0 for x in diff):
        return None
    return diff


def add(alpha: MultiIndex, beta: MultiIndex) -> MultiIndex:
    if len(alpha) != len(beta):
        raise ValueError(f"dimension mismatch: {len(alpha)} vs {len(beta)}")
    return tuple(a + b for a, b in zip(alpha, beta))


def unit(dim: int, i: int) -> MultiIndex:
    """The i-th coordinate multi-index e_i."""
    return tuple(1 if j == i else 0 for j in range(dim))


def monomial_value(point, alpha: MultiIndex):
    """point**alpha = prod point_i^alpha_i for a d-tuple of scalars."""
    out = 1
    for p, a in zip(point, alpha):
        out = out * p**a
    return out
