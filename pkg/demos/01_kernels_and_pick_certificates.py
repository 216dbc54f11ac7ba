"""Coefficient calculus for unitarily invariant kernels.

A kernel k(z, w) = sum a_n <z, w>^n on the unit ball is determined by its
coefficient sequence, and so is the derived sequence b_n with

    sum_{n>=1} b_n t^n = 1 - 1/(sum_n a_n t^n).

Whether all b_n are non-negative decides the complete Nevanlinna-Pick
property, which in turn decides whether the kernel can serve as the domain
side of a characteristic function. This script walks through the standard
examples with exact rational arithmetic.
"""

from cnpchar import (
    admissibility_report,
    bergman_kernel,
    cauchy_product,
    dirichlet_kernel,
    drury_arveson_kernel,
    factor_through_pick,
    is_complete_pick,
    is_positive_quotient,
    quotient,
    reciprocal_complement,
)

# The Drury-Arveson kernel 1/(1 - <z,w>): every a_n = 1, and b = (1, 0, 0, ...).
da = drury_arveson_kernel(dim=1, truncation=12)
print("Drury-Arveson b-sequence:", reciprocal_complement(da).coefficients[:6])
print("CNP certificate:", is_complete_pick(da))

# Its square 1/(1 - <z,w>)^2 has a_n = n + 1 and a sign change in b:
# b_1 = 2, b_2 = -1. One negative coefficient is enough to lose the
# Pick property.
k2 = bergman_kernel(2, dim=1, truncation=12)
print("\nsquared kernel b-sequence:", reciprocal_complement(k2).coefficients[:6])
print("CNP certificate:", is_complete_pick(k2))

# The Dirichlet kernel a_n = 1/(n+1) stays CNP: its b-sequence is positive
# (b_1 = 1/2, b_2 = 1/12, ...), here verified exactly up to degree 50.
dirichlet = dirichlet_kernel(dim=1, truncation=50)
print("\nDirichlet b-sequence:", reciprocal_complement(dirichlet).coefficients[:4])
print("CNP certificate:", is_complete_pick(dirichlet))

# Quotients detect domination: k2 / da has coefficients identically 1, so
# the coordinate multipliers of k2 form a contraction in the da-sense, while
# da / k2 dips negative immediately.
print("\nk2 / da coefficients:", quotient(k2, da).coefficients[:5])
print("k2 / da positive?", is_positive_quotient(k2, da).holds)
print("da / k2 coefficients:", quotient(da, k2).coefficients[:5])
print("da / k2 positive?", is_positive_quotient(da, k2).holds)

# A kernel with a CNP factor splits as k = s * g with g non-negative.
# k2 = da * da works; the Dirichlet kernel also divides its own square.
fac = factor_through_pick(k2, da)
print("\nk2 = da * g with g =", fac.positive_part.coefficients[:5])

k = cauchy_product(da, dirichlet_kernel(dim=1, truncation=12))
fac_a = factor_through_pick(k, da)
fac_b = factor_through_pick(k, dirichlet_kernel(dim=1, truncation=12))
print("da*dirichlet through da:        g =", fac_a.positive_part.coefficients[:4])
print("da*dirichlet through dirichlet: g =", fac_b.positive_part.coefficients[:4])

# Admissibility evidence: bounded coefficient ratios (bounded coordinate
# multipliers) plus a uniform bound on the partial defect sums.
for name, kern in [("da", da), ("k2", k2), ("dirichlet", dirichlet)]:
    report = admissibility_report(kern)
    print(f"\n{name}: ratio_sup = {report.ratio_sup}, "
          f"partial sum bound = {report.partial_sum_bound} ({report.verdict})")
