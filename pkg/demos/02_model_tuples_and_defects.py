"""Graded multiplication models and their defect operators.

The compression T of the coordinate multipliers to polynomials of degree at
most N is the workhorse finite-dimensional example of a pure
1/k-contraction. Two of its identities hold with exact rational arithmetic:

  * I - sum b_alpha T^alpha (T^alpha)^*  is the projection onto constants,
  * sum a_alpha T^alpha Defect^2 (T^alpha)^*  is the identity (purity).

Co-invariant compressions inherit both, which this script samples randomly.
"""

import numpy as np

from cnpchar import (
    bergman_kernel,
    defect_data,
    drury_arveson_kernel,
    model_tuple,
    operator_series,
    purity_check,
    random_coinvariant_compression,
    reciprocal_complement,
)

k = bergman_kernel(2, dim=2, truncation=24)

# Exact mode: matrices live on the monomial basis with rational weights.
t = model_tuple(k, dim=2, degree_cut=3, mode="exact")
dd = defect_data(t, k)
print("squared defect (diagonal):", [dd.defect_sq[i, i] for i in range(4)], "...")
print("purity residual:", dd.purity_residual, "(exact:", dd.purity_exact, ")")

# Float mode: orthonormalized monomials, entries are norm ratios.
tf = model_tuple(k, dim=2, degree_cut=3, mode="float")
ddf = defect_data(tf, k)
print("\nfloat defect residual vs constants projection:",
      float(np.abs(ddf.defect_sq - np.diag([1.0] + [0.0] * (tf.size - 1))).max()))

# The same tuple is also a pure contraction relative to the CNP factor of k:
s = drury_arveson_kernel(2, 24)
dds = defect_data(tf, k, pick_factor=s)
print("pick-defect purity residual:", purity_check(tf, s, dds.pick_defect_sq).residual)

# Operator series evaluate k_w(T) = sum a_alpha conj(w^alpha) T^alpha; the
# geometric-type inverse identity ties the factor's b-series to its a-series.
rng = np.random.default_rng(1)
w = rng.standard_normal(2) * 0.3
b_s = reciprocal_complement(s)
lhs = np.eye(tf.size) - operator_series(tf, b_s, w)
print("\ninverse identity residual:",
      float(np.abs(lhs @ operator_series(tf, s, w) - np.eye(tf.size)).max()))

# Random co-invariant compressions stay pure.
for seed in range(3):
    tc = random_coinvariant_compression(tf, np.random.default_rng(seed))
    ddc = defect_data(tc, k)
    print(f"compression (seed {seed}): dim {tc.size}, purity residual {ddc.purity_residual:.2e}")
