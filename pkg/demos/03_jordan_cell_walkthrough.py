"""The whole construction, by hand, for the 2x2 nilpotent Jordan cell.

Over the Hardy-space kernel (all a_n = 1) the cell T e_0 = e_1, T e_1 = 0 is
a pure contraction whose characteristic function is the scalar z^2: the
defect spaces are one-dimensional and the classical one-variable formula
-T + z D_{T*} (I - z T*)^{-1} D_T collapses to z -> z^2. Every object the
package builds can be read off explicitly here, with exact rationals.
"""

from fractions import Fraction

import numpy as np

from cnpchar import (
    OperatorTuple,
    build_charfn,
    build_dilation,
    build_multiplier,
    defect_data,
    evaluate_charfn,
    factor_through_pick,
    factorization_residual,
    functional_model,
    k_inner_subspace,
    model_tuple,
    szego_kernel,
)

k = szego_kernel(dim=1, truncation=24)
t = model_tuple(k, dim=1, degree_cut=1, mode="exact")
# the Hardy weights are all 1, so the monomial basis is already orthonormal
t = OperatorTuple(t.mats, None, t.basis_labels, t.nilpotency_bound, t.kernel)
print("T =", [[str(x) for x in row] for row in t.mats[0].tolist()])

dd = defect_data(t, k)
print("defect^2 =", [[str(x) for x in row] for row in dd.defect_sq.tolist()])

# The dilation isometry sends e_0 -> 1 (x) delta and e_1 -> z (x) delta.
dil = build_dilation(t, k, dd, target_degree=5)
print("V columns:", dil.matrix[:3].tolist())

# k = s: the factorization is trivial and the outer space vanishes.
cfd = build_charfn(t, factor_through_pick(k, k))
print("\nTaylor support of theta:", sorted(cfd.taylor))
print("theta_2 =", cfd.taylor[(2,)].tolist())
print("theta(1/2) =", evaluate_charfn(cfd, [Fraction(1, 2)]).tolist())

# The induced multiplier is the double shift, and together with V it
# partitions the identity of the truncated target space exactly.
mult = build_multiplier(cfd, source_degree=3, target_degree=5)
print("\nmultiplier matrix (double shift):")
print(np.asarray(mult.matrix, dtype=float))
fr = factorization_residual(cfd, dil, mult)
print("V V* + M M* - I: restricted", fr.restricted, "unrestricted", fr.unrestricted,
      "(exact:", fr.restricted_exact, ")")

# z^2 is inner: the whole (one-dimensional) constant space is isometric and
# orthogonal to its own coordinate shifts.
ki = k_inner_subspace(cfd)
print("\nisometric constant subspace dimension:", ki.dim,
      "shift-orthogonality residual:", ki.shift_residual)

# Compressing the coordinate multiplier to Ran V recovers T.
model, report = functional_model(cfd, dil, mult)
print("functional model equals T up to", report.equality_residual)
print("recovered matrix:\n", np.asarray(model.mats[0]))
