"""Which kernels can carry the domain side of a characteristic function?

A pure 1/k-contraction T admits a characteristic function through a kernel l
exactly when the tuple induced on Ker V^* (coordinate multipliers restricted
to the orthogonal complement of the dilation's range) is a 1/l-contraction.
For the power kernels k_m = (1 - <z,w>)^{-m} this forces l = k_1: for any
n >= 2 the quadratic form

    1 - n (N + 2) / (N + m + 1)

goes negative at some window base degree N, and the matrix evaluation of the
form on the co-invariant window reproduces that closed form exactly.
"""

from fractions import Fraction

from cnpchar import (
    associated_tuple_test,
    bergman_kernel,
    model_tuple,
    quadratic_form_certificate,
)

# the associated tuple of the degree-0 model of k_2, probed through k_2
# itself: a negative eigenvalue certifies that no characteristic function
# through k_2 exists.
k2 = bergman_kernel(2, dim=1, truncation=32)
t0 = model_tuple(k2, dim=1, degree_cut=0, mode="float")
cert = associated_tuple_test(t0, k2, k2, window_degree=3)
print("k2 through k2: min eigenvalue on Ker V^* window =", cert.min_eigenvalue)

# through the Drury-Arveson kernel the same form stays non-negative.
da = bergman_kernel(1, dim=1, truncation=32)
cert_da = associated_tuple_test(t0, k2, da, window_degree=3)
print("k2 through da: min eigenvalue =", cert_da.min_eigenvalue, "->", cert_da.holds)

# the sweep: closed form against the matrix quadratic form, exactly.
print("\n m  n   first violating N   (form value there)")
for m in range(2, 5):
    kernel = bergman_kernel(m, dim=1, truncation=40)
    for n in range(1, 4):
        form = bergman_kernel(n, dim=1, truncation=40)
        first = None
        witness = None
        for base in range(0, 30):
            value = quadratic_form_certificate(
                kernel, form, base, [((base + 2),)], window_degree=base + 2
            )[0]
            assert value == Fraction(1) - Fraction(n * (base + 2), base + m + 1)
            if value < 0:
                first, witness = base, value
                break
        column = "none up to 29" if first is None else f"{first:>2}   ({witness})"
        print(f"{m:>2} {n:>2}   {column}")
print("\nonly n = 1 survives every window: the Drury-Arveson kernel is forced.")
