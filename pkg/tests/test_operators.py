import math
from fractions import Fraction

import numpy as np
import pytest

from cnpchar._linalg import exact_zeros, max_abs
from cnpchar.operators import (
    ConvergenceError,
    NotContractionError,
    OperatorTuple,
    compress,
    defect_data,
    model_tuple,
    operator_series,
    purity_check,
    quadratic_form_certificate,
    random_coinvariant_compression,
)
from cnpchar.series import (
    bergman_kernel,
    cauchy_product,
    dirichlet_kernel,
    drury_arveson_kernel,
    factor_through_pick,
    reciprocal_complement,
    szego_kernel,
)


def jordan_cell():
    return model_tuple(szego_kernel(1, 24), 1, 1, mode="float")


def exact_identity_matrix(n):
    out = exact_zeros((n, n))
    for i in range(n):
        out[i, i] = Fraction(1)
    return out


class TestModelTuple:
    def test_szego_jordan_cell(self):
        t = jordan_cell()
        assert np.allclose(t.mats[0], [[0, 0], [1, 0]])
        te = model_tuple(szego_kernel(1, 24), 1, 1, mode="exact")
        assert te.mats[0][1, 0] == 1 and te.mats[0][0, 0] == 0
        assert list(te.weights) == [Fraction(1), Fraction(1)]

    def test_bergman_two_entry(self):
        t = model_tuple(bergman_kernel(2, 1, 10), 1, 1, mode="float")
        # ||z|| / ||1|| = sqrt(1/2) in the weighted space
        assert abs(t.mats[0][1, 0] - 1 / math.sqrt(2)) < 1e-15

    def test_two_variables_structure(self):
        t = model_tuple(drury_arveson_kernel(2, 10), 2, 1, mode="float")
        assert t.size == 3
        image_one = t.mats[0][:, 0]
        image_two = t.mats[1][:, 0]
        assert abs(np.vdot(image_one, image_two)) < 1e-15  # orthogonal ranges
        assert np.linalg.norm(image_one) > 0 and np.linalg.norm(image_two) > 0

    def test_requires_truncation(self):
        with pytest.raises(ValueError, match="truncation"):
            model_tuple(szego_kernel(1, 3), 1, 5)

    def test_commutation_enforced(self):
        a = np.array([[0.0, 1.0], [0.0, 0.0]])
        b = np.array([[1.0, 0.0], [0.0, 2.0]])
        with pytest.raises(ValueError, match="commute"):
            OperatorTuple((a, b))


class TestPowers:
    def test_zero_index_is_identity(self):
        t = jordan_cell()
        assert np.allclose(t.power((0,)), np.eye(2))

    def test_nilpotent_powers_vanish(self):
        t = model_tuple(bergman_kernel(2, 2, 10), 2, 2, mode="float")
        assert max_abs(t.power((3, 0))) == 0
        assert max_abs(t.power((2, 2))) == 0

    def test_power_respects_commutation(self):
        t = model_tuple(bergman_kernel(2, 2, 10), 2, 2, mode="float")
        direct = t.mats[0] @ t.mats[1]
        swapped = t.mats[1] @ t.mats[0]
        assert np.allclose(t.power((1, 1)), direct)
        assert np.allclose(direct, swapped)


class TestDefect:
    def test_jordan_defect(self):
        t = jordan_cell()
        dd = defect_data(t, szego_kernel(1, 24))
        assert np.allclose(dd.defect_sq, np.diag([1.0, 0.0]))
        assert np.allclose(dd.defect, np.diag([1.0, 0.0]))

    @pytest.mark.parametrize("m", [1, 2, 3])
    @pytest.mark.parametrize("d", [1, 2])
    @pytest.mark.parametrize("degree_cut", [1, 2, 3])
    def test_model_defect_is_constants_projection_exact(self, m, d, degree_cut):
        k = bergman_kernel(m, d, 12)
        t = model_tuple(k, d, degree_cut, mode="exact")
        dd = defect_data(t, k)
        expected = exact_zeros((t.size, t.size))
        expected[0, 0] = Fraction(1)
        assert all(x == y for x, y in zip(dd.defect_sq.flat, expected.flat))

    def test_pick_defect_for_bergman_two(self):
        # with the DA factor, b_s is supported in degree 1, so the pick defect
        # squared is I - sum_i T_i T_i^*
        k = bergman_kernel(2, 2, 12)
        t = model_tuple(k, 2, 2, mode="float")
        dd = defect_data(t, k, pick_factor=drury_arveson_kernel(2, 12))
        direct = np.eye(t.size) - sum(m @ m.conj().T for m in t.mats)
        assert max_abs(dd.pick_defect_sq - direct) < 1e-14
        assert np.linalg.eigvalsh(dd.pick_defect_sq).min() > -1e-12

    def test_non_contraction_rejected(self):
        t = OperatorTuple((np.array([[2.0]]),), None, None, None, None)
        with pytest.raises(NotContractionError):
            defect_data(t, szego_kernel(1, 24))


class TestPurity:
    def test_jordan_pure(self):
        t = jordan_cell()
        dd = defect_data(t, szego_kernel(1, 24))
        assert dd.purity_residual < 1e-15

    def test_models_pure_exactly(self):
        for m, d, n in [(1, 1, 3), (2, 1, 3), (3, 2, 2)]:
            k = bergman_kernel(m, d, 12)
            t = model_tuple(k, d, n, mode="exact")
            dd = defect_data(t, k)
            assert dd.purity_exact and dd.purity_residual == 0.0

    def test_isometry_not_pure(self):
        t = OperatorTuple((np.array([[1.0]]),), None, None, None, None)
        dd = defect_data(t, szego_kernel(1, 24))
        assert max_abs(dd.defect_sq) < 1e-15
        assert abs(dd.purity_residual - 1.0) < 1e-15

    def test_purity_check_for_pick_factor(self):
        """The model of k is a pure 1/s-contraction: the a^(s)-weighted sum of
        the squared pick defect reproduces the identity."""
        k = bergman_kernel(2, 1, 24)
        s = drury_arveson_kernel(1, 24)
        t = model_tuple(k, 1, 3, mode="float")
        dd = defect_data(t, k, pick_factor=s)
        report = purity_check(t, s, dd.pick_defect_sq)
        assert report.residual < 1e-13


class TestOperatorSeries:
    def test_at_origin(self):
        t = jordan_cell()
        out = operator_series(t, szego_kernel(1, 24), [0.0])
        assert np.allclose(out, np.eye(2))

    def test_jordan_linear(self):
        t = jordan_cell()
        w = 0.3 + 0.4j
        out = operator_series(t, szego_kernel(1, 24), [w])
        assert np.allclose(out, np.eye(2) + np.conjugate(w) * t.mats[0])

    @pytest.mark.parametrize("seed", [0, 1])
    def test_geometric_inverse_identity(self, seed):
        """(I - sum b_alpha conj(w^alpha) T^alpha) s_w(T) = I at random points."""
        k = bergman_kernel(2, 2, 24)
        s = drury_arveson_kernel(2, 24)
        t = model_tuple(k, 2, 2, mode="float")
        b = reciprocal_complement(s)
        rng = np.random.default_rng(seed)
        for _ in range(20):
            w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            w = w / np.linalg.norm(w) * 0.6 * rng.uniform(0.2, 1.0)
            lhs = np.eye(t.size) - operator_series(t, b, w)
            s_w = operator_series(t, s, w)
            assert max_abs(lhs @ s_w - np.eye(t.size)) < 1e-12

    def test_exact_rational_point(self):
        t = model_tuple(szego_kernel(1, 8), 1, 1, mode="exact")
        t = OperatorTuple(t.mats, None, t.basis_labels, t.nilpotency_bound, t.kernel)
        out = operator_series(t, szego_kernel(1, 8), [Fraction(1, 2)])
        assert out.dtype == object and out[1, 0] == Fraction(1, 2)


class TestCompress:
    def test_full_space(self):
        t = model_tuple(bergman_kernel(2, 1, 10), 1, 2, mode="float")
        tc = compress(t, np.eye(3))
        assert np.allclose(tc.mats[0], t.mats[0])
        assert tc.nilpotency_bound == t.nilpotency_bound

    def test_lower_degrees_recover_smaller_model(self):
        k = bergman_kernel(2, 1, 10)
        big = model_tuple(k, 1, 3, mode="float")
        small = model_tuple(k, 1, 2, mode="float")
        basis = np.eye(4)[:, :3]
        tc = compress(big, basis)
        assert max_abs(tc.mats[0] - small.mats[0]) < 1e-15

    def test_constants_give_zero_tuple(self):
        t = model_tuple(bergman_kernel(2, 2, 10), 2, 2, mode="float")
        basis = np.zeros((t.size, 1))
        basis[0, 0] = 1.0
        tc = compress(t, basis)
        assert max_abs(tc.mats[0]) == 0 and max_abs(tc.mats[1]) == 0

    def test_rejects_non_orthonormal(self):
        t = jordan_cell()
        with pytest.raises(ValueError, match="orthonormal"):
            compress(t, np.array([[1.0], [1.0]]))

    def test_warns_on_non_coinvariant(self):
        t = model_tuple(szego_kernel(1, 10), 1, 2, mode="float")
        basis = np.zeros((3, 1))
        basis[2, 0] = 1.0  # top-degree line is invariant but not co-invariant
        with pytest.warns(UserWarning, match="co-invariant"):
            compress(t, basis)

    def test_random_coinvariant_compressions_stay_pure(self):
        """Compressions to co-invariant subspaces of pure tuples are pure,
        both for the kernel and for its CNP factor."""
        k = bergman_kernel(2, 2, 24)
        s = drury_arveson_kernel(2, 24)
        for seed in range(4):
            tc = random_coinvariant_compression(
                model_tuple(k, 2, 2, mode="float"), np.random.default_rng(seed)
            )
            dd = defect_data(tc, k, pick_factor=s)
            assert dd.purity_residual < 1e-12
            assert np.linalg.eigvalsh(dd.pick_defect_sq.astype(float)).min() > -1e-12
            assert purity_check(tc, s, dd.pick_defect_sq).residual < 1e-12


class TestQuadraticForm:
    def test_closed_form_violation(self):
        value = quadratic_form_certificate(
            bergman_kernel(2, 1, 32), bergman_kernel(2, 1, 32), 0, [(2,)]
        )[0]
        assert value == Fraction(-1, 3)

    def test_drury_arveson_form_stays_nonnegative(self):
        da = drury_arveson_kernel(1, 40)
        for m in (2, 3, 4):
            k = bergman_kernel(m, 1, 40)
            for base in range(6):
                value = quadratic_form_certificate(k, da, base, [((base + 2),)])[0]
                expected = 1 - Fraction(base + 2, base + m + 1)
                assert value == expected
                assert value >= 0

    def test_vector_below_cut_gives_one(self):
        value = quadratic_form_certificate(
            bergman_kernel(2, 1, 32), bergman_kernel(2, 1, 32), 5, [(2,)], window_degree=7
        )[0]
        assert value == 1

    def test_vector_outside_window(self):
        with pytest.raises(ValueError, match="window"):
            quadratic_form_certificate(
                bergman_kernel(2, 1, 32), bergman_kernel(2, 1, 32), 0, [(9,)], window_degree=4
            )

    def test_float_mode_agrees(self):
        exact = quadratic_form_certificate(
            bergman_kernel(3, 1, 32), bergman_kernel(2, 1, 32), 1, [(3,)]
        )[0]
        approx = quadratic_form_certificate(
            bergman_kernel(3, 1, 32), bergman_kernel(2, 1, 32), 1, [(3,)], mode="float"
        )[0]
        assert abs(float(exact) - approx) < 1e-12


class TestSerialization:
    def test_float_round_trip(self):
        from cnpchar.operators import tuple_from_spec, tuple_to_spec

        t = model_tuple(bergman_kernel(2, 2, 10), 2, 2, mode="float")
        back = tuple_from_spec(tuple_to_spec(t))
        assert all(max_abs(a - b) == 0 for a, b in zip(t.mats, back.mats))
        assert back.basis_labels == t.basis_labels
        assert back.nilpotency_bound == t.nilpotency_bound
        assert back.kernel.coefficients == t.kernel.coefficients

    def test_exact_round_trip(self):
        from cnpchar.operators import tuple_from_spec, tuple_to_spec

        t = model_tuple(bergman_kernel(2, 1, 10), 1, 2, mode="exact")
        spec = tuple_to_spec(t)
        assert spec["mode"] == "exact"
        assert spec["weights"][1] == "1/2"
        back = tuple_from_spec(spec)
        assert all(x == y for a, b in zip(t.mats, back.mats) for x, y in zip(a.flat, b.flat))
        assert list(back.weights) == list(t.weights)

    def test_json_compatible(self):
        import json

        from cnpchar.operators import tuple_from_spec, tuple_to_spec

        t = model_tuple(dirichlet_kernel(1, 8), 1, 1, mode="exact")
        wire = json.dumps(tuple_to_spec(t))
        back = tuple_from_spec(json.loads(wire))
        assert back.weights[1] == Fraction(2)

    def test_malformed_rejected(self):
        from cnpchar.operators import tuple_from_spec

        with pytest.raises(ValueError):
            tuple_from_spec({"matrices": [[[0.0]]]})
        with pytest.raises(ValueError):
            tuple_from_spec({"mode": "nope", "matrices": [[[0.0]]]})


class TestPickFactorPurityExact:
    def test_s_weighted_conjugation_is_identity_exactly(self):
        """The model of k is a pure 1/s-contraction in exact arithmetic: the
        s-weighted conjugation of the squared pick defect is the identity."""
        from cnpchar.operators import conjugated_sum

        k = bergman_kernel(2, 1, 16)
        s = drury_arveson_kernel(1, 16)
        for degree_cut in (1, 2, 3):
            t = model_tuple(k, 1, degree_cut, mode="exact")
            dd = defect_data(t, k, pick_factor=s)
            total, _, _, exact_stop = conjugated_sum(
                t, s, middle=dd.pick_defect_sq, include_zero=True
            )
            assert exact_stop
            gap = total - t.identity()
            assert all(x == 0 for x in gap.flat)


class TestConvergenceHandling:
    def test_no_convergence_error(self):
        # a non-nilpotent contraction against a kernel with slowly decaying b
        t = OperatorTuple((np.array([[0.999]]),), None, None, None, None)
        dirichlet = dirichlet_kernel(1, 40)
        with pytest.raises(ConvergenceError):
            defect_data(t, dirichlet, degree_cap=10, stop_tol=1e-13)

    def test_scalar_contraction_converges(self):
        t = OperatorTuple((np.array([[0.5]]),), None, None, None, None)
        dd = defect_data(t, szego_kernel(1, 40), degree_cap=60)
        assert abs(dd.defect_sq[0, 0] - 0.75) < 1e-14
