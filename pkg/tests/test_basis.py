import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cvmc.basis import (BasisSpec, Family, MultiIndex, b_witness, build_design, count_indices,
                        diagnostics, enumerate_index_array, enumerate_indices, eval_control,
                        fourier_eval, legendre_eval, leverage)

from oracles import brute_force_indices, legendre_closed


class TestLegendre:
    @pytest.mark.parametrize("j, x, expected", [(0, 0.7, 1.0), (1, 1.0, 1.0), (2, 0.75, -0.125)])
    def test_examples(self, j, x, expected):
        assert legendre_eval(j, x) == pytest.approx(expected, abs=1e-15)

    @given(st.integers(0, 20), st.floats(0.0, 1.0))
    def test_matches_series_evaluation(self, j, x):
        assert legendre_eval(j, x) == pytest.approx(float(legendre_closed(j, x)), abs=1e-12)

    @given(st.integers(0, 20), st.floats(0.0, 1.0))
    def test_bounded_by_one(self, j, x):
        assert abs(legendre_eval(j, x)) <= 1.0 + 1e-12

    def test_value_one_at_right_end(self):
        assert all(legendre_eval(j, 1.0) == pytest.approx(1.0) for j in range(21))

    @pytest.mark.parametrize("x", [-0.1, 1.5])
    def test_rejects_out_of_range(self, x):
        with pytest.raises(ValueError):
            legendre_eval(2, x)


class TestFourier:
    def test_examples(self):
        assert fourier_eval(1, 0.5) == pytest.approx(-math.sqrt(2))
        assert fourier_eval(2, 0.25) == pytest.approx(math.sqrt(2))
        assert fourier_eval(2, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_index_from_one(self):
        with pytest.raises(ValueError):
            fourier_eval(0, 0.3)

    def test_multi_dimensional_fourier_refused(self):
        with pytest.raises(ValueError):
            BasisSpec("fourier", 2, 4, 4)


class TestEnumeration:
    def test_examples(self):
        assert len(enumerate_indices(3, 12, 3)) == 19
        assert [i.degrees for i in enumerate_indices(1, 5, 1)] == [(1,)]

    def test_large_count(self):
        assert count_indices(8, 3, 10) == 20993
        assert enumerate_index_array(8, 3, 10).shape == (20993, 8)

    @pytest.mark.parametrize("d", [1, 2, 3, 4])
    @pytest.mark.parametrize("k", [1, 2, 4])
    def test_brute_force_agreement(self, d, k):
        for deg in range(1, 9):
            expected = brute_force_indices(d, k, deg)
            got = [tuple(r) for r in enumerate_index_array(d, k, deg)]
            assert got == expected
            assert count_indices(d, k, deg) == len(expected)

    @given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 8), st.integers(1, 3))
    def test_order_restricted_brute_force(self, d, k, deg, order):
        expected = brute_force_indices(d, k, deg, order)
        assert [tuple(r) for r in enumerate_index_array(d, k, deg, order)] == expected
        assert count_indices(d, k, deg, order) == len(expected)

    def test_sorted_by_total_degree(self):
        spec = BasisSpec("legendre", 4, 5, 12)
        assert np.all(np.diff(spec.total_degrees) >= 0)

    def test_cap(self):
        with pytest.raises(ValueError, match="exceed"):
            enumerate_index_array(8, 3, 12, max_count=1000)

    def test_multiindex_invariants(self):
        idx = MultiIndex((2, 0, 3))
        assert idx.total_degree == 5
        with pytest.raises(ValueError):
            MultiIndex((0, 0))

    def test_prefix_size(self):
        spec = BasisSpec("legendre", 3, 12, 12)
        assert [spec.prefix_size(g) for g in (1, 3, 5, 10, 12)] == [3, 19, 55, 285, 454]


class TestEvaluation:
    def test_examples(self):
        spec2 = BasisSpec("legendre", 2, 3, 3)
        assert eval_control(spec2, (1, 0), (0.5, 0.9)) == pytest.approx(0.0, abs=1e-15)
        assert eval_control(spec2, (1, 1), (1.0, 1.0)) == pytest.approx(1.0)
        spec3 = BasisSpec("legendre", 3, 3, 3)
        assert eval_control(spec3, (2, 0, 0), (0.75, 0.1, 0.2)) == pytest.approx(-0.125)

    def test_design_examples(self):
        assert build_design(BasisSpec("legendre", 1, 1, 1), [[0.5]]).tolist() == [[0.0]]
        H = build_design(BasisSpec("legendre", 1, 2, 2), [[0.0], [1.0]])
        np.testing.assert_allclose(H, [[-1.0, 1.0], [1.0, 1.0]])

    def test_design_matches_pointwise(self, rng):
        spec = BasisSpec("legendre", 3, 4, 6)
        X = rng.random((7, 3))
        H = build_design(spec, X)
        for i in range(7):
            for j, idx in enumerate(spec.indices):
                assert H[i, j] == pytest.approx(eval_control(spec, idx, X[i]), abs=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            build_design(BasisSpec("legendre", 2, 2, 2), np.zeros((3, 3)))

    def test_zero_mean_and_orthogonality(self, rng):
        spec = BasisSpec("legendre", 2, 3, 4)
        n = 10**5
        H = build_design(spec, rng.random((n, 2)))
        assert np.all(np.abs(H.mean(axis=0)) < 0.02)
        G = H.T @ H / n
        gram = diagnostics(spec).gram_diagonal
        off = G - np.diag(np.diag(G))
        assert np.max(np.abs(off)) < 5 / math.sqrt(n)
        assert np.max(np.abs(np.diag(G) - gram)) < 5 / math.sqrt(n)

    def test_fourier_orthonormal(self, rng):
        spec = BasisSpec("fourier", 1, 6, 6)
        n = 10**5
        H = build_design(spec, rng.random((n, 1)))
        assert np.max(np.abs(H.T @ H / n - np.eye(6))) < 5 / math.sqrt(n) * 2


class TestDiagnostics:
    def test_legendre_example(self):
        diag = diagnostics(BasisSpec("legendre", 1, 2, 2))
        np.testing.assert_allclose(diag.gram_diagonal, [1 / 3, 1 / 5])
        assert diag.gamma == pytest.approx(1 / 5)
        assert diag.u_h == 1.0

    def test_fourier_example(self):
        diag = diagnostics(BasisSpec("fourier", 1, 4, 4))
        np.testing.assert_allclose(diag.gram_diagonal, np.ones(4))
        assert diag.gamma == 1.0
        assert diag.u_h == pytest.approx(math.sqrt(2))
        assert diag.b_bound == pytest.approx(8.0)

    def test_tensor_gram_entry_by_quadrature(self):
        spec = BasisSpec("legendre", 2, 1, 2)
        j = [tuple(i.degrees) for i in spec.indices].index((1, 1))
        nodes, weights = np.polynomial.legendre.leggauss(10)
        x = (nodes + 1) / 2
        one_d = float(np.sum(weights / 2 * legendre_closed(1, x) ** 2))
        assert diagnostics(spec).gram_diagonal[j] == pytest.approx(one_d**2)
        assert one_d**2 == pytest.approx(1 / 9)

    def test_b_bound_at_least_m_and_attained_at_corner(self):
        spec = BasisSpec("legendre", 3, 3, 5)
        diag = diagnostics(spec)
        assert diag.b_bound >= spec.m
        assert leverage(spec, np.ones((1, 3)))[0] == pytest.approx(diag.b_bound)
        assert b_witness(spec, n_points=2000) <= diag.b_bound + 1e-9

    def test_one_dimensional_b_is_odd_sum(self):
        # sup of h^T G^{-1} h for L_1..L_m on [0,1] is sum (2j+1) = m(m+2)
        for m in (1, 5, 30):
            assert diagnostics(BasisSpec("legendre", 1, m, m)).b_bound == pytest.approx(m * (m + 2))


class TestSerialization:
    def test_round_trip(self):
        spec = BasisSpec("legendre", 12, 10, 6, order=2)
        back = BasisSpec.from_json(spec.to_json())
        assert back.family is Family.LEGENDRE
        assert (back.d, back.k, back.deg, back.order, back.m) == (12, 10, 6, 2, spec.m)
        np.testing.assert_array_equal(back.index_array, spec.index_array)
