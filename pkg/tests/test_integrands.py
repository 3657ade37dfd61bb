import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cvmc.integrands import (CaptureData, SonarData, SonarFormatError, capture_likelihood,
                             capture_loglik, capture_model, capture_nu, dipper_data, f_j, g_j,
                             load_sonar, make_integrand, phi, sonar_loglik, sonar_model)

from oracles import capture_loglik_direct, capture_nu_direct

unit = st.floats(0.01, 0.99)


class TestSynthetic:
    def test_phi_examples(self):
        assert phi(1)(0.5) == pytest.approx(1.0)
        assert phi(2)([1.0, 1.0]) == pytest.approx(1.0)

    def test_f_examples(self):
        assert f_j(3, 1)([1.0, 0.3, 0.2]) == pytest.approx(0.7978845608, rel=1e-10)
        assert f_j(3, 2)([1.0, 1.0, 0.5]) == pytest.approx(2 / math.pi)

    def test_f_singular_at_zero(self):
        with pytest.raises(ValueError):
            f_j(2, 1)([0.0, 0.5])
        # coordinates beyond j may be zero
        assert f_j(2, 1)([0.5, 0.0]) > 0

    def test_g_examples(self):
        assert g_j(1, 1)(1.0) == pytest.approx(0.6931471806, rel=1e-10)
        assert g_j(1, 1)(0.0) == pytest.approx(1.3862943611, rel=1e-10)

    @pytest.mark.parametrize("name, d, j", [("phi", 3, None), ("f", 5, 1), ("g", 5, 3), ("f3", 8, None)])
    def test_monte_carlo_mean(self, name, d, j):
        f = make_integrand(name, d, j)
        vals = f(np.random.default_rng(7).random((10**6, d)))
        assert abs(vals.mean() - 1.0) <= 4 * vals.std(ddof=1) / 1e3

    @pytest.mark.parametrize("d", [1, 3])
    def test_phi_variance(self, d):
        # Var = 1/2 - E cos(2 pi s)/2 with E e^{i a x} = (e^{ia} - 1)/(ia), a = 4 pi / d
        a = 4 * math.pi / d
        exact = 0.5 - 0.5 * (2 * math.sin(a / 2) / a) ** d
        vals = phi(d)(np.random.default_rng(1).random((10**6, d)))
        assert vals.var() == pytest.approx(exact, rel=0.01)

    @given(arrays(float, 4, elements=unit))
    def test_factorization(self, x):
        g_full = g_j(4, 3)(x)
        g_prod = np.prod([g_j(1, 1)(x[i]) for i in range(3)])
        assert g_full == pytest.approx(g_prod, rel=1e-12)
        f_full = f_j(4, 3)(x)
        f_prod = np.prod([f_j(1, 1)(x[i]) for i in range(3)])
        assert f_full == pytest.approx(f_prod, rel=1e-12)

    def test_unknown_names(self):
        with pytest.raises(ValueError):
            make_integrand("h", 2)
        with pytest.raises(ValueError):
            make_integrand("g", 2)
        with pytest.raises(ValueError):
            g_j(2, 3)


class TestCapture:
    def test_never_recaptured(self):
        np.testing.assert_array_equal(dipper_data().never_recaptured, [9, 35, 42, 32, 37, 46])

    def test_nu_example(self):
        nu = capture_nu(dipper_data(), np.full(12, 0.5))
        assert nu[0, 2] == pytest.approx(0.0625)

    @given(arrays(float, 12, elements=unit))
    def test_nu_against_direct_product(self, theta):
        nu = capture_nu(dipper_data(), theta)
        for i in range(1, 7):
            for j in range(i + 1, 8):
                assert nu[i - 1, j - 1] == pytest.approx(capture_nu_direct(theta, i, j), rel=1e-12)
        assert np.all(np.tril(nu) == 0)

    @given(arrays(float, 12, elements=unit))
    def test_loglik_against_direct_sum(self, theta):
        data = dipper_data()
        expected = capture_loglik_direct(data.R.tolist(), data.x.tolist(), theta)
        assert capture_loglik(data, theta) == pytest.approx(expected, rel=1e-12)

    def test_degenerate_corner(self):
        data = dipper_data()
        nu = capture_nu(data, np.ones(12))
        assert np.all(np.diag(nu, 1) == 1.0)
        assert capture_likelihood(data, np.ones(12)) == 0.0
        assert capture_loglik(data, np.ones(12)) == -np.inf

    @given(arrays(float, 12, elements=unit), st.integers(0, 5), st.floats(0.0, 0.5))
    def test_recapture_terms_monotone_in_last_p(self, theta, _i, bump):
        # p_7 only enters nu_{i,7} as a factor, so the counted product grows with it
        data = dipper_data()
        hi = theta.copy()
        hi[11] = min(0.99, theta[11] + bump)

        def counted(t):
            nu = capture_nu(data, t)
            mask = data.x > 0
            return np.sum(data.x[mask] * np.log(nu[mask]))

        assert counted(hi) >= counted(theta) - 1e-12

    def test_batch_matches_single(self, rng):
        data = dipper_data()
        T = rng.random((5, 12))
        batch = capture_loglik(data, T)
        assert np.allclose(batch, [capture_loglik(data, t) for t in T])

    def test_validation(self):
        with pytest.raises(ValueError):
            CaptureData([1, 1], [[0, 2, 0], [0, 0, 0]])
        with pytest.raises(ValueError):
            CaptureData([5, 5], [[1, 0, 0], [0, 0, 0]])
        with pytest.raises(ValueError):
            capture_loglik(dipper_data(), np.full(12, 1.2))

    def test_json_round_trip(self):
        data = dipper_data()
        back = CaptureData.from_json(data.to_json())
        np.testing.assert_array_equal(back.R, data.R)
        np.testing.assert_array_equal(back.x, data.x)

    def test_evidence_integrand_shift(self, rng):
        model = capture_model()
        u = rng.random((3, 12))
        shift = model.pilot_shift(200, seed=1)
        np.testing.assert_allclose(np.log(model.integrand(shift)(u)), model.loglik_unit(u) - shift)


def _write_sonar(path, rows):
    with open(path, "w") as fh:
        for feats, lab in rows:
            fh.write(",".join(f"{v:.4f}" for v in feats) + f",{lab}\n")


class TestSonar:
    def test_zero_theta(self, rng):
        data = SonarData(np.hstack([np.ones((208, 1)), rng.random((208, 60))]),
                         np.where(rng.random(208) < 0.5, 1.0, -1.0))
        assert sonar_loglik(data, np.zeros(61)) == pytest.approx(-208 * math.log(2), abs=1e-10)

    def test_scalar_logistic(self):
        data = SonarData(np.array([[1.0]]), np.array([1.0]))
        assert sonar_loglik(data, np.array([1.0])) == pytest.approx(-0.313262, abs=1e-6)

    @given(arrays(float, 4, elements=st.floats(-1, 1)))
    def test_label_flip_symmetry(self, theta):
        X = np.array([[1.0, 0.2, 0.5, 0.1], [1.0, 0.9, 0.3, 0.7], [1.0, 0.4, 0.4, 0.0]])
        y = np.array([1.0, -1.0, 1.0])
        a = sonar_loglik(SonarData(X, y), theta)
        b = sonar_loglik(SonarData(X, -y), -theta)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)

    def test_extreme_margins_are_finite(self):
        data = SonarData(np.array([[1.0]]), np.array([-1.0]))
        assert sonar_loglik(data, np.array([800.0])) == pytest.approx(-800.0)

    def test_load_labels_and_intercept(self, tmp_path, rng):
        path = tmp_path / "two.csv"
        _write_sonar(path, [(rng.random(60), "M"), (rng.random(60), "R")])
        data = load_sonar(path, expected_rows=2)
        np.testing.assert_array_equal(data.y, [1.0, -1.0])
        assert data.X.shape == (2, 61)
        assert np.all(data.X[:, 0] == 1.0)

    def test_row_count_checked(self, tmp_path, rng):
        path = tmp_path / "short.csv"
        _write_sonar(path, [(rng.random(60), "M")] * 3)
        with pytest.raises(SonarFormatError, match="found 3"):
            load_sonar(path)

    def test_bad_line_reported_with_number(self, tmp_path, rng):
        path = tmp_path / "bad.csv"
        _write_sonar(path, [(rng.random(60), "M"), (rng.random(59), "R")])
        with pytest.raises(SonarFormatError, match=r"bad\.csv:2"):
            load_sonar(path, expected_rows=2)
        _write_sonar(path, [(rng.random(60), "X")])
        with pytest.raises(SonarFormatError, match="label"):
            load_sonar(path, expected_rows=1)

    def test_data_is_read_only(self, tmp_path, rng):
        path = tmp_path / "ro.csv"
        _write_sonar(path, [(rng.random(60), "M")])
        data = load_sonar(path, expected_rows=1)
        with pytest.raises(ValueError):
            data.X[0, 0] = 3.0

    def test_model_maps_unit_cube(self, tmp_path, rng):
        path = tmp_path / "m.csv"
        _write_sonar(path, [(rng.random(60), "M"), (rng.random(60), "R")])
        data = load_sonar(path, expected_rows=2)
        model = sonar_model(data)
        u = rng.random(61)
        assert model.loglik_unit(u[None, :])[0] == pytest.approx(sonar_loglik(data, 2 * u - 1))
