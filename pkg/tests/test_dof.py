import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncldof.dof import (
    default_grid,
    df_analytic,
    df_curve,
    df_derivative,
    df_second_derivative,
    df_spectral,
    noise_variance,
    sure,
    sure_report,
)
from ncldof.gram import compute_gram, whiten
from ncldof.ncl import LambdaPath, fit, predict_from_features, smoother_matrix


class TestSpectral:
    def test_endpoints(self, inst):
        rho = inst.wg.eigenvalues
        assert df_spectral(rho, 0.0, 10) == pytest.approx(5.0, abs=1e-10)
        assert df_spectral(rho, 1.0, 10) == inst.wg.rank_p

    def test_single_member(self):
        rho = np.ones(4)
        for lam in np.linspace(0, 1, 7):
            assert df_spectral(rho, lam, 1) == pytest.approx(4.0)

    def test_zero_eigenvalues_ignored(self):
        assert df_spectral(np.array([2.0, 0.0, 0.0]), 1.0, 2) == 1.0

    def test_lambda_range(self):
        with pytest.raises(ValueError):
            df_spectral(np.ones(3), -0.1, 2)

    @pytest.mark.parametrize("lam", [0.0, 0.3, 0.77, 1.0])
    def test_three_way_agreement(self, inst, lam):
        a = df_spectral(inst.wg.eigenvalues, lam, inst.wg.M)
        b = df_analytic(inst.wg, inst.g, lam)
        c = smoother_matrix(inst.wg, inst.phi, lam).trace
        assert b == pytest.approx(a, rel=1e-8)
        assert c == pytest.approx(a, rel=1e-8)

    def test_dense_oracle_independent_of_whitening(self, small_inst):
        s = small_inst
        lam = 0.45
        A = 4 * (1 - lam) * s.g.diag_full() + lam * s.g.gram_full
        oracle = np.trace(np.linalg.solve(A, s.g.gram_full))
        assert df_spectral(s.wg.eigenvalues, lam, 4) == pytest.approx(oracle, rel=1e-9)


class TestDerivatives:
    def test_degenerate_spectra(self):
        assert df_derivative(np.full(3, 4.0), 0.5, 4) == 0.0
        assert df_derivative(np.ones(3), 0.5, 1) == 0.0

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 12), st.floats(0.05, 0.95), st.integers(0, 2**31))
    def test_finite_differences(self, M, lam, seed):
        rho = np.random.default_rng(seed).uniform(0, M, size=15)
        h = 1e-6
        fd = (df_spectral(rho, lam + h, M) - df_spectral(rho, lam - h, M)) / (2 * h)
        an = df_derivative(rho, lam, M)
        assert an >= 0
        assert an == pytest.approx(fd, rel=1e-5, abs=1e-8)
        h2 = 1e-4
        fd2 = (df_spectral(rho, lam + h2, M) - 2 * df_spectral(rho, lam, M) + df_spectral(rho, lam - h2, M)) / h2 ** 2
        an2 = 2 * df_second_derivative(rho, lam, M)
        assert an2 >= 0
        assert an2 == pytest.approx(fd2, rel=1e-3, abs=1e-5)


class TestNoiseAndSure:
    def test_noise_arithmetic(self):
        r = np.zeros(110)
        r[:10] = 1.0
        assert noise_variance(r, 10) == pytest.approx(0.1)
        assert noise_variance(np.zeros(20), 10) == 0.0
        with pytest.raises(ValueError):
            noise_variance(np.ones(10), 10)

    def test_noise_estimate_well_specified(self, rng):
        # the regression function lies in the span of the features
        phi = rng.normal(size=(10, 5000))
        y = phi.T @ rng.normal(size=10) + 0.5 * rng.normal(size=5000)
        g = compute_gram(phi, y, 10)
        resid = predict_from_features(fit(whiten(g), g, 0.0), phi)[0] - y
        assert abs(noise_variance(resid, 10) - 0.25) < 0.15 * 0.25

    def test_sure_arithmetic(self):
        assert sure(0.0, 100, 0.3, 100) == pytest.approx(0.3)
        assert sure(0.7, 12, 0.0, 100) == 0.7
        assert sure(0.5, 50, 0.2, 1000) == pytest.approx(0.32)

    def test_report_consistent(self, inst):
        path = LambdaPath.from_data(inst.wg, inst.phi, inst.y)
        r = sure_report(path, 0.6, 0.09, 200)
        assert r.sure_value == r.emp_err + 0.09 * (2 * r.df / 200 - 1)


class TestCurve:
    def test_default_grid(self):
        g = default_grid()
        assert g[0] == 0.0 and g[-1] == 1.0 and np.all(np.diff(g) > 0)
        assert np.any(np.isclose(g, 1 - 1e-12, rtol=0, atol=1e-15)) and len(g) == 111

    def test_endpoints_and_shape(self, inst):
        c = df_curve(inst.wg, inst.g, inst.y, [0.0, 1.0])
        assert c.df[0] == pytest.approx(5.0) and c.df[1] == inst.wg.rank_p
        c = df_curve(inst.wg, inst.g, inst.y, np.linspace(0, 1, 21))
        assert np.all(np.diff(c.df) > 0) and np.all(np.diff(c.emp_err) < 0)
        assert np.all(np.diff(c.df, 2) >= -1e-9)

    def test_unsorted_grid(self, inst):
        with pytest.raises(ValueError):
            df_curve(inst.wg, inst.g, inst.y, [0.5, 0.2])

    def test_csv(self, inst):
        c = df_curve(inst.wg, inst.g, inst.y, [0.0, 0.5, 1.0], 0.1)
        buf = io.StringIO()
        c.write_csv(buf)
        rows = buf.getvalue().splitlines()
        assert rows[0] == "lambda,df,emp_err,sure" and len(rows) == 4
        assert float(rows[1].split(",")[1]) == c.df[0]
