import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncldof.basis import BasisEnsemble, evaluate
from ncldof.gram import compute_gram, whiten
from ncldof.ncl import (
    FittedEnsemble,
    LambdaPath,
    ambiguity,
    emp_error,
    fit,
    ncl_loss,
    ncl_loss_blended,
    predict,
    predict_from_features,
    smoother_matrix,
    true_error,
)
from ncldof.verify import gradient_descent_beta, make_instance

finite = st.floats(-1e3, 1e3, allow_nan=False)


def blended_objective(beta, phi, y, H, lam):
    """Average NCL loss over the data, from member predictions."""
    M = phi.shape[0] // H
    f = np.einsum("mh,mhn->mn", (M * beta).reshape(M, H), phi.reshape(M, H, -1))
    F = f.mean(0)
    return np.mean((1 - lam) * np.mean((f - y) ** 2, 0) + lam * (F - y) ** 2)


class TestFit:
    def test_single_member_single_feature(self):
        phi = np.array([[1.0, 2.0]])
        g = compute_gram(phi, np.array([2.0, 4.0]), 1)
        wg = whiten(g)
        for lam in (0.0, 0.3, 1.0):
            assert fit(wg, g, lam).beta[0] == pytest.approx(2.0)

    def test_lambda_one_is_least_squares(self, small_inst):
        s = small_inst
        beta = fit(s.wg, s.g, 1.0).beta
        resid = s.phi.T @ beta - s.y
        assert np.max(np.abs(s.phi @ resid)) / s.phi.shape[1] < 1e-8
        ols = np.linalg.lstsq(s.phi.T, s.y, rcond=None)[0]
        np.testing.assert_allclose(s.phi.T @ beta, s.phi.T @ ols, atol=1e-8)

    def test_gradient_descent_oracle(self):
        s = make_instance(20, 2, 3, d=2, seed=0, gamma=1.0)
        beta = fit(s.wg, s.g, 0.37).beta
        gd = gradient_descent_beta(s.phi, s.y, 2, 0.37)
        assert np.sqrt(np.mean((beta - gd) ** 2)) < 1e-4

    def test_stationary_point(self, small_inst):
        s = small_inst
        lam = 0.6
        beta = fit(s.wg, s.g, lam).beta
        h = 1e-6
        grads = []
        for q in range(beta.size):
            e = np.zeros_like(beta)
            e[q] = h
            grads.append((blended_objective(beta + e, s.phi, s.y, 3, lam)
                          - blended_objective(beta - e, s.phi, s.y, 3, lam)) / (2 * h))
        assert np.max(np.abs(grads)) < 1e-5

    def test_lambda_range(self, small_inst):
        with pytest.raises(ValueError):
            fit(small_inst.wg, small_inst.g, 1.2)

    def test_member_weights_exact(self, small_inst):
        fe = fit(small_inst.wg, small_inst.g, 0.5)
        np.testing.assert_array_equal(fe.member_weights.reshape(-1), 4 * fe.beta)
        assert FittedEnsemble.from_dict(fe.to_dict()).beta.tolist() == fe.beta.tolist()


class TestPredict:
    def test_zero_beta(self, small_inst):
        fe = FittedEnsemble(0.5, np.zeros(12), 3, 4)
        ens, mem = predict(fe, small_inst.basis, small_inst.synth.dataset.features)
        assert not ens.any() and not mem.any()

    def test_cancelling_members(self):
        b = BasisEnsemble(np.ones((2, 1, 1)), np.zeros((2, 1)), 1.0)
        fe = FittedEnsemble(0.5, np.array([0.5, -0.5]), 1, 2)
        ens, mem = predict(fe, b, np.array([[0.1], [0.7]]))
        np.testing.assert_allclose(ens, 0, atol=1e-15)
        assert np.all(np.abs(mem) > 0.1)

    def test_beta_route_and_smoother(self, small_inst):
        s = small_inst
        fe = fit(s.wg, s.g, 0.7)
        ens, mem = predict(fe, s.basis, s.synth.dataset.features)
        np.testing.assert_allclose(ens, s.phi.T @ fe.beta, atol=1e-10)
        np.testing.assert_allclose(ens, mem.mean(0), atol=1e-12)
        S = smoother_matrix(s.wg, s.phi, 0.7)
        np.testing.assert_allclose(ens, S.s @ s.y, atol=1e-8)

    def test_basis_mismatch(self, small_inst, inst):
        fe = fit(small_inst.wg, small_inst.g, 0.5, small_inst.basis.fingerprint)
        with pytest.raises(ValueError):
            predict(fe, inst.basis, inst.synth.dataset.features)


class TestSmoother:
    def test_hat_matrix_single_member(self, rng):
        phi = rng.normal(size=(3, 40))
        wg = whiten(compute_gram(phi, np.zeros(40), 3))
        S = smoother_matrix(wg, phi, 0.0).s
        hat = phi.T @ np.linalg.solve(phi @ phi.T, phi)
        np.testing.assert_allclose(S, hat, atol=1e-10)
        assert S.trace() == pytest.approx(3.0)

    @pytest.mark.parametrize("lam", [0.0, 0.5, 1.0])
    def test_spectrum_and_symmetry(self, inst, lam):
        S = smoother_matrix(inst.wg, inst.phi, lam).s
        np.testing.assert_allclose(S, S.T, atol=1e-10)
        ev = np.linalg.eigvalsh(S)
        assert ev.min() > -1e-8 and ev.max() < 1 + 1e-8

    def test_guard(self):
        wg = whiten(compute_gram(np.ones((1, 6000)) + np.linspace(0, 1, 6000), np.zeros(6000), 1))
        with pytest.raises(ValueError):
            smoother_matrix(wg, np.ones((1, 6000)), 0.5)


class TestLambdaPath:
    def test_matches_direct_fit(self, inst):
        path = LambdaPath.from_data(inst.wg, inst.phi, inst.y)
        for lam in (0.0, 0.25, 0.9, 1.0):
            fe = fit(inst.wg, inst.g, lam)
            np.testing.assert_allclose(path.beta(lam), fe.beta, atol=1e-12)
            pred = predict_from_features(fe, inst.phi)[0]
            assert path.emp_err(lam) == pytest.approx(emp_error(pred, inst.y), abs=1e-12)

    def test_training_error_nonincreasing(self, inst):
        path = LambdaPath.from_data(inst.wg, inst.phi, inst.y)
        errs = [path.emp_err(l) for l in np.arange(0, 1.0001, 0.05)]
        assert np.all(np.diff(errs) < -1e-9)


class TestLosses:
    @pytest.mark.parametrize("lam,expected", [(1.0, 0.0), (0.0, 1.0), (0.5, 0.5)])
    def test_hand_values(self, lam, expected):
        assert ncl_loss([1.0, 3.0], 2.0, lam) == pytest.approx(expected)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(finite, min_size=1, max_size=12), finite, st.floats(0, 1))
    def test_two_forms_agree(self, f, y, lam):
        scale = 1 + max(abs(v - y) for v in f) ** 2
        assert abs(ncl_loss(f, y, lam) - ncl_loss_blended(f, y, lam)) <= 1e-12 * scale

    def test_ambiguity_examples(self):
        r = ambiguity([1.0, 3.0], 2.0)
        assert (r.ensemble_error, r.average_member_error, r.diversity) == (0.0, 1.0, 1.0)
        r = ambiguity([2.0, 2.0, 2.0], 2.0)
        assert (r.ensemble_error, r.average_member_error, r.diversity) == (0.0, 0.0, 0.0)

    @settings(max_examples=300, deadline=None)
    @given(st.lists(finite, min_size=1, max_size=20), finite)
    def test_ambiguity_identity(self, f, y):
        r = ambiguity(f, y)
        assert r.diversity >= 0
        assert abs(r.ensemble_error - (r.average_member_error - r.diversity)) <= 1e-12 * max(1.0, r.average_member_error)

    def test_errors(self, rng):
        y = rng.normal(size=7)
        assert emp_error(y, y) == 0.0
        assert emp_error(y + 1, y) == pytest.approx(1.0)
        p = rng.normal(size=7)
        assert true_error(p, y) == pytest.approx(sum((a - b) ** 2 for a, b in zip(p, y)) / 7, abs=1e-14)
        with pytest.raises(ValueError):
            emp_error(y, y[:3])
