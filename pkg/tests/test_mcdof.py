import numpy as np
import pytest

from ncldof.dof import df_analytic
from ncldof.mcdof import OracleError, estimate_df, linear_smoother_oracle, ncl_oracle
from ncldof.ncl import smoother_matrix


def test_identity_oracle_has_df_n():
    y = np.zeros(50)
    est = estimate_df(lambda v: v, y, repeats=200, seed=1)
    assert abs(est.value - 50) <= 3 * est.std_error


def test_constant_oracle_is_exactly_zero():
    est = estimate_df(lambda v: np.full_like(v, 3.0), np.ones(8), repeats=20)
    assert np.all(est.per_repeat == 0.0) and est.value == 0.0


def test_linear_smoother_trace(rng):
    S = rng.normal(size=(5, 5))
    est = estimate_df(linear_smoother_oracle(S), rng.normal(size=5), repeats=500, seed=2)
    assert abs(est.value - np.trace(S)) <= 2 * est.std_error


@pytest.mark.parametrize("eps", [1e-1, 1e-3, 1e-6])
def test_linear_case_is_epsilon_free(rng, eps):
    S = rng.normal(size=(6, 6))
    est = estimate_df(linear_smoother_oracle(S), rng.normal(size=6), eps, 400, 3)
    assert abs(est.value - np.trace(S)) <= 3 * est.std_error


def test_summary_statistics():
    est = estimate_df(lambda v: 2 * v, np.zeros(4), repeats=30, seed=0)
    assert est.value == pytest.approx(est.per_repeat.mean())
    assert est.std_error == pytest.approx(est.per_repeat.std(ddof=1) / np.sqrt(30))


def test_base_fit_computed_once():
    calls = []

    def oracle(v):
        calls.append(v.copy())
        return v

    estimate_df(oracle, np.zeros(3), repeats=7)
    assert len(calls) == 8


def test_order_and_threads_do_not_matter():
    S = np.diag([1.0, 2.0, 3.0])
    a = estimate_df(linear_smoother_oracle(S), np.zeros(3), repeats=25, seed=9)
    b = estimate_df(linear_smoother_oracle(S), np.zeros(3), repeats=25, seed=9, n_jobs=4)
    np.testing.assert_array_equal(a.per_repeat, b.per_repeat)


def test_oracle_failure_reports_repeat():
    count = {"n": 0}

    def flaky(v):
        count["n"] += 1
        if count["n"] == 4:
            raise RuntimeError("boom")
        return v

    with pytest.raises(OracleError, match="repeat 2"):
        estimate_df(flaky, np.zeros(3), repeats=5)


@pytest.mark.parametrize("kw", [{"epsilon": 0.0}, {"repeats": 0}])
def test_bad_arguments(kw):
    with pytest.raises(ValueError):
        estimate_df(lambda v: v, np.zeros(3), **kw)


def test_ncl_oracle_is_the_smoother(inst):
    oracle = ncl_oracle(inst.phi, 5, 0.6)
    S = smoother_matrix(inst.wg, inst.phi, 0.6).s
    np.testing.assert_allclose(oracle(inst.y), S @ inst.y, atol=1e-10)


@pytest.mark.parametrize("lam", [0.0, 0.5, 0.9, 1.0])
def test_agrees_with_analytic(inst, lam):
    est = estimate_df(ncl_oracle(inst.phi, 5, lam), inst.y, 1e-3, 200, 0)
    ref = df_analytic(inst.wg, inst.g, lam)
    assert abs(est.value - ref) <= max(0.02 * ref, 3 * est.std_error)


def test_monotone_in_lambda(inst):
    ests = [estimate_df(ncl_oracle(inst.phi, 5, l), inst.y, 1e-3, 100, 5) for l in (0.0, 0.3, 0.6, 0.9, 1.0)]
    for a, b in zip(ests, ests[1:]):
        assert b.value >= a.value - 2 * np.hypot(a.std_error, b.std_error)
