"""Property suites run by ``ncldof verify``.

Each suite builds small random instances and checks identities that must
hold exactly (up to rounding) or statistically (up to a few standard
errors).  Functions under test are looked up through their modules at call
time, so a patched implementation is what gets verified.
"""

from __future__ import annotations

import time
import traceback
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import basis as basis_mod
from . import data as data_mod
from . import dof, gram, mcdof, ncl, theorem6, tikhonov, tuning


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class SuiteResult:
    name: str
    checks: list[CheckResult] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "seconds": round(self.seconds, 3),
                "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks]}


@dataclass(frozen=True, eq=False)
class Instance:
    synth: data_mod.SynthDataset
    basis: basis_mod.BasisEnsemble
    phi: np.ndarray
    g: gram.GramBundle
    wg: gram.WhitenedGram

    @property
    def y(self) -> np.ndarray:
        return self.synth.dataset.y


def make_instance(n: int, H: int, M: int, d: int = 8, sigma: float = 0.3, seed: int = 0,
                  gamma: float | None = None) -> Instance:
    """Synthetic data plus a random Fourier basis and its whitened Gram."""
    synth = data_mod.synthesize(data_mod.SynthSpec(n, d, sigma=sigma, seed=seed))
    X = synth.dataset.features
    if gamma is None:
        gamma = basis_mod.frequency_heuristic(X, seed)
    b = basis_mod.sample_rff(d, H, M, gamma, seed + 7919)
    phi = basis_mod.evaluate(b, X)
    g = gram.compute_gram(phi, synth.dataset.y, H)
    return Instance(synth, b, phi, g, gram.whiten(g))


def duplicated_instance(n: int = 200, H: int = 5, M: int = 4, dup: int = 2, seed: int = 0) -> Instance:
    """Instance whose last ``dup`` members repeat the first ones (singular G)."""
    base = make_instance(n, H, M, seed=seed)
    b0 = base.basis
    b = basis_mod.BasisEnsemble(np.concatenate([b0.zeta, b0.zeta[:dup]]),
                                np.concatenate([b0.b, b0.b[:dup]]), b0.gamma)
    phi = basis_mod.evaluate(b, base.synth.dataset.features)
    g = gram.compute_gram(phi, base.y, H)
    return Instance(base.synth, b, phi, g, gram.whiten(g))


def rel_gap(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def _check(name: str, ok, detail: str = "") -> CheckResult:
    return CheckResult(name, bool(ok), detail)


# ---------------------------------------------------------------- checks


def df_agreement(inst: Instance, grid) -> float:
    worst = 0.0
    for lam in grid:
        spec = dof.df_spectral(inst.wg.eigenvalues, lam, inst.wg.M)
        dense = dof.df_analytic(inst.wg, inst.g, lam)
        tr = ncl.smoother_matrix(inst.wg, inst.phi, lam).trace
        worst = max(worst, rel_gap(spec, dense), rel_gap(spec, tr))
    return worst


def df_endpoint_gaps(inst: Instance) -> tuple[float, float]:
    rank_g = np.linalg.matrix_rank(inst.g.gram_full, hermitian=True)
    at0 = abs(dof.df_spectral(inst.wg.eigenvalues, 0.0, inst.wg.M) - inst.wg.H)
    at1 = abs(dof.df_spectral(inst.wg.eigenvalues, 1.0, inst.wg.M) - rank_g)
    return at0, at1


def shape_violations(inst: Instance, n_grid: int = 101) -> dict[str, float]:
    """Worst violations of df increasing/convex and R_emp decreasing on a uniform grid."""
    grid = np.linspace(0.0, 1.0, n_grid)
    path = ncl.LambdaPath.from_data(inst.wg, inst.phi, inst.y)
    dfs = np.array([dof.df_spectral(inst.wg.eigenvalues, l, inst.wg.M) for l in grid])
    errs = np.array([path.emp_err(l) for l in grid])
    return {
        "df_drop": float(max(0.0, -np.min(np.diff(dfs)))),
        "df_concavity": float(max(0.0, -np.min(np.diff(dfs, 2)))),
        "err_rise": float(max(0.0, np.max(np.diff(errs)))),
        "min_df_step": float(np.min(np.diff(dfs))),
        "min_df_curv": float(np.min(np.diff(dfs, 2))),
    }


def spectral_bound_gaps(inst: Instance) -> tuple[float, float, float]:
    rho = inst.wg.eigenvalues
    M, H = inst.wg.M, inst.wg.H
    return float(-min(rho.min(), 0.0)), float(max(rho.max() - M, 0.0)), abs(rho.sum() - H * M) / (H * M)


def gradient_descent_beta(phi: np.ndarray, y, H: int, lam: float, iters: int = 200_000,
                          tol: float = 1e-13) -> np.ndarray:
    """Full-batch gradient descent on the blended NCL loss over member weights.

    Works directly with member predictions ``f_m = w_m^T phi_m`` and never
    touches the closed form; returns ``beta = w / M``.
    """
    y = np.asarray(y, dtype=float)
    Q, N = phi.shape
    M = Q // H
    blocks = phi.reshape(M, H, N)
    w = np.zeros((M, H))

    def grad(w):
        f = np.einsum("mh,mhn->mn", w, blocks)
        F = f.mean(axis=0)
        # d/df_m of mean_n[(1-lam) mean_m (f_m - y)^2 + lam (F - y)^2]
        df_ = (2.0 / (M * N)) * ((1.0 - lam) * (f - y) + lam * (F - y))
        return np.einsum("mn,mhn->mh", df_, blocks)

    # Lipschitz bound of the gradient from the Hessian's largest eigenvalue
    G = phi @ phi.T / N
    D = np.zeros_like(G)
    for m in range(M):
        s = slice(m * H, (m + 1) * H)
        D[s, s] = G[s, s]
    hess = 2.0 / M * ((1.0 - lam) * D + lam * G / M)
    step = 1.0 / np.linalg.eigvalsh(hess)[-1]
    # Nesterov momentum keeps the iteration count modest
    v = w.copy()
    for k in range(iters):
        w_next = v - step * grad(v)
        v = w_next + (k / (k + 3.0)) * (w_next - w)
        if np.max(np.abs(w_next - w)) < tol:
            w = w_next
            break
        w = w_next
    return w.reshape(-1) / M


def ambiguity_gap(n_cases: int = 10_000, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        M = int(rng.integers(1, 20))
        scale = 10.0 ** rng.uniform(-3, 3)
        f = rng.normal(size=M) * scale
        y = float(rng.normal() * scale)
        r = ncl.ambiguity(f, y)
        worst = max(worst, abs(r.ensemble_error - (r.average_member_error - r.diversity)) / max(1.0, r.average_member_error))
    return worst


# ---------------------------------------------------------------- suites


def suite_data(seed: int) -> list[CheckResult]:
    out = []
    s = data_mod.synthesize(data_mod.SynthSpec(120, 3, sigma=0.1, seed=seed))
    std, params = data_mod.standardize(s.dataset)
    out.append(_check("standardized columns have mean 0, std 1",
                      np.allclose(std.features.mean(0), 0, atol=1e-12) and np.allclose(std.features.std(0), 1, atol=1e-12)))
    back = params.inverse(std)
    out.append(_check("standardization round trip", np.allclose(back.features, s.dataset.features, atol=1e-12)))
    folds = data_mod.kfold_indices(120, 5, seed)
    val = np.sort(np.concatenate([v for _, v in folds]))
    out.append(_check("k-fold validation sets partition the rows", np.array_equal(val, np.arange(120))))
    tr, te = data_mod.split(s.dataset, 0.25, seed)
    out.append(_check("split sizes", (tr.n, te.n) == (90, 30), f"{tr.n}/{te.n}"))
    clean = data_mod.synthesize(data_mod.SynthSpec(50, 2, sigma=0.0, seed=seed))
    out.append(_check("noiseless synthetic targets equal the regression function",
                      np.array_equal(clean.dataset.y, clean.mu_values)))
    return out


def suite_basis(seed: int) -> list[CheckResult]:
    out = []
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (80, 4))
    b = basis_mod.sample_rff(4, 6, 5, 0.7, seed)
    phi = basis_mod.evaluate(b, X)
    out.append(_check("feature matrix shape is (H*M, N)", phi.shape == (30, 80)))
    out.append(_check("features lie in [-1, 1]", np.all(np.abs(phi) <= 1.0)))
    again = basis_mod.BasisEnsemble.from_dict(b.to_dict())
    out.append(_check("serialization keeps the fingerprint and features",
                      again.fingerprint == b.fingerprint and np.array_equal(basis_mod.evaluate(again, X), phi)))
    gam = basis_mod.frequency_heuristic(X, seed)
    out.append(_check("frequency heuristic is positive and finite", np.isfinite(gam) and gam > 0, f"{gam:.4g}"))
    return out


def suite_gram(seed: int) -> list[CheckResult]:
    out = []
    worst = [0.0, 0.0, 0.0]
    block_gap = 0.0
    for i in range(10):
        H, M = [(2, 3), (5, 10), (3, 7), (4, 2)][i % 4]
        inst = make_instance(150, H, M, seed=seed + i)
        worst = [max(a, b) for a, b in zip(worst, spectral_bound_gaps(inst))]
        P4 = inst.wg.p_matrix.reshape(M, H, M, H)
        for m in range(M):
            block_gap = max(block_gap, float(np.max(np.abs(P4[m, :, m, :] - np.eye(H)))))
    out.append(_check("eigenvalues of P are >= 0", worst[0] <= 1e-8, f"{worst[0]:.2e}"))
    out.append(_check("eigenvalues of P are <= M", worst[1] <= 1e-8, f"{worst[1]:.2e}"))
    out.append(_check("eigenvalues of P sum to H*M", worst[2] <= 1e-6, f"{worst[2]:.2e}"))
    out.append(_check("diagonal blocks of P are identities", block_gap <= 1e-8, f"{block_gap:.2e}"))
    dup = duplicated_instance(seed=seed)
    out.append(_check("duplicated members drop the rank of P", dup.wg.rank_p < dup.wg.Q,
                      f"rank {dup.wg.rank_p} of {dup.wg.Q}"))
    return out


def suite_ncl(seed: int) -> list[CheckResult]:
    out = []
    inst = make_instance(20, 2, 3, d=2, seed=seed, gamma=1.0)
    lam = 0.37
    beta = ncl.fit(inst.wg, inst.g, lam).beta
    gd = gradient_descent_beta(inst.phi, inst.y, 2, lam)
    rms = float(np.sqrt(np.mean((beta - gd) ** 2)))
    out.append(_check("closed form matches gradient descent (N=20, Q=6)", rms <= 1e-4, f"rms {rms:.2e}"))

    inst = make_instance(150, 4, 6, seed=seed + 1)
    A = 6 * (1 - lam) * inst.g.diag_full() + lam * inst.g.gram_full
    resid = A @ ncl.fit(inst.wg, inst.g, lam).beta - inst.g.phi_y
    out.append(_check("fit satisfies the stationarity equations", np.max(np.abs(resid)) <= 1e-10,
                      f"{np.max(np.abs(resid)):.2e}"))
    path = ncl.LambdaPath.from_data(inst.wg, inst.phi, inst.y)
    gap = 0.0
    for l in (0.0, 0.3, 0.8, 1.0):
        pred = ncl.predict_from_features(ncl.fit(inst.wg, inst.g, l), inst.phi)[0]
        gap = max(gap, abs(path.emp_err(l) - ncl.emp_error(pred, inst.y)))
    out.append(_check("fast training-error path matches direct prediction", gap <= 1e-10, f"{gap:.2e}"))

    f = np.random.default_rng(seed).normal(size=7)
    lg = abs(ncl.ncl_loss(f, 0.4, 0.6) - ncl.ncl_loss_blended(f, 0.4, 0.6))
    out.append(_check("two forms of the NCL loss agree", lg <= 1e-12, f"{lg:.2e}"))
    ag = ambiguity_gap(10_000, seed)
    out.append(_check("ambiguity decomposition on 10^4 fuzzed cases", ag <= 1e-12, f"{ag:.2e}"))
    return out


def suite_dof(seed: int) -> list[CheckResult]:
    out = []
    grid = np.linspace(0.0, 1.0, 21)
    configs = [(2, 3), (5, 10), (2, 10), (5, 3)]
    insts = [make_instance(200, H, M, seed=seed + i) for i, (H, M) in enumerate(configs)]
    worst = max(df_agreement(i, grid) for i in insts)
    out.append(_check("spectral, dense and smoother-trace df agree", worst <= 1e-8, f"{worst:.2e}"))
    ends = [df_endpoint_gaps(i) for i in insts]
    e0 = max(e[0] for e in ends)
    e1 = max(e[1] for e in ends)
    out.append(_check("df(0) = H", e0 <= 1e-6, f"{e0:.2e}"))
    out.append(_check("df(1) = rank of the Gram matrix", e1 <= 1e-6, f"{e1:.2e}"))
    shapes = [shape_violations(i) for i in insts]
    out.append(_check("df nondecreasing and convex, R_emp nonincreasing",
                      all(s["df_drop"] <= 1e-9 and s["df_concavity"] <= 1e-9 and s["err_rise"] <= 1e-9 for s in shapes)))
    out.append(_check("df strictly increasing and convex when H < rank",
                      all(s["min_df_step"] > 0 and s["min_df_curv"] > 0 for s in shapes)))
    inst = insts[1]
    h = 1e-5
    fd = (dof.df_spectral(inst.wg.eigenvalues, 0.5 + h, 10) - dof.df_spectral(inst.wg.eigenvalues, 0.5 - h, 10)) / (2 * h)
    an = dof.df_derivative(inst.wg.eigenvalues, 0.5, 10)
    out.append(_check("df derivative matches finite differences", rel_gap(fd, an) <= 1e-6, f"{rel_gap(fd, an):.2e}"))
    dup = duplicated_instance(seed=seed)
    e1 = abs(dof.df_spectral(dup.wg.eigenvalues, 1.0, dup.wg.M) - np.linalg.matrix_rank(dup.g.gram_full, hermitian=True))
    out.append(_check("df(1) = rank on a rank-deficient instance", e1 <= 1e-6, f"{e1:.2e}"))
    return out


def suite_mcdof(seed: int) -> list[CheckResult]:
    out = []
    rng = np.random.default_rng(seed)
    S = rng.normal(size=(5, 5))
    y5 = rng.normal(size=5)
    ok = True
    detail = []
    for eps in (1e-1, 1e-3, 1e-6):
        est = mcdof.estimate_df(mcdof.linear_smoother_oracle(S), y5, eps, 500, seed)
        z = abs(est.value - np.trace(S)) / est.std_error
        ok &= z <= 3
        detail.append(f"{eps:g}:{z:.1f}se")
    out.append(_check("linear smoother estimate is unbiased at every epsilon", ok, " ".join(detail)))
    inst = make_instance(200, 5, 10, seed=seed)
    ok = True
    detail = []
    for lam in (0.0, 0.5, 0.9, 1.0):
        est = mcdof.estimate_df(mcdof.ncl_oracle(inst.phi, 5, lam), inst.y, 1e-3, 200, seed)
        ref = dof.df_analytic(inst.wg, inst.g, lam)
        gap = abs(est.value - ref)
        ok &= gap <= max(0.02 * ref, 3 * est.std_error)
        detail.append(f"{lam}:{est.value:.2f}/{ref:.2f}")
    out.append(_check("Monte-Carlo df matches the analytic df", ok, " ".join(detail)))
    const = mcdof.estimate_df(lambda y: np.zeros_like(y), inst.y, 1e-3, 10, seed)
    out.append(_check("constant oracle has zero df", np.all(const.per_repeat == 0.0)))
    return out


def suite_tikhonov(seed: int) -> list[CheckResult]:
    out = []
    grid = np.round(np.arange(0.05, 1.0 + 1e-9, 0.05), 2)
    worst = 0.0
    for i in range(4):
        inst = make_instance(150, 4, 6, seed=seed + i)
        worst = max(worst, max(tikhonov.equivalence_check(inst.synth.dataset, inst.basis, grid, seed=seed).values()))
    out.append(_check("ridge on whitened features equals lam * NCL ensemble", worst <= 1e-6, f"{worst:.2e}"))
    dup = duplicated_instance(seed=seed)
    gap = tikhonov.equivalence_check(dup.synth.dataset, dup.basis, [0.5, 1.0], seed=seed)
    out.append(_check("equivalence on a rank-deficient instance", max(gap.values()) <= 1e-6,
                      f"{max(gap.values()):.2e}"))
    gammas = [tikhonov.gamma_for_lambda(l, 6) for l in grid]
    out.append(_check("ridge penalty decreases as lam grows", np.all(np.diff(gammas) < 0)))
    return out


def suite_theorem6(seed: int) -> list[CheckResult]:
    out = []
    b = basis_mod.sample_rff(3, 5, 12, 1.0, seed + 1)
    noisy = theorem6.run_theorem6(data_mod.SynthSpec(500, 3, sigma=0.5, seed=seed), b, k_draws=200, seed=seed)
    z = np.abs(noisy.mean_sure - noisy.mean_true_err) / noisy.se_sure_gap
    idx = [int(np.argmin(np.abs(noisy.lambdas - l))) for l in (0.0, 0.5, 0.9, 1.0)]
    out.append(_check("mean SURE matches mean true error", np.all(z[idx] <= 3.0),
                      " ".join(f"{noisy.lambdas[i]:g}:{z[i]:.1f}se" for i in idx)))
    i_best = int(np.argmin(noisy.mean_true_err))
    margin = (noisy.mean_true_err[-1] - noisy.mean_true_err[i_best]) / np.hypot(
        noisy.se_true_err[-1], noisy.se_true_err[i_best])
    out.append(_check("with noise the best lam is below 1", noisy.lambda_best < 1.0 and margin > 2.0,
                      f"lam {noisy.lambda_best:g}, {margin:.1f} se"))
    out.append(_check("slope at lam = 1 is positive with noise", noisy.derivative_at_one > 0))
    clean = theorem6.run_theorem6(data_mod.SynthSpec(500, 3, sigma=0.0, seed=seed), b, k_draws=50, seed=seed)
    out.append(_check("without noise the best lam is 1", clean.lambda_best == 1.0, f"{clean.lambda_best!r}"))
    return out


def suite_tuning(seed: int) -> list[CheckResult]:
    out = []
    res = tuning.brent_minimize(lambda x: (x - 0.3) ** 2 + 1.0, 0.0, 1.0, xtol=1e-8)
    out.append(_check("Brent finds an interior minimum", abs(res.x - 0.3) <= 1e-6, f"{res.x:.8f}"))
    res = tuning.brent_minimize(lambda x: -x, 0.0, 1.0)
    out.append(_check("Brent returns the endpoint of a monotone function", res.x == 1.0, f"{res.x!r}"))
    inst = make_instance(300, 5, 10, sigma=0.8, seed=seed)
    r = tuning.tune_sure(inst.synth.dataset, inst.basis)
    out.append(_check("SURE tuning picks lam < 1 on noisy data", r.lambda_star < 1.0, f"{r.lambda_star:.6f}"))
    r1 = tuning.tune_cv(inst.synth.dataset, inst.basis, 5, seed)
    r2 = tuning.tune_cv(inst.synth.dataset, inst.basis, 5, seed)
    out.append(_check("cross-validation tuning is deterministic", r1.lambda_star == r2.lambda_star))
    return out


def suite_curves(seed: int) -> list[CheckResult]:
    """Shapes of the df, training-error and test-error curves on noisy data."""
    out = []
    inst = make_instance(300, 5, 20, sigma=1.0, seed=seed)
    curve = dof.df_curve(inst.wg, inst.g, inst.y, np.linspace(0.0, 1.0, 101))
    out.append(_check("df curve nondecreasing", np.all(np.diff(curve.df) >= -1e-9)))
    out.append(_check("training error curve nonincreasing", np.all(np.diff(curve.emp_err) <= 1e-9)))
    grid = dof.default_grid(51)
    test = data_mod.synthesize(data_mod.SynthSpec(2000, 8, sigma=0.0, seed=seed + 100))
    phi_te = basis_mod.evaluate(inst.basis, test.dataset.features)
    errs = np.array([ncl.true_error(ncl.predict_from_features(ncl.fit(inst.wg, inst.g, l), phi_te)[0], test.mu_values)
                     for l in grid])
    out.append(_check("test error rises toward lam = 1", errs[-1] > 1.2 * errs.min(),
                      f"{errs.min():.3g} -> {errs[-1]:.3g}"))
    return out


SUITES: dict[str, Callable[[int], list[CheckResult]]] = {
    "data": suite_data,
    "basis": suite_basis,
    "gram": suite_gram,
    "ncl": suite_ncl,
    "dof": suite_dof,
    "mcdof": suite_mcdof,
    "tikhonov": suite_tikhonov,
    "theorem6": suite_theorem6,
    "tuning": suite_tuning,
    "curves": suite_curves,
}


def run_suites(only=None, seed: int = 0) -> list[SuiteResult]:
    names = list(SUITES) if not only else list(only)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    results = []
    for name in names:
        t0 = time.perf_counter()
        try:
            checks = SUITES[name](seed)
        except Exception as exc:
            checks = [CheckResult("suite raised", False, f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}")]
        results.append(SuiteResult(name, checks, time.perf_counter() - t0))
    return results


def format_table(results: list[SuiteResult]) -> str:
    lines = []
    for r in results:
        lines.append(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<10} {r.seconds:7.2f}s")
        for c in r.checks:
            mark = "ok " if c.passed else "BAD"
            lines.append(f"      {mark} {c.name}" + (f"  [{c.detail}]" if c.detail else ""))
    return "\n".join(lines)
