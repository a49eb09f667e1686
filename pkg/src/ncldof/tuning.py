"""Selecting the diversity parameter: SURE versus k-fold cross validation.

Both tuners minimise a scalar criterion over lam in [0, 1] with Brent's
method.  The SURE tuner needs a single Gram matrix and eigendecomposition for
the whole search; the CV tuner needs one per fold.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .basis import BasisEnsemble, evaluate, frequency_heuristic, sample_rff
from .data import Dataset, kfold_indices, standardize
from .dof import df_spectral, noise_variance, sure
from .gram import compute_gram, whiten
from .ncl import LambdaPath

logger = logging.getLogger(__name__)

_GOLDEN = 0.5 * (3.0 - math.sqrt(5.0))
_SQRT_EPS = math.sqrt(np.finfo(float).eps)


@dataclass
class BrentResult:
    x: float
    fun: float
    nfev: int
    converged: bool
    trace: list[tuple[float, float]] = field(default_factory=list)


def brent_minimize(f: Callable[[float], float], a: float, b: float,
                   xtol: float = 1e-4, max_iter: int = 100) -> BrentResult:
    """Bounded Brent minimisation (golden section + parabolic steps).

    Never evaluates ``f`` outside ``[a, b]``.  When the minimiser converges
    within ``2 * xtol`` of an end of the bracket, that endpoint is evaluated
    too and kept if it is no worse, so boundary minima are returned exactly.
    If ``max_iter`` evaluations are used up, the best point so far is
    returned with ``converged=False``.
    """
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    if xtol <= 0 or max_iter < 1:
        raise ValueError("xtol must be positive and max_iter >= 1")
    trace: list[tuple[float, float]] = []

    def call(u):
        fu = float(f(u))
        trace.append((u, fu))
        return fu

    lo, hi = a, b
    x = w = v = lo + _GOLDEN * (hi - lo)
    fx = fw = fv = call(x)
    d = e = 0.0
    converged = False
    while len(trace) < max_iter:
        xm = 0.5 * (lo + hi)
        tol1 = _SQRT_EPS * abs(x) + xtol / 3.0
        tol2 = 2.0 * tol1
        if abs(x - xm) <= tol2 - 0.5 * (hi - lo):
            converged = True
            break
        golden = True
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            etemp, e = e, d
            if abs(p) < abs(0.5 * q * etemp) and q * (lo - x) < p < q * (hi - x):
                d = p / q
                u = x + d
                if (u - lo) < tol2 or (hi - u) < tol2:
                    d = math.copysign(tol1, xm - x)
                golden = False
        if golden:
            e = (hi - x) if x < xm else (lo - x)
            d = _GOLDEN * e
        u = x + (d if abs(d) >= tol1 else math.copysign(tol1, d))
        u = min(max(u, a), b)
        fu = call(u)
        if fu <= fx:
            if u < x:
                hi = x
            else:
                lo = x
            v, w, x = w, x, u
            fv, fw, fx = fw, fx, fu
        else:
            if u < x:
                lo = u
            else:
                hi = u
            if fu <= fw or w == x:
                v, w, fv, fw = w, u, fw, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu

    if converged:
        for end in (a, b):
            if abs(x - end) <= 2.0 * xtol and len(trace) < max_iter:
                fe = call(end)
                if fe <= fx:
                    x, fx = end, fe
    else:
        x, fx = min(trace, key=lambda t: t[1])
        logger.warning("brent_minimize: %d evaluations exhausted before convergence", max_iter)
    return BrentResult(x, fx, len(trace), converged, trace)


@dataclass(frozen=True)
class TuneConfig:
    xtol: float = 1e-4
    max_iter: int = 100
    noise_var: float | None = None  # known sigma^2; None -> estimate from the lam=0 fit


@dataclass
class TuneResult:
    lambda_star: float
    criterion_value: float
    method: str
    evaluations: int
    wall_time: float
    trace: list[tuple[float, float]]
    converged: bool = True
    sigma_tilde_sq: float | None = None
    search_time: float = 0.0  # Brent loop only, excluding shared setup

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "lambda_star": self.lambda_star,
            "criterion_value": self.criterion_value,
            "evaluations": self.evaluations,
            "wall_time": self.wall_time,
            "converged": self.converged,
            "sigma_tilde_sq": self.sigma_tilde_sq,
            "trace": [list(t) for t in self.trace],
        }


class SureCriterion:
    """SURE(lam) for every target column of one training set.

    Builds the Gram matrix and its whitened eigendecomposition once.
    """

    def __init__(self, phi: np.ndarray, Y: np.ndarray, H: int, noise_var: float | None = None):
        Y = np.asarray(Y, dtype=float).reshape(phi.shape[1], -1)
        self.n = phi.shape[1]
        self.H = H
        self.gram = compute_gram(phi, Y, H)
        self.wg = whiten(self.gram)
        self.paths = [LambdaPath(self.wg, self.gram.phi_y[:, t], float(Y[:, t] @ Y[:, t]) / self.n)
                      for t in range(Y.shape[1])]
        if noise_var is None:
            self.sigma_sq = []
            for t, path in enumerate(self.paths):
                resid = phi.T @ path.beta(0.0) - Y[:, t]
                self.sigma_sq.append(noise_variance(resid, H))
        else:
            self.sigma_sq = [float(noise_var)] * Y.shape[1]

    def __call__(self, lam: float, t: int = 0) -> float:
        path = self.paths[t]
        return sure(path.emp_err(lam), df_spectral(self.wg.eigenvalues, lam, self.wg.M),
                    self.sigma_sq[t], self.n)


class CvCriterion:
    """Mean k-fold validation MSE as a function of lam.

    Each fold's Gram matrix and eigendecomposition are built once; after
    that a criterion evaluation costs O(N Q).
    """

    def __init__(self, phi: np.ndarray, Y: np.ndarray, H: int, k: int, seed: int):
        Y = np.asarray(Y, dtype=float).reshape(phi.shape[1], -1)
        self.folds = []
        for tr, va in kfold_indices(phi.shape[1], k, seed):
            if tr.size <= H:
                raise ValueError(f"fold training part has {tr.size} rows, need more than H={H}")
            g = compute_gram(phi[:, tr], Y[tr], H)
            wg = whiten(g)
            V = wg.eigenvectors
            t_val = wg.whiten_rows(phi[:, va]).T @ V
            z = V.T @ wg.whiten_rows(g.phi_y)
            self.folds.append((wg, t_val, z, Y[va]))

    def __call__(self, lam: float, t: int = 0) -> float:
        errs = []
        for wg, t_val, z, y_val in self.folds:
            pred = t_val @ (wg.filter(lam) * z[:, t])
            errs.append(np.mean((pred - y_val[:, t]) ** 2))
        return float(np.mean(errs))


def _minimise(crit, t, config: TuneConfig, method: str, setup_time: float, sigma=None) -> TuneResult:
    t0 = time.perf_counter()
    res = brent_minimize(lambda lam: crit(lam, t), 0.0, 1.0, config.xtol, config.max_iter)
    search = time.perf_counter() - t0
    return TuneResult(res.x, res.fun, method, res.nfev, setup_time + search,
                      res.trace, res.converged, sigma, search)


def tune_sure_all(train: Dataset, basis: BasisEnsemble, config: TuneConfig | None = None) -> list[TuneResult]:
    """SURE-tuned lam for every target column, sharing one eigendecomposition.

    Each result's ``wall_time`` counts the shared setup plus its own search.
    """
    config = config or TuneConfig()
    t0 = time.perf_counter()
    phi = evaluate(basis, train.features)
    crit = SureCriterion(phi, train.targets, basis.H, config.noise_var)
    setup = time.perf_counter() - t0
    return [_minimise(crit, t, config, "sure", setup, crit.sigma_sq[t]) for t in range(train.n_targets)]


def tune_sure(train: Dataset, basis: BasisEnsemble, config: TuneConfig | None = None, target: int = 0) -> TuneResult:
    """Minimise SURE over lam in [0, 1] for one target column."""
    config = config or TuneConfig()
    t0 = time.perf_counter()
    phi = evaluate(basis, train.features)
    crit = SureCriterion(phi, train.targets[:, [target]], basis.H, config.noise_var)
    return _minimise(crit, 0, config, "sure", time.perf_counter() - t0, crit.sigma_sq[0])


def tune_cv(train: Dataset, basis: BasisEnsemble, k: int = 5, seed: int = 0,
            config: TuneConfig | None = None, target: int = 0) -> TuneResult:
    """Minimise k-fold CV error over lam in [0, 1] for one target column.

    The basis is shared across folds.
    """
    config = config or TuneConfig()
    t0 = time.perf_counter()
    phi = evaluate(basis, train.features)
    crit = CvCriterion(phi, train.targets[:, [target]], basis.H, k, seed)
    return _minimise(crit, 0, config, "cv", time.perf_counter() - t0)


def tune_cv_all(train: Dataset, basis: BasisEnsemble, k: int = 5, seed: int = 0,
                config: TuneConfig | None = None) -> list[TuneResult]:
    config = config or TuneConfig()
    t0 = time.perf_counter()
    phi = evaluate(basis, train.features)
    crit = CvCriterion(phi, train.targets, basis.H, k, seed)
    setup = time.perf_counter() - t0
    return [_minimise(crit, t, config, "cv", setup) for t in range(train.n_targets)]


@dataclass(frozen=True)
class BenchProtocol:
    H: int = 10
    M: int = 100
    outer_folds: int = 5
    inner_folds: int = 5
    seed: int = 0
    config: TuneConfig = TuneConfig()


@dataclass
class BenchRow:
    dataset_id: str
    test_err_cv: tuple[float, float]
    test_err_sure: tuple[float, float]
    time_cv: tuple[float, float]
    time_sure: tuple[float, float]
    lambda_cv: float
    lambda_sure: float

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset_id,
            "test_err_cv_mean": self.test_err_cv[0], "test_err_cv_std": self.test_err_cv[1],
            "test_err_sure_mean": self.test_err_sure[0], "test_err_sure_std": self.test_err_sure[1],
            "time_cv_mean": self.time_cv[0], "time_cv_std": self.time_cv[1],
            "time_sure_mean": self.time_sure[0], "time_sure_std": self.time_sure[1],
            "lambda_cv": self.lambda_cv, "lambda_sure": self.lambda_sure,
        }


BENCH_COLUMNS = list(BenchRow("", (0, 0), (0, 0), (0, 0), (0, 0), 0, 0).to_dict())


def write_bench_csv(rows, fh) -> None:
    w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r.to_dict())


def _test_error(wg, phi_tr, Y_tr, phi_te, Y_te, lambdas) -> float:
    errs = []
    for t, lam in enumerate(lambdas):
        path = LambdaPath.from_data(wg, phi_tr, Y_tr[:, t])
        pred = phi_te.T @ path.beta(lam)
        errs.append(np.mean((pred - Y_te[:, t]) ** 2))
    return float(np.mean(errs))


def bench_dataset(name: str, raw: Dataset, protocol: BenchProtocol) -> BenchRow:
    """Outer k-fold comparison of SURE and CV tuning on one dataset."""
    p = protocol
    res = {"sure": ([], [], []), "cv": ([], [], [])}
    for i, (tr, te) in enumerate(kfold_indices(raw.n, p.outer_folds, p.seed)):
        train, params = standardize(raw.subset(tr))
        test = params.apply(raw.subset(te))
        gamma = frequency_heuristic(train.features, p.seed + i)
        basis = sample_rff(train.d, p.H, p.M, gamma, p.seed + i)

        sure_res = tune_sure_all(train, basis, p.config)
        cv_res = tune_cv_all(train, basis, p.inner_folds, p.seed + i, p.config)

        phi_tr = evaluate(basis, train.features)
        phi_te = evaluate(basis, test.features)
        wg = whiten(compute_gram(phi_tr, train.targets, basis.H))
        for key, rs in (("sure", sure_res), ("cv", cv_res)):
            lams = [r.lambda_star for r in rs]
            res[key][0].append(_test_error(wg, phi_tr, train.targets, phi_te, test.targets, lams))
            # shared setup counted once, plus every per-output search
            setup = rs[0].wall_time - rs[0].search_time
            res[key][1].append(setup + sum(r.search_time for r in rs))
            res[key][2].append(float(np.mean(lams)))
        logger.info("%s fold %d: sure lam=%s cv lam=%s", name, i, res["sure"][2][-1], res["cv"][2][-1])

    def ms(v):
        return float(np.mean(v)), float(np.std(v))

    return BenchRow(name, ms(res["cv"][0]), ms(res["sure"][0]), ms(res["cv"][1]), ms(res["sure"][1]),
                    float(np.mean(res["cv"][2])), float(np.mean(res["sure"][2])))


def benchmark(datasets: Mapping[str, Dataset], protocol: BenchProtocol | None = None) -> list[BenchRow]:
    """One :class:`BenchRow` per dataset; raw datasets are standardized per split."""
    protocol = protocol or BenchProtocol()
    return [bench_dataset(name, raw, protocol) for name, raw in datasets.items()]
