"""Monte-Carlo degrees of freedom for black-box estimators.

An estimator is any callable mapping a target vector (over a fixed design)
to its fitted values at the design points.  Probing it with a Gaussian
perturbation ``b`` gives the unbiased-in-the-limit estimate

    df ~ b^T (fit(y + eps b) - fit(y)) / eps,

which is exact in expectation for linear smoothers at any ``eps``.  For
nonlinear estimators the limit needs a smooth fit map; non-smooth training
pipelines (early stopping, clipping) give a finite-difference estimate with
no such guarantee.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .gram import compute_gram, whiten

EstimatorOracle = Callable[[np.ndarray], np.ndarray]


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class McDfEstimate:
    value: float
    epsilon: float
    repeats: int
    per_repeat: np.ndarray
    std_error: float


def estimate_df(oracle: EstimatorOracle, y, epsilon: float = 1e-3, repeats: int = 50,
                seed: int = 0, n_jobs: int = 1) -> McDfEstimate:
    """Average of ``repeats`` independent probes of the oracle's divergence.

    Probe ``r`` draws its Gaussian vector from its own child stream of
    ``seed``, so results do not depend on evaluation order or ``n_jobs``.
    The base fit ``oracle(y)`` is computed once.  Use ``n_jobs > 1`` only
    with oracles that are safe to call from several threads.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    y = np.asarray(y, dtype=float)
    try:
        base = np.asarray(oracle(y), dtype=float)
    except Exception as exc:
        raise OracleError(f"oracle failed on the unperturbed targets: {exc}") from exc
    streams = np.random.SeedSequence(seed).spawn(repeats)

    def probe(r: int) -> float:
        b = np.random.default_rng(streams[r]).standard_normal(y.shape[0])
        try:
            moved = np.asarray(oracle(y + epsilon * b), dtype=float)
        except Exception as exc:
            raise OracleError(f"oracle failed on repeat {r}: {exc}") from exc
        return float(b @ (moved - base) / epsilon)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            vals = np.array(list(pool.map(probe, range(repeats))))
    else:
        vals = np.array([probe(r) for r in range(repeats)])
    se = float(vals.std(ddof=1) / np.sqrt(repeats)) if repeats > 1 else 0.0
    return McDfEstimate(float(vals.mean()), float(epsilon), repeats, vals, se)


def ncl_oracle(phi: np.ndarray, H: int, lam: float) -> EstimatorOracle:
    """Closed-form NCL fit on a fixed feature matrix, as an oracle.

    The whitening depends only on the design, so it is built once here.
    """
    wg = whiten(compute_gram(phi, np.zeros(phi.shape[1]), H))
    phi_t = phi.T
    n = phi.shape[1]

    def fit_values(y):
        return phi_t @ wg.solve(phi @ y / n, lam)

    return fit_values


def linear_smoother_oracle(S: np.ndarray) -> EstimatorOracle:
    S = np.asarray(S, dtype=float)
    return lambda y: S @ y
