"""Noise-redraw studies on a fixed design.

The design points stay fixed while the noise is redrawn ``k_draws`` times.
For every draw and every lam on a grid we record the true error (against
the noiseless function) and SURE with the known noise level.  This gives

* an unbiasedness check of SURE (its mean should match the mean true error),
* the location of the best lam for expected true error, which is strictly
  below 1 whenever there is noise, and 1 when there is none.

At lam = 1 the slope of the expected true error is
``(2 sigma^2 / N) * sum_{rho > 0} 1 / rho``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .basis import BasisEnsemble, evaluate
from .data import SynthDataset, SynthSpec, synthesize
from .dof import default_grid, df_spectral, sure
from .gram import WhitenedGram, compute_gram, whiten

TIE_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class Theorem6Report:
    sigma: float
    k_draws: int
    lambdas: np.ndarray
    mean_true_err: np.ndarray
    se_true_err: np.ndarray
    mean_sure: np.ndarray
    se_sure_gap: np.ndarray   # std error of the paired (SURE - true error) differences
    lambda_best: float
    derivative_at_one: float
    expected_true_err: np.ndarray  # exact E[R_true] from the smoother

    def true_err_map(self) -> dict[float, tuple[float, float]]:
        return {float(l): (float(m), float(s)) for l, m, s in
                zip(self.lambdas, self.mean_true_err, self.se_true_err)}

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "k_draws": self.k_draws,
            "lambdas": self.lambdas.tolist(),
            "mean_true_err": self.mean_true_err.tolist(),
            "se_true_err": self.se_true_err.tolist(),
            "mean_sure": self.mean_sure.tolist(),
            "se_sure_gap": self.se_sure_gap.tolist(),
            "expected_true_err": self.expected_true_err.tolist(),
            "lambda_best": self.lambda_best,
            "derivative_at_one": self.derivative_at_one,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def derivative_at_one(rho, sigma: float, n: int) -> float:
    """Slope of expected true error at lam = 1; positive eigenvalues only."""
    rho = np.asarray(rho, dtype=float)
    return float(2.0 * sigma ** 2 / n * np.sum(1.0 / rho[rho > 0]))


def theorem6_grid() -> np.ndarray:
    return default_grid(21, range(2, 13))


def argmin_prefer_larger(values: np.ndarray, lambdas: np.ndarray) -> float:
    """Grid argmin; values within a relative 1e-10 of the minimum count as ties
    and the largest tied lam wins (roundoff separates lam = 1 - 1e-12 from 1)."""
    vmin = float(np.min(values))
    tied = values <= vmin + TIE_RTOL * max(abs(vmin), 1e-300)
    return float(np.max(lambdas[tied]))


def _smoother_parts(wg: WhitenedGram, phi: np.ndarray):
    T = wg.whiten_rows(phi).T @ wg.eigenvectors  # (N, Q); S = T diag(g) T^T / N
    return T


def expected_true_error(wg: WhitenedGram, phi: np.ndarray, mu: np.ndarray, sigma: float, lam: float) -> float:
    """``(1/N) |(I - S) mu|^2 + sigma^2 trace(S^2) / N`` for the lam-smoother."""
    n = phi.shape[1]
    T = _smoother_parts(wg, phi)
    g = wg.filter(lam)
    fit_mu = T @ (g * (T.T @ mu)) / n
    # eigenvalues of S are rho * g
    s_eig = wg.eigenvalues * g
    return float(np.mean((fit_mu - mu) ** 2) + sigma ** 2 * np.sum(s_eig ** 2) / n)


def noise_redraw_study(synth: SynthDataset, basis: BasisEnsemble, sigma: float, lambda_grid=None,
                       k_draws: int = 200, seed: int = 0) -> Theorem6Report:
    X = synth.dataset.features
    mu = np.asarray(synth.mu_values, dtype=float)
    n = X.shape[0]
    lambdas = theorem6_grid() if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    phi = evaluate(basis, X)
    wg = whiten(compute_gram(phi, mu, basis.H))
    T = _smoother_parts(wg, phi)
    filters = np.stack([wg.filter(l) for l in lambdas])            # (L, Q)
    dfs = np.array([df_spectral(wg.eigenvalues, l, wg.M) for l in lambdas])

    streams = np.random.SeedSequence(seed).spawn(k_draws)
    true_err = np.empty((k_draws, lambdas.size))
    sure_val = np.empty_like(true_err)
    for k in range(k_draws):
        y = mu + sigma * np.random.default_rng(streams[k]).standard_normal(n)
        z = T.T @ y / n                                              # (Q,)
        fits = (filters * z) @ T.T                                   # (L, N)
        true_err[k] = np.mean((fits - mu) ** 2, axis=1)
        emp = np.mean((fits - y) ** 2, axis=1)
        sure_val[k] = [sure(e, d, sigma ** 2, n) for e, d in zip(emp, dfs)]

    root_k = np.sqrt(k_draws)
    mean_true = true_err.mean(axis=0)
    se_true = true_err.std(axis=0, ddof=1) / root_k
    gap = sure_val - true_err
    return Theorem6Report(
        sigma=float(sigma), k_draws=k_draws, lambdas=lambdas,
        mean_true_err=mean_true, se_true_err=se_true,
        mean_sure=sure_val.mean(axis=0), se_sure_gap=gap.std(axis=0, ddof=1) / root_k,
        lambda_best=argmin_prefer_larger(mean_true, lambdas),
        derivative_at_one=derivative_at_one(wg.eigenvalues, sigma, n),
        expected_true_err=np.array([expected_true_error(wg, phi, mu, sigma, l) for l in lambdas]),
    )


def run_theorem6(spec: SynthSpec, basis: BasisEnsemble, lambda_grid=None, k_draws: int = 200,
                 seed: int = 0) -> Theorem6Report:
    """Redraw the noise of ``spec``'s fixed design ``k_draws`` times.

    The design comes from ``synthesize(spec)``; only the noise is redrawn
    (at level ``spec.sigma``).
    """
    if k_draws < 50:
        raise ValueError("k_draws must be >= 50")
    synth = synthesize(spec)
    return noise_redraw_study(synth, basis, spec.sigma, lambda_grid, k_draws, seed)
