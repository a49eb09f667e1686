"""Effective degrees of freedom of NCL ensembles and Stein's risk estimate.

With ``rho`` the eigenvalues of the whitened Gram matrix P,

    df(lam) = sum_q rho_q / (M(1-lam) + lam rho_q),

which runs from H at lam=0 to rank(G) at lam=1, increasing and convex.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gram import GramBundle, WhitenedGram, check_lambda
from .ncl import LambdaPath


def _spectral_terms(rho, lam: float, M: int):
    rho = np.asarray(rho, dtype=float)
    lam = check_lambda(lam)
    denom = M * (1.0 - lam) + lam * rho
    live = (rho > 0) & (denom > 0)
    return rho[live], denom[live]


def df_spectral(rho, lam: float, M: int) -> float:
    """Degrees of freedom from the spectrum of P.

    Zero eigenvalues contribute nothing (at ``lam=1`` each positive
    eigenvalue contributes exactly 1).
    """
    r, den = _spectral_terms(rho, lam, M)
    return float(np.sum(r / den))


def df_derivative(rho, lam: float, M: int) -> float:
    """d df / d lam = sum rho (M - rho) / (M(1-lam) + lam rho)^2 >= 0."""
    r, den = _spectral_terms(rho, lam, M)
    return float(np.sum(r * (M - r) / den ** 2))


def df_second_derivative(rho, lam: float, M: int) -> float:
    r, den = _spectral_terms(rho, lam, M)
    return float(np.sum(r * (M - r) ** 2 / den ** 3))


def df_analytic(wg: WhitenedGram, g: GramBundle, lam: float) -> float:
    """``trace(G (M(1-lam) D + lam G)^+)`` with the inverse formed densely."""
    A_pinv = wg.system_pinv(check_lambda(lam))
    # trace(G A) = sum_ij G_ij A_ji, and both are symmetric
    return float(np.sum(g.gram_full * A_pinv))


def noise_variance(residuals, h: int, n: int | None = None) -> float:
    """Noise variance estimate ``sum(r^2) / (N - H)`` from the lam=0 residuals.

    The lam=0 ensemble has exactly H degrees of freedom, so this is the usual
    residual-variance estimate with the df correction.
    """
    r = np.asarray(residuals, dtype=float)
    n = r.shape[0] if n is None else int(n)
    if n <= h:
        raise ValueError(f"noise variance needs N > H (N={n}, H={h})")
    return float(np.sum(r * r) / (n - h))


def sure(emp_err: float, df: float, sigma_tilde_sq: float, n: int) -> float:
    """Stein's unbiased risk estimate ``R_emp + s2 * (2 df / N - 1)``.

    Unbiased for the true error under Gaussian noise with variance ``s2``;
    with other noise distributions it is only a heuristic.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return emp_err + sigma_tilde_sq * (2.0 * df / n - 1.0)


@dataclass(frozen=True)
class SureReport:
    lam: float
    emp_err: float
    df: float
    sigma_tilde_sq: float
    sure_value: float


def sure_report(path: LambdaPath, lam: float, sigma_tilde_sq: float, n: int) -> SureReport:
    e = path.emp_err(lam)
    d = path.df(lam)
    return SureReport(lam, e, d, sigma_tilde_sq, sure(e, d, sigma_tilde_sq, n))


def default_grid(n_uniform: int = 101, near_one: range = range(2, 13)) -> np.ndarray:
    """Uniform grid on [0, 1] refined with ``1 - 10**-l`` points near one."""
    pts = np.concatenate([np.linspace(0.0, 1.0, n_uniform), 1.0 - 10.0 ** -np.asarray(list(near_one), float)])
    return np.unique(pts)


@dataclass(frozen=True, eq=False)
class DfCurve:
    lambdas: np.ndarray
    df: np.ndarray
    emp_err: np.ndarray
    sure: np.ndarray | None = None

    def rows(self):
        s = self.sure if self.sure is not None else [None] * len(self.lambdas)
        return zip(self.lambdas, self.df, self.emp_err, s)

    def write_csv(self, path_or_file) -> None:
        own = isinstance(path_or_file, (str, Path))
        fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "df", "emp_err", "sure"])
            for lam, d, e, s in self.rows():
                w.writerow([repr(float(lam)), repr(float(d)), repr(float(e)),
                            "" if s is None else repr(float(s))])
        finally:
            if own:
                fh.close()


def df_curve(wg: WhitenedGram, g: GramBundle, y, grid=None, sigma_tilde_sq: float | None = None) -> DfCurve:
    """Degrees of freedom, training error and optionally SURE along a grid."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-D sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly ascending")
    for lam in (grid[0], grid[-1]):
        check_lambda(lam)
    y = np.asarray(y, dtype=float)
    path = LambdaPath(wg, g.phi_y, float(y @ y) / y.shape[0])
    dfs = np.array([df_spectral(wg.eigenvalues, lam, wg.M) for lam in grid])
    errs = np.array([path.emp_err(lam) for lam in grid])
    sures = None
    if sigma_tilde_sq is not None:
        sures = np.array([sure(e, d, sigma_tilde_sq, g.n) for e, d in zip(errs, dfs)])
    return DfCurve(grid, dfs, errs, sures)
