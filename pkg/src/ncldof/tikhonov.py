"""Ridge regression on whitened member features.

Averaging M ridge-regressed members over the whitened bases
``psi_m(x) = <phi_m, phi_m>^{-1/2} phi_m(x)`` reproduces a scaled NCL
ensemble: with ``gamma = (1 - lam) / (M lam)`` the ridge ensemble equals
``lam * F_lam`` pointwise.  The ridge penalty falls as diversity rises.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisEnsemble, evaluate
from .data import Dataset
from .gram import EPS, WhitenedGram, compute_gram, whiten
from .ncl import fit, predict_from_features


@dataclass(frozen=True, eq=False)
class RidgeFit:
    gamma: float
    weights: np.ndarray
    basis_ref: str | None = None

    def predict(self, psi: np.ndarray) -> np.ndarray:
        return psi.T @ self.weights


def whitened_features(basis: BasisEnsemble, wg: WhitenedGram, X) -> np.ndarray:
    """Per-member whitened features, (Q, N'), without any 1/M factor."""
    if (basis.H, basis.M) != (wg.H, wg.M):
        raise ValueError("basis and whitened Gram disagree on H or M")
    return wg.whiten_rows(evaluate(basis, X))


def gamma_for_lambda(lam: float, M: int) -> float:
    """Ridge penalty matching diversity ``lam``: ``(1 - lam) / (M lam)``."""
    lam = float(lam)
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda must lie in (0, 1]; got {lam} (gamma diverges at 0)")
    return (1.0 - lam) / (M * lam)


def fit_ridge(psi_train: np.ndarray, y, gamma: float, basis_ref: str | None = None) -> RidgeFit:
    """Minimise ``mean((w^T psi - y)^2) + gamma |w|^2``.

    Solved in the eigenbasis of ``(1/N) psi psi^T``; at ``gamma = 0`` the
    null space is dropped (pseudo-inverse).
    """
    if not gamma >= 0:
        raise ValueError("gamma must be >= 0")
    psi = np.asarray(psi_train, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.shape[0] != psi.shape[1]:
        raise ValueError(f"psi has {psi.shape[1]} columns, y has {y.shape[0]} entries")
    n = psi.shape[1]
    C = psi @ psi.T / n
    evals, U = np.linalg.eigh(0.5 * (C + C.T))
    evals[evals <= C.shape[0] * EPS * max(evals[-1], 0.0)] = 0.0
    denom = gamma + evals
    inv = np.divide(1.0, denom, out=np.zeros_like(denom), where=denom > 0)
    w = U @ (inv * (U.T @ (psi @ y / n)))
    return RidgeFit(float(gamma), w, basis_ref)


def equivalence_check(dataset: Dataset, basis: BasisEnsemble, lambda_grid, probe=None,
                      n_probe: int = 64, seed: int = 0, target: int = 0) -> dict[float, float]:
    """Max relative gap between the ridge ensemble and ``lam * F_lam``.

    Both are evaluated on ``probe`` points (default: 64 fresh points drawn
    uniformly from the bounding box of the training features).  Returns
    ``{lam: max |G(x) - lam F(x)| / (1 + |lam F(x)|)}``.
    """
    X = dataset.features
    y = dataset.targets[:, target]
    if probe is None:
        rng = np.random.default_rng(seed)
        probe = rng.uniform(X.min(axis=0), X.max(axis=0), size=(n_probe, X.shape[1]))
    phi = evaluate(basis, X)
    g = compute_gram(phi, y, basis.H)
    wg = whiten(g)
    phi_probe = evaluate(basis, probe)
    M = basis.M
    # the ridge ensemble averages the M members: stacked features carry 1/M
    psi_train = wg.whiten_rows(phi) / M
    psi_probe = wg.whiten_rows(phi_probe) / M
    out = {}
    for lam in lambda_grid:
        lam = float(lam)
        F = predict_from_features(fit(wg, g, lam), phi_probe)[0]
        G = fit_ridge(psi_train, y, gamma_for_lambda(lam, M)).predict(psi_probe)
        out[lam] = float(np.max(np.abs(G - lam * F) / (1.0 + np.abs(lam * F))))
    return out
