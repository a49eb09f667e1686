"""Closed-form negative correlation learning over fixed bases.

For a diversity parameter ``lam`` in [0, 1] the ensemble minimising the
averaged NCL loss has combination coefficients

    beta = (M(1-lam) D + lam G)^+ (1/N) Phi y,

with member weights ``w = M * beta``.  The fitted values are a linear
smoother of the targets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import BasisEnsemble, evaluate
from .data import StandardizationParams
from .gram import GramBundle, WhitenedGram, check_lambda, filter_factors

SMOOTHER_MAX_N = 5000


@dataclass(frozen=True, eq=False)
class FittedEnsemble:
    lam: float
    beta: np.ndarray
    H: int
    M: int
    basis_ref: str | None = None

    def __post_init__(self):
        check_lambda(self.lam)
        beta = np.array(self.beta, dtype=float)
        if beta.shape != (self.H * self.M,):
            raise ValueError(f"beta has shape {beta.shape}, expected ({self.H * self.M},)")
        beta.flags.writeable = False
        object.__setattr__(self, "beta", beta)

    @property
    def member_weights(self) -> np.ndarray:
        """Per-member weight vectors ``w_m``, shape (M, H)."""
        return (self.M * self.beta).reshape(self.M, self.H)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "H": self.H, "M": self.M,
                "basis_ref": self.basis_ref, "beta": self.beta.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "FittedEnsemble":
        return cls(float(d["lambda"]), np.asarray(d["beta"], dtype=float),
                   int(d["H"]), int(d["M"]), d.get("basis_ref"))


def fit(wg: WhitenedGram, g: GramBundle, lam: float, basis_ref: str | None = None) -> FittedEnsemble:
    """Minimiser of the averaged NCL loss at diversity ``lam``."""
    lam = check_lambda(lam)
    beta = wg.solve(g.phi_y, lam)
    return FittedEnsemble(lam, beta, wg.H, wg.M, basis_ref)


def predict(fe: FittedEnsemble, basis: BasisEnsemble, X) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(ensemble_preds, member_preds)`` with shapes (N',) and (M, N')."""
    if (basis.H, basis.M) != (fe.H, fe.M):
        raise ValueError(f"basis is H={basis.H}, M={basis.M}; model is H={fe.H}, M={fe.M}")
    if fe.basis_ref is not None and fe.basis_ref != basis.fingerprint:
        raise ValueError("model was fitted with a different basis")
    phi = evaluate(basis, X)
    return predict_from_features(fe, phi)


def predict_from_features(fe: FittedEnsemble, phi: np.ndarray):
    phi_b = phi.reshape(fe.M, fe.H, -1)
    members = np.einsum("mh,mhn->mn", fe.member_weights, phi_b)
    return members.mean(axis=0), members


@dataclass(frozen=True, eq=False)
class SmootherMatrix:
    s: np.ndarray
    lam: float

    @property
    def trace(self) -> float:
        return float(np.trace(self.s))


def smoother_matrix(wg: WhitenedGram, phi: np.ndarray, lam: float) -> SmootherMatrix:
    """Dense N x N smoother ``(1/N) Phi^T (M(1-lam) D + lam G)^+ Phi``.

    Diagnostic only; guarded to N <= 5000.
    """
    lam = check_lambda(lam)
    N = phi.shape[1]
    if N > SMOOTHER_MAX_N:
        raise ValueError(f"N={N} exceeds the smoother size guard ({SMOOTHER_MAX_N})")
    T = wg.whiten_rows(phi).T @ wg.eigenvectors
    S = (T * wg.filter(lam)) @ T.T / N
    return SmootherMatrix(0.5 * (S + S.T), lam)


class LambdaPath:
    """Fits of one target vector across many ``lam`` values at O(Q) each.

    With ``z = V^T W (1/N) Phi y`` the coefficients are ``W V (g * z)`` where
    ``g`` is the eigen-filter, and the training error reduces to

        R_emp = |y|^2/N - 2 sum g z^2 + sum rho g^2 z^2.
    """

    def __init__(self, wg: WhitenedGram, phi_y: np.ndarray, y_sq_mean: float):
        self.wg = wg
        self.z = wg.eigenvectors.T @ wg.whiten_rows(phi_y)
        self.y_sq_mean = float(y_sq_mean)

    @classmethod
    def from_data(cls, wg: WhitenedGram, phi: np.ndarray, y) -> "LambdaPath":
        y = np.asarray(y, dtype=float)
        return cls(wg, phi @ y / phi.shape[1], float(y @ y) / y.shape[0])

    def beta(self, lam: float) -> np.ndarray:
        return self.wg.whiten_rows(self.wg.eigenvectors @ (self.wg.filter(lam) * self.z))

    def emp_err(self, lam: float) -> float:
        g = self.wg.filter(lam)
        rho = self.wg.eigenvalues
        z2 = self.z ** 2
        val = self.y_sq_mean - 2.0 * np.sum(g * z2) + np.sum(rho * g * g * z2)
        return float(max(val, 0.0))

    def df(self, lam: float) -> float:
        from .dof import df_spectral
        return df_spectral(self.wg.eigenvalues, lam, self.wg.M)


def ncl_loss(member_preds, y, lam: float) -> float:
    """NCL loss: average member error minus ``lam`` times diversity."""
    f = np.asarray(member_preds, dtype=float)
    F = f.mean()
    return float(np.mean((f - y) ** 2) - lam * np.mean((f - F) ** 2))


def ncl_loss_blended(member_preds, y, lam: float) -> float:
    """Same loss written as a blend of individual and combined accuracy."""
    f = np.asarray(member_preds, dtype=float)
    return float((1.0 - lam) * np.mean((f - y) ** 2) + lam * (f.mean() - y) ** 2)


@dataclass(frozen=True)
class DecompositionReport:
    ensemble_error: float
    average_member_error: float
    diversity: float


def ambiguity(member_preds, y) -> DecompositionReport:
    """Split the ensemble's squared error into member error minus diversity."""
    f = np.asarray(member_preds, dtype=float)
    F = f.mean()
    return DecompositionReport(float((F - y) ** 2), float(np.mean((f - y) ** 2)),
                               float(np.mean((f - F) ** 2)))


def _mse(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def emp_error(preds, y) -> float:
    return _mse(preds, y)


def true_error(preds, mu_values) -> float:
    return _mse(preds, mu_values)


@dataclass(frozen=True, eq=False)
class ModelBundle:
    """Everything needed to predict without the training data."""

    basis: BasisEnsemble
    models: tuple[FittedEnsemble, ...]
    params: StandardizationParams
    feature_names: tuple[str, ...]
    target_names: tuple[str, ...]

    def predict_raw(self, X_raw) -> np.ndarray:
        """Predictions in original target units, shape (N', T)."""
        Xs = self.params.transform_features(X_raw)
        phi = evaluate(self.basis, Xs)
        Ys = np.column_stack([predict_from_features(fe, phi)[0] for fe in self.models])
        return self.params.inverse_targets(Ys)

    def to_dict(self) -> dict:
        return {
            "format": "ncldof-model/1",
            "Q": self.basis.Q,
            "basis": self.basis.to_dict(),
            "models": [m.to_dict() for m in self.models],
            "standardization": self.params.to_dict(),
            "feature_names": list(self.feature_names),
            "target_names": list(self.target_names),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "ModelBundle":
        d = json.loads(Path(path).read_text())
        return cls(BasisEnsemble.from_dict(d["basis"]),
                   tuple(FittedEnsemble.from_dict(m) for m in d["models"]),
                   StandardizationParams.from_dict(d["standardization"]),
                   tuple(d["feature_names"]), tuple(d["target_names"]))


__all__ = [
    "FittedEnsemble", "SmootherMatrix", "DecompositionReport", "LambdaPath", "ModelBundle",
    "fit", "predict", "predict_from_features", "smoother_matrix", "ncl_loss",
    "ncl_loss_blended", "ambiguity", "emp_error", "true_error", "filter_factors",
]
