"""Random Fourier feature bases for the ensemble members.

Member ``m`` maps ``x`` to ``cos(zeta_m @ x + b_m)`` (H features).  Stacking
the M members gives the Q = H * M dimensional feature map used everywhere
else in the package.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

HEURISTIC_SUBSAMPLE = 1000


def frequency_heuristic(X, seed: int = 0) -> float:
    """Kernel frequency ``gamma = 1 / (2 * median_dist**2)``.

    The median is taken over all pairwise Euclidean distances of at most
    1000 points (a seeded subsample when N is larger).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise ValueError("frequency heuristic needs at least 2 points")
    if X.shape[0] > HEURISTIC_SUBSAMPLE:
        idx = np.random.default_rng(seed).choice(X.shape[0], HEURISTIC_SUBSAMPLE, replace=False)
        X = X[idx]
    med = float(np.median(pdist(X)))
    if med <= 0.0:
        raise ValueError("median pairwise distance is zero; points are (mostly) identical")
    return 1.0 / (2.0 * med * med)


@dataclass(frozen=True, eq=False)
class BasisEnsemble:
    """M blocks of H cosine features over R^d.

    ``zeta`` has shape (M, H, d) and ``b`` has shape (M, H).  Features use the
    Gaussian kernel convention ``k(x, y) = exp(-gamma * |x - y|^2)``.
    """

    zeta: np.ndarray
    b: np.ndarray
    gamma: float
    seed: int | None = None

    def __post_init__(self):
        zeta = np.array(self.zeta, dtype=float)
        b = np.array(self.b, dtype=float)
        if zeta.ndim != 3 or b.shape != zeta.shape[:2]:
            raise ValueError(f"inconsistent shapes zeta {zeta.shape}, b {b.shape}")
        zeta.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "b", b)

    @property
    def M(self) -> int:
        return self.zeta.shape[0]

    @property
    def H(self) -> int:
        return self.zeta.shape[1]

    @property
    def d(self) -> int:
        return self.zeta.shape[2]

    @property
    def Q(self) -> int:
        return self.H * self.M

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.zeta).tobytes())
        h.update(np.ascontiguousarray(self.b).tobytes())
        h.update(repr(float(self.gamma)).encode())
        return h.hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "gamma": float(self.gamma),
            "seed": self.seed,
            "M": self.M,
            "H": self.H,
            "d": self.d,
            "zeta": self.zeta.tolist(),
            "b": self.b.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BasisEnsemble":
        zeta = np.asarray(d["zeta"], dtype=float).reshape(d["M"], d["H"], d["d"])
        b = np.asarray(d["b"], dtype=float).reshape(d["M"], d["H"])
        return cls(zeta, b, float(d["gamma"]), d.get("seed"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "BasisEnsemble":
        return cls.from_dict(json.loads(Path(path).read_text()))


def sample_rff(d: int, H: int, M: int, gamma: float, seed: int) -> BasisEnsemble:
    """Sample frequencies ``N(0, 2*gamma)`` and phases ``U[0, 2*pi)``."""
    if min(d, H, M) < 1:
        raise ValueError("d, H and M must all be >= 1")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    rng = np.random.default_rng(seed)
    zeta = rng.normal(0.0, np.sqrt(2.0 * gamma), size=(M, H, d))
    b = rng.uniform(0.0, 2.0 * np.pi, size=(M, H))
    return BasisEnsemble(zeta, b, float(gamma), seed)


def evaluate(basis: BasisEnsemble, X) -> np.ndarray:
    """Feature matrix Phi of shape (Q, N); column n is the stacked phi(x_n).

    Row ``m*H + i`` holds feature i of member m.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :] if basis.d > 1 else X[:, None]
    if X.shape[1] != basis.d:
        raise ValueError(f"X has {X.shape[1]} columns, basis expects {basis.d}")
    arg = np.einsum("mhd,nd->mhn", basis.zeta, X) + basis.b[:, :, None]
    return np.cos(arg).reshape(basis.Q, X.shape[0])


def member_slices(H: int, M: int) -> list[slice]:
    return [slice(m * H, (m + 1) * H) for m in range(M)]
