"""Empirical Gram structures and the block-whitened matrix P.

Every solve, smoother and degrees-of-freedom computation in the package goes
through the eigendecomposition of

    P = D^{-1/2} G D^{-1/2},

where G = (1/N) Phi Phi^T is the full Gram matrix and D its block diagonal
(one H x H block per ensemble member).  In these coordinates the NCL system
matrix ``M(1-lam) D + lam G`` becomes ``D^{1/2} (M(1-lam) I + lam P) D^{1/2}``,
so its (pseudo-)inverse is a diagonal filter on the eigenvalues of P.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS = np.finfo(float).eps


class RankDeficientError(ValueError):
    """A member's own Gram block is singular (a redundant feature)."""


@dataclass(frozen=True, eq=False)
class GramBundle:
    gram_full: np.ndarray   # (Q, Q)
    diag_blocks: np.ndarray  # (M, H, H)
    phi_y: np.ndarray        # (Q,)
    n: int

    @property
    def M(self) -> int:
        return self.diag_blocks.shape[0]

    @property
    def H(self) -> int:
        return self.diag_blocks.shape[1]

    @property
    def Q(self) -> int:
        return self.gram_full.shape[0]

    def diag_full(self) -> np.ndarray:
        """Dense block-diagonal matrix D (Q x Q)."""
        D = np.zeros_like(self.gram_full)
        H = self.H
        for m in range(self.M):
            D[m * H:(m + 1) * H, m * H:(m + 1) * H] = self.diag_blocks[m]
        return D


def target_moment(phi: np.ndarray, y) -> np.ndarray:
    """``(1/N) Phi y`` for a target vector (or N x T matrix)."""
    y = np.asarray(y, dtype=float)
    if y.shape[0] != phi.shape[1]:
        raise ValueError(f"y has {y.shape[0]} rows, Phi has {phi.shape[1]} columns")
    return phi @ y / phi.shape[1]


def _check_blocks(blocks: np.ndarray) -> np.ndarray:
    evals = np.linalg.eigvalsh(blocks)  # ascending, (M, H)
    H = blocks.shape[1]
    for m, ev in enumerate(evals):
        if not ev[0] > H * EPS * max(ev[-1], 0.0):
            raise RankDeficientError(
                f"Gram block of member {m} is rank deficient "
                f"(smallest eigenvalue {ev[0]:.3e}, largest {ev[-1]:.3e})")
    return evals


def compute_gram(phi: np.ndarray, y, H: int) -> GramBundle:
    """Build G = (1/N) Phi Phi^T, its member blocks and (1/N) Phi y.

    ``phi`` is the (Q, N) feature matrix with members stacked in blocks of
    ``H`` rows.  Fails with :class:`RankDeficientError` when any member's
    block is singular.
    """
    phi = np.asarray(phi, dtype=float)
    Q, N = phi.shape
    if H < 1 or Q % H:
        raise ValueError(f"Q={Q} is not a multiple of H={H}")
    M = Q // H
    G = phi @ phi.T / N
    G = 0.5 * (G + G.T)
    blocks = np.stack([G[m * H:(m + 1) * H, m * H:(m + 1) * H] for m in range(M)])
    _check_blocks(blocks)
    return GramBundle(G, blocks, target_moment(phi, y), N)


def filter_factors(rho: np.ndarray, lam: float, M: int) -> np.ndarray:
    """Eigen-filter ``1 / (M(1-lam) + lam*rho)``, with 0 where that is 0.

    The zero branch only triggers at ``lam == 1`` on the null space of P and
    implements the pseudo-inverse there.
    """
    denom = M * (1.0 - lam) + lam * np.asarray(rho, dtype=float)
    out = np.zeros_like(denom)
    pos = denom > 0
    out[pos] = 1.0 / denom[pos]
    return out


def check_lambda(lam: float) -> float:
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    return lam


@dataclass(frozen=True, eq=False)
class WhitenedGram:
    p_matrix: np.ndarray         # (Q, Q)
    eigenvalues: np.ndarray      # (Q,), descending, exact zeros below tol
    eigenvectors: np.ndarray     # (Q, Q), columns match eigenvalues
    whitener_blocks: np.ndarray  # (M, H, H), symmetric inverse square roots
    rank_p: int
    tol: float

    @property
    def M(self) -> int:
        return self.whitener_blocks.shape[0]

    @property
    def H(self) -> int:
        return self.whitener_blocks.shape[1]

    @property
    def Q(self) -> int:
        return self.p_matrix.shape[0]

    def whiten_rows(self, A: np.ndarray) -> np.ndarray:
        """Left-multiply by the block-diagonal whitener W = D^{-1/2}.

        ``A`` has Q rows (any trailing shape).
        """
        A = np.asarray(A, dtype=float)
        tail = A.shape[1:]
        Ab = A.reshape(self.M, self.H, -1)
        return np.einsum("mij,mjk->mik", self.whitener_blocks, Ab).reshape((self.Q,) + tail)

    def filter(self, lam: float) -> np.ndarray:
        return filter_factors(self.eigenvalues, check_lambda(lam), self.M)

    def solve(self, rhs: np.ndarray, lam: float) -> np.ndarray:
        """``(M(1-lam) D + lam G)^+ rhs`` through the whitened eigenbasis."""
        V = self.eigenvectors
        z = V.T @ self.whiten_rows(rhs)
        g = self.filter(lam)
        z = z * (g if z.ndim == 1 else g[:, None])
        return self.whiten_rows(V @ z)

    def system_pinv(self, lam: float) -> np.ndarray:
        """Dense Q x Q ``(M(1-lam) D + lam G)^+`` (whitened route)."""
        V = self.eigenvectors
        core = (V * self.filter(lam)) @ V.T
        return self.whiten_rows(self.whiten_rows(core).T).T


def whiten(g: GramBundle) -> WhitenedGram:
    """Whiten each member block and eigendecompose the resulting P."""
    M, H = g.M, g.H
    evals, evecs = np.linalg.eigh(g.diag_blocks)
    for m in range(M):
        if not evals[m, 0] > H * EPS * max(evals[m, -1], 0.0):
            raise RankDeficientError(f"Gram block of member {m} is rank deficient")
    W = np.einsum("mij,mj,mkj->mik", evecs, 1.0 / np.sqrt(evals), evecs)
    W = 0.5 * (W + np.transpose(W, (0, 2, 1)))

    G4 = g.gram_full.reshape(M, H, M, H)
    P = np.einsum("lia,lamb->limb", W, G4)
    P = np.einsum("limb,mbk->limk", P, W).reshape(g.Q, g.Q)
    P = 0.5 * (P + P.T)

    rho, V = np.linalg.eigh(P)
    rho, V = rho[::-1].copy(), V[:, ::-1].copy()
    tol = g.Q * EPS * max(rho[0], 0.0)
    rho[rho <= tol] = 0.0
    rank = int(np.count_nonzero(rho))
    return WhitenedGram(P, rho, V, W, rank, float(tol))


def dump_spectrum(wg: WhitenedGram, path) -> None:
    """Write the eigenvalues of P to a two-column CSV (index, rho)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("q,rho\n")
        for q, r in enumerate(wg.eigenvalues):
            fh.write(f"{q},{r!r}\n")
