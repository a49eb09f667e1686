"""Dataset ingestion, standardization, splitting and synthetic data."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)


class ConstantColumnError(ValueError):
    """Raised when a column has zero spread and cannot be standardized."""


@dataclass(frozen=True)
class Dataset:
    """Features ``X`` (N x d) and targets ``Y`` (N x T).

    The same container holds raw and standardized data; ``RawDataset`` is an
    alias used where the distinction matters to the reader.
    """

    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...] = ()
    target_names: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.array(self.features, dtype=float, copy=True)
        Y = np.array(self.targets, dtype=float, copy=True)
        if X.ndim == 1:
            X = X[:, None]
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.ndim != 2 or Y.ndim != 2:
            raise ValueError("features and targets must be 2-D")
        if X.shape[0] != Y.shape[0]:
            raise ValueError(f"row mismatch: {X.shape[0]} features vs {Y.shape[0]} targets")
        if X.shape[0] < 2:
            raise ValueError("a dataset needs at least 2 rows")
        if X.shape[1] < 1 or Y.shape[1] < 1:
            raise ValueError("need at least one feature and one target column")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("dataset contains non-finite values")
        X.flags.writeable = False
        Y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", Y)
        fn = tuple(self.feature_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        tn = tuple(self.target_names) or tuple(f"y{j}" for j in range(Y.shape[1]))
        if len(fn) != X.shape[1] or len(tn) != Y.shape[1]:
            raise ValueError("column names do not match array widths")
        object.__setattr__(self, "feature_names", fn)
        object.__setattr__(self, "target_names", tn)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_targets(self) -> int:
        return self.targets.shape[1]

    @property
    def y(self) -> np.ndarray:
        """First target column as a vector (the common single-output case)."""
        return self.targets[:, 0]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.features[idx], self.targets[idx], self.feature_names, self.target_names)


RawDataset = Dataset


@dataclass(frozen=True)
class StandardizationParams:
    feature_means: np.ndarray
    feature_stds: np.ndarray
    target_means: np.ndarray
    target_stds: np.ndarray

    def apply(self, ds: Dataset) -> Dataset:
        X = (ds.features - self.feature_means) / self.feature_stds
        Y = (ds.targets - self.target_means) / self.target_stds
        return Dataset(X, Y, ds.feature_names, ds.target_names)

    def transform_features(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.feature_means) / self.feature_stds

    def inverse_targets(self, Y: np.ndarray) -> np.ndarray:
        return np.asarray(Y, dtype=float) * self.target_stds + self.target_means

    def inverse(self, ds: Dataset) -> Dataset:
        X = ds.features * self.feature_stds + self.feature_means
        return Dataset(X, self.inverse_targets(ds.targets), ds.feature_names, ds.target_names)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in
                ("feature_means", "feature_stds", "target_means", "target_stds")}

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizationParams":
        return cls(**{k: np.asarray(d[k], dtype=float) for k in
                      ("feature_means", "feature_stds", "target_means", "target_stds")})


def _column_stats(A: np.ndarray, names: Sequence[str]):
    mean = A.mean(axis=0)
    std = A.std(axis=0)  # population std (ddof=0)
    for j, s in enumerate(std):
        # relative cutoff so that e.g. [1e9, 1e9, 1e9] is caught despite roundoff
        if not s > 1e-14 * max(1.0, abs(mean[j])):
            raise ConstantColumnError(f"constant column {names[j]!r} cannot be standardized")
    return mean, std


def standardize(raw: Dataset) -> tuple[Dataset, StandardizationParams]:
    """Center every column to mean 0 and scale to population std 1.

    Returns the standardized dataset and the parameters needed to apply the
    same map to held-out data or to invert it.
    """
    fm, fs = _column_stats(raw.features, raw.feature_names)
    tm, ts = _column_stats(raw.targets, raw.target_names)
    params = StandardizationParams(fm, fs, tm, ts)
    return params.apply(raw), params


def _select_targets(header: list[str], target_columns) -> list[int]:
    if isinstance(target_columns, (str, int)):
        target_columns = [target_columns]
    target_columns = list(target_columns)
    if not target_columns:
        raise ValueError("empty target selection")
    idx = []
    for c in target_columns:
        if isinstance(c, (int, np.integer)) and not isinstance(c, bool):
            if not -len(header) <= c < len(header):
                raise ValueError(f"target index {c} out of range for {len(header)} columns")
            idx.append(int(c) % len(header))
        else:
            if c not in header:
                raise ValueError(f"unknown target column {c!r}")
            idx.append(header.index(c))
    if len(set(idx)) != len(idx):
        raise ValueError("duplicate target selection")
    return idx


def _parse(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def load_csv(path, target_columns, drop_nonfinite: bool = False) -> Dataset:
    """Read a comma-separated file with a header row.

    ``target_columns`` is a column name, a 0-based index (negative counts
    from the end), or a list of either.  All remaining columns that are
    numeric become features, in file order; non-target columns with no
    numeric cell at all (ids, labels) are skipped.  Empty or non-finite cells raise unless ``drop_nonfinite``
    is set, in which case the offending rows are dropped.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise ValueError(f"{path}: row {i + 2} has {len(r)} cells, header has {len(header)}")
    tidx = _select_targets(header, target_columns)

    parsed = [[_parse(c.strip()) if c.strip() else math.nan for c in r] for r in body]
    keep = []
    for j in range(len(header)):
        col = [row[j] for row in parsed]
        bad = [i for i, v in enumerate(col) if v is None]
        if j in tidx:
            if bad:
                raise ValueError(f"{path}: non-numeric cell in target column {header[j]!r} (row {bad[0] + 2})")
        elif bad:
            if len(bad) == len(col):
                logger.info("skipping non-numeric column %r", header[j])
                continue
            raise ValueError(f"{path}: non-numeric cell in column {header[j]!r} (row {bad[0] + 2})")
        keep.append(j)
    fidx = [j for j in keep if j not in tidx]
    if not fidx:
        raise ValueError(f"{path}: no numeric feature columns")

    A = np.array([[row[j] for j in range(len(header))] for row in parsed], dtype=float)
    A = A.reshape(len(parsed), len(header))
    finite = np.all(np.isfinite(A[:, fidx + tidx]), axis=1)
    if not finite.all():
        if not drop_nonfinite:
            first = int(np.flatnonzero(~finite)[0])
            raise ValueError(f"{path}: missing or non-finite value in row {first + 2}")
        logger.warning("dropping %d rows with non-finite values", int((~finite).sum()))
        A = A[finite]
    return Dataset(A[:, fidx], A[:, tidx],
                   tuple(header[j] for j in fidx), tuple(header[j] for j in tidx))


def load_features(path, feature_names: Sequence[str]) -> np.ndarray:
    """Read the named columns of a CSV file as an (N, d) feature matrix.

    Extra columns are ignored, so a training file can be passed as is.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    missing = [n for n in feature_names if n not in header]
    if missing:
        raise ValueError(f"{path}: missing feature column(s) {', '.join(map(repr, missing))}")
    idx = [header.index(n) for n in feature_names]
    out = np.empty((len(rows) - 1, len(idx)))
    for i, r in enumerate(rows[1:]):
        for k, j in enumerate(idx):
            v = _parse(r[j].strip()) if j < len(r) else None
            if v is None or not math.isfinite(v):
                raise ValueError(f"{path}: bad value in column {header[j]!r} (row {i + 2})")
            out[i, k] = v
    return out


def split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Shuffle, then cut off ``round(N * test_fraction)`` rows as a test set."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n_test = int(round(ds.n * test_fraction))
    n_test = min(max(n_test, 1), ds.n - 2)
    if n_test < 1:
        raise ValueError(f"cannot split {ds.n} rows into >=2 train and >=1 test")
    perm = np.random.default_rng(seed).permutation(ds.n)
    return ds.subset(np.sort(perm[n_test:])), ds.subset(np.sort(perm[:n_test]))


def kfold_indices(n: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    if not 2 <= k <= n:
        raise ValueError(f"k must satisfy 2 <= k <= N={n}, got {k}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    out = []
    for i, val in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        out.append((np.sort(train), np.sort(val)))
    return out


def kfold(ds: Dataset, k: int, seed: int) -> list[tuple[Dataset, Dataset]]:
    """k (train, validation) pairs; validation sets partition the rows."""
    return [(ds.subset(tr), ds.subset(va)) for tr, va in kfold_indices(ds.n, k, seed)]


# ground-truth functions for synthetic data, keyed by id
def _mu_sinusoid(X):
    return np.sin(3.0 * X).sum(axis=1) + 0.5 * np.cos(7.0 * X[:, 0])


def _mu_linear(X):
    return X @ np.linspace(1.0, -1.0, X.shape[1]) if X.shape[1] > 1 else 2.0 * X[:, 0]


MU_FUNCTIONS = {"sinusoid": _mu_sinusoid, "linear": _mu_linear}


@dataclass(frozen=True)
class SynthSpec:
    n: int
    d: int
    mu: str = "sinusoid"
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.d < 1:
            raise ValueError("need n >= 2 and d >= 1")
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")
        if self.mu not in MU_FUNCTIONS:
            raise ValueError(f"unknown mu {self.mu!r}; choose from {sorted(MU_FUNCTIONS)}")


@dataclass(frozen=True)
class SynthDataset:
    dataset: Dataset
    mu_values: np.ndarray
    sigma: float
    spec: SynthSpec | None = field(default=None, compare=False)

    def with_noise(self, noise: np.ndarray) -> "SynthDataset":
        """Same fixed design, targets ``mu + noise``."""
        ds = self.dataset
        y = self.mu_values + np.asarray(noise, dtype=float)
        return SynthDataset(Dataset(ds.features, y, ds.feature_names, ds.target_names),
                            self.mu_values, self.sigma, self.spec)


def synthesize(spec: SynthSpec) -> SynthDataset:
    """Draw ``x ~ U[-1, 1]^d`` and ``y = mu(x) + N(0, sigma^2)``."""
    rng = np.random.default_rng(spec.seed)
    X = rng.uniform(-1.0, 1.0, size=(spec.n, spec.d))
    mu = MU_FUNCTIONS[spec.mu](X)
    noise = rng.standard_normal(spec.n)
    y = mu + spec.sigma * noise if spec.sigma > 0 else mu.copy()
    ds = Dataset(X, y, tuple(f"x{j}" for j in range(spec.d)), ("y",))
    mu.flags.writeable = False
    return SynthDataset(ds, mu, float(spec.sigma), spec)
