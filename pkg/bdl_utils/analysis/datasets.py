"""
Synthetic datasets, splitting, standardization and CSV input/output.
"""
import os
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import pandas as pd

TASKS = ('regression', 'classification')


class DataError(Exception):
    """Error raised for malformed or inconsistent data."""


@dataclass(frozen=True)
class StandardizationRecord:
    """
    Per-feature shift and scale learned on a training set.

    Constant features are left unscaled (``mean = 0``, ``std = 1``) and flagged in ``constant``.
    """
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray

    def apply(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def invert(self, Z):
        return np.asarray(Z, dtype=float) * self.std + self.mean


@dataclass
class Dataset:
    """
    Paired observations.

    Parameters
    ----------
    X : np.ndarray
        Features, shape ``(N, d_0)``.
    y : np.ndarray
        Targets of shape ``(N, n_out)`` for regression, or integer labels of shape ``(N,)`` for
        classification.
    task : str
        ``regression`` or ``classification``.
    n_classes : int, Optional
        Number of classes (classification only). Inferred from the labels if not given.
    standardization : StandardizationRecord, Optional
        Set when ``X`` has been standardized.
    """
    X: np.ndarray
    y: np.ndarray
    task: str = 'regression'
    n_classes: Optional[int] = None
    standardization: Optional[StandardizationRecord] = field(default=None, repr=False)

    def __post_init__(self):
        if self.task not in TASKS:
            raise DataError(f"Unknown task {self.task!r}. Supported: {', '.join(TASKS)}.")
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X.reshape(-1, 1)
        if self.task == 'regression':
            self.y = np.asarray(self.y, dtype=float)
            if self.y.ndim == 1:
                self.y = self.y.reshape(-1, 1)
        else:
            y = np.asarray(self.y)
            if y.size and not np.all(np.equal(np.mod(y, 1), 0)):
                raise DataError("Classification labels must be integers")
            self.y = y.astype(int).reshape(-1)
            if self.n_classes is None:
                self.n_classes = int(self.y.max()) + 1 if self.y.size else 0
            if self.y.size and (self.y.min() < 0 or self.y.max() >= self.n_classes):
                raise DataError(f"Labels must lie in [0, {self.n_classes})")
        if self.X.shape[0] != self.y.shape[0]:
            raise DataError(f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]}")

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    @property
    def n_outputs(self):
        return self.y.shape[1] if self.task == 'regression' else self.n_classes

    def subset(self, idx):
        return replace(self, X=self.X[idx], y=self.y[idx])


def gen_xsinx(n=30, sigma=0.0, lo=-10.0, hi=10.0, seed=0):
    """
    Samples ``y = x sin(x) + eps`` with ``x ~ U(lo, hi)`` and ``eps ~ N(0, sigma^2)``.

    Parameters
    ----------
    n : int, Optional
        Number of samples. The default is 30.
    sigma : float, Optional
        Noise standard deviation. The default is 0.
    lo, hi : float, Optional
        The sampling interval. The default is (-10, 10).
    seed : int, Optional
        Seed of the random generator.

    Returns
    -------
    ds : Dataset
        A regression dataset with one feature and one target.
    """
    if n < 1:
        raise DataError(f"n must be at least 1, got {n}")
    if not lo < hi:
        raise DataError(f"Invalid interval ({lo}, {hi}): lo must be smaller than hi")
    if sigma < 0:
        raise DataError(f"The noise level must be non-negative, got {sigma}")
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo, hi, size=n)
    y = x * np.sin(x)
    if sigma > 0:
        y = y + rng.normal(0.0, sigma, size=n)
    return Dataset(x.reshape(-1, 1), y.reshape(-1, 1), task='regression')


def gen_two_moons(n=900, sigma=0.1, seed=0):
    """
    Samples two interleaving half circles.

    Class 0 lies on ``(cos t, sin t)`` and class 1 on ``(1 - cos t, 0.5 - sin t)`` with
    ``t ~ U(0, pi)``; isotropic Gaussian noise of standard deviation ``sigma`` is added to both
    coordinates. Rows are returned in random order.
    """
    if n < 2:
        raise DataError(f"n must be at least 2, got {n}")
    if sigma < 0:
        raise DataError(f"The noise level must be non-negative, got {sigma}")
    rng = np.random.default_rng(seed)
    n0, n1 = (n + 1) // 2, n // 2
    t0 = rng.uniform(0.0, np.pi, size=n0)
    t1 = rng.uniform(0.0, np.pi, size=n1)
    X = np.vstack([
        np.column_stack([np.cos(t0), np.sin(t0)]),
        np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)]),
    ])
    y = np.concatenate([np.zeros(n0, dtype=int), np.ones(n1, dtype=int)])
    if sigma > 0:
        X = X + rng.normal(0.0, sigma, size=X.shape)
    order = rng.permutation(n)
    return Dataset(X[order], y[order], task='classification', n_classes=2)


def _arc_distance(points, center, upper):
    d = points - center
    r = np.hypot(d[:, 0], d[:, 1])
    on_side = d[:, 1] >= 0 if upper else d[:, 1] <= 0
    ends = np.minimum(np.hypot(d[:, 0] - 1.0, d[:, 1]), np.hypot(d[:, 0] + 1.0, d[:, 1]))
    return np.where(on_side, np.abs(r - 1.0), ends)


def moon_distances(points):
    """
    Euclidean distances from 2-D points to each noiseless half circle.

    Returns
    -------
    distances : np.ndarray
        Shape ``(n, 2)``; column 0 is the class-0 (upper) arc, column 1 the class-1 (lower) arc.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    return np.column_stack([
        _arc_distance(points, np.array([0.0, 0.0]), True),
        _arc_distance(points, np.array([1.0, 0.5]), False),
    ])


def distance_to_moons(points):
    """Euclidean distance from each 2-D point to the nearer of the two noiseless half circles."""
    return moon_distances(points).min(axis=1)


def boundary_gap(points):
    """``|d_0 - d_1|``, the difference of the distances to the two arcs; zero on the true class separation."""
    d = moon_distances(points)
    return np.abs(d[:, 0] - d[:, 1])


def split(ds, train_fraction=0.7, seed=0):
    """
    Random train/validation split.

    The rows are permuted and the first ``ceil(f N)`` go to the training set, clamped so that
    both parts hold at least one row.
    """
    if not 0 < train_fraction < 1:
        raise DataError(f"The training fraction must lie in (0, 1), got {train_fraction}")
    n = len(ds)
    if n < 2:
        raise DataError("At least two rows are needed for a split")
    n_train = min(max(math.ceil(round(train_fraction * n, 9)), 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    return ds.subset(order[:n_train]), ds.subset(order[n_train:])


def standardize(ds, record=None):
    """
    Shifts and scales the features to zero mean and unit standard deviation.

    Parameters
    ----------
    ds : Dataset
        The dataset to transform.
    record : StandardizationRecord, Optional
        A record learned elsewhere (e.g. on the training set). If None, one is learned from ``ds``.

    Returns
    -------
    ds_std : Dataset
        The transformed copy, carrying the record.
    record : StandardizationRecord
        The record that was applied.
    """
    if record is None:
        mean = ds.X.mean(axis=0)
        std = ds.X.std(axis=0)
        constant = std == 0
        record = StandardizationRecord(
            mean=np.where(constant, 0.0, mean), std=np.where(constant, 1.0, std), constant=constant
        )
    if record.mean.shape[0] != ds.n_features:
        raise DataError(f"The record covers {record.mean.shape[0]} features, the data has {ds.n_features}")
    return replace(ds, X=record.apply(ds.X), standardization=record), record


def destandardize(record, values):
    """Maps standardized feature values back to natural units."""
    return record.invert(values)


@dataclass(frozen=True)
class CSVSchema:
    """Column layout of a dataset file: ``n_features`` feature columns then targets or one label column."""
    n_features: int
    n_outputs: int = 1
    task: str = 'regression'

    @property
    def n_columns(self):
        return self.n_features + (self.n_outputs if self.task == 'regression' else 1)


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_csv_rows(path, n_columns=None):
    """
    Reads a numeric CSV file, skipping a non-numeric first line as header.

    Returns
    -------
    rows : np.ndarray
        Shape ``(n_rows, n_columns)``.
    """
    if not os.path.isfile(path):
        raise DataError(f"File not found: {path}")
    rows = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = [t.strip() for t in line.split(',')]
            if not rows and lineno == 1 and not all(_is_number(t) for t in tokens):
                continue  # header
            if n_columns is None:
                n_columns = len(tokens)
            if len(tokens) != n_columns:
                raise DataError(
                    f"{os.path.basename(path)!r}, line {lineno}: expected {n_columns} columns, got {len(tokens)}")
            try:
                values = [float(t) for t in tokens]
            except ValueError:
                raise DataError(f"{os.path.basename(path)!r}, line {lineno}: could not parse {line!r}") from None
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"{os.path.basename(path)!r}, line {lineno}: non-finite value in {line!r}")
            rows.append(values)
    if not rows:
        raise DataError(f"{os.path.basename(path)!r} contains no data rows")
    return np.array(rows, dtype=float)


def load_csv(path, schema):
    """
    Loads a dataset in file row order.

    Parameters
    ----------
    path : str
        Comma-separated file with an optional single header line.
    schema : CSVSchema
        The expected column layout.

    Returns
    -------
    ds : Dataset
    """
    data = read_csv_rows(path, schema.n_columns)
    X, rest = data[:, :schema.n_features], data[:, schema.n_features:]
    if schema.task == 'classification':
        labels = rest[:, 0]
        bad = np.flatnonzero(np.mod(labels, 1) != 0)
        if bad.size:
            raise DataError(
                f"{os.path.basename(path)!r}: non-integer label {labels[bad[0]]!r} in data row {bad[0] + 1}")
        if np.any(labels < 0):
            raise DataError(f"{os.path.basename(path)!r}: labels must be non-negative")
        return Dataset(X, labels.astype(int), task='classification', n_classes=max(int(labels.max()) + 1, 2))
    return Dataset(X, rest, task='regression')


def feature_names(n):
    return [f"x{i + 1}" for i in range(n)]


def to_frame(ds):
    """The dataset as a :class:`pandas.DataFrame` with columns ``x1.. y1..`` or ``x1.. label``."""
    frame = pd.DataFrame(ds.X, columns=feature_names(ds.n_features))
    if ds.task == 'classification':
        frame['label'] = ds.y
    else:
        for j in range(ds.y.shape[1]):
            frame[f"y{j + 1}"] = ds.y[:, j]
    return frame


def save_csv(ds, path):
    """Writes a dataset with 17 significant digits, which makes the float round trip lossless."""
    to_frame(ds).to_csv(path, index=False, float_format='%.17g')
