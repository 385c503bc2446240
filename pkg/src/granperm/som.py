"""Kohonen self-organizing map on a rectangular lattice.

Used twice: a 2D map whose codebook vectors summarize the records as crisp
granules, and a 1 x L map over a single attribute that turns it into L
ordered symbolic levels.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .core_data import Dataset
from .errors import DimensionMismatch, EmptyInput, TooFewDistinctValues


@dataclass(frozen=True, eq=False)
class SomGrid:
    rows: int
    cols: int
    codebook: np.ndarray  # (rows, cols, dim)
    trained_epochs: int = 0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid needs at least one row and one column")
        cb = np.array(self.codebook, dtype=float)
        if cb.ndim != 3 or cb.shape[:2] != (self.rows, self.cols) or cb.shape[2] < 1:
            raise ValueError(f"codebook must have shape ({self.rows}, {self.cols}, dim)")
        if not np.all(np.isfinite(cb)):
            raise ValueError("codebook has non-finite components")
        cb.flags.writeable = False
        object.__setattr__(self, "codebook", cb)

    @property
    def dim(self):
        return self.codebook.shape[2]

    @property
    def size(self):
        return self.rows * self.cols

    @property
    def weights(self):
        """Codebook as a ``(rows * cols, dim)`` array in row-major neuron order."""
        return self.codebook.reshape(self.size, self.dim)

    def lattice(self):
        r, c = np.divmod(np.arange(self.size), self.cols)
        return np.column_stack([r, c]).astype(float)


@dataclass(frozen=True)
class TrainSchedule:
    """Exponential decay of learning rate and neighborhood radius over epochs."""

    epochs: int = 500
    lr_start: float = 0.5
    lr_end: float = 0.01
    radius_start: float = 5.0
    radius_end: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0 < self.lr_start <= 1 or not 0 < self.lr_end <= self.lr_start:
            raise ValueError("need 0 < lr_end <= lr_start <= 1")
        if not 0 < self.radius_end <= self.radius_start:
            raise ValueError("need 0 < radius_end <= radius_start")

    @classmethod
    def for_grid(cls, rows, cols, epochs=500, seed=0, **kw):
        """Defaults scaled to the lattice: radius max(rows, cols)/2 down to 0.5."""
        start = max(max(rows, cols) / 2.0, kw.get("radius_end", 0.5))
        return cls(epochs=epochs, radius_start=start, seed=seed, **kw)

    def at(self, epoch):
        """(learning rate, radius) used throughout ``epoch`` (0-based)."""
        frac = epoch / (self.epochs - 1) if self.epochs > 1 else 0.0
        lr = self.lr_start * (self.lr_end / self.lr_start) ** frac
        radius = self.radius_start * (self.radius_end / self.radius_start) ** frac
        return lr, radius


def _points(data):
    return np.asarray(getattr(data, "X", data), dtype=float)


def init_som(n, m, dim, data, seed=0) -> SomGrid:
    X = _points(data)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyInput("cannot initialize a map from empty data")
    if X.shape[1] != dim:
        raise DimensionMismatch(f"data has {X.shape[1]} features, map has {dim}")
    rng = np.random.default_rng(seed)
    lo, hi = X.min(axis=0), X.max(axis=0)
    return SomGrid(n, m, rng.uniform(lo, hi, size=(n, m, dim)))


def find_bmu(grid: SomGrid, x):
    """Nearest neuron by squared Euclidean distance; ties go to the first in
    row-major order."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != grid.dim:
        raise DimensionMismatch(f"input has {x.shape[0]} components, map has {grid.dim}")
    d = ((grid.weights - x) ** 2).sum(axis=1)
    return divmod(int(np.argmin(d)), grid.cols)


def bmu_indices(grid: SomGrid, X):
    """Flat row-major BMU index for every row of ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != grid.dim:
        raise DimensionMismatch(f"expected rows of length {grid.dim}")
    W = grid.weights
    idx = np.empty(X.shape[0], dtype=int)
    chunk = max(1, 2_000_000 // max(1, W.size))
    for start in range(0, X.shape[0], chunk):
        block = X[start:start + chunk]
        idx[start:start + chunk] = np.argmin(((block[:, None, :] - W[None, :, :]) ** 2).sum(axis=2), axis=1)
    return idx


def train_som(grid: SomGrid, data, schedule: TrainSchedule) -> SomGrid:
    """Online competitive training with a Gaussian neighborhood.

    For each presented ``x`` with winner ``b``:
    ``w_i += lr * exp(-|r_i - r_b|^2 / (2 radius^2)) * (x - w_i)``, where
    ``r`` are lattice coordinates.  Each epoch presents the data in a fresh
    seeded permutation.
    """
    X = _points(data)
    if X.ndim != 2 or X.shape[1] != grid.dim:
        raise DimensionMismatch(f"data has {X.shape[-1]} features, map has {grid.dim}")
    if X.shape[0] == 0:
        raise EmptyInput("cannot train on empty data")
    rng = np.random.default_rng(schedule.seed)
    W = grid.weights.copy()
    L = grid.lattice()
    grid_d2 = ((L[:, None, :] - L[None, :, :]) ** 2).sum(axis=2)
    for epoch in range(schedule.epochs):
        lr, radius = schedule.at(epoch)
        step = lr * np.exp(-grid_d2 / (2.0 * radius * radius))
        for i in rng.permutation(X.shape[0]):
            x = X[i]
            diff = x - W
            b = np.argmin(np.einsum("ij,ij->i", diff, diff))
            W += step[b][:, None] * diff
    return SomGrid(grid.rows, grid.cols, W.reshape(grid.codebook.shape),
                   grid.trained_epochs + schedule.epochs)


def quantization_error(grid: SomGrid, data) -> float:
    """Mean Euclidean distance from each record to its BMU's codebook vector."""
    X = _points(data)
    if X.shape[0] == 0:
        raise EmptyInput("quantization error of empty data")
    idx = bmu_indices(grid, X)
    return float(np.linalg.norm(X - grid.weights[idx], axis=1).mean())


def extract_crisp_granules(grid: SomGrid, data: Dataset) -> Dataset:
    """One granule per non-empty neuron.

    The granule's condition vector is the neuron's codebook vector, its
    target is the mean target of the records it wins, and ``weights`` counts
    those records.  Granules come out in row-major neuron order.
    """
    if len(data) == 0:
        raise EmptyInput("no records to granulate")
    idx = bmu_indices(grid, data.X)
    counts = np.bincount(idx, minlength=grid.size)
    sums = np.bincount(idx, weights=data.y, minlength=grid.size)
    used = np.flatnonzero(counts)
    ids = tuple(f"G{r}_{c}" for r, c in (divmod(int(k), grid.cols) for k in used))
    return Dataset(grid.weights[used], sums[used] / counts[used], data.feature_names,
                   data.target_name, ids=ids, weights=counts[used].astype(float),
                   scaler=data.scaler)


# -- symbolic levels ---------------------------------------------------------

LEVEL_NAMES = {1: "very low", 2: "low", 3: "medium", 4: "high", 5: "very high"}


@dataclass(frozen=True)
class Discretizer1D:
    centers: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in self.centers)
        if any(b <= a for a, b in zip(c, c[1:])):
            raise ValueError("discretizer centers must be strictly ascending")
        object.__setattr__(self, "centers", c)

    @property
    def levels(self):
        return len(self.centers)

    @property
    def labels(self):
        return tuple(range(1, self.levels + 1))

    def __call__(self, v):
        return apply_discretizer(self, v)


def fit_discretizer(values, levels=5, seed=0, epochs=50) -> Discretizer1D:
    """Train a 1 x ``levels`` map on scalar values; sorted centers give labels
    1 (lowest) to ``levels``."""
    v = np.asarray(values, dtype=float).reshape(-1, 1)
    if len(np.unique(v)) < levels:
        raise TooFewDistinctValues(f"need at least {levels} distinct values")
    grid = init_som(1, levels, 1, v, seed)
    sched = TrainSchedule.for_grid(1, levels, epochs=epochs, seed=seed)
    trained = train_som(grid, v, sched)
    centers = np.sort(trained.weights[:, 0])
    if np.any(np.diff(centers) <= 0):
        # Coincident neurons: spread them over the value quantiles instead.
        centers = np.quantile(v[:, 0], (np.arange(levels) + 0.5) / levels)
    return Discretizer1D(tuple(centers))


def apply_discretizer(d: Discretizer1D, v):
    """Label of the nearest center; a value exactly midway takes the lower label."""
    c = np.asarray(d.centers)
    mids = (c[:-1] + c[1:]) / 2.0
    arr = np.asarray(v, dtype=float)
    labels = 1 + np.searchsorted(mids, arr, side="left")
    return int(labels) if labels.ndim == 0 else labels


# -- codebook CSV ------------------------------------------------------------

def format_codebook_csv(grid: SomGrid) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["row", "col", *(f"w{j + 1}" for j in range(grid.dim))])
    for r in range(grid.rows):
        for c in range(grid.cols):
            w.writerow([r, c, *(repr(float(v)) for v in grid.codebook[r, c])])
    return out.getvalue()


def parse_codebook_csv(text) -> SomGrid:
    rows = list(csv.reader(io.StringIO(text)))
    body = [r for r in rows[1:] if r]
    if not body:
        raise EmptyInput("codebook CSV has no rows")
    n = max(int(r[0]) for r in body) + 1
    m = max(int(r[1]) for r in body) + 1
    dim = len(rows[0]) - 2
    cb = np.full((n, m, dim), math.nan)
    for r in body:
        cb[int(r[0]), int(r[1])] = [float(v) for v in r[2:]]
    return SomGrid(n, m, cb)
