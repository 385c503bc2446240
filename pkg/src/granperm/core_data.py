"""Borehole permeability records: CSV ingestion, splitting, scaling and synthesis.

A :class:`Dataset` is array-backed (``X`` of shape ``(n, d)`` and ``y`` of
shape ``(n,)``) so that the same type can carry raw borehole intervals, SOM
granules and normalized training data.  When a dataset originates from
borehole records they are kept alongside in ``records``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from .errors import DegenerateFeature, EmptyInput, MissingColumn, RowParseError

FIELDS = ("borehole_id", "x", "y", "z", "section_length", "rqd", "twr", "lugeon")
DEFAULT_FEATURES = ("z", "section_length", "rqd", "twr")
DEFAULT_TARGET = "lugeon"

# Ordinal weathering classes, fresh (1) to completely weathered (5).
TWR_CLASSES = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class BoreholeRecord:
    """One water-pressure-test interval."""

    borehole_id: str
    x: float
    y: float
    z: float
    section_length: float
    rqd: float
    twr: int
    lugeon: float

    def __post_init__(self):
        problem = _record_problem(self)
        if problem is not None:
            raise ValueError(f"{problem[0]}: {problem[1]}")

    def value(self, name: str) -> float:
        return float(getattr(self, name))


def _record_problem(rec):
    """Return ``(field, reason)`` for the first violated invariant, or None."""
    for name in FIELDS[1:]:
        v = getattr(rec, name)
        if not math.isfinite(v):
            return name, "value must be finite"
    if not rec.section_length > 0:
        return "section_length", f"section length must be > 0, got {rec.section_length}"
    if not 0 <= rec.rqd <= 100:
        return "rqd", f"RQD must lie in [0, 100], got {rec.rqd}"
    if rec.twr not in TWR_CLASSES:
        return "twr", f"weathering class must be one of 1..5, got {rec.twr}"
    if not rec.lugeon >= 0:
        return "lugeon", f"lugeon must be >= 0, got {rec.lugeon}"
    return None


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-feature affine map ``x -> (x - lo) / width`` onto [0, 1]."""

    names: tuple
    lo: np.ndarray
    width: np.ndarray

    @classmethod
    def fit(cls, X, names):
        X = np.asarray(X, dtype=float)
        if X.shape[0] == 0:
            raise EmptyInput("cannot fit a scaler on an empty dataset")
        lo = X.min(axis=0)
        width = X.max(axis=0) - lo
        for name, w in zip(names, width):
            if not w > 0:
                raise DegenerateFeature(name)
        return cls(tuple(names), lo, width)

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.lo) / self.width

    def inverse(self, X):
        return np.asarray(X, dtype=float) * self.width + self.lo


@dataclass(frozen=True, eq=False)
class Dataset:
    """Condition vectors ``X`` with targets ``y``.

    ``weights`` holds per-row counts for granule datasets; ``scaler`` is set
    when ``X`` is in normalized units and can be inverted.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple = DEFAULT_FEATURES
    target_name: str = DEFAULT_TARGET
    ids: tuple = None
    records: tuple = None
    weights: np.ndarray = None
    scaler: MinMaxScaler = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float, ndmin=2)
        if X.size == 0:
            X = X.reshape(0, len(self.feature_names))
        y = np.array(self.y, dtype=float).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        if X.shape[1] != len(self.feature_names):
            raise ValueError(
                f"X has {X.shape[1]} columns for {len(self.feature_names)} feature names"
            )
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        ids = self.ids
        if ids is None:
            ids = tuple(f"r{i}" for i in range(len(y)))
        object.__setattr__(self, "ids", tuple(ids))
        if self.weights is not None:
            w = np.array(self.weights, dtype=float).reshape(-1)
            w.flags.writeable = False
            object.__setattr__(self, "weights", w)

    @classmethod
    def from_records(cls, records, features=DEFAULT_FEATURES, target=DEFAULT_TARGET):
        records = tuple(records)
        for name in (*features, target):
            if name not in FIELDS[1:]:
                raise ValueError(f"unknown record field {name!r}")
        X = np.array([[r.value(f) for f in features] for r in records], dtype=float)
        y = np.array([r.value(target) for r in records], dtype=float)
        ids = tuple(r.borehole_id for r in records)
        return cls(X.reshape(len(records), len(features)), y, tuple(features), target,
                   ids=ids, records=records)

    def __len__(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    def subset(self, indices):
        idx = np.asarray(indices, dtype=int)
        return replace(
            self,
            X=self.X[idx],
            y=self.y[idx],
            ids=tuple(self.ids[i] for i in idx),
            records=None if self.records is None else tuple(self.records[i] for i in idx),
            weights=None if self.weights is None else self.weights[idx],
        )

    def with_features(self, features):
        """Re-select condition features from the attached records."""
        if self.records is None:
            raise ValueError("feature re-selection needs the source records")
        return Dataset.from_records(self.records, features, self.target_name)


# -- CSV ---------------------------------------------------------------------

@dataclass
class ParseReport:
    records: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    extra_columns: tuple = ()


def scan_borehole_csv(text) -> ParseReport:
    """Parse every data row, collecting rejects instead of raising on them."""
    if not isinstance(text, str):
        text = text.read()
    if text.startswith("﻿"):
        text = text[1:]
    if not text.strip():
        raise EmptyInput("no header line")
    reader = csv.reader(io.StringIO(text))
    header = [h.strip() for h in next(reader)]
    for name in FIELDS:
        if name not in header:
            raise MissingColumn(name)
    col = {name: header.index(name) for name in FIELDS}
    extra = tuple(h for h in header if h not in FIELDS)
    report = ParseReport(extra_columns=extra)

    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            report.records.append(_parse_row(row, col, line_no))
        except RowParseError as err:
            report.rejected.append(err)
    return report


def _parse_row(row, col, line_no):
    values = {}
    for name in FIELDS:
        i = col[name]
        if i >= len(row) or not row[i].strip():
            raise RowParseError(line_no, name, "missing value")
        raw = row[i].strip()
        if name == "borehole_id":
            values[name] = raw
            continue
        try:
            v = float(raw)
        except ValueError:
            raise RowParseError(line_no, name, f"not a number: {raw!r}") from None
        if name == "twr":
            if not v.is_integer():
                raise RowParseError(line_no, name, f"weathering class must be an integer, got {raw!r}")
            v = int(v)
        values[name] = v
    try:
        return BoreholeRecord(**values)
    except ValueError:
        probe = object.__new__(BoreholeRecord)
        for k, v in values.items():
            object.__setattr__(probe, k, v)
        fname, reason = _record_problem(probe)
        raise RowParseError(line_no, fname, reason) from None


def parse_borehole_csv(text, features=DEFAULT_FEATURES, target=DEFAULT_TARGET) -> Dataset:
    """Parse borehole CSV text into a :class:`Dataset`.

    Any invalid row raises :class:`RowParseError`; use :func:`scan_borehole_csv`
    to collect rejects instead.  A header with no data rows gives an empty
    dataset.
    """
    report = scan_borehole_csv(text)
    if report.extra_columns:
        warnings.warn(f"ignoring unknown columns: {', '.join(report.extra_columns)}",
                      stacklevel=2)
    if report.rejected:
        raise report.rejected[0]
    return Dataset.from_records(report.records, features, target)


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def format_borehole_csv(records: Iterable[BoreholeRecord]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(FIELDS)
    for r in records:
        w.writerow([r.borehole_id] + [_fmt(getattr(r, f)) for f in FIELDS[1:]])
    return out.getvalue()


def format_dataset_csv(data: Dataset) -> str:
    """Write a dataset; granule datasets get a ``granule_weight`` column."""
    if data.records is not None and data.weights is None and data.scaler is None:
        return format_borehole_csv(data.records)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    header = ["borehole_id", *data.feature_names, data.target_name]
    if data.weights is not None:
        header.append("granule_weight")
    w.writerow(header)
    for i in range(len(data)):
        row = [data.ids[i], *(_fmt(v) for v in data.X[i]), _fmt(data.y[i])]
        if data.weights is not None:
            row.append(_fmt(data.weights[i]))
        w.writerow(row)
    return out.getvalue()


# -- splitting and scaling ---------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    by_borehole: bool = False

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")


def split_train_test(data: Dataset, spec: SplitSpec):
    """Seeded random partition into ``(train, test)``.

    The training side holds ``round(train_fraction * n)`` rows (half rounds
    up).  With ``by_borehole`` whole boreholes are assigned, so sizes are
    approximate.  Both sides keep the original row order.
    """
    n = len(data)
    if n == 0:
        raise EmptyInput("cannot split an empty dataset")
    rng = np.random.default_rng(spec.seed)
    n_train = int(math.floor(spec.train_fraction * n + 0.5))
    if spec.by_borehole:
        groups = sorted(set(data.ids))
        order = rng.permutation(len(groups))
        chosen, count = set(), 0
        counts = {g: data.ids.count(g) for g in groups}
        for gi in order:
            if count >= n_train:
                break
            chosen.add(groups[gi])
            count += counts[groups[gi]]
        mask = np.array([i in chosen for i in data.ids], dtype=bool)
    else:
        mask = np.zeros(n, dtype=bool)
        mask[rng.permutation(n)[:n_train]] = True
    idx = np.arange(n)
    return data.subset(idx[mask]), data.subset(idx[~mask])


def normalize(data: Dataset, scaler: MinMaxScaler | None = None) -> Dataset:
    """Min-max scale the condition features to [0, 1].

    Pass a scaler fitted on training data to reuse it for test data; the
    target is left in its own units.
    """
    if data.scaler is not None:
        raise ValueError("dataset is already normalized")
    if scaler is None:
        scaler = MinMaxScaler.fit(data.X, data.feature_names)
    return replace(data, X=scaler.transform(data.X), scaler=scaler)


def denormalize(data: Dataset) -> Dataset:
    if data.scaler is None:
        raise ValueError("dataset is not normalized")
    return replace(data, X=data.scaler.inverse(data.X), scaler=None)


# -- synthetic data ----------------------------------------------------------

ORDINAL_FEATURES = frozenset({"twr"})


@dataclass(frozen=True)
class SyntheticSpec:
    generator_rulebase: object
    n_records: int
    noise_sigma: float
    input_ranges: Mapping[str, tuple]
    seed: int = 0

    def __post_init__(self):
        if self.n_records <= 0:
            raise ValueError("n_records must be positive")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be nonnegative")
        for name in self.generator_rulebase.input_names:
            if name not in self.input_ranges:
                raise ValueError(f"no input range for {name!r}")
        for name, (lo, hi) in self.input_ranges.items():
            if not lo <= hi:
                raise ValueError(f"input range for {name!r} has lower > upper")


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Draw inputs uniformly and label them with the generator rule base.

    Ordinal features (weathering class) are drawn uniformly over the integers
    in their range.  Rows become :class:`BoreholeRecord` objects when every
    input is a record field and all invariants hold; otherwise ``records`` is
    left empty and only the arrays are populated.
    """
    from .nfis import tsk_predict

    rb = spec.generator_rulebase
    names = tuple(rb.input_names)
    rng = np.random.default_rng(spec.seed)
    n = spec.n_records
    cols = []
    for name in names:
        lo, hi = spec.input_ranges[name]
        if name in ORDINAL_FEATURES:
            cols.append(rng.integers(int(math.ceil(lo)), int(math.floor(hi)) + 1, size=n).astype(float))
        else:
            cols.append(rng.uniform(lo, hi, size=n))
    X = np.column_stack(cols)
    y, _ = tsk_predict(rb, X)
    if spec.noise_sigma > 0:
        y = y + rng.normal(0.0, spec.noise_sigma, size=n)
    ids = tuple(f"SYN{i + 1:04d}" for i in range(n))
    records = _synthetic_records(ids, names, X, y, spec.input_ranges, rng)
    return Dataset(X, y, names, DEFAULT_TARGET, ids=ids, records=records)


def _synthetic_records(ids, names, X, y, ranges, rng):
    if not set(names) <= set(FIELDS[1:-1]):
        return None
    n = len(ids)
    base = {"x": np.zeros(n), "y": np.zeros(n), "z": np.zeros(n),
            "section_length": np.ones(n), "rqd": np.zeros(n), "twr": np.ones(n)}
    for name in ("x", "y"):
        if name in ranges and name not in names:
            base[name] = rng.uniform(*ranges[name], size=n)
    for j, name in enumerate(names):
        base[name] = X[:, j]
    try:
        return tuple(
            BoreholeRecord(ids[i], float(base["x"][i]), float(base["y"][i]), float(base["z"][i]),
                           float(base["section_length"][i]), float(base["rqd"][i]),
                           int(base["twr"][i]), float(y[i]))
            for i in range(n)
        )
    except ValueError as err:
        warnings.warn(f"synthetic rows violate record invariants ({err}); records omitted",
                      stacklevel=3)
        return None


def load_synthetic_spec(source) -> SyntheticSpec:
    """Build a :class:`SyntheticSpec` from a TOML file path or parsed mapping.

    Keys: ``n_records``, ``noise_sigma``, ``seed``, ``[input_ranges]`` with
    ``name = [lo, hi]``, and either ``rulebase`` (``"published"`` or a path to a
    rule-base JSON file) or inline ``[[rules]]`` tables as accepted by
    :func:`granperm.nfis.rulebase_from_dict`.
    """
    from . import nfis

    cfg, base = _read_toml(source)
    if "rules" in cfg:
        rb = nfis.rulebase_from_dict({"input_names": cfg.get("input_names"),
                                      "rules": cfg["rules"]})
    else:
        ref = cfg.get("rulebase", "published")
        rb = nfis.published_rulebase() if ref == "published" else nfis.load_rulebase(_resolve(base, ref))
    ranges = {k: tuple(float(v) for v in pair) for k, pair in cfg["input_ranges"].items()}
    return SyntheticSpec(rb, int(cfg["n_records"]), float(cfg.get("noise_sigma", 0.0)),
                         ranges, int(cfg.get("seed", 0)))


def _read_toml(source):
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    from pathlib import Path

    if isinstance(source, Mapping):
        return dict(source), Path.cwd()
    path = Path(source)
    with open(path, "rb") as fh:
        return tomllib.load(fh), path.parent


def _resolve(base, ref):
    from pathlib import Path

    p = Path(ref)
    return p if p.is_absolute() else base / p


def fixture_input_ranges() -> dict:
    """Input domain used with the bundled rule fixture (raw units)."""
    return dict(_FIXTURE_RANGES)


_FIXTURE_RANGES = {
    "z": (1150.0, 1210.0),
    "section_length": (2.5, 5.5),
    "rqd": (0.0, 100.0),
    "twr": (1.0, 5.0),
}
