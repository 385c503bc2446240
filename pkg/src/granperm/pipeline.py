"""Close-open granulation: crisp SOM granules balanced against fuzzy TSK rules.

For each random initialization a SOM size is drawn, the map is trained on
the (scaled) training records and its non-empty neurons become crisp
granules.  A TSK rule base is then fitted to the granules for a sequence of
shrinking influence radii (more, smaller fuzzy granules) until a candidate
is both accurate enough (error level within the threshold) and simple
enough (no more rules than allowed).  Every candidate goes into an
aggregated box, from which the final model is selected.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from . import nfis, rst, som
from .core_data import Dataset, MinMaxScaler, SplitSpec, normalize, split_train_test
from .errors import DimensionMismatch, EmptyBox, EmptyInput, NoFeasibleCandidate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    """Close-open settings; the first four mirror the published run (n=1,
    k=3, n.r=4, error level 23 in Lugeon units)."""

    n_random_inits: int = 1
    max_iterations: int = 3
    max_rules: int = 4
    error_threshold: float = 23.0
    som_sizes: tuple = ((10, 15),)
    radius_schedule: tuple = (0.9, 0.7, 0.5)
    split: SplitSpec = field(default_factory=lambda: SplitSpec(0.8, 0))
    seed: int = 0
    som_epochs: int = 500
    nfis_epochs: int = 100
    nfis_lr: float = 0.01
    mf_kind: str = "gaussian"
    # Per-iteration threshold multiplier; 1.0 keeps the threshold fixed.
    relaxation: float = 1.0
    train_on: str = "granules"

    def __post_init__(self):
        object.__setattr__(self, "som_sizes", tuple(tuple(int(v) for v in s) for s in self.som_sizes))
        object.__setattr__(self, "radius_schedule", tuple(float(r) for r in self.radius_schedule))
        if self.n_random_inits < 1 or self.max_iterations < 1 or self.max_rules < 1:
            raise ValueError("n_random_inits, max_iterations and max_rules must be >= 1")
        if not self.error_threshold > 0:
            raise ValueError("error_threshold must be > 0")
        if not self.som_sizes or any(len(s) != 2 or min(s) < 1 for s in self.som_sizes):
            raise ValueError("som_sizes must be a nonempty list of (rows, cols)")
        r = self.radius_schedule
        if not r or any(not 0 < v <= 1 for v in r) or any(b >= a for a, b in zip(r, r[1:])):
            raise ValueError("radius_schedule must be nonempty and strictly descending in (0, 1]")
        if self.mf_kind not in nfis.MF_KINDS:
            raise ValueError(f"unknown mf_kind {self.mf_kind!r}")
        if self.train_on not in ("granules", "records"):
            raise ValueError("train_on must be 'granules' or 'records'")
        if not self.relaxation >= 1.0:
            raise ValueError("relaxation must be >= 1")

    @classmethod
    def from_mapping(cls, d: Mapping):
        d = dict(d)
        split = d.pop("split", None)
        kw = {}
        if isinstance(split, Mapping):
            kw["split"] = SplitSpec(**split)
        elif "train_fraction" in d:
            kw["split"] = SplitSpec(float(d.pop("train_fraction")), int(d.get("seed", 0)))
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown pipeline keys: {', '.join(sorted(unknown))}")
        return cls(**d, **kw)


@dataclass(frozen=True, eq=False)
class CandidateModel:
    som: som.SomGrid
    rulebase: nfis.TskRuleBase  # raw input units
    error_level: float
    n_rules: int
    iteration_trace: tuple  # ((iteration, radius, (rows, cols), error_level, n_rules), ...)
    init_index: int = 0
    iteration: int = 0
    radius: float = 1.0
    threshold: float = np.inf
    scaler: MinMaxScaler = None

    def __post_init__(self):
        if self.n_rules != len(self.rulebase):
            raise ValueError("n_rules must match the rule base")
        if not self.error_level >= 0:
            raise ValueError("error level must be >= 0")


@dataclass
class AggregatedBox:
    candidates: list = field(default_factory=list)
    error_threshold: float = 23.0
    max_rules: int = 4

    def __len__(self):
        return len(self.candidates)

    def is_feasible(self, c: CandidateModel) -> bool:
        limit = c.threshold if np.isfinite(c.threshold) else self.error_threshold
        return c.error_level <= limit and c.n_rules <= self.max_rules


def select_best(box: AggregatedBox) -> CandidateModel:
    """Fewest rules among feasible candidates (then lowest error, then
    earliest); without feasible candidates, the lowest error overall."""
    if not box.candidates:
        raise EmptyBox("aggregated box is empty")
    indexed = list(enumerate(box.candidates))
    feasible = [(i, c) for i, c in indexed if box.is_feasible(c)]
    if feasible:
        return min(feasible, key=lambda ic: (ic[1].n_rules, ic[1].error_level, ic[0]))[1]
    return min(indexed, key=lambda ic: (ic[1].error_level, ic[0]))[1]


def _joint_points(data: Dataset):
    """Inputs (already in [0, 1]) plus the min-max scaled target."""
    y = data.y
    span = np.ptp(y) if len(y) else 0.0
    ys = (y - y.min()) / span if span > 0 else np.zeros_like(y)
    return np.clip(np.column_stack([data.X, ys]), 0.0, 1.0)


def fit_fuzzy_granules(fit_data: Dataset, radius, cfg: PipelineConfig, checking=None):
    """Subtractive clustering + hybrid training on scaled data.

    Returns the trained rule base in the scaled units of ``fit_data`` and its
    error level.
    """
    centers = nfis.subtractive_cluster(_joint_points(fit_data), radius)
    rb0 = nfis.init_rulebase_from_clusters(centers, fit_data, radius, kind=cfg.mf_kind)
    hcfg = nfis.HybridTrainConfig(cfg.nfis_epochs, cfg.nfis_lr, radius, checking)
    return nfis.train_hybrid(rb0, fit_data, hcfg)


def run_close_open(data: Dataset, cfg: PipelineConfig = PipelineConfig()):
    """Run the close-open procedure; returns ``(selected, box)``.

    Raises :class:`NoFeasibleCandidate` (carrying the box and the
    minimum-error fallback) when no candidate meets both criteria.
    """
    if len(data) == 0:
        raise EmptyInput("no records")
    train, _ = split_train_test(data, cfg.split)
    train_s = normalize(train)
    rng = np.random.default_rng(cfg.seed)
    box = AggregatedBox([], cfg.error_threshold, cfg.max_rules)

    for init in range(cfg.n_random_inits):
        rows, cols = cfg.som_sizes[int(rng.integers(len(cfg.som_sizes)))]
        som_seed = int(rng.integers(2**32))
        grid = som.init_som(rows, cols, train_s.dim, train_s, som_seed)
        grid = som.train_som(grid, train_s,
                             som.TrainSchedule.for_grid(rows, cols, cfg.som_epochs, som_seed))
        granules = som.extract_crisp_granules(grid, train_s)
        fit_data = granules if cfg.train_on == "granules" else train_s
        log.info("init %d: %dx%d SOM -> %d granules", init, rows, cols, len(granules))

        trace = []
        for it, radius in enumerate(cfg.radius_schedule[:cfg.max_iterations]):
            threshold = cfg.error_threshold * cfg.relaxation**it
            rb, err = fit_fuzzy_granules(fit_data, radius, cfg, checking=train_s)
            trace.append((it, radius, (rows, cols), err, len(rb)))
            cand = CandidateModel(grid, nfis.to_raw_units(rb, train_s.scaler), err, len(rb),
                                  tuple(trace), init, it, radius, threshold, train_s.scaler)
            box.candidates.append(cand)
            log.info("  iteration %d: radius %.3g, %d rules, error level %.4g",
                     it, radius, len(rb), err)
            if box.is_feasible(cand):
                break

    best = select_best(box)
    if not box.is_feasible(best):
        raise NoFeasibleCandidate(box, best)
    return best, box


def format_box_csv(box: AggregatedBox, selected: CandidateModel | None = None) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["init", "iteration", "som_rows", "som_cols", "radius", "n_rules",
                "error_level", "threshold", "feasible", "selected"])
    for c in box.candidates:
        w.writerow([c.init_index, c.iteration, c.som.rows, c.som.cols, repr(c.radius), c.n_rules,
                    repr(float(c.error_level)), repr(float(c.threshold)),
                    int(box.is_feasible(c)), int(c is selected)])
    return out.getvalue()


# -- prediction grids --------------------------------------------------------

@dataclass(frozen=True)
class GridAxis:
    name: str
    lo: float
    hi: float
    num: int

    def __post_init__(self):
        if self.num < 2:
            raise ValueError("an axis needs at least 2 points")

    def values(self):
        return np.linspace(self.lo, self.hi, self.num)


@dataclass(frozen=True)
class GridSpec:
    axes: tuple  # two GridAxis
    fixed: Mapping

    def __post_init__(self):
        if len(self.axes) != 2:
            raise ValueError("exactly two swept axes are required")


@dataclass(frozen=True, eq=False)
class PredictionGrid:
    axis_names: tuple
    coords: np.ndarray  # (N, 2)
    values: np.ndarray
    underflow: np.ndarray
    shape: tuple

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow([*self.axis_names, "prediction", "underflow_flag"])
        for (a, b), v, u in zip(self.coords, self.values, self.underflow):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(v)), int(u)])
        return out.getvalue()

    def as_matrix(self):
        return self.values.reshape(self.shape)


def predict_grid(model, spec: GridSpec) -> PredictionGrid:
    """Evaluate the rule base on a Cartesian sweep of two inputs.

    ``model`` is a :class:`CandidateModel` or a rule base.  Rows run over
    the second axis fastest.
    """
    rb = getattr(model, "rulebase", model)
    names = rb.input_names
    a1, a2 = spec.axes
    swept = {a1.name, a2.name}
    for name in swept | set(spec.fixed):
        if name not in names:
            raise DimensionMismatch(f"{name!r} is not an input of the model")
    missing = [n for n in names if n not in swept and n not in spec.fixed]
    if missing or a1.name == a2.name or swept & set(spec.fixed):
        raise DimensionMismatch(
            "grid must fix every input except the two swept axes"
            + (f" (missing: {', '.join(missing)})" if missing else ""))
    g1, g2 = np.meshgrid(a1.values(), a2.values(), indexing="ij")
    coords = np.column_stack([g1.ravel(), g2.ravel()])
    X = np.empty((len(coords), len(names)))
    for j, name in enumerate(names):
        if name == a1.name:
            X[:, j] = coords[:, 0]
        elif name == a2.name:
            X[:, j] = coords[:, 1]
        else:
            X[:, j] = float(spec.fixed[name])
    y, under = nfis.tsk_predict(rb, X)
    return PredictionGrid((a1.name, a2.name), coords, y, under, (a1.num, a2.num))


# -- rough-set branch --------------------------------------------------------

@dataclass(frozen=True)
class RstResult:
    table: rst.DecisionTable
    rules: list
    reducts: list
    discretizers: dict
    attributes: tuple  # attributes the rules condition on


def fit_level_discretizers(data: Dataset, levels=5, seed=0) -> dict:
    """One discretizer per feature and for the target.

    Columns with fewer distinct values than ``levels`` get one level per
    distinct value instead of a trained map.
    """
    out = {}
    cols = [(n, data.X[:, j]) for j, n in enumerate(data.feature_names)]
    cols.append((data.target_name, data.y))
    for name, values in cols:
        uniq = np.unique(values)
        if len(uniq) < levels:
            out[name] = som.Discretizer1D(tuple(uniq))
        else:
            out[name] = som.fit_discretizer(values, levels, seed=seed)
    return out


def run_rst_branch(data: Dataset, levels=5, seed=0) -> RstResult:
    """Scale to symbolic levels, find decision-relative reducts, and extract
    rules over the first (smallest) reduct."""
    if len(data) == 0:
        raise EmptyInput("no records")
    disc = fit_level_discretizers(data, levels, seed)
    table = rst.scale_dataset_to_table(data, disc)
    reds = rst.table_reducts(table, relative=True)
    order = {a: i for i, a in enumerate(table.attributes)}
    reds = sorted(reds, key=lambda r: (len(r), sorted(order[a] for a in r)))
    chosen = tuple(a for a in table.attributes if a in reds[0]) if reds else table.attributes
    rules = rst.extract_decision_rules(table, chosen)
    return RstResult(table, rules, reds, disc, chosen)


def split_for(data: Dataset, cfg: PipelineConfig):
    """The (train, test) split ``run_close_open`` uses for ``cfg``."""
    return split_train_test(data, cfg.split)


def with_threshold(cfg: PipelineConfig, threshold: float) -> PipelineConfig:
    return replace(cfg, error_threshold=threshold)
