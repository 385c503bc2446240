"""Rough sets over symbolic decision tables.

Indiscernibility partitions, lower/upper approximations, the discernibility
matrix and its CNF function, exhaustive reducts, and certain decision rules
with level 6 reserved for inconsistent (or unseen) condition patterns.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .errors import TooManyAttributes, UnknownAttribute, UnknownObject

NONDETERMINISTIC = 6
LEVEL_NAMES = {1: "very low", 2: "low", 3: "medium", 4: "high", 5: "very high",
               NONDETERMINISTIC: "non-deterministic"}


@dataclass(frozen=True)
class DecisionTable:
    """Objects x (condition attributes + decision), all cells filled.

    ``rows[i]`` holds the condition values of ``objects[i]`` in attribute
    order; ``decisions[i]`` its decision value.
    """

    objects: tuple
    attributes: tuple
    decision: str
    rows: tuple
    decisions: tuple

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        object.__setattr__(self, "decisions", tuple(self.decisions))
        if not self.objects:
            raise ValueError("universe must be nonempty")
        if not self.attributes:
            raise ValueError("need at least one condition attribute")
        if self.decision in self.attributes:
            raise ValueError("decision attribute must not be a condition attribute")
        if len(set(self.objects)) != len(self.objects):
            raise ValueError("object ids must be unique")
        if len(self.rows) != len(self.objects) or len(self.decisions) != len(self.objects):
            raise ValueError("one row and one decision per object required")
        if any(len(r) != len(self.attributes) for r in self.rows):
            raise ValueError("every row must give a value for every attribute")

    @classmethod
    def from_values(cls, values: Mapping, attributes, decision, objects=None):
        """Build from a mapping ``object -> {attribute: value}`` (decision included)."""
        objects = tuple(values) if objects is None else tuple(objects)
        rows = [tuple(values[o][a] for a in attributes) for o in objects]
        return cls(objects, tuple(attributes), decision, rows, [values[o][decision] for o in objects])

    def __len__(self):
        return len(self.objects)

    @property
    def all_attributes(self):
        return self.attributes + (self.decision,)

    def _col(self, attr):
        if attr == self.decision:
            return None
        try:
            return self.attributes.index(attr)
        except ValueError:
            raise UnknownAttribute(attr) from None

    def value(self, obj, attr):
        i = self._index(obj)
        j = self._col(attr)
        return self.decisions[i] if j is None else self.rows[i][j]

    def _index(self, obj):
        try:
            return self.objects.index(obj)
        except ValueError:
            raise UnknownObject(obj) from None

    def key(self, i, B):
        """Tuple of object ``i``'s values on attribute list ``B``."""
        cols = [self._col(a) for a in B]
        return tuple(self.decisions[i] if j is None else self.rows[i][j] for j in cols)


def _attr_list(t, B):
    B = list(B)
    for a in B:
        t._col(a)
    return B


def indiscernibility_classes(t: DecisionTable, B) -> list:
    """Partition of the universe by equal values on every attribute in ``B``.

    Classes are tuples of object ids in universe order, listed by their first
    member.
    """
    B = _attr_list(t, B)
    groups = {}
    for i, obj in enumerate(t.objects):
        groups.setdefault(t.key(i, B), []).append(obj)
    return [tuple(g) for g in groups.values()]


def _class_of(t, B):
    out = {}
    for cls in indiscernibility_classes(t, B):
        s = frozenset(cls)
        for o in cls:
            out[o] = s
    return out


def _check_objects(t, X):
    X = frozenset(X)
    unknown = X - set(t.objects)
    if unknown:
        raise UnknownObject(sorted(map(str, unknown))[0])
    return X


def lower_approx(t: DecisionTable, B, X) -> frozenset:
    X = _check_objects(t, X)
    cls = _class_of(t, B)
    return frozenset(o for o in t.objects if cls[o] <= X)


def upper_approx(t: DecisionTable, B, X) -> frozenset:
    X = _check_objects(t, X)
    cls = _class_of(t, B)
    return frozenset(o for o in t.objects if cls[o] & X)


# -- discernibility ----------------------------------------------------------

@dataclass(frozen=True)
class DiscernibilityMatrix:
    """Lower-triangular entries ``cells[i][j]`` (``j < i``) of attribute sets."""

    attributes: tuple
    cells: tuple

    @property
    def n(self):
        return len(self.cells)

    def entry(self, i, j):
        if i == j:
            return frozenset()
        if j > i:
            i, j = j, i
        return self.cells[i][j]

    def nonempty(self):
        for i, row in enumerate(self.cells):
            for j, c in enumerate(row):
                if c:
                    yield i, j, c


def discernibility_matrix(t: DecisionTable, relative=False) -> DiscernibilityMatrix:
    """Attributes on which each pair of objects differs.

    With ``relative=True`` only pairs with different decisions are kept; the
    rest get the empty set.
    """
    cells = []
    for i in range(len(t)):
        row = []
        for j in range(i):
            if relative and t.decisions[i] == t.decisions[j]:
                row.append(frozenset())
                continue
            row.append(frozenset(a for a, vi, vj in zip(t.attributes, t.rows[i], t.rows[j]) if vi != vj))
        cells.append(tuple(row))
    return DiscernibilityMatrix(t.attributes, tuple(cells))


@dataclass(frozen=True)
class BooleanFormula:
    """Monotone CNF: a conjunction of clauses, each a disjunction of attributes."""

    variables: tuple
    clauses: frozenset

    def satisfied_by(self, true_vars) -> bool:
        s = set(true_vars)
        return all(c & s for c in self.clauses)

    def __str__(self):
        if not self.clauses:
            return "TRUE"
        order = {a: i for i, a in enumerate(self.variables)}
        parts = sorted((sorted(c, key=order.get) for c in self.clauses),
                       key=lambda c: (len(c), [order[a] for a in c]))
        return " & ".join("(" + " | ".join(c) + ")" for c in parts)


def absorb(clauses):
    """Drop duplicate clauses and any clause that is a superset of another."""
    uniq = sorted(set(frozenset(c) for c in clauses), key=len)
    kept = []
    for c in uniq:
        if not any(k <= c for k in kept):
            kept.append(c)
    return frozenset(kept)


def discernibility_function(m: DiscernibilityMatrix) -> BooleanFormula:
    return BooleanFormula(m.attributes, absorb(c for _, _, c in m.nonempty()))


def reducts(f: BooleanFormula, max_attrs=16) -> list:
    """All minimal attribute sets meeting every clause, smallest first.

    Exhaustive search in increasing cardinality; a formula without clauses
    has the empty set as its only reduct.
    """
    if len(f.variables) > max_attrs:
        raise TooManyAttributes(f"{len(f.variables)} attributes exceed the limit of {max_attrs}")
    found = []
    for k in range(len(f.variables) + 1):
        for combo in combinations(f.variables, k):
            s = frozenset(combo)
            if any(r <= s for r in found):
                continue
            if all(c & s for c in f.clauses):
                found.append(s)
    return found


def table_reducts(t: DecisionTable, relative=True, max_attrs=16) -> list:
    return reducts(discernibility_function(discernibility_matrix(t, relative)), max_attrs)


# -- rules -------------------------------------------------------------------

@dataclass(frozen=True)
class DecisionRule:
    conditions: tuple  # ((attribute, value), ...)
    decision: object
    support: int

    def matches(self, values: Mapping) -> bool:
        return all(values.get(a) == v for a, v in self.conditions)

    def __str__(self):
        cond = " AND ".join(f"{a} = {_label(v)}" for a, v in self.conditions) or "TRUE"
        return f"IF {cond} THEN {_label(self.decision)} [support {self.support}]"


def _label(v):
    name = LEVEL_NAMES.get(v) if isinstance(v, (int, np.integer)) else None
    return f"{v} ({name})" if name else str(v)


def _sort_key(v):
    return (0, v, "") if isinstance(v, (int, float, np.integer, np.floating)) else (1, 0, str(v))


def extract_decision_rules(t: DecisionTable, B) -> list:
    """One rule per ``B``-indiscernibility class.

    A class whose objects share one decision yields that decision; otherwise
    the rule is labelled 6 (non-deterministic).  Rules are ordered by
    descending support, then by condition values.
    """
    B = _attr_list(t, B)
    groups = {}
    for i in range(len(t)):
        groups.setdefault(t.key(i, B), []).append(t.decisions[i])
    rules = []
    for key, decs in groups.items():
        d = decs[0] if len(set(decs)) == 1 else NONDETERMINISTIC
        rules.append(DecisionRule(tuple(zip(B, key)), d, len(decs)))
    rules.sort(key=lambda r: (-r.support, [_sort_key(v) for _, v in r.conditions]))
    return rules


def classify(rules: Sequence[DecisionRule], values: Mapping):
    """Decision of the first matching rule; 6 when no rule matches."""
    for r in rules:
        if r.matches(values):
            return r.decision
    return NONDETERMINISTIC


def format_rules(rules, decision_name="lugeon") -> str:
    lines = []
    for k, r in enumerate(rules, start=1):
        cond = " AND ".join(f"{a} = {_label(v)}" for a, v in r.conditions) or "TRUE"
        lines.append(f"{k}. IF {cond} THEN {decision_name} = {_label(r.decision)} [support {r.support}]")
    return "\n".join(lines) + ("\n" if lines else "")


# -- scaling -----------------------------------------------------------------

def scale_dataset_to_table(data, discretizers: Mapping) -> DecisionTable:
    """Turn every record into an object whose attributes are level labels.

    ``discretizers`` maps each feature name and the target name to a fitted
    discretizer; the target becomes the decision attribute.
    """
    from .som import apply_discretizer

    names = tuple(data.feature_names)
    for name in (*names, data.target_name):
        if name not in discretizers:
            raise UnknownAttribute(name)
    cols = [apply_discretizer(discretizers[n], data.X[:, j]) for j, n in enumerate(names)]
    rows = list(zip(*(np.asarray(c).tolist() for c in cols))) if len(data) else []
    dec = np.asarray(apply_discretizer(discretizers[data.target_name], data.y)).tolist()
    objects = tuple(f"o{i + 1}" for i in range(len(data)))
    return DecisionTable(objects, names, data.target_name, rows, dec)


# -- CSV ---------------------------------------------------------------------

def format_table_csv(t: DecisionTable) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["object", *t.attributes, t.decision])
    for o, r, d in zip(t.objects, t.rows, t.decisions):
        w.writerow([o, *r, d])
    return out.getvalue()


def parse_table_csv(text, decision=None) -> DecisionTable:
    """Read a table written by :func:`format_table_csv`.

    The decision column is the last one unless named; integer-looking cells
    become ints.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    header = rows[0]
    decision = decision or header[-1]
    if decision not in header[1:]:
        raise UnknownAttribute(decision)
    di = header.index(decision)
    attrs = [h for k, h in enumerate(header[1:], start=1) if k != di]

    def conv(s):
        try:
            return int(s)
        except ValueError:
            return s

    objects = [r[0] for r in rows[1:]]
    vals = [[conv(r[k]) for k in range(1, len(header)) if k != di] for r in rows[1:]]
    decs = [conv(r[di]) for r in rows[1:]]
    return DecisionTable(objects, attrs, decision, vals, decs)
