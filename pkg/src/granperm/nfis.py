"""Takagi-Sugeno-Kang neuro-fuzzy inference.

A rule base holds M rules over n inputs.  Rule k fires with strength
``w_k(x) = prod_j mu_kj(x_j)`` and proposes the affine output
``f_k(x) = p_k0 + sum_j p_kj x_j``; the system output is the firing-weighted
mean ``y = sum_k w_k f_k / sum_k w_k``.

Training is the usual ANFIS hybrid: consequents by linear least squares with
premises frozen, premises by gradient descent on the squared error.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyInput, NumericalUnderflowWarning, SingularSystem

MF_KINDS = ("gaussian", "generalized_bell")
UNDERFLOW = 1e-300
SIGMA_FLOOR = 1e-6
RIDGE = 1e-8
RULEBASE_FORMAT = "granperm.tsk/1"


@dataclass(frozen=True)
class MembershipFunction:
    c: float
    sigma: float
    b: float = 2.0
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind not in MF_KINDS:
            raise ValueError(f"unknown membership function kind {self.kind!r}")
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if not self.b > 0:
            raise ValueError("b must be > 0")

    def __call__(self, x):
        return mf_eval(self, x)


def _mu(kind, u, b):
    if kind == "gaussian":
        return np.exp(-0.5 * u * u)
    return 1.0 / (1.0 + (u * u) ** b)


def _log_mu(kind, u, b):
    if kind == "gaussian":
        return -0.5 * u * u
    return -np.log1p((u * u) ** b)


def mf_eval(mf: MembershipFunction, x):
    """Membership degree of ``x``: gaussian ``exp(-(x-c)^2 / 2 sigma^2)`` or
    generalized bell ``1 / (1 + |(x-c)/sigma|^(2b))``."""
    u = (np.asarray(x, dtype=float) - mf.c) / mf.sigma
    out = _mu(mf.kind, u, mf.b)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TskRule:
    premises: tuple
    consequent: tuple

    def __post_init__(self):
        object.__setattr__(self, "premises", tuple(self.premises))
        object.__setattr__(self, "consequent", tuple(float(p) for p in self.consequent))
        if len(self.consequent) != len(self.premises) + 1:
            raise ValueError("consequent needs one constant plus one weight per input")
        if not all(math.isfinite(p) for p in self.consequent):
            raise ValueError("consequent weights must be finite")

    @property
    def n_inputs(self):
        return len(self.premises)


def _check_x(x, n):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != n:
        raise DimensionMismatch(f"expected {n} inputs, got {x.shape[0]}")
    return x


def firing_strength(rule: TskRule, x) -> float:
    x = _check_x(x, rule.n_inputs)
    w = 1.0
    for mf, xj in zip(rule.premises, x):
        w *= mf_eval(mf, xj)
    return float(w)


def consequent_eval(rule: TskRule, x) -> float:
    x = _check_x(x, rule.n_inputs)
    p = rule.consequent
    return float(p[0] + sum(pj * xj for pj, xj in zip(p[1:], x)))


class TskRuleBase:
    """Immutable collection of rules sharing one input vector.

    Parameters are also held as ``(M, n)`` arrays (``centers``, ``sigmas``,
    ``shapes``) and an ``(M, n + 1)`` array ``coef`` for vectorized use.  All
    membership functions in one rule base have the same kind.
    """

    def __init__(self, rules: Sequence[TskRule], input_names=None):
        rules = tuple(rules)
        if not rules:
            raise ValueError("a rule base needs at least one rule")
        n = rules[0].n_inputs
        if any(r.n_inputs != n for r in rules):
            raise ValueError("all rules must share the same number of inputs")
        kinds = {mf.kind for r in rules for mf in r.premises}
        if len(kinds) > 1:
            raise ValueError("mixed membership function kinds in one rule base")
        if input_names is None:
            input_names = tuple(f"x{j + 1}" for j in range(n))
        input_names = tuple(input_names)
        if len(input_names) != n:
            raise ValueError("input_names length does not match the rules")
        self._rules = rules
        self._names = input_names
        self._kind = kinds.pop() if kinds else "gaussian"
        self._c = np.array([[mf.c for mf in r.premises] for r in rules], dtype=float).reshape(len(rules), n)
        self._s = np.array([[mf.sigma for mf in r.premises] for r in rules], dtype=float).reshape(len(rules), n)
        self._b = np.array([[mf.b for mf in r.premises] for r in rules], dtype=float).reshape(len(rules), n)
        self._p = np.array([r.consequent for r in rules], dtype=float)
        for a in (self._c, self._s, self._b, self._p):
            a.flags.writeable = False

    @classmethod
    def from_arrays(cls, centers, sigmas, coef, shapes=None, kind="gaussian", input_names=None):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        sigmas = np.broadcast_to(np.asarray(sigmas, dtype=float), centers.shape)
        shapes = np.broadcast_to(np.asarray(2.0 if shapes is None else shapes, dtype=float), centers.shape)
        coef = np.atleast_2d(np.asarray(coef, dtype=float))
        if coef.shape != (centers.shape[0], centers.shape[1] + 1):
            raise ValueError(f"coef must have shape {(centers.shape[0], centers.shape[1] + 1)}")
        rules = [
            TskRule(
                tuple(MembershipFunction(float(c), float(s), float(b), kind)
                      for c, s, b in zip(centers[k], sigmas[k], shapes[k])),
                tuple(coef[k]),
            )
            for k in range(centers.shape[0])
        ]
        return cls(rules, input_names)

    def replace(self, centers=None, sigmas=None, coef=None, shapes=None):
        return TskRuleBase.from_arrays(
            self._c if centers is None else centers,
            self._s if sigmas is None else sigmas,
            self._p if coef is None else coef,
            self._b if shapes is None else shapes,
            self._kind,
            self._names,
        )

    rules = property(lambda self: self._rules)
    input_names = property(lambda self: self._names)
    kind = property(lambda self: self._kind)
    centers = property(lambda self: self._c)
    sigmas = property(lambda self: self._s)
    shapes = property(lambda self: self._b)
    coef = property(lambda self: self._p)
    n_inputs = property(lambda self: len(self._names))

    def __len__(self):
        return len(self._rules)

    def __repr__(self):
        return f"TskRuleBase(M={len(self)}, inputs={self._names}, kind={self._kind!r})"


# -- forward pass ------------------------------------------------------------

def _as_inputs(rb, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != rb.n_inputs:
        raise DimensionMismatch(f"expected {rb.n_inputs} inputs, got {X.shape[1]}")
    return X


def _forward(rb, X):
    """Return (u, mu, w, f, wbar, y, underflow) for inputs X of shape (N, n)."""
    u = (X[:, None, :] - rb.centers) / rb.sigmas
    mu = _mu(rb.kind, u, rb.shapes)
    w = mu.prod(axis=2)
    # Elementwise rather than matmul so each row's result is independent of batch size.
    f = rb.coef[:, 0] + (X[:, None, :] * rb.coef[None, :, 1:]).sum(axis=2)
    S = w.sum(axis=1)
    under = ~(S >= UNDERFLOW)
    wbar = np.empty_like(w)
    ok = ~under
    wbar[ok] = w[ok] / S[ok, None]
    if under.any():
        logw = _log_mu(rb.kind, u[under], rb.shapes).sum(axis=2)
        wbar[under] = 0.0
        wbar[np.flatnonzero(under), logw.argmax(axis=1)] = 1.0
    y = (wbar * f).sum(axis=1)
    return u, mu, w, f, wbar, y, under


def tsk_predict(rb: TskRuleBase, X):
    """Vectorized output for rows of ``X``.

    Returns ``(y, underflow)``; ``underflow`` marks rows whose total firing
    strength fell below 1e-300 and which took the strongest rule's output.
    """
    X = _as_inputs(rb, X)
    *_, y, under = _forward(rb, X)
    return y, under


def tsk_eval(rb: TskRuleBase, x) -> float:
    x = _check_x(x, rb.n_inputs)
    y, under = tsk_predict(rb, x[None, :])
    if under[0]:
        warnings.warn("total firing strength underflowed; using the strongest rule",
                      NumericalUnderflowWarning, stacklevel=2)
    return float(y[0])


def error_level(rb: TskRuleBase, data) -> float:
    """Root-mean-square error of the rule base on ``data`` (target units)."""
    if len(data.y) == 0:
        raise EmptyInput("error level of an empty dataset")
    y, _ = tsk_predict(rb, data.X)
    r = data.y - y
    return float(np.sqrt(np.mean(r * r)))


# -- subtractive clustering --------------------------------------------------

def subtractive_cluster(points, radius, accept_ratio=0.5, reject_ratio=0.15, squash=1.5):
    """Mountain-style subtractive clustering on points scaled to [0, 1].

    ``points`` is an ``(N, d)`` array or a dataset (its ``X`` is used).
    Returns the accepted centers as rows of an array, in acceptance order.
    """
    X = np.asarray(getattr(points, "X", points), dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[0] == 0:
        raise EmptyInput("subtractive clustering of an empty dataset")
    if not 0 < radius <= 1:
        raise ValueError("radius must lie in (0, 1]")
    alpha = 4.0 / radius**2
    beta = 4.0 / (squash * radius) ** 2
    sq = (X * X).sum(axis=1)
    D2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    P = np.exp(-alpha * D2).sum(axis=1)

    first = int(np.argmax(P))
    p_first = P[first]
    chosen = [first]
    P = P - p_first * np.exp(-beta * D2[first])
    while True:
        k = int(np.argmax(P))
        pk = P[k]
        if pk <= 0:
            break
        if pk > accept_ratio * p_first:
            pass
        elif pk < reject_ratio * p_first:
            break
        else:
            d_min = math.sqrt(D2[k, chosen].min())
            if d_min / radius + pk / p_first < 1.0:
                P[k] = 0.0
                continue
        chosen.append(k)
        P = P - pk * np.exp(-beta * D2[k])
    return X[chosen].copy()


def init_rulebase_from_clusters(centers, data, radius, kind="gaussian", b=2.0, input_names=None):
    """One rule per cluster center, consequents zero.

    Only the first ``n`` center coordinates are used (centers found in the
    joint input-output space carry the output last).  Premise widths are
    ``radius * range_j / sqrt(8)`` with ``range_j`` taken over ``data``.
    """
    X = np.asarray(data.X, dtype=float)
    n = X.shape[1]
    C = np.atleast_2d(np.asarray(centers, dtype=float))
    if C.shape[0] < 1:
        raise ValueError("need at least one center")
    if C.shape[1] < n:
        raise DimensionMismatch(f"centers have {C.shape[1]} coordinates for {n} inputs")
    span = X.max(axis=0) - X.min(axis=0) if len(X) else np.ones(n)
    span = np.where(span > 0, span, 1.0)
    sig = radius * span / math.sqrt(8.0)
    M = C.shape[0]
    names = input_names or getattr(data, "feature_names", None)
    return TskRuleBase.from_arrays(C[:, :n], np.tile(sig, (M, 1)), np.zeros((M, n + 1)),
                                   np.full((M, n), float(b)), kind, names)


# -- training ----------------------------------------------------------------

def _design(wbar, X):
    N, M = wbar.shape
    Xa = np.hstack([np.ones((N, 1)), X])
    return (wbar[:, :, None] * Xa[:, None, :]).reshape(N, M * Xa.shape[1])


def lse_consequents(rb: TskRuleBase, data) -> TskRuleBase:
    """Least-squares consequents for fixed premises."""
    X = _as_inputs(rb, data.X)
    t = np.asarray(data.y, dtype=float)
    if len(t) == 0:
        raise EmptyInput("least squares on an empty dataset")
    *_, wbar, _, _ = _forward(rb, X)
    A = _design(wbar, X)
    p, _, rank, _ = np.linalg.lstsq(A, t, rcond=None)
    if rank < A.shape[1]:
        k = A.shape[1]
        A_aug = np.vstack([A, math.sqrt(RIDGE) * np.eye(k)])
        t_aug = np.concatenate([t, np.zeros(k)])
        p = np.linalg.lstsq(A_aug, t_aug, rcond=None)[0]
    if not np.all(np.isfinite(p)):
        raise SingularSystem("consequent least squares produced non-finite weights")
    return rb.replace(coef=p.reshape(len(rb), rb.n_inputs + 1))


def premise_gradients(rb: TskRuleBase, data):
    """Analytic gradient of the summed squared error over premise parameters.

    Returns ``(sse, d_centers, d_sigmas, d_shapes)``; the arrays have shape
    ``(M, n)``.  Rows that hit the underflow fallback contribute nothing.
    """
    X = _as_inputs(rb, data.X)
    t = np.asarray(data.y, dtype=float)
    u, mu, w, f, wbar, y, under = _forward(rb, X)
    r = y - t
    G = 2.0 * r[:, None] * (f - y[:, None]) * wbar
    G[under] = 0.0
    s = rb.sigmas
    if rb.kind == "gaussian":
        dlog_c = u / s
        dlog_s = u * u / s
        dlog_b = np.zeros_like(u)
    else:
        b = rb.shapes
        au = np.abs(u)
        nz = au > 0
        g = np.where(nz, au ** (2 * b), 0.0)
        g_over_u = np.where(nz, np.sign(u) * au ** np.where(nz, 2 * b - 1, 1.0), 0.0)
        dlog_c = mu * 2 * b * g_over_u / s
        dlog_s = mu * 2 * b * g / s
        dlog_b = np.where(nz, -mu * g * 2 * np.log(np.where(nz, au, 1.0)), 0.0)
    Gx = G[:, :, None]
    return (float(r @ r), (Gx * dlog_c).sum(axis=0), (Gx * dlog_s).sum(axis=0),
            (Gx * dlog_b).sum(axis=0))


def _step(rb, grads, lr):
    _, dc, ds, db = grads
    centers = rb.centers - lr * dc
    sigmas = np.maximum(rb.sigmas - lr * ds, SIGMA_FLOOR)
    shapes = rb.shapes
    if rb.kind == "generalized_bell":
        shapes = np.maximum(shapes - lr * db, SIGMA_FLOOR)
    return rb.replace(centers=centers, sigmas=sigmas, shapes=shapes)


def gradient_step_premises(rb: TskRuleBase, data, lr) -> TskRuleBase:
    """One batch steepest-descent step on the premise parameters."""
    if not lr > 0:
        raise ValueError("lr must be > 0")
    return _step(rb, premise_gradients(rb, data), lr)


@dataclass(frozen=True)
class HybridTrainConfig:
    """Hybrid training settings.

    ``lr`` is the initial step length in parameter space; each premise step
    moves by the current step length along the normalized negative gradient,
    and the length adapts (x1.1 after four straight error decreases, x0.9
    after two up-down oscillations).
    """

    epochs: int = 100
    lr: float = 0.01
    influence_radius: float = 0.5
    checking_data: object = None
    adapt_step: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if not 0 < self.influence_radius <= 1:
            raise ValueError("influence_radius must lie in (0, 1]")


def train_hybrid(rb: TskRuleBase, train, cfg: HybridTrainConfig):
    """Alternate least-squares consequents and premise descent.

    The error level of every epoch's model (after its least-squares pass) is
    measured on ``cfg.checking_data`` when given, else on ``train``; the
    best model is returned with its error level.
    """
    check = cfg.checking_data if cfg.checking_data is not None else train
    rb = lse_consequents(rb, train)
    best_rb, best_err = rb, error_level(rb, check)
    kappa = cfg.lr
    history = []
    for _ in range(cfg.epochs):
        grads = premise_gradients(rb, train)
        history.append(grads[0])
        if cfg.adapt_step:
            kappa = _adapt(kappa, history)
        norm = math.sqrt(sum(float((g * g).sum()) for g in grads[1:]))
        if not norm > 0 or not math.isfinite(norm):
            break
        rb = lse_consequents(_step(rb, grads, kappa / norm), train)
        err = error_level(rb, check)
        if err < best_err:
            best_rb, best_err = rb, err
    return best_rb, best_err


def _adapt(kappa, history):
    h = history
    if len(h) >= 5 and all(h[i] > h[i + 1] for i in range(-5, -1)):
        return kappa * 1.1
    if len(h) >= 5:
        d = np.sign(np.diff(h[-5:]))
        if np.all(d[:-1] * d[1:] < 0):
            return kappa * 0.9
    return kappa


# -- unit changes ------------------------------------------------------------

def to_raw_units(rb: TskRuleBase, scaler) -> TskRuleBase:
    """Re-express a rule base trained on min-max scaled inputs in raw units.

    With ``x_scaled = (x - lo) / width`` the outputs are identical: centers
    and widths map affinely and consequent weights absorb the scaling.
    """
    lo = np.asarray(scaler.lo, dtype=float)
    width = np.asarray(scaler.width, dtype=float)
    p = rb.coef
    coef = np.empty_like(p)
    coef[:, 1:] = p[:, 1:] / width
    coef[:, 0] = p[:, 0] - (p[:, 1:] * lo / width).sum(axis=1)
    return rb.replace(centers=lo + width * rb.centers, sigmas=width * rb.sigmas, coef=coef)


def to_scaled_units(rb: TskRuleBase, scaler) -> TskRuleBase:
    lo = np.asarray(scaler.lo, dtype=float)
    width = np.asarray(scaler.width, dtype=float)
    p = rb.coef
    coef = np.empty_like(p)
    coef[:, 1:] = p[:, 1:] * width
    coef[:, 0] = p[:, 0] + (p[:, 1:] * lo).sum(axis=1)
    return rb.replace(centers=(rb.centers - lo) / width, sigmas=rb.sigmas / width, coef=coef)


# -- serialization -----------------------------------------------------------

def rulebase_to_dict(rb: TskRuleBase) -> dict:
    return {
        "format": RULEBASE_FORMAT,
        "input_names": list(rb.input_names),
        "rules": [
            {
                "premises": [
                    {"kind": mf.kind, "c": mf.c, "sigma": mf.sigma, "b": mf.b}
                    for mf in rule.premises
                ],
                "consequent": list(rule.consequent),
            }
            for rule in rb.rules
        ],
    }


def rulebase_from_dict(d) -> TskRuleBase:
    """Inverse of :func:`rulebase_to_dict`.

    Rules may also be given in compact form: ``{"kind", "centers", "sigmas",
    "b", "consequent"}`` with one list entry per input.
    """
    rules = []
    for spec in d["rules"]:
        if "premises" in spec:
            premises = [MembershipFunction(float(m["c"]), float(m["sigma"]), float(m.get("b", 2.0)),
                                           m.get("kind", "gaussian")) for m in spec["premises"]]
        else:
            n = len(spec["centers"])
            kind = spec.get("kind", "gaussian")
            b = spec.get("b", 2.0)
            bs = b if isinstance(b, list) else [b] * n
            premises = [MembershipFunction(float(c), float(s), float(bb), kind)
                        for c, s, bb in zip(spec["centers"], spec["sigmas"], bs)]
        rules.append(TskRule(tuple(premises), tuple(spec["consequent"])))
    return TskRuleBase(rules, d.get("input_names"))


def save_rulebase(rb: TskRuleBase, path):
    Path(path).write_text(dumps_rulebase(rb), encoding="utf-8")


def dumps_rulebase(rb: TskRuleBase) -> str:
    return json.dumps(rulebase_to_dict(rb), indent=2) + "\n"


def load_rulebase(path) -> TskRuleBase:
    return rulebase_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def published_rulebase() -> TskRuleBase:
    """The published four-rule consequent set with the bundled premise layout.

    Consequent weights are the published values (order ``r, p1..p4`` over
    inputs z, section length, RQD, TWR).  The gaussian premises are not
    published; the bundled layout is a plausible stand-in for synthesis.
    """
    text = resources.files("granperm").joinpath("data/published_rules.json").read_text(encoding="utf-8")
    return rulebase_from_dict(json.loads(text))


def format_rules(rb: TskRuleBase, precision=4) -> str:
    """Human-readable if-then listing with membership and consequent parameters."""
    names = rb.input_names
    lines = []
    for k, rule in enumerate(rb.rules, start=1):
        conds = " & ".join(f"({name} in in{j + 1}mf{k})" for j, name in enumerate(names))
        lines.append(f"{k}. If {conds} then output{k} = f{k}")
    lines.append("")
    for k, rule in enumerate(rb.rules, start=1):
        p = rule.consequent
        terms = " ".join(f"{'+' if pj >= 0 else '-'} {abs(pj):.{precision}f}*{name}"
                         for pj, name in zip(p[1:], names))
        lines.append(f"f{k} = {p[0]:.{precision}f} {terms}")
    lines.append("")
    for k, rule in enumerate(rb.rules, start=1):
        for j, mf in enumerate(rule.premises):
            extra = f", b={mf.b:.{precision}f}" if mf.kind == "generalized_bell" else ""
            lines.append(f"in{j + 1}mf{k}: {mf.kind}(c={mf.c:.{precision}f}, "
                         f"sigma={mf.sigma:.{precision}f}{extra})")
    return "\n".join(lines) + "\n"
