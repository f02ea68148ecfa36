"""
Hybrid learning for TSK units.

Each epoch alternates a least-squares solve for the affine consequents
(premises fixed) with one normalized gradient-descent step on the
membership parameters (consequents fixed). The step length adapts with the
classic two heuristics: grow after a run of error decreases, shrink when
the error oscillates.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, replace

import numpy as np

from . import hierarchy
from .errors import ArityError, DivergenceError, UnsupportedKindError, ZeroFiringError
from .fuzzy import FuzzyLogicUnit, MFKind, grid_flu, make_variable
from .hierarchy import HierarchySpec, NodeOutput


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """Input matrix ``X`` (n_rows, n_inputs) and targets ``y`` (n_rows,)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError("a training set needs at least one row")
        if X.shape[0] != y.shape[0]:
            raise ArityError(f"{X.shape[0]} input rows but {y.shape[0]} targets")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ValueError("training data contains non-finite values")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_rows(cls, rows):
        rows = list(rows)
        return cls(np.array([r[0] for r in rows], dtype=float), np.array([r[1] for r in rows], dtype=float))

    @property
    def rows(self):
        return [(tuple(x), t) for x, t in zip(self.X.tolist(), self.y.tolist())]

    @property
    def arity(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.X.shape[0]


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 50
    step_size: float = 0.01
    step_increase: float = 1.1
    step_decrease: float = 0.9
    increase_after: int = 4       # consecutive SSE decreases
    decrease_after: int = 2       # consecutive alternations
    m: int = 3
    mf_kind: MFKind = MFKind.BELL
    margin: float = 0.05
    ridge: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        for name in ("step_size", "step_increase", "step_decrease", "ridge"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.m < 2:
            raise ValueError("need at least 2 terms per input")
        object.__setattr__(self, "mf_kind", MFKind(self.mf_kind))

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["mf_kind"] = self.mf_kind.value
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainingConfig":
        return cls(**doc)


@dataclass
class TrainingReport:
    sse: list[float]
    best_epoch: int
    index: float | None = None
    wall_time: float = 0.0

    @property
    def final_sse(self) -> float:
        return self.sse[self.best_epoch]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "sse"])
        for e, s in enumerate(self.sse):
            w.writerow([e, f"{s:.17g}"])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"final_sse": self.final_sse, "best_epoch": self.best_epoch, "index": self.index}

    @classmethod
    def from_files(cls, csv_text: str, summary: dict) -> "TrainingReport":
        rows = list(csv.DictReader(io.StringIO(csv_text)))
        return cls([float(r["sse"]) for r in rows], int(summary["best_epoch"]), summary.get("index"))


def fit_universes(data: TrainingSet, margin: float = 0.05) -> list[tuple[float, float]]:
    out = []
    for col in data.X.T:
        lo, hi = float(col.min()), float(col.max())
        span = hi - lo
        if span == 0.0:
            out.append((lo - 0.5, hi + 0.5))
        else:
            out.append((lo - margin * span, hi + margin * span))
    return out


def initial_flu(data: TrainingSet, cfg: TrainingConfig = TrainingConfig(), names=None) -> FuzzyLogicUnit:
    """Grid unit over the data's fitted universes with zero consequents."""
    names = names or [f"x{i + 1}" for i in range(data.arity)]
    universes = fit_universes(data, cfg.margin)
    return grid_flu([make_variable(nm, u, cfg.m, cfg.mf_kind) for nm, u in zip(names, universes)])


def _normalized_firing(flu: FuzzyLogicUnit, X) -> np.ndarray:
    W = flu.firing(X)
    S = W.sum(axis=1)
    dead = np.flatnonzero(S <= 0.0)
    if dead.size:
        raise ZeroFiringError(
            f"row {dead[0]} fires no rule; widen the input universes", row=int(dead[0])
        )
    return W / S[:, None]


def _design_matrix(flu: FuzzyLogicUnit, X) -> np.ndarray:
    Wn = _normalized_firing(flu, X)
    Xe = np.hstack([X, np.ones((X.shape[0], 1))])
    # column k*(n+1)+i multiplies consequent coefficient i of rule k
    return (Wn[:, :, None] * Xe[:, None, :]).reshape(X.shape[0], -1)


def lse_consequents(flu: FuzzyLogicUnit, data: TrainingSet, ridge: float = 1e-9) -> FuzzyLogicUnit:
    """Least-squares consequents for fixed premises.

    Minimizes ||Phi c - y||^2 + ridge * ||c||^2, the damped normal-equation
    solution, solved through the stacked system for numerical stability.
    """
    if data.arity != flu.n_inputs:
        raise ArityError(f"data has {data.arity} inputs, unit has {flu.n_inputs}")
    Phi = _design_matrix(flu, data.X)
    P = Phi.shape[1]
    # canonical column signs: data reflected through the origin then yields
    # bit-for-bit reflected coefficients
    signs = np.where(Phi.sum(axis=0) < 0.0, -1.0, 1.0)
    A = np.vstack([Phi * signs, np.sqrt(ridge) * np.eye(P)])
    b = np.concatenate([data.y, np.zeros(P)])
    coef = np.linalg.lstsq(A, b, rcond=None)[0] * signs
    return flu.with_consequents(coef)


def sse(flu: FuzzyLogicUnit, data: TrainingSet, clamp: bool = False) -> float:
    r = flu.predict(data.X, clamp=clamp) - data.y
    return float(r @ r)


def premise_gradient(flu: FuzzyLogicUnit, data: TrainingSet) -> np.ndarray:
    """d SSE / d premise parameters, consequents held fixed.

    Ordered like ``flu.premise_vector()``.
    """
    for v in flu.inputs:
        for t in v.terms:
            if not t.differentiable:
                raise UnsupportedKindError(
                    f"input {v.name!r} term {t.label!r}: {t.kind.value} premises cannot be trained by gradient"
                )
    if data.arity != flu.n_inputs:
        raise ArityError(f"data has {data.arity} inputs, unit has {flu.n_inputs}")
    X = data.X
    mus = flu.memberships(X)
    W = flu.firing(X, mus)
    S = W.sum(axis=1)
    if np.any(S <= 0.0):
        raise ZeroFiringError("a row fires no rule; widen the input universes")
    F = flu.rule_outputs(X)
    yhat = np.einsum("nk,nk->n", W, F) / S
    # dSSE/dw_k per row
    G = (2.0 * (yhat - data.y) / S)[:, None] * (F - yhat[:, None])
    A = flu.antecedents
    grad = []
    for i, var in enumerate(flu.inputs):
        others = np.ones_like(W)
        for l, mu in enumerate(mus):
            if l != i:
                others *= mu[:, A[:, l]]
        GO = G * others
        for j, term in enumerate(var.terms):
            coeff = GO[:, A[:, i] == j].sum(axis=1)
            dmu = term.param_gradient(X[:, i])
            grad.extend(dmu @ coeff)
    return np.array(grad)


_PARAM_FLOOR = 1e-3      # fraction of the universe span


def _param_scales(flu: FuzzyLogicUnit) -> np.ndarray:
    """Universe span for location/width parameters, 1 for bell slopes."""
    scales = []
    for v in flu.inputs:
        span = v.universe[1] - v.universe[0]
        for t in v.terms:
            if t.kind is MFKind.BELL:
                scales.extend([span, 1.0, span])
            else:
                scales.extend([span] * len(t.params))
    return np.array(scales)


def _project(flu: FuzzyLogicUnit, theta: np.ndarray) -> np.ndarray:
    # widths and slopes stay positive, centres stay inside the universe
    theta = theta.copy()
    pos = 0
    for v in flu.inputs:
        lo, hi = v.universe
        floor = _PARAM_FLOOR * (hi - lo)
        for t in v.terms:
            if t.kind is MFKind.GAUSSIAN:
                theta[pos] = min(max(theta[pos], lo), hi)
                theta[pos + 1] = max(theta[pos + 1], floor)
            elif t.kind is MFKind.BELL:
                theta[pos] = max(theta[pos], floor)
                theta[pos + 1] = max(theta[pos + 1], _PARAM_FLOOR)
                theta[pos + 2] = min(max(theta[pos + 2], lo), hi)
            pos += len(t.params)
    return theta


def _adapt_step(step: float, history: list[float], cfg: TrainingConfig) -> tuple[float, bool]:
    """Return the new step size and whether the rule history should reset."""
    diffs = np.sign(np.diff(history))
    k = cfg.increase_after
    if len(diffs) >= k and np.all(diffs[-k:] < 0):
        return step * cfg.step_increase, True
    k = cfg.decrease_after + 1
    if len(diffs) >= k:
        tail = diffs[-k:]
        if np.all(tail != 0) and np.all(tail[1:] == -tail[:-1]):
            return step * cfg.step_decrease, True
    return step, False


def train_hybrid(flu: FuzzyLogicUnit, data: TrainingSet, cfg: TrainingConfig = TrainingConfig()):
    """Hybrid-train ``flu`` on ``data``.

    Epoch 0 is the initial least-squares pass; each following epoch is one
    premise gradient step followed by a fresh least-squares pass. The unit
    with the lowest training SSE is returned.
    """
    if data.arity != flu.n_inputs:
        raise ArityError(f"data has {data.arity} inputs, unit has {flu.n_inputs}")
    t0 = time.perf_counter()
    trainable = all(t.differentiable for v in flu.inputs for t in v.terms)
    current = lse_consequents(flu, data, cfg.ridge)
    errors = [sse(current, data)]
    if not np.isfinite(errors[0]):
        raise DivergenceError("SSE is not finite at epoch 0", epoch=0)
    best, best_epoch = current, 0
    step = cfg.step_size
    history = [errors[0]]
    scales = _param_scales(flu)
    for epoch in range(1, cfg.epochs + 1):
        if not trainable:
            break
        # step of fixed length in span-normalized parameter coordinates
        g = premise_gradient(current, data) * scales
        norm = float(np.linalg.norm(g))
        if not np.isfinite(norm):
            raise DivergenceError(f"premise gradient is not finite at epoch {epoch}", epoch=epoch)
        if norm == 0.0:
            break
        theta = _project(current, current.premise_vector() - step * scales * g / norm)
        current = lse_consequents(current.with_premise_vector(theta), data, cfg.ridge)
        e = sse(current, data)
        if not np.isfinite(e):
            raise DivergenceError(f"SSE is not finite at epoch {epoch}", epoch=epoch)
        errors.append(e)
        if e < errors[best_epoch]:
            best, best_epoch = current, epoch
        history.append(e)
        step, reset = _adapt_step(step, history, cfg)
        if reset:
            history = [e]
    report = TrainingReport(errors, best_epoch, wall_time=time.perf_counter() - t0)
    return best, report


def evaluate_sse(model, test: TrainingSet) -> float:
    """Sum of squared errors of a unit or hierarchy on ``test``.

    Inputs are clamped to the model's universes; no row is skipped.
    """
    if isinstance(model, HierarchySpec):
        pred = hierarchy.predict(model, test.X, clamp=True)
    else:
        pred = model.predict(test.X, clamp=True)
    r = pred - test.y
    return float(np.sum(r * r))


def train_hierarchy(spec: HierarchySpec, data: TrainingSet, cfg: TrainingConfig = TrainingConfig(),
                    widen: float = 0.10):
    """Greedy level-by-level training of a hierarchy.

    Nodes are trained in topological order, each to approximate the global
    target from its own inputs. Before a node is trained, every intermediate
    input gets a universe spanning the producing node's observed output
    range widened by ``widen`` of the span on each side, and a fresh grid
    partition over it. Returns the trained spec and a report per node.
    """
    if data.arity != spec.external_arity:
        raise ArityError(f"data has {data.arity} inputs, hierarchy has {spec.external_arity}")
    reports = {}
    for node in spec.nodes:
        outputs = hierarchy.forward(spec, data.X, clamp=True, upto=node.id)
        inputs = list(node.flu.inputs)
        for i, src in enumerate(node.sources):
            if isinstance(src, NodeOutput):
                col = outputs[src.node]
                lo, hi = float(col.min()), float(col.max())
                span = hi - lo
                u = (lo - widen * span, hi + widen * span) if span > 0 else (lo - 0.5, hi + 0.5)
                m = len(inputs[i])
                kind = inputs[i].terms[0].kind
                inputs[i] = make_variable(inputs[i].name, u, m, kind)
        flu = grid_flu(inputs)
        Z = hierarchy.node_inputs(spec, node, data.X, outputs)
        trained, rep = train_hybrid(flu, TrainingSet(flu.clamp(Z), data.y), cfg)
        spec = spec.replace(node.id, trained)
        reports[node.id] = rep
    return spec, reports


def with_index(report: TrainingReport, index: float) -> TrainingReport:
    return replace(report, index=index)


def report_files(report: TrainingReport) -> tuple[str, str]:
    """CSV trace and JSON summary text for a report."""
    return report.to_csv(), json.dumps(report.summary(), sort_keys=True)
