"""
Hierarchical compositions of fuzzy logic units.

Three builders are provided:

raju chain      level 1 takes the first group of inputs; every later level
                takes the next group plus the previous level's output.
joo             every level takes all external inputs plus the outputs of
                all earlier levels.
jellali         inputs are reduced two at a time; an unpaired signal is
                carried and joined at the last level.

Intermediate outputs enter the antecedents of the consuming unit, so every
builder produces the same node type.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np

from . import fuzzy
from .errors import ArityError, CountOverflowError, HierarchyError, PartitionError, ZeroFiringError
from .fuzzy import FuzzyLogicUnit, MFKind


@dataclass(frozen=True)
class ExternalInput:
    index: int


@dataclass(frozen=True)
class NodeOutput:
    node: int


SignalSource = Union[ExternalInput, NodeOutput]


class TopologyKind(str, Enum):
    RAJU = "raju-chain"
    JOO = "joo"
    JELLALI = "jellali-pairwise"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class HierarchyNode:
    id: int
    flu: FuzzyLogicUnit
    sources: tuple[SignalSource, ...]
    level: int

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if len(self.sources) != self.flu.n_inputs:
            raise ArityError(
                f"node {self.id}: {len(self.sources)} sources for a {self.flu.n_inputs}-input unit"
            )
        if self.level < 1:
            raise HierarchyError(f"node {self.id}: level must be positive")

    def with_flu(self, flu: FuzzyLogicUnit) -> "HierarchyNode":
        return HierarchyNode(self.id, flu, self.sources, self.level)


@dataclass(frozen=True, eq=False)
class HierarchySpec:
    external_arity: int
    nodes: tuple[HierarchyNode, ...]
    terminal: int
    topology_kind: TopologyKind = TopologyKind.CUSTOM

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "topology_kind", TopologyKind(self.topology_kind))
        n = self.external_arity
        if n < 1:
            raise ArityError("a hierarchy needs at least one external input")
        seen: list[int] = []
        consumed = [0] * n
        for node in self.nodes:
            if node.id in seen:
                raise HierarchyError(f"duplicate node id {node.id}")
            for src in node.sources:
                if isinstance(src, ExternalInput):
                    if not 0 <= src.index < n:
                        raise HierarchyError(f"node {node.id}: external index {src.index} out of range")
                    consumed[src.index] += 1
                elif isinstance(src, NodeOutput):
                    if src.node not in seen:
                        raise HierarchyError(
                            f"node {node.id}: source node {src.node} does not precede it"
                        )
                else:
                    raise HierarchyError(f"node {node.id}: unknown source {src!r}")
            seen.append(node.id)
        if self.terminal not in seen:
            raise HierarchyError(f"terminal node {self.terminal} not in the hierarchy")
        if self.topology_kind in (TopologyKind.RAJU, TopologyKind.JELLALI):
            if any(c != 1 for c in consumed):
                raise HierarchyError(
                    f"{self.topology_kind.value}: every external input must feed exactly one node"
                )
        if self.topology_kind is TopologyKind.RAJU:
            for prev, node in zip(self.nodes, self.nodes[1:]):
                internal = [s for s in node.sources if isinstance(s, NodeOutput)]
                if internal != [NodeOutput(prev.id)]:
                    raise HierarchyError(
                        f"raju chain: node {node.id} must consume exactly node {prev.id}'s output"
                    )

    def node(self, node_id: int) -> HierarchyNode:
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise KeyError(node_id)

    def replace(self, node_id: int, flu: FuzzyLogicUnit) -> "HierarchySpec":
        nodes = tuple(nd.with_flu(flu) if nd.id == node_id else nd for nd in self.nodes)
        return HierarchySpec(self.external_arity, nodes, self.terminal, self.topology_kind)


# -- topology plans ----------------------------------------------------------
# A plan is a list of (sources, level); node ids are 1-based positions.

def raju_plan(groups: Sequence[int]) -> list[tuple[list[SignalSource], int]]:
    if not groups or any(g < 1 for g in groups):
        raise PartitionError(f"raju groups must be positive, got {list(groups)}")
    plan = []
    start = 0
    for level, g in enumerate(groups, start=1):
        sources: list[SignalSource] = [ExternalInput(start + i) for i in range(g)]
        if level > 1:
            sources.append(NodeOutput(level - 1))
        plan.append((sources, level))
        start += g
    return plan


def jellali_plan(n: int) -> list[tuple[list[SignalSource], int]]:
    if n < 2:
        raise ArityError(f"pairwise hierarchy needs n >= 2, got {n}")
    plan: list[tuple[list[SignalSource], int]] = []
    signals: list[SignalSource] = [ExternalInput(i) for i in range(n)]
    carried: list[SignalSource] = []
    level = 1
    while len(signals) + len(carried) > 1:
        if len(signals) >= 2:
            nxt = []
            for a, b in zip(signals[0::2], signals[1::2]):
                plan.append(([a, b], level))
                nxt.append(NodeOutput(len(plan)))
            if len(signals) % 2:
                carried.append(signals[-1])
            signals = nxt
        else:
            # last in, first joined: the earliest leftover lands in the final node
            plan.append(([signals[0], carried.pop()], level))
            signals = [NodeOutput(len(plan))]
        level += 1
    return plan


def joo_plan(n: int, levels: int) -> list[tuple[list[SignalSource], int]]:
    if n < 1 or levels < 1:
        raise ArityError(f"joo hierarchy needs n >= 1 and L >= 1, got n={n}, L={levels}")
    return [
        ([ExternalInput(i) for i in range(n)] + [NodeOutput(k) for k in range(1, lvl)], lvl)
        for lvl in range(1, levels + 1)
    ]


def even_groups(n: int, size: int = 2) -> list[int]:
    """Chunks of ``size`` inputs, the remainder in the last group."""
    groups = [size] * (n // size)
    if n % size:
        groups.append(n % size)
    return groups


def plan_arities(plan) -> list[int]:
    return [len(sources) for sources, _ in plan]


def rule_count_for_arities(arities: Sequence[int], m: int) -> int:
    total = 0
    for a in arities:
        total += fuzzy.flat_rule_count(a, m)
        if total > fuzzy.INT64_MAX:
            raise CountOverflowError("total rule count exceeds the 64-bit integer range")
    return total


# -- builders ----------------------------------------------------------------

def _build(plan, variables, kind: TopologyKind, m, mf_kind, output_universe, n) -> HierarchySpec:
    variables = tuple(variables)
    if len(variables) != n:
        raise ArityError(f"expected {n} external variables, got {len(variables)}")
    if m is None:
        m = len(variables[0])
    if output_universe is None:
        output_universe = (
            min(v.universe[0] for v in variables),
            max(v.universe[1] for v in variables),
        )
    for sources, _ in plan:
        fuzzy.checked_product(
            len(variables[s.index]) if isinstance(s, ExternalInput) else m for s in sources
        )
    nodes = []
    for node_id, (sources, level) in enumerate(plan, start=1):
        vars_ = []
        for s in sources:
            if isinstance(s, ExternalInput):
                vars_.append(variables[s.index])
            else:
                vars_.append(fuzzy.make_variable(f"y{s.node}", output_universe, m, mf_kind))
        nodes.append(HierarchyNode(node_id, fuzzy.grid_flu(vars_), tuple(sources), level))
    return HierarchySpec(n, tuple(nodes), len(nodes), kind)


def build_raju_chain(groups, variables, m=None, mf_kind=MFKind.BELL, output_universe=None):
    groups = list(groups)
    if sum(groups) != len(variables):
        raise PartitionError(f"groups {groups} sum to {sum(groups)}, expected {len(variables)} inputs")
    plan = raju_plan(groups)
    return _build(plan, variables, TopologyKind.RAJU, m, mf_kind, output_universe, len(variables))


def build_jellali(n, variables, m=None, mf_kind=MFKind.BELL, output_universe=None):
    plan = jellali_plan(n)
    return _build(plan, variables, TopologyKind.JELLALI, m, mf_kind, output_universe, n)


def build_joo(n, levels, variables, m=None, mf_kind=MFKind.BELL, output_universe=None):
    plan = joo_plan(n, levels)
    return _build(plan, variables, TopologyKind.JOO, m, mf_kind, output_universe, n)


# -- evaluation --------------------------------------------------------------

def node_inputs(spec: HierarchySpec, node: HierarchyNode, X, outputs: dict) -> np.ndarray:
    cols = [X[:, s.index] if isinstance(s, ExternalInput) else outputs[s.node] for s in node.sources]
    return np.stack(cols, axis=1)


def forward(spec: HierarchySpec, X, clamp: bool = True, upto: int | None = None) -> dict[int, np.ndarray]:
    """Outputs of every node (or of nodes before ``upto``) for a batch."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != spec.external_arity:
        raise ArityError(f"expected {spec.external_arity} inputs per row, got shape {X.shape}")
    outputs: dict[int, np.ndarray] = {}
    for node in spec.nodes:
        if node.id == upto:
            break
        Z = node_inputs(spec, node, X, outputs)
        try:
            outputs[node.id] = node.flu.predict(Z, clamp=clamp)
        except ZeroFiringError as exc:
            raise ZeroFiringError(f"node {node.id}: {exc}", row=exc.row, node=node.id) from exc
    return outputs


def predict(spec: HierarchySpec, X, clamp: bool = True) -> np.ndarray:
    return forward(spec, X, clamp=clamp)[spec.terminal]


def evaluate(spec: HierarchySpec, x: Sequence[float], clamp: bool = True) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != spec.external_arity:
        raise ArityError(f"expected {spec.external_arity} inputs, got shape {x.shape}")
    return float(predict(spec, x[None, :], clamp=clamp)[0])


def total_rule_count(spec: HierarchySpec) -> int:
    total = 0
    for node in spec.nodes:
        if not node.flu.is_grid_complete():
            raise HierarchyError(f"node {node.id} is not grid-complete")
        total += node.flu.n_rules
        if total > fuzzy.INT64_MAX:
            raise CountOverflowError("total rule count exceeds the 64-bit integer range")
    return total


# -- serialization -----------------------------------------------------------

def _source_to_dict(src):
    return {"ext": src.index} if isinstance(src, ExternalInput) else {"node": src.node}


def _source_from_dict(doc):
    if "ext" in doc:
        return ExternalInput(int(doc["ext"]))
    return NodeOutput(int(doc["node"]))


def spec_to_dict(spec: HierarchySpec) -> dict:
    return {
        "external_arity": spec.external_arity,
        "topology_kind": spec.topology_kind.value,
        "nodes": [
            {
                "id": nd.id,
                "level": nd.level,
                "sources": [_source_to_dict(s) for s in nd.sources],
                "flu": fuzzy.flu_to_dict(nd.flu),
            }
            for nd in spec.nodes
        ],
        "terminal": spec.terminal,
    }


def spec_from_dict(doc: dict) -> HierarchySpec:
    nodes = tuple(
        HierarchyNode(
            int(nd["id"]),
            fuzzy.flu_from_dict(nd["flu"]),
            tuple(_source_from_dict(s) for s in nd["sources"]),
            int(nd["level"]),
        )
        for nd in doc["nodes"]
    )
    return HierarchySpec(int(doc["external_arity"]), nodes, int(doc["terminal"]), doc["topology_kind"])


def dumps(spec: HierarchySpec, **kw) -> str:
    return json.dumps(spec_to_dict(spec), **kw)


def loads(text: str) -> HierarchySpec:
    return spec_from_dict(json.loads(text))
