"""
Takagi-Sugeno fuzzy logic units.

A FuzzyLogicUnit (FLU) is a multi-input, single-output rule base with
product conjunction and firing-strength-weighted average defuzzification.
Rule consequents are affine in the crisp inputs:

    y = sum_k w_k * (p_k . x + r_k) / sum_k w_k

Shapes used throughout:

X           (n_samples, n_inputs)       crisp inputs
W           (n_samples, n_rules)        firing strengths
F           (n_samples, n_rules)        rule (consequent) outputs
A           (n_rules, n_inputs)         antecedent term indices
C           (n_rules, n_inputs + 1)     consequent coefficients, bias last
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import (
    ArityError,
    CountOverflowError,
    PartitionError,
    UnsupportedKindError,
    ZeroFiringError,
)

INT64_MAX = 2**63 - 1

# degree threshold defining the "effective support" of unbounded MFs
_SUPPORT_EPS = 1e-3


class MFKind(str, Enum):
    GAUSSIAN = "gaussian"
    BELL = "generalized-bell"
    TRIANGULAR = "triangular"


_N_PARAMS = {MFKind.GAUSSIAN: 2, MFKind.BELL: 3, MFKind.TRIANGULAR: 3}


@dataclass(frozen=True)
class MembershipFunction:
    """A single linguistic term.

    Parameters by kind: gaussian ``(c, sigma)``; generalized-bell
    ``(a, b, c)`` with ``1 / (1 + |(x - c) / a|**(2b))``; triangular
    ``(left, peak, right)``.
    """

    kind: MFKind
    params: tuple[float, ...]
    label: str

    def __post_init__(self):
        object.__setattr__(self, "kind", MFKind(self.kind))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if not self.label:
            raise ValueError("membership function label must be nonempty")
        if len(self.params) != _N_PARAMS[self.kind]:
            raise ValueError(
                f"{self.kind.value} takes {_N_PARAMS[self.kind]} parameters, "
                f"got {len(self.params)}"
            )
        if not all(math.isfinite(p) for p in self.params):
            raise ValueError("membership function parameters must be finite")
        if self.kind is MFKind.GAUSSIAN and self.params[1] <= 0:
            raise ValueError(f"gaussian width must be positive, got {self.params[1]}")
        if self.kind is MFKind.BELL:
            a, b, _ = self.params
            if a <= 0 or b <= 0:
                raise ValueError(f"bell parameters a, b must be positive, got {a}, {b}")
        if self.kind is MFKind.TRIANGULAR:
            a, b, c = self.params
            if not (a <= b <= c) or not a < c:
                raise ValueError(f"triangular needs a <= b <= c and a < c, got {self.params}")

    @property
    def differentiable(self) -> bool:
        return self.kind is not MFKind.TRIANGULAR

    @property
    def center(self) -> float:
        if self.kind is MFKind.GAUSSIAN:
            return self.params[0]
        if self.kind is MFKind.BELL:
            return self.params[2]
        return self.params[1]

    def degree(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind is MFKind.GAUSSIAN:
            c, s = self.params
            return np.exp(-((x - c) ** 2) / (2.0 * s * s))
        if self.kind is MFKind.BELL:
            a, b, c = self.params
            return 1.0 / (1.0 + np.abs((x - c) / a) ** (2.0 * b))
        a, b, c = self.params
        out = np.zeros_like(x)
        if b > a:
            rising = (x > a) & (x < b)
            out = np.where(rising, (x - a) / (b - a), out)
        if c > b:
            falling = (x > b) & (x < c)
            out = np.where(falling, (c - x) / (c - b), out)
        return np.where(x == b, 1.0, out)

    def param_gradient(self, x):
        """Partial derivatives of the degree w.r.t. each parameter.

        Returns an array of shape ``(n_params, *x.shape)``.
        """
        x = np.asarray(x, dtype=float)
        if self.kind is MFKind.GAUSSIAN:
            c, s = self.params
            mu = self.degree(x)
            d = x - c
            return np.stack([mu * d / s**2, mu * d * d / s**3])
        if self.kind is MFKind.BELL:
            a, b, c = self.params
            z = (x - c) / a
            az = np.abs(z)
            u = az ** (2.0 * b)
            mu = 1.0 / (1.0 + u)
            nz = az > 0
            safe = np.where(nz, az, 1.0)
            du_da = -2.0 * b * u / a
            du_db = np.where(nz, 2.0 * u * np.log(safe), 0.0)
            du_dc = np.where(nz, -(2.0 * b / a) * safe ** (2.0 * b - 1.0) * np.sign(z), 0.0)
            return -(mu * mu) * np.stack([du_da, du_db, du_dc])
        raise UnsupportedKindError(
            f"{self.kind.value} membership functions are not differentiable at their knots"
        )

    def effective_support(self) -> tuple[float, float]:
        if self.kind is MFKind.TRIANGULAR:
            return self.params[0], self.params[2]
        if self.kind is MFKind.GAUSSIAN:
            c, s = self.params
            d = s * math.sqrt(2.0 * math.log(1.0 / _SUPPORT_EPS))
        else:
            a, b, c = self.params
            d = a * (1.0 / _SUPPORT_EPS - 1.0) ** (1.0 / (2.0 * b))
        return c - d, c + d

    def with_params(self, params) -> "MembershipFunction":
        return MembershipFunction(self.kind, tuple(params), self.label)


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    universe: tuple[float, float]
    terms: tuple[MembershipFunction, ...]

    def __post_init__(self):
        lo, hi = (float(v) for v in self.universe)
        object.__setattr__(self, "universe", (lo, hi))
        object.__setattr__(self, "terms", tuple(self.terms))
        if not lo < hi:
            raise PartitionError(f"variable {self.name!r}: universe needs lo < hi, got {self.universe}")
        if not self.terms:
            raise PartitionError(f"variable {self.name!r} has no terms")
        labels = [t.label for t in self.terms]
        if len(set(labels)) != len(labels):
            raise PartitionError(f"variable {self.name!r}: duplicate term labels {labels}")
        for t in self.terms:
            s_lo, s_hi = t.effective_support()
            if s_hi < lo or s_lo > hi:
                raise PartitionError(
                    f"variable {self.name!r}: term {t.label!r} does not cover the universe"
                )

    def __len__(self):
        return len(self.terms)

    def with_terms(self, terms) -> "LinguisticVariable":
        return LinguisticVariable(self.name, self.universe, tuple(terms))

    def with_name(self, name) -> "LinguisticVariable":
        return LinguisticVariable(name, self.universe, self.terms)

    def with_universe(self, universe) -> "LinguisticVariable":
        return LinguisticVariable(self.name, tuple(universe), self.terms)


@dataclass(frozen=True)
class TskRule:
    """IF x_1 is A_{j_1} and ... THEN y = p . x + r.

    ``consequent`` holds ``(p_1, ..., p_n, r)``.
    """

    antecedent: tuple[int, ...]
    consequent: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "antecedent", tuple(int(j) for j in self.antecedent))
        object.__setattr__(self, "consequent", tuple(float(p) for p in self.consequent))
        if len(self.consequent) != len(self.antecedent) + 1:
            raise ArityError(
                f"consequent needs {len(self.antecedent) + 1} coefficients, got {len(self.consequent)}"
            )


@dataclass(frozen=True, eq=False)
class FuzzyLogicUnit:
    """Immutable first-order TSK inference unit."""

    inputs: tuple[LinguisticVariable, ...]
    rules: tuple[TskRule, ...]

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "rules", tuple(self.rules))
        n = len(self.inputs)
        if n < 1:
            raise ArityError("a fuzzy logic unit needs at least one input")
        if not self.rules:
            raise ValueError("a fuzzy logic unit needs at least one rule")
        for k, rule in enumerate(self.rules):
            if len(rule.antecedent) != n:
                raise ArityError(f"rule {k} has {len(rule.antecedent)} antecedents, unit has {n} inputs")
            for i, j in enumerate(rule.antecedent):
                if not 0 <= j < len(self.inputs[i]):
                    raise IndexError(f"rule {k}: term index {j} invalid for input {self.inputs[i].name!r}")

    @property
    def n_inputs(self) -> int:
        return len(self.inputs)

    @property
    def n_rules(self) -> int:
        return len(self.rules)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.inputs)

    @property
    def universes(self) -> np.ndarray:
        return np.array([v.universe for v in self.inputs])

    @cached_property
    def antecedents(self) -> np.ndarray:
        A = np.array([r.antecedent for r in self.rules], dtype=np.intp)
        A.setflags(write=False)
        return A

    @cached_property
    def consequents(self) -> np.ndarray:
        C = np.array([r.consequent for r in self.rules], dtype=float)
        C.setflags(write=False)
        return C

    def is_grid_complete(self) -> bool:
        expected = math.prod(len(v) for v in self.inputs)
        return len(self.rules) == expected and len(set(map(tuple, self.antecedents.tolist()))) == expected

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_inputs:
            raise ArityError(f"expected {self.n_inputs} inputs per row, got shape {X.shape}")
        return X

    def clamp(self, X) -> np.ndarray:
        X = self._check(X)
        U = self.universes
        return np.clip(X, U[:, 0], U[:, 1])

    def memberships(self, X) -> list[np.ndarray]:
        """Per-input degree matrices, each of shape (n_samples, n_terms_i)."""
        X = self._check(X)
        return [
            np.stack([t.degree(X[:, i]) for t in var.terms], axis=1)
            for i, var in enumerate(self.inputs)
        ]

    def firing(self, X, mus=None) -> np.ndarray:
        if mus is None:
            mus = self.memberships(X)
        A = self.antecedents
        W = np.ones((mus[0].shape[0], self.n_rules))
        for i, mu in enumerate(mus):
            W *= mu[:, A[:, i]]
        return W

    def rule_outputs(self, X) -> np.ndarray:
        X = self._check(X)
        C = self.consequents
        return X @ C[:, :-1].T + C[:, -1]

    def predict(self, X, clamp=False) -> np.ndarray:
        """Batch inference. Raises ZeroFiringError when a row fires no rule."""
        X = self.clamp(X) if clamp else self._check(X)
        W = self.firing(X)
        S = W.sum(axis=1)
        dead = np.flatnonzero(S <= 0.0)
        if dead.size:
            raise ZeroFiringError(
                f"no rule fires for row {dead[0]} (input {X[dead[0]].tolist()} "
                "lies outside the covered universe)",
                row=int(dead[0]),
            )
        return np.einsum("nk,nk->n", W, self.rule_outputs(X)) / S

    def with_consequents(self, C) -> "FuzzyLogicUnit":
        C = np.asarray(C, dtype=float).reshape(self.n_rules, self.n_inputs + 1)
        rules = tuple(TskRule(r.antecedent, tuple(c)) for r, c in zip(self.rules, C.tolist()))
        return FuzzyLogicUnit(self.inputs, rules)

    def with_inputs(self, inputs) -> "FuzzyLogicUnit":
        return FuzzyLogicUnit(tuple(inputs), self.rules)

    def premise_vector(self) -> np.ndarray:
        """All MF parameters flattened in input/term/parameter order."""
        return np.array([p for v in self.inputs for t in v.terms for p in t.params])

    def with_premise_vector(self, theta) -> "FuzzyLogicUnit":
        theta = list(np.asarray(theta, dtype=float))
        inputs = []
        pos = 0
        for v in self.inputs:
            terms = []
            for t in v.terms:
                k = len(t.params)
                terms.append(t.with_params(theta[pos:pos + k]))
                pos += k
            inputs.append(v.with_terms(terms))
        if pos != len(theta):
            raise ArityError(f"premise vector has {len(theta)} entries, unit needs {pos}")
        return FuzzyLogicUnit(tuple(inputs), self.rules)


def reflect_flu(flu: FuzzyLogicUnit, flip_inputs: Sequence[bool], flip_output: bool) -> FuzzyLogicUnit:
    """The unit g with g(x') = +/- flu(x), where x'_i = -x_i for flipped inputs.

    Term and rule order are preserved, so training the result on reflected
    data follows the original's arithmetic exactly.
    """
    if len(flip_inputs) != flu.n_inputs:
        raise ArityError(f"expected {flu.n_inputs} flip flags, got {len(flip_inputs)}")
    inputs = []
    for var, flip in zip(flu.inputs, flip_inputs):
        if not flip:
            inputs.append(var)
            continue
        terms = []
        for t in var.terms:
            p = t.params
            if t.kind is MFKind.GAUSSIAN:
                q = (-p[0], p[1])
            elif t.kind is MFKind.BELL:
                q = (p[0], p[1], -p[2])
            else:
                q = (-p[2], -p[1], -p[0])
            terms.append(t.with_params(q))
        lo, hi = var.universe
        inputs.append(LinguisticVariable(var.name, (-hi, -lo), tuple(terms)))
    sign_in = np.array([-1.0 if f else 1.0 for f in flip_inputs] + [1.0])
    sign_out = -1.0 if flip_output else 1.0
    C = flu.consequents * sign_in * sign_out
    return FuzzyLogicUnit(tuple(inputs), flu.rules).with_consequents(C)


def membership_degree(mf: MembershipFunction, x: float) -> float:
    return float(mf.degree(x))


def fire_strength(rule: TskRule, flu: FuzzyLogicUnit, x: Sequence[float]) -> float:
    if len(x) != flu.n_inputs:
        raise ArityError(f"expected {flu.n_inputs} inputs, got {len(x)}")
    w = 1.0
    for var, j, xi in zip(flu.inputs, rule.antecedent, x):
        w *= membership_degree(var.terms[j], xi)
    return w


def infer(flu: FuzzyLogicUnit, x: Sequence[float], clamp: bool = False) -> float:
    """Crisp output of ``flu`` for a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != flu.n_inputs:
        raise ArityError(f"expected {flu.n_inputs} inputs, got shape {x.shape}")
    return float(flu.predict(x[None, :], clamp=clamp)[0])


def grid_partition(universe, m: int, kind=MFKind.BELL, prefix: str = "T") -> tuple[MembershipFunction, ...]:
    """``m`` evenly spaced terms over ``universe``, neighbours crossing at 0.5.

    Bell terms use slope exponent b = 2.
    """
    if m < 2:
        raise PartitionError(f"grid partition needs m >= 2, got {m}")
    lo, hi = (float(v) for v in universe)
    if not lo < hi:
        raise PartitionError(f"universe needs lo < hi, got {universe}")
    kind = MFKind(kind)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    # symmetric construction keeps reflected universes bit-exactly reflected
    centers = [mid + half * (2 * j - (m - 1)) / (m - 1) for j in range(m)]
    centers[0], centers[-1] = lo, hi
    h = (hi - lo) / (m - 1)
    terms = []
    for j, c in enumerate(centers):
        label = f"{prefix}{j}"
        if kind is MFKind.GAUSSIAN:
            sigma = 0.5 * h / math.sqrt(2.0 * math.log(2.0))
            terms.append(MembershipFunction(kind, (c, sigma), label))
        elif kind is MFKind.BELL:
            terms.append(MembershipFunction(kind, (0.5 * h, 2.0, c), label))
        else:
            terms.append(MembershipFunction(kind, (c - h, c, c + h), label))
    return tuple(terms)


def make_variable(name, universe, m=3, kind=MFKind.BELL) -> LinguisticVariable:
    return LinguisticVariable(name, tuple(universe), grid_partition(universe, m, kind))


def grid_flu(variables: Sequence[LinguisticVariable], consequents=None) -> FuzzyLogicUnit:
    """Grid-complete unit: one rule per combination of input terms."""
    variables = tuple(variables)
    count = checked_product(len(v) for v in variables)
    if count > MAX_MATERIALIZED_RULES:
        raise CountOverflowError(
            f"{count} rules exceed the materialization limit of {MAX_MATERIALIZED_RULES}"
        )
    combos = list(itertools.product(*(range(len(v)) for v in variables)))
    n = len(variables)
    if consequents is None:
        C = np.zeros((len(combos), n + 1))
    else:
        C = np.broadcast_to(np.asarray(consequents, dtype=float), (len(combos), n + 1))
    rules = tuple(TskRule(a, tuple(c)) for a, c in zip(combos, C.tolist()))
    return FuzzyLogicUnit(variables, rules)


MAX_MATERIALIZED_RULES = 2**20


def checked_product(factors) -> int:
    out = 1
    for f in factors:
        out *= int(f)
        if out > INT64_MAX:
            raise CountOverflowError("rule count exceeds the 64-bit integer range")
    return out


def flat_rule_count(n: int, m: int) -> int:
    """Rules in a grid-complete flat unit with n inputs of m terms each."""
    if n < 1 or m < 1:
        raise ValueError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    return checked_product([m] * n)


# -- serialization -----------------------------------------------------------

def flu_to_dict(flu: FuzzyLogicUnit) -> dict:
    return {
        "inputs": [
            {
                "name": v.name,
                "universe": list(v.universe),
                "terms": [
                    {"kind": t.kind.value, "params": list(t.params), "label": t.label}
                    for t in v.terms
                ],
            }
            for v in flu.inputs
        ],
        "rules": [
            {"antecedent": list(r.antecedent), "consequent": list(r.consequent)}
            for r in flu.rules
        ],
    }


def flu_from_dict(doc: dict) -> FuzzyLogicUnit:
    inputs = tuple(
        LinguisticVariable(
            v["name"],
            tuple(v["universe"]),
            tuple(MembershipFunction(t["kind"], tuple(t["params"]), t["label"]) for t in v["terms"]),
        )
        for v in doc["inputs"]
    )
    rules = tuple(TskRule(tuple(r["antecedent"]), tuple(r["consequent"])) for r in doc["rules"])
    return FuzzyLogicUnit(inputs, rules)


def dumps(flu: FuzzyLogicUnit, **kw) -> str:
    # json writes floats with repr(), the shortest string that round-trips exactly
    return json.dumps(flu_to_dict(flu), **kw)


def loads(text: str) -> FuzzyLogicUnit:
    return flu_from_dict(json.loads(text))
