"""
The hierarchical biped controller: four sub-controllers per leg.

Left leg (right leg by mirroring, ids 2, 4, 6, 8):

    HFL1  (x0, y0, beta_L)            -> gamma_L                level 3
    HFL3  (x0, y0, gamma_L)           -> (ankle_Lx, ankle_Ly)   level 1
    HFL5  (x0, y0, ankle_Lx, ankle_Ly) -> beta_L                level 3
    HFL7  (x0, y0, beta_L)            -> (knee_Lx, knee_Ly)     level 2, supervisor

Levels: 1 ankles, 2 knees, 3 centre of mass. Every two-output controller is
a pair of single-output units sharing the same inputs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import anfis, fuzzy
from .anfis import TrainingConfig, TrainingSet
from .biped import (
    GaitCycle,
    SignalId,
    mirror_training_set,
    sample_training_set,
    signal_id,
    signal_value,
)
from .errors import HflcError, SignalError
from .fuzzy import FuzzyLogicUnit

S = SignalId

WORKER = "worker"
SUPERVISOR = "supervisor"


@dataclass(frozen=True)
class SubControllerSpec:
    id: str
    inputs: tuple[SignalId, ...]
    outputs: tuple[SignalId, ...]
    level: int
    role: str = WORKER

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(signal_id(s) for s in self.inputs))
        object.__setattr__(self, "outputs", tuple(signal_id(s) for s in self.outputs))
        if not self.inputs:
            raise ValueError(f"{self.id}: no inputs")
        if len(self.outputs) not in (1, 2):
            raise ValueError(f"{self.id}: a sub-controller has one or two outputs")
        if S.X0 not in self.inputs or S.Y0 not in self.inputs:
            raise ValueError(f"{self.id}: x0 and y0 must be inputs of every sub-controller")
        if self.level not in (1, 2, 3):
            raise ValueError(f"{self.id}: level must be 1, 2 or 3")
        if self.role not in (WORKER, SUPERVISOR):
            raise ValueError(f"{self.id}: unknown role {self.role!r}")

    @property
    def number(self) -> int:
        return int(self.id[3:])

    @property
    def side(self) -> str:
        return "L" if self.number % 2 else "R"


def left_leg_specs() -> tuple[SubControllerSpec, ...]:
    return (
        SubControllerSpec("HFL1", (S.X0, S.Y0, S.BETA_L), (S.GAMMA_L,), level=3),
        SubControllerSpec("HFL3", (S.X0, S.Y0, S.GAMMA_L), (S.ANKLE_LX, S.ANKLE_LY), level=1),
        SubControllerSpec("HFL5", (S.X0, S.Y0, S.ANKLE_LX, S.ANKLE_LY), (S.BETA_L,), level=3),
        SubControllerSpec("HFL7", (S.X0, S.Y0, S.BETA_L), (S.KNEE_LX, S.KNEE_LY), level=2, role=SUPERVISOR),
    )


def mirror_spec(spec: SubControllerSpec) -> SubControllerSpec:
    n = spec.number
    twin = n + 1 if n % 2 else n - 1
    return SubControllerSpec(
        f"HFL{twin}",
        tuple(s.swapped() for s in spec.inputs),
        tuple(s.swapped() for s in spec.outputs),
        spec.level,
        spec.role,
    )


def mirror_specs(specs: Sequence[SubControllerSpec]) -> tuple[SubControllerSpec, ...]:
    return tuple(mirror_spec(s) for s in specs)


def all_specs() -> tuple[SubControllerSpec, ...]:
    left = left_leg_specs()
    right = mirror_specs(left)
    return tuple(sorted(left + right, key=lambda s: s.number))


def spec_by_id(controller: str, specs=None) -> SubControllerSpec:
    for s in specs or all_specs():
        if s.id == controller:
            return s
    raise SignalError(f"unknown controller {controller!r}")


@dataclass(frozen=True, eq=False)
class HflcAssembly:
    """Trained units keyed by (controller id, output signal)."""

    specs: tuple[SubControllerSpec, ...]
    units: dict
    provenance: dict = field(default_factory=dict)

    def unit(self, controller: str, output) -> FuzzyLogicUnit:
        key = (controller, signal_id(output))
        if key not in self.units:
            raise SignalError(f"{controller} has no output {signal_id(output).value}")
        return self.units[key]

    def spec(self, controller: str) -> SubControllerSpec:
        return spec_by_id(controller, self.specs)

    def predict(self, controller: str, output, X) -> np.ndarray:
        return self.unit(controller, output).predict(X, clamp=True)

    def __len__(self):
        return len(self.units)


def derive_seed(seed: int, name: str) -> int:
    """Independent named sub-stream seed; adding streams never shifts others."""
    ss = np.random.SeedSequence([seed, *name.encode()])
    return int(ss.generate_state(1)[0])


def _train_one(gait, spec, output, size, cfg, mirror_from=None):
    names = [s.value for s in spec.inputs]
    if mirror_from is None:
        data = sample_training_set(gait, spec, size, 0.0, output)
        flu = anfis.initial_flu(data, cfg, names)
    else:
        # reflected set, started from the reflected twin initialization
        twin, twin_output = mirror_from
        src = sample_training_set(gait, twin, size, 0.0, twin_output)
        data = mirror_training_set(src, twin.inputs, twin_output)
        flu = reflect_unit(anfis.initial_flu(src, cfg, [s.value for s in twin.inputs]), twin, twin_output)
        flu = flu.with_inputs(v.with_name(nm) for v, nm in zip(flu.inputs, names))
    return anfis.train_hybrid(flu, data, cfg)


def reflect_unit(flu: FuzzyLogicUnit, spec: SubControllerSpec, output) -> FuzzyLogicUnit:
    """Reflect a unit through x = 0 (x-coordinates and angles change sign)."""
    flips = [s.kind != "y" for s in spec.inputs]
    return fuzzy.reflect_flu(flu, flips, signal_id(output).kind != "y")


def train_assembly(gait: GaitCycle, size: int, cfg: TrainingConfig = TrainingConfig(),
                   right_from: str = "gait", specs=None, parallel: bool = False):
    """Train every (controller, output) unit on ``size`` samples of ``gait``.

    ``right_from="mirror"`` trains the right-leg units on the reflected
    left-leg training sets instead of the gait's own right-leg signals.
    Returns the assembly and a report per (controller, output).
    """
    if right_from not in ("gait", "mirror"):
        raise ValueError("right_from must be 'gait' or 'mirror'")
    specs = tuple(specs or all_specs())
    jobs = []
    for spec in specs:
        for out in spec.outputs:
            c = TrainingConfig(**{**cfg.__dict__, "seed": derive_seed(cfg.seed, f"{spec.id}/{out.value}")})
            mirror_from = None
            if right_from == "mirror" and spec.side == "R":
                twin = mirror_spec(spec)
                mirror_from = (twin, out.swapped())
            jobs.append(((spec.id, out), (gait, spec, out, size, c, mirror_from)))

    def run(job):
        key, args = job
        try:
            return key, _train_one(*args)
        except HflcError as exc:
            raise type(exc)(f"{key[0]}/{key[1].value}: {exc}") from exc

    if parallel:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    units = {key: flu for key, (flu, _) in results}
    reports = {key: rep for key, (_, rep) in results}
    provenance = {
        "gait": {k: v for k, v in gait.cfg.__dict__.items()},
        "size": size,
        "seed": cfg.seed,
        "right_from": right_from,
        "training": cfg.to_dict(),
    }
    return HflcAssembly(specs, units, provenance), reports


def untrained_assembly(gait: GaitCycle, size: int, cfg: TrainingConfig = TrainingConfig(), specs=None):
    """Units over the same universes as a trained assembly, consequents zero."""
    specs = tuple(specs or all_specs())
    units = {}
    for spec in specs:
        for out in spec.outputs:
            data = sample_training_set(gait, spec, size, 0.0, out)
            units[(spec.id, out)] = anfis.initial_flu(data, cfg, [s.value for s in spec.inputs])
    return HflcAssembly(specs, units, {"size": size, "untrained": True})


def held_out_set(gait: GaitCycle, spec, output, size: int) -> TrainingSet:
    """Test grid at half the training spacing, disjoint from the training phases."""
    return sample_training_set(gait, spec, size, 0.5 / size, output)


@dataclass
class CurveRow:
    controller: str
    output: str
    size: int
    sse: float
    train_sse: float


def sse_curve(gait: GaitCycle, sizes: Sequence[int], cfg: TrainingConfig = TrainingConfig(),
              specs=None, parallel: bool = False) -> list[CurveRow]:
    """Held-out SSE per (controller, output, training size)."""
    sizes = list(sizes)
    if not sizes:
        raise ValueError("need at least one training size")
    rows = []
    for size in sizes:
        assembly, reports = train_assembly(gait, size, cfg, specs=specs, parallel=parallel)
        for spec in assembly.specs:
            for out in spec.outputs:
                test = held_out_set(gait, spec, out, size)
                err = anfis.evaluate_sse(assembly.unit(spec.id, out), test)
                rows.append(CurveRow(spec.id, out.value, size, err, reports[(spec.id, out)].final_sse))
    rows.sort(key=lambda r: (int(r.controller[3:]), r.output, r.size))
    return rows


def curve_to_csv(rows: Sequence[CurveRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["controller", "output", "size", "sse"])
    for r in rows:
        w.writerow([r.controller, r.output, r.size, f"{r.sse:.17g}"])
    return buf.getvalue()


def curve_from_csv(text: str) -> list[CurveRow]:
    return [
        CurveRow(r["controller"], r["output"], int(r["size"]), float(r["sse"]), math.nan)
        for r in csv.DictReader(io.StringIO(text))
    ]


@dataclass
class TrackingReport:
    """Open-loop reconstruction error per (controller, output) over a cycle."""

    rmse: dict
    signal_range: dict
    clamped: dict
    knee_consistency: dict

    def relative(self, key) -> float:
        rng = self.signal_range[key]
        return self.rmse[key] / rng if rng > 0 else math.inf


def run_feedforward(assembly: HflcAssembly, gait: GaitCycle, controllers=None) -> TrackingReport:
    """Feed reference signals of every frame to each sub-controller and
    compare predictions with the reference outputs.

    Inputs outside a unit's universe are clamped and counted. For each
    supervisor (knee) unit the report also holds the RMS distance between
    its predicted knee and the knee placed by FK from the hip and the
    thigh angle predicted by the same leg's angle unit.
    """
    frames = gait.frames
    rmse, rng, clamped = {}, {}, {}
    predictions = {}
    for spec in assembly.specs:
        if controllers is not None and spec.id not in controllers:
            continue
        X = np.array([[signal_value(f, s) for s in spec.inputs] for f in frames])
        for out in spec.outputs:
            unit = assembly.unit(spec.id, out)
            U = unit.universes
            clamped[(spec.id, out)] = int(np.sum(np.any((X < U[:, 0]) | (X > U[:, 1]), axis=1)))
            ref = np.array([signal_value(f, out) for f in frames])
            pred = unit.predict(X, clamp=True)
            predictions[(spec.id, out)] = pred
            rmse[(spec.id, out)] = float(np.sqrt(np.mean((pred - ref) ** 2)))
            rng[(spec.id, out)] = float(ref.max() - ref.min())
    knee = {}
    thigh = gait.params.thigh
    for spec in assembly.specs:
        if spec.role != SUPERVISOR or (controllers is not None and spec.id not in controllers):
            continue
        beta_id = S.BETA_L if spec.side == "L" else S.BETA_R
        angle_unit = next((s for s in assembly.specs if s.outputs == (beta_id,)), None)
        if angle_unit is None or (angle_unit.id, beta_id) not in predictions:
            continue
        beta = predictions[(angle_unit.id, beta_id)]
        hip = np.array([f.hip for f in frames])
        kx = hip[:, 0] + thigh * np.sin(beta)
        ky = hip[:, 1] - thigh * np.cos(beta)
        px = predictions[(spec.id, spec.outputs[0])]
        py = predictions[(spec.id, spec.outputs[1])]
        knee[spec.id] = float(np.sqrt(np.mean((px - kx) ** 2 + (py - ky) ** 2)))
    return TrackingReport(rmse, rng, clamped, knee)


def surface_grid(assembly: HflcAssembly, controller: str, output, free: Sequence, fixed: dict | None = None,
                 resolution: int = 31):
    """Evaluate one unit over a resolution x resolution grid of two inputs.

    Returns ``(rows, fixed_values)`` where rows are ``(u, v, out)`` with u
    varying slowest; unlisted inputs sit at their universe midpoints.
    """
    spec = assembly.spec(controller)
    unit = assembly.unit(controller, output)
    free = [signal_id(s) for s in free]
    if len(free) != 2 or free[0] == free[1]:
        raise SignalError("need two distinct free signals")
    for s in free:
        if s not in spec.inputs:
            raise SignalError(f"{s.value} is not an input of {controller}")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    fixed = {signal_id(k): float(v) for k, v in (fixed or {}).items()}
    for s in fixed:
        if s not in spec.inputs:
            raise SignalError(f"{s.value} is not an input of {controller}")
    U = unit.universes
    values = {}
    for i, s in enumerate(spec.inputs):
        if s not in free:
            values[s] = fixed.get(s, 0.5 * (U[i, 0] + U[i, 1]))
    iu, iv = spec.inputs.index(free[0]), spec.inputs.index(free[1])
    us = np.linspace(U[iu, 0], U[iu, 1], resolution)
    vs = np.linspace(U[iv, 0], U[iv, 1], resolution)
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    X = np.empty((resolution * resolution, len(spec.inputs)))
    for i, s in enumerate(spec.inputs):
        X[:, i] = values[s] if s in values else 0.0
    X[:, iu] = uu.ravel()
    X[:, iv] = vv.ravel()
    out = unit.predict(X, clamp=True)
    rows = list(zip(X[:, iu].tolist(), X[:, iv].tolist(), out.tolist()))
    return rows, {s.value: v for s, v in values.items()}


def surface_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u", "v", "out"])
    for u, v, o in rows:
        w.writerow([f"{u:.17g}", f"{v:.17g}", f"{o:.17g}"])
    return buf.getvalue()


def surface_from_csv(text: str):
    return [(float(r["u"]), float(r["v"]), float(r["out"])) for r in csv.DictReader(io.StringIO(text))]


# -- assembly bundle ---------------------------------------------------------

def assembly_to_dict(assembly: HflcAssembly) -> dict:
    controllers = {}
    for spec in assembly.specs:
        controllers[spec.id] = {
            "inputs": [s.value for s in spec.inputs],
            "outputs": [s.value for s in spec.outputs],
            "level": spec.level,
            "role": spec.role,
            "units": {out.value: fuzzy.flu_to_dict(assembly.unit(spec.id, out)) for out in spec.outputs},
        }
    return {"controllers": controllers, "provenance": assembly.provenance}


def assembly_from_dict(doc: dict) -> HflcAssembly:
    specs, units = [], {}
    for cid, c in doc["controllers"].items():
        spec = SubControllerSpec(cid, tuple(c["inputs"]), tuple(c["outputs"]), c["level"], c["role"])
        specs.append(spec)
        for out, flu_doc in c["units"].items():
            units[(cid, signal_id(out))] = fuzzy.flu_from_dict(flu_doc)
    specs.sort(key=lambda s: s.number)
    return HflcAssembly(tuple(specs), units, doc.get("provenance", {}))


def dump_assembly(assembly: HflcAssembly) -> str:
    return json.dumps(assembly_to_dict(assembly), indent=1, sort_keys=True)


def load_assembly(text: str) -> HflcAssembly:
    return assembly_from_dict(json.loads(text))


def rule_counts(assembly_or_specs, m: int = 3) -> dict:
    """Grid rule count per sub-controller (one unit) for a leg's specs."""
    specs = getattr(assembly_or_specs, "specs", assembly_or_specs)
    return {s.id: fuzzy.flat_rule_count(len(s.inputs), m) for s in specs}
