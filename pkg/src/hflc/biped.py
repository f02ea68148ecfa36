"""
Five-link planar biped: kinematics, reference gait, training-set sampling.

Angles are absolute, measured from the downward vertical, counterclockwise
positive. A thigh at angle b puts the knee at hip + thigh * (sin b, -cos b);
the torso angle is measured from the upward vertical with the same sense.
The robot walks towards +x on flat ground at y = 0; feet are points.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .anfis import TrainingSet
from .errors import ReachabilityError, SignalError

Point = tuple[float, float]


@dataclass(frozen=True)
class BipedParams:
    thigh: float = 0.4
    shank: float = 0.4
    torso: float = 0.6
    mass_torso: float = 1.0
    mass_thigh: float = 1.0
    mass_shank: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"{f.name} must be positive, got {getattr(self, f.name)}")

    @property
    def leg_length(self) -> float:
        return self.thigh + self.shank


@dataclass(frozen=True)
class JointState:
    """Hip position plus five absolute link angles: seven degrees of freedom."""

    xh: float
    yh: float
    theta_t: float
    beta_l: float
    gamma_l: float
    beta_r: float
    gamma_r: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)])

    @classmethod
    def from_array(cls, a) -> "JointState":
        return cls(*(float(v) for v in a))


@dataclass(frozen=True)
class KinematicFrame:
    phase: float
    state: JointState
    hip: Point
    torso_top: Point
    knee_l: Point
    ankle_l: Point
    knee_r: Point
    ankle_r: Point
    com: Point


def _link_end(origin: Point, length: float, angle: float) -> Point:
    return (origin[0] + length * math.sin(angle), origin[1] - length * math.cos(angle))


def center_of_mass(params: BipedParams, frame: KinematicFrame) -> Point:
    """Mass-weighted mean of the five link midpoints."""
    def mid(p, q):
        return (0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]))

    parts = [
        (params.mass_torso, mid(frame.hip, frame.torso_top)),
        (params.mass_thigh, mid(frame.hip, frame.knee_l)),
        (params.mass_thigh, mid(frame.hip, frame.knee_r)),
        (params.mass_shank, mid(frame.knee_l, frame.ankle_l)),
        (params.mass_shank, mid(frame.knee_r, frame.ankle_r)),
    ]
    total = sum(m for m, _ in parts)
    return (sum(m * p[0] for m, p in parts) / total, sum(m * p[1] for m, p in parts) / total)


def forward_kinematics(params: BipedParams, q: JointState, phase: float = 0.0) -> KinematicFrame:
    hip = (q.xh, q.yh)
    torso_top = (q.xh - params.torso * math.sin(q.theta_t), q.yh + params.torso * math.cos(q.theta_t))
    knee_l = _link_end(hip, params.thigh, q.beta_l)
    ankle_l = _link_end(knee_l, params.shank, q.gamma_l)
    knee_r = _link_end(hip, params.thigh, q.beta_r)
    ankle_r = _link_end(knee_r, params.shank, q.gamma_r)
    frame = KinematicFrame(phase, q, hip, torso_top, knee_l, ankle_l, knee_r, ankle_r, (0.0, 0.0))
    return replace(frame, com=center_of_mass(params, frame))


def leg_ik(params: BipedParams, hip: Point, ankle: Point, phase: float | None = None) -> tuple[float, float]:
    """Thigh and shank angles placing the ankle at ``ankle``, knee forward."""
    L1, L2 = params.thigh, params.shank
    dx, dy = ankle[0] - hip[0], ankle[1] - hip[1]
    D = math.hypot(dx, dy)
    if D > L1 + L2 or D < abs(L1 - L2) or D == 0.0:
        where = "" if phase is None else f" at phase {phase:.6g}"
        raise ReachabilityError(
            f"ankle target {ankle} is out of reach from hip {hip}{where} "
            f"(distance {D:.6g}, leg spans [{abs(L1 - L2):.6g}, {L1 + L2:.6g}])",
            phase=phase,
        )
    a = (L1 * L1 - L2 * L2 + D * D) / (2.0 * D)
    h = math.sqrt(max(L1 * L1 - a * a, 0.0))
    # (-dy, dx) points forward when the leg hangs below the hip
    kx = hip[0] + (a * dx - h * dy) / D
    ky = hip[1] + (a * dy + h * dx) / D
    beta = math.atan2(kx - hip[0], hip[1] - ky)
    gamma = math.atan2(ankle[0] - kx, ky - ankle[1])
    return beta, gamma


@dataclass(frozen=True)
class GaitConfig:
    step_length: float = 0.3
    period: float = 1.0
    clearance: float = 0.05
    hip_height: float | None = None     # None: 0.75 * leg length
    frames: int = 240
    seed: int = 0

    def __post_init__(self):
        if self.step_length < 0:
            raise ValueError("step length must be nonnegative")
        if self.clearance <= 0:
            raise ValueError("clearance must be positive")
        if self.period <= 0:
            raise ValueError("period must be positive")
        if self.frames < 2:
            raise ValueError("need at least 2 frames per cycle")

    def hip_height_for(self, params: BipedParams) -> float:
        return 0.75 * params.leg_length if self.hip_height is None else self.hip_height


def _cycloid(start: float, length: float, clearance: float, tau: float) -> Point:
    x = start + length * (tau - math.sin(2.0 * math.pi * tau) / (2.0 * math.pi))
    y = 0.5 * clearance * (1.0 - math.cos(2.0 * math.pi * tau))
    return x, y


def ankle_targets(cfg: GaitConfig, phase: float) -> tuple[Point, Point, Point]:
    """Hip, left-ankle and right-ankle targets at any phase (cycles repeat
    shifted forward by one step length)."""
    s = cfg.step_length
    cycles = math.floor(phase)
    phi = phase - cycles
    shift = cycles * s
    hip = (s * phi + shift, 0.0)
    if phi < 0.5:
        left = (0.25 * s + shift, 0.0)
        rx, ry = _cycloid(-0.25 * s, s, cfg.clearance, 2.0 * phi)
        right = (rx + shift, ry)
    else:
        lx, ly = _cycloid(0.25 * s, s, cfg.clearance, 2.0 * phi - 1.0)
        left = (lx + shift, ly)
        right = (0.75 * s + shift, 0.0)
    return hip, left, right


def reference_state(params: BipedParams, cfg: GaitConfig, phase: float) -> JointState:
    hip, left, right = ankle_targets(cfg, phase)
    hip = (hip[0], cfg.hip_height_for(params))
    bl, gl = leg_ik(params, hip, left, phase)
    br, gr = leg_ik(params, hip, right, phase)
    return JointState(hip[0], hip[1], 0.0, bl, gl, br, gr)


@dataclass(frozen=True, eq=False)
class GaitCycle:
    params: BipedParams
    cfg: GaitConfig
    frames: tuple[KinematicFrame, ...]
    direction: float = 1.0      # -1.0 for a reflected gait walking towards -x

    @property
    def period(self) -> float:
        return self.cfg.period

    @property
    def step_length(self) -> float:
        return self.cfg.step_length

    @property
    def clearance(self) -> float:
        return self.cfg.clearance

    def __len__(self):
        return len(self.frames)

    def frame_at(self, phase: float) -> KinematicFrame:
        """Frame at any phase in [0, 1): stored frame on the grid, otherwise
        linear interpolation of the joint state followed by FK."""
        phase = phase % 1.0
        F = len(self.frames)
        u = phase * F
        k = int(round(u))
        if k < F and abs(u - k) <= 1e-9:
            # on the grid up to rounding of the phase arithmetic
            return self.frames[k]
        k = int(math.floor(u))
        t = u - k
        if k >= F:
            k, t = F - 1, 1.0
        if t == 0.0:
            return self.frames[k]
        a = self.frames[k].state.as_array()
        if k + 1 < F:
            b = self.frames[k + 1].state.as_array()
        else:
            b = self.frames[0].state.as_array()
            b[0] += self.direction * self.step_length
        q = JointState.from_array((1.0 - t) * a + t * b)
        return forward_kinematics(self.params, q, phase)


def generate_reference_gait(params: BipedParams = BipedParams(), cfg: GaitConfig = GaitConfig()) -> GaitCycle:
    if cfg.step_length >= 2.0 * params.leg_length:
        raise ReachabilityError(
            f"step length {cfg.step_length} exceeds twice the leg length {params.leg_length}"
        )
    frames = []
    for k in range(cfg.frames):
        phase = k / cfg.frames
        frames.append(forward_kinematics(params, reference_state(params, cfg, phase), phase))
    return GaitCycle(params, cfg, tuple(frames))


# -- signals -----------------------------------------------------------------

class SignalId(str, Enum):
    X0 = "x0"
    Y0 = "y0"
    BETA_L = "beta_L"
    GAMMA_L = "gamma_L"
    BETA_R = "beta_R"
    GAMMA_R = "gamma_R"
    ANKLE_LX = "ankle_Lx"
    ANKLE_LY = "ankle_Ly"
    ANKLE_RX = "ankle_Rx"
    ANKLE_RY = "ankle_Ry"
    KNEE_LX = "knee_Lx"
    KNEE_LY = "knee_Ly"
    KNEE_RX = "knee_Rx"
    KNEE_RY = "knee_Ry"

    @property
    def kind(self) -> str:
        """'x', 'y' or 'angle': how the signal transforms under reflection."""
        v = self.value
        if v.startswith(("beta", "gamma")):
            return "angle"
        return "x" if v.endswith("x") or v == "x0" else "y"

    @property
    def side(self) -> str | None:
        if self in (SignalId.X0, SignalId.Y0):
            return None
        return "L" if "_L" in self.value else "R"

    def swapped(self) -> "SignalId":
        v = self.value
        if "_L" in v:
            return SignalId(v.replace("_L", "_R"))
        if "_R" in v:
            return SignalId(v.replace("_R", "_L"))
        return self


def signal_id(value) -> SignalId:
    try:
        return SignalId(value)
    except ValueError:
        raise SignalError(f"unknown signal {value!r}; known: {[s.value for s in SignalId]}") from None


_SIGNAL_READERS = {
    SignalId.X0: lambda f: f.com[0],
    SignalId.Y0: lambda f: f.com[1],
    SignalId.BETA_L: lambda f: f.state.beta_l,
    SignalId.GAMMA_L: lambda f: f.state.gamma_l,
    SignalId.BETA_R: lambda f: f.state.beta_r,
    SignalId.GAMMA_R: lambda f: f.state.gamma_r,
    SignalId.ANKLE_LX: lambda f: f.ankle_l[0],
    SignalId.ANKLE_LY: lambda f: f.ankle_l[1],
    SignalId.ANKLE_RX: lambda f: f.ankle_r[0],
    SignalId.ANKLE_RY: lambda f: f.ankle_r[1],
    SignalId.KNEE_LX: lambda f: f.knee_l[0],
    SignalId.KNEE_LY: lambda f: f.knee_l[1],
    SignalId.KNEE_RX: lambda f: f.knee_r[0],
    SignalId.KNEE_RY: lambda f: f.knee_r[1],
}


def signal_value(frame: KinematicFrame, sid) -> float:
    return _SIGNAL_READERS[signal_id(sid)](frame)


def mirror_value(sid, value, axis: float = 0.0):
    """Reflect one signal value about the vertical line x = axis."""
    kind = signal_id(sid).kind
    if kind == "x":
        return 2.0 * axis - value if axis else -value
    if kind == "angle":
        return -value
    return value


# -- sampling ----------------------------------------------------------------

def sample_phases(size: int, offset: float = 0.0) -> np.ndarray:
    return (offset + np.arange(size) / size) % 1.0


def sample_training_set(gait: GaitCycle, io_spec, size: int, offset: float = 0.0, output=None) -> TrainingSet:
    """``size`` rows at uniform phase spacing starting at ``offset``.

    ``io_spec`` is anything with ``inputs`` and ``outputs`` signal sequences;
    ``output`` selects the target (default: the first output).
    """
    if not 1 <= size <= len(gait):
        raise ValueError(f"size must be in [1, {len(gait)}], got {size}")
    inputs = [signal_id(s) for s in io_spec.inputs]
    target = signal_id(io_spec.outputs[0] if output is None else output)
    frames = [gait.frame_at(p) for p in sample_phases(size, offset)]
    X = [[signal_value(f, s) for s in inputs] for f in frames]
    y = [signal_value(f, target) for f in frames]
    return TrainingSet(np.array(X), np.array(y))


# -- mirroring ---------------------------------------------------------------

def mirror_frame(frame: KinematicFrame, axis: float | None = None) -> KinematicFrame:
    """Reflect about x = axis (default: the hip line), negate angles and swap
    legs. Applying it twice with the same axis is the identity."""
    a = frame.hip[0] if axis is None else axis

    def rx(p):
        return (2.0 * a - p[0], p[1])

    q = frame.state
    state = JointState(2.0 * a - q.xh, q.yh, -q.theta_t, -q.beta_r, -q.gamma_r, -q.beta_l, -q.gamma_l)
    return KinematicFrame(
        frame.phase, state, rx(frame.hip), rx(frame.torso_top),
        rx(frame.knee_r), rx(frame.ankle_r), rx(frame.knee_l), rx(frame.ankle_l), rx(frame.com),
    )


def mirror_gait(gait: GaitCycle, axis: float = 0.0) -> GaitCycle:
    frames = tuple(mirror_frame(f, axis) for f in gait.frames)
    return GaitCycle(gait.params, gait.cfg, frames, -gait.direction)


def mirror_training_set(data: TrainingSet, inputs: Sequence, target, axis: float = 0.0) -> TrainingSet:
    """Reflect every column of a sampled set; the counterpart's signals are
    the left/right swaps of ``inputs`` and ``target``."""
    inputs = [signal_id(s) for s in inputs]
    if len(inputs) != data.arity:
        raise SignalError(f"{len(inputs)} signal ids for a {data.arity}-column set")
    X = np.column_stack([mirror_value(s, data.X[:, i], axis) for i, s in enumerate(inputs)])
    y = mirror_value(target, data.y, axis)
    return TrainingSet(X, y)


# -- CSV export --------------------------------------------------------------

GAIT_CSV_HEADER = (
    "phase", "xh", "yh", "theta_t", "beta_l", "gamma_l", "beta_r", "gamma_r",
    "x0", "y0", "xgl", "ygl", "xcl", "ycl", "xgr", "ygr", "xcr", "ycr",
)


def gait_to_csv(gait: GaitCycle) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GAIT_CSV_HEADER)
    for f in gait.frames:
        q = f.state
        vals = (
            f.phase, q.xh, q.yh, q.theta_t, q.beta_l, q.gamma_l, q.beta_r, q.gamma_r,
            *f.com, *f.knee_l, *f.ankle_l, *f.knee_r, *f.ankle_r,
        )
        w.writerow([f"{v:.17g}" for v in vals])
    return buf.getvalue()


def gait_from_csv(text: str, params: BipedParams = BipedParams(), cfg: GaitConfig | None = None) -> GaitCycle:
    """Rebuild a gait from exported CSV; positions are re-derived by FK."""
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows or tuple(rows[0].keys()) != GAIT_CSV_HEADER:
        raise ValueError("not a gait CSV")
    frames = []
    for r in rows:
        q = JointState(*(float(r[k]) for k in GAIT_CSV_HEADER[1:8]))
        frames.append(forward_kinematics(params, q, float(r["phase"])))
    if cfg is None:
        cfg = GaitConfig(frames=len(frames))
    return GaitCycle(params, cfg, tuple(frames))
