"""Per-stream pointing engine.

Each frame is mapped into the world frame, the pointing arm's forearm ray is
intersected with the board, and the resulting board point feeds a stability
tracker. The tracker keeps the board points of the last ``window_s`` seconds,
measures their dispersion as the diameter of the enclosing circle, and watches the
smoothed rate of change of that diameter::

    Idle -> Tracking -> Stable -> Destabilized -> Tracking -> ...

A gesture becomes Stable once ``|d(diameter)/dt|`` has stayed at or below
``stable_drdt_max`` for ``stable_dwell_s``. It destabilises when the rate rises
again or after ``hold_timeout_s`` in the Stable phase. An optional
``stable_diameter_max_mm`` additionally requires the window itself to be small.
"""
from __future__ import annotations

from collections import deque
import csv
from dataclasses import dataclass, field, fields
from enum import Enum
import logging
import math
from typing import Optional

from .board import BoardModel, GridSpec, classify
from .circle import EXACT_MAX_POINTS, dispersion_circle
from .geometry import (GRAZING_COS, PARALLEL_EPS, DegenerateRay, PointingRay, PointsAway,
                       RayParallel, RigidTransform, intersect)
from .stream import JointFrame, PointingEvent

log = logging.getLogger(__name__)

ARMS = ("left", "right")


class NonMonotoneTime(ValueError):
    pass


class Phase(str, Enum):
    IDLE = "Idle"
    TRACKING = "Tracking"
    STABLE = "Stable"
    DESTABILIZED = "Destabilized"


@dataclass
class EngineConfig:
    arm: str = "auto"
    confidence_min: float = 0.5
    window_s: float = 0.5
    stable_drdt_max: float = 500.0  # mm/s
    stable_dwell_s: float = 0.75
    expected_settle_s: float = 3.25  # reporting reference only
    hold_timeout_s: float = 5.0
    min_forearm_mm: float = 100.0
    smoothing_alpha: float = 0.3
    missing_gap_s: float = 0.2
    exact_circle_max: int = EXACT_MAX_POINTS
    # optional absolute ceiling on the window diameter for a sample to count as steady
    stable_diameter_max_mm: Optional[float] = None

    def __post_init__(self):
        if self.arm not in ("left", "right", "auto"):
            raise ValueError(f"arm must be left, right or auto, not {self.arm!r}")
        if not 0.0 <= self.confidence_min <= 1.0:
            raise ValueError("confidence_min must lie in [0, 1]")
        for name in ("window_s", "stable_drdt_max", "stable_dwell_s", "expected_settle_s",
                     "hold_timeout_s", "min_forearm_mm", "missing_gap_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.stable_diameter_max_mm is not None and not self.stable_diameter_max_mm > 0:
            raise ValueError("stable_diameter_max_mm must be positive or null")
        if not 0.0 < self.smoothing_alpha <= 1.0:
            raise ValueError("smoothing_alpha must lie in (0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> EngineConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown engine keys: {sorted(unknown)}")
        return cls(**d)


# -- arm selection -----------------------------------------------------------

def _arm_ray(frame: JointFrame, arm: str, cfg: EngineConfig) -> Optional[PointingRay]:
    e = frame.joints.get(f"elbow_{arm}")
    h = frame.joints.get(f"hand_{arm}")
    if e is None or h is None or e.c < cfg.confidence_min or h.c < cfg.confidence_min:
        return None
    d = h.p - e.p
    if math.sqrt(float(d @ d)) < cfg.min_forearm_mm:
        return None
    return PointingRay(e.p, h.p)


def _midline(frame: JointFrame):
    """Horizontal ``(x, y)`` of the vertical body axis."""
    j = frame.joints
    if "shoulder_left" in j and "shoulder_right" in j:
        return (j["shoulder_left"].p[:2] + j["shoulder_right"].p[:2]) / 2.0
    if "head" in j:
        return j["head"].p[:2]
    return (j["elbow_left"].p[:2] + j["elbow_right"].p[:2]) / 2.0


def select_arm(frame: JointFrame, cfg: EngineConfig) -> Optional[tuple[str, PointingRay]]:
    """``(arm, ray)`` for the pointing arm, or ``None`` when no usable arm is present.

    In ``auto`` mode the arm whose hand lies farther (horizontally) from the vertical
    body axis through the shoulder centre wins; ties go right. Expects a z-up world.
    """
    if cfg.arm != "auto":
        ray = _arm_ray(frame, cfg.arm, cfg)
        return None if ray is None else (cfg.arm, ray)
    left = _arm_ray(frame, "left", cfg)
    right = _arm_ray(frame, "right", cfg)
    if left is None or right is None:
        if left is not None:
            return "left", left
        return None if right is None else ("right", right)
    mid = _midline(frame)
    dl = left.hand[:2] - mid
    dr = right.hand[:2] - mid
    if float(dl @ dl) > float(dr @ dr):
        return "left", left
    return "right", right


# -- stability ---------------------------------------------------------------

@dataclass
class StabilityState:
    window: deque = field(default_factory=deque)  # (t, u, v)
    r: float = 0.0
    drdt: float = 0.0
    phase: Phase = Phase.IDLE
    stable_since: Optional[float] = None
    below_since: Optional[float] = None
    last_t: Optional[float] = None
    last_diameter: Optional[float] = None
    entered_stable: bool = False  # set by the most recent update

    def reset(self):
        self.window.clear()
        self.r = self.drdt = 0.0
        self.phase = Phase.IDLE
        self.stable_since = self.below_since = self.last_diameter = None
        self.entered_stable = False

    def centroid(self) -> tuple[float, float]:
        n = len(self.window)
        return (sum(w[1] for w in self.window) / n, sum(w[2] for w in self.window) / n)


def update_stability(state: StabilityState, t: float, u: float, v: float,
                     cfg: EngineConfig) -> StabilityState:
    """Feed one board point into ``state`` (updated in place and returned)."""
    if state.last_t is not None and t < state.last_t:
        raise NonMonotoneTime(f"t={t} after t={state.last_t}")
    state.entered_stable = False
    if state.phase is Phase.IDLE:
        state.reset()
        state.phase = Phase.TRACKING
    elif state.phase is Phase.DESTABILIZED:
        state.phase = Phase.TRACKING
        state.below_since = None

    w = state.window
    w.append((t, u, v))
    while t - w[0][0] > cfg.window_s + 1e-9:
        w.popleft()
    state.r = dispersion_circle([(p[1], p[2]) for p in w], cfg.exact_circle_max)[2]
    diameter = 2.0 * state.r
    if state.last_diameter is None:
        state.drdt = 0.0
    elif t > state.last_t:
        raw = (diameter - state.last_diameter) / (t - state.last_t)
        a = cfg.smoothing_alpha
        state.drdt = a * raw + (1.0 - a) * state.drdt
    state.last_diameter = diameter
    state.last_t = t

    below = abs(state.drdt) <= cfg.stable_drdt_max
    if cfg.stable_diameter_max_mm is not None and diameter > cfg.stable_diameter_max_mm:
        below = False
    if state.phase is Phase.TRACKING:
        if not below:
            state.below_since = None
        else:
            if state.below_since is None:
                state.below_since = t
            if t - state.below_since >= cfg.stable_dwell_s - 1e-9:
                state.phase = Phase.STABLE
                state.stable_since = t
                state.entered_stable = True
    elif state.phase is Phase.STABLE:
        if not below or t - state.stable_since > cfg.hold_timeout_s:
            state.phase = Phase.DESTABILIZED
            state.stable_since = state.below_since = None
    return state


# -- engine ------------------------------------------------------------------

@dataclass(frozen=True)
class TraceRow:
    t: float
    r: float
    drdt: float
    phase: str


class PointingEngine:
    """Single-stream engine. Feed frames in time order through :meth:`step`."""

    def __init__(self, board: BoardModel, grid: GridSpec, cfg: Optional[EngineConfig] = None,
                 sensor_to_world: Optional[RigidTransform] = None, trace: bool = False):
        self.board = board
        self.grid = grid
        self.cfg = cfg or EngineConfig()
        self.sensor_to_world = sensor_to_world
        self._plane = board.plane
        self._to_board = board.to_board
        self.state = StabilityState()
        self.arm: Optional[str] = None
        self.last_valid_t: Optional[float] = None
        self.last_t: Optional[float] = None
        self.rejected = 0
        self.trace: Optional[list[TraceRow]] = [] if trace else None

    def reset(self):
        self.state.reset()
        self.state.last_t = None
        self.arm = None
        self.last_valid_t = self.last_t = None

    def _to_world(self, frame: JointFrame) -> JointFrame:
        if frame.frame == "world":
            return frame
        if self.sensor_to_world is None:
            raise ValueError("sensor-frame input but no sensor->world transform configured")
        R, t = self.sensor_to_world.rotation, self.sensor_to_world.translation
        joints = {k: type(j)(R @ j.p + t, j.c) for k, j in frame.joints.items()}
        return JointFrame(frame.t, "world", joints)

    def _idle(self, t: float):
        self.state.reset()
        if self.trace is not None:
            self.trace.append(TraceRow(t, 0.0, 0.0, Phase.IDLE.value))

    def step(self, frame: JointFrame) -> list[PointingEvent]:
        t = frame.t
        if self.last_t is not None and t < self.last_t:
            raise NonMonotoneTime(f"frame t={t} after t={self.last_t}")
        self.last_t = t
        selected = select_arm(self._to_world(frame), self.cfg)
        if selected is None:
            if self.last_valid_t is not None and t - self.last_valid_t > self.cfg.missing_gap_s:
                self.state.reset()
            return []
        arm, ray = selected
        if arm != self.arm:
            self.state.reset()
            self.arm = arm
        self.last_valid_t = t

        try:
            hit = intersect(ray, self._plane, PARALLEL_EPS)
        except (RayParallel, PointsAway, DegenerateRay) as e:
            self.rejected += 1
            log.debug("t=%.3f: %s", t, e)
            self._idle(t)
            return []
        q = self._to_board.rotation @ hit.point + self._to_board.translation
        u, v = float(q[0]), float(q[1])
        grazing = abs(hit.cos_incidence) < GRAZING_COS

        st = update_stability(self.state, t, u, v, self.cfg)
        if self.trace is not None:
            self.trace.append(TraceRow(t, st.r, st.drdt, st.phase.value))
        events = [PointingEvent(t, arm, u, v, classify((u, v), self.grid).cell_id, False, grazing)]
        if st.entered_stable:
            cu, cv = st.centroid()
            events.append(PointingEvent(t, arm, cu, cv, classify((cu, cv), self.grid).cell_id,
                                        True, grazing))
        return events

    def run(self, frames) -> list[PointingEvent]:
        out = []
        for f in frames:
            out.extend(self.step(f))
        return out


def write_trace(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "r", "drdt", "phase"])
    for row in rows:
        w.writerow([repr(row.t), repr(row.r), repr(row.drdt), row.phase])
