"""Joint-frame and pointing-event records, their NDJSON wire format, and file replay.

Frame line::

    {"t": 0.0, "frame": "world", "joints": {"hand_left": {"p": [x, y, z], "c": 0.9}}}

Event line::

    {"t": 0.0, "arm": "left", "u": 10.0, "v": 20.0, "cell": 1, "stable": false, "grazing": false}
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import logging
import math
import time
from pathlib import Path
from typing import IO, Iterable, Iterator, Optional, Union

import numpy as np

log = logging.getLogger(__name__)

JOINT_IDS = frozenset({
    "elbow_left", "hand_left", "elbow_right", "hand_right",
    "shoulder_left", "shoulder_right", "head",
})
FRAMES = ("sensor", "world")


class MalformedFrame(ValueError):
    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class Joint:
    p: np.ndarray
    c: float = 1.0


@dataclass(frozen=True)
class JointFrame:
    t: float
    frame: str = "world"
    joints: dict = field(default_factory=dict)  # joint id -> Joint

    def point(self, joint_id: str) -> np.ndarray:
        return self.joints[joint_id].p

    def __eq__(self, other):
        if not isinstance(other, JointFrame):
            return NotImplemented
        if (self.t, self.frame) != (other.t, other.frame) or self.joints.keys() != other.joints.keys():
            return False
        return all(np.array_equal(j.p, other.joints[k].p) and j.c == other.joints[k].c
                   for k, j in self.joints.items())


@dataclass(frozen=True)
class PointingEvent:
    t: float
    arm: str
    u: float
    v: float
    cell: Optional[int]
    stable: bool
    grazing: bool = False

    def to_dict(self) -> dict:
        return {"t": self.t, "arm": self.arm, "u": self.u, "v": self.v,
                "cell": self.cell, "stable": self.stable, "grazing": self.grazing}


def _finite(x, what: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise MalformedFrame(f"{what} must be a number")
    x = float(x)
    if not math.isfinite(x):
        raise MalformedFrame(f"{what} is not finite")
    return x


def frame_from_dict(obj) -> JointFrame:
    if not isinstance(obj, dict):
        raise MalformedFrame("frame must be a JSON object")
    if "t" not in obj:
        raise MalformedFrame('missing "t"')
    t = _finite(obj["t"], "t")
    ref = obj.get("frame", "world")
    if ref not in FRAMES:
        raise MalformedFrame(f"unknown reference frame {ref!r}")
    raw = obj.get("joints", {})
    if not isinstance(raw, dict):
        raise MalformedFrame('"joints" must be an object')
    joints = {}
    for name, j in raw.items():
        if name not in JOINT_IDS:
            raise MalformedFrame(f"unknown joint id {name!r}")
        if not isinstance(j, dict) or "p" not in j:
            raise MalformedFrame(f"joint {name} needs a position")
        p = j["p"]
        if not isinstance(p, list) or len(p) != 3:
            raise MalformedFrame(f"joint {name} position must have 3 components")
        xyz = np.array([_finite(x, f"{name}.p") for x in p])
        c = _finite(j.get("c", 1.0), f"{name}.c")
        if not 0.0 <= c <= 1.0:
            raise MalformedFrame(f"joint {name} confidence {c} outside [0, 1]")
        joints[name] = Joint(xyz, c)
    return JointFrame(t, ref, joints)


def parse_frame(line: Union[str, bytes], line_no: Optional[int] = None) -> JointFrame:
    try:
        obj = json.loads(line)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise MalformedFrame(f"bad JSON ({e.msg if hasattr(e, 'msg') else e})", line_no) from None
    try:
        return frame_from_dict(obj)
    except MalformedFrame as e:
        raise MalformedFrame(str(e), line_no) from None


def frame_to_dict(frame: JointFrame) -> dict:
    return {
        "t": frame.t,
        "frame": frame.frame,
        "joints": {k: {"p": [float(x) for x in frame.joints[k].p], "c": frame.joints[k].c}
                   for k in sorted(frame.joints)},
    }


def serialize_frame(frame: JointFrame) -> str:
    return json.dumps(frame_to_dict(frame), separators=(",", ":"))


def serialize_event(event: PointingEvent) -> str:
    return json.dumps(event.to_dict(), separators=(",", ":"))


def event_from_dict(obj: dict) -> PointingEvent:
    return PointingEvent(float(obj["t"]), obj["arm"], float(obj["u"]), float(obj["v"]),
                         obj["cell"], bool(obj["stable"]), bool(obj.get("grazing", False)))


def read_events(path) -> list[PointingEvent]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                events.append(event_from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as e:
                raise ValueError(f"{path}:{i}: bad event line ({e})") from None
    return events


def write_frames(frames: Iterable[JointFrame], fh: IO[str]) -> int:
    n = 0
    for f in frames:
        fh.write(serialize_frame(f) + "\n")
        n += 1
    return n


def iter_frames(lines: Iterable[Union[str, bytes]], source: str = "<stream>") -> Iterator[JointFrame]:
    """Parse NDJSON lines, skipping (and logging) malformed and out-of-order frames."""
    last_t = -math.inf
    for i, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            frame = parse_frame(line, i)
        except MalformedFrame as e:
            log.warning("%s: %s", source, e)
            continue
        if frame.t < last_t:
            log.warning("%s: line %d: frame t=%g before t=%g, dropped", source, i, frame.t, last_t)
            continue
        last_t = frame.t
        yield frame


def replay(path: Union[str, Path], speed: float = 0.0,
           clock=time.monotonic, sleep=time.sleep) -> Iterator[JointFrame]:
    """Frames from an NDJSON file in order.

    ``speed=0`` delivers as fast as possible; otherwise frames are paced so that
    stream time advances ``speed`` times as fast as wall-clock time.
    """
    if speed < 0:
        raise ValueError("speed must be >= 0")
    with open(path, encoding="utf-8") as fh:
        start = None
        for frame in iter_frames(fh, str(path)):
            if speed > 0:
                if start is None:
                    start = (clock(), frame.t)
                due = start[0] + (frame.t - start[1]) / speed
                delay = due - clock()
                if delay > 0:
                    sleep(delay)
            yield frame
