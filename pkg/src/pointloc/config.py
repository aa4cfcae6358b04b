"""Run configuration: scene geometry, grid, engine, noise and I/O settings.

The file is JSON with a ``"schema": 1`` field. Every section is optional and
falls back to the shipped defaults (``data/default_config.json``). Poses are given
as ``{"quaternion": [w, x, y, z], "translation": [x, y, z]}``; when omitted the
board and sensor poses are derived from the layout dimensions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
import json
import os
from pathlib import Path
from typing import Optional

from .board import BoardModel, GridSpec, build_grid
from .engine import EngineConfig
from .geometry import GeometryError, RigidTransform
from .simulator import NoiseModel, Scene, default_sensor_pose

SCHEMA_VERSION = 1
CONFIG_ENV = "POINTLOC_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass
class IOConfig:
    host: str = "127.0.0.1"
    ingest_port: int = 9000
    events_port: Optional[int] = None
    gap_reset_s: float = 1.0


@dataclass
class RunConfig:
    board: BoardModel
    sensor_to_world: RigidTransform
    rows: int = 2
    cols: int = 3
    numbering: Optional[list] = None
    engine: EngineConfig = field(default_factory=EngineConfig)
    noise: NoiseModel = field(default_factory=NoiseModel)
    hold_s: float = 3.0
    trials_per_cell: int = 10
    io: IOConfig = field(default_factory=IOConfig)
    source: str = "<defaults>"

    @property
    def scene(self) -> Scene:
        return Scene(self.board, self.sensor_to_world)

    def grid(self, rows: Optional[int] = None, cols: Optional[int] = None) -> GridSpec:
        rows = self.rows if rows is None else rows
        cols = self.cols if cols is None else cols
        numbering = self.numbering if (rows, cols) == (self.rows, self.cols) else None
        return build_grid(self.board, rows, cols, numbering)


def default_config_text() -> str:
    return resources.files("pointloc").joinpath("data/default_config.json").read_text(encoding="utf-8")


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _pose(d, from_frame: str) -> RigidTransform:
    try:
        return RigidTransform.from_quaternion(d["quaternion"], d["translation"], from_frame, "world")
    except (KeyError, TypeError) as e:
        raise ConfigError(f"{from_frame} pose needs quaternion and translation ({e})") from None


def config_from_dict(d: dict, source: str = "<dict>") -> RunConfig:
    d = _merge(json.loads(default_config_text()), d)
    if d.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"{source}: unsupported schema {d.get('schema')!r}")
    try:
        b = d["board"]
        if b.get("pose"):
            board = BoardModel(_pose(b["pose"], "board"), b["width_mm"], b["height_mm"],
                               b["bottom_edge_above_ground_mm"])
        else:
            board = BoardModel.from_layout(b["width_mm"], b["height_mm"], b["bottom_edge_above_ground_mm"])
        s = d["sensor"]
        sensor = (_pose(s["pose"], "sensor") if s.get("pose")
                  else default_sensor_pose(board, s["above_top_edge_mm"]))
        if (sensor.from_frame, sensor.to_frame) != ("sensor", "world") or board.pose.to_frame != "world":
            raise ConfigError("frames must chain sensor -> world -> board")
        g = d["grid"]
        sess = d["session"]
        cfg = RunConfig(
            board=board,
            sensor_to_world=sensor,
            rows=int(g["rows"]),
            cols=int(g["cols"]),
            numbering=g.get("numbering"),
            engine=EngineConfig.from_dict(d["engine"]),
            noise=NoiseModel.from_dict(d["noise"]),
            hold_s=float(sess["hold_s"]),
            trials_per_cell=int(sess["trials_per_cell"]),
            io=IOConfig(**d["io"]),
            source=source,
        )
        cfg.grid()  # validates rows/cols/numbering
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, GeometryError) as e:
        raise ConfigError(f"{source}: {e}") from None
    return cfg


def load_config(path=None) -> RunConfig:
    """Load ``path``, else the file named by ``$POINTLOC_CONFIG``, else the defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return config_from_dict({}, "<defaults>")
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{p}: {e.strerror}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p}:{e.lineno}: {e.msg}") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{p}: top level must be an object")
    return config_from_dict(d, str(p))
