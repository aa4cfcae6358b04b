"""Synthetic skeleton streams with ground truth.

The scene follows the measurement setup: a board standing in the world plane
``y = 0`` (see :meth:`BoardModel.from_layout`), a depth sensor centred above its
top edge looking down at the user, and a participant standing ``stand_distance_mm``
in front of the board facing it (+y). World x runs to the participant's right, z up.

For each scripted target the aim point glides across the board plane from the
previous target with critically damped dynamics, reaching the target exactly after
``settle_time_s``, then holds for ``hold_s``. The elbow is placed along the
shoulder-to-aim line (slightly dropped) and the hand on the exact elbow-to-aim ray,
so a noiseless stream intersects the board at the aim point. Sensor noise is added
per joint afterwards: white jitter every frame plus an offset that persists while a
pose is held (skeleton fitting errors depend on the pose), both scaled by
``jitter_sigma_mm``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
import json
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .board import BoardModel, GridSpec
from .geometry import RigidTransform, apply, invert, rotation_about_axis
from .stream import Joint, JointFrame, serialize_frame

FRAME_RATE_HZ = 30.0
FORWARD = np.array([0.0, 1.0, 0.0])
UP = np.array([0.0, 0.0, 1.0])
REST_AIM_HEIGHT_MM = 300.0  # above ground, below the board
MAX_AIM_ANGLE_DEG = 100.0


class UnreachableTarget(ValueError):
    pass


@dataclass(frozen=True)
class Participant:
    height_mm: float = 1750.0
    arm_length_mm: float = 700.0
    handedness: str = "right"
    stand_distance_mm: float = 1500.0
    shoulder_height_ratio: float = 0.82
    shoulder_width_ratio: float = 0.25
    upper_arm_fraction: float = 0.47
    elbow_drop_mm: float = 50.0

    def __post_init__(self):
        if min(self.height_mm, self.arm_length_mm, self.stand_distance_mm) <= 0:
            raise ValueError("participant dimensions must be positive")
        if self.arm_length_mm >= self.height_mm:
            raise ValueError("arm length must be below body height")
        if self.handedness not in ("left", "right"):
            raise ValueError("handedness must be left or right")

    @property
    def shoulder_height_mm(self) -> float:
        return self.shoulder_height_ratio * self.height_mm

    @property
    def upper_arm_mm(self) -> float:
        return self.upper_arm_fraction * self.arm_length_mm

    @property
    def forearm_mm(self) -> float:
        return self.arm_length_mm - self.upper_arm_mm

    def shoulder(self, arm: str) -> np.ndarray:
        half = self.shoulder_width_ratio * self.height_mm / 2.0
        x = -half if arm == "left" else half
        return np.array([x, -self.stand_distance_mm, self.shoulder_height_mm])

    def head(self) -> np.ndarray:
        return np.array([0.0, -self.stand_distance_mm, 0.93 * self.height_mm])


@dataclass(frozen=True)
class NoiseModel:
    jitter_sigma_mm: float = 0.0
    settle_time_s: float = 1.5
    left_arm_length_bias_mm: float = 0.0
    right_arm_angular_bias_deg: float = 0.0  # yaw of the measured right forearm
    motor_noise: bool = False  # jitter the forearm direction instead of joint positions
    # per-pose joint offset, held for one target, as a multiple of jitter_sigma_mm
    pose_bias_ratio: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.jitter_sigma_mm < 0:
            raise ValueError("jitter_sigma_mm must be >= 0")
        if self.settle_time_s <= 0:
            raise ValueError("settle_time_s must be positive")
        if self.pose_bias_ratio < 0:
            raise ValueError("pose_bias_ratio must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> NoiseModel:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown noise keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class SessionScript:
    grid: GridSpec
    target_sequence: tuple
    hold_s: float = 3.0
    arm: str = "right"

    def __post_init__(self):
        object.__setattr__(self, "target_sequence", tuple(int(c) for c in self.target_sequence))
        valid = set(self.grid.cell_ids)
        bad = [c for c in self.target_sequence if c not in valid]
        if bad:
            raise ValueError(f"cells {bad} not in a {self.grid.label} grid")
        if self.arm not in ("left", "right"):
            raise ValueError("arm must be left or right")
        if self.hold_s <= 0:
            raise ValueError("hold_s must be positive")


@dataclass(frozen=True)
class TruthInterval:
    cell: int
    t_start: float
    t_end: float

    def to_dict(self) -> dict:
        return {"cell": self.cell, "t_start": self.t_start, "t_end": self.t_end}


@dataclass
class Scene:
    board: BoardModel = field(default_factory=BoardModel.from_layout)
    sensor_to_world: Optional[RigidTransform] = None

    def __post_init__(self):
        if self.sensor_to_world is None:
            self.sensor_to_world = default_sensor_pose(self.board)


def default_sensor_pose(board: BoardModel, above_top_edge_mm: float = 1300.0,
                        look_at=(0.0, -1500.0, 1300.0), standoff_mm: float = 100.0) -> RigidTransform:
    """Camera centred above the board, optical axis (+z) towards ``look_at``, image y down."""
    top = board.bottom_edge_above_ground_mm + board.height_mm
    centre_x = float(board.to_world(board.width_mm / 2.0, 0.0)[0])
    pos = np.array([centre_x, -standoff_mm, top + above_top_edge_mm])
    z = np.asarray(look_at, dtype=float) - pos
    z /= np.linalg.norm(z)
    x = np.cross(z, UP)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return RigidTransform(np.column_stack([x, y, z]), pos, "sensor", "world")


def _arm_poses(participant: Participant, targets: np.ndarray, arm: str):
    s = participant.shoulder(arm)
    to_target = targets - s
    elbow = (s + participant.upper_arm_mm * to_target / np.linalg.norm(to_target, axis=1)[:, None]
             - participant.elbow_drop_mm * UP)
    d = targets - elbow
    d /= np.linalg.norm(d, axis=1)[:, None]
    angle = np.degrees(np.arccos(np.clip(d @ FORWARD, -1.0, 1.0)))
    if np.any(angle > MAX_AIM_ANGLE_DEG):
        raise UnreachableTarget(f"aim direction {angle.max():.1f} deg from forward")
    return elbow, elbow + participant.forearm_mm * d


def arm_pose_for_target(participant: Participant, target, arm: str) -> tuple[np.ndarray, np.ndarray]:
    """Elbow and hand positions whose forearm ray passes exactly through ``target``."""
    elbow, hand = _arm_poses(participant, np.asarray(target, dtype=float)[None, :], arm)
    return elbow[0], hand[0]


def glide(tau: np.ndarray, settle_time_s: float) -> np.ndarray:
    """Critically damped step response scaled to reach exactly 1 at ``settle_time_s``."""
    # (1 + x) e^-x = residual  ->  x ~ 9.23 for residual 1e-3
    x_end = 9.233413476451056
    omega = x_end / settle_time_s
    def s(x):
        return 1.0 - (1.0 + x) * np.exp(-x)
    tau = np.clip(tau, 0.0, settle_time_s)
    return s(omega * tau) / s(x_end)


def rest_aim(participant: Participant, board: BoardModel, arm: str) -> tuple[float, float]:
    """Board-plane ``(u, v)`` straight ahead of the shoulder, below the board."""
    p = participant.shoulder(arm).copy()
    p[1] = 0.0
    p[2] = REST_AIM_HEIGHT_MM
    q = apply(board.to_board, p)
    return float(q[0]), float(q[1])


def simulate_session(participant: Participant, script: SessionScript, noise: NoiseModel,
                     scene: Optional[Scene] = None, frame: str = "sensor",
                     rate_hz: float = FRAME_RATE_HZ) -> tuple[list[JointFrame], list[TruthInterval]]:
    """Frames and ground-truth hold intervals for one scripted session.

    ``frame`` selects whether joints are reported in sensor or world coordinates.
    Deterministic given ``noise.seed``.
    """
    scene = scene or Scene()
    board, grid = scene.board, script.grid
    rng = np.random.default_rng(noise.seed)
    S, H = noise.settle_time_s, script.hold_s
    period = S + H
    n_frames = int(round(len(script.target_sequence) * period * rate_hz))
    t = np.arange(n_frames) / rate_hz

    # aim trajectory in board coordinates
    starts = [rest_aim(participant, board, script.arm)]
    ends = []
    truth = []
    for k, cell in enumerate(script.target_sequence):
        ends.append(grid.cell_center(cell))
        starts.append(ends[-1])
        truth.append(TruthInterval(cell, k * period + S, (k + 1) * period))
    starts = np.array(starts[:-1])
    ends = np.array(ends)
    k = np.minimum((t // period).astype(int), len(ends) - 1)
    g = glide(t - k * period, S)[:, None]
    uv = starts[k] + g * (ends[k] - starts[k])
    aim = uv[:, 0:1] * board.pose.rotation[:, 0] + uv[:, 1:2] * board.pose.rotation[:, 1] + board.pose.translation

    arm = script.arm
    other = "left" if arm == "right" else "right"
    elbow, hand = _arm_poses(participant, aim, arm)
    forearm_dir = (hand - elbow) / participant.forearm_mm

    if noise.motor_noise and noise.jitter_sigma_mm > 0:
        ang = rng.normal(0.0, noise.jitter_sigma_mm / participant.forearm_mm, (n_frames, 3))
        ang -= (ang * forearm_dir).sum(axis=1)[:, None] * forearm_dir
        forearm_dir = forearm_dir + ang
        forearm_dir /= np.linalg.norm(forearm_dir, axis=1)[:, None]
        hand = elbow + participant.forearm_mm * forearm_dir

    # measurement biases
    if arm == "left" and noise.left_arm_length_bias_mm:
        hand = hand + noise.left_arm_length_bias_mm * forearm_dir
    if arm == "right" and noise.right_arm_angular_bias_deg:
        Rb = rotation_about_axis(UP, math.radians(noise.right_arm_angular_bias_deg))
        hand = elbow + (hand - elbow) @ Rb.T

    # resting arm hangs slightly forward of the body
    s_o = participant.shoulder(other)
    e_o = s_o - participant.upper_arm_mm * UP
    h_o = e_o + participant.forearm_mm * np.array([0.0, 0.34, -0.94])
    joints = {
        f"elbow_{arm}": elbow,
        f"hand_{arm}": hand,
        f"shoulder_{arm}": np.broadcast_to(participant.shoulder(arm), (n_frames, 3)),
        f"elbow_{other}": np.broadcast_to(e_o, (n_frames, 3)),
        f"hand_{other}": np.broadcast_to(h_o, (n_frames, 3)),
        f"shoulder_{other}": np.broadcast_to(s_o, (n_frames, 3)),
        "head": np.broadcast_to(participant.head(), (n_frames, 3)),
    }
    names = sorted(joints)
    stack = np.stack([joints[n] for n in names], axis=1)  # (frames, joints, 3)
    sigma = noise.jitter_sigma_mm
    if sigma > 0:
        noise_xyz = rng.normal(0.0, sigma, stack.shape)
        if noise.motor_noise:
            # pointing-arm joints already carry motor jitter
            for i, n in enumerate(names):
                if n.endswith(arm) and not n.startswith("shoulder"):
                    noise_xyz[:, i] = 0.0
        stack = stack + noise_xyz
        if noise.pose_bias_ratio > 0:
            held = rng.normal(0.0, noise.pose_bias_ratio * sigma, (len(ends), len(names), 3))
            stack = stack + held[k]
    if frame == "sensor":
        stack = apply(invert(scene.sensor_to_world), stack.reshape(-1, 3)).reshape(stack.shape)
    elif frame != "world":
        raise ValueError(f"unknown frame {frame!r}")

    out = []
    for i in range(n_frames):
        row = stack[i]
        out.append(JointFrame(float(t[i]), frame,
                              {n: Joint(row[j], 0.9) for j, n in enumerate(names)}))
    return out, truth


def target_sequence(grid: GridSpec, n_targets: int, rng: np.random.Generator) -> list[int]:
    """Balanced random order: every cell appears before any cell repeats."""
    seq = []
    ids = np.array(grid.cell_ids)
    while len(seq) < n_targets:
        seq.extend(int(c) for c in rng.permutation(ids))
    return seq[:n_targets]


def make_participants(n: int, seed: int) -> list[Participant]:
    """Adults of varied height and arm length, mostly right-handed."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        h = float(np.clip(rng.normal(1720.0, 90.0), 1500.0, 2000.0))
        arm = float(0.40 * h * rng.normal(1.0, 0.03))
        handed = "left" if rng.random() < 0.1 else "right"
        out.append(Participant(height_mm=round(h, 1), arm_length_mm=round(arm, 1), handedness=handed))
    return out


def write_session(frames: Sequence[JointFrame], truth: Sequence[TruthInterval],
                  frames_path, truth_path) -> None:
    with open(frames_path, "w", encoding="utf-8") as fh:
        for f in frames:
            fh.write(serialize_frame(f) + "\n")
    write_truth(truth, truth_path)


def write_truth(truth: Sequence[TruthInterval], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for iv in truth:
            fh.write(json.dumps(iv.to_dict(), separators=(",", ":")) + "\n")


def read_truth(path) -> list[TruthInterval]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                out.append(TruthInterval(int(d["cell"]), float(d["t_start"]), float(d["t_end"])))
            except (ValueError, KeyError, TypeError) as e:
                raise ValueError(f"{Path(path)}:{i}: bad ground-truth line ({e})") from None
    return out
