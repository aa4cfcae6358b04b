"""Vector, rotation and rigid-transform primitives plus the pointing ray/plane intersection.

Points and directions are plain ``numpy`` arrays of shape ``(3,)``. Lengths are in
millimetres, angles in radians. Quaternions are ordered ``(w, x, y, z)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

QUATERNION_TOLERANCE = 1e-6
PARALLEL_EPS = 1e-9
GRAZING_COS = 1e-3


class GeometryError(ValueError):
    pass


class NonUnitQuaternion(GeometryError):
    pass


class FrameMismatch(GeometryError):
    pass


class RayParallel(GeometryError):
    pass


class PointsAway(GeometryError):
    pass


class DegenerateRay(GeometryError):
    pass


def vec3(p) -> np.ndarray:
    """Coerce any length-3 sequence to a float array, rejecting non-finite input."""
    a = np.asarray(p, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected 3 components, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite vector {a}")
    return a


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = math.sqrt(float(v @ v))
    if n == 0.0:
        raise ValueError("cannot normalise a zero vector")
    return v / n


# -- rotations ---------------------------------------------------------------

def rotation_from_quaternion(q) -> np.ndarray:
    """Rotation matrix for a unit quaternion ``(w, x, y, z)``.

    Quaternions whose norm is within 1e-6 of one are renormalised; anything further
    off (including the zero quaternion) raises :class:`NonUnitQuaternion`.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (4,) or not np.all(np.isfinite(q)):
        raise NonUnitQuaternion(f"not a quaternion: {q!r}")
    n = math.sqrt(float(q @ q))
    if abs(n - 1.0) > QUATERNION_TOLERANCE:
        raise NonUnitQuaternion(f"|q| = {n:.9g} is not 1")
    w, x, y, z = q / n
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quaternion_from_rotation(R) -> np.ndarray:
    # Shepperd's method; returns the representative with w >= 0
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    q /= np.linalg.norm(q)
    return q if q[0] >= 0 else -q


def rotation_about_axis(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation by ``angle`` radians about ``axis``."""
    k = unit(axis)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def is_rotation(R, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    return (R.shape == (3, 3)
            and np.allclose(R.T @ R, np.eye(3), atol=tol, rtol=0)
            and abs(np.linalg.det(R) - 1.0) <= tol)


# -- rigid transforms --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Maps points expressed in ``from_frame`` into ``to_frame``: ``p' = R p + t``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    from_frame: str = ""
    to_frame: str = ""

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float)
        t = vec3(self.translation)
        if not is_rotation(R):
            raise GeometryError("rotation is not orthonormal with det +1")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls, frame: str = "") -> RigidTransform:
        return cls(from_frame=frame, to_frame=frame)

    @classmethod
    def from_quaternion(cls, q, translation=(0.0, 0.0, 0.0), from_frame: str = "",
                        to_frame: str = "") -> RigidTransform:
        return cls(rotation_from_quaternion(q), translation, from_frame, to_frame)

    @property
    def quaternion(self) -> np.ndarray:
        return quaternion_from_rotation(self.rotation)

    def __call__(self, p) -> np.ndarray:
        return apply(self, p)

    def __repr__(self):
        return (f"RigidTransform({self.from_frame!r}->{self.to_frame!r}, "
                f"q={np.round(self.quaternion, 9).tolist()}, t={self.translation.tolist()})")


def apply(transform: RigidTransform, p) -> np.ndarray:
    """``R p + t``. Also accepts an ``(n, 3)`` array of points."""
    p = np.asarray(p, dtype=float)
    return p @ transform.rotation.T + transform.translation


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform equivalent to applying ``b`` first, then ``a``."""
    if a.from_frame != b.to_frame:
        raise FrameMismatch(f"cannot compose {a.from_frame!r}<-... with ...->{b.to_frame!r}")
    return RigidTransform(a.rotation @ b.rotation,
                          a.rotation @ b.translation + a.translation,
                          b.from_frame, a.to_frame)


def invert(t: RigidTransform) -> RigidTransform:
    Rt = t.rotation.T
    return RigidTransform(Rt, -(Rt @ t.translation), t.to_frame, t.from_frame)


# -- planes and rays ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Plane:
    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", vec3(self.point))
        object.__setattr__(self, "normal", unit(vec3(self.normal)))

    def signed_distance(self, p) -> float:
        return float((np.asarray(p, dtype=float) - self.point) @ self.normal)

    def transformed(self, t: RigidTransform) -> Plane:
        return Plane(apply(t, self.point), t.rotation @ self.normal)


@dataclass(frozen=True, eq=False)
class PointingRay:
    """Forearm ray from the elbow through the hand."""

    elbow: np.ndarray
    hand: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "elbow", vec3(self.elbow))
        object.__setattr__(self, "hand", vec3(self.hand))

    @property
    def direction(self) -> np.ndarray:
        return self.hand - self.elbow

    @property
    def length(self) -> float:
        d = self.direction
        return math.sqrt(float(d @ d))

    def transformed(self, t: RigidTransform) -> PointingRay:
        return PointingRay(apply(t, self.elbow), apply(t, self.hand))


@dataclass(frozen=True)
class Intersection:
    point: np.ndarray
    t: float
    cos_incidence: float

    @property
    def grazing(self) -> bool:
        return abs(self.cos_incidence) < GRAZING_COS


def intersect(ray: PointingRay, plane: Plane, parallel_eps: float = PARALLEL_EPS) -> Intersection:
    """Intersect the elbow->hand ray with a plane, keeping the incidence angle.

    The hit is ``H + s (H - E)`` with ``s = ((P - H) . n) / ((H - E) . n)``; it must lie
    strictly in front of the hand.
    """
    d = ray.direction
    length = math.sqrt(float(d @ d))
    if length == 0.0:
        raise DegenerateRay("elbow and hand coincide")
    denom = float(d @ plane.normal)
    cos = denom / length
    if abs(cos) <= parallel_eps:
        raise RayParallel(f"ray is parallel to the plane (cos={cos:.3g})")
    s = float((plane.point - ray.hand) @ plane.normal) / denom
    if s <= 0.0:
        raise PointsAway(f"plane lies behind the hand (t={s:.6g})")
    return Intersection(ray.hand + s * d, s, cos)


def intersect_ray_plane(ray: PointingRay, plane: Plane, parallel_eps: float = PARALLEL_EPS) -> np.ndarray:
    return intersect(ray, plane, parallel_eps).point
