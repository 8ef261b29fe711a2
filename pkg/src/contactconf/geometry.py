"""Planar poses, wrenches, contact frames, and the convex polygon object model.

Conventions used throughout the package:

* world x points right, world y points up (opposite gravity), angles and
  torques are counter-clockwise positive,
* a contact frame stores a tangent axis ``e_t`` and a normal axis ``e_n``;
  for the hand contact ``e_n`` points from the hand into the object, so the
  normal force component is non-negative while contact is held,
* wrench components in a frame are ``(f along e_t, f along e_n, tau)`` where
  ``tau`` is the plain CCW moment about the frame origin (torque is never
  reflected, even though (e_t, e_n) may be an improper pair).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

WORLD = "world"
HAND_CONTACT = "hand-contact"

ORTHONORMAL_TOL = 1e-12


class FrameError(ValueError):
    """Raised on cross-frame arithmetic without an explicit transform."""


def normalize_angle(theta: float) -> float:
    """Map an angle to (-pi, pi], preserving it mod 2*pi."""
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta!r}")
    wrapped = (theta + math.pi) % (2.0 * math.pi) - math.pi
    if wrapped == -math.pi:
        wrapped = math.pi
    return wrapped


def rot2(theta: float) -> np.ndarray:
    """CCW rotation matrix."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def cross2(a, b) -> float:
    """z component of the planar cross product a x b."""
    return float(a[0] * b[1] - a[1] * b[0])


def hand_axes(theta_h: float) -> tuple[np.ndarray, np.ndarray]:
    """Tangent and normal axes of the hand contact frame at hand angle theta_h.

    e_t runs along the hand line; e_n points from the hand into the object
    (straight down when the hand is horizontal on top of the object).
    """
    c, s = math.cos(theta_h), math.sin(theta_h)
    return np.array([c, s]), np.array([s, -c])


@dataclass(frozen=True)
class Pose2:
    """Planar pose (m, m, rad) with the angle normalized to (-pi, pi]."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def replace(self, x=None, y=None, theta=None) -> "Pose2":
        return Pose2(
            self.x if x is None else x,
            self.y if y is None else y,
            self.theta if theta is None else theta,
        )


@dataclass(frozen=True)
class Wrench2:
    """Planar wrench with an explicit frame tag.

    In the world frame the components are (f_x, f_y, tau about the frame
    origin).  In a contact frame f_x is the tangential component and f_y the
    normal component.
    """

    f_x: float
    f_y: float
    tau: float
    frame: str = WORLD

    @property
    def force(self) -> np.ndarray:
        return np.array([self.f_x, self.f_y])

    def require_frame(self, frame: str) -> "Wrench2":
        if self.frame != frame:
            raise FrameError(f"wrench is in frame {self.frame!r}, expected {frame!r}")
        return self

    def scaled(self, c: float) -> "Wrench2":
        return Wrench2(c * self.f_x, c * self.f_y, c * self.tau, self.frame)


@dataclass(frozen=True)
class FrameBasis:
    """A planar frame: origin plus orthonormal normal/tangent axes.

    The pair (e_n, e_t) only has to be orthonormal; handedness is free so the
    hand contact frame (normal pointing into the object) is representable.
    """

    e_n: np.ndarray
    e_t: np.ndarray
    origin: np.ndarray
    name: str = WORLD

    def __post_init__(self):
        e_n = np.asarray(self.e_n, dtype=float)
        e_t = np.asarray(self.e_t, dtype=float)
        origin = np.asarray(self.origin, dtype=float)
        if abs(np.dot(e_n, e_n) - 1.0) > 1e-10 or abs(np.dot(e_t, e_t) - 1.0) > 1e-10:
            raise ValueError("frame axes must be unit vectors")
        if abs(np.dot(e_n, e_t)) > ORTHONORMAL_TOL:
            raise ValueError("frame axes must be orthogonal")
        object.__setattr__(self, "e_n", e_n)
        object.__setattr__(self, "e_t", e_t)
        object.__setattr__(self, "origin", origin)

    @staticmethod
    def world() -> "FrameBasis":
        return FrameBasis(np.array([0.0, 1.0]), np.array([1.0, 0.0]), np.zeros(2), WORLD)

    @staticmethod
    def hand_contact(center: np.ndarray, theta_h: float) -> "FrameBasis":
        e_t, e_n = hand_axes(theta_h)
        return FrameBasis(e_n, e_t, np.asarray(center, dtype=float), HAND_CONTACT)

    def force_to_world(self, f_t: float, f_n: float) -> np.ndarray:
        return f_t * self.e_t + f_n * self.e_n

    def force_from_world(self, f: np.ndarray) -> tuple[float, float]:
        return float(np.dot(f, self.e_t)), float(np.dot(f, self.e_n))


def transform_wrench(w: Wrench2, src: FrameBasis, dst: FrameBasis) -> Wrench2:
    """Re-express a wrench in another frame.

    Forces are re-projected onto the destination axes; the torque picks up the
    moment-arm term of the force about the new origin.  The CCW sign of tau is
    common to all frames.
    """
    w.require_frame(src.name)
    f_world = src.force_to_world(w.f_x, w.f_y)
    # torque about dst.origin = torque about src.origin + (src.origin - dst.origin) x f
    tau = w.tau + cross2(src.origin - dst.origin, f_world)
    f_t, f_n = dst.force_from_world(f_world)
    return Wrench2(f_t, f_n, tau, dst.name)


def _polygon_area2(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True)
class ConvexPolygon:
    """Strictly convex CCW polygon in body coordinates, with mass properties.

    Simulator-only ground truth: estimators and controller never see it.
    """

    vertices: np.ndarray
    mass: float
    com: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("vertices must be an (n>=3, 2) array")
        n = len(v)
        for i in range(n):
            a, b, c = v[i], v[(i + 1) % n], v[(i + 2) % n]
            if cross2(b - a, c - b) <= 1e-12:
                raise ValueError("vertices must be strictly convex in CCW order")
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        com = self.com
        if com is None:
            com = self.centroid_of(v)
        com = np.asarray(com, dtype=float)
        if not self.contains(v, com):
            raise ValueError("center of mass must lie inside the polygon")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "com", com)

    @staticmethod
    def centroid_of(v: np.ndarray) -> np.ndarray:
        x, y = v[:, 0], v[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cr = x * yn - xn * y
        area = cr.sum() / 2.0
        cx = ((x + xn) * cr).sum() / (6.0 * area)
        cy = ((y + yn) * cr).sum() / (6.0 * area)
        return np.array([cx, cy])

    @staticmethod
    def contains(v: np.ndarray, p: np.ndarray, tol: float = 1e-12) -> bool:
        n = len(v)
        return all(cross2(v[(i + 1) % n] - v[i], p - v[i]) > -tol for i in range(n))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def world_vertices(self, pose: Pose2) -> np.ndarray:
        return pose.position + self.vertices @ rot2(pose.theta).T

    def face_tangent_angle(self, i: int) -> float:
        """Body-frame angle of the edge from vertex i to vertex i+1."""
        a = self.vertices[i]
        b = self.vertices[(i + 1) % self.n_vertices]
        return math.atan2(b[1] - a[1], b[0] - a[0])
