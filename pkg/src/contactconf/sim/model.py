"""World model data for the quasi-static simulator.

The object's body frame is normalized at load time so that the face touched
by the hand has outward normal +y and tangent +x.  With that convention the
object's pose angle theta_o equals the world angle of the contacted face
tangent, and flush hand contact means theta_h = theta_o exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..contact import ContactConfiguration, ContactModelParams
from ..geometry import ConvexPolygon, Pose2, Wrench2, rot2

FLAT_TOL = 1e-6  # rad, face counts as flat on the ground within this


@dataclass(frozen=True)
class NoiseModel:
    force_std: float = 0.1      # N, per force component in the hand frame
    torque_std: float = 0.005   # N*m
    pos_std: float = 2e-4       # m, per position component
    rot_std: float = 1e-3       # rad
    enabled: bool = True

    @staticmethod
    def none() -> "NoiseModel":
        return NoiseModel(0.0, 0.0, 0.0, 0.0, enabled=False)


@dataclass(frozen=True)
class SimParams:
    contact: ContactModelParams
    object: ConvexPolygon
    hand_edge: int
    stiffness: np.ndarray           # diag (k_t, k_n, k_theta)
    noise: NoiseModel = NoiseModel()
    seed: int = 0
    gravity: float = 9.81
    step_clamp_lin: float = 5e-4    # m, per internal substep
    step_clamp_rot: float = math.radians(0.1)

    def __post_init__(self):
        k = np.asarray(self.stiffness, dtype=float)
        if k.shape != (3,) or np.any(k <= 0):
            raise ValueError("stiffness must be three positive diagonal entries")
        object.__setattr__(self, "stiffness", k)


class ObjectModel:
    """Polygon preprocessed into the hand-face-aligned body frame."""

    def __init__(self, polygon: ConvexPolygon, hand_edge: int):
        n = polygon.n_vertices
        if not 0 <= hand_edge < n:
            raise ValueError("hand_edge out of range")
        a = polygon.vertices[hand_edge]
        b = polygon.vertices[(hand_edge + 1) % n]
        edge = b - a
        # outward normal of a CCW polygon edge
        normal = np.array([edge[1], -edge[0]]) / np.linalg.norm(edge)
        align = math.pi / 2 - math.atan2(normal[1], normal[0])
        r = rot2(align)
        self.vertices = polygon.vertices @ r.T
        self.com = polygon.com @ r.T
        self.mass = polygon.mass
        self.hand_edge = hand_edge
        self.n = n
        ha = self.vertices[hand_edge]
        hb = self.vertices[(hand_edge + 1) % n]
        self.face_y = float(ha[1])
        self.face_x_lo = float(min(ha[0], hb[0]))
        self.face_x_hi = float(max(ha[0], hb[0]))
        # distance from each vertex to the hand-face line (positive below it)
        self.d_of_vertex = self.face_y - self.vertices[:, 1]
        # body angle of each edge i -> i+1
        self.edge_angles = np.array(
            [
                math.atan2(*(self.vertices[(i + 1) % n] - self.vertices[i])[::-1])
                for i in range(n)
            ]
        )

    def edge(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices[i], self.vertices[(i + 1) % self.n]

    def edge_length(self, i: int) -> float:
        a, b = self.edge(i)
        return float(np.linalg.norm(b - a))

    def flat_angle(self, i: int) -> float:
        """Object pose angle at which edge i lies flat on the ground."""
        from ..geometry import normalize_angle

        return normalize_angle(-self.edge_angles[i])


@dataclass(frozen=True)
class GroundGeometry:
    """Either point contact at one vertex or a face flat on the ground."""

    kind: str                 # "vertex" | "line"
    index: int                # vertex index, or edge index for "line"

    def __post_init__(self):
        if self.kind not in ("vertex", "line"):
            raise ValueError(f"unknown ground geometry {self.kind!r}")


@dataclass(frozen=True)
class Measurement:
    """What the estimators see: noisy hand pose and hand-frame wrench."""

    hand_pose: Pose2
    hand_wrench: Wrench2


@dataclass(frozen=True)
class WorldState:
    """Ground-truth snapshot exposed to the harness (never the estimators)."""

    hand_pose: Pose2
    object_pose: Pose2
    s_h: float
    s_g: float
    ground_geometry: GroundGeometry
    hand_wrench_true: Wrench2
    ground_force: np.ndarray
    ground_torque: float
    active_config: ContactConfiguration
    hand_slipped: bool
    ground_slipped: bool
    x_tar: Pose2


class SimulationFault(RuntimeError):
    """Base class for simulator faults."""


class ContactLost(SimulationFault):
    def __init__(self, which: str, detail: str = ""):
        super().__init__(f"contact lost at {which}: {detail}")
        self.which = which


class NoConsistentMode(SimulationFault):
    def __init__(self, diagnostics):
        lines = "; ".join(
            f"{d['mode']}: {d['reason']}" for d in diagnostics[:8]
        )
        super().__init__(f"no consistent contact mode ({lines})")
        self.diagnostics = diagnostics
