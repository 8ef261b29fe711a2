"""Contact-configuration estimation and control for planar manipulation.

A quasi-static planar simulator (hand line, convex polygon object, ground)
plays the world; streaming estimators recover the transmissible wrench set
and the contact kinematics from hand wrench and pose alone; a small dense QP
updates the hand impedance target to regulate contact modes and drive the
object through commanded configuration sequences.
"""

from .geometry import (
    ConvexPolygon,
    FrameBasis,
    FrameError,
    Pose2,
    Wrench2,
    normalize_angle,
    transform_wrench,
)
from .contact import (
    ContactConfiguration,
    ContactMode,
    ContactModelParams,
    Rotational,
    Tangential,
    complementarity_residual,
    ground_friction_residuals,
    hand_friction_residuals,
    hand_torque_residuals,
)

__version__ = "0.1.0"

__all__ = [
    "ConvexPolygon",
    "FrameBasis",
    "FrameError",
    "Pose2",
    "Wrench2",
    "normalize_angle",
    "transform_wrench",
    "ContactConfiguration",
    "ContactMode",
    "ContactModelParams",
    "Rotational",
    "Tangential",
    "complementarity_residual",
    "ground_friction_residuals",
    "hand_friction_residuals",
    "hand_torque_residuals",
]
