"""Impedance-target directions for the admissible motions.

All three directions are expressed in the hand contact frame with components
(tangential, normal, rotation):

* object rotation about the ground pivot: [-d, s_h, 1] per radian,
* hand sliding along the face: [-1, 0, 0] per meter of s_h,
* object sliding along the ground: world [1, 0, 0] per meter of s_g,
  projected onto the hand axes.
"""

from __future__ import annotations

import math

import numpy as np

from ..estimation.kinematics import KinematicSnapshot

D_GUESS_DEFAULT = 0.05


def rotation_direction(kin: KinematicSnapshot, d_guess: float = D_GUESS_DEFAULT):
    """Target direction for object rotation; falls back to a naive face offset."""
    if kin.d_valid and kin.s_h_valid:
        return np.array([-kin.d_hat, kin.s_h_hat, 1.0])
    return np.array([-d_guess, 0.0, 1.0])


def hand_slide_direction() -> np.ndarray:
    return np.array([-1.0, 0.0, 0.0])


def ground_slide_direction(theta_h: float) -> np.ndarray:
    """World +x projected onto the hand axes (e_t, e_n)."""
    return np.array([math.cos(theta_h), math.sin(theta_h), 0.0])


def target_directions(
    kin: KinematicSnapshot, theta_h: float, d_guess: float = D_GUESS_DEFAULT
) -> dict:
    return {
        "theta_o": rotation_direction(kin, d_guess),
        "s_h": hand_slide_direction(),
        "s_g": ground_slide_direction(theta_h),
    }
