import math

import numpy as np
import pytest

from contactconf.contact import ContactModelParams
from contactconf.geometry import ConvexPolygon
from contactconf.sim import NoiseModel, SimParams, Simulator

DEFAULT_K = np.array([1000.0, 1000.0, 30.0])


def square_polygon(side=0.15, mass=0.3):
    h = side / 2
    return ConvexPolygon(
        np.array([[-h, -h], [h, -h], [h, h], [-h, h]]), mass=mass
    )


def square_params(side=0.15, mass=0.3, mu_h=0.5, mu_g=0.8, l_h=0.05,
                  noise=None, seed=0):
    return SimParams(
        contact=ContactModelParams(mu_h=mu_h, mu_g=mu_g, l_h=l_h),
        object=square_polygon(side, mass),
        hand_edge=2,  # top edge of the square
        stiffness=DEFAULT_K.copy(),
        noise=noise or NoiseModel.none(),
        seed=seed,
    )


@pytest.fixture
def square_sim():
    # resting on the bottom edge (index 0), hand flush on top, 10 N preload
    return Simulator.from_rest(square_params(), ground_edge=0, preload=10.0)


@pytest.fixture
def tilting_sim():
    """Square with a short hand placed toward the tipping corner.

    With the hand centered on a flat-topped object the torque and friction
    cones cannot beat the support-width restoring torque; offsetting the hand
    toward the pivot corner makes CCW tumbling feasible (as placed in the
    bundled scenarios).
    """
    params = square_params(l_h=0.02)
    return Simulator.from_rest(
        params, ground_edge=0, hand_offset=-0.045, preload=10.0
    )


def rotate_target_about(x_tar, pivot, dtheta):
    """Impedance target rotated rigidly about a world point."""
    c, s = math.cos(dtheta), math.sin(dtheta)
    rel = x_tar[:2] - pivot
    out = x_tar.copy()
    out[0] = pivot[0] + c * rel[0] - s * rel[1]
    out[1] = pivot[1] + s * rel[0] + c * rel[1]
    out[2] = x_tar[2] + dtheta
    return out
