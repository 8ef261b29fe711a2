"""Contact model: friction/torque cone margins, complementarity, mode encoding.

Every residual function returns the pair of margins in a fixed order; a mode
label "POS" always means the FIRST margin of the pair is the saturated one.
The physical rates attached to each label under the package's axis
conventions are:

==================  =========================  ==========================
mode                saturated margin           admissible rate
==================  =========================  ==========================
hand  SLIDE_POS     mu f_n + f_t = 0           sdot_h >= 0
hand  SLIDE_NEG     mu f_n - f_t = 0           sdot_h <= 0
hand  PIVOT_POS     l f_n - tau = 0            d(theta_o - theta_h) <= 0
hand  PIVOT_NEG     l f_n + tau = 0            d(theta_o - theta_h) >= 0
ground SLIDE_POS    -mu(SumJ) + SumI = 0       sdot_g <= 0  (object -x)
ground SLIDE_NEG    -mu(SumJ) - SumI = 0       sdot_g >= 0  (object +x)
==================  =========================  ==========================

where s_h = (r_o - r_h) . e_t and s_g = x_o.  PIVOT_POS concentrates the
hand pressure at the endpoint -l_h e_t, PIVOT_NEG at +l_h e_t.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .geometry import HAND_CONTACT, WORLD, Wrench2

GRAVITY_DEFAULT = 9.81


class Tangential(enum.Enum):
    STICK = "stick"
    SLIDE_POS = "slide_pos"
    SLIDE_NEG = "slide_neg"

    @property
    def sliding(self) -> bool:
        return self is not Tangential.STICK


class Rotational(enum.Enum):
    FLUSH = "flush"
    PIVOT_POS = "pivot_pos"
    PIVOT_NEG = "pivot_neg"

    @property
    def pivoting(self) -> bool:
        return self is not Rotational.FLUSH


def hand_slide_mode_for_rate(ds_h: float) -> Tangential:
    """Hand tangential mode that admits a commanded change of s_h."""
    return Tangential.SLIDE_POS if ds_h > 0 else Tangential.SLIDE_NEG


def ground_slide_mode_for_rate(ds_g: float) -> Tangential:
    """Ground tangential mode that admits a commanded change of s_g = x_o.

    Positive object motion (+x) saturates the second ground margin, which
    carries the SLIDE_NEG label.
    """
    return Tangential.SLIDE_NEG if ds_g > 0 else Tangential.SLIDE_POS


def pivot_mode_for_relative_rate(dtheta_rel: float) -> Rotational:
    """Pivot mode admitting a change of theta_o - theta_h of the given sign."""
    return Rotational.PIVOT_NEG if dtheta_rel > 0 else Rotational.PIVOT_POS


def pivot_endpoint_sign(mode: Rotational) -> float:
    """Signed hand endpoint (in units of l_h along e_t) carrying the pressure."""
    if mode is Rotational.PIVOT_POS:
        return -1.0
    if mode is Rotational.PIVOT_NEG:
        return 1.0
    raise ValueError("flush contact has no pivot endpoint")


@dataclass(frozen=True)
class ContactMode:
    """Mode of a single contact; rotational applies to the hand contact only."""

    tangential: Tangential
    rotational: Optional[Rotational] = None


@dataclass(frozen=True)
class ContactConfiguration:
    """Modes and geometry of the hand and ground contacts."""

    hand: Optional[ContactMode]
    ground: Optional[Tangential]
    hand_contact_active: bool = True
    ground_contact_active: bool = True

    def __post_init__(self):
        if self.hand_contact_active and self.hand is None:
            raise ValueError("active hand contact requires a hand mode")
        if self.ground_contact_active and self.ground is None:
            raise ValueError("active ground contact requires a ground mode")

    @staticmethod
    def all_sticking() -> "ContactConfiguration":
        return ContactConfiguration(
            hand=ContactMode(Tangential.STICK, Rotational.FLUSH),
            ground=Tangential.STICK,
        )


@dataclass(frozen=True)
class ContactModelParams:
    """Friction coefficients, hand half-length, and the force regularizer."""

    mu_h: float
    mu_g: float
    l_h: float
    epsilon_reg: float = 1.0

    def __post_init__(self):
        for name in ("mu_h", "mu_g", "l_h", "epsilon_reg"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def hand_friction_residuals(w_h: Wrench2, mu: float) -> tuple[float, float]:
    """Coulomb margins (mu f_n + f_t, mu f_n - f_t) at the hand contact.

    Both non-negative iff the wrench lies in the friction cone; a zero margin
    admits sliding in the matching direction.
    """
    w_h.require_frame(HAND_CONTACT)
    f_t, f_n = w_h.f_x, w_h.f_y
    return (mu * f_n + f_t, mu * f_n - f_t)


def hand_torque_residuals(w_h: Wrench2, l_h: float) -> tuple[float, float]:
    """Line-contact torque margins (l f_n - tau, l f_n + tau).

    A zero margin admits pivoting about the matching hand endpoint; a negative
    margin flags a wrench the line contact cannot transmit.
    """
    w_h.require_frame(HAND_CONTACT)
    f_n, tau = w_h.f_y, w_h.tau
    return (l_h * f_n - tau, l_h * f_n + tau)


def ground_friction_residuals(
    w_h: Wrench2, w_grav: Wrench2, mu_g: float
) -> tuple[float, float]:
    """Ground Coulomb margins expressed through the hand force (world frame).

    Uses static equilibrium to eliminate the unmeasured ground reaction:
    (-mu_g (f_hJ + f_gravJ) + (f_hI + f_gravI),
     -mu_g (f_hJ + f_gravJ) - (f_hI + f_gravI)).
    """
    w_h.require_frame(WORLD)
    w_grav.require_frame(WORLD)
    sum_i = w_h.f_x + w_grav.f_x
    sum_j = w_h.f_y + w_grav.f_y
    return (-mu_g * sum_j + sum_i, -mu_g * sum_j - sum_i)


def complementarity_residual(margin: float, rate: float) -> float:
    """Violation of 0 <= margin  PERP  rate >= 0; zero iff the triple holds."""
    return max(-margin, 0.0) + max(-rate, 0.0) + abs(margin * rate)
