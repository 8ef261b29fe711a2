import pytest
from hypothesis import given, strategies as st

from contactconf.contact import (
    ContactConfiguration,
    ContactMode,
    ContactModelParams,
    Rotational,
    Tangential,
    complementarity_residual,
    ground_friction_residuals,
    ground_slide_mode_for_rate,
    hand_friction_residuals,
    hand_slide_mode_for_rate,
    hand_torque_residuals,
    pivot_endpoint_sign,
    pivot_mode_for_relative_rate,
)
from contactconf.geometry import Wrench2

HAND = "hand-contact"


def w_hand(f_t, f_n, tau=0.0):
    return Wrench2(f_t, f_n, tau, HAND)


def test_hand_friction_sticking():
    assert hand_friction_residuals(w_hand(4.0, 10.0), 0.5) == pytest.approx((9.0, 1.0))


def test_hand_friction_boundary_slide_negative():
    # f_t = +mu f_n saturates the second margin: slide-negative admissible
    m = hand_friction_residuals(w_hand(5.0, 10.0), 0.5)
    assert m == pytest.approx((10.0, 0.0))


def test_hand_friction_zero_wrench():
    assert hand_friction_residuals(w_hand(0.0, 0.0), 0.5) == (0.0, 0.0)


def test_hand_torque_flush():
    assert hand_torque_residuals(w_hand(0.0, 10.0, 0.0), 0.05) == pytest.approx((0.5, 0.5))


def test_hand_torque_pivot_positive_boundary():
    m = hand_torque_residuals(w_hand(0.0, 10.0, 0.5), 0.05)
    assert m == pytest.approx((0.0, 1.0))


def test_hand_torque_infeasible():
    m = hand_torque_residuals(w_hand(0.0, 10.0, 0.6), 0.05)
    assert m == pytest.approx((-0.1, 1.1))
    assert min(m) < 0  # outside the torque cone flags a model violation


def test_hand_frame_required():
    with pytest.raises(Exception):
        hand_friction_residuals(Wrench2(1.0, 1.0, 0.0, "world"), 0.5)


def grav(mass, g=9.81):
    return Wrench2(0.0, -mass * g, 0.0, "world")


def test_ground_friction_straight_down_push():
    # hand pushes straight down 5 N on a 0.3 kg object, mu_g = 0.8.
    # Independent evaluation: sum_J = -5 - 0.3*9.81 = -7.943,
    # margins = -0.8 * sum_J +- 0 = 6.3544 each.
    w = Wrench2(0.0, -5.0, 0.0, "world")
    m = ground_friction_residuals(w, grav(0.3), 0.8)
    expected = 0.8 * (5.0 + 0.3 * 9.81)
    assert m == pytest.approx((expected, expected))


def test_ground_friction_gravity_alone_sticks():
    m = ground_friction_residuals(Wrench2(0.0, 0.0, 0.0, "world"), grav(0.3), 0.8)
    expected = 0.8 * 0.3 * 9.81
    assert m == pytest.approx((expected, expected))
    assert min(m) > 0


def test_ground_friction_slide_positive_boundary():
    # Solving margin_1 = 0 analytically for a downward hand push f_hJ = -|f_hJ|:
    # f_hI = mu_g (f_hJ - m g) = -mu_g (m g + |f_hJ|).
    mu_g, mass, f_hj = 0.8, 0.3, -5.0
    f_hi = mu_g * (f_hj - mass * 9.81)
    m = ground_friction_residuals(Wrench2(f_hi, f_hj, 0.0, "world"), grav(mass), mu_g)
    assert m[0] == pytest.approx(0.0, abs=1e-12)
    assert m[1] > 0


@given(
    st.floats(-20, 20),
    st.floats(0, 20),
    st.floats(-1, 1),
    st.floats(0.01, 10.0),
)
def test_friction_margins_positively_homogeneous(f_t, f_n, tau, c):
    w = w_hand(f_t, f_n, tau)
    m1 = hand_friction_residuals(w, 0.5)
    m2 = hand_friction_residuals(w.scaled(c), 0.5)
    assert m2[0] == pytest.approx(c * m1[0], rel=1e-9, abs=1e-9)
    assert m2[1] == pytest.approx(c * m1[1], rel=1e-9, abs=1e-9)
    t1 = hand_torque_residuals(w, 0.05)
    t2 = hand_torque_residuals(w.scaled(c), 0.05)
    assert t2[0] == pytest.approx(c * t1[0], rel=1e-9, abs=1e-9)
    assert t2[1] == pytest.approx(c * t1[1], rel=1e-9, abs=1e-9)


def test_complementarity_residual_cases():
    assert complementarity_residual(1.0, 0.0) == 0.0
    assert complementarity_residual(0.0, 2.0) == 0.0
    assert complementarity_residual(1.0, 1.0) == 1.0
    assert complementarity_residual(-0.5, 0.0) == 0.5
    assert complementarity_residual(0.0, -2.0) == 2.0


def test_mode_command_maps():
    assert hand_slide_mode_for_rate(+0.01) is Tangential.SLIDE_POS
    assert hand_slide_mode_for_rate(-0.01) is Tangential.SLIDE_NEG
    # +x object motion saturates the second ground margin
    assert ground_slide_mode_for_rate(+0.01) is Tangential.SLIDE_NEG
    assert ground_slide_mode_for_rate(-0.01) is Tangential.SLIDE_POS
    assert pivot_mode_for_relative_rate(+0.1) is Rotational.PIVOT_NEG
    assert pivot_mode_for_relative_rate(-0.1) is Rotational.PIVOT_POS
    assert pivot_endpoint_sign(Rotational.PIVOT_POS) == -1.0
    assert pivot_endpoint_sign(Rotational.PIVOT_NEG) == 1.0


def test_contact_configuration_validation():
    cfg = ContactConfiguration.all_sticking()
    assert cfg.hand.tangential is Tangential.STICK
    assert cfg.ground is Tangential.STICK
    with pytest.raises(ValueError):
        ContactConfiguration(hand=None, ground=Tangential.STICK)


def test_params_validation():
    with pytest.raises(ValueError):
        ContactModelParams(mu_h=-0.5, mu_g=0.8, l_h=0.05)
    p = ContactModelParams(mu_h=0.5, mu_g=0.8, l_h=0.05, epsilon_reg=1.0)
    assert p.l_h == 0.05
