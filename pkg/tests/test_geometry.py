import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from contactconf.geometry import (
    ConvexPolygon,
    FrameBasis,
    FrameError,
    Pose2,
    Wrench2,
    cross2,
    hand_axes,
    normalize_angle,
    transform_wrench,
)


def test_normalize_angle_trivial_cases():
    assert normalize_angle(0.0) == 0.0
    assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)
    # derived by mod-2pi arithmetic: -3.5*pi = -4*pi + 0.5*pi
    assert normalize_angle(-3.5 * math.pi) == pytest.approx(0.5 * math.pi)


def test_normalize_angle_rejects_non_finite():
    with pytest.raises(ValueError):
        normalize_angle(float("nan"))
    with pytest.raises(ValueError):
        normalize_angle(float("inf"))


@given(st.floats(-50, 50))
def test_normalize_angle_range_and_congruence(theta):
    out = normalize_angle(theta)
    assert -math.pi < out <= math.pi
    assert math.isclose(math.sin(out), math.sin(theta), abs_tol=1e-9)
    assert math.isclose(math.cos(out), math.cos(theta), abs_tol=1e-9)


def test_transform_wrench_identity():
    w = Wrench2(1.0, -2.0, 0.3)
    world = FrameBasis.world()
    out = transform_wrench(w, world, world)
    assert (out.f_x, out.f_y, out.tau) == (w.f_x, w.f_y, w.tau)


def test_transform_wrench_unit_moment_arm():
    # pure force (0, -1) at the world origin, moved to a frame at (1, 0):
    # CCW moment about the new origin is +1 N*m.
    w = Wrench2(0.0, -1.0, 0.0)
    dst = FrameBasis(np.array([0.0, 1.0]), np.array([1.0, 0.0]), np.array([1.0, 0.0]), "shifted")
    out = transform_wrench(w, FrameBasis.world(), dst)
    assert out.tau == pytest.approx(1.0)
    assert out.f_x == pytest.approx(0.0)
    assert out.f_y == pytest.approx(-1.0)


def test_transform_wrench_frame_mismatch():
    w = Wrench2(1.0, 0.0, 0.0, frame="hand-contact")
    with pytest.raises(FrameError):
        transform_wrench(w, FrameBasis.world(), FrameBasis.world())


def _random_frame(rng, name):
    theta = rng.uniform(-math.pi, math.pi)
    # independent oracle basis: explicit rotation matrix columns, with a
    # random handedness flip of the normal axis
    c, s = math.cos(theta), math.sin(theta)
    e_t = np.array([c, s])
    e_n = np.array([-s, c]) * (1 if rng.random() < 0.5 else -1)
    origin = rng.uniform(-2, 2, size=2)
    return FrameBasis(e_n, e_t, origin, name)


def test_transform_wrench_round_trip_property():
    rng = np.random.default_rng(7)
    world = FrameBasis.world()
    for _ in range(200):
        frame = _random_frame(rng, "f")
        w = Wrench2(*rng.uniform(-10, 10, size=3))
        there = transform_wrench(w, world, frame)
        back = transform_wrench(there, frame, world)
        # round trip within 1e-12 (values O(10))
        assert abs(back.f_x - w.f_x) < 1e-11
        assert abs(back.f_y - w.f_y) < 1e-11
        assert abs(back.tau - w.tau) < 1e-11


def test_transform_preserves_force_norm_and_moment_about_fixed_point():
    rng = np.random.default_rng(11)
    world = FrameBasis.world()
    p = np.array([0.7, -1.3])  # fixed world point
    for _ in range(100):
        frame = _random_frame(rng, "f")
        w = Wrench2(*rng.uniform(-10, 10, size=3))
        out = transform_wrench(w, world, frame)
        f_world_before = w.force
        f_world_after = out.f_x * frame.e_t + out.f_y * frame.e_n
        assert np.linalg.norm(f_world_before) == pytest.approx(
            np.linalg.norm(f_world_after), abs=1e-10
        )
        # moment about p computed from either representation
        m_before = w.tau + cross2(world.origin - p, f_world_before)
        m_after = out.tau + cross2(frame.origin - p, f_world_after)
        assert m_before == pytest.approx(m_after, abs=1e-10)


def test_hand_axes_orientation():
    e_t, e_n = hand_axes(0.0)
    assert np.allclose(e_t, [1.0, 0.0])
    assert np.allclose(e_n, [0.0, -1.0])  # into the object below the hand
    # rotating e_n by +90deg gives e_t (proper (e_n, e_t) pair)
    assert cross2(e_n, e_t) == pytest.approx(1.0)


def test_pose_theta_normalized():
    p = Pose2(0.0, 0.0, 3 * math.pi)
    assert p.theta == pytest.approx(math.pi)


SQUARE = [[-0.1, -0.1], [0.1, -0.1], [0.1, 0.1], [-0.1, 0.1]]


def test_polygon_accepts_ccw_square():
    poly = ConvexPolygon(np.array(SQUARE), mass=0.3)
    assert poly.n_vertices == 4
    assert np.allclose(poly.com, [0.0, 0.0], atol=1e-12)


def test_polygon_rejects_clockwise():
    with pytest.raises(ValueError):
        ConvexPolygon(np.array(SQUARE[::-1]), mass=0.3)


def test_polygon_rejects_non_convex():
    v = [[0, 0], [2, 0], [2, 2], [1, 0.5], [0, 2]]
    with pytest.raises(ValueError):
        ConvexPolygon(np.array(v, dtype=float), mass=0.3)


def test_polygon_rejects_collinear():
    v = [[0, 0], [1, 0], [2, 0], [1, 1]]
    with pytest.raises(ValueError):
        ConvexPolygon(np.array(v, dtype=float), mass=0.3)


def test_polygon_rejects_outside_com():
    with pytest.raises(ValueError):
        ConvexPolygon(np.array(SQUARE), mass=0.3, com=np.array([0.5, 0.0]))


def test_world_vertices_rigid_transform():
    poly = ConvexPolygon(np.array(SQUARE), mass=0.3)
    pose = Pose2(1.0, 2.0, math.pi / 2)
    wv = poly.world_vertices(pose)
    assert np.allclose(wv[0], [1.1, 1.9], atol=1e-12)  # (-.1,-.1) rotated 90deg
