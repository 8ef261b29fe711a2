"""Streaming estimation of wrench-cone boundaries and contact mode labels.

The hand friction cone is summarized by a single coefficient lower bound
mu_hat (symmetric cone), fed by mu_meas = |f_t| / (f_n + eps) samples through
a 0.99 quantile.  The ground cone is an intersection of supporting
half-planes over a fixed fan of directions, each backed by its own quantile
of force projections; adjacent planes intersect into candidate corners which
are pruned into the exported polygon.  Everything is conservative by
construction: estimates lie inside the true cones, so "near violation" of an
estimate is the sliding indicator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..contact import ContactConfiguration, ContactMode, Rotational, Tangential
from ..geometry import HAND_CONTACT, Wrench2
from .quantile import OnlineQuantile


@dataclass(frozen=True)
class WrenchConeParams:
    l_h: float
    epsilon_reg: float = 1.0          # N, keeps mu_meas conservative near zero wrench
    quantile: float = 0.99
    n_directions: int = 32
    min_samples: int = 50             # freshness gate before estimates participate
    near_violation: float = 0.05      # normalized slack threshold for slide/pivot labels
    mu_initial: float = 0.1           # conservative initial guesses (small friction)
    ground_initial_half_angle: float = math.atan(0.1)
    ground_margin: float = 0.5        # N, inward shrink of exported ground planes
    apex_force: float = 0.5           # N, below this the wrench is treated as unloaded
    slide_direction_min_nx: float = 0.2  # |n_x| below this marks a cap row, not a friction row
    # pressing deeper into the ground only grows the true friction margins, so
    # the exported set is the sample hull extruded straight down to this depth
    ground_extrusion_depth: float = 120.0


@dataclass(frozen=True)
class WrenchConeSnapshot:
    """Immutable view consumed by the controller and telemetry."""

    hand_mu_hat: float
    hand_fresh: bool
    hand_samples: int
    hand_discarded: int
    ground_fresh: bool
    ground_samples: int
    ground_normals: np.ndarray       # (m, 2) outward normals, unit
    ground_offsets: np.ndarray       # (m,) offsets b_j of n_j . f <= b_j
    ground_corners: np.ndarray       # (k, 2) polygon corners (may be empty)
    ground_mean_force: np.ndarray
    max_normal_force: float

    def ground_planes(self):
        return zip(self.ground_normals, self.ground_offsets)


@dataclass(frozen=True)
class ModeEstimate:
    config: ContactConfiguration
    slacks: dict
    hand_confident: bool
    ground_confident: bool


def _initial_ground_planes(half_angle: float, axis=None):
    """Narrow cone through the origin around the given axis direction.

    The axis is the first measured rest force (a wrench known to be
    transmissible); small perturbations around it are the conservative
    initial guess.  Defaults to straight down.
    """
    if axis is None:
        axis = np.array([0.0, -1.0])
    ang = math.atan2(axis[1], axis[0])
    normals = np.array(
        [
            [math.cos(ang + half_angle + math.pi / 2),
             math.sin(ang + half_angle + math.pi / 2)],
            [math.cos(ang - half_angle - math.pi / 2),
             math.sin(ang - half_angle - math.pi / 2)],
        ]
    )
    offsets = np.zeros(2)
    return normals, offsets


def polygon_from_halfplanes(normals, offsets, tol=1e-9):
    """Corners of the half-plane intersection via adjacent-plane intersections.

    Returns the (possibly empty) array of surviving corners in fan order.
    Corners violating any other half-plane beyond tol are pruned.
    """
    m = len(offsets)
    corners = []
    for k in range(m):
        j = (k + 1) % m
        a = np.array([normals[k], normals[j]])
        det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        if abs(det) < 1e-12:
            continue
        p = np.linalg.solve(a, np.array([offsets[k], offsets[j]]))
        slack = offsets - normals @ p
        if slack.min() >= -max(tol, 1e-9 * (1.0 + np.abs(offsets).max())):
            corners.append(p)
    if not corners:
        return np.zeros((0, 2))
    # collapse duplicates from collinear planes
    out = [corners[0]]
    for p in corners[1:]:
        if np.linalg.norm(p - out[-1]) > 1e-9:
            out.append(p)
    if len(out) > 1 and np.linalg.norm(out[0] - out[-1]) <= 1e-9:
        out.pop()
    return np.array(out)


def convex_hull_2d(points: np.ndarray) -> np.ndarray:
    """Andrew monotone chain; returns CCW hull vertices."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and (
                (out[-1][0] - out[-2][0]) * (p[1] - out[-2][1])
                - (out[-1][1] - out[-2][1]) * (p[0] - out[-2][0])
            ) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def clip_polygon(corners: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon by n . x <= b."""
    if len(corners) == 0:
        return corners
    out = []
    m = len(corners)
    for i in range(m):
        a, b = corners[i], corners[(i + 1) % m]
        da = offset - float(normal @ a)
        db = offset - float(normal @ b)
        if da >= 0:
            out.append(a)
        if (da >= 0) != (db >= 0):
            t = da / (da - db)
            out.append(a + t * (b - a))
    if not out:
        return np.zeros((0, 2))
    dedup = [out[0]]
    for p in out[1:]:
        if np.linalg.norm(p - dedup[-1]) > 1e-12:
            dedup.append(p)
    if len(dedup) > 1 and np.linalg.norm(dedup[0] - dedup[-1]) <= 1e-12:
        dedup.pop()
    return np.array(dedup)


def _extrude_downward(corners: np.ndarray, depth_extent: float) -> np.ndarray:
    """Extend a force hull downward into a cone-like region.

    Pressing deeper is always inside the true ground cone when the direction
    splays no wider than the friction boundary.  Each side wall is extended
    along its own bottom edge direction (boundary-riding samples make that
    edge a segment of the true ray, so its extension follows the ray); a side
    that was never ridden has a shallower-than-ray edge and stays inside by
    the recession-cone property.  Directions steeper than a sanity cap, or
    pointing upward, fall back to straight down.
    """
    depth = min(corners[:, 1].min() - depth_extent, -depth_extent)
    m = len(corners)
    added = []
    for side in (-1.0, 1.0):
        best = None
        best_dot = -np.inf
        for i in range(m):
            a, b = corners[i], corners[(i + 1) % m]
            edge = b - a
            ln = np.linalg.norm(edge)
            if ln < 1e-12:
                continue
            n = np.array([edge[1], -edge[0]]) / ln
            dot = side * n[0]
            if dot > best_dot:
                best_dot = dot
                best = (a, b, edge / ln)
        if best is None:
            continue
        a, b, d = best
        bottom = a if a[1] <= b[1] else b
        if d[1] > 0:
            d = -d
        if d[1] > -1e-6 or abs(d[0] / d[1]) > 2.0:
            d = np.array([0.0, -1.0])
        t = (depth - bottom[1]) / d[1]
        added.append(bottom + t * d)
    if not added:
        return corners
    return convex_hull_2d(np.vstack([corners, added]))


def polygon_edges(corners: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Outward edge normals and offsets (n . x <= b) of a CCW convex polygon."""
    m = len(corners)
    normals, offsets = [], []
    for i in range(m):
        a, b = corners[i], corners[(i + 1) % m]
        edge = b - a
        ln = np.linalg.norm(edge)
        if ln < 1e-12:
            continue
        n = np.array([edge[1], -edge[0]]) / ln  # outward for CCW order
        normals.append(n)
        offsets.append(float(n @ a))
    return np.array(normals), np.array(offsets)


class WrenchConeEstimator:
    """Accumulates wrench measurements into friction-cone estimates."""

    def __init__(self, params: WrenchConeParams, max_normal_force: float = 30.0):
        self.params = params
        self.max_normal_force = max_normal_force
        self._mu_quantile = OnlineQuantile(params.quantile)
        self._mu_ratchet = params.mu_initial
        self._hand_discarded = 0
        m = params.n_directions
        angles = 2.0 * math.pi * np.arange(m) / m
        self._dirs = np.column_stack([np.cos(angles), np.sin(angles)])
        self._proj_quantiles = [OnlineQuantile(params.quantile) for _ in range(m)]
        # per-direction extreme sample: their hull is inside the true cone
        # whenever every sample is, which anchors the conservativeness proof
        self._support_points = np.zeros((m, 2))
        self._support_proj = np.full(m, -np.inf)
        self._initial_axis = None
        self._ground_count = 0
        self._force_sum = np.zeros(2)
        self._cache: Optional[WrenchConeSnapshot] = None
        self._cache_count = -1
        # the hull is rebuilt at most every few samples; estimates move slowly
        self._cache_stride = 5

    # -- updates -----------------------------------------------------------

    def update_hand_cone(self, w_meas: Wrench2) -> None:
        """Fold one hand-frame wrench into the mu_h lower bound."""
        w_meas.require_frame(HAND_CONTACT)
        f_t, f_n = w_meas.f_x, w_meas.f_y
        if f_n < 0.0:
            self._hand_discarded += 1
            return
        mu_meas = abs(f_t / (f_n + self.params.epsilon_reg))
        self._mu_quantile.update(mu_meas)
        if self._mu_quantile.count >= self.params.min_samples:
            new = max(self._mu_ratchet, self._mu_quantile.estimate())
            if new != self._mu_ratchet:
                self._mu_ratchet = new
                self._cache = None

    def update_ground_hull(self, f_world: np.ndarray) -> None:
        """Fold one world-frame hand force into the ground cone hull."""
        f = np.asarray(f_world, dtype=float)
        proj = self._dirs @ f
        for q, v in zip(self._proj_quantiles, proj):
            q.update(float(v))
        better = proj > self._support_proj
        self._support_proj[better] = proj[better]
        self._support_points[better] = f
        if self._initial_axis is None and np.linalg.norm(f) > 0.5:
            self._initial_axis = f / np.linalg.norm(f)
        self._ground_count += 1
        self._force_sum += f
        if self._ground_count - self._cache_count >= self._cache_stride:
            self._cache = None

    def update(self, w_meas_hand: Wrench2, f_world: np.ndarray) -> None:
        self.update_hand_cone(w_meas_hand)
        self.update_ground_hull(f_world)

    # -- exported estimate ---------------------------------------------------

    @property
    def hand_mu_hat(self) -> float:
        return self._mu_ratchet

    @property
    def hand_fresh(self) -> bool:
        return self._mu_quantile.count >= self.params.min_samples

    @property
    def ground_fresh(self) -> bool:
        if self._ground_count < self.params.min_samples:
            return False
        return len(self._ground_polygon()[2]) >= 3

    def _ground_polygon(self):
        """Exported polygon: hull of support points clipped by quantile planes.

        The support-point hull keeps the estimate inside the true cone exactly
        in noise-free operation; the 0.99-quantile planes (shrunk by the
        conservativeness margin) cut away noise-chasing bulges.
        """
        p = self.params
        if self._ground_count < p.min_samples:
            normals, offsets = _initial_ground_planes(
                p.ground_initial_half_angle, self._initial_axis
            )
            return normals, offsets, polygon_from_halfplanes(normals, offsets)
        corners = convex_hull_2d(self._support_points[np.isfinite(self._support_proj)])
        quantile_offsets = (
            np.array([q.estimate() for q in self._proj_quantiles]) - p.ground_margin
        )
        for n, b in zip(self._dirs, quantile_offsets):
            corners = clip_polygon(corners, n, float(b))
            if len(corners) < 3:
                break
        if len(corners) < 3:
            # degenerate hull: stay on the conservative initial cone
            normals, offsets = _initial_ground_planes(
                p.ground_initial_half_angle, self._initial_axis
            )
            return normals, offsets, np.zeros((0, 2))
        if p.ground_extrusion_depth > 0:
            corners = _extrude_downward(corners, p.ground_extrusion_depth)
        normals, offsets = polygon_edges(corners)
        return normals, offsets, corners

    def snapshot(self) -> WrenchConeSnapshot:
        if self._cache is None:
            self._cache_count = self._ground_count
            normals, offsets, corners = self._ground_polygon()
            mean = (
                self._force_sum / self._ground_count
                if self._ground_count
                else np.zeros(2)
            )
            self._cache = WrenchConeSnapshot(
                hand_mu_hat=self._mu_ratchet,
                hand_fresh=self.hand_fresh,
                hand_samples=self._mu_quantile.count,
                hand_discarded=self._hand_discarded,
                ground_fresh=self._ground_count >= self.params.min_samples
                and len(corners) >= 3,
                ground_samples=self._ground_count,
                ground_normals=normals,
                ground_offsets=offsets,
                ground_corners=corners,
                ground_mean_force=mean,
                max_normal_force=self.max_normal_force,
            )
        return self._cache

    def quantile_states(self) -> dict:
        return {
            "hand_mu": self._mu_quantile.state(),
            "ground": [
                {"count": q.count, "value": q.estimate() if q.count else None}
                for q in self._proj_quantiles
            ],
        }

    # -- classification ------------------------------------------------------

    def classify_modes(
        self, w_meas: Wrench2, f_world: np.ndarray, theta_rel: float = 0.0
    ) -> ModeEstimate:
        """Label contact modes from near-violation of the current estimates.

        Constraints participate only once fresh; an unloaded wrench is
        reported sticking with the confidence flag cleared.  theta_rel
        (estimated theta_o - theta_h) keeps the geometry label at pivot while
        the faces are visibly apart even if the torque has come off the bound.
        """
        p = self.params
        w_meas.require_frame(HAND_CONTACT)
        f_t, f_n, tau = w_meas.f_x, w_meas.f_y, w_meas.tau
        slacks: dict = {}

        hand_conf = True
        if f_n < p.apex_force:
            hand_tan = Tangential.STICK
            hand_rot = Rotational.FLUSH
            hand_conf = False
        else:
            hand_tan = Tangential.STICK
            if self.hand_fresh:
                mu = self._mu_ratchet
                scale = max(mu * f_n, 1e-6)
                s_pos = (mu * f_n + f_t) / scale
                s_neg = (mu * f_n - f_t) / scale
                slacks["hand_pos"], slacks["hand_neg"] = s_pos, s_neg
                if min(s_pos, s_neg) < p.near_violation:
                    hand_tan = (
                        Tangential.SLIDE_POS if s_pos < s_neg else Tangential.SLIDE_NEG
                    )
            else:
                hand_conf = False
            scale_t = max(p.l_h * f_n, 1e-9)
            t_pos = (p.l_h * f_n - tau) / scale_t
            t_neg = (p.l_h * f_n + tau) / scale_t
            slacks["pivot_pos"], slacks["pivot_neg"] = t_pos, t_neg
            hand_rot = Rotational.FLUSH
            if min(t_pos, t_neg) < p.near_violation:
                hand_rot = Rotational.PIVOT_POS if t_pos < t_neg else Rotational.PIVOT_NEG
            elif abs(theta_rel) > 5e-3:
                # faces still apart: keep the pivot label on the closing side
                hand_rot = (
                    Rotational.PIVOT_NEG if theta_rel > 0 else Rotational.PIVOT_POS
                )

        ground_tan = Tangential.STICK
        ground_conf = True
        snap = self.snapshot()
        if snap.ground_fresh and self._ground_count >= p.min_samples:
            f = np.asarray(f_world, dtype=float)
            margins = snap.ground_offsets - snap.ground_normals @ f
            scales = np.maximum(
                snap.ground_offsets - snap.ground_normals @ snap.ground_mean_force, 0.5
            )
            norm_slack = margins / scales
            nx = snap.ground_normals[:, 0]
            candidates = np.abs(nx) >= p.slide_direction_min_nx
            if candidates.any():
                sub = np.where(candidates)[0]
                j = sub[np.argmin(norm_slack[sub])]
                slacks["ground_min"] = float(norm_slack[j])
                if norm_slack[j] < p.near_violation:
                    ground_tan = (
                        Tangential.SLIDE_POS if nx[j] < 0 else Tangential.SLIDE_NEG
                    )
        else:
            ground_conf = False

        return ModeEstimate(
            config=ContactConfiguration(
                hand=ContactMode(hand_tan, hand_rot), ground=ground_tan
            ),
            slacks=slacks,
            hand_confident=hand_conf,
            ground_confident=ground_conf,
        )
