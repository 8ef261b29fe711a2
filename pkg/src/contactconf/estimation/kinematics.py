"""Least-squares estimation of the ground pivot, face offset, and slide positions.

The pivot (x_o, y_o) and face offset d are regressed from normal projections
of the hand pose while the ground contact sticks and the hand contact is
flush: each pose contributes one row

    d * (-1) + x_o * (I . e_n) + y_o * (J . e_n) = r_h . e_n.

Once the pivot is known, s_h = (r_o - r_h) . e_t tracks the hand position on
the face, the pivot is re-propagated through the rigid-body relation during
ground sliding, and theta_o is integrated from the endpoint-on-face
constraint during hand pivoting.  Combinations outside these cases make the
motion indeterminate and reset the estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..contact import Rotational, Tangential, pivot_endpoint_sign
from ..geometry import Pose2, hand_axes, normalize_angle


class NotIdentifiable(RuntimeError):
    """Raised when the pivot regression cannot produce a trustworthy solution."""


@dataclass(frozen=True)
class RegressionGates:
    min_rows: int = 10
    min_spread: float = math.radians(3.0)
    max_condition: float = 1e8
    forgetting: float = 0.999
    innovation_gate: float = 5e-3  # m, prediction error that signals a new pivot


class RegressionAccumulator:
    """Normal equations for (d, x_o, y_o) with exponential forgetting."""

    def __init__(self, gates: RegressionGates = RegressionGates()):
        self.gates = gates
        self.reset()

    def reset(self) -> None:
        self.ata = np.zeros((3, 3))
        self.atb = np.zeros(3)
        self.count = 0
        self.theta_lo: Optional[float] = None
        self.theta_hi: Optional[float] = None

    def accumulate(self, hand_pose: Pose2) -> None:
        """Add one flush-contact, ground-sticking row."""
        e_t, e_n = hand_axes(hand_pose.theta)
        phi = np.array([-1.0, e_n[0], e_n[1]])
        y = float(np.dot(hand_pose.position, e_n))
        lam = self.gates.forgetting
        self.ata = lam * self.ata + np.outer(phi, phi)
        self.atb = lam * self.atb + phi * y
        self.count += 1
        th = hand_pose.theta
        if self.theta_lo is None:
            self.theta_lo = self.theta_hi = th
        else:
            # decayed extrema so stale spread fades at the forgetting rate
            self.theta_lo = min(th, th + (self.theta_lo - th) * lam)
            self.theta_hi = max(th, th + (self.theta_hi - th) * lam)

    @property
    def angular_spread(self) -> float:
        if self.theta_lo is None:
            return 0.0
        return self.theta_hi - self.theta_lo

    def predict(self, hand_pose: Pose2, solution: np.ndarray) -> float:
        e_t, e_n = hand_axes(hand_pose.theta)
        phi = np.array([-1.0, e_n[0], e_n[1]])
        return float(phi @ solution)

    def solve(self) -> tuple[np.ndarray, float]:
        """Least-squares (d, x_o, y_o) plus the condition number of the normal matrix."""
        g = self.gates
        if self.count < g.min_rows:
            raise NotIdentifiable(f"only {self.count} rows, need {g.min_rows}")
        if self.angular_spread < g.min_spread:
            raise NotIdentifiable(
                f"angular spread {math.degrees(self.angular_spread):.2f} deg below gate"
            )
        w = np.linalg.eigvalsh(self.ata)
        if w[0] <= 0:
            raise NotIdentifiable("rank-deficient normal equations")
        cond = w[-1] / w[0]
        if cond > g.max_condition:
            raise NotIdentifiable(f"condition number {cond:.2e} above gate")
        sol = np.linalg.solve(self.ata, self.atb)
        return sol, cond


def solve_pivot(acc: RegressionAccumulator) -> tuple[float, float, float]:
    """(d_hat, x_o_hat, y_o_hat) from the accumulated rows."""
    sol, _ = acc.solve()
    return float(sol[0]), float(sol[1]), float(sol[2])


@dataclass(frozen=True)
class KinematicSnapshot:
    d_hat: float
    x_o_hat: float
    y_o_hat: float
    s_h_hat: float
    s_g_hat: float
    theta_o_hat: float
    d_valid: bool
    pivot_valid: bool
    s_h_valid: bool
    theta_o_valid: bool
    angular_spread: float
    condition: float


class KinematicEstimator:
    """Dispatches the per-tick update law from the current mode estimate."""

    def __init__(self, gates: RegressionGates = RegressionGates()):
        self.gates = gates
        self.acc = RegressionAccumulator(gates)
        self.d_hat = 0.0
        self.x_o_hat = 0.0
        self.y_o_hat = 0.0
        self.s_h_hat = 0.0
        self.theta_o_hat = 0.0
        self.d_valid = False
        self.pivot_valid = False
        self.s_h_valid = False
        self.theta_o_valid = False
        self.condition = math.inf
        self._frozen_for_slide: Optional[tuple[float, float]] = None
        self._was_ground_sticking = True
        self._indeterminate_ticks = 0
        # transient unhandled-mode blips freeze the estimate; only a sustained
        # indeterminate episode resets it
        self.reset_patience = 25

    # -- individual update laws (exposed for tests) --------------------------

    def accumulate_flush_sticking(self, hand_pose: Pose2) -> None:
        if self.d_valid:
            pred = self.acc.predict(
                hand_pose, np.array([self.d_hat, self.x_o_hat, self.y_o_hat])
            )
            e_t, e_n = hand_axes(hand_pose.theta)
            actual = float(np.dot(hand_pose.position, e_n))
            if abs(actual - pred) > self.gates.innovation_gate:
                # the rows stopped fitting the old pivot: start a fresh regression
                self.acc.reset()
                self.d_valid = False
                self.pivot_valid = False
                self.s_h_valid = False
        self.acc.accumulate(hand_pose)
        try:
            sol, cond = self.acc.solve()
        except NotIdentifiable:
            return
        self.d_hat, self.x_o_hat, self.y_o_hat = map(float, sol)
        self.condition = cond
        self.d_valid = True
        self.pivot_valid = True

    def update_s_h(self, hand_pose: Pose2) -> None:
        e_t, _ = hand_axes(hand_pose.theta)
        r_o = np.array([self.x_o_hat, self.y_o_hat])
        self.s_h_hat = float(np.dot(r_o - hand_pose.position, e_t))
        self.s_h_valid = True

    def update_pivot_during_ground_slide(self, hand_pose: Pose2) -> None:
        d, s_h = self._frozen_for_slide
        e_t, e_n = hand_axes(hand_pose.theta)
        r_o = hand_pose.position + d * e_n + s_h * e_t
        self.x_o_hat, self.y_o_hat = float(r_o[0]), float(r_o[1])
        self.pivot_valid = True

    def update_during_hand_pivot(self, hand_pose: Pose2, rot_mode: Rotational, l_h: float) -> None:
        """Integrate theta_o by keeping the active hand endpoint on the face line."""
        u = pivot_endpoint_sign(rot_mode) * l_h
        e_t, _ = hand_axes(hand_pose.theta)
        endpoint = hand_pose.position + u * e_t
        r_o = np.array([self.x_o_hat, self.y_o_hat])
        a, b = endpoint - r_o
        reach = math.hypot(a, b)
        if reach < max(self.d_hat, 1e-9):
            return  # endpoint closer than the face offset: geometry inconsistent, hold
        # (endpoint - r_o) . m_w(theta) = d with m_w = (-sin, cos)
        phase = math.atan2(a, b)
        half = math.acos(min(max(self.d_hat / reach, -1.0), 1.0))
        roots = [normalize_angle(s * half - phase) for s in (+1.0, -1.0)]
        expected_side = -1.0 if rot_mode is Rotational.PIVOT_POS else 1.0
        admissible = [
            r for r in roots
            if expected_side * normalize_angle(r - hand_pose.theta) >= -1e-9
        ]
        pool = admissible if admissible else roots
        theta = min(pool, key=lambda r: abs(normalize_angle(r - self.theta_o_hat)))
        self.theta_o_hat = theta
        self.theta_o_valid = True
        t_face = np.array([math.cos(theta), math.sin(theta)])
        self.s_h_hat = float(np.dot(r_o - endpoint, t_face))
        self.s_h_valid = True

    def reset(self) -> None:
        """Unhandled mode combination: motion indeterminate."""
        self.acc.reset()
        self.d_valid = False
        self.pivot_valid = False
        self.s_h_valid = False
        self._frozen_for_slide = None
        # theta_o keeps tracking theta_h whenever the contact is flush

    # -- per-tick dispatch ----------------------------------------------------

    def update(self, mode, hand_pose: Pose2, l_h: float) -> None:
        """Advance the estimate one tick given the current ModeEstimate config."""
        cfg = mode.config if hasattr(mode, "config") else mode
        hand = cfg.hand
        ground = cfg.ground
        flush = hand.rotational is Rotational.FLUSH

        indeterminate = False
        if flush:
            self.theta_o_hat = hand_pose.theta
            self.theta_o_valid = True
            if ground is Tangential.STICK:
                self._frozen_for_slide = None
                self._was_ground_sticking = True
                self.accumulate_flush_sticking(hand_pose)
                if self.pivot_valid:
                    self.update_s_h(hand_pose)
            elif hand.tangential is Tangential.STICK:
                if self._was_ground_sticking:
                    # latch the offsets from just before sliding was detected
                    if self.d_valid and self.s_h_valid:
                        self._frozen_for_slide = (self.d_hat, self.s_h_hat)
                    self.acc.reset()
                    self._was_ground_sticking = False
                if self._frozen_for_slide is not None:
                    self.update_pivot_during_ground_slide(hand_pose)
            else:
                indeterminate = True
        elif ground is Tangential.STICK and self.pivot_valid and self.d_valid:
            self._was_ground_sticking = True
            self.update_during_hand_pivot(hand_pose, hand.rotational, l_h)
        else:
            indeterminate = True

        if indeterminate:
            self._indeterminate_ticks += 1
            if self._indeterminate_ticks >= self.reset_patience:
                self.reset()
        else:
            self._indeterminate_ticks = 0

    def snapshot(self) -> KinematicSnapshot:
        return KinematicSnapshot(
            d_hat=self.d_hat,
            x_o_hat=self.x_o_hat,
            y_o_hat=self.y_o_hat,
            s_h_hat=self.s_h_hat,
            s_g_hat=self.x_o_hat,
            theta_o_hat=self.theta_o_hat,
            d_valid=self.d_valid,
            pivot_valid=self.pivot_valid,
            s_h_valid=self.s_h_valid,
            theta_o_valid=self.theta_o_valid,
            angular_spread=self.acc.angular_spread,
            condition=self.condition,
        )
