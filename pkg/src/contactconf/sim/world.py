"""Quasi-static world: equilibrium stepping, events, and perturbations.

The simulator owns the currently applied impedance target.  A step moves the
target toward the commanded pose in clamped increments and resolves the
equilibrium after each increment by mode enumeration.  Boundary crossings
(a vertex touching down, the hand re-flattening, separation) are located by
bisecting the increment; geometry switches then happen through the candidate
enumeration at the next increment.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..contact import ContactConfiguration, ContactMode, Rotational, Tangential
from ..geometry import HAND_CONTACT, Pose2, Wrench2, hand_axes, normalize_angle, rot2
from .model import (
    ContactLost,
    GroundGeometry,
    Measurement,
    NoConsistentMode,
    NoiseModel,
    ObjectModel,
    SimParams,
    WorldState,
)
from .modes import (
    GAP_TOL,
    ModeHypothesis,
    RawState,
    anchor_world_x,
    candidate_hypotheses,
    hand_gap,
    object_origin,
    ref_body_x,
    resolve_step,
    s_h_of,
    solve_candidate,
    world_vertices,
)

RATE_FLAG_TOL = 1e-9  # m / rad of motion that counts as slip for truth labels


class Simulator:
    """Ground-truth stepper for one session."""

    def __init__(self, params: SimParams, state: RawState):
        self.params = params
        self.model = ObjectModel(params.object, params.hand_edge)
        self.state = state
        self.rng = np.random.default_rng(params.seed)
        self.degeneracies: list = []
        self._last_flags = dict(hand_slipped=False, ground_slipped=False)
        self._dirty = False  # a teleport left the state off-equilibrium
        self._corner_commits = 0

    # -- construction ---------------------------------------------------------

    @classmethod
    def from_rest(
        cls,
        params: SimParams,
        ground_edge: int,
        hand_offset: float = 0.0,
        preload: float = 10.0,
        object_x: float = 0.0,
    ) -> "Simulator":
        """Object resting flat on `ground_edge`, hand flush with preload."""
        model = ObjectModel(params.object, params.hand_edge)
        theta0 = model.flat_angle(ground_edge)
        geom = GroundGeometry("line", ground_edge)
        a, b = model.edge(ground_edge)
        mid = 0.5 * (a + b)
        r_obj = np.array([object_x, 0.0]) - rot2(theta0) @ mid
        c_h0 = 0.5 * (model.face_x_lo + model.face_x_hi) + hand_offset
        hand_xy = r_obj + rot2(theta0) @ np.array([c_h0, model.face_y])
        e_t, e_n = hand_axes(theta0)
        hand = np.array([hand_xy[0], hand_xy[1], theta0])
        x_tar = hand.copy()
        x_tar[:2] += (preload / params.stiffness[1]) * e_n
        f_hw = preload * e_n
        mg = model.mass * params.gravity
        f_g = -f_hw + np.array([0.0, mg])
        state = RawState(
            hand=hand,
            theta_o=theta0,
            geom=geom,
            g_x=object_x,
            c_h=c_h0,
            hand_rot=Rotational.FLUSH,
            w_hand=np.array([0.0, preload, 0.0]),
            f_g=f_g,
            tau_g=0.0,
            x_tar=x_tar,
            config=ContactConfiguration.all_sticking(),
        )
        sim = cls(params, state)
        # polish onto the exact equilibrium (gravity torque balance etc.)
        res, _, diags = resolve_step(state, x_tar, sim.model, params)
        if res is None:
            raise NoConsistentMode(diags)
        sim.state = res.state
        return sim

    @classmethod
    def from_tilted(
        cls,
        params: SimParams,
        ground_vertex: int,
        theta0: float,
        hand_offset: float = 0.0,
        preload: float = 10.0,
        object_x: float = 0.0,
    ) -> "Simulator":
        """Object balanced on one vertex at tilt theta0, hand flush on the face.

        The constructed pose is only approximate equilibrium (gravity torque
        shifts theta slightly); the relaxed settle used after perturbations
        polishes it.
        """
        model = ObjectModel(params.object, params.hand_edge)
        geom = GroundGeometry("vertex", ground_vertex)
        r_obj = np.array([object_x, 0.0]) - rot2(theta0) @ model.vertices[ground_vertex]
        c_h0 = 0.5 * (model.face_x_lo + model.face_x_hi) + hand_offset
        hand_xy = r_obj + rot2(theta0) @ np.array([c_h0, model.face_y])
        e_t, e_n = hand_axes(theta0)
        hand = np.array([hand_xy[0], hand_xy[1], theta0])
        mg = model.mass * params.gravity
        # tangential preload required by torque balance about the vertex
        anchor = np.array([object_x, 0.0])
        com_w = r_obj + rot2(theta0) @ model.com
        arm = hand_xy - anchor
        t_grav = (com_w - anchor)[0] * (-mg)
        t_normal = preload * (arm[0] * e_n[1] - arm[1] * e_n[0])
        coef_t = arm[0] * e_t[1] - arm[1] * e_t[0]
        f_t0 = -(t_grav + t_normal) / coef_t if abs(coef_t) > 1e-9 else 0.0
        if abs(f_t0) > 0.85 * params.contact.mu_h * preload:
            raise ValueError(
                f"tilted start not statically holdable: needs f_t {f_t0:.2f} N "
                f"with mu_h*preload {params.contact.mu_h * preload:.2f} N"
            )
        k = params.stiffness
        x_tar = hand.copy()
        x_tar[:2] += (preload / k[1]) * e_n + (f_t0 / k[0]) * e_t
        state = RawState(
            hand=hand,
            theta_o=theta0,
            geom=geom,
            g_x=object_x,
            c_h=c_h0,
            hand_rot=Rotational.FLUSH,
            w_hand=np.array([f_t0, preload, 0.0]),
            f_g=-(f_t0 * e_t + preload * e_n) + np.array([0.0, mg]),
            tau_g=0.0,
            x_tar=x_tar,
            config=ContactConfiguration.all_sticking(),
        )
        heights = world_vertices(state, model)[:, 1]
        if heights.min() < -1e-9:
            raise ValueError("tilted start would penetrate the ground")
        sim = cls(params, state)
        sim._dirty = True
        sim._settle_after_teleport()
        return sim

    # -- state reporting ------------------------------------------------------

    def world_state(self) -> WorldState:
        s = self.state
        r_obj = object_origin(s, self.model)
        return WorldState(
            hand_pose=Pose2(s.hand[0], s.hand[1], normalize_angle(s.hand[2])),
            object_pose=Pose2(r_obj[0], r_obj[1], normalize_angle(s.theta_o)),
            s_h=s_h_of(s, self.model),
            s_g=s.g_x,
            ground_geometry=s.geom,
            hand_wrench_true=Wrench2(*s.w_hand, HAND_CONTACT),
            ground_force=s.f_g.copy(),
            ground_torque=s.tau_g,
            active_config=s.config,
            hand_slipped=self._last_flags["hand_slipped"],
            ground_slipped=self._last_flags["ground_slipped"],
            x_tar=Pose2(s.x_tar[0], s.x_tar[1], normalize_angle(s.x_tar[2])),
        )

    def measurement(self) -> Measurement:
        s = self.state
        noise = self.params.noise
        pose = s.hand.copy()
        wrench = s.w_hand.copy()
        if noise.enabled:
            pose[0] += self.rng.normal(0.0, noise.pos_std)
            pose[1] += self.rng.normal(0.0, noise.pos_std)
            pose[2] += self.rng.normal(0.0, noise.rot_std)
            wrench[0] += self.rng.normal(0.0, noise.force_std)
            wrench[1] += self.rng.normal(0.0, noise.force_std)
            wrench[2] += self.rng.normal(0.0, noise.torque_std)
        return Measurement(
            hand_pose=Pose2(pose[0], pose[1], normalize_angle(pose[2])),
            hand_wrench=Wrench2(wrench[0], wrench[1], wrench[2], HAND_CONTACT),
        )

    # -- stepping -------------------------------------------------------------

    def step(self, x_tar) -> tuple[WorldState, Measurement]:
        """Advance the impedance target and re-equilibrate; returns truth + meas."""
        target = np.asarray(x_tar, dtype=float).copy()
        self._last_flags = dict(hand_slipped=False, ground_slipped=False)
        if self._dirty:
            self._settle_after_teleport()
        guard = 0
        self._corner_commits = 0
        while True:
            delta = target - self.state.x_tar
            lin = math.hypot(delta[0], delta[1])
            rot = abs(delta[2])
            if lin < 1e-15 and rot < 1e-15:
                break
            frac = 1.0
            if lin > 0:
                frac = min(frac, self.params.step_clamp_lin / lin)
            if rot > 0:
                frac = min(frac, self.params.step_clamp_rot / rot)
            self._advance(delta, frac)
            guard += 1
            if guard > 4000:
                raise NoConsistentMode(
                    [{"mode": "step", "reason": "subdivision guard exceeded"}]
                )
        return self.world_state(), self.measurement()

    def _settle_after_teleport(self) -> None:
        """Re-seat the hand after a teleported perturbation.

        The transient jump can cross mode boundaries, so no single mode need
        satisfy exact complementarity across it.  The equalities are still
        solved to machine precision; only the inequality screening is relaxed
        for this one resolve.
        """
        self._refresh_force_guess()
        res, _, diags = resolve_step(
            self.state,
            self.state.x_tar,
            self.model,
            self.params,
            margin_tol=0.2,
            rate_tol=5e-2,
            jump_factor=20.0,
        )
        if res is None:
            raise ContactLost("hand", f"post-perturbation settle failed: {diags[:3]}")
        self.state = res.state
        self._dirty = False

    def _advance(self, delta: np.ndarray, frac: float) -> None:
        """Commit one clamped increment, bisecting onto boundary events.

        A resolve with no fitting mode is also bisected: a mode switch inside
        the increment leaves no single equality set consistent across it, but
        a small enough step always lands on one side of the switch.
        """
        base = self.state.x_tar.copy()
        attempt = frac
        last_event = None
        last_diags = None
        for _ in range(80):
            trial = base + attempt * delta
            res, event_cand, diags = resolve_step(
                self.state, trial, self.model, self.params
            )
            if res is not None:
                self._commit(res)
                return
            last_event = event_cand or last_event
            last_diags = diags
            scale = max(
                attempt * math.hypot(delta[0], delta[1]), attempt * abs(delta[2])
            )
            if scale < 1e-13:
                if last_event is not None:
                    self._terminal_event(last_event)
                    return
                raise NoConsistentMode(last_diags)
            attempt *= 0.5
        raise NoConsistentMode(
            last_diags
            or [{"mode": "bisect", "reason": "event bisection exhausted"}]
        )

    def _terminal_event(self, cand) -> None:
        """An event sits at the current state itself.

        Epsilon-scale residual events (a hair of gap on the wrong side, a
        vertex a nanometer low) are degenerate mode-transition corners: the
        equalities are solved to machine precision, so commit the state and
        let the next increment re-enumerate from the other side.  Substantial
        events map to faults.
        """
        eps_ok = all(
            (kind == "gap_cross" and abs(val) <= 1e-5)
            or (kind == "vertex_touch" and val >= -1e-7)
            or (kind == "hand_separation" and val >= -1e-6)
            or (kind == "ground_separation" and val >= -1e-6)
            or (kind == "overhang" and val <= 1e-6)
            for kind, val in cand.events
        )
        if eps_ok and cand.state is not None and self._corner_commits < 8:
            self._corner_commits += 1
            self._commit_candidate_state(cand)
            return
        kinds = {k for k, _ in cand.events}
        if "hand_separation" in kinds:
            raise ContactLost("hand", "normal force would become negative")
        if "ground_separation" in kinds:
            raise ContactLost("ground", "object would lift off")
        if "overhang" in kinds:
            raise ContactLost("hand", "hand ran off the object face")
        raise NoConsistentMode(
            [{"mode": cand.hypothesis.label(), "reason": str(cand.events)}]
        )

    def _commit_candidate_state(self, res) -> None:
        self._commit(res)

    def _commit(self, res) -> None:
        rep = res.report
        if abs(rep.get("ds_h", 0.0)) > RATE_FLAG_TOL:
            self._last_flags["hand_slipped"] = True
        if abs(rep.get("dg", 0.0)) > RATE_FLAG_TOL:
            self._last_flags["ground_slipped"] = True
        if res.degenerate:
            self.degeneracies.append(res.hypothesis.label())
        self.state = res.state

    # -- spec-level mode probe --------------------------------------------------

    def enumerate_and_solve_mode(self, x_tar, mode: ModeHypothesis):
        """Solve a single mode hypothesis against a trial target."""
        return solve_candidate(
            self.state, np.asarray(x_tar, dtype=float), mode, self.model, self.params
        )

    def candidate_modes(self) -> list[ModeHypothesis]:
        return candidate_hypotheses(self.state, self.model)

    # -- perturbations ----------------------------------------------------------

    def apply_perturbation(
        self, dtheta_o: float = 0.0, ds_h: float = 0.0, ds_g: float = 0.0
    ) -> WorldState:
        """Teleport the state along one admissible direction.

        Estimators are not notified; they must pick the change up from the
        measurement stream.  dtheta_o rotates the object rigidly about the
        ground contact with the hand left in place (the next step re-seats
        the hand with one-off relaxed complementarity screening); ds_h drags
        hand and target along the face with the object fixed; ds_g shifts
        object, hand, and target rigidly.
        """
        s = self.state
        if dtheta_o != 0.0:
            if s.geom.kind == "line":
                edge = s.geom.index
                vertex = edge if dtheta_o > 0 else (edge + 1) % self.model.n
                new_geom = GroundGeometry("vertex", vertex)
                s.g_x = anchor_world_x(s, self.model, new_geom)
                s.geom = new_geom
            s.theta_o += dtheta_o
            heights = world_vertices(s, self.model)[:, 1]
            if heights.min() < -1e-9:
                raise ValueError("perturbation would push the object into the ground")
            if self._hand_face_penetration() > 1e-9:
                raise ValueError("perturbation would push the object into the hand")
            gap = hand_gap(s)
            if abs(gap) > GAP_TOL:
                s.hand_rot = (
                    Rotational.PIVOT_NEG if gap > 0 else Rotational.PIVOT_POS
                )
            s.c_h = ref_body_x(s, self.model, s.hand_rot, self.params.contact.l_h)
            self._dirty = True
        if ds_h != 0.0:
            e_t, _ = hand_axes(s.hand[2])
            s.c_h -= ds_h
            s.hand[:2] -= ds_h * e_t
            s.x_tar[:2] -= ds_h * e_t
        if ds_g != 0.0:
            s.g_x += ds_g
            s.hand[0] += ds_g
            s.x_tar[0] += ds_g
        return self.world_state()

    def _hand_face_penetration(self) -> float:
        """How far a hand endpoint dips below the object face line (m)."""
        s = self.state
        e_t, _ = hand_axes(s.hand[2])
        m_w = np.array([-math.sin(s.theta_o), math.cos(s.theta_o)])
        face_pt = object_origin(s, self.model) + rot2(s.theta_o) @ np.array(
            [0.0, self.model.face_y]
        )
        l_h = self.params.contact.l_h
        worst = 0.0
        for u in (-l_h, l_h):
            p = s.hand[:2] + u * e_t
            worst = max(worst, -float((p - face_pt) @ m_w))
        return worst

    def _refresh_force_guess(self) -> None:
        """Reset the stored forces to spring-law values at the current pose.

        Used after teleports so Newton starts from a consistent wrench."""
        s = self.state
        e_t, e_n = hand_axes(s.hand[2])
        d = s.x_tar[:2] - s.hand[:2]
        k = self.params.stiffness
        s.w_hand = np.array(
            [
                k[0] * float(d @ e_t),
                k[1] * float(d @ e_n),
                k[2] * (s.x_tar[2] - s.hand[2]),
            ]
        )
        f_hw = s.w_hand[0] * e_t + s.w_hand[1] * e_n
        mg = self.model.mass * self.params.gravity
        s.f_g = -f_hw + np.array([0.0, mg])
        s.tau_g = 0.0
