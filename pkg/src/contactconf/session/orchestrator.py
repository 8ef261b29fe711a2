"""Joint estimation-and-control session loop.

Runs the simulator, estimators, and controller on a simulated clock
(estimator ticks at the configured rate, controller ticks interleaved), with
a warm-start exploration phase followed by scripted contact-configuration
segments.

Warm-start ordering matters: hand-slide probes run first because they are
geometry-agnostic and push the measured wrench to the true hand friction
boundary, which unlocks the torque budget for rotations; ground probes widen
the ground hull; the rotation sweep then populates the pivot regression while
staying on a single ground vertex.  Probe segments drive a small constant
error open-loop and drop the estimated rows on the side being explored (a
conservative guess must not veto the probe sent to improve it).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ..contact import (
    ContactConfiguration,
    ContactMode,
    Rotational,
    Tangential,
    ground_slide_mode_for_rate,
    hand_slide_mode_for_rate,
)
from ..control import (
    ControlObjective,
    ControllerParams,
    ObjectiveTerm,
    apply_target_increment,
    control_tick,
)
from ..estimation.kinematics import KinematicEstimator, RegressionGates
from ..estimation.wrench_cone import WrenchConeEstimator, WrenchConeParams
from ..geometry import hand_axes, normalize_angle
from ..sim import SimulationFault, Simulator

DIRECTIONS = ("theta_o", "s_h", "s_g")


class SessionPhase(enum.Enum):
    WARM_START = "warm_start"
    EXECUTING = "executing"
    HOLDING = "holding"
    FAULTED = "faulted"


@dataclass(frozen=True)
class ScriptSegment:
    direction: str
    amount: float
    tolerance: float = 1e-3
    timeout_ticks: int = 600
    probe: bool = False          # open-loop exploration, never faults
    ride_ticks: int = 0          # probe stops after this many sliding ticks
    ground_slide: float = 0.0    # admit incidental ground sliding of this sign
    label: str = ""

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.direction == "theta_o":
            object.__setattr__(self, "tolerance", self.tolerance or math.radians(0.5))

    def desired_config(self) -> ContactConfiguration:
        hand_tan = Tangential.STICK
        hand_rot = Rotational.FLUSH
        ground = Tangential.STICK
        if self.direction == "s_h":
            hand_tan = hand_slide_mode_for_rate(self.amount)
        elif self.direction == "s_g":
            ground = ground_slide_mode_for_rate(self.amount)
        elif self.ground_slide:
            ground = ground_slide_mode_for_rate(self.ground_slide)
        return ContactConfiguration(
            hand=ContactMode(hand_tan, hand_rot), ground=ground
        )


@dataclass(frozen=True)
class WarmStartParams:
    """Exploration phase tuning.

    safe_slide_sign is the s_h probe direction that cannot tip the object
    (slides that push toward the far ground corner); it comes from the
    scenario's initial hand placement.  The return slide runs at a reduced
    preload so the smaller friction force stays under the tipping torque.
    """

    slide_amplitude: float = 5e-3
    rotate_amplitude: float = math.radians(4.0)
    probe_error: float = 5e-4          # constant open-loop probe error (m)
    probe_ticks: int = 130
    rotate_timeout: int = 1500
    settle_ticks: int = 30
    safe_slide_sign: float = -1.0
    return_slide: bool = True
    reduced_preload: float = 10.0
    full_preload: float = 10.0
    rotation_preload: float = 10.0
    # ground probes run at two preloads so the boundary gets ridden at two
    # depths, giving the hull a ray segment to extend along
    ground_preload_lo: float = 8.0
    ground_preload_hi: float = 18.0
    # closed-loop rotation bringing the object from its resting face onto the
    # working ground vertex before the regression rocks (0 = already there)
    tip_angle: float = 0.0


@dataclass(frozen=True)
class SegmentResult:
    label: str
    direction: str
    amount: float
    success: bool
    probe: bool
    ticks: int
    realized: float
    ratio: float
    unreachable: bool
    end_error_est: float


def default_segment_tolerance(direction: str) -> float:
    return math.radians(0.5) if direction == "theta_o" else 1e-3


class Session:
    """One simulator + estimator + controller loop with scripting."""

    def __init__(
        self,
        sim: Simulator,
        cone_params: WrenchConeParams,
        ctrl_params: ControllerParams,
        gates: RegressionGates = RegressionGates(),
        estimator_hz: int = 100,
        controller_hz: int = 30,
        warm: WarmStartParams = WarmStartParams(),
        telemetry: Optional[Callable[[dict], None]] = None,
    ):
        self.sim = sim
        self.cones = WrenchConeEstimator(cone_params, ctrl_params.normal_force_cap)
        self.kin = KinematicEstimator(gates)
        self.ctrl_params = ctrl_params
        self.estimator_hz = estimator_hz
        self.controller_hz = controller_hz
        self.warm = warm
        self.telemetry = telemetry
        self.phase = SessionPhase.HOLDING
        self.tick = 0
        self._ctrl_acc = estimator_hz  # fire the controller on the first tick
        self.x_tar = sim.state.x_tar.copy()
        self._xtar_step = np.zeros(3)
        self._xtar_steps_left = 0
        self.objective = self._hold_objective()
        self.segment_results: list[SegmentResult] = []
        self.fault: Optional[str] = None
        self.last_world = sim.world_state()
        self.last_meas = sim.measurement()
        self.last_mode = None
        self.last_tick_info = None
        self._explore_side = 0.0
        # the session starts with the hand flush on the object, so the object
        # orientation is known from the hand pose
        self.kin.theta_o_hat = self.last_meas.hand_pose.theta
        self.kin.theta_o_valid = True

    # -- objectives -----------------------------------------------------------

    def _hold_objective(self) -> ControlObjective:
        return ControlObjective(terms=(), desired=ContactConfiguration.all_sticking())

    def estimate_of(self, direction: str) -> float:
        snap = self.kin.snapshot()
        if direction == "theta_o":
            return snap.theta_o_hat
        if direction == "s_h":
            return snap.s_h_hat
        return snap.s_g_hat

    def estimate_valid(self, direction: str) -> bool:
        snap = self.kin.snapshot()
        if direction == "theta_o":
            return snap.theta_o_valid
        if direction == "s_h":
            return snap.s_h_valid
        return snap.pivot_valid

    def truth_of(self, direction: str) -> float:
        ws = self.sim.world_state()
        if direction == "theta_o":
            return self.sim.state.theta_o
        if direction == "s_h":
            return ws.s_h
        return ws.s_g

    # -- core loop ------------------------------------------------------------

    def _controller_due(self) -> bool:
        self._ctrl_acc += self.controller_hz
        if self._ctrl_acc >= self.estimator_hz:
            self._ctrl_acc -= self.estimator_hz
            return True
        return False

    def _ticks_to_next_control(self) -> int:
        acc = self._ctrl_acc
        n = 0
        while True:
            n += 1
            acc += self.controller_hz
            if acc >= self.estimator_hz:
                return n

    def tick_once(self, error_fn=None) -> None:
        """One estimator tick; error_fn(session) -> list[ObjectiveTerm]."""
        if self.phase is SessionPhase.FAULTED:
            return
        if self._xtar_steps_left > 0:
            self.x_tar = self.x_tar + self._xtar_step
            self._xtar_steps_left -= 1
        try:
            ws, meas = self.sim.step(self.x_tar)
        except SimulationFault as err:
            self.phase = SessionPhase.FAULTED
            self.fault = str(err)
            return
        self.last_world = ws
        self.last_meas = meas
        # estimator updates (100 Hz side)
        self.cones.update_hand_cone(meas.hand_wrench)
        e_t, e_n = hand_axes(meas.hand_pose.theta)
        f_world = meas.hand_wrench.f_x * e_t + meas.hand_wrench.f_y * e_n
        self.cones.update_ground_hull(f_world)
        # the relative-angle hint is only meaningful while the pivot-mode
        # integrator can actually track the object orientation
        if self.kin.pivot_valid and self.kin.d_valid:
            theta_rel = normalize_angle(self.kin.theta_o_hat - meas.hand_pose.theta)
        else:
            theta_rel = 0.0
        mode = self.cones.classify_modes(meas.hand_wrench, f_world, theta_rel)
        self.last_mode = mode
        self.kin.update(mode, meas.hand_pose, self.ctrl_params.l_h)

        if self._controller_due():
            terms = error_fn(self) if error_fn is not None else ()
            objective = replace(self.objective, terms=tuple(terms))
            tick_out = control_tick(
                objective,
                self.cones.snapshot(),
                self.kin.snapshot(),
                meas.hand_wrench,
                meas.hand_pose.theta,
                self.ctrl_params,
                explore_side=self._explore_side,
            )
            self.last_tick_info = tick_out
            n = self._ticks_to_next_control()
            world_target = apply_target_increment(
                self.x_tar, tick_out.dx_tar, meas.hand_pose.theta
            )
            self._xtar_step = (world_target - self.x_tar) / n
            self._xtar_steps_left = n
        self._emit_telemetry()
        self.tick += 1

    def hold(self, ticks: int) -> None:
        self.objective = self._hold_objective()
        self._explore_side = 0.0
        for _ in range(ticks):
            self.tick_once(lambda s: ())
            if self.phase is SessionPhase.FAULTED:
                return

    # -- segments ---------------------------------------------------------------

    def run_segment(self, seg: ScriptSegment) -> SegmentResult:
        desired = seg.desired_config()
        self.objective = ControlObjective(terms=(), desired=desired)
        self._explore_side = 0.0
        if seg.probe and seg.direction == "s_h":
            # exploring one hand-cone side loads the matching ground-force side
            self._explore_side = -1.0 if seg.amount > 0 else 1.0
        if seg.probe and seg.direction == "theta_o":
            self._explore_side = 0.0

        closed_loop = self.estimate_valid(seg.direction) and not (
            seg.probe and seg.direction in ("s_h", "s_g")
        )
        start_est = self.estimate_of(seg.direction) if closed_loop else 0.0
        target = start_est + seg.amount
        start_truth = self.truth_of(seg.direction)

        sign = 1.0 if seg.amount >= 0 else -1.0
        no_progress = 0
        last_err = None
        success = False
        unreachable = False
        ticks_used = 0
        ride_count = 0

        holding = {"flag": False}

        def error_terms(session: "Session"):
            mode = session.last_mode
            if mode is not None and (
                mode.config.hand.rotational is not desired.hand.rotational
                and min(
                    mode.slacks.get("pivot_pos", 1.0),
                    mode.slacks.get("pivot_neg", 1.0),
                )
                < 0.008  # below the controller's shrink line: truly pivoted
            ):
                # the geometry genuinely left the desired one (torque outside
                # the prescribed cone, not just riding the shrink line): stop
                # driving and let the wrench rows pull the contact back
                holding["flag"] = True
                return ()
            holding["flag"] = False
            if closed_loop:
                err = target - session.estimate_of(seg.direction)
                if seg.direction == "theta_o":
                    err = normalize_angle(err)
                # reference shaping: feed the error in bounded steps so the
                # equilibrium walks instead of outrunning the hand
                cap = math.radians(1.5) if seg.direction == "theta_o" else 2e-3
                err = max(-cap, min(cap, err))
            else:
                err = sign * session.warm.probe_error
                if seg.direction == "theta_o":
                    err = sign * math.radians(0.2)
            return (ObjectiveTerm(seg.direction, err),)

        for _ in range(seg.timeout_ticks):
            self.tick_once(error_terms)
            ticks_used += 1
            if self.phase is SessionPhase.FAULTED:
                break
            if seg.probe and seg.ride_ticks and self.last_mode is not None:
                cfg = self.last_mode.config
                riding = (
                    cfg.hand.tangential.sliding
                    if seg.direction == "s_h"
                    else cfg.ground.sliding
                )
                if riding:
                    ride_count += 1
                    if ride_count >= seg.ride_ticks:
                        break
            if closed_loop:
                err = target - self.estimate_of(seg.direction)
                if seg.direction == "theta_o":
                    err = normalize_angle(err)
                if abs(err) < seg.tolerance:
                    success = True
                    break
                if holding["flag"]:
                    pass  # restoring the contact geometry, not stuck
                elif last_err is not None and abs(last_err - err) < 0.02 * abs(
                    seg.amount
                ) / max(seg.timeout_ticks, 1):
                    no_progress += 1
                else:
                    no_progress = 0
                last_err = err
                if no_progress > 150:
                    unreachable = True
                    break

        realized = self.truth_of(seg.direction) - start_truth
        ratio = realized / seg.amount if seg.amount else 0.0
        end_err = (
            normalize_angle(target - self.estimate_of(seg.direction))
            if closed_loop and seg.direction == "theta_o"
            else (target - self.estimate_of(seg.direction) if closed_loop else 0.0)
        )
        result = SegmentResult(
            label=seg.label or f"{seg.direction}{seg.amount:+.4f}",
            direction=seg.direction,
            amount=seg.amount,
            success=success or seg.probe,
            probe=seg.probe,
            ticks=ticks_used,
            realized=realized,
            ratio=ratio,
            unreachable=unreachable,
            end_error_est=float(end_err),
        )
        self.segment_results.append(result)
        if not seg.probe and not result.success and self.phase is not SessionPhase.FAULTED:
            self.phase = SessionPhase.FAULTED
            self.fault = f"segment {result.label} "
            self.fault += "unreachable" if unreachable else "timed out"
        self.objective = self._hold_objective()
        self._explore_side = 0.0
        return result

    # -- warm start ---------------------------------------------------------------

    def adjust_preload(self, target_force: float, settle_ticks: int = 12) -> None:
        """Open-loop normal-force change via the target's normal offset."""
        meas_fn = self.last_meas.hand_wrench.f_y
        delta = (target_force - meas_fn) / self.ctrl_params.stiffness[1]
        e_t, e_n = hand_axes(self.last_meas.hand_pose.theta)
        per_tick = delta / max(settle_ticks // 2, 1) * e_n
        for i in range(settle_ticks):
            if i < settle_ticks // 2:
                self.x_tar = self.x_tar.copy()
                self.x_tar[:2] += per_tick
            self.tick_once(lambda s: ())
            if self.phase is SessionPhase.FAULTED:
                return

    def warm_start(self) -> list[SegmentResult]:
        """Exploration, ordered so each probe is feasible given the last.

        The tip-safe hand slide runs first at full preload (friction boundary
        riding estimates mu_h); the return slide runs at reduced preload; the
        ground probes push the world-frame force sideways to widen the hull;
        the closed-loop rotation sweep then fills the pivot regression while
        staying on a single ground vertex.
        """
        self.phase = SessionPhase.WARM_START
        w = self.warm
        amp = w.slide_amplitude * (1 if w.safe_slide_sign >= 0 else -1)
        rot = w.rotate_amplitude
        results = []

        def run(seg):
            results.append(self.run_segment(seg))
            if self.phase is SessionPhase.WARM_START:
                return True
            return False

        # the friction cone is symmetric, so one ridden direction suffices to
        # estimate it; the return ride brings the hand back to its post where
        # it is feasible (on steep faces the ground gives first and the return
        # is skipped by configuration)
        ok = run(ScriptSegment("s_h", amp, probe=True, ride_ticks=55,
                               timeout_ticks=3 * w.probe_ticks, label="ws_slide_safe"))
        if ok and w.return_slide:
            self.adjust_preload(w.reduced_preload)
            ok = run(ScriptSegment("s_h", -amp, probe=True, ride_ticks=55,
                                   timeout_ticks=3 * w.probe_ticks,
                                   label="ws_slide_return"))
        for preload, tag in ((w.ground_preload_lo, "lo"), (w.ground_preload_hi, "hi")):
            if not ok:
                break
            self.adjust_preload(preload)
            ok = run(ScriptSegment("s_g", -amp, probe=True,
                                   timeout_ticks=w.probe_ticks // 2,
                                   label=f"ws_ground_neg_{tag}"))
            if ok:
                ok = run(ScriptSegment("s_g", amp, probe=True,
                                       timeout_ticks=w.probe_ticks // 2,
                                       label=f"ws_ground_pos_{tag}"))
        if ok:
            self.adjust_preload(w.rotation_preload)
        rocks = []
        if w.tip_angle:
            # leaving the resting face may need to shove the base sideways;
            # admit the incidental ground slide during the tip
            rocks.append(("ws_tip", w.tip_angle, -math.copysign(1.0, w.tip_angle)))
        rocks += [
            ("ws_rock_a", +rot, 0.0),
            ("ws_rock_b", -1.5 * rot, 0.0),
            ("ws_rock_c", +0.5 * rot, 0.0),
        ]
        for label, delta, gslide in rocks:
            if not ok:
                break
            ok = run(ScriptSegment("theta_o", delta, tolerance=math.radians(0.5),
                                   timeout_ticks=w.rotate_timeout,
                                   ground_slide=gslide, label=label))
        if ok:
            self.adjust_preload(w.full_preload)
            self.hold(w.settle_ticks)
            self.phase = SessionPhase.EXECUTING
        return results

    def run_script(self, segments) -> dict:
        """Execute segments; returns the outcome report."""
        if self.phase is SessionPhase.HOLDING:
            self.phase = SessionPhase.EXECUTING
        report_segments = []
        for seg in segments:
            res = self.run_segment(seg)
            report_segments.append(res)
            if self.phase is SessionPhase.FAULTED:
                break
        if self.phase is not SessionPhase.FAULTED:
            self.phase = SessionPhase.HOLDING
        ratios = [r.ratio for r in report_segments if not r.probe and r.success]
        return {
            "segments": report_segments,
            "fault": self.fault,
            "median_ratio": float(np.median(ratios)) if ratios else None,
            "completed": sum(1 for r in report_segments if r.success),
            "total": len(report_segments),
        }

    # -- perturbations & external commands ----------------------------------------

    def perturb(self, direction: str, value: float) -> None:
        if direction == "theta_o":
            self.sim.apply_perturbation(dtheta_o=value)
        elif direction == "s_h":
            self.sim.apply_perturbation(ds_h=value)
            # the hand and target were dragged together; mirror the target move
            self.x_tar = self.sim.state.x_tar.copy()
        elif direction == "s_g":
            self.sim.apply_perturbation(ds_g=value)
            self.x_tar = self.sim.state.x_tar.copy()
        else:
            raise ValueError(f"unknown direction {direction!r}")

    # -- telemetry -------------------------------------------------------------------

    def _emit_telemetry(self) -> None:
        if self.telemetry is None:
            return
        self.telemetry(self.telemetry_record())

    def telemetry_record(self) -> dict:
        ws = self.last_world
        meas = self.last_meas
        kin = self.kin.snapshot()
        cone = self.cones.snapshot()
        mode = self.last_mode
        tick_info = self.last_tick_info
        rec = {
            "tick": self.tick,
            "t": self.tick / self.estimator_hz,
            "phase": self.phase.value,
            "truth": {
                "hand_pose": [ws.hand_pose.x, ws.hand_pose.y, ws.hand_pose.theta],
                "object_pose": [
                    ws.object_pose.x, ws.object_pose.y, ws.object_pose.theta,
                ],
                "theta_o": self.sim.state.theta_o,
                "s_h": ws.s_h,
                "s_g": ws.s_g,
                "wrench": [
                    ws.hand_wrench_true.f_x,
                    ws.hand_wrench_true.f_y,
                    ws.hand_wrench_true.tau,
                ],
                "ground_force": ws.ground_force.tolist(),
                "config": {
                    "hand_tan": ws.active_config.hand.tangential.value,
                    "hand_rot": ws.active_config.hand.rotational.value,
                    "ground": ws.active_config.ground.value,
                },
                "hand_slipped": ws.hand_slipped,
                "ground_slipped": ws.ground_slipped,
                "ground_geom": [ws.ground_geometry.kind, ws.ground_geometry.index],
            },
            "meas": {
                "pose": [meas.hand_pose.x, meas.hand_pose.y, meas.hand_pose.theta],
                "wrench": [
                    meas.hand_wrench.f_x, meas.hand_wrench.f_y, meas.hand_wrench.tau,
                ],
            },
            "kin": {
                "d": kin.d_hat, "x_o": kin.x_o_hat, "y_o": kin.y_o_hat,
                "s_h": kin.s_h_hat, "s_g": kin.s_g_hat, "theta_o": kin.theta_o_hat,
                "d_valid": kin.d_valid, "pivot_valid": kin.pivot_valid,
                "s_h_valid": kin.s_h_valid, "theta_o_valid": kin.theta_o_valid,
                "spread": kin.angular_spread,
            },
            "cone": {
                "mu_hat": cone.hand_mu_hat,
                "hand_fresh": cone.hand_fresh,
                "ground_fresh": cone.ground_fresh,
                "hand_samples": cone.hand_samples,
                "hand_discarded": cone.hand_discarded,
                "ground_samples": cone.ground_samples,
                "normals": cone.ground_normals.tolist(),
                "offsets": cone.ground_offsets.tolist(),
                "corners": cone.ground_corners.tolist(),
                "mean_force": cone.ground_mean_force.tolist(),
            },
            "mode_est": {
                "hand_tan": mode.config.hand.tangential.value if mode else None,
                "hand_rot": mode.config.hand.rotational.value if mode else None,
                "ground": mode.config.ground.value if mode else None,
                "hand_confident": mode.hand_confident if mode else None,
                "ground_confident": mode.ground_confident if mode else None,
            },
            "x_tar": self.x_tar.tolist(),
        }
        if tick_info is not None:
            rec["qp"] = {
                "feasible": tick_info.feasible,
                "dx_tar": tick_info.dx_tar.tolist(),
                "cost": tick_info.cost,
                "dropped": tick_info.dropped_rows,
                "violated": tick_info.violated_rows,
                "kkt": tick_info.solution.kkt if tick_info.solution else None,
                "stale": tick_info.stale_estimates,
            }
        return rec
