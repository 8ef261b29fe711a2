"""Scenario configuration: schema, loading, and session assembly.

Scenarios are YAML documents with unit-suffixed keys, validated strictly
(unknown keys rejected).  A scenario describes the simulated world (object,
friction, stiffness, noise), the initial contact placement, estimator and
controller tuning, and the session program: an ordered list of steps
(segments, preload changes, holds, perturbations) executed by the session.
"""

from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np
import yaml

from ..contact import ContactModelParams
from ..control import ControllerParams
from ..estimation.kinematics import RegressionGates
from ..estimation.wrench_cone import WrenchConeParams
from ..geometry import ConvexPolygon
from ..sim import NoiseModel, SimParams, Simulator
from .orchestrator import ScriptSegment, Session

STEP_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["segment", "preload", "hold", "perturb", "mark"]},
        "phase": {"enum": ["executing", "warm_start"]},
        "direction": {"enum": ["theta_o", "s_h", "s_g"]},
        "amount": {"type": "number"},
        "amount_deg": {"type": "number"},
        "tolerance": {"type": "number"},
        "tolerance_deg": {"type": "number"},
        "timeout_ticks": {"type": "integer", "minimum": 1},
        "probe": {"type": "boolean"},
        "ride_ticks": {"type": "integer", "minimum": 0},
        "ground_slide": {"type": "number"},
        "chunks": {"type": "integer", "minimum": 1},
        "force_n": {"type": "number"},
        "ticks": {"type": "integer", "minimum": 1},
        "label": {"type": "string"},
        "repeat": {"type": "integer", "minimum": 1},
        "alternate": {"type": "boolean"},
        "no_fault": {"type": "boolean"},
    },
}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "units", "object", "contact", "stiffness", "initial"],
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer"},
        "units": {
            "type": "object",
            "additionalProperties": False,
            "required": ["length", "force", "angle"],
            "properties": {
                "length": {"const": "m"},
                "force": {"const": "N"},
                "angle": {"const": "rad"},
            },
        },
        "gravity_m_s2": {"type": "number", "exclusiveMinimum": 0},
        "object": {
            "type": "object",
            "additionalProperties": False,
            "required": ["vertices_m", "mass_kg"],
            "properties": {
                "vertices_m": {
                    "type": "array",
                    "minItems": 3,
                    "items": {
                        "type": "array",
                        "minItems": 2,
                        "maxItems": 2,
                        "items": {"type": "number"},
                    },
                },
                "mass_kg": {"type": "number", "exclusiveMinimum": 0},
                "com_m": {
                    "type": "array",
                    "minItems": 2,
                    "maxItems": 2,
                    "items": {"type": "number"},
                },
            },
        },
        "contact": {
            "type": "object",
            "additionalProperties": False,
            "required": ["mu_hand", "mu_ground", "hand_half_length_m"],
            "properties": {
                "mu_hand": {"type": "number", "exclusiveMinimum": 0},
                "mu_ground": {"type": "number", "exclusiveMinimum": 0},
                "hand_half_length_m": {"type": "number", "exclusiveMinimum": 0},
                "force_regularizer_n": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "stiffness": {
            "type": "object",
            "additionalProperties": False,
            "required": ["tangential_n_m", "normal_n_m", "rotational_nm_rad"],
            "properties": {
                "tangential_n_m": {"type": "number", "exclusiveMinimum": 0},
                "normal_n_m": {"type": "number", "exclusiveMinimum": 0},
                "rotational_nm_rad": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "force_std_n": {"type": "number", "minimum": 0},
                "torque_std_nm": {"type": "number", "minimum": 0},
                "pos_std_m": {"type": "number", "minimum": 0},
                "rot_std_rad": {"type": "number", "minimum": 0},
            },
        },
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "required": ["hand_edge", "preload_n"],
            "properties": {
                "hand_edge": {"type": "integer", "minimum": 0},
                "rest": {"enum": ["flat", "balanced"]},
                "ground_edge": {"type": "integer", "minimum": 0},
                "ground_vertex": {"type": "integer", "minimum": 0},
                "tilt_rad": {"type": "number"},
                "hand_offset_m": {"type": "number"},
                "preload_n": {"type": "number", "exclusiveMinimum": 0},
                "object_x_m": {"type": "number"},
            },
        },
        "estimator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "quantile": {"type": "number"},
                "directions": {"type": "integer", "minimum": 8},
                "epsilon_n": {"type": "number", "minimum": 0},
                "min_samples": {"type": "integer", "minimum": 5},
                "near_violation": {"type": "number", "exclusiveMinimum": 0},
                "ground_margin_n": {"type": "number", "minimum": 0},
                "forgetting": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "spread_gate_rad": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "controller": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alpha0": {"type": "number", "exclusiveMinimum": 0},
                "normal_force_cap_n": {"type": "number", "exclusiveMinimum": 0},
                "normal_force_floor_n": {"type": "number", "minimum": 0},
                "gamma_ok": {"type": "number", "exclusiveMinimum": 0},
                "gamma_violated": {"type": "number", "exclusiveMinimum": 0},
                "shrink_frac": {"type": "number", "minimum": 0},
                "d_guess_m": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "rates": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "estimator_hz": {"type": "integer", "minimum": 1},
                "controller_hz": {"type": "integer", "minimum": 1},
            },
        },
        "program": {"type": "array", "items": STEP_SCHEMA},
    },
}


class ScenarioError(ValueError):
    """Invalid scenario document."""


@dataclass
class Scenario:
    name: str
    seed: int
    sim_params: SimParams
    cone_params: WrenchConeParams
    ctrl_params: ControllerParams
    gates: RegressionGates
    estimator_hz: int
    controller_hz: int
    initial: dict
    program: list

    def build_simulator(self, seed: Optional[int] = None) -> Simulator:
        params = self.sim_params
        if seed is not None and seed != params.seed:
            params = SimParams(
                contact=params.contact,
                object=params.object,
                hand_edge=params.hand_edge,
                stiffness=params.stiffness.copy(),
                noise=params.noise,
                seed=seed,
                gravity=params.gravity,
                step_clamp_lin=params.step_clamp_lin,
                step_clamp_rot=params.step_clamp_rot,
            )
        init = self.initial
        if init.get("rest", "flat") == "balanced":
            return Simulator.from_tilted(
                params,
                ground_vertex=init.get("ground_vertex", 0),
                theta0=init.get("tilt_rad", 0.0),
                hand_offset=init.get("hand_offset_m", 0.0),
                preload=init["preload_n"],
                object_x=init.get("object_x_m", 0.0),
            )
        return Simulator.from_rest(
            params,
            ground_edge=init.get("ground_edge", 0),
            hand_offset=init.get("hand_offset_m", 0.0),
            preload=init["preload_n"],
            object_x=init.get("object_x_m", 0.0),
        )

    def build_session(self, telemetry=None, seed: Optional[int] = None) -> Session:
        return Session(
            self.build_simulator(seed),
            self.cone_params,
            self.ctrl_params,
            gates=self.gates,
            estimator_hz=self.estimator_hz,
            controller_hz=self.controller_hz,
            telemetry=telemetry,
        )


def _segment_from_step(step: dict, index: int) -> ScriptSegment:
    amount = step.get("amount")
    if amount is None and "amount_deg" in step:
        amount = math.radians(step["amount_deg"])
    if amount is None:
        raise ScenarioError(f"program step {index}: segment needs amount")
    tol = step.get("tolerance")
    if tol is None and "tolerance_deg" in step:
        tol = math.radians(step["tolerance_deg"])
    if tol is None:
        tol = math.radians(0.5) if step["direction"] == "theta_o" else 1e-3
    return ScriptSegment(
        direction=step["direction"],
        amount=float(amount),
        tolerance=float(tol),
        timeout_ticks=int(step.get("timeout_ticks", 600)),
        probe=bool(step.get("probe", False)),
        ride_ticks=int(step.get("ride_ticks", 0)),
        ground_slide=float(step.get("ground_slide", 0.0)),
        label=step.get("label", f"step{index}"),
    )


def expand_program(program: list) -> list:
    """Expand repeat/alternate/chunks into a flat list of executable steps."""
    flat = []
    for i, step in enumerate(program):
        kind = step.get("kind", "segment")
        if kind != "segment":
            flat.append(dict(step, kind=kind))
            continue
        seg = _segment_from_step(step, i)
        repeat = int(step.get("repeat", 1))
        alternate = bool(step.get("alternate", False))
        chunks = int(step.get("chunks", 1))
        no_fault = bool(step.get("no_fault", False))
        for r in range(repeat):
            amount = seg.amount if not (alternate and r % 2) else -seg.amount
            per = amount / chunks
            for c in range(chunks):
                label = seg.label
                if repeat > 1:
                    label += f"#{r}"
                if chunks > 1:
                    label += f".{c}"
                flat.append(
                    {
                        "kind": "segment",
                        "segment": ScriptSegment(
                            direction=seg.direction,
                            amount=per,
                            tolerance=seg.tolerance,
                            timeout_ticks=seg.timeout_ticks,
                            probe=seg.probe,
                            ride_ticks=seg.ride_ticks,
                            ground_slide=seg.ground_slide,
                            label=label,
                        ),
                        "no_fault": no_fault,
                    }
                )
    return flat


def run_program(session: Session, program: list) -> list:
    """Execute scenario program steps against a session."""
    from .orchestrator import SessionPhase

    results = []
    for step in expand_program(program):
        if session.phase is SessionPhase.FAULTED:
            break
        kind = step["kind"]
        if kind == "preload":
            session.adjust_preload(step["force_n"], step.get("ticks", 12))
        elif kind == "hold":
            session.hold(step.get("ticks", 30))
        elif kind == "mark":
            session.phase = (
                SessionPhase.EXECUTING
                if step.get("phase", "executing") == "executing"
                else SessionPhase.WARM_START
            )
        elif kind == "perturb":
            amount = step.get("amount")
            if amount is None and "amount_deg" in step:
                amount = math.radians(step["amount_deg"])
            session.perturb(step["direction"], float(amount))
        else:
            seg = step["segment"]
            res = session.run_segment(seg)
            results.append(res)
            if step.get("no_fault") and session.phase is SessionPhase.FAULTED:
                session.phase = SessionPhase.EXECUTING
                session.fault = None
    return results


def parse_scenario(doc: dict) -> Scenario:
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as err:
        raise ScenarioError(f"scenario schema violation: {err.message}") from err

    obj = doc["object"]
    polygon = ConvexPolygon(
        np.array(obj["vertices_m"], dtype=float),
        mass=obj["mass_kg"],
        com=np.array(obj["com_m"], dtype=float) if "com_m" in obj else None,
    )
    contact = doc["contact"]
    contact_params = ContactModelParams(
        mu_h=contact["mu_hand"],
        mu_g=contact["mu_ground"],
        l_h=contact["hand_half_length_m"],
        epsilon_reg=contact.get("force_regularizer_n", 1.0),
    )
    stiff = doc["stiffness"]
    stiffness = np.array(
        [stiff["tangential_n_m"], stiff["normal_n_m"], stiff["rotational_nm_rad"]]
    )
    noise_doc = doc.get("noise", {})
    noise = NoiseModel(
        force_std=noise_doc.get("force_std_n", 0.1),
        torque_std=noise_doc.get("torque_std_nm", 0.005),
        pos_std=noise_doc.get("pos_std_m", 2e-4),
        rot_std=noise_doc.get("rot_std_rad", 1e-3),
        enabled=noise_doc.get("enabled", True),
    )
    seed = doc.get("seed", 0)
    sim_params = SimParams(
        contact=contact_params,
        object=polygon,
        hand_edge=doc["initial"]["hand_edge"],
        stiffness=stiffness,
        noise=noise,
        seed=seed,
        gravity=doc.get("gravity_m_s2", 9.81),
    )
    est = doc.get("estimator", {})
    cone_params = WrenchConeParams(
        l_h=contact_params.l_h,
        epsilon_reg=est.get("epsilon_n", 1.0),
        quantile=est.get("quantile", 0.99),
        n_directions=est.get("directions", 32),
        min_samples=est.get("min_samples", 50),
        near_violation=est.get("near_violation", 0.05),
        ground_margin=est.get("ground_margin_n", 0.5),
    )
    ctrl = doc.get("controller", {})
    ctrl_params = ControllerParams(
        stiffness=stiffness,
        l_h=contact_params.l_h,
        normal_force_cap=ctrl.get("normal_force_cap_n", 30.0),
        normal_force_floor=ctrl.get("normal_force_floor_n", 1.0),
        gamma_ok=ctrl.get("gamma_ok", 1.0),
        gamma_violated=ctrl.get("gamma_violated", 3.0),
        shrink_frac=ctrl.get("shrink_frac", 0.02),
        d_guess=ctrl.get("d_guess_m", 0.05),
    )
    gates = RegressionGates(
        forgetting=est.get("forgetting", 0.999),
        min_spread=est.get("spread_gate_rad", math.radians(3.0)),
    )
    rates = doc.get("rates", {})
    return Scenario(
        name=doc["name"],
        seed=seed,
        sim_params=sim_params,
        cone_params=cone_params,
        ctrl_params=ctrl_params,
        gates=gates,
        estimator_hz=rates.get("estimator_hz", 100),
        controller_hz=rates.get("controller_hz", 30),
        initial=doc["initial"],
        program=doc.get("program", []),
    )


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ScenarioError("scenario file must contain a mapping")
    return parse_scenario(doc)


def bundled_scenario_path(name: str) -> Path:
    root = importlib.resources.files("contactconf") / "scenarios"
    path = Path(str(root / f"{name}.yaml"))
    if not path.exists():
        raise FileNotFoundError(f"no bundled scenario {name!r}")
    return path


def load_bundled(name: str) -> Scenario:
    return load_scenario(bundled_scenario_path(name))
