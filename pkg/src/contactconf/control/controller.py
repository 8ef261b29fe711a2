"""QP-based impedance-target controller.

Per tick: assemble the generalized cost over the requested motion directions,
collect the wrench-cone rows (hand friction from the estimated coefficient,
prescribed torque cone, estimated ground polygon mapped through the hand
axes, plus the normal-force cap and floor), drop the rows that block the
desired sliding or pivoting, substitute the incremental impedance relation
dw = K dx_tar, solve, and advance the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..contact import ContactConfiguration, Rotational, Tangential
from ..estimation.kinematics import KinematicSnapshot
from ..estimation.wrench_cone import WrenchConeSnapshot
from ..geometry import HAND_CONTACT, Wrench2, hand_axes
from .directions import D_GUESS_DEFAULT, target_directions
from .qp import QPInfeasible, QPProblem, QPSolution, solve_qp


@dataclass(frozen=True)
class ObjectiveTerm:
    direction: str          # theta_o | s_h | s_g
    error: float            # rad or m; positive moves the coordinate up
    alpha: float = 1.0
    beta: float = 1.0


@dataclass(frozen=True)
class ControlObjective:
    terms: tuple
    desired: ContactConfiguration
    alpha0: float = 1e-3

    def __post_init__(self):
        names = {"theta_o", "s_h", "s_g"}
        for t in self.terms:
            if t.direction not in names:
                raise ValueError(f"unknown direction {t.direction}")
            if t.alpha < 0:
                raise ValueError("alpha must be non-negative")


@dataclass(frozen=True)
class ControllerParams:
    stiffness: np.ndarray
    l_h: float
    normal_force_cap: float = 30.0
    normal_force_floor: float = 1.0
    gamma_ok: float = 1.0
    gamma_violated: float = 3.0
    shrink_frac: float = 0.02
    d_guess: float = D_GUESS_DEFAULT
    step_limit_lin: float = 0.010
    step_limit_rot: float = math.radians(5.0)


@dataclass
class ControlTick:
    dx_tar: np.ndarray
    feasible: bool
    solution: Optional[QPSolution]
    dropped_rows: list
    violated_rows: list
    cost: float
    stale_estimates: bool


def build_qp(
    objective: ControlObjective,
    cones: WrenchConeSnapshot,
    kin: KinematicSnapshot,
    w_meas: Wrench2,
    theta_h: float,
    params: ControllerParams,
    explore_side: float = 0.0,
) -> tuple[QPProblem, dict]:
    """Assemble the tick QP over the hand-frame target increment.

    explore_side drops the estimated ground rows on one force-space side
    (sign of n_x); used by warm-start probes so a conservative guess cannot
    veto the excursion sent to improve it.
    """
    w_meas.require_frame(HAND_CONTACT)
    k = np.asarray(params.stiffness, dtype=float)
    dirs = target_directions(kin, theta_h, params.d_guess)

    h_mat = 2.0 * objective.alpha0 * np.eye(3)
    g_vec = np.zeros(3)
    for t in objective.terms:
        v = dirs[t.direction]
        h_mat += 2.0 * t.alpha * np.outer(v, v)
        g_vec -= 2.0 * t.alpha * t.beta * t.error * v

    w = np.array([w_meas.f_x, w_meas.f_y, w_meas.tau])
    desired = objective.desired
    mu = cones.hand_mu_hat
    l_h = params.l_h

    rows = []     # (label, n_wrench(3,) or ground n(2,), b, kind)
    dropped = []

    def hand_row(label, n, b, drop):
        if drop:
            dropped.append(label)
        else:
            rows.append((label, np.asarray(n, dtype=float), float(b), "hand"))

    scale_f = max(mu * max(w[1], 0.0), 1e-3)
    shrink_f = params.shrink_frac * scale_f
    hand_row(
        "hand_fric_pos", (-1.0, -mu, 0.0), -shrink_f,
        desired.hand.tangential is Tangential.SLIDE_POS,
    )
    hand_row(
        "hand_fric_neg", (1.0, -mu, 0.0), -shrink_f,
        desired.hand.tangential is Tangential.SLIDE_NEG,
    )
    scale_t = max(l_h * max(w[1], 0.0), 1e-4)
    shrink_t = params.shrink_frac * scale_t
    hand_row(
        "torque_pos", (0.0, -l_h, 1.0), -shrink_t,
        desired.hand.rotational is Rotational.PIVOT_POS,
    )
    hand_row(
        "torque_neg", (0.0, -l_h, -1.0), -shrink_t,
        desired.hand.rotational is Rotational.PIVOT_NEG,
    )
    hand_row("force_cap", (0.0, 1.0, 0.0), params.normal_force_cap, False)
    hand_row("force_floor", (0.0, -1.0, 0.0), -params.normal_force_floor, False)

    e_t, e_n = hand_axes(theta_h)
    f_world = w[0] * e_t + w[1] * e_n
    drop_nx = 0.0
    if desired.ground is Tangential.SLIDE_NEG:
        drop_nx = 0.25    # pushing +x: drop right-side friction rows
    elif desired.ground is Tangential.SLIDE_POS:
        drop_nx = -0.25
    elif explore_side > 0:
        drop_nx = 0.25
    elif explore_side < 0:
        drop_nx = -0.25
    ground_rows = []
    for j, (n_g, b_g) in enumerate(zip(cones.ground_normals, cones.ground_offsets)):
        label = f"ground_{j}"
        if drop_nx > 0 and n_g[0] > drop_nx:
            dropped.append(label)
            continue
        if drop_nx < 0 and n_g[0] < drop_nx:
            dropped.append(label)
            continue
        scale_g = max(float(b_g - n_g @ cones.ground_mean_force), 0.5)
        ground_rows.append((label, n_g, float(b_g) - params.shrink_frac * scale_g))

    a_list, b_list, labels, violated = [], [], [], []
    force_map = np.column_stack([e_t * k[0], e_n * k[1]])  # dx (t,n) -> dF world
    for label, n, b, kind in rows:
        rhs = b - float(n @ w)
        gamma = params.gamma_ok if rhs >= 0 else params.gamma_violated
        if rhs < 0:
            violated.append(label)
        a_list.append(gamma * n * k)  # diag K substitution
        b_list.append(rhs)
        labels.append(label)
    for label, n_g, b in ground_rows:
        rhs = b - float(n_g @ f_world)
        gamma = params.gamma_ok if rhs >= 0 else params.gamma_violated
        if rhs < 0:
            violated.append(label)
        a_row = np.zeros(3)
        a_row[:2] = gamma * (n_g @ force_map)
        a_list.append(a_row)
        b_list.append(rhs)
        labels.append(label)

    qp = QPProblem(h_mat, g_vec, np.array(a_list), np.array(b_list), labels)
    info = {"dropped": dropped, "violated": violated, "directions": dirs}
    return qp, info


def control_tick(
    objective: ControlObjective,
    cones: WrenchConeSnapshot,
    kin: KinematicSnapshot,
    w_meas: Wrench2,
    theta_h: float,
    params: ControllerParams,
    explore_side: float = 0.0,
) -> ControlTick:
    """One controller update; returns the hand-frame target increment."""
    stale = any(
        term.direction == "theta_o" and not kin.theta_o_valid
        or term.direction == "s_h" and not kin.s_h_valid
        for term in objective.terms
    )
    qp, info = build_qp(
        objective, cones, kin, w_meas, theta_h, params, explore_side
    )
    try:
        sol = solve_qp(qp)
    except QPInfeasible as err:
        return ControlTick(
            np.zeros(3), False, None, info["dropped"], err.violated_rows, 0.0, stale
        )
    dx = sol.x.copy()
    lin = math.hypot(dx[0], dx[1])
    if lin > params.step_limit_lin:
        dx *= params.step_limit_lin / lin
    if abs(dx[2]) > params.step_limit_rot:
        dx *= params.step_limit_rot / abs(dx[2])
    cost = float(0.5 * sol.x @ qp.H @ sol.x + qp.g @ sol.x)
    return ControlTick(dx, True, sol, info["dropped"], info["violated"], cost, stale)


def apply_target_increment(x_tar: np.ndarray, dx_hand: np.ndarray, theta_h: float):
    """Convert a hand-frame increment to world and apply it to the target."""
    e_t, e_n = hand_axes(theta_h)
    out = np.asarray(x_tar, dtype=float).copy()
    out[:2] += dx_hand[0] * e_t + dx_hand[1] * e_n
    out[2] += dx_hand[2]
    return out
