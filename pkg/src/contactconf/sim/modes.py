"""Contact-mode hypotheses and the per-mode equilibrium solver.

Each candidate mode fixes an equality system: the impedance law, static
equilibrium of the object, contact-maintenance geometry, and one equation per
contact direction (zero motion for sticking, zero margin for sliding or
pivoting).  The system is solved by Newton iteration to machine precision and
the solution is screened against the complementarity inequalities (margin
signs, rate signs, penetration, separation).  Candidates are enumerated in
preference order: line geometry before endpoint pivots, flush before pivot,
sticking before sliding, so boundary ties resolve conservatively.

The torque-pair rate-sign conditions apply only when departing flush contact;
once the faces are apart the hand contact is a point and rotation is free in
both directions (the line-contact complementarity degenerates there).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..contact import (
    ContactConfiguration,
    ContactMode,
    Rotational,
    Tangential,
    pivot_endpoint_sign,
)
from ..geometry import normalize_angle, rot2
from .model import FLAT_TOL, GroundGeometry, ObjectModel, SimParams

MARGIN_TOL = 8e-9       # N / N*m slack tolerated on inactive inequalities
RATE_TOL = 1e-8         # m / rad of reverse motion tolerated on rates
GAP_TOL = 1e-7          # rad within which hand contact counts as flush
PEN_TOL = 1e-9          # m of allowed penetration
TIE_BAND = 1e-10        # quantities this close to zero mark a degenerate step
NEWTON_TOL = 1e-12
NEWTON_ITERS = 12


@dataclass(frozen=True)
class ModeHypothesis:
    ground_geom: GroundGeometry
    hand_rot: Rotational
    hand_tan: Tangential
    ground_tan: Tangential

    def label(self) -> str:
        g = f"{self.ground_geom.kind}{self.ground_geom.index}"
        return f"{g}/{self.hand_rot.value}/{self.hand_tan.value}/{self.ground_tan.value}"

    def config(self) -> ContactConfiguration:
        return ContactConfiguration(
            hand=ContactMode(self.hand_tan, self.hand_rot),
            ground=self.ground_tan,
        )


@dataclass
class RawState:
    """Mutable simulator state (angles unwrapped)."""

    hand: np.ndarray          # x, y, theta
    theta_o: float
    geom: GroundGeometry
    g_x: float                # world x of the ground anchor
    c_h: float                # body x of the hand contact reference point
    hand_rot: Rotational
    w_hand: np.ndarray        # f_t, f_n, tau (hand frame)
    f_g: np.ndarray           # f_I, f_J (world)
    tau_g: float
    x_tar: np.ndarray
    config: ContactConfiguration

    def copy(self) -> "RawState":
        return RawState(
            self.hand.copy(), self.theta_o, self.geom, self.g_x, self.c_h,
            self.hand_rot, self.w_hand.copy(), self.f_g.copy(), self.tau_g,
            self.x_tar.copy(), self.config,
        )


# -- geometry helpers ---------------------------------------------------------


def anchor_body(model: ObjectModel, geom: GroundGeometry) -> np.ndarray:
    if geom.kind == "vertex":
        return model.vertices[geom.index]
    a, b = model.edge(geom.index)
    return 0.5 * (a + b)


def object_origin(state: RawState, model: ObjectModel) -> np.ndarray:
    r = rot2(state.theta_o)
    return np.array([state.g_x, 0.0]) - r @ anchor_body(model, state.geom)


def world_vertices(state: RawState, model: ObjectModel) -> np.ndarray:
    return object_origin(state, model) + model.vertices @ rot2(state.theta_o).T


def hand_gap(state: RawState) -> float:
    return normalize_angle(state.theta_o - state.hand[2])


def hand_ref_offset(hand_rot: Rotational, l_h: float) -> float:
    """Signed distance of the contact reference point from the hand center."""
    if hand_rot is Rotational.FLUSH:
        return 0.0
    return pivot_endpoint_sign(hand_rot) * l_h


def ref_body_x(state: RawState, model: ObjectModel, hand_rot: Rotational, l_h: float) -> float:
    """Body-frame x of a hypothesis' contact reference at the current state."""
    u = hand_ref_offset(hand_rot, l_h)
    th = state.hand[2]
    ref_w = state.hand[:2] + u * np.array([math.cos(th), math.sin(th)])
    body = rot2(state.theta_o).T @ (ref_w - object_origin(state, model))
    return float(body[0])


def anchor_world_x(state: RawState, model: ObjectModel, geom: GroundGeometry) -> float:
    r_obj = object_origin(state, model)
    p = r_obj + rot2(state.theta_o) @ anchor_body(model, geom)
    return float(p[0])


def s_h_of(state: RawState, model: ObjectModel) -> float:
    """Reported hand slide coordinate (r_o - ref) . t_face."""
    body_anchor_x = anchor_body(model, state.geom)[0]
    return body_anchor_x - state.c_h


def theta_flat_unwrapped(state_theta: float, model: ObjectModel, edge: int) -> float:
    """Flat angle of an edge, unwrapped near the current orientation."""
    flat = model.flat_angle(edge)
    return state_theta + normalize_angle(flat - state_theta)


# -- candidate result ---------------------------------------------------------


@dataclass
class CandidateResult:
    hypothesis: ModeHypothesis
    consistent: bool
    reason: str = ""
    state: Optional[RawState] = None
    report: dict = field(default_factory=dict)
    degenerate: bool = False
    events: list = field(default_factory=list)  # bisectable boundary crossings

    @property
    def event_only(self) -> bool:
        """Solution valid except for boundary crossings a smaller step avoids."""
        return not self.consistent and bool(self.events) and not self.reason


def _check(report, checks, name, value, lo=None):
    report[name] = value
    if lo is not None and value < lo:
        checks.append(f"{name}={value:.3e}")
        return False
    return True


def solve_candidate(
    state: RawState,
    x_tar: np.ndarray,
    hyp: ModeHypothesis,
    model: ObjectModel,
    params: SimParams,
    margin_tol: float = MARGIN_TOL,
    rate_tol: float = RATE_TOL,
    jump_factor: float = 1.0,
) -> CandidateResult:
    """Solve the equality system of one mode hypothesis and screen it."""
    mu_h = params.contact.mu_h
    mu_g = params.contact.mu_g
    l_h = params.contact.l_h
    k = params.stiffness
    mg = model.mass * params.gravity
    line = hyp.ground_geom.kind == "line"
    gap_prev = hand_gap(state)

    c_prev = ref_body_x(state, model, hyp.hand_rot, l_h)
    g_prev = anchor_world_x(state, model, hyp.ground_geom)
    u_ref = hand_ref_offset(hyp.hand_rot, l_h)
    anchor_b = anchor_body(model, hyp.ground_geom)
    com_rel = model.com - anchor_b
    ref_rel0 = model.face_y - anchor_b[1]  # body y of contact ref relative to anchor

    if line:
        th_o_fix = theta_flat_unwrapped(state.theta_o, model, hyp.ground_geom.index)
        half_face = 0.5 * model.edge_length(hyp.ground_geom.index)

    # unknowns: hand(3), [theta_o | -], g_x, c_h, f_t, f_n, tau, f_gI, f_gJ, [tau_g]
    z = np.empty(11)
    z[0:3] = state.hand
    if line:
        z[3] = g_prev
        z[4] = c_prev
        z[5:8] = state.w_hand
        z[8:10] = state.f_g
        z[10] = state.tau_g
    else:
        z[3] = state.theta_o
        z[4] = g_prev
        z[5] = c_prev
        z[6:9] = state.w_hand
        z[9:11] = state.f_g

    target = np.asarray(x_tar, dtype=float)

    def assemble(zv):
        F = np.zeros(11)
        J = np.zeros((11, 11))
        hx, hy, hth = zv[0], zv[1], zv[2]
        if line:
            th_o, gx, ch = th_o_fix, zv[3], zv[4]
            i_to = None
            i_gx, i_ch = 3, 4
            i_ft, i_fn, i_tau, i_gi, i_gj, i_tg = 5, 6, 7, 8, 9, 10
        else:
            th_o, gx, ch = zv[3], zv[4], zv[5]
            i_to, i_gx, i_ch = 3, 4, 5
            i_ft, i_fn, i_tau, i_gi, i_gj = 6, 7, 8, 9, 10
            i_tg = None
        f_t, f_n, tau = zv[i_ft], zv[i_fn], zv[i_tau]
        f_gi, f_gj = zv[i_gi], zv[i_gj]
        tau_g = zv[i_tg] if line else 0.0

        ct, st = math.cos(hth), math.sin(hth)
        e_t = np.array([ct, st])
        e_n = np.array([st, -ct])
        co, so = math.cos(th_o), math.sin(th_o)

        dx = target[0] - hx
        dy = target[1] - hy
        # spring: wrench minus stiffness times hand-frame target displacement
        F[0] = f_t - k[0] * (dx * ct + dy * st)
        F[1] = f_n - k[1] * (dx * st - dy * ct)
        F[2] = tau - k[2] * (target[2] - hth)
        J[0, 0] = k[0] * ct
        J[0, 1] = k[0] * st
        J[0, 2] = -k[0] * (dx * -st + dy * ct)
        J[0, i_ft] = 1.0
        J[1, 0] = k[1] * st
        J[1, 1] = -k[1] * ct
        J[1, 2] = -k[1] * (dx * ct + dy * st)
        J[1, i_fn] = 1.0
        J[2, 2] = k[2]
        J[2, i_tau] = 1.0

        # force balance
        fhx = f_t * ct + f_n * st
        fhy = f_t * st - f_n * ct
        F[3] = fhx + f_gi
        F[4] = fhy + f_gj - mg
        J[3, 2] = -f_t * st + f_n * ct
        J[3, i_ft] = ct
        J[3, i_fn] = st
        J[3, i_gi] = 1.0
        J[4, 2] = f_t * ct + f_n * st
        J[4, i_ft] = st
        J[4, i_fn] = -ct
        J[4, i_gj] = 1.0

        # torque about the ground anchor (gx, 0)
        rx, ry = hx - gx, hy
        comx_rel = co * com_rel[0] - so * com_rel[1]
        F[5] = tau + rx * fhy - ry * fhx - mg * comx_rel + tau_g
        J[5, 0] = fhy
        J[5, 1] = -fhx
        J[5, 2] = rx * (f_t * ct + f_n * st) - ry * (-f_t * st + f_n * ct)
        J[5, i_gx] = -fhy
        J[5, i_ft] = rx * st - ry * ct
        J[5, i_fn] = -rx * ct - ry * st
        J[5, i_tau] = 1.0
        if not line:
            J[5, i_to] = -mg * (-so * com_rel[0] - co * com_rel[1])
        else:
            J[5, i_tg] = 1.0

        # contact reference point on the hand face line of the object
        wbx = ch - anchor_b[0]
        wby = ref_rel0
        rwx = co * wbx - so * wby
        rwy = so * wbx + co * wby
        F[6] = hx + u_ref * ct - gx - rwx
        F[7] = hy + u_ref * st - rwy
        J[6, 0] = 1.0
        J[6, 2] = -u_ref * st
        J[6, i_gx] = -1.0
        J[6, i_ch] = -co
        J[7, 1] = 1.0
        J[7, 2] = u_ref * ct
        J[7, i_ch] = -so
        if not line:
            J[6, i_to] = -(-so * wbx - co * wby)
            J[7, i_to] = -(co * wbx - so * wby)

        # hand rotational condition
        if hyp.hand_rot is Rotational.FLUSH:
            F[8] = hth - th_o
            J[8, 2] = 1.0
            if not line:
                J[8, i_to] = -1.0
        elif hyp.hand_rot is Rotational.PIVOT_POS:
            F[8] = tau - l_h * f_n
            J[8, i_tau] = 1.0
            J[8, i_fn] = -l_h
        else:
            F[8] = tau + l_h * f_n
            J[8, i_tau] = 1.0
            J[8, i_fn] = l_h

        # hand tangential condition
        if hyp.hand_tan is Tangential.STICK:
            F[9] = ch - c_prev
            J[9, i_ch] = 1.0
        elif hyp.hand_tan is Tangential.SLIDE_POS:
            F[9] = f_t + mu_h * f_n
            J[9, i_ft] = 1.0
            J[9, i_fn] = mu_h
        else:
            F[9] = f_t - mu_h * f_n
            J[9, i_ft] = 1.0
            J[9, i_fn] = -mu_h

        # ground tangential condition
        if hyp.ground_tan is Tangential.STICK:
            F[10] = gx - g_prev
            J[10, i_gx] = 1.0
        elif hyp.ground_tan is Tangential.SLIDE_POS:
            F[10] = f_gi - mu_g * f_gj
            J[10, i_gi] = 1.0
            J[10, i_gj] = -mu_g
        else:
            F[10] = f_gi + mu_g * f_gj
            J[10, i_gi] = 1.0
            J[10, i_gj] = mu_g

        return F, J

    # damped Newton iteration
    converged = False
    F, J = assemble(z)
    err = np.abs(F).max()
    for _ in range(NEWTON_ITERS):
        if err < NEWTON_TOL:
            converged = True
            break
        try:
            dz = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            return CandidateResult(hyp, False, "singular system")
        step = 1.0
        for _ in range(6):
            z_try = z - step * dz
            if np.all(np.isfinite(z_try)):
                F_try, J_try = assemble(z_try)
                err_try = np.abs(F_try).max()
                if err_try < err or err < NEWTON_TOL:
                    z, F, J, err = z_try, F_try, J_try, err_try
                    break
            step *= 0.5
        else:
            return CandidateResult(hyp, False, f"newton stalled at {err:.2e}")
    if not converged and err < NEWTON_TOL:
        converged = True
    if not converged:
        return CandidateResult(hyp, False, f"newton stalled at {err:.2e}")

    # unpack the solution into a state
    new = state.copy()
    new.hand = z[0:3].copy()
    if line:
        new.theta_o = th_o_fix
        new.g_x = z[3]
        new.c_h = z[4]
        new.w_hand = z[5:8].copy()
        new.f_g = z[8:10].copy()
        new.tau_g = z[10]
    else:
        new.theta_o = z[3]
        new.g_x = z[4]
        new.c_h = z[5]
        new.w_hand = z[6:9].copy()
        new.f_g = z[9:11].copy()
        new.tau_g = 0.0
    new.geom = hyp.ground_geom
    new.hand_rot = hyp.hand_rot
    new.x_tar = target.copy()
    new.config = hyp.config()

    # guard against solutions that teleported far from the previous state
    jump = max(
        abs(new.hand[0] - state.hand[0]),
        abs(new.hand[1] - state.hand[1]),
        abs(new.g_x - g_prev),
        abs(new.c_h - c_prev),
    )
    jump_rot = max(abs(new.hand[2] - state.hand[2]), abs(new.theta_o - state.theta_o))
    if (
        jump > 100 * jump_factor * params.step_clamp_lin
        or jump_rot > 100 * jump_factor * params.step_clamp_rot
    ):
        return CandidateResult(hyp, False, f"jump {jump:.2e}/{jump_rot:.2e}")

    # consistency screening: hard failures reject the hypothesis outright,
    # events are boundary crossings the caller can bisect the substep onto
    report: dict = {}
    fails: list = []
    events: list = []
    f_t, f_n, tau = new.w_hand
    f_gi, f_gj = new.f_g
    ok = True
    report["f_n"], report["f_gJ"] = f_n, f_gj
    if f_n < -margin_tol:
        ok = False
        events.append(("hand_separation", f_n))
    if f_gj < -margin_tol:
        ok = False
        events.append(("ground_separation", f_gj))

    m1 = mu_h * f_n + f_t
    m2 = mu_h * f_n - f_t
    t1 = l_h * f_n - tau
    t2 = l_h * f_n + tau
    g1 = mu_g * f_gj - f_gi
    g2 = mu_g * f_gj + f_gi
    ds_h = -(new.c_h - c_prev)
    dg = new.g_x - g_prev
    drel = (new.theta_o - new.hand[2]) - gap_prev

    report.update(
        hand_margins=(m1, m2), torque_margins=(t1, t2), ground_margins=(g1, g2),
        ds_h=ds_h, dg=dg, drel=drel,
    )

    if hyp.hand_tan is Tangential.STICK:
        ok &= _check(report, fails, "stick_m1", m1, -margin_tol)
        ok &= _check(report, fails, "stick_m2", m2, -margin_tol)
    elif hyp.hand_tan is Tangential.SLIDE_POS:
        ok &= _check(report, fails, "slide_rate", ds_h, -rate_tol)
        ok &= _check(report, fails, "other_margin", m2, -margin_tol)
    else:
        ok &= _check(report, fails, "slide_rate", -ds_h, -rate_tol)
        ok &= _check(report, fails, "other_margin", m1, -margin_tol)

    flushish = abs(gap_prev) <= GAP_TOL
    if hyp.hand_rot is Rotational.FLUSH:
        ok &= _check(report, fails, "flush_t1", t1, -margin_tol)
        ok &= _check(report, fails, "flush_t2", t2, -margin_tol)
    elif hyp.hand_rot is Rotational.PIVOT_POS:
        ok &= _check(report, fails, "pivot_t2", t2, -margin_tol)
        if flushish:
            ok &= _check(report, fails, "pivot_rate", -drel, -rate_tol)
    else:
        ok &= _check(report, fails, "pivot_t1", t1, -margin_tol)
        if flushish:
            ok &= _check(report, fails, "pivot_rate", drel, -rate_tol)

    if hyp.ground_tan is Tangential.STICK:
        ok &= _check(report, fails, "gstick_g1", g1, -margin_tol)
        ok &= _check(report, fails, "gstick_g2", g2, -margin_tol)
    elif hyp.ground_tan is Tangential.SLIDE_POS:
        ok &= _check(report, fails, "gslide_rate", -dg, -rate_tol)
        ok &= _check(report, fails, "gother_margin", g2, -margin_tol)
    else:
        ok &= _check(report, fails, "gslide_rate", dg, -rate_tol)
        ok &= _check(report, fails, "gother_margin", g1, -margin_tol)

    if line:
        tg1 = half_face * f_gj - new.tau_g
        tg2 = half_face * f_gj + new.tau_g
        report["ground_torque_margins"] = (tg1, tg2)
        ok &= _check(report, fails, "line_tg1", tg1, -margin_tol)
        ok &= _check(report, fails, "line_tg2", tg2, -margin_tol)
    elif state.geom.kind == "line":
        # endpoint pivot leaving a flat face must rotate the free side up:
        # left endpoint (edge start) lifts the right side with CCW rotation
        dth = new.theta_o - state.theta_o
        edge = state.geom.index
        if hyp.ground_geom.kind == "vertex" and hyp.ground_geom.index == edge:
            ok &= _check(report, fails, "tip_rate", dth, -rate_tol)
        elif (
            hyp.ground_geom.kind == "vertex"
            and hyp.ground_geom.index == (edge + 1) % model.n
        ):
            ok &= _check(report, fails, "tip_rate", -dth, -rate_tol)

    # hand must stay within the object face
    gap_new = normalize_angle(new.theta_o - new.hand[2])
    report["gap"] = gap_new
    if hyp.hand_rot is Rotational.FLUSH:
        lo = new.c_h - l_h
        hi = new.c_h + l_h
    else:
        lo = hi = new.c_h
    over = max(model.face_x_lo - lo, hi - model.face_x_hi)
    if over > PEN_TOL:
        ok = False
        events.append(("overhang", over))
        report["overhang"] = over
    # during pivot the faces may only open on the free-endpoint side;
    # the gap crossing zero is the re-flattening event (a wrong-side gap of
    # order GAP_TOL is the boundary itself, not a crossing)
    if hyp.hand_rot is not Rotational.FLUSH:
        opening = pivot_endpoint_sign(hyp.hand_rot) * gap_new
        if opening < -2.0 * GAP_TOL:
            ok = False
            events.append(("gap_cross", gap_new))

    # object vertices may not penetrate the ground
    heights = world_vertices(new, model)[:, 1]
    support = {hyp.ground_geom.index}
    if hyp.ground_geom.kind == "line":
        support.add((hyp.ground_geom.index + 1) % model.n)
    min_free = min(
        (heights[i] for i in range(model.n) if i not in support), default=1.0
    )
    report["min_free_height"] = min_free
    if min_free < -PEN_TOL:
        ok = False
        events.append(("vertex_touch", min_free))

    degenerate = False
    if ok:
        actives = [
            v
            for v in (m1, m2, t1, t2, g1, g2, ds_h, dg, drel)
            if isinstance(v, float)
        ]
        degenerate = any(0.0 < abs(v) < TIE_BAND for v in actives)

    # the solved state is attached even when screening fails so the caller
    # can commit epsilon-scale boundary states at degenerate corners
    return CandidateResult(
        hyp,
        bool(ok),
        "; ".join(fails),
        new,
        report,
        degenerate,
        events,
    )


def candidate_hypotheses(state: RawState, model: ObjectModel) -> list[ModeHypothesis]:
    """Enumerate mode hypotheses in preference order for the current state."""
    geoms: list[GroundGeometry] = []
    if state.geom.kind == "line":
        e = state.geom.index
        geoms = [
            GroundGeometry("line", e),
            GroundGeometry("vertex", e),
            GroundGeometry("vertex", (e + 1) % model.n),
        ]
    else:
        k = state.geom.index
        # a face adjacent to the contact vertex may have come flat
        for e in ((k - 1) % model.n, k):
            flat = theta_flat_unwrapped(state.theta_o, model, e)
            if abs(flat - state.theta_o) < FLAT_TOL:
                geoms.append(GroundGeometry("line", e))
        geoms.append(GroundGeometry("vertex", k))

    gap = hand_gap(state)
    if abs(gap) <= 1e-5:
        # near-flush zone (sub-hundredth of a degree): enumerate all
        # rotational geometries; flush re-seats the microscopic gap
        rots = [Rotational.FLUSH, Rotational.PIVOT_POS, Rotational.PIVOT_NEG]
    elif gap < 0:
        rots = [Rotational.PIVOT_POS]  # contact pinned at the -l_h endpoint
    else:
        rots = [Rotational.PIVOT_NEG]

    tans = [Tangential.STICK, Tangential.SLIDE_POS, Tangential.SLIDE_NEG]
    out = []
    for gg in geoms:
        for hr in rots:
            for ht in tans:
                for gt in tans:
                    out.append(ModeHypothesis(gg, hr, ht, gt))
    return out


def resolve_step(
    state: RawState,
    x_tar: np.ndarray,
    model: ObjectModel,
    params: SimParams,
    margin_tol: float = MARGIN_TOL,
    rate_tol: float = RATE_TOL,
    jump_factor: float = 1.0,
):
    """Try hypotheses in preference order.

    Returns (accepted, event_candidate, diagnostics): `accepted` is the first
    fully consistent result or None; `event_candidate` is the best candidate
    that failed only through a bisectable boundary crossing, which the caller
    uses to shrink the substep onto the event.
    """
    diagnostics = []
    event_candidate = None
    for hyp in candidate_hypotheses(state, model):
        res = solve_candidate(
            state, x_tar, hyp, model, params, margin_tol, rate_tol, jump_factor
        )
        if res.consistent:
            return res, event_candidate, diagnostics
        if res.event_only and event_candidate is None:
            event_candidate = res
        diagnostics.append(
            {"mode": hyp.label(), "reason": res.reason or str(res.events)}
        )
    return None, event_candidate, diagnostics
