"""Small dense quadratic programming for the impedance-target update.

Strictly convex objective over three variables with a modest number of
inequality rows.  Solved by the Goldfarb-Idnani dual active-set method
(starts from the unconstrained optimum, adds most-violated constraints),
with an exhaustive KKT-subset sweep as a fallback for degenerate cases.
Deterministic: ties break on the lowest row index.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

KKT_TOL = 1e-8


class QPInfeasible(RuntimeError):
    def __init__(self, violated_rows):
        super().__init__(f"QP infeasible; conflicting rows {violated_rows}")
        self.violated_rows = list(violated_rows)


@dataclass
class QPProblem:
    """min 1/2 x^T H x + g^T x  s.t.  A x <= b."""

    H: np.ndarray
    g: np.ndarray
    A: np.ndarray
    b: np.ndarray
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        self.A = np.asarray(self.A, dtype=float).reshape(-1, self.H.shape[0])
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if not self.labels:
            self.labels = [f"row{i}" for i in range(len(self.b))]
        w = np.linalg.eigvalsh(0.5 * (self.H + self.H.T))
        if w[0] <= 0:
            raise ValueError("cost matrix must be positive definite")


@dataclass
class QPSolution:
    x: np.ndarray
    active: list
    duals: np.ndarray          # multipliers for active rows, same order
    kkt: dict
    iterations: int
    used_fallback: bool = False

    @property
    def max_kkt_residual(self) -> float:
        return max(self.kkt.values())


def _kkt_residuals(qp: QPProblem, x, active, duals) -> dict:
    grad = qp.H @ x + qp.g
    for i, u in zip(active, duals):
        grad = grad + u * qp.A[i]
    primal = float(max(0.0, (qp.A @ x - qp.b).max())) if len(qp.b) else 0.0
    dual = float(max(0.0, -(duals.min() if len(duals) else 0.0)))
    comp = 0.0
    for i, u in zip(active, duals):
        comp = max(comp, abs(u * float(qp.A[i] @ x - qp.b[i])))
    return {
        "stationarity": float(np.abs(grad).max()),
        "primal": primal,
        "dual": dual,
        "complementarity": comp,
    }


def solve_qp(qp: QPProblem, max_iter: int = 200) -> QPSolution:
    """Dual active-set solve; falls back to subset enumeration if needed."""
    try:
        sol = _goldfarb_idnani(qp, max_iter)
        if sol.max_kkt_residual < KKT_TOL:
            return sol
    except QPInfeasible:
        raise
    except RuntimeError:
        pass
    sol = _exhaustive(qp)
    sol.used_fallback = True
    return sol


def _goldfarb_idnani(qp: QPProblem, max_iter: int) -> QPSolution:
    h_inv = np.linalg.inv(qp.H)
    x = -h_inv @ qp.g
    active: list = []
    duals: list = []
    m = len(qp.b)
    for it in range(max_iter):
        slack = qp.b - qp.A @ x if m else np.zeros(0)
        worst = None
        worst_v = 1e-12 * (1.0 + float(np.abs(qp.b).max()) if m else 1.0)
        for j in range(m):
            if j in active:
                continue
            if -slack[j] > worst_v:
                worst_v = -slack[j]
                worst = j
        if worst is None:
            u = np.array(duals)
            return QPSolution(x, list(active), u, _kkt_residuals(qp, x, active, u), it)
        n_p = qp.A[worst]
        # inner loop: take partial (dual) steps until the constraint is added
        for _ in range(m + 2):
            if active:
                n_mat = qp.A[active].T  # (n, k)
                s = np.linalg.solve(n_mat.T @ h_inv @ n_mat, n_mat.T @ h_inv)
                h_red = h_inv - h_inv @ n_mat @ s
                r = s @ n_p
            else:
                h_red = h_inv
                r = np.zeros(0)
            z = h_red @ n_p
            denom = float(z @ n_p)
            # dual blocking step
            t1 = np.inf
            blocker = -1
            for idx, (u_i, r_i) in enumerate(zip(duals, r)):
                if r_i > 1e-14 and u_i / r_i < t1:
                    t1 = u_i / r_i
                    blocker = idx
            viol = float(n_p @ x - qp.b[worst])
            t2 = viol / denom if denom > 1e-14 else np.inf
            t = min(t1, t2)
            if not np.isfinite(t):
                raise QPInfeasible([qp.labels[worst]] + [qp.labels[i] for i in active])
            x = x - t * z
            duals = [u_i - t * r_i for u_i, r_i in zip(duals, r)]
            if t == t2 and np.isfinite(t2):
                active.append(worst)
                duals.append(t)
                break
            # drop the blocking constraint and continue with the same target row
            active.pop(blocker)
            duals.pop(blocker)
        else:
            raise RuntimeError("dual step limit")
    raise RuntimeError("iteration limit")


def _exhaustive(qp: QPProblem) -> QPSolution:
    """Enumerate KKT systems over active subsets; first consistent wins.

    For a strictly convex QP any KKT-consistent point is the global optimum.
    """
    n = qp.H.shape[0]
    m = len(qp.b)
    best = None
    for k in range(0, min(n, m) + 1):
        for subset in itertools.combinations(range(m), k):
            a_act = qp.A[list(subset)]
            kkt = np.zeros((n + k, n + k))
            kkt[:n, :n] = qp.H
            if k:
                kkt[:n, n:] = a_act.T
                kkt[n:, :n] = a_act
            rhs = np.concatenate([-qp.g, qp.b[list(subset)]])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            x, u = sol[:n], sol[n:]
            if len(u) and u.min() < -1e-12:
                continue
            if m and (qp.A @ x - qp.b).max() > 1e-10:
                continue
            duals = np.asarray(u)
            res = _kkt_residuals(qp, x, list(subset), duals)
            cand = QPSolution(x, list(subset), duals, res, 0)
            if max(res.values()) < KKT_TOL:
                return cand
            if best is None:
                best = cand
    if best is None:
        raise QPInfeasible(qp.labels)
    return best


def objective_value(qp: QPProblem, x: np.ndarray) -> float:
    return float(0.5 * x @ qp.H @ x + qp.g @ x)
