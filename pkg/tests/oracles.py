"""Independent reference computations used by the test suite.

Deliberately written without reusing the package's solvers: the QP oracle
enumerates equality-constrained minimizers over all active subsets through a
null-space reduction and keeps the best feasible candidate.
"""

import itertools

import numpy as np


def qp_brute_force(H, g, A, b):
    """Global minimum of 1/2 x'Hx + g'x s.t. Ax <= b (H positive definite).

    Returns (x, objective) or (None, None) when no subset yields a feasible
    candidate (infeasible problem).
    """
    H = np.asarray(H, float)
    g = np.asarray(g, float)
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    n = H.shape[0]
    m = len(b)
    best_x, best_val = None, np.inf

    def objective(x):
        return 0.5 * x @ H @ x + g @ x

    for k in range(0, min(n, m) + 1):
        for subset in itertools.combinations(range(m), k):
            if k == 0:
                x = np.linalg.solve(H, -g)
            else:
                a_act = A[list(subset)]
                b_act = b[list(subset)]
                # particular solution + null-space reduction
                x_p, *_ = np.linalg.lstsq(a_act, b_act, rcond=None)
                if np.abs(a_act @ x_p - b_act).max() > 1e-9:
                    continue
                _, s, vt = np.linalg.svd(a_act)
                rank = int((s > 1e-12).sum())
                z = vt[rank:].T
                if z.shape[1] == 0:
                    x = x_p
                else:
                    y = np.linalg.solve(z.T @ H @ z, -z.T @ (H @ x_p + g))
                    x = x_p + z @ y
            if m and (A @ x - b).max() > 1e-9:
                continue
            val = objective(x)
            if val < best_val - 1e-15:
                best_val, best_x = val, x
    if best_x is None:
        return None, None
    return best_x, best_val
