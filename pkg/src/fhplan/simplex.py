"""Dense two-phase primal simplex with variable bounds.

Solves
    minimize    c . x
    subject to  A x <= b,   lower <= x <= upper

with finite lower bounds and optionally infinite upper bounds. Designed
for the small cluster relaxations produced by the planner (a handful of
rows, up to a few hundred columns), favoring robustness over speed:
rows are equilibrated, Bland's rule prevents cycling, and nonbasic
variables may sit at either bound with bound-flip ratio tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_FEAS_TOL = 1e-7    # on equilibrated rows (max |coefficient| = 1)
_MAX_ITERS = 20000


@dataclass
class LpResult:
    status: str              # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float


def solve_lp(c, a_ub, b_ub, lower, upper) -> LpResult:
    """Minimize c.x subject to a_ub x <= b_ub and lower <= x <= upper."""
    c = np.asarray(c, dtype=float)
    a = np.atleast_2d(np.asarray(a_ub, dtype=float))
    b = np.asarray(b_ub, dtype=float)
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    n = c.shape[0]
    m = a.shape[0] if a.size else 0
    if a.size == 0:
        a = np.zeros((0, n))
        b = np.zeros(0)
    if not np.all(np.isfinite(lo)):
        raise ValueError("lower bounds must be finite")
    if np.any(hi < lo):
        return LpResult("infeasible", None, np.inf)

    # Shift to zero lower bounds: y = x - lo in [0, u], A y <= b - A lo.
    u = hi - lo
    b_shift = b - a @ lo if m else b
    const = float(c @ lo)

    # Row equilibration keeps tolerances meaningful when rate rows
    # (~1e10 coefficients) mix with fractional coefficient rows.
    scale = np.ones(m)
    for i in range(m):
        s = max(np.max(np.abs(a[i])) if n else 0.0, abs(b_shift[i]), 1e-300)
        scale[i] = 1.0 / s
    a_s = a * scale[:, None]
    b_s = b_shift * scale

    # Columns: n structural | m slacks | m artificials.
    # Rows with negative rhs are negated (slack coefficient -1) so every
    # artificial starts basic at a nonnegative value.
    total = n + 2 * m
    tab = np.zeros((m, total))
    tab[:, :n] = a_s
    rhs = b_s.copy()
    for i in range(m):
        if rhs[i] < 0:
            tab[i, :n] *= -1.0
            rhs[i] *= -1.0
            tab[i, n + i] = -1.0
        else:
            tab[i, n + i] = 1.0
        tab[i, n + m + i] = 1.0

    bounds_u = np.concatenate([u, np.full(m, np.inf), np.full(m, np.inf)])
    basis = np.arange(n + m, n + 2 * m)
    at_upper = np.zeros(total, dtype=bool)  # nonbasic variables at upper bound

    def basic_values():
        vals = rhs.copy()
        nb_upper = [j for j in range(total) if at_upper[j]]
        for j in nb_upper:
            vals -= tab[:, j] * bounds_u[j]
        return vals

    def run_phase(cost: np.ndarray) -> str:
        for _ in range(_MAX_ITERS):
            xb = basic_values()
            cb = cost[basis]
            # reduced costs d = cost - cb inv(B) A; tableau already holds inv(B) A
            d = cost - cb @ tab
            d[basis] = 0.0
            entering = -1
            for j in range(total):
                if j in basis_set:
                    continue
                if not at_upper[j] and d[j] < -_FEAS_TOL:
                    entering = j
                    break
                if at_upper[j] and d[j] > _FEAS_TOL:
                    entering = j
                    break
            if entering < 0:
                return "optimal"
            sign = -1.0 if at_upper[entering] else 1.0
            col = sign * tab[:, entering]
            # step limits: entering's opposite bound, basic lower (0), basic upper
            t_best = bounds_u[entering]
            leave_row, leave_to_upper = -1, False
            for i in range(m):
                if col[i] > _FEAS_TOL:
                    t = xb[i] / col[i]
                    if t < t_best - _FEAS_TOL or (
                            t < t_best + _FEAS_TOL and leave_row >= 0
                            and basis[i] < basis[leave_row]):
                        t_best, leave_row, leave_to_upper = max(t, 0.0), i, False
                elif col[i] < -_FEAS_TOL and np.isfinite(bounds_u[basis[i]]):
                    t = (bounds_u[basis[i]] - xb[i]) / (-col[i])
                    if t < t_best - _FEAS_TOL or (
                            t < t_best + _FEAS_TOL and leave_row >= 0
                            and basis[i] < basis[leave_row]):
                        t_best, leave_row, leave_to_upper = max(t, 0.0), i, True
            if not np.isfinite(t_best):
                return "unbounded"
            if leave_row < 0:
                # bound flip: entering runs to its other bound
                at_upper[entering] = not at_upper[entering]
                continue
            # pivot entering into leave_row
            piv = tab[leave_row, entering]
            tab[leave_row] /= piv
            rhs[leave_row] /= piv
            for i in range(m):
                if i != leave_row and tab[i, entering] != 0.0:
                    f = tab[i, entering]
                    tab[i] -= f * tab[leave_row]
                    rhs[i] -= f * rhs[leave_row]
            leaving = basis[leave_row]
            basis_set.discard(int(leaving))
            basis_set.add(int(entering))
            basis[leave_row] = entering
            at_upper[leaving] = leave_to_upper
            at_upper[entering] = False
        raise RuntimeError("simplex iteration limit exceeded")

    basis_set = set(int(j) for j in basis)

    # Phase 1: drive artificials to zero.
    cost1 = np.zeros(total)
    cost1[n + m:] = 1.0
    status = run_phase(cost1)
    xb = basic_values()
    art_sum = sum(max(float(xb[i]), 0.0) for i in range(m) if basis[i] >= n + m)
    if status != "optimal" or art_sum > _FEAS_TOL * max(1.0, float(np.max(np.abs(b_s))) if m else 1.0):
        return LpResult("infeasible", None, np.inf)

    # Phase 2: artificials frozen at zero.
    bounds_u[n + m:] = 0.0
    cost2 = np.zeros(total)
    cost2[:n] = c
    status = run_phase(cost2)
    if status != "optimal":
        return LpResult(status, None, -np.inf if status == "unbounded" else np.inf)

    xb = basic_values()
    y = np.where(at_upper[:total], bounds_u, 0.0)
    y[basis] = xb
    x = y[:n] + lo
    # clip roundoff excursions back into the box
    x = np.minimum(np.maximum(x, lo), np.where(np.isfinite(hi), hi, x))
    return LpResult("optimal", x, float(c @ x))
