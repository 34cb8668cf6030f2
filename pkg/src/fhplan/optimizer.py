"""Exact technology-selection MILP: build, relax, branch-and-bound, verify.

Decision variables per AP: u (fiber) and z (mmWave) with u + z = 1; per
DU: v (1 iff any cluster AP uses mmWave) and kappa (number of fiber OTN
bundles, the ceiling of fiber APs over the split ratio). Constraints:

  1-A  u + z = 1 per AP (binary)
  2-A  sum(u)/split <= kappa <= sum(u)/split + 1 - eps   per DU
  2-B  sum(z)/|cluster| <= v <= sum(z)                   per DU
  3-A  u R_fiber + z R_mmw >= threshold                  per AP
  3-B  sum(u R_fiber + z R_mmw) >= alpha * backhaul      per DU

No constraint couples two clusters, so the MILP separates per DU: each
cluster is solved to proven optimality by branch-and-bound over the u
binaries (then kappa and v if still fractional) with bounds from the
in-package bounded-variable simplex, and the fragments are concatenated.
A vectorized exhaustive enumerator doubles as the correctness oracle for
small clusters.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .cost import CostParams, evaluate_plan_cost, fiber_ap_cost, mmwave_ap_cost
from .channel import LinkBudget
from .scenario import Scenario
from .simplex import solve_lp

# Absolute pruning / integrality slack in dollars; costs sit at 1e4..1e8,
# so this is far below 1e-9 relative while safely above float noise.
_COST_TOL = 1e-6
_INT_TOL = 1e-9

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"


def rate_tolerance(reference: float) -> float:
    """Feasibility slack for rate sums: 1e-9 relative with a 1.0 floor.

    Rate constraints mix ~1e10-scale coefficients, so a fixed absolute
    slack would be either meaningless or below float resolution.
    """
    return 1e-9 * max(1.0, abs(reference))


@dataclass
class PlanningProblem:
    """One realization ready to optimize: coefficients indexed by AP/DU id."""
    scenario: Scenario
    links: list[LinkBudget]
    cost: CostParams
    alpha: float = 0.7
    epsilon: float = 1e-6
    # derived coefficient arrays (filled by build_problem)
    fiber_cost: np.ndarray = field(default=None, repr=False)
    mmw_cost: float = 0.0
    fiber_rate: np.ndarray = field(default=None, repr=False)
    mmw_rate: np.ndarray = field(default=None, repr=False)
    threshold: np.ndarray = field(default=None, repr=False)
    rate_target: np.ndarray = field(default=None, repr=False)  # alpha * backhaul per DU
    fiber_allowed: np.ndarray = field(default=None, repr=False)
    mmw_allowed: np.ndarray = field(default=None, repr=False)
    pruned: bool = False

    @property
    def n_aps(self) -> int:
        return len(self.scenario.aps)

    @property
    def n_dus(self) -> int:
        return len(self.scenario.dus)

    @property
    def n_binary_variables(self) -> int:
        """u and z per AP."""
        return 2 * self.n_aps

    @property
    def n_du_variables(self) -> int:
        """v and kappa per DU."""
        return 2 * self.n_dus

    def cluster(self, du_id: int) -> list[int]:
        return self.scenario.dus[du_id].cluster


@dataclass
class Plan:
    """Assignment vectors plus the evaluated objective."""
    u: np.ndarray
    z: np.ndarray
    v: np.ndarray
    kappa: np.ndarray
    objective: float
    status: str
    infeasible_reasons: list[str] = field(default_factory=list)

    def to_dict(self, problem: "PlanningProblem | None" = None) -> dict:
        tech = ["fiber" if ui else ("mmwave" if zi else "none")
                for ui, zi in zip(self.u, self.z)]
        out = {
            "status": self.status,
            "objective": float(self.objective),
            "ap_technology": tech,
            "du": [{"v": int(v), "kappa": int(k)} for v, k in zip(self.v, self.kappa)],
        }
        if self.infeasible_reasons:
            out["infeasible_reasons"] = list(self.infeasible_reasons)
        if problem is not None:
            report = check_feasibility(self, problem)
            out["constraint_slacks"] = {
                "capacity_per_ap": [float(s) for s in report.ap_slack],
                "backhaul_per_du": [float(s) for s in report.du_slack],
            }
            out["violations"] = list(report.violations)
        return out


@dataclass
class FeasibilityReport:
    """Constraint slacks of a plan; feasible iff no violation recorded."""
    ap_slack: np.ndarray   # constraint 3-A slack per AP (bits/s)
    du_slack: np.ndarray   # constraint 3-B slack per DU (bits/s)
    violations: list[str]

    @property
    def feasible(self) -> bool:
        return not self.violations


# ---------------------------------------------------------------------------
# Problem construction
# ---------------------------------------------------------------------------

def build_problem(scenario: Scenario, links: list[LinkBudget], cost_params: CostParams,
                  alpha: float = 0.7, epsilon: float = 1e-6) -> PlanningProblem:
    """Index the realization into coefficient vectors for the MILP."""
    n = len(scenario.aps)
    if len(links) != n:
        raise ValueError("links/AP dimension mismatch")
    if not (0 < alpha <= 1):
        raise ValueError("alpha must be in (0, 1]")
    if not (0 < epsilon < 1.0 / cost_params.otn_split):
        raise ValueError("epsilon must satisfy 0 < epsilon < 1/otn_split")
    seen: set[int] = set()
    for du in scenario.dus:
        if not du.cluster:
            raise ValueError(f"DU {du.id} has an empty cluster")
        if du.backhaul_rate is None or du.backhaul_rate <= 0:
            raise ValueError(f"DU {du.id} lacks a backhaul rate")
        seen.update(du.cluster)
    if seen != set(range(n)):
        raise ValueError("clusters do not partition the AP set")

    problem = PlanningProblem(scenario=scenario, links=links, cost=cost_params,
                              alpha=alpha, epsilon=epsilon)
    distances = np.array([links[a].distance_m for a in range(n)])
    problem.fiber_cost = np.array([fiber_ap_cost(d, cost_params) for d in distances])
    problem.mmw_cost = mmwave_ap_cost(cost_params)
    problem.fiber_rate = np.array([links[a].fiber_rate for a in range(n)])
    problem.mmw_rate = np.array([links[a].mmwave_rate for a in range(n)])
    thresholds = [scenario.aps[a].threshold for a in range(n)]
    if any(t is None for t in thresholds):
        raise ValueError("scenario has unset thresholds")
    problem.threshold = np.array(thresholds, dtype=float)
    problem.rate_target = np.array([alpha * du.backhaul_rate for du in scenario.dus])
    return problem


def prune_infeasible_arms(problem: PlanningProblem) -> PlanningProblem:
    """Mask technologies that cannot meet an AP's capacity threshold.

    An arm is allowed when its rate covers the AP threshold (with rate
    slack). APs with no allowed arm make the instance infeasible; that is
    recorded, not raised, so callers can report diagnostics.
    """
    tol = np.array([rate_tolerance(t) for t in problem.threshold])
    problem.fiber_allowed = problem.fiber_rate >= problem.threshold - tol
    problem.mmw_allowed = problem.mmw_rate >= problem.threshold - tol
    problem.pruned = True
    return problem


def _dead_aps(problem: PlanningProblem) -> list[int]:
    return [a for a in range(problem.n_aps)
            if not (problem.fiber_allowed[a] or problem.mmw_allowed[a])]


# ---------------------------------------------------------------------------
# LP relaxation
# ---------------------------------------------------------------------------

def _cluster_lp(problem: PlanningProblem, du_id: int,
                fixed_u: dict[int, int],
                v_bounds: tuple[float, float] = (0.0, 1.0),
                kappa_bounds: tuple[float, float] = (0.0, math.inf)):
    """Continuous relaxation of one cluster under partial fixings.

    Free APs keep u in [0, 1] (z = 1 - u substituted out); v and kappa are
    continuous within their bounds plus the coupling rows 2-A/2-B; 3-A is
    enforced through the allowed-arm masks (an AP with one allowed arm is
    fixed). Returns (status, bound, u_values) where u_values maps free AP
    ids to their fractional values.
    """
    cluster = problem.cluster(du_id)
    size = len(cluster)
    theta = problem.cost.otn_split
    fixed_cost = 0.0
    fixed_rate = 0.0
    fixed_u_sum = 0
    free: list[int] = []
    for a in cluster:
        allowed_f = problem.fiber_allowed[a]
        allowed_m = problem.mmw_allowed[a]
        if a in fixed_u:
            ua = fixed_u[a]
        elif allowed_f and allowed_m:
            free.append(a)
            continue
        elif allowed_f:
            ua = 1
        elif allowed_m:
            ua = 0
        else:
            return STATUS_INFEASIBLE, math.inf, {}
        if ua == 1:
            fixed_cost += problem.fiber_cost[a]
            fixed_rate += problem.fiber_rate[a]
            fixed_u_sum += 1
        else:
            fixed_cost += problem.mmw_cost
            fixed_rate += problem.mmw_rate[a]

    k = len(free)
    # variables: u_free (k) | v | kappa
    c = np.empty(k + 2)
    c[:k] = problem.fiber_cost[free] - problem.mmw_cost
    c[k] = problem.cost.mmw_du_cost
    c[k + 1] = problem.cost.fiber_du_cost
    constant = fixed_cost + problem.mmw_cost * k

    delta_rate = problem.fiber_rate[free] - problem.mmw_rate[free]
    base_rate = fixed_rate + problem.mmw_rate[free].sum()
    target = problem.rate_target[du_id]

    rows, rhs = [], []
    # 3-B:  sum u*dR >= target - base  ->  -sum u*dR <= base - target
    row = np.zeros(k + 2)
    row[:k] = -delta_rate
    rows.append(row)
    rhs.append(base_rate - target)
    # 2-B lower: v >= (size - sum u)/size  ->  -v - sum(u)/size <= -1 + fixed_u/size
    row = np.zeros(k + 2)
    row[:k] = -1.0 / size
    row[k] = -1.0
    rows.append(row)
    rhs.append(-1.0 + fixed_u_sum / size)
    # 2-B upper: v <= size - sum u
    row = np.zeros(k + 2)
    row[:k] = 1.0
    row[k] = 1.0
    rows.append(row)
    rhs.append(size - fixed_u_sum)
    # 2-A lower: kappa >= sum(u)/theta
    row = np.zeros(k + 2)
    row[:k] = 1.0 / theta
    row[k + 1] = -1.0
    rows.append(row)
    rhs.append(-fixed_u_sum / theta)
    # 2-A upper: kappa <= sum(u)/theta + 1 - eps
    row = np.zeros(k + 2)
    row[:k] = -1.0 / theta
    row[k + 1] = 1.0
    rows.append(row)
    rhs.append(fixed_u_sum / theta + 1.0 - problem.epsilon)

    lower = np.zeros(k + 2)
    upper = np.empty(k + 2)
    upper[:k] = 1.0
    lower[k], upper[k] = v_bounds
    lower[k + 1], upper[k + 1] = kappa_bounds

    res = solve_lp(c, np.array(rows), np.array(rhs), lower, upper)
    if res.status != "optimal":
        return STATUS_INFEASIBLE, math.inf, None
    u_map: dict[int, float] = {}
    for a in cluster:
        if a in fixed_u:
            u_map[a] = float(fixed_u[a])
        elif problem.fiber_allowed[a] and not problem.mmw_allowed[a]:
            u_map[a] = 1.0
        elif problem.mmw_allowed[a] and not problem.fiber_allowed[a]:
            u_map[a] = 0.0
    for i, a in enumerate(free):
        u_map[a] = float(res.x[i])
    sol = {"u": u_map, "v": float(res.x[k]), "kappa": float(res.x[k + 1])}
    return STATUS_OPTIMAL, res.objective + constant, sol


def lp_relaxation(problem: PlanningProblem, fixed: dict | None = None):
    """Lower bound from the continuous relaxation of the full problem.

    ``fixed`` may pin per-AP ``u`` values ({"u": {ap_id: 0|1}}), per-DU
    ``v`` ({"v": {du_id: value}}) and ``kappa`` likewise. Returns
    (status, bound, fractional) where fractional maps "u"/"v"/"kappa" to
    per-index relaxation values. With every variable fixed the bound
    equals the plan cost exactly.
    """
    if not problem.pruned:
        prune_infeasible_arms(problem)
    fixed = fixed or {}
    fixed_u = {int(k): int(vv) for k, vv in fixed.get("u", {}).items()}
    total = 0.0
    frac = {"u": {}, "v": {}, "kappa": {}}
    for du in problem.scenario.dus:
        vb = fixed.get("v", {}).get(du.id)
        kb = fixed.get("kappa", {}).get(du.id)
        status, bound, sol = _cluster_lp(
            problem, du.id,
            {a: fixed_u[a] for a in du.cluster if a in fixed_u},
            v_bounds=(vb, vb) if vb is not None else (0.0, 1.0),
            kappa_bounds=(kb, kb) if kb is not None else (0.0, math.inf))
        if status != STATUS_OPTIMAL:
            return STATUS_INFEASIBLE, math.inf, frac
        total += bound
        frac["u"].update(sol["u"])
        frac["v"][du.id] = sol["v"]
        frac["kappa"][du.id] = sol["kappa"]
    return STATUS_OPTIMAL, total, frac


# ---------------------------------------------------------------------------
# Exact per-cluster search
# ---------------------------------------------------------------------------

def _forced_fragment_cost(problem: PlanningProblem, du_id: int,
                          u_pattern: dict[int, int]):
    """Cost and (v, kappa) forced by an integral u pattern on one cluster."""
    cluster = problem.cluster(du_id)
    theta = problem.cost.otn_split
    n_fiber = sum(u_pattern[a] for a in cluster)
    n_mmw = len(cluster) - n_fiber
    kappa = math.ceil(n_fiber / theta)
    v = 1 if n_mmw > 0 else 0
    cost = (sum(problem.fiber_cost[a] for a in cluster if u_pattern[a] == 1)
            + n_mmw * problem.mmw_cost
            + v * problem.cost.mmw_du_cost + kappa * problem.cost.fiber_du_cost)
    rate = (sum(problem.fiber_rate[a] for a in cluster if u_pattern[a] == 1)
            + sum(problem.mmw_rate[a] for a in cluster if u_pattern[a] == 0))
    target = problem.rate_target[du_id]
    feasible = rate >= target - rate_tolerance(target)
    return cost, v, kappa, feasible


def _solve_cluster_bnb(problem: PlanningProblem, du_id: int):
    """Branch-and-bound over one cluster; returns a fragment dict or None.

    Nodes carry partial u fixings (plus kappa/v bounds once every u is
    integral) and are explored best-bound first with deterministic
    tie-breaks. Pruning uses an absolute slack far below the cost scale,
    so the returned fragment matches exhaustive enumeration.
    """
    cluster = problem.cluster(du_id)
    for a in cluster:
        if not (problem.fiber_allowed[a] or problem.mmw_allowed[a]):
            return None

    status, bound, sol = _cluster_lp_node(problem, du_id, {}, None, None)
    if status != STATUS_OPTIMAL:
        return None

    best_cost = math.inf
    best: dict | None = None
    counter = 0
    heap = [(bound, counter, {}, None, None, sol)]
    while heap:
        bound, _, fixed_u, v_fix, kappa_bnd, sol = heapq.heappop(heap)
        if bound >= best_cost - _COST_TOL:
            continue
        # most fractional u, ties to the lowest AP id
        branch_ap, branch_score = -1, -1.0
        for a in sorted(sol["u"]):
            fr = abs(sol["u"][a] - round(sol["u"][a]))
            if fr > _INT_TOL and fr > branch_score + 1e-12:
                branch_ap, branch_score = a, fr
        if branch_ap >= 0:
            for val in (0, 1):
                child = dict(fixed_u)
                child[branch_ap] = val
                st, bd, child_sol = _cluster_lp_node(problem, du_id, child, v_fix, kappa_bnd)
                if st == STATUS_OPTIMAL and bd < best_cost - _COST_TOL:
                    counter += 1
                    heapq.heappush(heap, (bd, counter, child, v_fix, kappa_bnd, child_sol))
            continue
        # u integral; branch kappa to its ceiling window, then v
        if abs(sol["kappa"] - round(sol["kappa"])) > _INT_TOL:
            for child_bnd in ((0.0, math.floor(sol["kappa"])),
                              (math.ceil(sol["kappa"]), math.inf)):
                st, bd, child_sol = _cluster_lp_node(problem, du_id, fixed_u, v_fix, child_bnd)
                if st == STATUS_OPTIMAL and bd < best_cost - _COST_TOL:
                    counter += 1
                    heapq.heappush(heap, (bd, counter, fixed_u, v_fix, child_bnd, child_sol))
            continue
        if abs(sol["v"] - round(sol["v"])) > _INT_TOL:
            for vfx in (0, 1):
                st, bd, child_sol = _cluster_lp_node(problem, du_id, fixed_u, vfx, kappa_bnd)
                if st == STATUS_OPTIMAL and bd < best_cost - _COST_TOL:
                    counter += 1
                    heapq.heappush(heap, (bd, counter, fixed_u, vfx, kappa_bnd, child_sol))
            continue
        # fully integral node: exact cost via the forcing rules
        u_pattern = {a: int(round(val)) for a, val in sol["u"].items()}
        cost, v, kappa, feasible = _forced_fragment_cost(problem, du_id, u_pattern)
        if feasible and cost < best_cost - _COST_TOL:
            best_cost = cost
            best = {"u": u_pattern, "v": v, "kappa": kappa, "objective": cost}
    return best


def _cluster_lp_node(problem: PlanningProblem, du_id: int, fixed_u: dict[int, int],
                     v_fix, kappa_bnd):
    v_bounds = (float(v_fix), float(v_fix)) if v_fix is not None else (0.0, 1.0)
    kappa_bounds = tuple(kappa_bnd) if kappa_bnd is not None else (0.0, math.inf)
    return _cluster_lp(problem, du_id, fixed_u, v_bounds, kappa_bounds)


def solve_bnb(problem: PlanningProblem) -> Plan:
    """Proven-optimal plan: per-cluster branch-and-bound, concatenated.

    No constraint couples clusters, so the concatenation of per-cluster
    optima is the optimum of the joint program (verified against joint
    enumeration in the tests). Infeasible instances return a diagnostic
    plan rather than raising.
    """
    if not problem.pruned:
        prune_infeasible_arms(problem)
    n, w = problem.n_aps, problem.n_dus
    u = np.zeros(n, dtype=np.int8)
    z = np.zeros(n, dtype=np.int8)
    v = np.zeros(w, dtype=np.int8)
    kappa = np.zeros(w, dtype=np.int64)
    reasons = [f"AP {a}: no technology meets threshold" for a in _dead_aps(problem)]
    fragments = []
    if not reasons:
        for du in problem.scenario.dus:
            frag = _solve_cluster_bnb(problem, du.id)
            if frag is None:
                reasons.append(f"DU {du.id}: no feasible technology assignment")
            else:
                fragments.append((du.id, frag))
    if reasons:
        return Plan(u=u, z=z, v=v, kappa=kappa, objective=math.inf,
                    status=STATUS_INFEASIBLE, infeasible_reasons=reasons)
    total = 0.0
    for du_id, frag in fragments:
        for a, ua in frag["u"].items():
            u[a] = ua
            z[a] = 1 - ua
        v[du_id] = frag["v"]
        kappa[du_id] = frag["kappa"]
        total += frag["objective"]
    plan = Plan(u=u, z=z, v=v, kappa=kappa, objective=total, status=STATUS_OPTIMAL)
    _assert_forcing(plan, problem)
    return plan


def _assert_forcing(plan: Plan, problem: PlanningProblem):
    """Post-solve invariants: kappa is the exact ceiling, v the indicator."""
    theta = problem.cost.otn_split
    for du in problem.scenario.dus:
        n_fiber = int(plan.u[du.cluster].sum())
        n_mmw = int(plan.z[du.cluster].sum())
        if plan.kappa[du.id] != math.ceil(n_fiber / theta):
            raise AssertionError(f"kappa forcing violated at DU {du.id}")
        if plan.v[du.id] != (1 if n_mmw > 0 else 0):
            raise AssertionError(f"v forcing violated at DU {du.id}")


def solve_cluster_bruteforce(problem: PlanningProblem, du_id: int):
    """Exhaustive minimum over all 2^|cluster| assignments (test oracle).

    Returns the same fragment dict shape as the branch-and-bound path, or
    None when no assignment is feasible. Clusters above 20 APs are
    rejected.
    """
    if not problem.pruned:
        prune_infeasible_arms(problem)
    cluster = problem.cluster(du_id)
    size = len(cluster)
    if size > 20:
        raise ValueError(f"cluster of {size} APs too large for enumeration")
    idx = np.array(cluster)
    patterns = ((np.arange(2 ** size)[:, None] >> np.arange(size)[None, :]) & 1)
    fiber_ok = problem.fiber_allowed[idx]
    mmw_ok = problem.mmw_allowed[idx]
    allowed = np.where(patterns == 1, fiber_ok[None, :], mmw_ok[None, :]).all(axis=1)
    rates = patterns @ problem.fiber_rate[idx] + (1 - patterns) @ problem.mmw_rate[idx]
    target = problem.rate_target[du_id]
    feasible = allowed & (rates >= target - rate_tolerance(target))
    if not np.any(feasible):
        return None
    n_fiber = patterns.sum(axis=1)
    kappa = np.ceil(n_fiber / problem.cost.otn_split)
    v = (n_fiber < size).astype(float)
    costs = (patterns @ problem.fiber_cost[idx]
             + (size - n_fiber) * problem.mmw_cost
             + kappa * problem.cost.fiber_du_cost + v * problem.cost.mmw_du_cost)
    costs = np.where(feasible, costs, np.inf)
    best = int(np.argmin(costs))
    pattern = {int(a): int(patterns[best, j]) for j, a in enumerate(cluster)}
    return {"u": pattern, "v": int(v[best]), "kappa": int(kappa[best]),
            "objective": float(costs[best])}


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

def check_feasibility(plan: Plan, problem: PlanningProblem) -> FeasibilityReport:
    """Verify every constraint row; integer logic exactly, rates with slack."""
    n, w = problem.n_aps, problem.n_dus
    u, z = np.asarray(plan.u), np.asarray(plan.z)
    v, kappa = np.asarray(plan.v), np.asarray(plan.kappa)
    if len(u) != n or len(z) != n or len(v) != w or len(kappa) != w:
        raise ValueError("plan dimensions do not match the problem")
    violations: list[str] = []
    for a in range(n):
        if u[a] not in (0, 1) or z[a] not in (0, 1) or u[a] + z[a] != 1:
            violations.append(f"1-A: AP {a} must select exactly one technology")
    ap_slack = u * problem.fiber_rate + z * problem.mmw_rate - problem.threshold
    for a in range(n):
        if ap_slack[a] < -rate_tolerance(problem.threshold[a]):
            violations.append(f"3-A: AP {a} capacity below threshold")
    du_slack = np.zeros(w)
    theta = problem.cost.otn_split
    for du in problem.scenario.dus:
        members = np.array(du.cluster)
        n_fiber = int(u[members].sum())
        n_mmw = int(z[members].sum())
        if v[du.id] not in (0, 1):
            violations.append(f"1-B: DU {du.id} v must be binary")
        if kappa[du.id] != int(kappa[du.id]) or kappa[du.id] < 0:
            violations.append(f"1-C: DU {du.id} kappa must be a nonnegative integer")
        lo = n_fiber / theta
        hi = n_fiber / theta + 1.0 - problem.epsilon
        if not (lo - 1e-12 <= kappa[du.id] <= hi + 1e-12):
            violations.append(f"2-A: DU {du.id} OTN count outside ceiling window")
        if not (n_mmw / len(members) - 1e-12 <= v[du.id] <= n_mmw + 1e-12):
            violations.append(f"2-B: DU {du.id} antenna flag inconsistent")
        rate = float(u[members] @ problem.fiber_rate[members]
                     + z[members] @ problem.mmw_rate[members])
        target = problem.rate_target[du.id]
        du_slack[du.id] = rate - target
        if du_slack[du.id] < -rate_tolerance(target):
            violations.append(f"3-B: DU {du.id} aggregate rate below backhaul share")
    return FeasibilityReport(ap_slack=ap_slack, du_slack=du_slack, violations=violations)
