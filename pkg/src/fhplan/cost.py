"""Techno-economic pricing of fronthaul plans.

Capex and opex are folded into a per-AP cost for each technology plus
per-DU equipment terms: fiber needs one optical terminal bundle per
``otn_split`` fiber-connected APs (counted by kappa), mmWave needs one
antenna device per DU that serves at least one mmWave AP (flagged by v).
Defaults are US-market estimates for a one-year horizon.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np


@dataclass
class CostParams:
    """All monetary and technology parameters, in US dollars."""
    onu_cost: float = 6502.0          # optical network unit per fiber AP
    fiber_om_annual: float = 2285.0   # fiber O&M per AP per year
    trench_per_m: float = 26.0        # trenching and burial per meter
    fiber_du_cost: float = 61727.0    # OLT + MUX + other, per OTN at the DU
    mmw_rx_cost: float = 6000.0       # mmWave receiver per AP
    mmw_om_annual: float = 13000.0    # mmWave O&M per AP per year
    mmw_du_cost: float = 34500.0      # massive-MIMO antenna device per DU
    years: int = 1                    # planning horizon
    otn_split: int = 16               # fiber links supported per OTN (1:split PON)
    du_pool_cost: float = 91035.0     # DU baseband pool; reported, not in the objective

    def __post_init__(self):
        money = (self.onu_cost, self.fiber_om_annual, self.trench_per_m,
                 self.fiber_du_cost, self.mmw_rx_cost, self.mmw_om_annual,
                 self.mmw_du_cost, self.du_pool_cost)
        if any(v < 0 for v in money):
            raise ValueError("monetary parameters must be >= 0")
        if self.otn_split < 1:
            raise ValueError("otn_split must be >= 1")
        if self.years < 1:
            raise ValueError("years must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CostBreakdown:
    """Objective value split by technology attribution."""
    fiber_total: float
    mmwave_total: float
    objective: float


def fiber_ap_cost(distance_m: float, params: CostParams) -> float:
    """Per-AP fiber cost: ONU + O&M over the horizon + trenching by distance."""
    if distance_m < 0:
        raise ValueError("distance must be >= 0")
    return (params.onu_cost + params.years * params.fiber_om_annual
            + params.trench_per_m * distance_m)


def mmwave_ap_cost(params: CostParams) -> float:
    """Per-AP mmWave cost: receiver + O&M over the horizon."""
    return params.mmw_rx_cost + params.years * params.mmw_om_annual


def evaluate_plan_cost(plan, scenario, links, params: CostParams) -> CostBreakdown:
    """Total plan cost: per-AP technology costs plus per-DU equipment terms.

    The DU fiber equipment (kappa OTNs) is attributed to the fiber share
    and the DU antenna device (v) to the mmWave share; the two shares sum
    to the objective.
    """
    n_aps = len(scenario.aps)
    n_dus = len(scenario.dus)
    u = np.asarray(plan.u)
    z = np.asarray(plan.z)
    v = np.asarray(plan.v)
    kappa = np.asarray(plan.kappa)
    if not (len(u) == len(z) == n_aps == len(links)):
        raise ValueError("plan/AP dimension mismatch")
    if not (len(v) == len(kappa) == n_dus):
        raise ValueError("plan/DU dimension mismatch")

    distances = np.array([links[a].distance_m for a in range(n_aps)])
    fiber_ap = (params.onu_cost + params.years * params.fiber_om_annual
                + params.trench_per_m * distances)
    mmw_ap = mmwave_ap_cost(params)

    fiber_total = float(u @ fiber_ap + kappa @ np.full(n_dus, params.fiber_du_cost))
    mmwave_total = float(z.sum() * mmw_ap + v @ np.full(n_dus, params.mmw_du_cost))
    return CostBreakdown(fiber_total=fiber_total, mmwave_total=mmwave_total,
                         objective=fiber_total + mmwave_total)
