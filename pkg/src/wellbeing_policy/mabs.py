"""Hourly local-production / local-consumption simulation and policy KPIs.

Agents: PV and nano-hydro generators (per-unit profiles scaled by size), a
battery, the power company (grid tariff) and the consumers (demand profile).
Each hour renewables serve demand first, surplus charges the battery and
the rest is curtailed; a deficit is met from the battery, then the grid.

The hour loop runs on numpy arrays so a whole batch of candidate policies
advances together. All arithmetic is elementwise, which keeps results
bit-identical however the batch is split.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError, SimulationError
from .sensors import HOURS_PER_YEAR, DemandProfile, GenerationProfile

BALANCE_TOL = 1e-9  # kWh


@dataclass(frozen=True)
class PolicyParams:
    pv_capacity: float = 0.0  # kW
    hydro_drop: float = 0.0  # m of effective drop
    battery_capacity: float = 0.0  # kWh
    k: int = 0

    def __post_init__(self):
        for name in ("pv_capacity", "hydro_drop", "battery_capacity"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be finite and nonnegative, got {v}")


@dataclass(frozen=True)
class AgentConfig:
    pv_unit_cost: float = 250_000.0  # JPY per kW
    pv_life: float = 20.0  # years
    hydro_unit_cost: float = 1_500_000.0  # JPY per m of drop
    hydro_life: float = 40.0
    battery_unit_cost: float = 100_000.0  # JPY per kWh
    battery_life: float = 15.0
    battery_efficiency: float = 0.9  # applied on discharge
    grid_tariff: float = 27.0  # JPY per kWh bought from the power company
    consignment_charge: float = 5.0  # JPY per locally delivered kWh
    # which spend components stay in the region
    in_region: dict = field(
        default_factory=lambda: {"pv": True, "hydro": True, "battery": True, "consignment": True}
    )

    def __post_init__(self):
        for name in ("pv_unit_cost", "hydro_unit_cost", "battery_unit_cost", "grid_tariff", "consignment_charge"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be finite and nonnegative, got {v}")
        for name in ("pv_life", "hydro_life", "battery_life"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if not 0.0 < self.battery_efficiency <= 1.0:
            raise DomainError(f"battery_efficiency must lie in (0, 1], got {self.battery_efficiency}")
        unknown = set(self.in_region) - set(LOCAL_COMPONENTS)
        if unknown:
            raise DomainError(f"unknown in_region components {sorted(unknown)}")

    def to_dict(self) -> dict:
        return asdict(self)


LOCAL_COMPONENTS = ("pv", "hydro", "battery", "consignment")


class StepFlows(NamedTuple):
    charge: object  # battery content after the step
    direct: object  # renewable energy consumed directly
    charged: object  # energy put into the battery
    curtailed: object
    discharged: object  # energy delivered from the battery (after losses)
    imported: object


def dispatch_step(charge, generation, demand, capacity, efficiency) -> StepFlows:
    """One hour of the priority rule; works on floats or equally shaped arrays."""
    direct = np.minimum(generation, demand)
    surplus = generation - direct
    charged = np.minimum(surplus, capacity - charge)
    curtailed = surplus - charged
    charge = np.minimum(charge + charged, capacity)
    deficit = demand - direct
    available = charge * efficiency
    discharged = np.minimum(deficit, available)
    charge = np.where(discharged >= available, 0.0, np.maximum(charge - discharged / efficiency, 0.0))
    imported = deficit - discharged
    return StepFlows(charge, direct, charged, curtailed, discharged, imported)


def balance_error(generation, demand, f: StepFlows):
    """generation + discharge + import - (demand + charge + curtailment)."""
    return (generation + f.discharged + f.imported) - (demand + f.charged + f.curtailed)


@dataclass(frozen=True)
class HourlyState:
    capacity: float
    charge: float = 0.0
    renewable_consumed: float = 0.0
    grid_imported: float = 0.0
    curtailed: float = 0.0
    last: StepFlows | None = None

    def __post_init__(self):
        if not (0.0 <= self.charge <= self.capacity):
            raise DomainError(f"battery charge {self.charge} outside [0, {self.capacity}]")


def dispatch_hour(state: HourlyState, generation: float, demand: float, config: AgentConfig) -> HourlyState:
    if generation < 0 or demand < 0:
        raise DomainError("generation and demand must be nonnegative")
    f = dispatch_step(state.charge, generation, demand, state.capacity, config.battery_efficiency)
    f = StepFlows(*(float(v) for v in f))
    err = balance_error(generation, demand, f)
    assert abs(err) <= BALANCE_TOL, f"energy balance violated by {err} kWh"
    return HourlyState(
        capacity=state.capacity,
        charge=f.charge,
        renewable_consumed=state.renewable_consumed + f.direct + f.discharged,
        grid_imported=state.grid_imported + f.imported,
        curtailed=state.curtailed + f.curtailed,
        last=f,
    )


@dataclass
class PolicyIndices:
    cost_p: float  # JPY/yr borne by residents
    utilization_u: float
    circulation_d: float
    grid_purchase: float  # JPY/yr paid to the power company
    annual_pv_kwh: float
    annual_hydro_kwh: float
    curtailed_kwh: float
    grid_import_kwh: float = 0.0
    renewable_served_kwh: float = 0.0
    local_spend: float = 0.0

    def as_tuple(self) -> tuple[float, float, float]:
        """(p, u, d): the three core indices."""
        return (self.cost_p, self.utilization_u, self.circulation_d)


def cost_breakdown(params, grid_import_kwh, config: AgentConfig, local_delivered_kwh=0.0) -> dict:
    """Annual spend per component. ``params`` fields may be scalars or arrays."""
    return {
        "grid": config.grid_tariff * grid_import_kwh,
        "pv": config.pv_unit_cost * params.pv_capacity / config.pv_life,
        "hydro": config.hydro_unit_cost * params.hydro_drop / config.hydro_life,
        "battery": config.battery_unit_cost * params.battery_capacity / config.battery_life,
        "consignment": config.consignment_charge * local_delivered_kwh,
    }


def _total(breakdown: dict):
    return breakdown["grid"] + breakdown["pv"] + breakdown["hydro"] + breakdown["battery"] + breakdown["consignment"]


def annual_cost(params, grid_import_kwh, config: AgentConfig, local_delivered_kwh=0.0):
    """Grid purchases + straight-line amortized facilities + consignment on local kWh."""
    for name in ("pv_life", "hydro_life", "battery_life"):
        if not getattr(config, name) > 0:
            raise DomainError(f"{name} must be positive")
    return _total(cost_breakdown(params, grid_import_kwh, config, local_delivered_kwh))


def utilization_rate(renewable_consumed_kwh, total_demand_kwh):
    if np.any(np.asarray(total_demand_kwh) <= 0):
        raise DomainError("total demand must be positive")
    return np.minimum(np.asarray(renewable_consumed_kwh) / total_demand_kwh, 1.0)[()]


def local_spend(breakdown: dict, config: AgentConfig):
    out = 0.0
    for comp in LOCAL_COMPONENTS:
        if config.in_region.get(comp, False):
            out = out + breakdown[comp]
    return out


def circulation_rate(breakdown: dict, config: AgentConfig):
    """Share of the residents' spend that stays in the region."""
    cost = _total(breakdown)
    if np.any(np.asarray(cost) <= 0):
        raise DomainError("total cost must be positive")
    return np.minimum(local_spend(breakdown, config) / cost, 1.0)[()]


class _Sizes(NamedTuple):
    pv_capacity: np.ndarray
    hydro_drop: np.ndarray
    battery_capacity: np.ndarray


@dataclass
class BatchResult:
    pv_capacity: np.ndarray
    hydro_drop: np.ndarray
    battery_capacity: np.ndarray
    cost_p: np.ndarray
    utilization_u: np.ndarray
    circulation_d: np.ndarray
    grid_purchase: np.ndarray
    annual_pv_kwh: np.ndarray
    annual_hydro_kwh: np.ndarray
    curtailed_kwh: np.ndarray
    grid_import_kwh: np.ndarray
    renewable_served_kwh: np.ndarray
    local_spend: np.ndarray
    max_balance_error: float = 0.0

    def __len__(self) -> int:
        return len(self.cost_p)

    def indices(self, i: int) -> PolicyIndices:
        return PolicyIndices(
            cost_p=float(self.cost_p[i]),
            utilization_u=float(self.utilization_u[i]),
            circulation_d=float(self.circulation_d[i]),
            grid_purchase=float(self.grid_purchase[i]),
            annual_pv_kwh=float(self.annual_pv_kwh[i]),
            annual_hydro_kwh=float(self.annual_hydro_kwh[i]),
            curtailed_kwh=float(self.curtailed_kwh[i]),
            grid_import_kwh=float(self.grid_import_kwh[i]),
            renewable_served_kwh=float(self.renewable_served_kwh[i]),
            local_spend=float(self.local_spend[i]),
        )


def _hourly(profile, name):
    arr = np.asarray(getattr(profile, "hourly", profile), dtype=float)
    if arr.shape != (HOURS_PER_YEAR,):
        raise DomainError(f"{name} profile must have {HOURS_PER_YEAR} hours, got {arr.shape}")
    return arr


def simulate_batch(
    pv_capacity,
    hydro_drop,
    battery_capacity,
    pv_profile: GenerationProfile | np.ndarray,
    hydro_profile: GenerationProfile | np.ndarray,
    demand: DemandProfile | np.ndarray,
    config: AgentConfig,
    check_balance: bool = True,
) -> BatchResult:
    """Simulate a year for many policies at once (one array element per policy)."""
    pv = np.atleast_1d(np.asarray(pv_capacity, dtype=float))
    hy = np.atleast_1d(np.asarray(hydro_drop, dtype=float))
    cap = np.atleast_1d(np.asarray(battery_capacity, dtype=float))
    if not (pv.shape == hy.shape == cap.shape) or pv.ndim != 1:
        raise DomainError("size arrays must be 1-d and equally long")
    for name, a in (("pv_capacity", pv), ("hydro_drop", hy), ("battery_capacity", cap)):
        if not np.all(np.isfinite(a)) or np.any(a < 0):
            raise DomainError(f"{name} must be finite and nonnegative")
    pvp = _hourly(pv_profile, "pv")
    hyp = _hourly(hydro_profile, "hydro")
    dem = _hourly(demand, "demand")
    eff = config.battery_efficiency

    n = len(pv)
    charge = np.zeros(n)
    renewable = np.zeros(n)
    imported = np.zeros(n)
    curtailed = np.zeros(n)
    demand_total = 0.0
    worst = 0.0
    for h in range(HOURS_PER_YEAR):
        gen = pv * pvp[h] + hy * hyp[h]
        d = dem[h]
        f = dispatch_step(charge, gen, d, cap, eff)
        if check_balance:
            errs = np.abs(balance_error(gen, d, f))
            err = float(errs.max()) if n else 0.0
            if not err <= BALANCE_TOL:
                i = int(np.argmax(errs))
                raise SimulationError(f"energy balance violated by {err} kWh at hour {h}", index=i)
            worst = max(worst, err)
        charge = f.charge
        renewable += f.direct + f.discharged
        imported += f.imported
        curtailed += f.curtailed
        demand_total += d

    if demand_total <= 0:
        raise DomainError("annual demand must be positive")
    pv_unit = float(math.fsum(pvp))
    hy_unit = float(math.fsum(hyp))
    sizes = _Sizes(pv, hy, cap)
    br = cost_breakdown(sizes, imported, config, renewable)
    cost = _total(br)
    if n and np.any(cost <= 0):
        raise DomainError("total cost must be positive; check tariff and unit costs")
    return BatchResult(
        pv_capacity=pv,
        hydro_drop=hy,
        battery_capacity=cap,
        cost_p=cost,
        utilization_u=np.minimum(renewable / demand_total, 1.0),
        circulation_d=np.minimum(local_spend(br, config) / cost, 1.0),
        grid_purchase=br["grid"],
        annual_pv_kwh=pv * pv_unit,
        annual_hydro_kwh=hy * hy_unit,
        curtailed_kwh=curtailed,
        grid_import_kwh=imported,
        renewable_served_kwh=renewable,
        local_spend=np.asarray(local_spend(br, config), dtype=float) * np.ones(n),
        max_balance_error=worst,
    )


def simulate_year(
    params: PolicyParams,
    pv_profile: GenerationProfile | np.ndarray,
    hydro_profile: GenerationProfile | np.ndarray,
    demand: DemandProfile | np.ndarray,
    config: AgentConfig,
) -> PolicyIndices:
    res = simulate_batch(
        [params.pv_capacity], [params.hydro_drop], [params.battery_capacity],
        pv_profile, hydro_profile, demand, config,
    )
    return res.indices(0)
