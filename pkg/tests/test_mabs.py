import numpy as np
import pytest

from wellbeing_policy.errors import DomainError
from wellbeing_policy.mabs import (
    AgentConfig,
    HourlyState,
    PolicyParams,
    annual_cost,
    balance_error,
    circulation_rate,
    cost_breakdown,
    dispatch_hour,
    dispatch_step,
    simulate_batch,
    simulate_year,
    utilization_rate,
)
from wellbeing_policy.sensors import HOURS_PER_YEAR

CFG = AgentConfig()
ZERO = np.zeros(HOURS_PER_YEAR)


def flat(v):
    return np.full(HOURS_PER_YEAR, float(v))


# one hour ------------------------------------------------------------------------

def test_balanced_hour():
    s = dispatch_hour(HourlyState(5.0, 2.0), 7.0, 7.0, CFG)
    assert s.grid_imported == 0.0 and s.curtailed == 0.0 and s.charge == 2.0


def test_no_generation_imports_everything():
    s = dispatch_hour(HourlyState(0.0), 0.0, 10.0, CFG)
    assert s.grid_imported == 10.0


def test_hand_traced_charge_then_discharge():
    cfg = AgentConfig(battery_efficiency=0.9)
    s = dispatch_hour(HourlyState(5.0), 10.0, 4.0, cfg)
    assert s.last.direct == 4.0
    assert s.last.charged == 5.0 and s.charge == 5.0
    assert s.last.curtailed == 1.0
    s = dispatch_hour(s, 0.0, 10.0, cfg)
    assert s.last.discharged == pytest.approx(4.5, abs=1e-15)
    assert s.last.imported == pytest.approx(5.5, abs=1e-15)
    assert s.charge == 0.0
    assert s.renewable_consumed == pytest.approx(8.5)


def test_partial_discharge_keeps_remainder():
    f = dispatch_step(5.0, 0.0, 0.9, 5.0, 0.9)
    assert f.discharged == pytest.approx(0.9)
    assert f.charge == pytest.approx(4.0)
    assert f.imported == 0.0


def test_step_vectorized_matches_scalar():
    rng = np.random.default_rng(0)
    n = 200
    args = (rng.uniform(0, 5, n), rng.uniform(0, 20, n), rng.uniform(0, 20, n), np.full(n, 5.0), 0.85)
    f = dispatch_step(*args)
    for i in range(0, n, 17):
        g = dispatch_step(args[0][i], args[1][i], args[2][i], 5.0, 0.85)
        for a, b in zip(f, g):
            assert a[i] == b
    assert np.max(np.abs(balance_error(args[1], args[2], f))) <= 1e-9


def test_negative_inputs_rejected():
    with pytest.raises(DomainError):
        dispatch_hour(HourlyState(1.0), -1.0, 2.0, CFG)
    with pytest.raises(DomainError):
        HourlyState(1.0, 2.0)


# costs and rates -----------------------------------------------------------------

def test_cost_without_facilities_is_grid_only():
    assert annual_cost(PolicyParams(), 1000.0, CFG) == 27.0 * 1000.0


def test_facility_cost_doubles():
    p = PolicyParams(10.0, 3.0, 50.0)
    p2 = PolicyParams(20.0, 6.0, 100.0)
    assert annual_cost(p2, 0.0, CFG) == pytest.approx(2.0 * annual_cost(p, 0.0, CFG), rel=1e-15)


def test_amortization_values():
    br = cost_breakdown(PolicyParams(20.0, 2.0, 0.0), 0.0, CFG, 100.0)
    assert br["pv"] == 250_000.0
    assert br["hydro"] == 75_000.0
    assert br["consignment"] == 500.0


def test_utilization_examples():
    assert utilization_rate(0.0, 100.0) == 0.0
    assert utilization_rate(100.0, 100.0) == 1.0
    assert utilization_rate(50.0, 100.0) == 0.5
    with pytest.raises(DomainError):
        utilization_rate(1.0, 0.0)


def test_circulation_examples():
    assert circulation_rate(cost_breakdown(PolicyParams(), 100.0, CFG), CFG) == 0.0
    br = {"grid": 750.0, "pv": 250.0, "hydro": 0.0, "battery": 0.0, "consignment": 0.0}
    assert circulation_rate(br, CFG) == 0.25
    br = {"grid": 0.0, "pv": 250.0, "hydro": 10.0, "battery": 5.0, "consignment": 1.0}
    assert circulation_rate(br, CFG) == 1.0
    off = AgentConfig(in_region={"pv": False, "hydro": True, "battery": True, "consignment": True})
    assert circulation_rate({"grid": 0.0, "pv": 1.0, "hydro": 1.0, "battery": 0.0, "consignment": 0.0}, off) == 0.5


def test_agent_config_validation():
    with pytest.raises(DomainError):
        AgentConfig(battery_efficiency=0.0)
    with pytest.raises(DomainError):
        AgentConfig(pv_life=0.0)
    with pytest.raises(DomainError):
        AgentConfig(grid_tariff=-1.0)
    with pytest.raises(DomainError):
        AgentConfig(in_region={"wind": True})


# a year --------------------------------------------------------------------------

def test_zero_policy_is_now():
    dem = flat(17.5)
    idx = simulate_year(PolicyParams(), flat(0.2), flat(30.0), dem, CFG)
    assert idx.utilization_u == 0.0 and idx.circulation_d == 0.0
    assert idx.cost_p == pytest.approx(27.0 * 17.5 * HOURS_PER_YEAR, rel=1e-12)
    assert idx.grid_purchase == idx.cost_p


def test_saturating_policy():
    idx = simulate_year(PolicyParams(0.0, 1.0, 0.0), ZERO, flat(30.0), flat(20.0), CFG)
    assert idx.utilization_u == 1.0
    assert idx.grid_purchase == 0.0
    assert idx.circulation_d == 1.0
    assert idx.curtailed_kwh == pytest.approx(10.0 * HOURS_PER_YEAR)


def test_battery_shifts_energy():
    pv = np.tile([2.0, 0.0], HOURS_PER_YEAR // 2)
    dem = flat(1.0)
    no = simulate_year(PolicyParams(1.0, 0.0, 0.0), pv, ZERO, dem, CFG)
    yes = simulate_year(PolicyParams(1.0, 0.0, 1.0), pv, ZERO, dem, CFG)
    assert no.utilization_u == pytest.approx(0.5)
    assert yes.utilization_u == pytest.approx(0.5 + 0.5 * 0.9, rel=1e-12)


def test_batch_equals_single():
    rng = np.random.default_rng(7)
    pv, hy, dem = rng.random(HOURS_PER_YEAR), rng.random(HOURS_PER_YEAR) * 3, 5 + rng.random(HOURS_PER_YEAR)
    sizes = [(0.0, 0.0, 0.0), (3.0, 1.0, 10.0), (7.5, 2.0, 0.0)]
    batch = simulate_batch(*map(np.array, zip(*sizes)), pv, hy, dem, CFG)
    for i, s in enumerate(sizes):
        assert simulate_year(PolicyParams(*s), pv, hy, dem, CFG) == batch.indices(i)


def test_annual_generation_is_linear():
    rng = np.random.default_rng(8)
    hy = rng.random(HOURS_PER_YEAR)
    unit = float(np.sum(hy))
    for drop in (2.0, 20.0, 80.0):
        idx = simulate_year(PolicyParams(0.0, drop, 0.0), ZERO, hy, flat(1.0), CFG)
        assert idx.annual_hydro_kwh == pytest.approx(drop * unit, rel=1e-12)


def test_batch_rejects_bad_inputs():
    with pytest.raises(DomainError):
        simulate_batch([1.0], [1.0, 2.0], [0.0], ZERO, ZERO, flat(1.0), CFG)
    with pytest.raises(DomainError):
        simulate_batch([-1.0], [0.0], [0.0], ZERO, ZERO, flat(1.0), CFG)
    with pytest.raises(DomainError):
        simulate_batch([0.0], [0.0], [0.0], ZERO, ZERO, ZERO, CFG)
    with pytest.raises(DomainError):
        simulate_batch([0.0], [0.0], [0.0], np.ones(10), ZERO, flat(1.0), CFG)
    free = AgentConfig(grid_tariff=0.0)
    with pytest.raises(DomainError):
        simulate_batch([0.0], [0.0], [0.0], ZERO, ZERO, flat(1.0), free)
