import json
import math

import numpy as np
import pytest

from wellbeing_policy.errors import DomainError, InsufficientDataError, UnfillableGapError
from wellbeing_policy.reference import HYDRO_KWH_PER_M, PV_KWH_PER_KW
from wellbeing_policy.sensors import (
    HOURS_PER_YEAR,
    CleansingRules,
    DemandProfile,
    GenerationProfile,
    RatingCurve,
    SensorSeries,
    cleanse,
    demand_profile,
    gap_fill,
    hourly_means,
    hydro_kwh_per_meter,
    hydro_profile,
    level_to_flow,
    read_sensor_csv,
    solar_profile,
    station_mean,
    write_sensor_csv,
    year_calendar,
    year_values,
)

START = "2019-01-01T00:00:00"
H = np.timedelta64(3600, "s")


def hourly(kind, values, start=START, station="s"):
    t = np.datetime64(start, "s") + np.arange(len(values)) * H
    return SensorSeries(kind, t, np.asarray(values, dtype=float), None, station)


def const_year(kind, v):
    return hourly(kind, np.full(HOURS_PER_YEAR, float(v)))


# cleansing -------------------------------------------------------------------

def test_negative_irradiance_dropped():
    s = hourly("solar_irradiance", [0.0, -5.0, 300.0])
    out, rep = cleanse(s)
    np.testing.assert_array_equal(out.values, [0.0, 300.0])
    assert rep.dropped == 1 and rep.tallies["below_min"] == 1


def test_clean_series_unchanged():
    s = hourly("air_temperature", [10.0, 11.0, 12.5, 9.0])
    out, rep = cleanse(s)
    np.testing.assert_array_equal(out.values, s.values)
    np.testing.assert_array_equal(out.times, s.times)
    assert rep.dropped == 0 and rep.retained == 4


def test_injected_out_of_range_count():
    rng = np.random.default_rng(11)
    n = 5000
    v = rng.uniform(0, 1000, n)
    idx = rng.choice(n, n // 10, replace=False)
    v[idx[: len(idx) // 2]] = -rng.uniform(1, 50, len(idx) // 2)
    v[idx[len(idx) // 2:]] = 1500 + rng.uniform(1, 500, len(idx) - len(idx) // 2)
    out, rep = cleanse(hourly("solar_irradiance", v))
    assert rep.dropped == n // 10
    assert len(out) == n - n // 10


def test_missing_flags_and_nonfinite():
    s = SensorSeries("water_level", hourly("water_level", [1, 2, 3, 4]).times, [1.0, np.nan, 3.0, np.inf], ["", "", "M", ""])
    out, rep = cleanse(s)
    np.testing.assert_array_equal(out.values, [1.0])
    assert rep.tallies["missing_flag"] == 1 and rep.tallies["non_finite"] == 2


def test_spike_removal_is_idempotent():
    v = np.array([10.0, 10.5, 11.0, 80.0, 11.5, 12.0, 60.0, 61.0, 12.5])
    rules = CleansingRules(-40.0, 100.0, spike_threshold=15.0)
    once, rep = cleanse(hourly("air_temperature", v), rules)
    twice, rep2 = cleanse(once, rules)
    assert rep.tallies["spike"] >= 1
    assert 80.0 not in once.values
    assert rep2.dropped == 0
    np.testing.assert_array_equal(once.values, twice.values)


# gap filling -----------------------------------------------------------------

def test_no_gap_is_identity():
    s = hourly("solar_irradiance", [1.0, 2.0, 3.0])
    donor = hourly("solar_irradiance", [9.0, 9.0, 9.0])
    out, n = gap_fill(s, donor)
    assert n == 0 and out is s


def test_single_hour_filled_and_flagged():
    s = hourly("solar_irradiance", [100.0, 200.0, 300.0, 400.0])
    keep = np.array([True, False, True, True])
    s = SensorSeries(s.kind, s.times[keep], s.values[keep], None, "s")
    donor = hourly("solar_irradiance", [0.0, 412.0, 0.0, 0.0])
    out, n = gap_fill(s, donor)
    assert n == 1
    np.testing.assert_array_equal(out.values, [100.0, 412.0, 300.0, 400.0])
    assert list(out.flags) == ["", "F", "", ""]


def test_day_gap_annual_sum():
    rng = np.random.default_rng(2)
    v = rng.uniform(0, 900, HOURS_PER_YEAR)
    donor_v = rng.uniform(0, 900, HOURS_PER_YEAR)
    keep = np.ones(HOURS_PER_YEAR, bool)
    keep[1000:1024] = False
    full = hourly("solar_irradiance", v)
    s = SensorSeries(full.kind, full.times[keep], v[keep], None, "s")
    end = full.times[-1] + H
    out, n = gap_fill(s, hourly("solar_irradiance", donor_v), START, end)
    assert n == 24
    manual = math.fsum(v[:1000]) + math.fsum(donor_v[1000:1024]) + math.fsum(v[1024:])
    assert math.fsum(year_values(out)) == pytest.approx(manual, rel=1e-13)


def test_gap_fill_uses_cleansed_donor():
    s = SensorSeries("solar_irradiance", hourly("solar_irradiance", [1, 2]).times[[0]], [1.0])
    donor = hourly("solar_irradiance", [5.0, -3.0])
    with pytest.raises(UnfillableGapError) as ei:
        gap_fill(s, donor, START, np.datetime64(START, "s") + 2 * H)
    assert len(ei.value.intervals) == 1


def test_gap_fill_kind_mismatch():
    with pytest.raises(DomainError):
        gap_fill(hourly("solar_irradiance", [1.0]), hourly("air_temperature", [1.0]))


def test_hourly_means_average_subhourly():
    t = np.datetime64(START, "s") + np.array([0, 1800, 3600, 5400]) * np.timedelta64(1, "s")
    s = SensorSeries("air_temperature", t, [10.0, 20.0, 30.0, 50.0])
    slots = np.datetime64(START, "s") + np.arange(3) * H
    out = hourly_means(s, slots)
    np.testing.assert_array_equal(out[:2], [15.0, 40.0])
    assert np.isnan(out[2])


# calendar ----------------------------------------------------------------------

def test_calendar_skips_leap_day():
    cal = year_calendar("2020-01-01T00:00")
    assert len(cal) == HOURS_PER_YEAR
    days = {str(t)[:10] for t in cal}
    assert "2020-02-29" not in days and "2020-12-30" in days


def test_year_values_reports_gaps():
    s = hourly("air_temperature", np.zeros(HOURS_PER_YEAR - 5))
    with pytest.raises(InsufficientDataError):
        year_values(s)


def test_station_mean_weighted():
    a = const_year("air_temperature", 10.0)
    b = const_year("air_temperature", 20.0)
    m = station_mean([a, b], START, [3.0, 1.0])
    assert np.all(m.values == 12.5)
    with pytest.raises(DomainError):
        station_mean([a, const_year("solar_irradiance", 1.0)], START)


def test_sensor_csv_roundtrip(tmp_path):
    s = SensorSeries("water_level", hourly("water_level", [1, 2, 3]).times, [0.5, np.nan, 0.123456789], None, "W")
    write_sensor_csv(s, tmp_path / "w.csv")
    back = read_sensor_csv(tmp_path / "w.csv", "water_level")
    np.testing.assert_array_equal(back.times, s.times)
    assert back.values[0] == 0.5 and back.values[2] == 0.123456789
    assert list(back.flags) == ["", "M", ""]


# profiles ------------------------------------------------------------------------

def test_standard_test_condition():
    p = solar_profile(const_year("solar_irradiance", 1000.0), performance_ratio=1.0)
    assert np.all(p.hourly == 1.0)
    assert p.annual_per_unit == 8760.0


def test_zero_irradiance():
    p = solar_profile(const_year("solar_irradiance", 0.0))
    assert not p.hourly.any()


def test_zero_flow():
    p = hydro_profile(const_year("water_flow", 0.0))
    assert not p.hourly.any()


def test_hydro_unit_conversion():
    q = 2.5
    p = hydro_profile(const_year("water_flow", q), efficiency=1.0)
    # rho * g * Q * eta [W per metre of head], one hour, J -> kWh
    expected = 1000.0 * 9.8 * q * 1.0 * 3600.0 / 3.6e6
    assert expected == pytest.approx(24.5)
    np.testing.assert_allclose(p.hourly, expected, rtol=1e-15)
    assert hydro_kwh_per_meter(q, 0.7) == pytest.approx(9.8 * q * 0.7)


def test_calibration_scales_to_target():
    g = np.linspace(0.0, 800.0, HOURS_PER_YEAR)
    p = solar_profile(hourly("solar_irradiance", g), target_annual=PV_KWH_PER_KW)
    assert p.annual_per_unit == pytest.approx(PV_KWH_PER_KW, rel=1e-12)
    assert p.calibration["scale"] > 0
    with pytest.raises(DomainError):
        solar_profile(const_year("solar_irradiance", 0.0), target_annual=10.0)


def test_rating_curve():
    c = RatingCurve((0.0, 1.0, 2.0), (0.0, 1.0, 4.0))
    np.testing.assert_allclose(c(np.array([-1.0, 0.5, 1.5, 9.0])), [0.0, 0.5, 2.5, 4.0])
    with pytest.raises(DomainError):
        RatingCurve((0.0, 0.0), (0.0, 1.0))
    with pytest.raises(DomainError):
        RatingCurve((0.0, 1.0), (1.0, 0.5))
    flow = level_to_flow(hourly("water_level", [0.5, 1.5]), c)
    assert flow.kind == "water_flow"
    np.testing.assert_allclose(flow.values, [0.5, 2.5])


def test_demand_at_setpoint_is_base_load():
    p = demand_profile(const_year("air_temperature", 22.0), base_load=12.0, setpoint=22.0, coefficient=2.0)
    assert np.all(p.hourly == 12.0)


def test_demand_ignores_temperature_without_coefficient():
    rng = np.random.default_rng(1)
    a = demand_profile(hourly("air_temperature", rng.uniform(-5, 35, HOURS_PER_YEAR)), base_load=7.0)
    b = demand_profile(const_year("air_temperature", 0.0), base_load=7.0)
    np.testing.assert_array_equal(a.hourly, b.hourly)


def test_demand_annual_target():
    rng = np.random.default_rng(1)
    t = hourly("air_temperature", rng.uniform(-5, 35, HOURS_PER_YEAR))
    p = demand_profile(t, setpoint=22.0, coefficient=1.0, deadband=3.0, annual_target=150_000.0)
    assert p.annual_kwh == pytest.approx(150_000.0, rel=1e-12)
    np.testing.assert_allclose(p.base + p.air_conditioning, p.hourly)
    with pytest.raises(DomainError):
        demand_profile(t, coefficient=100.0, annual_target=1.0)


def test_profile_save_load_exact(tmp_path):
    rng = np.random.default_rng(9)
    p = GenerationProfile("kWh/kW", rng.random(HOURS_PER_YEAR), {"scale": 1.5})
    p.save(tmp_path / "p.csv")
    back = GenerationProfile.load(tmp_path / "p.csv")
    np.testing.assert_array_equal(back.hourly, p.hourly)
    assert back.unit == "kWh/kW" and back.calibration == {"scale": 1.5}
    d = DemandProfile(rng.random(HOURS_PER_YEAR))
    d.save(tmp_path / "d.csv")
    np.testing.assert_array_equal(DemandProfile.load(tmp_path / "d.csv").hourly, d.hourly)


def test_profile_validation():
    with pytest.raises(DomainError):
        GenerationProfile("kWh/kW", np.ones(10))
    with pytest.raises(DomainError):
        GenerationProfile("kWh/kW", -np.ones(HOURS_PER_YEAR))


# shipped fixture -----------------------------------------------------------------

def test_fixture_profiles_calibrated(full_run):
    pv = GenerationProfile.load(full_run / "profile_pv.csv")
    hy = GenerationProfile.load(full_run / "profile_hydro.csv")
    assert pv.annual_per_unit == pytest.approx(PV_KWH_PER_KW, rel=1e-12)
    assert hy.annual_per_unit == pytest.approx(HYDRO_KWH_PER_M, rel=1e-12)
    dem = DemandProfile.load(full_run / "profile_demand.csv")
    assert dem.annual_kwh * 27.0 == pytest.approx(4_157_930.0, rel=1e-12)


def test_fixture_cleansing_report(full_run, fixture_dir):
    rep = json.loads((full_run / "cleansing_report.json").read_text())
    by_station = {r["station"]: r for r in rep["stations"]}
    assert set(by_station) == {"S1", "S2", "W1", "T1"}
    limits = {"S1": (0.0, 1500.0), "S2": (0.0, 1500.0), "W1": (0.0, 50.0), "T1": (-40.0, 50.0)}
    for name, r in by_station.items():
        lines = (fixture_dir / "sensors" / f"{name}.csv").read_text().splitlines()[1:]
        vals = [float(v) for _, v, f in (ln.split(",") for ln in lines) if f != "M" and v]
        lo, hi = limits[name]
        bad = sum(v < lo or v > hi for v in vals)
        assert r["tallies"]["missing_flag"] == 30
        assert r["tallies"]["below_min"] + r["tallies"]["above_max"] == bad
        assert r["n_input"] == len(lines) == 8760 - 24
        # every hour without a valid sample was taken from the donor
        assert r["filled"] == 24 + 30 + bad
