"""Sensor cleansing, gap filling and hourly per-unit profiles for one year.

All profiles live on a fixed 8,760-hour calendar: 365 days of hourly slots
starting at a given hour, with any 29 February skipped.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import DomainError, InsufficientDataError, UnfillableGapError

log = logging.getLogger(__name__)

HOURS_PER_YEAR = 8760
RHO_WATER = 1000.0  # kg/m3
GRAVITY = 9.8  # m/s2
J_PER_KWH = 3.6e6

KINDS = ("solar_irradiance", "water_level", "water_flow", "air_temperature")
UNITS = {"solar_irradiance": "W/m2", "water_level": "m", "water_flow": "m3/s", "air_temperature": "degC"}

_HOUR = np.timedelta64(3600, "s")


@dataclass
class SensorSeries:
    kind: str
    times: np.ndarray  # datetime64[s], strictly increasing
    values: np.ndarray
    flags: np.ndarray | None = None  # "" ok, "M" missing, "F" gap-filled
    station: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown sensor kind {self.kind!r}")
        self.times = np.asarray(self.times, dtype="datetime64[s]")
        self.values = np.asarray(self.values, dtype=float)
        if self.flags is None:
            self.flags = np.full(len(self.times), "", dtype="<U1")
        else:
            self.flags = np.asarray(self.flags, dtype="<U1")
        if not (len(self.times) == len(self.values) == len(self.flags)):
            raise DomainError("times, values and flags must have equal length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > np.timedelta64(0, "s")):
            raise DomainError(f"{self.station or self.kind}: timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def unit(self) -> str:
        return UNITS[self.kind]

    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.values) & (self.flags != "M")


def read_sensor_csv(path, kind: str, station: str | None = None) -> SensorSeries:
    """Read ``timestamp,value[,flag]``. Empty or non-numeric values count as missing."""
    path = Path(path)
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    cols = [c.strip().lower() for c in df.columns]
    df.columns = cols
    if "timestamp" not in cols or "value" not in cols:
        raise DomainError(f"{path}: expected columns timestamp,value[,flag], got {cols}")
    times = pd.to_datetime(df["timestamp"], format="ISO8601").to_numpy(dtype="datetime64[s]")
    values = pd.to_numeric(df["value"].str.strip().replace("", np.nan), errors="coerce").to_numpy(dtype=float)
    flags = df["flag"].str.strip().str.upper().to_numpy() if "flag" in cols else None
    if flags is not None:
        flags = np.where(flags == "M", "M", "")
    flags_out = np.where(np.isnan(values), "M", flags if flags is not None else "")
    return SensorSeries(kind, times, values, flags_out, station or path.stem)


def write_sensor_csv(series: SensorSeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "value", "flag"])
        for t, v, f in zip(series.times, series.values, series.flags):
            w.writerow([str(t), "" if not math.isfinite(v) else repr(float(v)), f])


@dataclass(frozen=True)
class CleansingRules:
    min_value: float
    max_value: float
    spike_threshold: float | None = None


DEFAULT_RULES = {
    "solar_irradiance": CleansingRules(0.0, 1500.0),
    "water_level": CleansingRules(0.0, 50.0),
    "water_flow": CleansingRules(0.0, 1.0e4),
    "air_temperature": CleansingRules(-40.0, 50.0),
}


@dataclass
class CleansingReport:
    kind: str
    station: str
    n_input: int
    dropped: int
    retained: int
    filled: int = 0
    tallies: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "station": self.station,
            "n_input": self.n_input,
            "dropped": self.dropped,
            "retained": self.retained,
            "filled": self.filled,
            "tallies": dict(sorted(self.tallies.items())),
            "empty": self.retained + self.filled == 0,
        }


def _spikes(v: np.ndarray, threshold: float) -> np.ndarray:
    out = np.zeros(len(v), dtype=bool)
    if len(v) < 3:
        return out
    up = v[1:-1] - v[:-2]
    down = v[1:-1] - v[2:]
    out[1:-1] = (np.abs(up) > threshold) & (np.abs(down) > threshold) & (np.sign(up) == np.sign(down))
    return out


def cleanse(series: SensorSeries, rules: CleansingRules | None = None) -> tuple[SensorSeries, CleansingReport]:
    """Drop missing-flagged, non-finite, out-of-range and spike samples.

    Spike removal repeats until no spike remains, so cleansing twice is a no-op.
    """
    rules = rules or DEFAULT_RULES[series.kind]
    v = series.values
    tallies: Counter = Counter()
    keep = np.ones(len(series), dtype=bool)

    miss = series.flags == "M"
    tallies["missing_flag"] = int(miss.sum())
    keep &= ~miss
    bad = keep & ~np.isfinite(v)
    tallies["non_finite"] = int(bad.sum())
    keep &= ~bad
    with np.errstate(invalid="ignore"):
        low = keep & (v < rules.min_value)
        tallies["below_min"] = int(low.sum())
        keep &= ~low
        high = keep & (v > rules.max_value)
        tallies["above_max"] = int(high.sum())
        keep &= ~high

    tallies["spike"] = 0
    if rules.spike_threshold is not None:
        while True:
            idx = np.flatnonzero(keep)
            sp = _spikes(v[idx], rules.spike_threshold)
            if not sp.any():
                break
            keep[idx[sp]] = False
            tallies["spike"] += int(sp.sum())

    out = SensorSeries(series.kind, series.times[keep], v[keep], series.flags[keep], series.station)
    dropped = len(series) - int(keep.sum())
    report = CleansingReport(series.kind, series.station, len(series), dropped, int(keep.sum()), 0, dict(tallies))
    if len(out) == 0:
        log.warning("%s/%s: cleansing removed every sample", series.kind, series.station)
    return out, report


def _floor_hour(t: np.datetime64) -> np.datetime64:
    return np.datetime64(t, "h").astype("datetime64[s]")


def hour_slots(start, end) -> np.ndarray:
    start = _floor_hour(np.datetime64(start, "s"))
    end = np.datetime64(end, "s")
    n = int(np.ceil((end - start) / _HOUR))
    return start + np.arange(max(n, 0)) * _HOUR


def hourly_means(series: SensorSeries, slots: np.ndarray) -> np.ndarray:
    """Mean of valid samples within each hourly slot; NaN where a slot has none."""
    slots = np.asarray(slots, dtype="datetime64[s]")
    out = np.full(len(slots), np.nan)
    if len(slots) == 0 or len(series) == 0:
        return out
    mask = series.valid_mask()
    t = series.times[mask]
    v = series.values[mask]
    pos = np.searchsorted(slots, t, side="right") - 1
    ok = (pos >= 0) & (t < slots[np.clip(pos, 0, None)] + _HOUR)
    pos, v = pos[ok], v[ok]
    sums = np.bincount(pos, weights=v, minlength=len(slots))
    counts = np.bincount(pos, minlength=len(slots))
    have = counts > 0
    out[have] = sums[have] / counts[have]
    return out


def _intervals(slots: np.ndarray, missing: np.ndarray) -> list[tuple]:
    out = []
    idx = np.flatnonzero(missing)
    if len(idx) == 0:
        return out
    start = prev = idx[0]
    for i in idx[1:]:
        if i != prev + 1:
            out.append((slots[start], slots[prev] + _HOUR))
            start = i
        prev = i
    out.append((slots[start], slots[prev] + _HOUR))
    return out


def gap_fill(
    series: SensorSeries,
    donor: SensorSeries,
    start=None,
    end=None,
    donor_rules: CleansingRules | None = None,
) -> tuple[SensorSeries, int]:
    """Fill every hour in [start, end) without a valid sample from the donor.

    The donor is cleansed first; its hourly mean is inserted verbatim at the
    top of each empty hour with flag ``"F"``. Existing samples are untouched.
    Returns the filled series and the number of inserted samples.
    """
    if donor.kind != series.kind:
        raise DomainError(f"donor kind {donor.kind} does not match {series.kind}")
    if start is None or end is None:
        if len(series) == 0:
            raise DomainError("cannot infer the fill window from an empty series")
        start = series.times[0] if start is None else start
        end = _floor_hour(series.times[-1]) + _HOUR if end is None else end
    slots = hour_slots(start, end)
    have = np.isfinite(hourly_means(series, slots))
    missing = ~have
    if not missing.any():
        return series, 0

    donor_clean, _ = cleanse(donor, donor_rules)
    donor_vals = hourly_means(donor_clean, slots)
    uncovered = missing & ~np.isfinite(donor_vals)
    if uncovered.any():
        raise UnfillableGapError(_intervals(slots, uncovered))

    times = np.concatenate([series.times, slots[missing]])
    values = np.concatenate([series.values, donor_vals[missing]])
    flags = np.concatenate([series.flags, np.full(int(missing.sum()), "F", dtype="<U1")])
    order = np.argsort(times, kind="stable")
    filled = SensorSeries(series.kind, times[order], values[order], flags[order], series.station)
    return filled, int(missing.sum())


def year_calendar(start) -> np.ndarray:
    """The 8,760 hourly slots of the simulated year (29 February skipped)."""
    start = _floor_hour(np.datetime64(start, "s"))
    slots = start + np.arange(366 * 24) * _HOUR
    d = pd.DatetimeIndex(slots)
    slots = slots[~((d.month == 2) & (d.day == 29))]
    return slots[:HOURS_PER_YEAR]


def year_values(series: SensorSeries, start=None) -> np.ndarray:
    """Hourly means over the simulated year; raises if any hour is uncovered."""
    if start is None:
        if len(series) == 0:
            raise InsufficientDataError(f"{series.kind}: empty series")
        start = series.times[0]
    slots = year_calendar(start)
    vals = hourly_means(series, slots)
    missing = ~np.isfinite(vals)
    if missing.any():
        raise InsufficientDataError(
            f"{series.kind}/{series.station}: {int(missing.sum())} of {HOURS_PER_YEAR} hours uncovered "
            f"in the year starting {slots[0]} (first gap at {slots[np.argmax(missing)]})"
        )
    return vals


def station_mean(series_list: Sequence[SensorSeries], start, weights: Sequence[float] | None = None) -> SensorSeries:
    """Combine stations of one kind into a single hourly series by (weighted) mean."""
    if not series_list:
        raise DomainError("no stations to combine")
    kinds = {s.kind for s in series_list}
    if len(kinds) != 1:
        raise DomainError(f"cannot combine different kinds {sorted(kinds)}")
    w = np.ones(len(series_list)) if weights is None else np.asarray(weights, dtype=float)
    if len(w) != len(series_list) or np.any(w < 0) or w.sum() <= 0:
        raise DomainError("station weights must be nonnegative with positive sum")
    slots = year_calendar(start)
    stack = np.vstack([year_values(s, start) for s in series_list])
    mean = (w[:, None] * stack).sum(axis=0) / w.sum()
    return SensorSeries(series_list[0].kind, slots, mean, None, "mean")


@dataclass
class GenerationProfile:
    unit: str  # "kWh/kW" or "kWh/m"
    hourly: np.ndarray
    calibration: dict = field(default_factory=dict)

    def __post_init__(self):
        self.hourly = np.asarray(self.hourly, dtype=float)
        if self.hourly.shape != (HOURS_PER_YEAR,):
            raise DomainError(f"profile must have {HOURS_PER_YEAR} hours, got {self.hourly.shape}")
        if np.any(self.hourly < 0) or not np.all(np.isfinite(self.hourly)):
            raise DomainError("profile values must be finite and nonnegative")

    @property
    def annual_per_unit(self) -> float:
        return float(math.fsum(self.hourly))

    def save(self, csv_path, json_path=None) -> None:
        _write_hourly(csv_path, "kwh_per_unit", self.hourly)
        json_path = json_path or Path(csv_path).with_suffix(".json")
        meta = {"unit": self.unit, "annual_per_unit": self.annual_per_unit, "calibration": self.calibration}
        Path(json_path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, csv_path, json_path=None) -> "GenerationProfile":
        json_path = json_path or Path(csv_path).with_suffix(".json")
        meta = json.loads(Path(json_path).read_text(encoding="utf-8"))
        return cls(meta["unit"], _read_hourly(csv_path), meta.get("calibration", {}))


@dataclass
class DemandProfile:
    hourly: np.ndarray
    base: np.ndarray | None = None
    air_conditioning: np.ndarray | None = None
    calibration: dict = field(default_factory=dict)

    def __post_init__(self):
        self.hourly = np.asarray(self.hourly, dtype=float)
        if self.hourly.shape != (HOURS_PER_YEAR,):
            raise DomainError(f"demand must have {HOURS_PER_YEAR} hours, got {self.hourly.shape}")
        if np.any(self.hourly < 0) or not np.all(np.isfinite(self.hourly)):
            raise DomainError("demand values must be finite and nonnegative")

    @property
    def annual_kwh(self) -> float:
        return float(math.fsum(self.hourly))

    def save(self, csv_path, json_path=None) -> None:
        _write_hourly(csv_path, "kwh", self.hourly)
        json_path = json_path or Path(csv_path).with_suffix(".json")
        meta = {"unit": "kWh", "annual_kwh": self.annual_kwh, "calibration": self.calibration}
        Path(json_path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, csv_path, json_path=None) -> "DemandProfile":
        json_path = json_path or Path(csv_path).with_suffix(".json")
        meta = json.loads(Path(json_path).read_text(encoding="utf-8"))
        return cls(_read_hourly(csv_path), calibration=meta.get("calibration", {}))


def _write_hourly(path, column: str, values: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"hour,{column}\n")
        for h, v in enumerate(values):
            fh.write(f"{h},{float(v)!r}\n")


def _read_hourly(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        return np.array([float(row[1]) for row in reader])


def _calibrate(raw: np.ndarray, target: float | None, unit: str) -> GenerationProfile:
    raw_annual = float(math.fsum(raw))
    cal = {"raw_annual_per_unit": raw_annual, "scale": 1.0, "target": target}
    if target is not None:
        if target < 0:
            raise DomainError("calibration target must be nonnegative")
        if raw_annual == 0.0:
            if target != 0.0:
                raise DomainError("cannot calibrate an all-zero profile to a positive target")
        else:
            cal["scale"] = target / raw_annual
            raw = raw * cal["scale"]
    return GenerationProfile(unit, raw, cal)


def solar_profile(
    irradiance: SensorSeries,
    performance_ratio: float = 0.8,
    start=None,
    target_annual: float | None = None,
) -> GenerationProfile:
    """kWh per kW of installed PV for each hour of the year.

    hourly = mean irradiance [W/m2] / 1000 * performance_ratio, optionally
    rescaled so the annual sum equals ``target_annual``.
    """
    if irradiance.kind != "solar_irradiance":
        raise DomainError(f"expected solar_irradiance, got {irradiance.kind}")
    if not 0.0 < performance_ratio <= 1.0:
        raise DomainError(f"performance_ratio must lie in (0, 1], got {performance_ratio}")
    g = year_values(irradiance, start)
    raw = np.maximum(g, 0.0) / 1000.0 * performance_ratio
    return _calibrate(raw, target_annual, "kWh/kW")


@dataclass(frozen=True)
class RatingCurve:
    """Monotone piecewise-linear water level -> flow table.

    Levels outside the table are clamped to its end points.
    """

    levels: tuple[float, ...]
    flows: tuple[float, ...]

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float)
        fl = np.asarray(self.flows, dtype=float)
        if len(lv) < 2 or len(lv) != len(fl):
            raise DomainError("rating curve needs at least two (level, flow) points")
        if np.any(np.diff(lv) <= 0):
            raise DomainError("rating curve levels must be strictly increasing")
        if np.any(np.diff(fl) < 0) or np.any(fl < 0):
            raise DomainError("rating curve flows must be nonnegative and nondecreasing")

    def __call__(self, level):
        return np.interp(level, self.levels, self.flows)


def level_to_flow(level: SensorSeries, curve: RatingCurve) -> SensorSeries:
    if level.kind != "water_level":
        raise DomainError(f"expected water_level, got {level.kind}")
    flow = np.where(np.isfinite(level.values), curve(np.nan_to_num(level.values)), np.nan)
    return SensorSeries("water_flow", level.times, flow, level.flags.copy(), level.station)


def hydro_kwh_per_meter(flow_m3s, efficiency: float = 1.0, hours: float = 1.0):
    """Energy per metre of head: rho * g * Q * eta * dt, converted J -> kWh."""
    return RHO_WATER * GRAVITY * np.asarray(flow_m3s, dtype=float) * efficiency * (hours * 3600.0) / J_PER_KWH


def hydro_profile(
    flow: SensorSeries,
    efficiency: float = 0.7,
    start=None,
    target_annual: float | None = None,
) -> GenerationProfile:
    """kWh per metre of effective drop for each hour of the year."""
    if flow.kind != "water_flow":
        raise DomainError(f"expected water_flow, got {flow.kind}")
    if not 0.0 < efficiency <= 1.0:
        raise DomainError(f"efficiency must lie in (0, 1], got {efficiency}")
    q = year_values(flow, start)
    if np.any(q < 0):
        raise DomainError("negative flow; cleanse the series first")
    raw = hydro_kwh_per_meter(q, efficiency)
    return _calibrate(raw, target_annual, "kWh/m")


def demand_profile(
    temperature: SensorSeries,
    base_load: float = 0.0,
    setpoint: float = 22.0,
    coefficient: float = 0.0,
    deadband: float = 0.0,
    start=None,
    annual_target: float | None = None,
) -> DemandProfile:
    """Hourly demand = base + coefficient * max(0, |ambient - setpoint| - deadband).

    With ``annual_target`` the base load is solved so the annual sum hits the
    target; ``base_load`` is then ignored.
    """
    if temperature.kind != "air_temperature":
        raise DomainError(f"expected air_temperature, got {temperature.kind}")
    if coefficient < 0 or deadband < 0:
        raise DomainError("coefficient and deadband must be nonnegative")
    temp = year_values(temperature, start)
    excess = np.maximum(0.0, np.abs(temp - setpoint) - deadband)
    ac = coefficient * excess
    cal = {"setpoint": setpoint, "coefficient": coefficient, "deadband": deadband, "annual_target": annual_target}
    if annual_target is not None:
        base_load = (annual_target - math.fsum(ac)) / HOURS_PER_YEAR
        if base_load < 0:
            raise DomainError("annual target is below the air-conditioning load alone")
    if base_load < 0:
        raise DomainError("base load must be nonnegative")
    cal["base_load"] = base_load
    base = np.full(HOURS_PER_YEAR, float(base_load))
    return DemandProfile(base + ac, base, ac, cal)
