"""Deterministic synthetic Takaharu-like inputs.

The real survey responses and sensor archives are not public. These
fixtures mimic their shape: 483 questionnaires of which 62 are incomplete,
eight items that correlate with well-being plus distractors, and one
(non-leap) year of hourly irradiance, river level and air temperature from
a few stations, with dropouts, bad readings and a donor region for gaps.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .reference import ITEMS, RESPONSE, _TABLE
from .sensors import SensorSeries, write_sensor_csv

SURVEY_ROWS = 483
INCOMPLETE_ROWS = 62
SURVEY_NOISE = 0.18
YEAR_START = "2019-01-01T00:00:00"
LATITUDE = 31.97

DISTRACTORS = (
    ("q09", "I often use public transport.", "Other"),
    ("q10", "I have lived in this town for more than 20 years.", "Other"),
    ("q11", "I own an electric vehicle.", "Other"),
    ("q12", "I feel my daily schedule is too busy.", "Other"),
)

# rating curve (level m -> flow m3/s) for the fixture gauge
RATING_CURVE = ((0.0, 0.0), (0.2, 0.05), (0.4, 0.25), (0.6, 0.6), (0.8, 1.1), (1.2, 2.4), (2.0, 6.0), (5.0, 25.0))


def survey_frame(seed: int) -> pd.DataFrame:
    """Raw answers on their questionnaire scales; empty cells are NaN."""
    rng = np.random.default_rng(seed)
    n = SURVEY_ROWS
    z = rng.standard_normal(n)
    loadings = (0.6, 0.6, 0.6, 0.6, 0.5, 0.6, 0.45, 0.5)
    cols = {}
    for it, a in zip(ITEMS, loadings):
        lat = a * z + rng.standard_normal(n)
        if it.id == "x7":
            cols[it.id] = (lat > 0.3).astype(float) + 1.0  # 1 = outside, 2 = in the district
        else:
            cols[it.id] = np.clip(np.round(3.0 + lat), 1, 5)
    X = np.column_stack([cols[it.id] for it in ITEMS])
    Xn = X / X.max(axis=0)
    beta = _TABLE[:, 0]
    y = beta[0] + Xn @ beta[1:] + SURVEY_NOISE * rng.standard_normal(n)
    wellbeing = np.clip(np.round(10.0 * y), 0, 10)

    frame = {RESPONSE.id: wellbeing}
    frame.update(cols)
    frame["q09"] = rng.integers(1, 6, n).astype(float)
    frame["q10"] = (rng.random(n) < 0.6).astype(float)
    frame["q11"] = (rng.random(n) < 0.1).astype(float)
    frame["q12"] = np.clip(np.round(3.0 - 0.8 * z + rng.standard_normal(n)), 1, 5)
    df = pd.DataFrame(frame)

    bad_rows = rng.choice(n, INCOMPLETE_ROWS, replace=False)
    columns = list(df.columns)
    for r in bad_rows:
        k = int(rng.integers(1, 3))
        for c in rng.choice(len(columns), k, replace=False):
            df.iat[int(r), int(c)] = np.nan
    return df


def schema_entries() -> list[dict]:
    out = [{"id": RESPONSE.id, "text": RESPONSE.text, "tag": RESPONSE.tag}]
    out += [{"id": it.id, "text": it.text, "tag": it.tag} for it in ITEMS]
    out += [{"id": i, "text": t, "tag": g} for i, t, g in DISTRACTORS]
    return out


def write_survey(out_dir: Path, seed: int) -> tuple[Path, Path]:
    df = survey_frame(seed)
    csv_path = out_dir / "survey.csv"
    lines = [",".join(df.columns)]
    for row in df.itertuples(index=False):
        lines.append(",".join("" if np.isnan(v) else str(int(v)) for v in row))
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    schema_path = out_dir / "survey_schema.json"
    schema_path.write_text(json.dumps(schema_entries(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return csv_path, schema_path


def _hours(start: str = YEAR_START, n: int = 8760) -> np.ndarray:
    return np.datetime64(start, "s") + np.arange(n) * np.timedelta64(3600, "s")


def _clear_sky(times: np.ndarray, latitude: float = LATITUDE) -> np.ndarray:
    """Rough clear-sky global horizontal irradiance [W/m2] at mid-hour."""
    idx = pd.DatetimeIndex(times)
    doy = idx.dayofyear.to_numpy()
    hour = idx.hour.to_numpy() + 0.5
    decl = np.radians(23.45) * np.sin(2 * np.pi * (284 + doy) / 365.0)
    ha = np.radians(15.0 * (hour - 12.0))
    lat = np.radians(latitude)
    cos_z = np.sin(lat) * np.sin(decl) + np.cos(lat) * np.cos(decl) * np.cos(ha)
    return 1000.0 * np.maximum(cos_z, 0.0) ** 1.15


def _ar1(rng, n: int, phi: float, sigma: float) -> np.ndarray:
    e = rng.standard_normal(n) * sigma
    out = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = phi * acc + e[i]
        out[i] = acc
    return out


def sensor_series(seed: int) -> dict[str, SensorSeries]:
    rng = np.random.default_rng(seed + 1)
    t = _hours()
    n = len(t)
    cs = _clear_sky(t)
    day_cloud = np.repeat(np.clip(0.7 + _ar1(rng, 365, 0.6, 0.2), 0.1, 1.0), 24)
    out: dict[str, SensorSeries] = {}

    for name, jitter in (("S1", 0.05), ("S2", 0.08), ("donor_irradiance", 0.12)):
        g = cs * np.clip(day_cloud + jitter * rng.standard_normal(n), 0.05, 1.05)
        out[name] = SensorSeries("solar_irradiance", t, np.round(g, 1), None, name)

    doy = np.arange(n) / 24.0
    season = 0.45 + 0.15 * np.sin(2 * np.pi * (doy - 120) / 365.0)
    rain = np.zeros(n)
    for start in rng.choice(n - 72, 40, replace=False):
        rain[start:start + 72] += rng.uniform(0.1, 0.6) * np.exp(-np.arange(72) / 18.0)
    base_level = season + rain
    for name, jitter in (("W1", 0.01), ("donor_level", 0.03)):
        lv = np.clip(base_level + jitter * rng.standard_normal(n), 0.05, None)
        out[name] = SensorSeries("water_level", t, np.round(lv, 3), None, name)

    hour = pd.DatetimeIndex(t).hour.to_numpy()
    temp = 17.0 - 10.0 * np.cos(2 * np.pi * (doy - 20) / 365.0) + 4.0 * np.sin(2 * np.pi * (hour - 9) / 24.0)
    temp = temp + _ar1(rng, n, 0.95, 0.4)
    for name, jitter in (("T1", 0.2), ("donor_temperature", 0.8)):
        out[name] = SensorSeries("air_temperature", t, np.round(temp + jitter * rng.standard_normal(n), 2), None, name)

    # dropouts and bad readings on the local stations
    for name, bad in (("S1", -5.0), ("S2", 2500.0), ("W1", -1.0), ("T1", 99.0)):
        s = out[name]
        v = s.values.copy()
        flags = s.flags.copy()
        miss = rng.choice(n, 30, replace=False)
        flags[miss] = "M"
        v[miss] = np.nan
        wrong = rng.choice(np.setdiff1d(np.arange(n), miss), 20, replace=False)
        v[wrong] = bad
        keep = np.ones(n, dtype=bool)
        gap = int(rng.integers(24, n - 48))
        keep[gap:gap + 24] = False  # one day without any record
        out[name] = SensorSeries(s.kind, s.times[keep], v[keep], flags[keep], name)
    return out


def write_sensors(out_dir: Path, seed: int) -> dict[str, Path]:
    sensor_dir = out_dir / "sensors"
    sensor_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, s in sensor_series(seed).items():
        p = sensor_dir / f"{name}.csv"
        write_sensor_csv(s, p)
        paths[name] = p
    return paths


CONFIG_TEMPLATE = """\
# Synthetic Takaharu-like run. Paths are relative to this file.
seed = {seed}
workers = 1
deterministic = true

[paths]
survey = "survey.csv"
schema = "survey_schema.json"
out_dir = "out"

[survey]
response = "wellbeing"
r_min = 0.1
p_max = 0.05

[sensors]
start = "{start}"

[sensors.solar_irradiance]
stations = ["sensors/S1.csv", "sensors/S2.csv"]
donor = "sensors/donor_irradiance.csv"
min = 0.0
max = 1500.0

[sensors.water_level]
stations = ["sensors/W1.csv"]
donor = "sensors/donor_level.csv"
min = 0.0
max = 50.0
rating_curve = {rating_curve}

[sensors.air_temperature]
stations = ["sensors/T1.csv"]
donor = "sensors/donor_temperature.csv"
min = -40.0
max = 50.0

[profiles.solar]
performance_ratio = 0.8
annual_target = 1051.453

[profiles.hydro]
efficiency = 0.7
annual_target = 29088.65

[profiles.demand]
setpoint = 22.0
deadband = 3.0
coefficient = 1.0
annual_cost_target = 4157930.0

[agents]
pv_unit_cost = 250000.0
pv_life = 20.0
hydro_unit_cost = 1500000.0
hydro_life = 40.0
battery_unit_cost = 100000.0
battery_life = 15.0
battery_efficiency = 0.9
grid_tariff = 27.0
consignment_charge = 5.0

[agents.in_region]
pv = true
hydro = true
battery = true
consignment = true

[sweep]
max_candidates = 1000000

[sweep.pv]
min = 0.0
max = 980.0
step = 20.0

[sweep.hydro]
min = 0.0
max = 78.0
step = 2.0

[sweep.battery]
min = 0.0
max = 450.0
step = 50.0

[baseline]
mode = "simulate"

[coupling]
types = ["A", "B", "C"]
means = "survey"
s_elec = 0.037
"""


def write_config(out_dir: Path, seed: int) -> Path:
    curve = "[" + ", ".join(f"[{a}, {b}]" for a, b in RATING_CURVE) + "]"
    p = out_dir / "config.toml"
    p.write_text(CONFIG_TEMPLATE.format(seed=seed, start=YEAR_START, rating_curve=curve), encoding="utf-8")
    return p


DEFAULT_SEED = 20190402


def generate_fixtures(out_dir, seed: int = DEFAULT_SEED) -> Path:
    """Write survey, schema, sensor CSVs and a run config; returns the config path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_survey(out_dir, seed)
    write_sensors(out_dir, seed)
    return write_config(out_dir, seed)


def shipped_fixture_dir() -> Path:
    return Path(__file__).parent / "data" / "takaharu_synthetic"
