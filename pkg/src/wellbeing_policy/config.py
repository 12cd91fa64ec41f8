"""Run configuration: a TOML file validated into :class:`RunConfig`.

Relative paths are resolved against the directory holding the file.
Every problem is reported as a (key path, message) diagnostic; see
README.md for the full key reference.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .coupling import MODIFIER_NAMES, Baseline, ValueTypeSpec, builtin_presets
from .errors import ConfigError, ConfigSyntaxError, DomainError
from .mabs import LOCAL_COMPONENTS, AgentConfig
from .sensors import DEFAULT_RULES, CleansingRules, RatingCurve
from .sweep import DEFAULT_GRID, DEFAULT_MAX_CANDIDATES, AxisRange, SweepGrid

SENSOR_KINDS = ("solar_irradiance", "water_level", "water_flow", "air_temperature")


@dataclass
class SensorKindConfig:
    stations: list[Path]
    donor: Path | None
    rules: CleansingRules
    weights: list[float] | None = None
    rating_curve: RatingCurve | None = None


@dataclass
class RunConfig:
    config_path: Path
    survey_path: Path
    schema_path: Path
    out_dir: Path
    seed: int = 0
    workers: int = 1
    deterministic: bool = True
    response: str = "wellbeing"
    r_min: float = 0.1
    p_max: float = 0.05
    explanatory: list[str] | None = None
    start: str | None = None
    sensors: dict[str, SensorKindConfig] = field(default_factory=dict)
    performance_ratio: float = 0.8
    solar_target: float | None = None
    hydro_efficiency: float = 0.7
    hydro_target: float | None = None
    demand: dict[str, Any] = field(default_factory=dict)
    agents: AgentConfig = field(default_factory=AgentConfig)
    grid: SweepGrid = DEFAULT_GRID
    baseline: Baseline | None = None  # None: simulate the zero policy
    types: list[str] = field(default_factory=lambda: ["A", "B", "C"])
    value_types: dict[str, ValueTypeSpec] = field(default_factory=dict)
    means: str | dict[str, float] = "survey"
    model: str = "fitted"
    s_elec: float = 0.037

    def value_type(self, name: str) -> ValueTypeSpec:
        return self.value_types[name]


def parse_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([("", f"cannot read {path}: {exc}")]) from None
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+), column (\d+)", str(exc))
        if m:
            where = f"{path}:{m.group(1)}:{m.group(2)}"
        else:  # "at end of document"
            lines = text.split("\n")
            where = f"{path}:{len(lines)}:{len(lines[-1]) + 1}"
        raise ConfigSyntaxError([(where, f"syntax error: {exc}")]) from None


class _Checker:
    def __init__(self, raw: dict, base: Path, check_paths: bool):
        self.raw = raw
        self.base = base
        self.check_paths = check_paths
        self.diags: list[tuple[str, str]] = []

    def err(self, key: str, msg: str) -> None:
        self.diags.append((key, msg))

    def get(self, key: str, default=None):
        node: Any = self.raw
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def table(self, key: str) -> dict:
        v = self.get(key, {})
        if not isinstance(v, dict):
            self.err(key, "must be a table")
            return {}
        return v

    def number(self, key, default=None, lo=None, hi=None, lo_open=False, hi_open=False, required=False):
        v = self.get(key, None)
        if v is None:
            if required:
                self.err(key, "is required")
            return default
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.err(key, f"must be a finite number, got {v!r}")
            return default
        lo_s = "-inf" if lo is None else f"{lo:g}"
        hi_s = "inf" if hi is None else f"{hi:g}"
        rng = f"{'(' if lo_open else '['}{lo_s}, {hi_s}{')' if hi_open else ']'}"
        if lo is not None and (v < lo or (lo_open and v == lo)):
            self.err(key, f"{v} is outside {rng}")
            return default
        if hi is not None and (v > hi or (hi_open and v == hi)):
            self.err(key, f"{v} is outside {rng}")
            return default
        return float(v)

    def integer(self, key, default, lo=None):
        v = self.get(key, None)
        if v is None:
            return default
        if isinstance(v, bool) or not isinstance(v, int):
            self.err(key, f"must be an integer, got {v!r}")
            return default
        if lo is not None and v < lo:
            self.err(key, f"must be >= {lo}")
            return default
        return v

    def path(self, key, value=None, required=True) -> Path | None:
        v = self.get(key) if value is None else value
        if v is None:
            if required:
                self.err(key, "path is required")
            return None
        if not isinstance(v, str) or not v:
            self.err(key, f"must be a path string, got {v!r}")
            return None
        p = Path(v)
        p = p if p.is_absolute() else self.base / p
        if self.check_paths and not p.exists():
            self.err(key, f"file not found: {p}")
        return p


def load_config(path, check_paths: bool = False, overrides: dict | None = None) -> RunConfig:
    """Parse and validate; raises :class:`ConfigError` listing every problem.

    ``overrides`` maps dotted key paths (``"sweep.pv.step"``) to values that
    replace whatever the file says.
    """
    path = Path(path).resolve()
    raw = parse_file(path)
    for key, v in (overrides or {}).items():
        if v is None:
            continue
        node = raw
        *parents, leaf = key.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = v
    c = _Checker(raw, path.parent, check_paths)

    seed = c.integer("seed", 0)
    workers = c.integer("workers", 1, lo=1)
    deterministic = c.get("deterministic", True)
    if not isinstance(deterministic, bool):
        c.err("deterministic", "must be true or false")
        deterministic = True

    survey_path = c.path("paths.survey")
    schema_path = c.path("paths.schema")
    out = c.get("paths.out_dir", "out")
    out_dir = Path(out) if Path(out).is_absolute() else path.parent / out

    response = c.get("survey.response", "wellbeing")
    r_min = c.number("survey.r_min", 0.1, -1.0, 1.0)
    p_max = c.number("survey.p_max", 0.05, 0.0, 1.0)
    explanatory = c.get("survey.explanatory")
    if explanatory is not None and not (isinstance(explanatory, list) and all(isinstance(x, str) for x in explanatory)):
        c.err("survey.explanatory", "must be a list of item ids")
        explanatory = None

    start = c.get("sensors.start")
    if start is not None:
        try:
            import numpy as np

            np.datetime64(start, "s")
        except (ValueError, TypeError):
            c.err("sensors.start", f"not an ISO-8601 timestamp: {start!r}")
            start = None

    sensors: dict[str, SensorKindConfig] = {}
    for kind in SENSOR_KINDS:
        key = f"sensors.{kind}"
        tbl = c.get(key)
        if tbl is None:
            continue
        if not isinstance(tbl, dict):
            c.err(key, "must be a table")
            continue
        st = tbl.get("stations", [])
        if not isinstance(st, list) or not st:
            c.err(f"{key}.stations", "must be a non-empty list of paths")
            st = []
        stations = [p for i, s in enumerate(st) if (p := c.path(f"{key}.stations[{i}]", s)) is not None]
        donor = c.path(f"{key}.donor", tbl.get("donor"), required=False) if "donor" in tbl else None
        d = DEFAULT_RULES[kind]
        lo = c.number(f"{key}.min", d.min_value)
        hi = c.number(f"{key}.max", d.max_value)
        spike = c.number(f"{key}.spike_threshold", None, 0.0, lo_open=True)
        if lo is not None and hi is not None and lo > hi:
            c.err(f"{key}.max", "must be >= min")
            lo, hi = d.min_value, d.max_value
        weights = tbl.get("weights")
        if weights is not None:
            if not isinstance(weights, list) or len(weights) != len(stations) or any(
                isinstance(w, bool) or not isinstance(w, (int, float)) or w < 0 for w in weights
            ):
                c.err(f"{key}.weights", "must list one nonnegative weight per station")
                weights = None
        curve = None
        if kind == "water_level":
            rc = tbl.get("rating_curve")
            if rc is None:
                c.err(f"{key}.rating_curve", "is required to convert level to flow")
            else:
                try:
                    curve = RatingCurve(tuple(float(a) for a, _ in rc), tuple(float(b) for _, b in rc))
                except (TypeError, ValueError, DomainError) as exc:
                    c.err(f"{key}.rating_curve", f"invalid: {exc}")
        sensors[kind] = SensorKindConfig(stations, donor, CleansingRules(lo, hi, spike), weights, curve)
    if "solar_irradiance" not in sensors:
        c.err("sensors.solar_irradiance", "is required")
    if "water_level" not in sensors and "water_flow" not in sensors:
        c.err("sensors.water_level", "water_level (with rating_curve) or water_flow is required")
    if "air_temperature" not in sensors:
        c.err("sensors.air_temperature", "is required")

    pr = c.number("profiles.solar.performance_ratio", 0.8, 0.0, 1.0, lo_open=True)
    solar_target = c.number("profiles.solar.annual_target", None, 0.0)
    eff = c.number("profiles.hydro.efficiency", 0.7, 0.0, 1.0, lo_open=True)
    hydro_target = c.number("profiles.hydro.annual_target", None, 0.0)
    demand = {
        "setpoint": c.number("profiles.demand.setpoint", 22.0),
        "deadband": c.number("profiles.demand.deadband", 0.0, 0.0),
        "coefficient": c.number("profiles.demand.coefficient", 0.0, 0.0),
        "base_load": c.number("profiles.demand.base_load", 0.0, 0.0),
        "annual_target": c.number("profiles.demand.annual_target", None, 0.0, lo_open=True),
        "annual_cost_target": c.number("profiles.demand.annual_cost_target", None, 0.0, lo_open=True),
    }
    if demand["annual_target"] is not None and demand["annual_cost_target"] is not None:
        c.err("profiles.demand.annual_cost_target", "give either annual_target or annual_cost_target, not both")

    defaults = AgentConfig()
    agent_kwargs: dict[str, Any] = {}
    for name in ("pv_unit_cost", "hydro_unit_cost", "battery_unit_cost", "grid_tariff", "consignment_charge"):
        agent_kwargs[name] = c.number(f"agents.{name}", getattr(defaults, name), 0.0)
    for name in ("pv_life", "hydro_life", "battery_life"):
        agent_kwargs[name] = c.number(f"agents.{name}", getattr(defaults, name), 0.0, lo_open=True)
    agent_kwargs["battery_efficiency"] = c.number("agents.battery_efficiency", defaults.battery_efficiency, 0.0, 1.0, lo_open=True)
    flags = dict(defaults.in_region)
    for k, v in c.table("agents.in_region").items():
        if k not in LOCAL_COMPONENTS:
            c.err(f"agents.in_region.{k}", f"unknown component; expected one of {LOCAL_COMPONENTS}")
        elif not isinstance(v, bool):
            c.err(f"agents.in_region.{k}", "must be true or false")
        else:
            flags[k] = v
    agents = defaults
    try:
        agents = AgentConfig(**{k: v for k, v in agent_kwargs.items() if v is not None}, in_region=flags)
    except DomainError as exc:
        c.err("agents", str(exc))

    axes = {}
    for axis, d in (("pv", DEFAULT_GRID.pv), ("hydro", DEFAULT_GRID.hydro), ("battery", DEFAULT_GRID.battery)):
        key = f"sweep.{axis}"
        lo = c.number(f"{key}.min", d.min, 0.0)
        hi = c.number(f"{key}.max", d.max, 0.0)
        step = c.number(f"{key}.step", d.step)
        if step is not None and step <= 0:
            c.err(f"{key}.step", f"must be positive, got {step}")
            step = d.step
        if lo is not None and hi is not None and hi < lo:
            c.err(f"{key}.max", "must be >= min")
            lo, hi = d.min, d.max
        axes[axis] = AxisRange(lo, hi, step)
    max_cand = c.integer("sweep.max_candidates", DEFAULT_MAX_CANDIDATES, lo=1)
    grid = SweepGrid(axes["pv"], axes["hydro"], axes["battery"], max_cand)
    if grid.size > max_cand:
        c.err("sweep", f"grid has {grid.size} candidates, above max_candidates = {max_cand}")

    baseline = None
    mode = c.get("baseline.mode", "simulate")
    if mode == "explicit":
        p0 = c.number("baseline.p0", None, 0.0, lo_open=True, required=True)
        u0 = c.number("baseline.u0", 0.0, 0.0, 1.0)
        d0 = c.number("baseline.d0", 0.0, 0.0, 1.0)
        if p0 is not None:
            baseline = Baseline(p0, u0, d0)
    elif mode != "simulate":
        c.err("baseline.mode", f"must be 'simulate' or 'explicit', got {mode!r}")

    s_elec = c.number("coupling.s_elec", 0.037, 0.0, 1.0, lo_open=True, hi_open=True)
    if s_elec is None:
        s_elec = 0.037
    value_types = {p.name: p for p in builtin_presets(s_elec)}
    for name, tbl in c.table("coupling.value_types").items():
        key = f"coupling.value_types.{name}"
        mods = tbl.get("modifiers", {}) if isinstance(tbl, dict) else None
        if not isinstance(mods, dict):
            c.err(f"{key}.modifiers", "must be a table of variable = [modifier, ...]")
            continue
        ok = True
        for var, lst in mods.items():
            if not isinstance(lst, list) or any(m not in MODIFIER_NAMES for m in lst):
                c.err(f"{key}.modifiers.{var}", f"must be a list drawn from {MODIFIER_NAMES}")
                ok = False
        if ok:
            vt_s = tbl.get("s_elec", s_elec)
            if not isinstance(vt_s, (int, float)) or not 0.0 < vt_s < 1.0:
                c.err(f"{key}.s_elec", f"{vt_s} is outside (0, 1)")
                continue
            value_types[name] = ValueTypeSpec(name, {v: tuple(m) for v, m in mods.items()}, float(vt_s))
    types = c.get("coupling.types", ["A", "B", "C"])
    if isinstance(types, str):
        types = [t.strip() for t in types.split(",") if t.strip()]
    if not isinstance(types, list) or not types:
        c.err("coupling.types", "must be a non-empty list of value-type names")
        types = ["A", "B", "C"]
    for t in types:
        if t not in value_types:
            c.err("coupling.types", f"unknown value type {t!r}")
    means = c.get("coupling.means", "survey")
    if isinstance(means, dict):
        for k, v in means.items():
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0.0 <= v <= 1.0:
                c.err(f"coupling.means.{k}", f"{v!r} is outside [0, 1]")
        means = {k: float(v) for k, v in means.items() if isinstance(v, (int, float))}
    elif means not in ("survey", "calibrated"):
        c.err("coupling.means", "must be 'survey', 'calibrated' or a table of variable means")
    model = c.get("coupling.model", "fitted")
    if model not in ("fitted", "reference"):
        c.err("coupling.model", "must be 'fitted' or 'reference'")

    if c.diags:
        raise ConfigError(c.diags)
    return RunConfig(
        config_path=path,
        survey_path=survey_path,
        schema_path=schema_path,
        out_dir=out_dir,
        seed=seed,
        workers=workers,
        deterministic=deterministic,
        response=response,
        r_min=r_min,
        p_max=p_max,
        explanatory=explanatory,
        start=start,
        sensors=sensors,
        performance_ratio=pr,
        solar_target=solar_target,
        hydro_efficiency=eff,
        hydro_target=hydro_target,
        demand=demand,
        agents=agents,
        grid=grid,
        baseline=baseline,
        types=list(types),
        value_types=value_types,
        means=means,
        model=model,
        s_elec=s_elec,
    )


def validate_config(path, overrides: dict | None = None) -> list[tuple[str, str]]:
    """All diagnostics for a config file (empty list = valid).

    Syntax errors raise :class:`ConfigSyntaxError` with the location.
    """
    try:
        load_config(path, check_paths=True, overrides=overrides)
    except ConfigSyntaxError:
        raise
    except ConfigError as exc:
        return exc.diagnostics
    return []
