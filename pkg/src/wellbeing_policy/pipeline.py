"""Stage runner: survey-fit, ingest, simulate, sweep, couple, report.

Each stage reads its inputs from the output directory, writes its artifacts
there and records them in ``manifest.json`` with a SHA-256 per file. A stage
refuses to run when an upstream artifact is missing or differs from the
hash its producer recorded.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Callable

import numpy as np

from .config import RunConfig
from .coupling import Baseline, MeanVector, select_optimal
from .errors import DependencyError, PolicyError, StageError
from .mabs import simulate_year, PolicyParams
from .reference import calibrated_means, reference_model
from .sensors import (
    DemandProfile,
    GenerationProfile,
    demand_profile,
    cleanse,
    gap_fill,
    hour_slots,
    hydro_profile,
    level_to_flow,
    read_sensor_csv,
    solar_profile,
    station_mean,
    year_calendar,
)
from .survey import RegressionModel, extract_explanatory, fit_ols, load_schema, load_survey, normalize_items
from .sweep import evaluate_all, read_candidates_csv, ternary_arrays, ternary_svg, ternary_xy, write_candidates_csv

log = logging.getLogger(__name__)

STAGES = ("survey-fit", "ingest", "simulate", "sweep", "couple", "report")
MANIFEST = "manifest.json"

PROFILE_FILES = (
    "profile_pv.csv", "profile_pv.json",
    "profile_hydro.csv", "profile_hydro.json",
    "profile_demand.csv", "profile_demand.json",
)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class Manifest:
    """Stage status and artifact hashes. Contains no timestamps, so identical
    runs give identical manifests."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.path = self.out_dir / MANIFEST
        if self.path.exists():
            self.data = json.loads(self.path.read_text(encoding="utf-8"))
        else:
            self.data = {"stages": {}, "files": {}}
        self.data.setdefault("stages", {})
        self.data.setdefault("files", {})

    @property
    def stages(self) -> dict:
        return self.data["stages"]

    @property
    def files(self) -> dict:
        return self.data["files"]

    def producer(self, name: str) -> str | None:
        for stage, rec in self.stages.items():
            if name in rec.get("outputs", {}):
                return stage
        return None

    def outputs(self, stage: str) -> list[str]:
        return sorted(self.stages.get(stage, {}).get("outputs", {}))

    def require(self, stage: str, producer: str, name: str) -> Path:
        """Check that ``name`` exists and matches what ``producer`` recorded."""
        p = self.out_dir / name
        rec = self.stages.get(producer, {})
        if not p.exists():
            raise DependencyError(stage, producer, str(p), "missing")
        if rec.get("status") != "ok" or name not in rec.get("outputs", {}):
            raise DependencyError(stage, producer, str(p), "not recorded as a finished output")
        if sha256_file(p) != rec["outputs"][name]:
            raise DependencyError(stage, producer, str(p), "stale (modified after it was produced)")
        return p

    def start(self, stage: str) -> None:
        old = self.stages.get(stage, {})
        for name in old.get("outputs", {}):
            self.files.pop(name, None)
        self.stages[stage] = {"status": "running", "inputs": {}, "outputs": {}}
        self.save()

    def finish(self, stage: str, inputs: list[str], outputs: list[str]) -> None:
        rec = self.stages[stage]
        rec["status"] = "ok"
        rec["inputs"] = {n: sha256_file(self.out_dir / n) for n in sorted(inputs)}
        rec["outputs"] = {n: sha256_file(self.out_dir / n) for n in sorted(outputs)}
        rec.pop("error", None)
        self.files.update(rec["outputs"])
        # downstream stages built on different bytes are now stale
        for other, orec in self.stages.items():
            if other == stage or orec.get("status") != "ok":
                continue
            for n, h in orec.get("inputs", {}).items():
                if n in rec["outputs"] and rec["outputs"][n] != h:
                    orec["status"] = "stale"
                    break
        self.save()

    def fail(self, stage: str, message: str, outputs: list[str]) -> None:
        rec = self.stages.setdefault(stage, {"inputs": {}, "outputs": {}})
        rec["status"] = "failed"
        rec["error"] = message
        present = [n for n in outputs if (self.out_dir / n).exists()]
        rec["outputs"] = {n: sha256_file(self.out_dir / n) for n in sorted(present)}
        rec["partial"] = True
        self.files.update(rec["outputs"])
        self.save()

    @property
    def complete(self) -> bool:
        return all(self.stages.get(s, {}).get("status") == "ok" for s in STAGES)

    def save(self) -> None:
        self.data["complete"] = self.complete
        self.data["files"] = dict(sorted(self.files.items()))
        self.data["stages"] = {s: self.stages[s] for s in STAGES if s in self.stages}
        self.out_dir.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".json.tmp")
        tmp.write_text(_dump(self.data), encoding="utf-8")
        tmp.replace(self.path)


class _Ctx:
    def __init__(self, cfg: RunConfig, manifest: Manifest, stage: str):
        self.cfg = cfg
        self.m = manifest
        self.stage = stage
        self.inputs: list[str] = []
        self.outputs: list[str] = []

    @property
    def out(self) -> Path:
        return self.cfg.out_dir

    def need(self, producer: str, name: str) -> Path:
        p = self.m.require(self.stage, producer, name)
        self.inputs.append(name)
        return p

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def write_text(self, name: str, text: str) -> None:
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


# stages ---------------------------------------------------------------------

def _survey_fit(ctx: _Ctx) -> None:
    cfg = ctx.cfg
    schema = load_schema(cfg.schema_path)
    raw = load_survey(cfg.survey_path, schema)
    norm = normalize_items(raw)
    report = extract_explanatory(norm, cfg.response, cfg.r_min, cfg.p_max)
    report.to_csv(ctx.path("correlation_report.csv"))
    ids = list(cfg.explanatory) if cfg.explanatory else report.selected_ids
    if not ids:
        raise StageError(ctx.stage, f"no item passes r >= {cfg.r_min} and p <= {cfg.p_max}")
    model = fit_ols(norm, cfg.response, ids)
    model.save_json(ctx.path("regression_model.json"))
    means = {
        "n_respondents": norm.n_respondents,
        "n_dropped": norm.n_dropped,
        "response_mean": float(norm.column(cfg.response).mean()),
        "means": norm.means(ids),
        "divisors": {i: float(norm.raw_max[norm.index(i)]) for i in [cfg.response] + ids},
    }
    ctx.write_text("survey_means.json", _dump(means))
    log.info("survey-fit: n=%d, %d items selected, R2=%.4f", norm.n_respondents, len(ids), model.r_squared)


def _year_start(cfg: RunConfig):
    if cfg.start is not None:
        return np.datetime64(cfg.start, "s")
    kind = next(iter(cfg.sensors))
    first = read_sensor_csv(cfg.sensors[kind].stations[0], kind)
    if len(first) == 0:
        raise StageError("ingest", f"cannot infer the year start from empty {cfg.sensors[kind].stations[0]}")
    return first.times[0]


def _read(path: Path, kind: str, station: str | None = None):
    if not Path(path).exists():
        raise StageError("ingest", f"sensor file not found: {path}")
    return read_sensor_csv(path, kind, station)


def _ingest_kind(cfg: RunConfig, kind: str, start, reports: list):
    kc = cfg.sensors[kind]
    cal = year_calendar(start)
    end = cal[-1] + np.timedelta64(3600, "s")
    donor = _read(kc.donor, kind, "donor:" + Path(kc.donor).stem) if kc.donor is not None else None
    cleaned = []
    for path in kc.stations:
        s = _read(path, kind)
        s, rep = cleanse(s, kc.rules)
        if donor is not None:
            s, rep.filled = gap_fill(s, donor, start, end, kc.rules)
        reports.append(rep.to_dict())
        if kind == "water_level":
            s = level_to_flow(s, kc.rating_curve)
        cleaned.append(s)
    return station_mean(cleaned, start, kc.weights)


def _ingest(ctx: _Ctx) -> None:
    cfg = ctx.cfg
    start = _year_start(cfg)
    reports: list[dict] = []
    irr = _ingest_kind(cfg, "solar_irradiance", start, reports)
    flow_kind = "water_level" if "water_level" in cfg.sensors else "water_flow"
    flow = _ingest_kind(cfg, flow_kind, start, reports)
    temp = _ingest_kind(cfg, "air_temperature", start, reports)
    ctx.write_text("cleansing_report.json", _dump({"year_start": str(start), "stations": reports}))

    pv = solar_profile(irr, cfg.performance_ratio, start, cfg.solar_target)
    hy = hydro_profile(flow, cfg.hydro_efficiency, start, cfg.hydro_target)
    d = cfg.demand
    target = d["annual_target"]
    if d["annual_cost_target"] is not None:
        # the no-renewables household buys every kWh from the grid
        target = d["annual_cost_target"] / cfg.agents.grid_tariff
    dem = demand_profile(temp, d["base_load"], d["setpoint"], d["coefficient"], d["deadband"], start, target)
    for name, prof in (("pv", pv), ("hydro", hy), ("demand", dem)):
        prof.save(ctx.path(f"profile_{name}.csv"), ctx.path(f"profile_{name}.json"))


def _load_profiles(ctx: _Ctx):
    for n in PROFILE_FILES:
        ctx.need("ingest", n)
    pv = GenerationProfile.load(ctx.out / "profile_pv.csv")
    hy = GenerationProfile.load(ctx.out / "profile_hydro.csv")
    dem = DemandProfile.load(ctx.out / "profile_demand.csv")
    return pv, hy, dem


def _simulate(ctx: _Ctx) -> None:
    cfg = ctx.cfg
    if cfg.baseline is not None:
        out = {"mode": "explicit", **cfg.baseline.to_dict()}
    else:
        pv, hy, dem = _load_profiles(ctx)
        idx = simulate_year(PolicyParams(0.0, 0.0, 0.0, 0), pv, hy, dem, cfg.agents)
        out = {
            "mode": "simulate",
            "p0": idx.cost_p,
            "u0": idx.utilization_u,
            "d0": idx.circulation_d,
            "grid_purchase": idx.grid_purchase,
            "grid_import_kwh": idx.grid_import_kwh,
            "annual_demand_kwh": dem.annual_kwh,
        }
    ctx.write_text("baseline.json", _dump(out))


def _sweep(ctx: _Ctx) -> None:
    cfg = ctx.cfg
    pv, hy, dem = _load_profiles(ctx)
    cset = evaluate_all(cfg.grid, pv, hy, dem, cfg.agents, workers=cfg.workers)
    write_candidates_csv(cset, ctx.path("candidates.csv"))
    log.info("sweep: %d candidates, max balance error %.3g kWh", len(cset), cset.result.max_balance_error)


def _model_and_means(ctx: _Ctx) -> tuple[RegressionModel, MeanVector]:
    cfg = ctx.cfg
    if cfg.model == "reference":
        model = reference_model()
    else:
        model = RegressionModel.load_json(ctx.need("survey-fit", "regression_model.json"))
    if isinstance(cfg.means, dict):
        means = MeanVector(dict(cfg.means), "config")
    elif cfg.means == "calibrated":
        means = calibrated_means(model=model)
    else:
        data = json.loads(ctx.need("survey-fit", "survey_means.json").read_text(encoding="utf-8"))
        means = MeanVector(data["means"], "survey")
    return model, means


def _couple(ctx: _Ctx) -> None:
    cfg = ctx.cfg
    model, means = _model_and_means(ctx)
    b = json.loads(ctx.need("simulate", "baseline.json").read_text(encoding="utf-8"))
    baseline = Baseline(b["p0"], b["u0"], b["d0"])
    cset = read_candidates_csv(ctx.need("sweep", "candidates.csv"))
    for name in cfg.types:
        res = select_optimal(cset, model, means, cfg.value_type(name), baseline)
        ctx.write_text(f"selection_{name}.json", res.to_json())
        log.info("couple: type %s -> k=%d psi=%.6f", name, res.k_opt, res.psi_opt)


def _report(ctx: _Ctx) -> None:
    cset = read_candidates_csv(ctx.need("sweep", "candidates.csv"))
    highlights = {}
    for name in ctx.m.outputs("couple"):
        if name.startswith("selection_") and name.endswith(".json"):
            sel = json.loads(ctx.need("couple", name).read_text(encoding="utf-8"))
            highlights[f"Type {sel['type']}"] = int(sel["k_opt"])
    r = cset.result
    s, e, c, centroid = ternary_arrays(r.cost_p, r.utilization_u, r.circulation_d)
    x, y = ternary_xy(s, e, c)
    lines = ["k,social,ecological,economic,x,y,centroid_fallback"]
    for i, k in enumerate(cset.k):
        lines.append(f"{int(k)},{float(s[i])!r},{float(e[i])!r},{float(c[i])!r},{float(x[i])!r},{float(y[i])!r},{int(centroid[i])}")
    ctx.write_text("ternary.csv", "\n".join(lines) + "\n")
    ctx.write_text("ternary.svg", ternary_svg(cset, highlights, "Policy balance"))


_RUNNERS: dict[str, Callable[[_Ctx], None]] = {
    "survey-fit": _survey_fit,
    "ingest": _ingest,
    "simulate": _simulate,
    "sweep": _sweep,
    "couple": _couple,
    "report": _report,
}


def run_stage(cfg: RunConfig, stage: str) -> list[Path]:
    """Run one stage; returns the written artifact paths.

    Any failure is re-raised as a :class:`StageError` tagged with the stage;
    files already written stay on disk and the manifest marks the run incomplete.
    """
    if stage not in _RUNNERS:
        raise StageError(stage, f"unknown stage; expected one of {STAGES}")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(cfg.out_dir)
    ctx = _Ctx(cfg, manifest, stage)
    manifest.start(stage)
    try:
        _RUNNERS[stage](ctx)
    except StageError as exc:
        err = exc if exc.stage == stage else StageError(stage, str(exc))
        manifest.fail(stage, str(err), ctx.outputs)
        raise err from exc
    except (PolicyError, OSError, ValueError, KeyError) as exc:
        msg = str(exc)
        if isinstance(exc, FileNotFoundError) and exc.filename:
            msg = f"file not found: {exc.filename}"
        err = StageError(stage, msg or type(exc).__name__)
        manifest.fail(stage, str(err), ctx.outputs)
        raise err from exc
    manifest.finish(stage, ctx.inputs, ctx.outputs)
    return [cfg.out_dir / n for n in ctx.outputs]


def run_pipeline(cfg: RunConfig, stages=STAGES) -> Manifest:
    for stage in stages:
        run_stage(cfg, stage)
    return Manifest(cfg.out_dir)
