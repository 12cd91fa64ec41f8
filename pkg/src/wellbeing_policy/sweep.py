"""Candidate policy grid, batch evaluation and ternary balance coordinates."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, GridTooLargeError, SimulationError
from .mabs import AgentConfig, BatchResult, PolicyIndices, PolicyParams, simulate_batch

AXES = ("pv", "hydro", "battery")
DEFAULT_MAX_CANDIDATES = 1_000_000


@dataclass(frozen=True)
class AxisRange:
    min: float
    max: float
    step: float

    def __post_init__(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max) and math.isfinite(self.step)):
            raise DomainError("axis bounds must be finite")
        if self.step <= 0:
            raise DomainError(f"step must be positive, got {self.step}")
        if self.min < 0 or self.max < self.min:
            raise DomainError(f"need 0 <= min <= max, got [{self.min}, {self.max}]")

    @property
    def count(self) -> int:
        return int(math.floor((self.max - self.min) / self.step + 1e-9)) + 1

    def values(self) -> np.ndarray:
        return self.min + np.arange(self.count) * self.step


@dataclass(frozen=True)
class SweepGrid:
    pv: AxisRange
    hydro: AxisRange
    battery: AxisRange
    max_candidates: int = DEFAULT_MAX_CANDIDATES

    n_parameters = 3

    @property
    def size(self) -> int:
        return self.pv.count * self.hydro.count * self.battery.count


# 50 x 40 x 10 = 20,000 candidates
DEFAULT_GRID = SweepGrid(
    pv=AxisRange(0.0, 980.0, 20.0),
    hydro=AxisRange(0.0, 78.0, 2.0),
    battery=AxisRange(0.0, 450.0, 50.0),
)


def grid_arrays(spec: SweepGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-major Cartesian product: pv outermost, battery innermost."""
    if spec.size > spec.max_candidates:
        raise GridTooLargeError(f"grid has {spec.size} candidates, above the limit {spec.max_candidates}")
    pv, hy, bat = np.meshgrid(spec.pv.values(), spec.hydro.values(), spec.battery.values(), indexing="ij")
    return pv.ravel(), hy.ravel(), bat.ravel()


def generate_grid(spec: SweepGrid) -> list[PolicyParams]:
    pv, hy, bat = grid_arrays(spec)
    return [PolicyParams(float(a), float(b), float(c), k) for k, (a, b, c) in enumerate(zip(pv, hy, bat), start=1)]


@dataclass
class CandidateSet:
    """Evaluated candidates, k = 1..l in order."""

    result: BatchResult
    k: np.ndarray = None
    index_names: tuple[str, ...] = ("cost", "u", "d")

    def __post_init__(self):
        if self.k is None:
            self.k = np.arange(1, len(self.result) + 1)
        if len(self.k) != len(self.result):
            raise DomainError("k and results differ in length")

    def __len__(self) -> int:
        return len(self.result)

    @property
    def m(self) -> int:
        return len(self.index_names)

    def _pos(self, k: int) -> int:
        pos = int(np.searchsorted(self.k, k))
        if pos >= len(self.k) or self.k[pos] != k:
            raise KeyError(k)
        return pos

    def params(self, k: int) -> PolicyParams:
        i = self._pos(k)
        r = self.result
        return PolicyParams(float(r.pv_capacity[i]), float(r.hydro_drop[i]), float(r.battery_capacity[i]), int(k))

    def indices(self, k: int) -> PolicyIndices:
        return self.result.indices(self._pos(k))


def _params_arrays(candidates) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(candidates, SweepGrid):
        pv, hy, bat = grid_arrays(candidates)
        return pv, hy, bat, np.arange(1, len(pv) + 1)
    cands = list(candidates)
    ks = np.array([c.k if c.k else i + 1 for i, c in enumerate(cands)], dtype=np.int64)
    if len(set(ks.tolist())) != len(ks):
        raise DomainError("candidate indices k must be unique")
    pv = np.array([c.pv_capacity for c in cands], dtype=float)
    hy = np.array([c.hydro_drop for c in cands], dtype=float)
    bat = np.array([c.battery_capacity for c in cands], dtype=float)
    order = np.argsort(ks, kind="stable")
    return pv[order], hy[order], bat[order], ks[order]


def _run_chunk(args):
    pv, hy, bat, pvp, hyp, dem, config = args
    return simulate_batch(pv, hy, bat, pvp, hyp, dem, config)


def _concat(parts: Sequence[BatchResult]) -> BatchResult:
    names = [f for f in BatchResult.__dataclass_fields__ if f != "max_balance_error"]
    merged = {n: np.concatenate([getattr(p, n) for p in parts]) for n in names}
    return BatchResult(**merged, max_balance_error=max((p.max_balance_error for p in parts), default=0.0))


def evaluate_all(
    candidates,
    pv_profile,
    hydro_profile,
    demand,
    config: AgentConfig,
    workers: int = 1,
    chunk_size: int = 2500,
) -> CandidateSet:
    """Simulate every candidate. Output is ordered by k whatever the worker count."""
    pv, hy, bat, ks = _params_arrays(candidates)
    if len(ks) == 0:
        raise DomainError("no candidates to evaluate")
    pvp = np.asarray(getattr(pv_profile, "hourly", pv_profile), dtype=float)
    hyp = np.asarray(getattr(hydro_profile, "hourly", hydro_profile), dtype=float)
    dem = np.asarray(getattr(demand, "hourly", demand), dtype=float)
    bounds = list(range(0, len(ks), chunk_size)) + [len(ks)]
    tasks = [(pv[a:b], hy[a:b], bat[a:b], pvp, hyp, dem, config) for a, b in zip(bounds[:-1], bounds[1:])]
    try:
        if workers <= 1 or len(tasks) == 1:
            parts = [_run_chunk(t) for t in tasks]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_run_chunk, tasks))
    except SimulationError as exc:
        raise _locate(exc, tasks, ks, bounds) from exc
    return CandidateSet(_concat(parts), ks)


def _locate(exc: SimulationError, tasks, ks, bounds) -> SimulationError:
    # re-run chunks serially to find the first failing candidate
    for (a, _), t in zip(zip(bounds[:-1], bounds[1:]), tasks):
        try:
            _run_chunk(t)
        except SimulationError as inner:
            k = int(ks[a + (inner.index or 0)])
            return SimulationError(f"candidate k={k}: {inner}", index=k)
    return exc


@dataclass(frozen=True)
class TernaryPoint:
    social: float
    ecological: float
    economic: float
    k: int
    centroid_fallback: bool = False


def ternary_arrays(cost, utilization, circulation) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Shares (social, ecological, economic) and a fallback mask.

    Scores are s = d, e = u, c = p_min / p; shares are scores over their sum.
    An all-zero score triple maps to the centroid.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0:
        raise DomainError("empty candidate set")
    if np.any(cost <= 0):
        raise DomainError("ternary economic score needs positive costs")
    s = np.asarray(circulation, dtype=float)
    e = np.asarray(utilization, dtype=float)
    c = cost.min() / cost
    total = s + e + c
    fallback = total <= 0
    safe = np.where(fallback, 1.0, total)
    third = 1.0 / 3.0
    return (
        np.where(fallback, third, s / safe),
        np.where(fallback, third, e / safe),
        np.where(fallback, third, c / safe),
        fallback,
    )


def shares_from_scores(social, ecological, economic) -> tuple[float, float, float]:
    total = social + ecological + economic
    if total <= 0:
        return (1 / 3, 1 / 3, 1 / 3)
    return (social / total, ecological / total, economic / total)


def ternary_coords(cset: CandidateSet) -> list[TernaryPoint]:
    r = cset.result
    s, e, c, fb = ternary_arrays(r.cost_p, r.utilization_u, r.circulation_d)
    return [TernaryPoint(float(a), float(b), float(x), int(k), bool(f)) for a, b, x, k, f in zip(s, e, c, cset.k, fb)]


CSV_COLUMNS = (
    "k", "pv_kw", "hydro_m", "battery_kwh", "cost", "u", "d", "grid_purchase",
    "pv_kwh", "hydro_kwh", "curtailed_kwh", "import_kwh", "renewable_kwh", "local_spend",
    "social", "ecological", "economic",
)
_FIELDS = (
    "pv_capacity", "hydro_drop", "battery_capacity", "cost_p", "utilization_u", "circulation_d",
    "grid_purchase", "annual_pv_kwh", "annual_hydro_kwh", "curtailed_kwh", "grid_import_kwh",
    "renewable_served_kwh", "local_spend",
)


def candidates_csv_text(cset: CandidateSet) -> str:
    r = cset.result
    s, e, c, _ = ternary_arrays(r.cost_p, r.utilization_u, r.circulation_d)
    cols = [getattr(r, f).tolist() for f in _FIELDS] + [s.tolist(), e.tolist(), c.tolist()]
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for i, k in enumerate(cset.k.tolist()):
        buf.write(str(k))
        for col in cols:
            buf.write(",")
            buf.write(repr(col[i]))
        buf.write("\n")
    return buf.getvalue()


def write_candidates_csv(cset: CandidateSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(candidates_csv_text(cset))


def read_candidates_csv(path) -> CandidateSet:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header[: len(CSV_COLUMNS)]) != CSV_COLUMNS:
            raise DomainError(f"{path}: unexpected candidates header {header}")
        rows = [row for row in reader if row]
    ks = np.array([int(row[0]) for row in rows], dtype=np.int64)
    data = np.array([[float(v) for v in row[1 : 1 + len(_FIELDS)]] for row in rows], dtype=float)
    if data.size == 0:
        data = data.reshape(0, len(_FIELDS))
    fields = {f: data[:, j].copy() for j, f in enumerate(_FIELDS)}
    return CandidateSet(BatchResult(**fields), ks)


# fixed layout: social at the top, ecological bottom left, economic bottom right
_VIEW_W, _VIEW_H = 640.0, 600.0
_SIDE = 520.0
_LEFT = ((_VIEW_W - _SIDE) / 2, 520.0)
_RIGHT = (_LEFT[0] + _SIDE, 520.0)
_TOP = (_VIEW_W / 2, 520.0 - _SIDE * math.sqrt(3) / 2)
HIGHLIGHT_COLORS = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def ternary_xy(social, ecological, economic) -> tuple[np.ndarray, np.ndarray]:
    s, e, c = (np.asarray(v, dtype=float) for v in (social, ecological, economic))
    x = s * _TOP[0] + e * _LEFT[0] + c * _RIGHT[0]
    y = s * _TOP[1] + e * _LEFT[1] + c * _RIGHT[1]
    return x, y


def _f(v: float) -> str:
    out = f"{v:.4f}"
    return "0.0000" if out == "-0.0000" else out


def ternary_svg(cset: CandidateSet, highlights: dict[str, int] | None = None, title: str = "") -> str:
    """Deterministic SVG scatter of the candidates' ternary shares.

    ``highlights`` maps a label (e.g. a value-type name) to a candidate k.
    """
    r = cset.result
    s, e, c, _ = ternary_arrays(r.cost_p, r.utilization_u, r.circulation_d)
    x, y = ternary_xy(s, e, c)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(_VIEW_W)}" height="{int(_VIEW_H)}" '
        f'viewBox="0 0 {int(_VIEW_W)} {int(_VIEW_H)}">',
        f'<rect width="{int(_VIEW_W)}" height="{int(_VIEW_H)}" fill="#ffffff"/>',
        f'<polygon points="{_f(_TOP[0])},{_f(_TOP[1])} {_f(_LEFT[0])},{_f(_LEFT[1])} {_f(_RIGHT[0])},{_f(_RIGHT[1])}" '
        'fill="none" stroke="#000000" stroke-width="1"/>',
        f'<text x="{_f(_TOP[0])}" y="{_f(_TOP[1] - 10)}" text-anchor="middle" font-size="14">Social</text>',
        f'<text x="{_f(_LEFT[0])}" y="{_f(_LEFT[1] + 22)}" text-anchor="middle" font-size="14">Ecological</text>',
        f'<text x="{_f(_RIGHT[0])}" y="{_f(_RIGHT[1] + 22)}" text-anchor="middle" font-size="14">Economic</text>',
    ]
    if title:
        out.append(f'<text x="10" y="20" font-size="14">{_escape(title)}</text>')
    out.append('<g fill="#7f7f7f" fill-opacity="0.5">')
    for k, xi, yi in zip(cset.k.tolist(), x.tolist(), y.tolist()):
        out.append(f'<circle cx="{_f(xi)}" cy="{_f(yi)}" r="1.5" data-k="{k}"/>')
    out.append("</g>")
    for j, (label, k) in enumerate(sorted((highlights or {}).items())):
        i = cset._pos(k)
        color = HIGHLIGHT_COLORS[j % len(HIGHLIGHT_COLORS)]
        out.append(
            f'<circle cx="{_f(x[i])}" cy="{_f(y[i])}" r="6" fill="none" stroke="{color}" stroke-width="2" '
            f'data-k="{k}" data-label="{_escape(label)}"/>'
        )
        out.append(
            f'<text x="{_f(x[i] + 8)}" y="{_f(y[i] - 8)}" font-size="12" fill="{color}">{_escape(label)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
