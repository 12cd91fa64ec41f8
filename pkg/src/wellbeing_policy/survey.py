"""Survey ingestion, correlation screening and the well-being regression.

The regression is the subjective target function: a resident's normalized
well-being answer explained linearly by the survey items that correlate
with it.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    CollinearityError,
    DegenerateItemError,
    DomainError,
    EmptyDataError,
    SurveyParseError,
    UndefinedCorrelationError,
)
from .stats import correlation_test, pearson_r, t_two_sided_p

log = logging.getLogger(__name__)

CLASSIFICATIONS = ("Human", "Society", "Ecology", "Economy", "Response", "Other")


@dataclass(frozen=True)
class ItemDescriptor:
    id: str
    text: str = ""
    tag: str = "Other"

    def __post_init__(self):
        if self.tag not in CLASSIFICATIONS:
            raise DomainError(f"item {self.id}: unknown classification {self.tag!r}")


@dataclass
class SurveyMatrix:
    """Respondents x items.

    ``raw_max`` is None while values are on their original scales; after
    :func:`normalize_items` it holds each item's divisor and every value
    lies in [0, 1].
    """

    items: tuple[ItemDescriptor, ...]
    values: np.ndarray
    raw_max: np.ndarray | None = None
    n_dropped: int = 0

    def __post_init__(self):
        self.items = tuple(self.items)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.items):
            raise DomainError(f"values shape {self.values.shape} does not match {len(self.items)} items")
        if len({it.id for it in self.items}) != len(self.items):
            raise DomainError("duplicate item ids")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("survey matrix must be complete (no missing values)")
        if self.raw_max is not None:
            self.raw_max = np.asarray(self.raw_max, dtype=float)
            if self.values.size and (self.values.min() < 0.0 or self.values.max() > 1.0):
                raise DomainError("normalized values must lie in [0, 1]")

    @property
    def ids(self) -> list[str]:
        return [it.id for it in self.items]

    @property
    def n_respondents(self) -> int:
        return self.values.shape[0]

    def index(self, item_id: str) -> int:
        for i, it in enumerate(self.items):
            if it.id == item_id:
                return i
        raise DomainError(f"unknown item {item_id!r}")

    def column(self, item_id: str) -> np.ndarray:
        return self.values[:, self.index(item_id)]

    def item(self, item_id: str) -> ItemDescriptor:
        return self.items[self.index(item_id)]

    def means(self, ids: Iterable[str]) -> dict[str, float]:
        return {i: float(self.column(i).mean()) for i in ids}

    def subset(self, ids: Sequence[str]) -> "SurveyMatrix":
        idx = [self.index(i) for i in ids]
        raw_max = None if self.raw_max is None else self.raw_max[idx]
        return SurveyMatrix(tuple(self.items[i] for i in idx), self.values[:, idx], raw_max, self.n_dropped)


def load_schema(path) -> list[ItemDescriptor]:
    """Read the item schema: a JSON list of ``{"id", "text", "tag"}`` objects."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise SurveyParseError(f"{path}: schema must be a JSON list of item objects")
    items = []
    for entry in raw:
        if "id" not in entry:
            raise SurveyParseError(f"{path}: schema entry without id: {entry!r}")
        items.append(ItemDescriptor(str(entry["id"]), entry.get("text", ""), entry.get("tag", "Other")))
    return items


def load_survey(path, schema: Sequence[ItemDescriptor]) -> SurveyMatrix:
    """Parse a survey CSV and keep only rows complete over the schema items.

    The result is on raw scales; pass it through :func:`normalize_items`.
    """
    schema = list(schema)
    ids = [it.id for it in schema]
    rows: list[list[float]] = []
    dropped = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SurveyParseError("file is empty", line=1) from None
        header = [h.strip() for h in header]
        missing = [i for i in ids if i not in header]
        extra = [h for h in header if h not in ids]
        if missing or extra:
            raise SurveyParseError(
                f"header does not match schema (missing: {missing or 'none'}, unexpected: {extra or 'none'})",
                line=1,
            )
        cols = [header.index(i) for i in ids]
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise SurveyParseError(f"expected {len(header)} fields, got {len(row)}", line=line)
            vals = []
            for c in cols:
                cell = row[c].strip()
                if cell == "":
                    vals.append(math.nan)
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise SurveyParseError(f"non-numeric value {cell!r} in column {header[c]}", line=line) from None
                if not math.isfinite(v):
                    raise SurveyParseError(f"non-finite value {cell!r} in column {header[c]}", line=line)
                vals.append(v)
            if any(math.isnan(v) for v in vals):
                dropped += 1
                continue
            rows.append(vals)
    if not rows:
        raise EmptyDataError(f"{path}: no complete rows ({dropped} incomplete rows dropped)")
    log.info("loaded %d complete rows from %s, dropped %d incomplete", len(rows), path, dropped)
    return SurveyMatrix(tuple(schema), np.array(rows, dtype=float), None, dropped)


def normalize_items(raw: SurveyMatrix) -> SurveyMatrix:
    """Divide each item by its maximum over the retained rows."""
    values = raw.values
    if values.shape[0] == 0:
        raise EmptyDataError("no rows to normalize")
    for j, it in enumerate(raw.items):
        if values[:, j].min() < 0.0:
            raise DegenerateItemError(it.id, "negative values cannot be max-normalized")
    col_max = values.max(axis=0)
    for j, it in enumerate(raw.items):
        if not col_max[j] > 0.0:
            raise DegenerateItemError(it.id)
    out = values / col_max
    return SurveyMatrix(raw.items, out, col_max.copy(), raw.n_dropped)


@dataclass(frozen=True)
class ItemCorrelation:
    id: str
    r: float | None
    t_stat: float | None
    p_value: float | None
    selected: bool
    tag: str = "Other"
    text: str = ""

    @property
    def scorable(self) -> bool:
        return self.r is not None


@dataclass
class CorrelationReport:
    response: str
    r_min: float
    p_max: float
    n_samples: int
    entries: list[ItemCorrelation] = field(default_factory=list)

    @property
    def selected_ids(self) -> list[str]:
        return [e.id for e in self.entries if e.selected]

    def get(self, item_id: str) -> ItemCorrelation:
        for e in self.entries:
            if e.id == item_id:
                return e
        raise KeyError(item_id)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "tag", "r", "t", "p", "selected", "text"])
            for e in self.entries:
                w.writerow([
                    e.id,
                    e.tag,
                    "" if e.r is None else repr(e.r),
                    "" if e.t_stat is None else repr(e.t_stat),
                    "" if e.p_value is None else repr(e.p_value),
                    int(e.selected),
                    e.text,
                ])


def _sort_key(e: ItemCorrelation):
    # scorable first, descending r, then id
    return (e.r is None, -(e.r if e.r is not None else 0.0), e.id)


def extract_explanatory(
    matrix: SurveyMatrix,
    response_item: str,
    r_min: float = 0.1,
    p_max: float = 0.05,
) -> CorrelationReport:
    """Score every non-response item against the response and flag the ones to keep.

    An item is selected when r >= r_min and p <= p_max. Zero-variance items
    are listed as unscorable and never selected.
    """
    if not -1.0 <= r_min <= 1.0:
        raise DomainError(f"r_min must lie in [-1, 1], got {r_min}")
    if not 0.0 <= p_max <= 1.0:
        raise DomainError(f"p_max must lie in [0, 1], got {p_max}")
    y = matrix.column(response_item)
    n = matrix.n_respondents
    entries = []
    for it in matrix.items:
        if it.id == response_item:
            continue
        try:
            r = pearson_r(matrix.column(it.id), y)
        except UndefinedCorrelationError:
            log.warning("item %s (or the response) has zero variance; not scored", it.id)
            entries.append(ItemCorrelation(it.id, None, None, None, False, it.tag, it.text))
            continue
        test = correlation_test(r, n)
        selected = r >= r_min and test.p_value <= p_max
        entries.append(ItemCorrelation(it.id, r, test.t_stat, test.p_value, selected, it.tag, it.text))
    entries.sort(key=_sort_key)
    return CorrelationReport(response_item, r_min, p_max, n, entries)


@dataclass
class RegressionModel:
    """Fitted linear model. Index 0 of the parameter arrays is the intercept."""

    variable_ids: tuple[str, ...]
    params: np.ndarray
    standard_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    r_squared: float
    n_obs: int
    response_id: str = "y"
    residuals: np.ndarray | None = None

    def __post_init__(self):
        self.variable_ids = tuple(self.variable_ids)
        self.params = np.asarray(self.params, dtype=float)
        if len(self.params) != len(self.variable_ids) + 1:
            raise DomainError("need exactly one coefficient per variable plus the intercept")

    @property
    def intercept(self) -> float:
        return float(self.params[0])

    @property
    def coefficients(self) -> np.ndarray:
        return self.params[1:]

    def coefficient(self, var_id: str) -> float:
        return float(self.params[1 + self.variable_ids.index(var_id)])

    def to_dict(self) -> dict:
        def rec(i, name):
            return {
                "id": name,
                "beta": float(self.params[i]),
                "se": float(self.standard_errors[i]),
                "t": float(self.t_stats[i]),
                "p": float(self.p_values[i]),
            }

        return {
            "response": self.response_id,
            "n": int(self.n_obs),
            "r_squared": float(self.r_squared),
            "intercept": rec(0, "intercept"),
            "coefficients": [rec(i + 1, v) for i, v in enumerate(self.variable_ids)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionModel":
        recs = [d["intercept"], *d["coefficients"]]
        return cls(
            variable_ids=tuple(r["id"] for r in d["coefficients"]),
            params=np.array([r["beta"] for r in recs]),
            standard_errors=np.array([r.get("se", math.nan) for r in recs]),
            t_stats=np.array([r.get("t", math.nan) for r in recs]),
            p_values=np.array([r.get("p", math.nan) for r in recs]),
            r_squared=float(d.get("r_squared", math.nan)),
            n_obs=int(d.get("n", 0)),
            response_id=d.get("response", "y"),
        )

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load_json(cls, path) -> "RegressionModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_ols(matrix: SurveyMatrix, response_item: str, explanatory_ids: Sequence[str]) -> RegressionModel:
    """Least squares with intercept, solved by column-pivoted QR."""
    explanatory_ids = list(explanatory_ids)
    if response_item in explanatory_ids:
        raise DomainError("response item cannot also be explanatory")
    y = matrix.column(response_item)
    X = np.column_stack([np.ones(matrix.n_respondents)] + [matrix.column(i) for i in explanatory_ids])
    names = ["intercept"] + explanatory_ids
    return _fit(X, y, names, response_item)


def fit_arrays(X, y, names: Sequence[str] | None = None, response_id: str = "y") -> RegressionModel:
    """Fit on a bare design (no intercept column; one is added)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    names = list(names) if names is not None else [f"x{i + 1}" for i in range(X.shape[1])]
    design = np.column_stack([np.ones(X.shape[0]), X])
    return _fit(design, np.asarray(y, dtype=float), ["intercept"] + names, response_id)


def _fit(X: np.ndarray, y: np.ndarray, names: list[str], response_id: str) -> RegressionModel:
    n, k = X.shape
    if n < k + 1:
        raise DomainError(f"need at least {k + 1} rows for {k} columns, got {n}")
    Q, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(n, k) * np.finfo(float).eps * 1e3 * diag[0]
    rank = int(np.sum(diag > tol))
    if rank < k:
        raise CollinearityError([names[j] for j in sorted(piv[rank:])])

    z = scipy.linalg.solve_triangular(R, Q.T @ y)
    beta = np.empty(k)
    beta[piv] = z
    fitted = X @ beta
    resid = y - fitted
    dof = n - k
    sse = float(resid @ resid)
    centered = y - y.mean()
    sst = float(centered @ centered)
    if sst == 0.0:
        raise DomainError("response has zero variance")
    s2 = sse / dof
    r_inv = scipy.linalg.solve_triangular(R, np.eye(k))
    cov_piv = r_inv @ r_inv.T
    cov = np.empty((k, k))
    cov[np.ix_(piv, piv)] = cov_piv
    se = np.sqrt(s2 * np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / se, np.copysign(np.inf, beta))
    p = np.asarray(t_two_sided_p(t, dof), dtype=float).reshape(k)
    return RegressionModel(
        variable_ids=tuple(names[1:]),
        params=beta,
        standard_errors=se,
        t_stats=t,
        p_values=p,
        r_squared=1.0 - sse / sst,
        n_obs=n,
        response_id=response_id,
        residuals=resid,
    )


def predict(model: RegressionModel, x) -> float | np.ndarray:
    """beta0 + sum(beta_i * x_i). ``x`` may be one vector or a rows x vars array."""
    x = np.asarray(x, dtype=float)
    k = len(model.variable_ids)
    if x.shape[-1:] != (k,):
        raise DomainError(f"expected {k} explanatory values, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("explanatory values must be finite")
    y = model.params[0]
    for i in range(k):
        y = y + model.params[i + 1] * x[..., i]
    return float(y) if np.ndim(y) == 0 else y
