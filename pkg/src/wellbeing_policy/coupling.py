"""Coupling target function: the well-being regression re-evaluated with
explanatory means scaled by policy-KPI modifiers, and argmax selection.

A value type says which survey variables react to which KPI. Each reacting
variable's mean is multiplied by the KPI factors listed for it:

* ``cost``        1 / (1 + s_elec * (p / p0 - 1))
* ``renewable``   (1 + u) / (1 + u0)
* ``circulation`` (1 + d) / (1 + d0)

Variables with a negative coefficient are modified the same way, so a
factor above 1 makes their (negative) contribution larger in magnitude.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DomainError
from .mabs import PolicyIndices, PolicyParams
from .survey import RegressionModel, predict

MODIFIER_NAMES = ("cost", "renewable", "circulation")
DEFAULT_S_ELEC = 0.037


@dataclass(frozen=True)
class Baseline:
    p0: float
    u0: float = 0.0
    d0: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.p0) and self.p0 > 0):
            raise DomainError(f"baseline cost p0 must be positive, got {self.p0}")
        for name in ("u0", "d0"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"baseline {name} must lie in [0, 1], got {v}")

    def to_dict(self) -> dict:
        return {"p0": self.p0, "u0": self.u0, "d0": self.d0}


@dataclass(frozen=True)
class MeanVector:
    values: Mapping[str, float]
    source: str = "survey"
    unanchored: tuple[str, ...] = ()

    def __post_init__(self):
        for k, v in self.values.items():
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"mean of {k} must lie in [0, 1], got {v}")

    def vector(self, ids: Sequence[str]) -> np.ndarray:
        missing = [i for i in ids if i not in self.values]
        if missing:
            raise DomainError(f"means missing for variables {missing}")
        return np.array([self.values[i] for i in ids], dtype=float)


@dataclass(frozen=True)
class ValueTypeSpec:
    name: str
    modifiers: Mapping[str, tuple[str, ...]]
    s_elec: float = DEFAULT_S_ELEC

    def __post_init__(self):
        if not 0.0 < self.s_elec < 1.0:
            raise ConfigError([("s_elec", f"must lie in (0, 1), got {self.s_elec}")])
        for var, mods in self.modifiers.items():
            for m in mods:
                if m not in MODIFIER_NAMES:
                    raise ConfigError([(f"{self.name}.{var}", f"unknown modifier {m!r}; expected one of {MODIFIER_NAMES}")])

    @property
    def s_other(self) -> float:
        return 1.0 - self.s_elec

    def modifiers_for(self, var_id: str) -> tuple[str, ...]:
        return tuple(self.modifiers.get(var_id, ()))

    def check_against(self, model: RegressionModel) -> None:
        unknown = [v for v in self.modifiers if v not in model.variable_ids]
        if unknown:
            raise DomainError(f"value type {self.name}: modifiers reference unknown variables {unknown}")

    def to_dict(self) -> dict:
        return {"name": self.name, "s_elec": self.s_elec, "modifiers": {k: list(v) for k, v in self.modifiers.items()}}


def builtin_presets(s_elec: float = DEFAULT_S_ELEC) -> list[ValueTypeSpec]:
    """Types A, B and C over the eight-variable model x1..x8."""
    return [
        ValueTypeSpec("A", {"x8": ("cost",)}, s_elec),
        ValueTypeSpec("B", {"x6": ("renewable",), "x8": ("circulation", "cost")}, s_elec),
        ValueTypeSpec(
            "C",
            {
                "x3": ("circulation", "renewable"),
                "x4": ("renewable",),
                "x6": ("renewable",),
                "x8": ("circulation", "cost"),
            },
            s_elec,
        ),
    ]


def preset(name: str, s_elec: float = DEFAULT_S_ELEC) -> ValueTypeSpec:
    for p in builtin_presets(s_elec):
        if p.name == name:
            return p
    raise ConfigError([("types", f"unknown value type {name!r}")])


def _unit_interval(name, v):
    a = np.asarray(v, dtype=float)
    if np.any(~(a >= 0.0)) or np.any(a > 1.0):
        raise DomainError(f"{name} must lie in [0, 1]")


def cost_modifier(p, p0, s_elec: float = DEFAULT_S_ELEC):
    """1 / (s_other + s_elec * p / p0), written so that p == p0 gives exactly 1."""
    if not p0 > 0:
        raise DomainError(f"p0 must be positive, got {p0}")
    if np.any(np.asarray(p) < 0):
        raise DomainError("cost p must be nonnegative")
    if not 0.0 < s_elec < 1.0:
        raise DomainError(f"s_elec must lie in (0, 1), got {s_elec}")
    return 1.0 / (1.0 + s_elec * (p / p0 - 1.0))


def renewable_modifier(u, u0):
    _unit_interval("u", u)
    _unit_interval("u0", u0)
    return (1.0 + u) / (1.0 + u0)


def circulation_modifier(d, d0):
    _unit_interval("d", d)
    _unit_interval("d0", d0)
    return (1.0 + d) / (1.0 + d0)


def _factor(name: str, p, u, d, baseline: Baseline, s_elec: float):
    if name == "cost":
        return cost_modifier(p, baseline.p0, s_elec)
    if name == "renewable":
        return renewable_modifier(u, baseline.u0)
    if name == "circulation":
        return circulation_modifier(d, baseline.d0)
    raise ConfigError([("modifiers", f"unknown modifier {name!r}")])


def _chi(x, mods, p, u, d, baseline, s_elec):
    out = x
    for m in mods:
        out = out * _factor(m, p, u, d, baseline, s_elec)
    return out


def chi(x_i: float, spec: ValueTypeSpec, indices: PolicyIndices, baseline: Baseline, var_id: str) -> float:
    """x_i times the product of the KPI factors the value type attaches to ``var_id``."""
    p, u, d = indices.as_tuple()
    return float(_chi(x_i, spec.modifiers_for(var_id), p, u, d, baseline, spec.s_elec))


def psi_arrays(model: RegressionModel, means: MeanVector, spec: ValueTypeSpec, cost, utilization, circulation, baseline: Baseline):
    """Coupling target for arrays (or scalars) of KPIs."""
    spec.check_against(model)
    x = means.vector(model.variable_ids)
    psi = model.params[0]
    for i, var in enumerate(model.variable_ids):
        c = _chi(x[i], spec.modifiers_for(var), cost, utilization, circulation, baseline, spec.s_elec)
        psi = psi + model.params[i + 1] * c
    return psi


def evaluate_psi(model: RegressionModel, means: MeanVector, spec: ValueTypeSpec, indices: PolicyIndices, baseline: Baseline) -> float:
    p, u, d = indices.as_tuple()
    return float(psi_arrays(model, means, spec, p, u, d, baseline))


def uncoupled(model: RegressionModel, means: MeanVector) -> float:
    return predict(model, means.vector(model.variable_ids))


@dataclass
class CouplingResult:
    spec: ValueTypeSpec
    psi: np.ndarray  # ordered like the candidate set
    k: np.ndarray
    k_opt: int
    params_opt: PolicyParams
    indices_opt: PolicyIndices
    chi_opt: dict[str, float]
    baseline: Baseline
    means: MeanVector

    @property
    def psi_opt(self) -> float:
        return float(self.psi[int(np.searchsorted(self.k, self.k_opt))])

    def to_dict(self) -> dict:
        p = self.params_opt
        a = self.indices_opt
        return {
            "type": self.spec.name,
            "k_opt": int(self.k_opt),
            "psi_opt": self.psi_opt,
            "psi_out_of_unit_range": not (0.0 <= self.psi_opt <= 1.0),
            "n_candidates": int(len(self.psi)),
            "P": {"pv_kw": p.pv_capacity, "hydro_m": p.hydro_drop, "battery_kwh": p.battery_capacity},
            "A": {
                "cost": a.cost_p,
                "u": a.utilization_u,
                "d": a.circulation_d,
                "grid_purchase": a.grid_purchase,
                "pv_kwh": a.annual_pv_kwh,
                "hydro_kwh": a.annual_hydro_kwh,
                "curtailed_kwh": a.curtailed_kwh,
            },
            "chi": self.chi_opt,
            "baseline": self.baseline.to_dict(),
            "means": {"values": dict(self.means.values), "source": self.means.source, "unanchored": list(self.means.unanchored)},
            "value_type": self.spec.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def select_optimal(cset, model: RegressionModel, means: MeanVector, spec: ValueTypeSpec, baseline: Baseline) -> CouplingResult:
    """argmax over candidates of the coupling target; ties go to the smallest k."""
    if len(cset) == 0:
        raise DomainError("empty candidate set")
    r = cset.result
    psi = np.asarray(psi_arrays(model, means, spec, r.cost_p, r.utilization_u, r.circulation_d, baseline), dtype=float)
    psi = np.broadcast_to(psi, (len(cset),)).copy()
    if not np.all(np.isfinite(psi)):
        raise DomainError("coupling target is not finite for some candidates")
    order = np.argsort(cset.k, kind="stable")
    best = order[int(np.argmax(psi[order]))]
    k_opt = int(cset.k[best])
    indices = cset.indices(k_opt)
    x = means.vector(model.variable_ids)
    chi_opt = {v: chi(float(x[i]), spec, indices, baseline, v) for i, v in enumerate(model.variable_ids)}
    return CouplingResult(spec, psi, np.asarray(cset.k), k_opt, cset.params(k_opt), indices, chi_opt, baseline, means)


def delta_coefficients(model: RegressionModel, spec: ValueTypeSpec, indices: PolicyIndices, baseline: Baseline) -> dict[str, float]:
    """c_i with psi - psi(baseline) = sum_i c_i * x_i for the given KPIs."""
    spec.check_against(model)
    p, u, d = indices.as_tuple()
    out = {}
    for i, var in enumerate(model.variable_ids):
        mods = spec.modifiers_for(var)
        if mods:
            out[var] = float(model.params[i + 1]) * (float(_chi(1.0, mods, p, u, d, baseline, spec.s_elec)) - 1.0)
    return out


@dataclass(frozen=True)
class LinearConstraint:
    """sum(coefficients[v] * x_v) == rhs over means not pinned by calibration."""

    coefficients: Mapping[str, float]
    rhs: float

    def feasible_in_unit_box(self) -> bool:
        lo = sum(min(c, 0.0) for c in self.coefficients.values())
        hi = sum(max(c, 0.0) for c in self.coefficients.values())
        return lo <= self.rhs <= hi


@dataclass
class Calibration:
    means: dict[str, float] = field(default_factory=dict)
    constraints: list[LinearConstraint] = field(default_factory=list)


def calibrate_means(
    model: RegressionModel,
    equations: Sequence[tuple[ValueTypeSpec, PolicyIndices, float]],
    baseline: Baseline,
    known: Mapping[str, float] | None = None,
) -> Calibration:
    """Back out explanatory means from known psi deltas.

    Equations are processed in order. One with a single unknown mean solves
    it; one with several unknowns is returned as a residual constraint.
    """
    cal = Calibration(dict(known or {}))
    for spec, indices, delta in equations:
        coeffs = delta_coefficients(model, spec, indices, baseline)
        rhs = delta - sum(c * cal.means[v] for v, c in coeffs.items() if v in cal.means)
        unknown = {v: c for v, c in coeffs.items() if v not in cal.means}
        if not unknown:
            continue
        if len(unknown) == 1:
            (v, c), = unknown.items()
            if c == 0.0:
                raise DomainError(f"delta of type {spec.name} does not depend on {v}")
            cal.means[v] = float(rhs / c)
        else:
            cal.constraints.append(LinearConstraint(unknown, float(rhs)))
    return cal
