"""Config-driven GA dating formulas."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from gaest.errors import ConfigError, FormulaEvalError
from gaest.formulae.expr import VARIABLES, Node, evaluate, parse_expression, variables_of

OUTPUT_UNITS = ("weeks", "days")
DAYS_PER_WEEK = 7


@dataclass(frozen=True)
class FormulaSpec:
    name: str
    expression: str
    output_unit: str = "days"
    ga_range_days: tuple[float, float] = (0.0, math.inf)
    required_vars: frozenset = frozenset()
    ast: Node = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if self.output_unit not in OUTPUT_UNITS:
            raise ConfigError(f"formula {self.name}: output_unit must be one of {OUTPUT_UNITS}")
        lo, hi = self.ga_range_days
        if not lo < hi:
            raise ConfigError(f"formula {self.name}: ga_range_days needs lo < hi, got {self.ga_range_days}")
        object.__setattr__(self, "ga_range_days", (float(lo), float(hi)))
        ast = parse_expression(self.expression)
        used = variables_of(ast)
        required = frozenset(self.required_vars) or frozenset(used)
        unknown = required - set(VARIABLES)
        if unknown:
            raise ConfigError(f"formula {self.name}: unknown required_vars {sorted(unknown)}")
        if not used <= required:
            raise ConfigError(
                f"formula {self.name}: expression uses undeclared variables {sorted(used - required)}"
            )
        object.__setattr__(self, "required_vars", required)
        object.__setattr__(self, "ast", ast)

    @classmethod
    def from_dict(cls, d: dict) -> "FormulaSpec":
        try:
            lo, hi = d.get("ga_range_days", (0.0, math.inf))
            return cls(d["name"], d["expression"], d.get("output_unit", "days"), (lo, hi),
                       frozenset(d.get("required_vars", ())))
        except KeyError as exc:
            raise ConfigError(f"formula entry missing field {exc.args[0]!r}") from None


@dataclass(frozen=True)
class FormulaResult:
    name: str
    ga_days: float
    out_of_range: bool


def load_library(path) -> dict[str, FormulaSpec]:
    raw = json.loads(Path(path).read_text())
    entries = raw["formulas"] if isinstance(raw, dict) else raw
    library: dict[str, FormulaSpec] = {}
    for entry in entries:
        spec = FormulaSpec.from_dict(entry)
        if spec.name in library:
            raise ConfigError(f"duplicate formula name {spec.name!r}")
        library[spec.name] = spec
    return library


def example_library_path() -> Path:
    return Path(__file__).with_name("example_formulas.json")


def eval_formula(spec: FormulaSpec, measurements) -> FormulaResult:
    """Evaluate ``spec`` on measurements in cm; the result is always in days."""
    missing = sorted(v for v in spec.required_vars if measurements.get(v) is None)
    if missing:
        raise FormulaEvalError(f"formula {spec.name}: missing variable(s) {', '.join(missing)}")
    value = evaluate(spec.ast, measurements)
    if spec.output_unit == "weeks":
        value *= DAYS_PER_WEEK
    if not math.isfinite(value):
        raise FormulaEvalError(f"formula {spec.name}: result is not finite")
    lo, hi = spec.ga_range_days
    return FormulaResult(spec.name, value, not lo <= value <= hi)


def baseline_estimates(visit, library: dict[str, FormulaSpec], formula_names=None):
    """Per-formula GA in days plus the reasons any formula was skipped.

    A value recorded on the visit under the same name takes precedence over
    the engine's output.
    """
    names = list(formula_names) if formula_names is not None else sorted(library)
    recorded = dict(visit.formula_ga_estimates or {})
    measurements = visit.biometry.available()
    results: dict[str, float] = {}
    skipped: dict[str, str] = {}
    for name in names:
        if name in recorded:
            results[name] = float(recorded[name])
            continue
        if name not in library:
            skipped[name] = "no such formula in library"
            continue
        spec = library[name]
        missing = sorted(v for v in spec.required_vars if v not in measurements)
        if missing:
            skipped[name] = f"missing {', '.join(missing)}"
            continue
        try:
            results[name] = eval_formula(spec, measurements).ga_days
        except FormulaEvalError as exc:
            skipped[name] = str(exc)
    return results, skipped
