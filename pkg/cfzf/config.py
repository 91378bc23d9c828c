"""
Experiment Configuration Module

Parses and validates the JSON experiment documents that drive the runner.
"""

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .combining import Regularization, Scheme
from .lsfd import Method
from .power import PowerMode
from .scenario import ScenarioConfig


SWEEP_PARAMETERS = ("N", "L", "tau_p", "K")


class ConfigError(Exception):
    """Exception raised when an experiment document is invalid."""

    def __init__(self, message: str, problems: Optional[List[str]] = None):
        super().__init__(message)
        self.problems = problems or []


@dataclass(frozen=True)
class CouplingRule:
    """Derives another parameter from the swept value: product / value or scale * value."""
    parameter: str
    product: Optional[float] = None
    scale: Optional[float] = None

    def apply(self, value: float) -> float:
        if self.product is not None:
            return self.product / value
        return self.scale * value


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: Tuple[int, ...]
    couple: Tuple[CouplingRule, ...] = ()


@dataclass(frozen=True)
class ExperimentSpec:
    """
    One experiment: scenario, schemes, evaluation methods and sweep.

    Use ``ExperimentSpec.from_dict`` / ``load_experiment_spec`` to build one
    from JSON; both validate.
    """
    scenario: ScenarioConfig
    schemes: Tuple[Scheme, ...]
    power_mode: PowerMode = PowerMode.FULL
    drops: int = 50
    sweep: Optional[SweepSpec] = None
    output_path: str = "runs.csv"
    methods: Tuple[Method, ...] = (Method.CLOSED_FORM, Method.MONTE_CARLO)
    alpha: float = 0.8
    fractional_exponent: float = 1.0
    lrzf_regularization: Regularization = Regularization.SUM
    chunk_trials: int = 50
    validation_tolerance: float = 0.02
    asymptotic_tolerance: float = 0.05

    @property
    def zf_family(self) -> bool:
        return Scheme.FZF in self.schemes

    def points(self) -> List[Tuple[Optional[int], ScenarioConfig]]:
        """Scenario of every sweep point as (swept value, config); one point without a sweep."""
        if self.sweep is None:
            return [(None, self.scenario)]

        result = []
        for value in self.sweep.values:
            changes = {self.sweep.parameter: int(value)}
            for rule in self.sweep.couple:
                derived = rule.apply(value)
                if abs(derived - round(derived)) > 1e-9:
                    raise ConfigError(f"coupling {rule.parameter} gives non-integral "
                                      f"value {derived} at {self.sweep.parameter}={value}")
                changes[rule.parameter] = int(round(derived))
            result.append((int(value), dataclasses.replace(self.scenario, **changes)))
        return result

    def validate(self):
        """
        Check every invariant of the experiment and every sweep point.

        Raises:
            ConfigError: Listing all problems found
        """
        problems = []
        if not self.schemes:
            problems.append("at least one scheme is required")
        if not self.methods:
            problems.append("at least one method is required")
        if self.drops < 1:
            problems.append(f"drops must be >= 1 (got {self.drops})")
        if self.alpha <= 0:
            problems.append(f"alpha must be positive (got {self.alpha})")
        if self.chunk_trials < 1:
            problems.append(f"chunk_trials must be >= 1 (got {self.chunk_trials})")
        if self.sweep is not None:
            if self.sweep.parameter not in SWEEP_PARAMETERS:
                problems.append(f"sweep parameter must be one of {SWEEP_PARAMETERS}")
            if not self.sweep.values:
                problems.append("sweep needs at least one value")
            for rule in self.sweep.couple:
                if rule.parameter not in SWEEP_PARAMETERS or rule.parameter == self.sweep.parameter:
                    problems.append(f"invalid coupled parameter {rule.parameter!r}")
                if (rule.product is None) == (rule.scale is None):
                    problems.append(f"coupling of {rule.parameter!r} needs exactly one of product/scale")

        if not problems:
            try:
                points = self.points()
            except (ConfigError, ZeroDivisionError) as e:
                problems.append(str(e))
                points = []
            for value, scenario in points:
                label = "scenario" if value is None else f"{self.sweep.parameter}={value}"
                problems.extend(f"{label}: {p}" for p in scenario.problems(self.zf_family))

        if problems:
            raise ConfigError("invalid experiment spec: " + "; ".join(problems), problems)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentSpec":
        """Build and validate a spec from a parsed JSON document."""
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        if 'scenario' not in data or 'schemes' not in data:
            raise ConfigError("experiment spec needs 'scenario' and 'schemes'")

        data = dict(data)
        try:
            data['scenario'] = ScenarioConfig.from_dict(data['scenario'])
            data['schemes'] = tuple(Scheme(s) for s in data['schemes'])
            if 'power_mode' in data:
                data['power_mode'] = PowerMode(data['power_mode'])
            if 'methods' in data:
                data['methods'] = tuple(Method(m) for m in data['methods'])
            if 'lrzf_regularization' in data:
                data['lrzf_regularization'] = Regularization(data['lrzf_regularization'])
            if data.get('sweep') is not None:
                sweep = dict(data['sweep'])
                couple = sweep.pop('couple', [])
                if isinstance(couple, dict):
                    couple = [couple]
                data['sweep'] = SweepSpec(
                    parameter=sweep.pop('parameter'),
                    values=tuple(sweep.pop('values')),
                    couple=tuple(CouplingRule(**rule) for rule in couple),
                )
                if sweep:
                    raise ConfigError(f"unknown sweep keys: {sorted(sweep)}")
            spec = cls(**data)
        except (TypeError, ValueError, KeyError) as e:
            raise ConfigError(f"malformed experiment spec: {e}") from e

        spec.validate()
        return spec

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready representation (enums as their values)."""
        data = {
            'scenario': self.scenario.to_dict(),
            'schemes': [s.value for s in self.schemes],
            'power_mode': self.power_mode.value,
            'drops': self.drops,
            'sweep': None,
            'output_path': self.output_path,
            'methods': [m.value for m in self.methods],
            'alpha': self.alpha,
            'fractional_exponent': self.fractional_exponent,
            'lrzf_regularization': self.lrzf_regularization.value,
            'chunk_trials': self.chunk_trials,
            'validation_tolerance': self.validation_tolerance,
            'asymptotic_tolerance': self.asymptotic_tolerance,
        }
        if self.sweep is not None:
            data['sweep'] = {
                'parameter': self.sweep.parameter,
                'values': list(self.sweep.values),
                'couple': [{k: v for k, v in dataclasses.asdict(r).items() if v is not None}
                           for r in self.sweep.couple],
            }
        return data

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def load_experiment_spec(path: str) -> ExperimentSpec:
    """
    Load an experiment document.

    Args:
        path: JSON file

    Returns:
        Validated ExperimentSpec

    Raises:
        ConfigError: If the file is missing, not JSON or invalid
    """
    spec_path = Path(path)
    if not spec_path.exists():
        raise ConfigError(f"spec file not found: {path}")
    try:
        with open(spec_path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"spec file is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("spec file must contain a JSON object")

    spec = ExperimentSpec.from_dict(data)
    logging.getLogger(__name__).info(
        f"Loaded experiment spec {spec_path.name}: schemes "
        f"{[s.value for s in spec.schemes]}, {spec.drops} drops, "
        f"{len(spec.points())} sweep point(s)"
    )
    return spec
