"""
Experiment Runner Module

Orchestrates network drops, pilot assignment, grouping, power control and
the closed-form / Monte-Carlo SE evaluation of every requested scheme, and
saves the per-UE result tables.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from .channel import estimation_stats
from .closedform import ClosedFormInputs, closed_form_report, has_closed_form
from .combining import Scheme
from .config import ExperimentSpec, load_experiment_spec
from .lsfd import Method, SEReport, accumulate_moments, monte_carlo_report
from .pilots import assign_pilots_random, group_ues
from .power import allocate
from .report import write_rows
from .scenario import ScenarioConfig, generate_network


STREAM_NETWORK = 0
STREAM_PILOTS = 1
STREAM_TRIALS = 2


class ValidationFailure(Exception):
    """Exception raised when closed-form and Monte-Carlo SE disagree beyond tolerance."""

    def __init__(self, message: str, table: pd.DataFrame, max_deviation: float, scheme: str):
        super().__init__(message)
        self.table = table
        self.max_deviation = max_deviation
        self.scheme = scheme


class ExperimentRunner:
    """
    Runs an experiment spec end to end.

    Workflow:
    1. Load and validate the JSON spec
    2. For every sweep point and drop: network, pilots, groups, powers
    3. Evaluate every scheme in closed form and/or by Monte Carlo
    4. Save the per-UE rows (and the validation table when validating)
    """

    def __init__(self, workers: int = 1):
        """
        Initialize the runner.

        Args:
            workers: Worker processes for Monte-Carlo trial chunks
        """
        self.logger = logging.getLogger(__name__)
        self.workers = max(1, int(workers))

        self.spec: Optional[ExperimentSpec] = None
        self.spec_path: Optional[Path] = None
        self.rows: List[Dict[str, Any]] = []
        self.validation: Optional[pd.DataFrame] = None
        self.elapsed_s = 0.0

    def load_spec(self, spec_path: str) -> ExperimentSpec:
        """
        Load an experiment spec.

        Raises:
            ConfigError: If the experiment file is missing or invalid
        """
        self.spec_path = Path(spec_path)
        self.spec = load_experiment_spec(spec_path)
        return self.spec

    def _require_spec(self, spec: Optional[ExperimentSpec]) -> ExperimentSpec:
        if spec is not None:
            spec.validate()
            self.spec = spec
        if self.spec is None:
            raise ValueError("No spec loaded. Call load_spec() first.")
        return self.spec

    def _evaluate_drop(self, spec: ExperimentSpec, point: int, drop: int,
                       scenario: ScenarioConfig, methods, executor, digest: str) -> List[SEReport]:
        seed = scenario.seed

        def stream(kind: int) -> np.random.SeedSequence:
            return np.random.SeedSequence(entropy=seed, spawn_key=(point, drop, kind))

        net = generate_network(scenario, np.random.default_rng(stream(STREAM_NETWORK)))
        pa = assign_pilots_random(scenario.K, scenario.tau_p,
                                  np.random.default_rng(stream(STREAM_PILOTS)))
        ga = group_ues(net, pa, scenario.v_percent, n_antennas=scenario.N)
        allocation = allocate(spec.power_mode, net, scenario.p_max_W, spec.fractional_exponent)
        stats = estimation_stats(net, pa, scenario.pilot_power_W)
        inputs = ClosedFormInputs(stats=stats, pa=pa, ga=ga, powers=allocation.p_ul,
                                  sigma2=net.sigma2, N=scenario.N, tau_p=scenario.tau_p,
                                  tau_c=scenario.tau_c)
        mode = spec.power_mode.value

        reports = []
        for scheme in spec.schemes:
            if Method.CLOSED_FORM in methods and has_closed_form(scheme):
                reports.append(closed_form_report(inputs, scheme, mode, digest, alpha=spec.alpha))
            if Method.MONTE_CARLO in methods:
                moments = accumulate_moments(
                    scheme, net, pa, stats, allocation.p_ul, scenario.N, scenario.trials,
                    stream(STREAM_TRIALS), ga=ga, alpha=spec.alpha,
                    regularization=spec.lrzf_regularization,
                    chunk_trials=spec.chunk_trials, executor=executor,
                )
                reports.append(monte_carlo_report(moments, allocation.p_ul, net.sigma2,
                                                  scenario.tau_p, scenario.tau_c,
                                                  scheme.value, mode, digest))
        return reports

    def run(self, spec: Optional[ExperimentSpec] = None, methods=None,
            progress: Optional[Callable[[int, int], None]] = None) -> List[Dict[str, Any]]:
        """
        Evaluate every sweep point and drop.

        Args:
            spec: Spec to run (uses the loaded one if not provided)
            methods: Override of the experiment's evaluation methods
            progress: Called with (finished, total) after each drop

        Returns:
            List of result rows (one per drop, UE, scheme and method)
        """
        spec = self._require_spec(spec)
        methods = tuple(methods) if methods is not None else spec.methods
        digest = spec.digest()
        points = spec.points()
        sweep_parameter = spec.sweep.parameter if spec.sweep else None
        total = len(points) * spec.drops

        self.logger.info(f"Running {len(points)} point(s) x {spec.drops} drops, "
                         f"schemes {[s.value for s in spec.schemes]}, "
                         f"methods {[m.value for m in methods]}, workers={self.workers}")
        started = time.perf_counter()
        rows = []
        pool = ProcessPoolExecutor(max_workers=self.workers) if self.workers > 1 else nullcontext()
        with pool as executor:
            finished = 0
            for point, (value, scenario) in enumerate(points):
                for drop in range(spec.drops):
                    for report in self._evaluate_drop(spec, point, drop, scenario, methods,
                                                      executor, digest):
                        for ue, (sinr, se) in enumerate(zip(report.sinr, report.se)):
                            row = {
                                'drop': drop, 'ue': ue, 'scheme': report.scheme,
                                'method': report.method.value, 'power_mode': report.power_mode,
                                'sinr': float(sinr), 'se': float(se),
                            }
                            if sweep_parameter:
                                row[sweep_parameter] = value
                            rows.append(row)
                    finished += 1
                    self.logger.debug(f"Finished drop {drop} of point {point}")
                    if progress is not None:
                        progress(finished, total)

        self.elapsed_s = time.perf_counter() - started
        self.rows = rows
        self.logger.info(f"Produced {len(rows)} rows in {self.elapsed_s:.1f} s")
        return rows

    def validate(self, spec: Optional[ExperimentSpec] = None, tolerance: Optional[float] = None,
                 progress: Optional[Callable[[int, int], None]] = None) -> pd.DataFrame:
        """
        Compare closed-form and Monte-Carlo SE per UE.

        Args:
            spec: Spec to validate (uses the loaded one if not provided)
            tolerance: Overrides the experiment's tolerance for the exact closed forms
            progress: Called with (finished, total) after each drop

        Returns:
            Table with se_closed, se_mc, deviation and tolerance per UE

        Raises:
            ValidationFailure: If any deviation exceeds its tolerance
        """
        spec = self._require_spec(spec)
        if not any(has_closed_form(s) for s in spec.schemes):
            raise ValueError("none of the requested schemes has a closed form to validate")

        rows = self.run(spec, methods=(Method.CLOSED_FORM, Method.MONTE_CARLO), progress=progress)
        frame = pd.DataFrame(rows)
        frame = frame[frame['scheme'].isin([s.value for s in spec.schemes if has_closed_form(s)])]
        keys = [c for c in frame.columns if c not in ('method', 'sinr', 'se')]
        mc = frame[frame['method'] == Method.MONTE_CARLO.value].set_index(keys)['se']
        closed = frame[frame['method'] != Method.MONTE_CARLO.value].set_index(keys)['se']

        table = pd.DataFrame({'se_closed': closed, 'se_mc': mc}).reset_index()
        table['deviation'] = (table['se_mc'] - table['se_closed']).abs() / table['se_closed']
        exact = tolerance if tolerance is not None else spec.validation_tolerance
        table['tolerance'] = np.where(table['scheme'] == Scheme.MLRZF.value,
                                      spec.asymptotic_tolerance, exact)
        self.validation = table

        failed = table[table['deviation'] > table['tolerance']]
        worst = table.loc[table['deviation'].idxmax()]
        self.logger.info(f"Validation: max deviation {worst['deviation']:.4f} ({worst['scheme']})")
        if not failed.empty:
            self.logger.error(f"Validation failed for {len(failed)} UE rows")
            raise ValidationFailure(
                f"{len(failed)} rows exceed tolerance; max deviation "
                f"{worst['deviation']:.4f} for {worst['scheme']}",
                table=table, max_deviation=float(worst['deviation']), scheme=str(worst['scheme']),
            )
        return table

    def save_outputs(self, output_path: Optional[str] = None) -> Dict[str, str]:
        """
        Save the result rows and, after a validation, the validation table.

        Args:
            output_path: CSV path (defaults to the experiment's output_path)

        Returns:
            Dictionary with paths to saved files
        """
        if self.spec is None or not self.rows:
            raise ValueError("Nothing to save. Call run() or validate() first.")

        path = Path(output_path or self.spec.output_path)
        sweep_parameter = self.spec.sweep.parameter if self.spec.sweep else None
        saved = {'rows': str(write_rows(self.rows, path, sweep_parameter))}

        if self.validation is not None:
            validation_path = path.with_name(f"{path.stem}_validation.csv")
            self.validation.to_csv(validation_path, index=False, float_format='%.17g')
            saved['validation'] = str(validation_path)
            self.logger.info(f"Saved validation table to {validation_path}")
        return saved

    def get_run_summary(self) -> Dict[str, Any]:
        """Summary of the last run for display."""
        if self.spec is None:
            return {}
        frame = pd.DataFrame(self.rows, columns=['scheme', 'method', 'se']) if self.rows else None
        by_scheme = {}
        if frame is not None:
            for (scheme, method), group in frame.groupby(['scheme', 'method']):
                by_scheme[f"{scheme} ({method})"] = float(group['se'].mean())
        return {
            'spec': str(self.spec_path) if self.spec_path else None,
            'digest': self.spec.digest(),
            'points': len(self.spec.points()),
            'drops': self.spec.drops,
            'rows': len(self.rows),
            'elapsed_s': self.elapsed_s,
            'mean_se': by_scheme,
            'max_deviation': (float(self.validation['deviation'].max())
                              if self.validation is not None else None),
        }
