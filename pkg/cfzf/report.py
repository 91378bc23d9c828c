"""
Result Tables Module

Writes the per-UE SE rows produced by the runner and summarizes them into
average SE, 95%-likely SE (5th percentile, linear interpolation) and
empirical CDF samples.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd


logger = logging.getLogger(__name__)

BASE_COLUMNS = ['drop', 'ue', 'scheme', 'method', 'power_mode', 'sinr', 'se']
NUMERIC_COLUMNS = ['drop', 'ue', 'sinr', 'se']
INTEGER_COLUMNS = ['drop', 'ue']
GROUP_COLUMNS = ['scheme', 'method', 'power_mode']


class SummaryError(Exception):
    """Exception raised when a result table is malformed."""

    def __init__(self, message: str, lines: Optional[List[int]] = None):
        super().__init__(message)
        self.lines = lines or []


def _parse_float(text: str) -> float:
    # float() round-trips the %.17g output exactly
    try:
        return float(text)
    except ValueError:
        return np.nan


def columns_for(sweep_parameter: Optional[str] = None) -> List[str]:
    return BASE_COLUMNS + ([sweep_parameter] if sweep_parameter else [])


def write_rows(rows: List[Dict], path, sweep_parameter: Optional[str] = None) -> Path:
    """Write result rows with a fixed header and full-precision floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(rows, columns=columns_for(sweep_parameter))
    frame.to_csv(path, index=False, float_format='%.17g')
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def read_rows(path) -> pd.DataFrame:
    """
    Read and check a result table.

    Raises:
        SummaryError: If the header is wrong or rows are malformed; the
            offending 1-based file line numbers are attached
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError as e:
        raise SummaryError(f"result file not found: {path}") from e
    except pd.errors.ParserError as e:
        raise SummaryError(f"malformed result file: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise SummaryError(f"result file is empty: {path}") from e

    missing = [c for c in BASE_COLUMNS if c not in frame.columns]
    if missing:
        raise SummaryError(f"result file lacks columns {missing}", lines=[1])
    extra = [c for c in frame.columns if c not in BASE_COLUMNS]
    if len(extra) > 1:
        raise SummaryError(f"unexpected columns {extra}", lines=[1])

    bad = pd.Series(False, index=frame.index)
    integral = {}
    for column in NUMERIC_COLUMNS + extra:
        values = frame[column].map(_parse_float).astype(float)
        bad |= values.isna()
        integral[column] = bool((np.isfinite(values) & (values == np.round(values))).all())
        frame[column] = values
    for column in INTEGER_COLUMNS:
        bad |= ~np.isfinite(frame[column]) | (frame[column] != np.round(frame[column]))
    for column in GROUP_COLUMNS:
        bad |= frame[column].str.strip() == ''
    bad |= frame['se'] < 0

    if bad.any():
        lines = [int(i) + 2 for i in frame.index[bad]]
        raise SummaryError(f"malformed rows at lines {lines}", lines=lines)

    for column in INTEGER_COLUMNS + [c for c in extra if integral[c]]:
        frame[column] = frame[column].astype("int64")

    return frame


def summarize_frame(frame: pd.DataFrame) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Per-group statistics and CDF samples.

    Returns:
        Tuple of (summary with n, mean_se, p5_se; cdf with se, cdf)
    """
    keys = GROUP_COLUMNS + [c for c in frame.columns if c not in BASE_COLUMNS]
    grouped = frame.groupby(keys, sort=True)['se']
    summary = grouped.agg(
        n='count',
        mean_se='mean',
        p5_se=lambda s: s.quantile(0.05, interpolation='linear'),
    ).reset_index()

    cdf = frame[keys + ['se']].sort_values(keys + ['se'], kind='mergesort').reset_index(drop=True)
    position = cdf.groupby(keys, sort=False).cumcount() + 1
    cdf['cdf'] = position / cdf.groupby(keys, sort=False)['se'].transform('count')
    return summary, cdf


def summarize(path, output_path=None) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Summarize a result table, optionally writing ``<output>`` and ``<output stem>_cdf.csv``.
    """
    summary, cdf = summarize_frame(read_rows(path))
    if output_path is not None:
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        summary.to_csv(output_path, index=False, float_format='%.17g')
        cdf_path = output_path.with_name(f"{output_path.stem}_cdf.csv")
        cdf.to_csv(cdf_path, index=False, float_format='%.17g')
        logger.info(f"Saved summary to {output_path} and CDF samples to {cdf_path}")
    return summary, cdf
