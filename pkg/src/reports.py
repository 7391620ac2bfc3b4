"""
Report tables for regressions and matching experiments, and the
attribute-enriched block-group GeoJSON.
"""
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .glm import FitResult, ModelSpec
from .ingest import BlockGroup, PathLike, write_blockgroups
from .psm import ExperimentSpec, MatchedExperiment, PairedInference

logger = logging.getLogger("vibrancy.reports")

STATUS_OK = "ok"

REGRESSION_COLUMNS = [
    "model", "row_type", "term", "estimate", "std_error", "statistic", "p_value", "ci_lower", "ci_upper", "stars",
    "family", "outcome", "status", "n_obs", "n_dropped", "df_resid", "r_squared", "adj_r_squared",
    "log_likelihood", "aic", "rmse", "theta", "theta_se", "theta_at_boundary", "converged", "iterations",
]
EXPERIMENT_COLUMNS = [
    "experiment", "treatment", "outcome", "status", "mode", "n_treated", "n_control", "n_pairs",
    "n_dropped_treated", "estimate", "ci_lower", "ci_upper", "t_stat", "t_p", "wilcoxon_p",
    "wilcoxon_method", "naive_diff", "discordant_b", "discordant_c", "odds_ratio", "or_ci_lower",
    "or_ci_upper", "mean_abs_smd_before", "mean_abs_smd_after",
]


def _clean(value: Any) -> Any:
    """Plain Python value for JSON output; NaN becomes None."""
    if value is None:
        return None
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return None if math.isnan(value) else float(value)
    return value


def model_row(
    spec: ModelSpec, fit: Optional[FitResult], status: str = STATUS_OK, n_dropped: Optional[int] = None,
) -> Dict[str, Any]:
    """Summary row of one model: fit statistics, or just the failure status."""
    row: Dict[str, Any] = {
        "model": spec.name, "row_type": "model", "family": spec.family.value, "outcome": spec.outcome,
        "status": status, "n_dropped": n_dropped,
    }
    if fit is not None:
        row.update({
            "n_obs": fit.n_obs, "df_resid": fit.df_resid, "r_squared": fit.r_squared,
            "adj_r_squared": fit.adj_r_squared, "log_likelihood": fit.log_likelihood, "aic": fit.aic,
            "rmse": fit.rmse, "theta": fit.theta, "theta_se": fit.theta_se,
            "theta_at_boundary": fit.theta_at_boundary if fit.theta is not None else None,
            "converged": fit.converged, "iterations": fit.iterations,
        })
    return row


def coefficient_rows(spec: ModelSpec, fit: FitResult) -> List[Dict[str, Any]]:
    summary = fit.summary_frame().reset_index()
    summary.insert(0, "model", spec.name)
    summary.insert(1, "row_type", "term")
    return summary.to_dict("records")


def regression_frame(outcomes: Sequence[tuple]) -> pd.DataFrame:
    """
    The regression report: per model, one row per term followed by a summary row.

    Args:
        outcomes: (ModelSpec, FitResult or None, status, dropped row count) per model in catalog order

    Returns:
        pd.DataFrame: rows in REGRESSION_COLUMNS layout
    """
    rows: List[Dict[str, Any]] = []
    for spec, fit, status, n_dropped in outcomes:
        if fit is not None:
            rows.extend(coefficient_rows(spec, fit))
        rows.append(model_row(spec, fit, status, n_dropped))
    return pd.DataFrame(rows, columns=REGRESSION_COLUMNS)


def experiment_row(
    spec: ExperimentSpec,
    experiment: Optional[MatchedExperiment] = None,
    inference: Optional[PairedInference] = None,
    status: str = STATUS_OK,
) -> Dict[str, Any]:
    """One experiments.csv row; a failed experiment keeps its name and carries the failure in status."""
    row: Dict[str, Any] = {
        "experiment": spec.name, "treatment": spec.rule.label, "outcome": spec.outcome, "status": status,
    }
    if experiment is not None:
        balance = experiment.balance
        row.update({
            "mode": experiment.mode.value,
            "n_treated": experiment.n_treated,
            "n_control": experiment.n_control,
            "n_pairs": len(experiment.pairs),
            "n_dropped_treated": len(experiment.dropped_treated),
            "naive_diff": experiment.naive_diff,
            "mean_abs_smd_before": float(balance["smd_before"].abs().mean()),
            "mean_abs_smd_after": float(balance["smd_after"].abs().mean()),
        })
        if experiment.odds_ratio is not None:
            odds = experiment.odds_ratio
            row.update({
                "discordant_b": odds.b, "discordant_c": odds.c, "odds_ratio": odds.odds_ratio,
                "or_ci_lower": odds.ci_lower, "or_ci_upper": odds.ci_upper,
            })
    if inference is not None:
        row.update({
            "estimate": inference.mean_diff, "ci_lower": inference.ci_lower, "ci_upper": inference.ci_upper,
            "t_stat": inference.t_stat, "t_p": inference.t_p, "wilcoxon_p": inference.wilcoxon_p,
            "wilcoxon_method": inference.wilcoxon_method,
        })
    return row


def experiments_frame(rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=EXPERIMENT_COLUMNS)


def pairs_frame(experiment: MatchedExperiment) -> pd.DataFrame:
    """Matched pairs in matching order with both propensity scores."""
    return pd.DataFrame(
        [(t, c, experiment.scores[t], experiment.scores[c]) for t, c in experiment.pairs],
        columns=["treated", "control", "treated_score", "control_score"],
    )


def report_properties(measures: pd.DataFrame, trends: Optional[pd.DataFrame] = None) -> Dict[str, Dict[str, Any]]:
    """
    GeoJSON feature properties per block group: every measure column and,
    when available, every trend column.
    """
    frame = measures if trends is None or trends.empty else measures.join(trends, how="left")
    records = frame.to_dict(orient="index")
    return {str(bg_id): {str(k): _clean(v) for k, v in row.items()} for bg_id, row in records.items()}


def write_report_geojson(
    blockgroups: Sequence[BlockGroup],
    measures: pd.DataFrame,
    trends: Optional[pd.DataFrame],
    path: PathLike,
) -> Path:
    """One feature per block group, enriched with its measures and trend classes."""
    path = write_blockgroups(blockgroups, path, report_properties(measures, trends))
    logger.info(f"Wrote {len(blockgroups)} report features to {path}")
    return path


def experiment_summary(rows: Sequence[Mapping[str, Any]]) -> List[Dict[str, Any]]:
    """Compact experiment results for run_report.json."""
    keys = ("experiment", "status", "mode", "n_pairs", "estimate", "ci_lower", "ci_upper", "odds_ratio")
    return [{k: _clean(row.get(k)) for k in keys} for row in rows]
