"""
Per block group linear trends over years and their significance classes.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .config import DEFAULT_ALPHA
from .exceptions import TrendError
from .stats import t_two_sided_p
from .utils import run_ordered

logger = logging.getLogger("vibrancy.trends")

MIN_YEARS = 3
TREND_MEASURES = (
    "permits", "spontaneous_proportion",
    "crime_total", "crime_violent", "crime_nonviolent", "crime_vice",
)


class TrendClass(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NONE = "none"


@dataclass(frozen=True)
class TrendResult:
    blockgroup_id: str
    measure: str
    slope: float
    slope_se: float
    t_stat: float
    p_value: float
    classification: TrendClass
    n_years: int


@dataclass
class TrendSummary:
    results: List[TrendResult]
    counts: Dict[str, Dict[str, int]] = field(default_factory=dict)
    skipped: Dict[str, int] = field(default_factory=dict)


def classify(slope: float, p_value: float, alpha: float = DEFAULT_ALPHA) -> TrendClass:
    """Positive or Negative when the slope has that sign and p < alpha, otherwise None."""
    if p_value < alpha and slope > 0:
        return TrendClass.POSITIVE
    if p_value < alpha and slope < 0:
        return TrendClass.NEGATIVE
    return TrendClass.NONE


def fit_yearly_trend(
    series: Mapping[int, Optional[float]],
    blockgroup_id: str = "",
    measure: str = "",
    alpha: float = DEFAULT_ALPHA,
) -> TrendResult:
    """
    Regress yearly values on the (centered) year.

    Years with undefined values are skipped. A constant series has slope 0
    and p = 1; an exact line with nonzero slope has p = 0.

    Args:
        series: year -> value
        blockgroup_id: id recorded on the result
        measure: measure name recorded on the result
        alpha: significance level for the classification

    Returns:
        TrendResult: slope per year, its standard error, t, two-sided p (n-2 df) and class
    """
    points = sorted(
        (int(year), float(value)) for year, value in series.items()
        if value is not None and not math.isnan(float(value))
    )
    n = len(points)
    if n < MIN_YEARS:
        raise TrendError(f"Trend for {blockgroup_id or 'series'} {measure} needs {MIN_YEARS} years, got {n}")
    years = np.array([p[0] for p in points], dtype=float)
    values = np.array([p[1] for p in points])
    x = years - years.mean()
    sxx = float(x @ x)
    centered = values - values.mean()
    tss = float(centered @ centered)
    scale = float(np.max(np.abs(values)))

    if tss <= (1e-12 * scale) ** 2 * n:
        slope, se, t, p = 0.0, 0.0, 0.0, 1.0
    else:
        slope = float(x @ centered) / sxx
        resid = centered - slope * x
        rss = float(resid @ resid)
        if rss <= 1e-24 * tss:
            se = 0.0
            t = math.copysign(math.inf, slope) if slope != 0 else 0.0
            p = 0.0 if slope != 0 else 1.0
        else:
            se = math.sqrt(rss / (n - 2) / sxx)
            t = slope / se
            p = t_two_sided_p(t, n - 2)
    return TrendResult(
        blockgroup_id=blockgroup_id, measure=measure, slope=slope, slope_se=se, t_stat=t,
        p_value=p, classification=classify(slope, p, alpha), n_years=n,
    )


def measure_series(yearly: pd.DataFrame, measure: str) -> Dict[str, Dict[int, Optional[float]]]:
    """
    Yearly values of one trend measure per block group.

    'permits' is the yearly event count; 'spontaneous_proportion' is the yearly
    share of spontaneous events, undefined in years without events; crime
    measures are yearly counts.
    """
    if measure == "permits":
        values = yearly["events"].astype(float)
    elif measure == "spontaneous_proportion":
        events = yearly["events"].astype(float)
        values = yearly["spontaneous"].astype(float) / events.where(events > 0)
    elif measure in yearly.columns:
        values = yearly[measure].astype(float)
    else:
        raise TrendError(f"Unknown trend measure '{measure}'")
    frame = pd.DataFrame({"blockgroup_id": yearly["blockgroup_id"], "year": yearly["year"], "value": values})
    series: Dict[str, Dict[int, Optional[float]]] = {}
    for bg_id, group in frame.groupby("blockgroup_id", sort=True):
        series[str(bg_id)] = {int(y): (None if math.isnan(v) else float(v)) for y, v in zip(group["year"], group["value"])}
    return series


def classify_all(
    yearly: pd.DataFrame,
    alpha: float = DEFAULT_ALPHA,
    measures: Sequence[str] = TREND_MEASURES,
    jobs: int = 1,
) -> TrendSummary:
    """
    Fit and classify trends for every block group and measure.

    Block groups with fewer than three defined years for a measure are
    counted in skipped and get no result for it.

    Args:
        yearly: long yearly series (blockgroup_id, year, events, spontaneous, crime columns)
        alpha: significance level
        measures: trend measures to fit
        jobs: worker threads

    Returns:
        TrendSummary: results ordered by measure then block group, class counts per measure
    """
    summary = TrendSummary(results=[])
    for measure in measures:
        series = measure_series(yearly, measure)
        eligible = [bg for bg, s in series.items() if sum(v is not None for v in s.values()) >= MIN_YEARS]
        results = run_ordered(
            lambda bg: fit_yearly_trend(series[bg], blockgroup_id=bg, measure=measure, alpha=alpha),
            eligible, jobs=jobs,
        )
        summary.results.extend(results)
        summary.skipped[measure] = len(series) - len(eligible)
        summary.counts[measure] = {
            c.value: sum(r.classification == c for r in results) for c in TrendClass
        }
        logger.info(
            f"Trends for {measure}: {summary.counts[measure]['positive']} positive, "
            f"{summary.counts[measure]['negative']} negative, {summary.skipped[measure]} skipped"
        )
    return summary


TREND_COLUMNS = ["blockgroup_id", "measure", "slope", "se", "t_stat", "p", "class", "n_years"]


def results_frame(results: Sequence[TrendResult]) -> pd.DataFrame:
    """Long table of trend results, one row per (block group, measure)."""
    rows = [
        (r.blockgroup_id, r.measure, r.slope, r.slope_se, r.t_stat, r.p_value, r.classification.value, r.n_years)
        for r in results
    ]
    return pd.DataFrame(rows, columns=TREND_COLUMNS)


def trend_frame(results: Union[Sequence[TrendResult], pd.DataFrame]) -> pd.DataFrame:
    """
    Wide per block group trend table.

    For every measure: <measure>_slope, <measure>_p, <measure>_class and the 0/1
    indicators <measure>_positive and <measure>_negative (NaN when no trend
    was fitted).
    """
    long = results if isinstance(results, pd.DataFrame) else results_frame(results)
    if long.empty:
        return pd.DataFrame(index=pd.Index([], name="blockgroup_id"))
    long = long.astype({"blockgroup_id": str})
    parts = []
    for measure, group in long.groupby("measure", sort=False):
        group = group.set_index("blockgroup_id")
        part = pd.DataFrame(index=group.index)
        part[f"{measure}_slope"] = group["slope"].astype(float)
        part[f"{measure}_p"] = group["p"].astype(float)
        part[f"{measure}_class"] = group["class"]
        part[f"{measure}_positive"] = (group["class"] == TrendClass.POSITIVE.value).astype(float)
        part[f"{measure}_negative"] = (group["class"] == TrendClass.NEGATIVE.value).astype(float)
        parts.append(part)
    wide = pd.concat(parts, axis=1).sort_index()
    wide.index.name = "blockgroup_id"
    return wide
