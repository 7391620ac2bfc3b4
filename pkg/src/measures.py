"""
Community vibrancy and crime measures per block group, their yearly and
monthly series, and the cross-measure correlation matrix.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .config import DEFAULT_CRIME_WINDOW, load_crime_types, load_event_types
from .exceptions import ConfigurationError, UnknownCrimeTypeError, UnknownEventTypeError
from .ingest import AssignedEvent, EventKind
from .utils import normalize_label

logger = logging.getLogger("vibrancy.measures")


class EventCategory(str, Enum):
    REGULAR = "regular"
    SPONTANEOUS = "spontaneous"


class CrimeCategory(str, Enum):
    VIOLENT = "violent"
    NONVIOLENT = "nonviolent"
    VICE = "vice"
    OTHER = "other"


EVENT_SUBCATEGORIES = ("public_holiday", "religious", "community", "personal")
CRIME_MEASURES = ("crime_total", "crime_violent", "crime_nonviolent", "crime_vice")
VIBRANCY_MEASURES = ("n_events", "spontaneous_proportion")

CORRELATION_COLUMNS = (
    "n_events", "spontaneous_proportion",
    "crime_total", "crime_violent", "crime_nonviolent", "crime_vice",
    "population", "prop_white", "prop_black", "prop_asian", "prop_hispanic",
    "mean_income", "poverty_index", "total_area",
    "prop_commercial", "prop_residential", "prop_vacant", "prop_transportation",
    "prop_industrial", "prop_park", "prop_civic",
)


class EventTaxonomy:
    """Whitelist of permit event types: label -> (category, sub-category)."""

    def __init__(self, mapping: Mapping[str, Mapping[str, Iterable[str]]]):
        self._lookup: Dict[str, Tuple[EventCategory, str]] = {}
        for category_name, subcategories in mapping.items():
            category = EventCategory(category_name)
            for subcategory, labels in (subcategories or {}).items():
                for label in labels or []:
                    key = normalize_label(label)
                    if key in self._lookup:
                        raise ConfigurationError(f"Event type '{label}' is listed more than once")
                    self._lookup[key] = (category, subcategory)

    def __len__(self) -> int:
        return len(self._lookup)

    def lookup(self, raw_type: str) -> Tuple[EventCategory, str]:
        try:
            return self._lookup[normalize_label(raw_type)]
        except KeyError:
            raise UnknownEventTypeError(f"Unknown event type: '{raw_type}'")

    def classify(self, raw_type: str) -> EventCategory:
        return self.lookup(raw_type)[0]

    def subcategory(self, raw_type: str) -> str:
        return self.lookup(raw_type)[1]


class CrimeTaxonomy:
    """Whitelist of crime types grouped into UCR categories."""

    def __init__(self, mapping: Mapping[str, Iterable[str]]):
        self._lookup: Dict[str, CrimeCategory] = {}
        for category_name, labels in mapping.items():
            category = CrimeCategory(category_name)
            for label in labels or []:
                key = normalize_label(label)
                if key in self._lookup:
                    raise ConfigurationError(f"Crime type '{label}' is listed more than once")
                self._lookup[key] = category

    def __len__(self) -> int:
        return len(self._lookup)

    def classify(self, raw_type: str) -> CrimeCategory:
        try:
            return self._lookup[normalize_label(raw_type)]
        except KeyError:
            raise UnknownCrimeTypeError(f"Unknown crime type: '{raw_type}'")


@lru_cache(maxsize=None)
def default_event_taxonomy() -> EventTaxonomy:
    return EventTaxonomy(load_event_types())


@lru_cache(maxsize=None)
def default_crime_taxonomy() -> CrimeTaxonomy:
    return CrimeTaxonomy(load_crime_types())


def classify_event(raw_type: str, taxonomy: Optional[EventTaxonomy] = None) -> EventCategory:
    """
    Classify a permit event type as Regular or Spontaneous.

    Args:
        raw_type: label as found in the permit file (case and surrounding whitespace ignored)
        taxonomy: whitelist to use; defaults to config/event_types.yaml

    Returns:
        EventCategory: REGULAR for public-holiday and religious events, otherwise SPONTANEOUS
    """
    return (taxonomy or default_event_taxonomy()).classify(raw_type)


def classify_crime(raw_type: str, taxonomy: Optional[CrimeTaxonomy] = None) -> CrimeCategory:
    """
    Classify a crime type into its UCR category.

    Args:
        raw_type: crime type label
        taxonomy: whitelist to use; defaults to config/crime_types.yaml

    Returns:
        CrimeCategory: VIOLENT, NONVIOLENT, VICE or OTHER
    """
    return (taxonomy or default_crime_taxonomy()).classify(raw_type)


def default_years() -> List[int]:
    return list(range(DEFAULT_CRIME_WINDOW[0].year, DEFAULT_CRIME_WINDOW[1].year + 1))


@dataclass
class MeasureTable:
    """
    Per block group measures plus their yearly and monthly series.

    frame is indexed by blockgroup_id; yearly holds one row per (block group,
    year) and monthly one row per (block group, year, month) with events.
    """
    frame: pd.DataFrame
    yearly: pd.DataFrame
    monthly: pd.DataFrame
    years: List[int]
    dropped_events: int = 0
    dropped_crimes: int = 0

    def __len__(self) -> int:
        return len(self.frame)

    def yearly_events(self, blockgroup_id: str) -> Dict[int, int]:
        return self._series(blockgroup_id, "events")

    def yearly_crimes(self, blockgroup_id: str, measure: str = "crime_total") -> Dict[int, int]:
        return self._series(blockgroup_id, measure)

    def monthly_events(self, blockgroup_id: str) -> Dict[Tuple[int, int], int]:
        rows = self.monthly[self.monthly["blockgroup_id"] == blockgroup_id]
        return {(int(r.year), int(r.month)): int(r.events) for r in rows.itertuples(index=False)}

    def _series(self, blockgroup_id: str, column: str) -> Dict[int, int]:
        rows = self.yearly[self.yearly["blockgroup_id"] == blockgroup_id]
        return {int(y): int(v) for y, v in zip(rows["year"], rows[column])}


def _events_frame(
    events: Iterable[AssignedEvent],
    event_taxonomy: EventTaxonomy,
    crime_taxonomy: CrimeTaxonomy,
) -> pd.DataFrame:
    rows = []
    for event in events:
        if event.kind == EventKind.PERMIT:
            category, subcategory = event_taxonomy.lookup(event.raw_type)
            rows.append((event.blockgroup_id, event.date.year, event.date.month, category.value, subcategory))
        else:
            category = crime_taxonomy.classify(event.raw_type)
            rows.append((event.blockgroup_id, event.date.year, event.date.month, category.value, ""))
    return pd.DataFrame(rows, columns=["blockgroup_id", "year", "month", "category", "subcategory"])


def _count(frame: pd.DataFrame, keys: List[str], column: str, values: Sequence[str]) -> pd.DataFrame:
    """Counts per key for each value of column, with zero-filled columns for absent values."""
    if frame.empty:
        if len(keys) == 1:
            empty_index = pd.Index([], name=keys[0])
        else:
            empty_index = pd.MultiIndex.from_arrays([[] for _ in keys], names=keys)
        return pd.DataFrame(0, index=empty_index, columns=list(values), dtype="int64")
    counts = frame.groupby(keys + [column]).size().unstack(column, fill_value=0)
    return counts.reindex(columns=list(values), fill_value=0).astype("int64")


def _log_or_nan(values: pd.Series) -> pd.Series:
    return np.log(values.where(values > 0).astype(float))


def build_measure_table(
    assigned_events: Sequence[AssignedEvent],
    assigned_crimes: Sequence[AssignedEvent],
    profiles: Union[pd.DataFrame, Sequence[str]],
    event_taxonomy: Optional[EventTaxonomy] = None,
    crime_taxonomy: Optional[CrimeTaxonomy] = None,
    years: Optional[Sequence[int]] = None,
) -> MeasureTable:
    """
    Aggregate assigned permits and crimes into per block group measures.

    Whole-window counts use every assigned record; the yearly series cover the
    given years only and are zero-filled.

    Args:
        assigned_events: permits after the spatial join
        assigned_crimes: crimes after the spatial join
        profiles: profile frame indexed by blockgroup_id, or the block-group ids themselves
        event_taxonomy: permit whitelist
        crime_taxonomy: crime whitelist
        years: series years; defaults to the crime study window years

    Returns:
        MeasureTable: one row per block group in ascending id order
    """
    event_taxonomy = event_taxonomy or default_event_taxonomy()
    crime_taxonomy = crime_taxonomy or default_crime_taxonomy()
    years = sorted(years) if years is not None else default_years()
    ids = sorted(profiles.index if isinstance(profiles, pd.DataFrame) else profiles)
    universe = set(ids)

    permits = _events_frame(assigned_events, event_taxonomy, crime_taxonomy)
    crimes = _events_frame(assigned_crimes, event_taxonomy, crime_taxonomy)
    dropped_events = int((~permits["blockgroup_id"].isin(universe)).sum())
    dropped_crimes = int((~crimes["blockgroup_id"].isin(universe)).sum())
    if dropped_events or dropped_crimes:
        logger.warning(
            f"Dropped {dropped_events} permits and {dropped_crimes} crimes in block groups without a profile"
        )
    permits = permits[permits["blockgroup_id"].isin(universe)]
    crimes = crimes[crimes["blockgroup_id"].isin(universe)]

    index = pd.Index(ids, name="blockgroup_id")
    by_category = _count(permits, ["blockgroup_id"], "category", [c.value for c in EventCategory])
    by_sub = _count(permits, ["blockgroup_id"], "subcategory", list(EVENT_SUBCATEGORIES))
    by_crime = _count(crimes, ["blockgroup_id"], "category", [c.value for c in CrimeCategory])
    by_category = by_category.reindex(index, fill_value=0)
    by_sub = by_sub.reindex(index, fill_value=0)
    by_crime = by_crime.reindex(index, fill_value=0)

    frame = pd.DataFrame(index=index)
    frame["n_events"] = by_category["regular"] + by_category["spontaneous"]
    frame["n_regular"] = by_category["regular"]
    frame["n_spontaneous"] = by_category["spontaneous"]
    for sub in EVENT_SUBCATEGORIES:
        frame[f"n_{sub}"] = by_sub[sub]
    frame["spontaneous_proportion"] = (
        frame["n_spontaneous"] / frame["n_events"].where(frame["n_events"] > 0)
    ).astype(float)
    frame["crime_violent"] = by_crime["violent"]
    frame["crime_nonviolent"] = by_crime["nonviolent"]
    frame["crime_vice"] = by_crime["vice"]
    frame["crime_other"] = by_crime["other"]
    frame["crime_total"] = by_crime.sum(axis=1)
    for measure in CRIME_MEASURES:
        frame[f"log_{measure}"] = _log_or_nan(frame[measure])
    frame["crimes_per_year"] = frame["crime_total"] / len(years) if years else float("nan")

    yearly = _yearly_frame(permits, crimes, ids, years)
    monthly = _monthly_frame(permits, ids, years)
    logger.info(f"Built measures for {len(frame)} block groups over {len(years)} years")
    return MeasureTable(
        frame=frame, yearly=yearly, monthly=monthly, years=list(years),
        dropped_events=dropped_events, dropped_crimes=dropped_crimes,
    )


def _yearly_frame(permits: pd.DataFrame, crimes: pd.DataFrame, ids: List[str], years: List[int]) -> pd.DataFrame:
    grid = pd.MultiIndex.from_product([ids, years], names=["blockgroup_id", "year"])
    events = _count(permits, ["blockgroup_id", "year"], "category", [c.value for c in EventCategory])
    crime_counts = _count(crimes, ["blockgroup_id", "year"], "category", [c.value for c in CrimeCategory])
    events = events.reindex(grid, fill_value=0)
    crime_counts = crime_counts.reindex(grid, fill_value=0)

    yearly = pd.DataFrame(index=grid)
    yearly["events"] = events["regular"] + events["spontaneous"]
    yearly["spontaneous"] = events["spontaneous"]
    yearly["regular"] = events["regular"]
    yearly["crime_total"] = crime_counts.sum(axis=1)
    yearly["crime_violent"] = crime_counts["violent"]
    yearly["crime_nonviolent"] = crime_counts["nonviolent"]
    yearly["crime_vice"] = crime_counts["vice"]
    return yearly.astype("int64").reset_index()


def _monthly_frame(permits: pd.DataFrame, ids: List[str], years: List[int]) -> pd.DataFrame:
    columns = ["blockgroup_id", "year", "month", "events", "spontaneous"]
    permits = permits[permits["year"].isin(years)]
    if permits.empty:
        return pd.DataFrame(columns=columns)
    counts = _count(permits, ["blockgroup_id", "year", "month"], "category", [c.value for c in EventCategory])
    monthly = pd.DataFrame(index=counts.index)
    monthly["events"] = counts["regular"] + counts["spontaneous"]
    monthly["spontaneous"] = counts["spontaneous"]
    return monthly.astype("int64").reset_index()[columns]


def yearly_series(
    events: Iterable[AssignedEvent],
    years: Optional[Sequence[int]] = None,
    category: Optional[Union[EventCategory, CrimeCategory]] = None,
    event_taxonomy: Optional[EventTaxonomy] = None,
    crime_taxonomy: Optional[CrimeTaxonomy] = None,
) -> Dict[int, int]:
    """
    Count events per calendar year, optionally restricted to one category.

    Args:
        events: assigned permits or crimes
        years: years to report; absent years get 0, events in other years are ignored
        category: EventCategory for permits or CrimeCategory for crimes

    Returns:
        dict: year -> count for every requested year
    """
    years = list(years) if years is not None else default_years()
    counts = {year: 0 for year in years}
    for event in events:
        if event.date.year not in counts:
            continue
        if category is not None:
            if event.kind == EventKind.PERMIT:
                actual = classify_event(event.raw_type, event_taxonomy)
            else:
                actual = classify_crime(event.raw_type, crime_taxonomy)
            if actual != category:
                continue
        counts[event.date.year] += 1
    return counts


def city_series(table: MeasureTable) -> pd.DataFrame:
    """City-wide yearly totals: events, spontaneity and crime by category."""
    totals = table.yearly.drop(columns=["blockgroup_id"]).groupby("year").sum()
    totals["spontaneous_proportion"] = totals["spontaneous"] / totals["events"].where(totals["events"] > 0)
    totals["crimes_per_blockgroup"] = totals["crime_total"] / max(len(table), 1)
    return totals.reset_index()


def monthly_city_series(table: MeasureTable) -> pd.DataFrame:
    """City-wide monthly event counts with every (year, month) present."""
    grid = pd.MultiIndex.from_product([table.years, range(1, 13)], names=["year", "month"])
    if table.monthly.empty:
        monthly = pd.DataFrame(0, index=grid, columns=["events", "spontaneous"])
    else:
        monthly = table.monthly.groupby(["year", "month"])[["events", "spontaneous"]].sum()
        monthly = monthly.reindex(grid, fill_value=0)
    return monthly.astype("int64").reset_index()


def correlation_matrix(frame: pd.DataFrame, columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """
    Pearson correlation matrix over complete rows.

    Columns with zero variance get NaN in their row and column, diagonal included.

    Args:
        frame: joined measures and profiles
        columns: columns to correlate; defaults to CORRELATION_COLUMNS present in frame

    Returns:
        pd.DataFrame: symmetric matrix labelled by column name
    """
    if columns is None:
        columns = [c for c in CORRELATION_COLUMNS if c in frame.columns]
    columns = list(columns)
    data = frame[columns].astype(float).dropna().to_numpy()
    k = len(columns)
    result = np.full((k, k), np.nan)
    if len(data) >= 2:
        centered = data - data.mean(axis=0)
        ss = np.einsum("ij,ij->j", centered, centered)
        scale = np.abs(data).max(axis=0)
        varying = ss > (1e-12 * scale) ** 2 * len(data)
        cross = centered.T @ centered
        with np.errstate(invalid="ignore", divide="ignore"):
            result = cross / np.sqrt(np.outer(ss, ss))
        result = np.clip(result, -1.0, 1.0)
        result[~varying, :] = np.nan
        result[:, ~varying] = np.nan
        idx = np.flatnonzero(varying)
        result[idx, idx] = 1.0
    return pd.DataFrame(result, index=columns, columns=columns)


def city_summary(table: MeasureTable) -> Dict[str, Any]:
    """
    Whole-city headline numbers for the run report.

    Returns:
        dict: totals, category and sub-category shares, medians
    """
    frame = table.frame
    total = int(frame["n_events"].sum())
    share = (lambda n: float(n) / total if total else float("nan"))
    defined = frame["spontaneous_proportion"].dropna()
    summary: Dict[str, Any] = {
        "blockgroups": int(len(frame)),
        "total_events": total,
        "regular_share": share(frame["n_regular"].sum()),
        "spontaneous_share": share(frame["n_spontaneous"].sum()),
        "median_events": float(frame["n_events"].median()) if len(frame) else float("nan"),
        "median_spontaneous_proportion": float(defined.median()) if len(defined) else float("nan"),
        "share_spontaneous_above_0_8": float((defined > 0.8).mean()) if len(defined) else float("nan"),
        "blockgroups_without_events": int((frame["n_events"] == 0).sum()),
        "total_crimes": int(frame["crime_total"].sum()),
        "blockgroups_without_crimes": int((frame["crime_total"] == 0).sum()),
    }
    for sub in EVENT_SUBCATEGORIES:
        summary[f"{sub}_share"] = share(frame[f"n_{sub}"].sum())
    for measure in CRIME_MEASURES[1:]:
        count = int(frame[measure].sum())
        summary[f"{measure}_share"] = count / summary["total_crimes"] if summary["total_crimes"] else float("nan")
    # NaN is not valid JSON
    return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in summary.items()}
