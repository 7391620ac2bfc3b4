import math
from datetime import date

import numpy as np
import pandas as pd
import pytest

from src.config import load_event_types
from src.exceptions import UnknownCrimeTypeError, UnknownEventTypeError
from src.ingest import AssignedEvent, EventKind
from src.measures import (
    CrimeCategory, EventCategory, EventTaxonomy, build_measure_table, city_series, city_summary, classify_crime,
    classify_event, correlation_matrix, monthly_city_series, yearly_series,
)


def permit(bg_id, raw_type, day):
    return AssignedEvent(kind=EventKind.PERMIT, date=day, raw_type=raw_type, blockgroup_id=bg_id)


def crime(bg_id, raw_type, day):
    return AssignedEvent(kind=EventKind.CRIME, date=day, raw_type=raw_type, blockgroup_id=bg_id)


class TestClassification:
    @pytest.mark.parametrize("raw_type, expected", [
        ("4th of July", EventCategory.REGULAR),
        ("Church Service", EventCategory.REGULAR),
        ("Birthday Party", EventCategory.SPONTANEOUS),
        ("  national night OUT ", EventCategory.SPONTANEOUS),
    ])
    def test_event_categories(self, raw_type, expected):
        assert classify_event(raw_type) == expected

    @pytest.mark.parametrize("raw_type, expected", [
        ("Aggravated Assault", CrimeCategory.VIOLENT),
        ("Burglary Residential", CrimeCategory.NONVIOLENT),
        ("Prostitution", CrimeCategory.VICE),
        ("Vandalism", CrimeCategory.OTHER),
    ])
    def test_crime_categories(self, raw_type, expected):
        assert classify_crime(raw_type) == expected

    def test_unknown_event_type(self):
        with pytest.raises(UnknownEventTypeError):
            classify_event("Alien Landing")

    def test_unknown_crime_type(self):
        with pytest.raises(UnknownCrimeTypeError):
            classify_crime("Jaywalking")

    def test_shipped_whitelist_size(self):
        assert len(EventTaxonomy(load_event_types())) == 29


class TestMeasureTable:
    def test_spontaneous_proportion(self):
        events = [permit("A", "Birthday Party", date(2010, 6, 1))] * 92 + [permit("A", "4th of July", date(2010, 7, 4))] * 8
        table = build_measure_table(events, [], ["A"])
        assert table.frame.loc["A", "n_events"] == 100
        assert table.frame.loc["A", "spontaneous_proportion"] == pytest.approx(0.92)

    def test_no_events_gives_undefined_proportion(self):
        table = build_measure_table([], [crime("A", "Theft", date(2010, 1, 1))], ["A"])
        assert table.frame.loc["A", "n_events"] == 0
        assert math.isnan(table.frame.loc["A", "spontaneous_proportion"])

    def test_zero_crime_log_is_undefined(self):
        table = build_measure_table([], [crime("B", "Theft", date(2010, 1, 1))], ["A", "B"])
        assert math.isnan(table.frame.loc["A", "log_crime_total"])
        assert table.frame.loc["B", "log_crime_total"] == 0.0

    def test_crime_categories_add_up(self):
        crimes = [
            crime("A", "Robbery", date(2008, 1, 1)),
            crime("A", "Theft", date(2008, 2, 1)),
            crime("A", "Gambling", date(2009, 3, 1)),
            crime("A", "Arson", date(2009, 4, 1)),
        ]
        row = build_measure_table([], crimes, ["A"]).frame.loc["A"]
        assert (row["crime_violent"], row["crime_nonviolent"], row["crime_vice"], row["crime_other"]) == (1, 1, 1, 1)
        assert row["crime_total"] == 4

    def test_yearly_series_are_zero_filled(self):
        table = build_measure_table([permit("A", "Prom", date(2009, 5, 1))], [], ["A", "B"], years=[2008, 2009, 2010])
        assert table.yearly_events("A") == {2008: 0, 2009: 1, 2010: 0}
        assert table.yearly_events("B") == {2008: 0, 2009: 0, 2010: 0}
        assert len(table.yearly) == 6

    def test_series_sum_to_window_counts(self):
        rng = np.random.default_rng(2)
        labels = ["Prom", "Wedding", "Labor Day"]
        events = [
            permit(f"G{rng.integers(5)}", labels[rng.integers(3)], date(int(rng.integers(2006, 2016)), 6, 1))
            for _ in range(300)
        ]
        table = build_measure_table(events, [], [f"G{i}" for i in range(5)])
        per_group = table.yearly.groupby("blockgroup_id")["events"].sum()
        assert per_group.to_dict() == table.frame["n_events"].to_dict()
        assert table.monthly["events"].sum() == 300

    def test_events_outside_profiles_are_dropped(self):
        table = build_measure_table([permit("Z", "Prom", date(2010, 1, 1))], [], ["A"])
        assert table.dropped_events == 1
        assert table.frame.loc["A", "n_events"] == 0

    def test_rows_in_ascending_id_order(self):
        table = build_measure_table([], [], ["C", "A", "B"])
        assert list(table.frame.index) == ["A", "B", "C"]


class TestYearlySeries:
    def test_absent_years_are_zero(self):
        events = [crime("A", "Theft", date(2007, 3, 1)), crime("A", "Robbery", date(2007, 4, 1))]
        assert yearly_series(events, years=[2006, 2007, 2008]) == {2006: 0, 2007: 2, 2008: 0}

    def test_category_filter(self):
        events = [crime("A", "Theft", date(2007, 3, 1)), crime("A", "Robbery", date(2007, 4, 1))]
        assert yearly_series(events, years=[2007], category=CrimeCategory.VIOLENT) == {2007: 1}

    def test_events_outside_years_are_ignored(self):
        events = [permit("A", "Prom", date(2016, 3, 1))]
        assert yearly_series(events, years=[2015]) == {2015: 0}


class TestCitySeries:
    def test_city_totals(self):
        events = [permit("A", "Prom", date(2010, 1, 1)), permit("B", "Labor Day", date(2010, 9, 1))]
        table = build_measure_table(events, [crime("A", "Theft", date(2010, 2, 1))], ["A", "B"], years=[2010, 2011])
        series = city_series(table).set_index("year")
        assert series.loc[2010, "events"] == 2
        assert series.loc[2010, "spontaneous_proportion"] == pytest.approx(0.5)
        assert series.loc[2010, "crimes_per_blockgroup"] == pytest.approx(0.5)
        assert math.isnan(series.loc[2011, "spontaneous_proportion"])

    def test_monthly_grid_is_complete(self):
        table = build_measure_table([permit("A", "Prom", date(2010, 5, 1))], [], ["A"], years=[2010, 2011])
        monthly = monthly_city_series(table)
        assert len(monthly) == 24
        assert monthly["events"].sum() == 1

    def test_summary_shares(self):
        events = [permit("A", "Birthday Party", date(2010, 6, 1))] * 3 + [permit("A", "Labor Day", date(2010, 9, 1))]
        summary = city_summary(build_measure_table(events, [], ["A", "B"]))
        assert summary["total_events"] == 4
        assert summary["spontaneous_share"] == pytest.approx(0.75)
        assert summary["personal_share"] == pytest.approx(0.75)
        assert summary["blockgroups_without_events"] == 1
        assert summary["total_crimes"] == 0
        assert summary["crime_violent_share"] is None


class TestCorrelation:
    def test_known_correlation(self):
        frame = pd.DataFrame({"a": [1.0, 2.0, 3.0, 4.0, 5.0], "b": [1.0, 3.0, 2.0, 5.0, 4.0]})
        assert correlation_matrix(frame, ["a", "b"]).loc["a", "b"] == pytest.approx(0.8)

    def test_perfect_correlations(self):
        x = np.arange(10.0)
        frame = pd.DataFrame({"x": x, "up": 3 * x + 1, "down": -2 * x})
        corr = correlation_matrix(frame, ["x", "up", "down"])
        assert corr.loc["x", "up"] == pytest.approx(1.0)
        assert corr.loc["x", "down"] == pytest.approx(-1.0)

    def test_symmetric_with_unit_diagonal(self):
        rng = np.random.default_rng(0)
        frame = pd.DataFrame(rng.normal(size=(50, 4)), columns=list("abcd"))
        corr = correlation_matrix(frame, list("abcd")).to_numpy()
        assert np.allclose(corr, corr.T)
        assert np.allclose(np.diag(corr), 1.0)

    def test_constant_column_is_undefined(self):
        frame = pd.DataFrame({"a": [1.0, 2.0, 3.0], "c": [7.0, 7.0, 7.0]})
        corr = correlation_matrix(frame, ["a", "c"])
        assert corr["c"].isna().all()
        assert corr.loc["c"].isna().all()
        assert corr.loc["a", "a"] == 1.0

    def test_rows_with_missing_values_are_skipped(self):
        frame = pd.DataFrame({"a": [1.0, 2.0, 3.0, np.nan], "b": [2.0, 4.0, 6.0, 100.0]})
        assert correlation_matrix(frame, ["a", "b"]).loc["a", "b"] == pytest.approx(1.0)
