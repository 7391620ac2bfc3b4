import math

import numpy as np
import pandas as pd
import pytest

from src.config import CityConfig
from src.exceptions import TrendError
from src.synth import draw_city
from src.trends import (
    TrendClass, classify, classify_all, fit_yearly_trend, measure_series, results_frame, trend_frame,
)

YEARS = list(range(2006, 2016))


def series(values):
    return dict(zip(YEARS, values))


class TestFitYearlyTrend:
    def test_exact_line(self):
        result = fit_yearly_trend(series(range(1, 11)))
        assert result.slope == pytest.approx(1.0)
        assert result.p_value == 0.0
        assert result.classification == TrendClass.POSITIVE

    def test_constant_series(self):
        result = fit_yearly_trend(series([4.0] * 10))
        assert result.slope == 0.0
        assert result.p_value == 1.0
        assert result.classification == TrendClass.NONE

    def test_negated_series_flips_class(self):
        values = [3, 5, 4, 7, 8, 8, 10, 12, 11, 14]
        up = fit_yearly_trend(series(values))
        down = fit_yearly_trend(series([-v for v in values]))
        assert up.classification == TrendClass.POSITIVE
        assert down.classification == TrendClass.NEGATIVE
        assert down.slope == pytest.approx(-up.slope)
        assert down.p_value == pytest.approx(up.p_value)

    def test_shift_and_scale_invariance(self):
        values = np.array([3, 5, 4, 7, 6, 8, 7, 9, 8, 10], dtype=float)
        base = fit_yearly_trend(series(values))
        shifted = fit_yearly_trend(series(values + 100))
        scaled = fit_yearly_trend(series(values * 3))
        assert shifted.slope == pytest.approx(base.slope)
        assert shifted.p_value == pytest.approx(base.p_value)
        assert scaled.slope == pytest.approx(3 * base.slope)
        assert scaled.t_stat == pytest.approx(base.t_stat)
        assert scaled.classification == base.classification

    def test_matches_textbook_slope_test(self):
        values = [2, 1, 4, 3, 6, 4, 5, 8, 6, 9]
        result = fit_yearly_trend(series(values))
        x = np.array(YEARS, dtype=float)
        slope, intercept = np.polyfit(x, values, 1)
        resid = np.array(values) - (slope * x + intercept)
        se = math.sqrt(resid @ resid / 8 / np.sum((x - x.mean()) ** 2))
        assert result.slope == pytest.approx(slope)
        assert result.slope_se == pytest.approx(se)

    def test_undefined_years_are_skipped(self):
        result = fit_yearly_trend({2006: 1.0, 2007: None, 2008: 3.0, 2009: float("nan"), 2010: 5.0})
        assert result.n_years == 3
        assert result.slope == pytest.approx(1.0)

    def test_fewer_than_three_years(self):
        with pytest.raises(TrendError):
            fit_yearly_trend({2006: 1.0, 2007: 2.0})


def test_classification_rule():
    assert classify(0.5, 0.01) == TrendClass.POSITIVE
    assert classify(-0.5, 0.01) == TrendClass.NEGATIVE
    assert classify(0.5, 0.2) == TrendClass.NONE
    assert classify(0.5, 0.06, alpha=0.1) == TrendClass.POSITIVE


def _yearly(rows):
    return pd.DataFrame(rows, columns=["blockgroup_id", "year", "events", "spontaneous", "crime_total"])


class TestClassifyAll:
    def test_constant_city_has_no_trends(self):
        yearly = _yearly([(bg, y, 2, 1, 5) for bg in ("A", "B", "C") for y in YEARS])
        summary = classify_all(yearly, measures=("permits", "spontaneous_proportion", "crime_total"))
        for counts in summary.counts.values():
            assert counts["positive"] == 0 and counts["negative"] == 0

    def test_spontaneity_needs_three_years_with_events(self):
        rows = [("A", y, 0, 0, 1) for y in YEARS]
        rows[0] = ("A", 2006, 2, 1, 1)
        rows[1] = ("A", 2007, 4, 1, 1)
        summary = classify_all(_yearly(rows), measures=("spontaneous_proportion",))
        assert summary.skipped["spontaneous_proportion"] == 1
        assert summary.results == []

    def test_spontaneous_series_is_a_proportion(self):
        yearly = _yearly([("A", 2006, 4, 1, 0), ("A", 2007, 0, 0, 0)])
        assert measure_series(yearly, "spontaneous_proportion") == {"A": {2006: 0.25, 2007: None}}

    def test_unknown_measure(self):
        with pytest.raises(TrendError):
            measure_series(_yearly([("A", 2006, 1, 1, 1)]), "sunshine")

    def test_wide_frame(self):
        yearly = _yearly(
            [("A", y, 1, 0, 10 + 2 * i) for i, y in enumerate(YEARS)]
            + [("B", y, 1, 0, 30 - 2 * i) for i, y in enumerate(YEARS)]
        )
        summary = classify_all(yearly, measures=("crime_total",))
        wide = trend_frame(summary.results)
        assert wide.loc["A", "crime_total_class"] == "positive"
        assert wide.loc["B", "crime_total_negative"] == 1.0
        assert wide.loc["A", "crime_total_negative"] == 0.0
        assert list(results_frame(summary.results).columns) == [
            "blockgroup_id", "measure", "slope", "se", "t_stat", "p", "class", "n_years",
        ]

    def test_recovers_planted_trends(self):
        config = CityConfig(
            n_blockgroups=1600, seed=20240611, crime_intercept=6.5, crime_coefs={}, unit_noise_sd=0.0,
            crime_trend_fraction=0.1, crime_trend_slope=0.2,
        )
        city = draw_city(config)
        summary = classify_all(city.yearly_frame(), measures=("crime_total",), jobs=4)
        classes = {r.blockgroup_id: r.classification for r in summary.results}
        planted = city.truth.crime_trend_slopes
        expected = {bg: TrendClass.POSITIVE if s > 0 else TrendClass.NEGATIVE for bg, s in planted.items()}
        recall = np.mean([classes[bg] == cls for bg, cls in expected.items()])
        null_units = [bg for bg in city.ids if bg not in planted]
        false_positive_rate = np.mean([classes[bg] != TrendClass.NONE for bg in null_units])
        assert recall >= 0.9
        assert false_positive_rate <= 0.075
