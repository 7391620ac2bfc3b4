import json

import numpy as np
import pandas as pd
import pytest

from src.glm import Family, ModelSpec, fit_ols
from src.psm import AboveMedian, ExperimentSpec
from src.reports import (
    EXPERIMENT_COLUMNS, REGRESSION_COLUMNS, experiment_row, experiment_summary, experiments_frame,
    regression_frame, report_properties, write_report_geojson,
)

from .conftest import grid_blockgroups


def _fit():
    x = np.arange(10.0)
    y = 1 + 2 * x + np.sin(x)
    return fit_ols(np.column_stack([x, np.ones(10)]), y, ["x", "const"])


def test_regression_frame_rows():
    ok = ModelSpec("ok_model", "y", Family.OLS, ("x",))
    failed = ModelSpec("failed_model", "y", Family.LOGISTIC, ("x",))
    frame = regression_frame([(ok, _fit(), "ok", 2), (failed, None, "error: ConvergenceError: diverged", None)])
    assert list(frame.columns) == REGRESSION_COLUMNS
    assert frame["row_type"].tolist() == ["term", "term", "model", "model"]
    assert frame["term"].tolist()[:2] == ["x", "const"]
    summary = frame.iloc[2]
    assert summary["n_obs"] == 10 and summary["n_dropped"] == 2
    assert summary["rmse"] > 0
    assert frame.iloc[3]["status"].startswith("error")


def test_exact_fit_reports_blank_aic():
    x = np.arange(6.0)
    spec = ModelSpec("exact", "y", Family.OLS, ("x", "x2"))
    fit = fit_ols(np.column_stack([x, x ** 2, np.ones(6)]), 3 - x + 0.5 * x ** 2, ["x", "x2", "const"])
    summary = regression_frame([(spec, fit, "ok", 0)]).iloc[-1]
    assert summary["row_type"] == "model"
    assert pd.isna(summary["aic"]) and pd.isna(summary["log_likelihood"])
    assert summary["r_squared"] == pytest.approx(1.0)


def test_failed_experiment_keeps_its_row():
    spec = ExperimentSpec("e", AboveMedian("n_events"), "log_crime_total")
    frame = experiments_frame([experiment_row(spec, status="error: NoContrastError: none")])
    assert list(frame.columns) == EXPERIMENT_COLUMNS
    assert frame.loc[0, "experiment"] == "e"
    assert np.isnan(frame.loc[0, "estimate"])
    assert experiment_summary(frame.to_dict("records"))[0]["estimate"] is None


def test_report_geojson_properties(tmp_path):
    groups = grid_blockgroups(2, 2)
    ids = [g.id for g in groups]
    measures = pd.DataFrame({"n_events": [1, 2, 3, 4], "spontaneous_proportion": [0.5, np.nan, 1.0, 0.0]}, index=ids)
    trends = pd.DataFrame({"crime_total_class": ["positive", "none"]}, index=ids[:2])
    properties = report_properties(measures, trends)
    assert properties[ids[1]]["spontaneous_proportion"] is None
    assert properties[ids[3]]["crime_total_class"] is None

    path = write_report_geojson(groups, measures, trends, tmp_path / "report.geojson")
    collection = json.loads(path.read_text(encoding="utf-8"))
    assert len(collection["features"]) == 4
    first = collection["features"][0]["properties"]
    assert first["id"] == ids[0] and first["n_events"] == 1 and first["crime_total_class"] == "positive"
