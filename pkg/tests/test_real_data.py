"""
Reproduction checks against the real city inputs.

Set VIBRANCY_REAL_DATA to a directory holding permits.csv, crimes.csv,
blockgroups.geojson, acs.csv and landuse.csv to run them.
"""
import json

import pandas as pd
import pytest

from src.config import build_run_config
from src.manager import PipelineManager

from .conftest import real_data_dir

DATA_DIR = real_data_dir()

pytestmark = pytest.mark.skipif(
    DATA_DIR is None, reason="SKIPPED-DATA: set VIBRANCY_REAL_DATA to the real input directory",
)


@pytest.fixture(scope="module")
def report_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("real")
    config = build_run_config({
        "out_dir": str(out),
        "inputs": {
            name: str(DATA_DIR / filename) for name, filename in (
                ("permits", "permits.csv"), ("crimes", "crimes.csv"), ("blockgroups", "blockgroups.geojson"),
                ("acs", "acs.csv"), ("landuse", "landuse.csv"),
            )
        },
    })
    return PipelineManager(config).cmd_all()


def test_spontaneous_share(report_dir):
    run_report = json.loads((report_dir / "run_report.json").read_text(encoding="utf-8"))
    assert run_report["city"]["spontaneous_share"] == pytest.approx(0.925, abs=0.005)


def test_median_permits(report_dir):
    assert json.loads((report_dir / "run_report.json").read_text(encoding="utf-8"))["city"]["median_events"] == 42.5


def test_crime_trend_counts(report_dir):
    trends = pd.read_csv(report_dir / "trends.csv")
    crime = trends[trends["measure"] == "crime_total"]["class"].value_counts()
    assert crime.get("positive", 0) == 18
    assert crime.get("negative", 0) == 540


def test_permit_coefficient(report_dir):
    report = pd.read_csv(report_dir / "regression_report.csv")
    row = report[(report["model"] == "ols_log_crime_total__n_events") & (report["term"] == "n_events")].iloc[0]
    assert row["estimate"] == pytest.approx(0.002, abs=0.0005)
    assert row["std_error"] == pytest.approx(0.0003, abs=0.0001)


def test_spontaneity_trend_experiment(report_dir):
    experiments = pd.read_csv(report_dir / "experiments.csv").set_index("experiment")
    row = experiments.loc["spontaneity_trend_positive__crime_trend_slope"]
    assert row["estimate"] == pytest.approx(-2.1928, abs=0.01)
    assert row["ci_upper"] < 0
