import json
from pathlib import Path

import pandas as pd
import pytest
import yaml

from src.cli import EXIT_ERROR, EXIT_OK, EXIT_USAGE, main
from src.config import load_run_config
from src.exceptions import ConfigurationError, MissingArtifactError
from src.manager import PipelineManager


def write_config(path: Path, **sections) -> Path:
    data = {
        "schema_version": 1,
        "jobs": 2,
        "synth": {"n_blockgroups": 100, "seed": 31, "treatment_effect": 0.2},
    }
    data.update(sections)
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


def tree(root: Path):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def pipeline_runs(tmp_path_factory):
    """Two full runs of the same configuration into separate output directories."""
    base = tmp_path_factory.mktemp("pipeline")
    config = write_config(base / "run.yaml")
    codes = [main(["all", "--config", str(config), "--out", str(base / name)]) for name in ("first", "second")]
    return codes, base / "first", base / "second"


class TestExitCodes:
    def test_missing_config_file(self, tmp_path):
        assert main(["ingest", "--config", str(tmp_path / "absent.yaml")]) == EXIT_USAGE

    def test_invalid_config(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("schema_version: 1\nunknown_key: 3\n", encoding="utf-8")
        assert main(["ingest", "--config", str(path)]) == EXIT_USAGE

    def test_unsupported_schema_version(self, tmp_path):
        path = tmp_path / "old.yaml"
        path.write_text("schema_version: 7\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_run_config(path)

    def test_missing_upstream_artifact(self, tmp_path):
        assert main(["measures", "--out", str(tmp_path / "out")]) == EXIT_USAGE

    def test_ingest_without_synthetic_bundle(self, tmp_path):
        assert main(["ingest", "--out", str(tmp_path / "out")]) == EXIT_USAGE

    def test_configured_input_missing(self, tmp_path):
        config = write_config(tmp_path / "run.yaml", inputs={
            "permits": "permits.csv", "crimes": "crimes.csv", "blockgroups": "bg.geojson",
            "acs": "acs.csv", "landuse": "landuse.csv",
        })
        data = yaml.safe_load(config.read_text(encoding="utf-8"))
        del data["synth"]
        config.write_text(yaml.safe_dump(data), encoding="utf-8")
        assert main(["ingest", "--config", str(config), "--out", str(tmp_path / "out")]) == EXIT_USAGE

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as info:
            main(["fly"])
        assert info.value.code == 2

    def test_broken_input_row(self, tmp_path):
        config = write_config(tmp_path / "run.yaml", synth={"n_blockgroups": 16, "seed": 3})
        out = tmp_path / "out"
        assert main(["synth", "--config", str(config), "--out", str(out)]) == EXIT_OK
        crimes = out / "synthetic" / "crimes.csv"
        crimes.write_text(crimes.read_text(encoding="utf-8") + "not-a-date,10:00,39.9,-75.2,Theft\n", encoding="utf-8")
        assert main(["ingest", "--config", str(config), "--out", str(out)]) == EXIT_USAGE

    def test_error_exit_for_other_failures(self, tmp_path, monkeypatch):
        from src.exceptions import TrendError

        def broken(self):
            raise TrendError("boom")

        monkeypatch.setattr(PipelineManager, "cmd_trends", broken)
        assert main(["trends", "--out", str(tmp_path)]) == EXIT_ERROR


class TestPipeline:
    def test_runs_succeed(self, pipeline_runs):
        codes, _, _ = pipeline_runs
        assert codes == [EXIT_OK, EXIT_OK]

    def test_reruns_are_byte_identical(self, pipeline_runs):
        _, first, second = pipeline_runs
        assert tree(first) == tree(second)

    def test_report_contents(self, pipeline_runs):
        _, first, _ = pipeline_runs
        report = first / "report"
        for name in (
            "measures.csv", "series.csv", "trends.csv", "regression_report.csv", "experiments.csv",
            "city_series.csv", "monthly_city.csv", "blockgroups.geojson", "run_report.json",
        ):
            assert (report / name).exists(), name

    def test_fourteen_experiment_rows(self, pipeline_runs):
        _, first, _ = pipeline_runs
        experiments = pd.read_csv(first / "report" / "experiments.csv")
        assert len(experiments) == 14
        for name in experiments.loc[experiments["status"] == "ok", "experiment"]:
            balance = pd.read_csv(first / "balance" / f"{name}.csv")
            assert list(balance.columns) == ["covariate", "smd_before", "smd_after"]

    def test_report_features_match_blockgroups(self, pipeline_runs):
        _, first, _ = pipeline_runs
        collection = json.loads((first / "report" / "blockgroups.geojson").read_text(encoding="utf-8"))
        assert len(collection["features"]) == 100
        run_report = json.loads((first / "report" / "run_report.json").read_text(encoding="utf-8"))
        assert run_report["features"] == 100
        assert run_report["ingest"]["crimes"]["unassigned"] == 0

    def test_regression_report_layout(self, pipeline_runs):
        _, first, _ = pipeline_runs
        report = pd.read_csv(first / "report" / "regression_report.csv")
        models = report[report["row_type"] == "model"]
        assert len(models) == 24
        fitted = models[models["status"] == "ok"]["model"]
        assert set(fitted) <= set(report.loc[report["row_type"] == "term", "model"])

    def test_run_report_lists_dropped_ids(self, pipeline_runs):
        _, first, _ = pipeline_runs
        run_report = json.loads((first / "report" / "run_report.json").read_text(encoding="utf-8"))
        dropped = run_report["regressions"]["dropped_ids"]
        report = pd.read_csv(first / "report" / "regression_report.csv")
        models = report[(report["row_type"] == "model") & report["n_dropped"].notna()]
        assert set(dropped) == set(models["model"])
        for model, n_dropped in zip(models["model"], models["n_dropped"]):
            assert len(dropped[model]) == int(n_dropped)
            assert dropped[model] == sorted(dropped[model])
        measures = pd.read_csv(first / "measures.csv", dtype={"blockgroup_id": str})
        assert set().union(*dropped.values()) <= set(measures["blockgroup_id"])

    def test_trend_columns(self, pipeline_runs):
        _, first, _ = pipeline_runs
        trends = pd.read_csv(first / "trends.csv")
        assert {"blockgroup_id", "measure", "slope", "se", "p", "class"} <= set(trends.columns)
        assert set(trends["class"]) <= {"positive", "negative", "none"}

    def test_measures_cover_every_blockgroup(self, pipeline_runs):
        _, first, _ = pipeline_runs
        measures = pd.read_csv(first / "measures.csv", dtype={"blockgroup_id": str})
        series = pd.read_csv(first / "series.csv", dtype={"blockgroup_id": str})
        assert len(measures) == 100
        assert len(series) == 100 * 10
        totals = series.groupby("blockgroup_id")["crime_total"].sum()
        assert totals.to_dict() == measures.set_index("blockgroup_id")["crime_total"].to_dict()


def test_manager_reports_missing_artifact(tmp_path):
    manager = PipelineManager(load_run_config().with_overrides(out=str(tmp_path)))
    with pytest.raises(MissingArtifactError) as info:
        manager.cmd_regress()
    assert info.value.command == "ingest"
