"""
Pipeline orchestration: one method per command, each reading its upstream
artifacts from the output directory and writing its own.
"""
import logging
import shutil
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from .config import InputPaths, RunConfig, load_crime_types, load_event_types
from .exceptions import MissingArtifactError, ModelError, VibrancyError
from .glm import fit_model, select_models
from .ingest import (
    EventKind, assign_events, load_assigned, load_profiles, parse_blockgroups, parse_profiles, read_crimes,
    read_permits, write_assigned, write_profiles,
)
from .measures import (
    CrimeTaxonomy, EventTaxonomy, MeasureTable, build_measure_table, city_series, city_summary,
    correlation_matrix, monthly_city_series,
)
from .psm import run_experiment, select_experiments
from .reports import (
    STATUS_OK, experiment_row, experiment_summary, experiments_frame, pairs_frame, regression_frame,
    write_report_geojson,
)
from .synth import generate_city
from .trends import classify_all, results_frame, trend_frame
from .utils import (
    console as default_console, ensure_dir, format_float, read_frame_csv, read_json, run_ordered,
    write_frame_csv, write_json,
)


logger = logging.getLogger("vibrancy.manager")

SYNTH_DIR = "synthetic"
ASSIGNED_FILE = "assigned.csv"
PROFILES_FILE = "profiles.csv"
INGEST_REPORT_FILE = "ingest_report.json"
MEASURES_FILE = "measures.csv"
SERIES_FILE = "series.csv"
MONTHLY_FILE = "monthly.csv"
CITY_SERIES_FILE = "city_series.csv"
MONTHLY_CITY_FILE = "monthly_city.csv"
CORRELATIONS_FILE = "correlations.csv"
CITY_SUMMARY_FILE = "city_summary.json"
TRENDS_FILE = "trends.csv"
REGRESSION_FILE = "regression_report.csv"
REGRESSION_DROPPED_FILE = "regression_dropped.json"
EXPERIMENTS_FILE = "experiments.csv"
REPORT_DIR = "report"

COMMANDS = ("synth", "ingest", "measures", "trends", "regress", "match", "report")


class PipelineManager:
    """Runs pipeline commands against one RunConfig and its output directory."""

    def __init__(self, config: RunConfig, console: Optional[Console] = None):
        self.config = config
        self.console = console or default_console
        self.out_dir = Path(config.out_dir)

    # -- helpers -----------------------------------------------------------

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def require(self, name: str, command: str) -> Path:
        """Path of an upstream artifact, or MissingArtifactError naming the command that makes it."""
        path = self.path(name)
        if not path.exists():
            raise MissingArtifactError(str(path), command)
        return path

    def synthetic_inputs(self) -> InputPaths:
        base = self.path(SYNTH_DIR)
        return InputPaths(
            permits=base / "permits.csv", crimes=base / "crimes.csv",
            blockgroups=base / "blockgroups.geojson", acs=base / "acs.csv", landuse=base / "landuse.csv",
        )

    def resolve_inputs(self) -> InputPaths:
        """
        The synthetic bundle in the output directory when the config has a synth
        section or no inputs at all, otherwise the configured inputs.
        """
        if not self.config.uses_synthetic_inputs:
            self.config.check_inputs()
            return self.config.inputs
        synthetic = self.synthetic_inputs()
        if not synthetic.blockgroups.exists():
            raise MissingArtifactError(str(synthetic.blockgroups), "synth")
        return synthetic

    def taxonomies(self) -> Tuple[EventTaxonomy, CrimeTaxonomy]:
        return (
            EventTaxonomy(load_event_types(self.config.event_types_path)),
            CrimeTaxonomy(load_crime_types(self.config.crime_types_path)),
        )

    def load_measures(self) -> pd.DataFrame:
        frame = read_frame_csv(self.require(MEASURES_FILE, "measures"))
        return frame.set_index("blockgroup_id").sort_index()

    def load_trends(self) -> pd.DataFrame:
        return trend_frame(read_frame_csv(self.require(TRENDS_FILE, "trends")))

    def _table(self, title: str, rows: List[Tuple[str, Any]]) -> None:
        table = Table(title=title, show_header=False)
        table.add_column("item", style="cyan")
        table.add_column("value", justify="right")
        for label, value in rows:
            table.add_row(label, str(value))
        self.console.print(table)

    # -- commands ----------------------------------------------------------

    def cmd_synth(self) -> Dict[str, Path]:
        """Generate a synthetic input bundle into <out>/synthetic."""
        city, paths = generate_city(self.config.city_config(), self.path(SYNTH_DIR))
        self._table("Synthetic city", [
            ("block groups", len(city.ids)),
            ("permits", int(city.permit_counts.sum())),
            ("crimes", int(city.crime_counts.sum())),
            ("treated", len(city.truth.treated)),
            ("seed", city.config.seed),
        ])
        return paths

    def cmd_ingest(self) -> Dict[str, Any]:
        """Parse every input, run the spatial join and persist assigned events and profiles."""
        inputs = self.resolve_inputs()
        windows = self.config.windows
        blockgroups = parse_blockgroups(inputs.blockgroups)
        permits, permit_report = read_permits(inputs.permits, windows.permit_window)
        crimes, crime_report = read_crimes(inputs.crimes, windows.crime_window)
        profiles = parse_profiles(inputs.acs, inputs.landuse, blockgroups)

        assigned_permits, unassigned_permits = assign_events(permits, blockgroups, jobs=self.config.jobs)
        assigned_crimes, unassigned_crimes = assign_events(crimes, blockgroups, jobs=self.config.jobs)
        write_assigned(assigned_permits + assigned_crimes, self.path(ASSIGNED_FILE))
        write_profiles(profiles, self.path(PROFILES_FILE))

        report = {
            "blockgroups": len(blockgroups),
            "profiles": len(profiles),
            "permits": {**permit_report.to_dict(), "path": Path(permit_report.path).name,
                        "assigned": len(assigned_permits), "unassigned": unassigned_permits},
            "crimes": {**crime_report.to_dict(), "path": Path(crime_report.path).name,
                       "assigned": len(assigned_crimes), "unassigned": unassigned_crimes},
        }
        write_json(report, self.path(INGEST_REPORT_FILE))
        self._table("Ingest", [
            ("block groups", len(blockgroups)),
            ("permits read / skipped", f"{permit_report.rows_read} / {permit_report.skipped}"),
            ("crimes read / skipped", f"{crime_report.rows_read} / {crime_report.skipped}"),
            ("unassigned permits", unassigned_permits),
            ("unassigned crimes", unassigned_crimes),
        ])
        return report

    def cmd_measures(self) -> MeasureTable:
        """Aggregate assigned events into measures, series and correlations."""
        assigned = load_assigned(self.require(ASSIGNED_FILE, "ingest"))
        profiles = load_profiles(self.require(PROFILES_FILE, "ingest"))
        event_taxonomy, crime_taxonomy = self.taxonomies()
        permits = [a for a in assigned if a.kind == EventKind.PERMIT]
        crimes = [a for a in assigned if a.kind == EventKind.CRIME]
        table = build_measure_table(
            permits, crimes, profiles, event_taxonomy, crime_taxonomy, self.config.windows.series_years,
        )
        write_frame_csv(table.frame, self.path(MEASURES_FILE), index=True)
        write_frame_csv(table.yearly, self.path(SERIES_FILE))
        write_frame_csv(table.monthly, self.path(MONTHLY_FILE))
        write_frame_csv(city_series(table), self.path(CITY_SERIES_FILE))
        write_frame_csv(monthly_city_series(table), self.path(MONTHLY_CITY_FILE))
        joined = table.frame.join(profiles, how="left")
        write_frame_csv(correlation_matrix(joined), self.path(CORRELATIONS_FILE), index=True)
        summary = city_summary(table)
        write_json(summary, self.path(CITY_SUMMARY_FILE))
        self._table("Measures", [
            ("block groups", summary["blockgroups"]),
            ("events", summary["total_events"]),
            ("spontaneous share", format_float(summary["spontaneous_share"])),
            ("crimes", summary["total_crimes"]),
        ])
        return table

    def cmd_trends(self) -> pd.DataFrame:
        """Fit and classify yearly trends for every block group."""
        yearly = read_frame_csv(self.require(SERIES_FILE, "measures"))
        summary = classify_all(yearly, alpha=self.config.analysis.alpha, jobs=self.config.jobs)
        frame = results_frame(summary.results)
        write_frame_csv(frame, self.path(TRENDS_FILE))

        table = Table(title="Trend classes")
        for column in ("measure", "positive", "negative", "none", "skipped"):
            table.add_column(column, justify="right" if column != "measure" else "left")
        for measure, counts in summary.counts.items():
            table.add_row(
                measure, str(counts["positive"]), str(counts["negative"]), str(counts["none"]),
                str(summary.skipped[measure]),
            )
        self.console.print(table)
        return frame

    def cmd_regress(self) -> pd.DataFrame:
        """Fit every selected regression; a failing model is reported, not raised."""
        profiles = load_profiles(self.require(PROFILES_FILE, "ingest"))
        data = profiles.join(self.load_measures(), how="inner").join(self.load_trends(), how="left")
        specs = select_models(self.config.analysis.regressions)

        def fit_one(spec):
            try:
                fit, design = fit_model(data, spec)
                status = STATUS_OK if fit.converged else "not converged"
                return spec, fit, status, sorted(design.dropped)
            except ModelError as e:
                logger.warning(f"Model {spec.name} failed: {str(e)}")
                return spec, None, f"error: {type(e).__name__}: {str(e)}", None

        outcomes = run_ordered(fit_one, specs, jobs=self.config.jobs)
        frame = regression_frame([
            (spec, fit, status, None if dropped is None else len(dropped))
            for spec, fit, status, dropped in outcomes
        ])
        write_frame_csv(frame, self.path(REGRESSION_FILE))
        # row ids left out of each fitted model, mostly zero counts under a log outcome
        write_json(
            {spec.name: dropped for spec, _, _, dropped in outcomes if dropped is not None},
            self.path(REGRESSION_DROPPED_FILE),
        )
        models = frame[frame["row_type"] == "model"]
        self._table("Regressions", [
            ("models", len(models)),
            ("fitted", int((models["status"] == STATUS_OK).sum())),
            ("failed", int((models["status"] != STATUS_OK).sum())),
        ])
        return frame

    def cmd_match(self) -> pd.DataFrame:
        """Run every selected matching experiment and write one row per experiment."""
        profiles = load_profiles(self.require(PROFILES_FILE, "ingest"))
        measures = self.load_measures()
        trends = self.load_trends()
        matching = self.config.matching
        specs = select_experiments(self.config.analysis.experiments)

        def run_one(spec):
            try:
                experiment, inference = run_experiment(
                    profiles, measures, trends, spec.rule, spec.outcome, name=spec.name,
                    match_on=matching.match_on, caliper=matching.caliper,
                    many_to_one_ratio=matching.many_to_one_ratio,
                )
                return spec, experiment, inference, STATUS_OK
            except VibrancyError as e:
                logger.warning(f"Experiment {spec.name} failed: {str(e)}")
                return spec, None, None, f"error: {type(e).__name__}: {str(e)}"

        rows = []
        for spec, experiment, inference, status in run_ordered(run_one, specs, jobs=self.config.jobs):
            rows.append(experiment_row(spec, experiment, inference, status))
            if experiment is not None:
                write_frame_csv(experiment.balance, self.path(f"balance/{spec.name}.csv"))
                write_frame_csv(pairs_frame(experiment), self.path(f"pairs/{spec.name}.csv"))
        frame = experiments_frame(rows)
        write_frame_csv(frame, self.path(EXPERIMENTS_FILE))

        table = Table(title="Matched experiments")
        for column in ("experiment", "pairs", "estimate", "95% CI", "status"):
            table.add_column(column)
        for row in rows:
            ci = f"[{format_float(row.get('ci_lower'))}, {format_float(row.get('ci_upper'))}]"
            table.add_row(
                row["experiment"], str(row.get("n_pairs", "-")), format_float(row.get("estimate")), ci,
                row["status"] if row["status"] == STATUS_OK else "[red]failed[/red]",
            )
        self.console.print(table)
        return frame

    def cmd_report(self) -> Path:
        """Bundle every artifact into <out>/report with the enriched GeoJSON and run_report.json."""
        inputs = self.resolve_inputs()
        report_dir = ensure_dir(self.path(REPORT_DIR))
        measures = self.load_measures()
        trends = self.load_trends()
        blockgroups = parse_blockgroups(inputs.blockgroups)
        write_report_geojson(blockgroups, measures, trends, report_dir / "blockgroups.geojson")

        required = {
            MEASURES_FILE: "measures", SERIES_FILE: "measures", MONTHLY_FILE: "measures",
            CITY_SERIES_FILE: "measures", MONTHLY_CITY_FILE: "measures", CORRELATIONS_FILE: "measures",
            TRENDS_FILE: "trends", REGRESSION_FILE: "regress",
            EXPERIMENTS_FILE: "match",
        }
        for name, command in required.items():
            shutil.copyfile(self.require(name, command), report_dir / name)

        experiments = read_frame_csv(self.path(EXPERIMENTS_FILE))
        regression = read_frame_csv(self.path(REGRESSION_FILE))
        models = regression[regression["row_type"] == "model"]
        ingest_report = read_json(self.require(INGEST_REPORT_FILE, "ingest"))
        run_report = {
            "schema_version": self.config.schema_version,
            "seed": self.config.seed,
            "alpha": self.config.analysis.alpha,
            "matching": {
                "caliper": self.config.matching.caliper,
                "match_on": self.config.matching.match_on,
                "many_to_one_ratio": self.config.matching.many_to_one_ratio,
            },
            "ingest": ingest_report,
            "city": read_json(self.require(CITY_SUMMARY_FILE, "measures")),
            "regressions": {
                "models": len(models),
                "failed": models.loc[models["status"] != STATUS_OK, "model"].tolist(),
                "dropped_ids": read_json(self.require(REGRESSION_DROPPED_FILE, "regress")),
            },
            "experiments": experiment_summary(experiments.to_dict("records")),
            "features": len(blockgroups),
        }
        write_json(run_report, report_dir / "run_report.json")
        self.console.print(Panel.fit(f"Report written to {report_dir}", style="bold green"))
        return report_dir

    def cmd_all(self) -> Path:
        """Run every command in order, generating a synthetic city first when needed."""
        if self.config.uses_synthetic_inputs:
            self.cmd_synth()
        self.cmd_ingest()
        self.cmd_measures()
        self.cmd_trends()
        self.cmd_regress()
        self.cmd_match()
        return self.cmd_report()

    def run(self, command: str) -> Any:
        self.console.print(Panel.fit(f"vibrancy {command}", style="bold magenta"))
        return getattr(self, f"cmd_{command}")()
