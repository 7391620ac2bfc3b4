import json

import numpy as np
import pytest
from pydantic import ValidationError

from src.config import CityConfig
from src.ingest import assign_events, parse_blockgroups, parse_profiles, read_crimes, read_permits
from src.measures import classify_crime, classify_event
from src.synth import draw_city, generate_city

BUNDLE = ("blockgroups.geojson", "permits.csv", "crimes.csv", "acs.csv", "landuse.csv", "truth.json")


def test_same_seed_gives_identical_files(tmp_path, small_city_config):
    generate_city(small_city_config, tmp_path / "a")
    generate_city(small_city_config, tmp_path / "b")
    for name in BUNDLE:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_different_seeds_differ(tmp_path, small_city_config):
    generate_city(small_city_config, tmp_path / "a")
    generate_city(small_city_config.model_copy(update={"seed": 8}), tmp_path / "b")
    assert (tmp_path / "a" / "crimes.csv").read_bytes() != (tmp_path / "b" / "crimes.csv").read_bytes()


def test_bundle_round_trips_through_ingest(tmp_path, small_city_config):
    city, paths = generate_city(small_city_config, tmp_path)
    blockgroups = parse_blockgroups(paths["blockgroups"])
    permits, permit_report = read_permits(paths["permits"])
    crimes, crime_report = read_crimes(paths["crimes"])
    profiles = parse_profiles(paths["acs"], paths["landuse"], blockgroups)

    assert [bg.id for bg in blockgroups] == city.ids
    assert len(profiles) == small_city_config.n_blockgroups
    assert permit_report.skipped == 0 and crime_report.skipped == 0
    assert len(permits) == int(city.permit_counts.sum())
    assert len(crimes) == int(city.crime_counts.sum())

    assigned, unassigned = assign_events(crimes, blockgroups)
    assert unassigned == 0
    per_unit = {bg: 0 for bg in city.ids}
    for event in assigned:
        per_unit[event.blockgroup_id] += 1
    assert per_unit == city.crime_totals().to_dict()

    assert all(classify_event(e.raw_type) for e in permits)
    assert all(classify_crime(e.raw_type) for e in crimes)


def test_truth_record(tmp_path, small_city_config):
    city, paths = generate_city(small_city_config, tmp_path)
    truth = json.loads(paths["truth"].read_text(encoding="utf-8"))
    assert truth["seed"] == small_city_config.seed
    assert truth["treated"] == [bg for bg, t in zip(city.ids, city.treated) if t]
    assert set(truth["expected_crimes"]) == set(city.ids)


def test_counts_follow_configured_intensities():
    city = draw_city(CityConfig(n_blockgroups=900, seed=12, crime_trend_fraction=0.0, permit_trend_fraction=0.0))
    expected = np.array([city.truth.expected_crimes[bg] for bg in city.ids])
    observed = city.crime_counts.sum(axis=(1, 2))
    # unit noise is part of the expected value, so residuals are pure Poisson
    standardized = (observed - expected) / np.sqrt(expected)
    assert np.mean(np.abs(standardized) <= 4) >= 0.99


def test_income_effects_show_in_correlations():
    config = CityConfig(
        n_blockgroups=900, seed=4, event_coefs={"income": -0.5}, crime_coefs={"income": -0.5},
        permit_trend_fraction=0.0, crime_trend_fraction=0.0,
    )
    city = draw_city(config)
    income = np.log(city.profile_frame()["mean_income"].to_numpy())
    permits = city.permit_totals().to_numpy()
    crimes = city.crime_totals().to_numpy()
    assert np.corrcoef(income, permits)[0, 1] < 0
    assert np.corrcoef(permits, crimes)[0, 1] > 0


def test_seasonal_permits():
    city = draw_city(CityConfig(n_blockgroups=100, seed=2, warm_month_multiplier=3.0))
    by_month = city.permit_counts.sum(axis=(0, 1, 3))
    assert by_month[6] > by_month[0]


def test_grid_geometry():
    city = draw_city(CityConfig(n_blockgroups=10, seed=1))
    assert len(city.blockgroups) == 10
    assert all(bg.area > 0 for bg in city.blockgroups)


def test_yearly_frame_layout():
    city = draw_city(CityConfig(n_blockgroups=9, seed=5))
    yearly = city.yearly_frame()
    assert len(yearly) == 9 * len(city.years)
    assert yearly["crime_total"].sum() == city.crime_counts.sum()
    assert (yearly["events"] == yearly["spontaneous"] + yearly["regular"]).all()


def test_config_rejects_unknown_covariates():
    with pytest.raises(ValidationError):
        CityConfig(crime_coefs={"weather": 1.0})
