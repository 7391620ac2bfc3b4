import pytest

from src.config import (
    DEFAULT_EVENT_TYPES, CityConfig, load_crime_types, load_event_types, load_run_config,
)
from src.exceptions import ConfigurationError, MissingInputError

from .conftest import write_text


def test_defaults_without_file():
    config = load_run_config()
    assert config.schema_version == 1
    assert config.uses_synthetic_inputs
    assert config.windows.series_years == list(range(2006, 2016))


def test_relative_inputs_resolve_against_config_file(tmp_path):
    path = write_text(tmp_path / "run.yaml", ["schema_version: 1", "inputs:", "  permits: data/permits.csv"])
    config = load_run_config(path)
    assert config.inputs.permits == tmp_path / "data" / "permits.csv"
    assert not config.uses_synthetic_inputs


def test_partial_inputs_are_reported(tmp_path):
    permits = write_text(tmp_path / "permits.csv", ["date,lat,lon,event_type"])
    path = write_text(tmp_path / "run.yaml", ["schema_version: 1", "inputs:", f"  permits: {permits}"])
    with pytest.raises(MissingInputError, match="crimes"):
        load_run_config(path).check_inputs()


def test_flags_override_file(tmp_path):
    path = write_text(tmp_path / "run.yaml", [
        "schema_version: 1", "seed: 5", "analysis:", "  alpha: 0.1", "synth:", "  n_blockgroups: 16", "  seed: 5",
    ])
    config = load_run_config(path).with_overrides(seed=9, alpha=0.01, caliper=0.2, out=str(tmp_path / "o"), jobs=None)
    assert config.seed == 9
    assert config.city_config().seed == 9
    assert config.analysis.alpha == 0.01
    assert config.matching.caliper == 0.2
    assert config.out_dir == tmp_path / "o"


def test_run_seed_seeds_default_city():
    assert load_run_config().with_overrides(seed=123).city_config() == CityConfig(seed=123)


def test_invalid_yaml(tmp_path):
    path = write_text(tmp_path / "run.yaml", ["schema_version: [1"])
    with pytest.raises(ConfigurationError):
        load_run_config(path)


def test_non_mapping_config(tmp_path):
    path = write_text(tmp_path / "run.yaml", ["- 1", "- 2"])
    with pytest.raises(ConfigurationError):
        load_run_config(path)


def test_alpha_out_of_range(tmp_path):
    path = write_text(tmp_path / "run.yaml", ["schema_version: 1", "analysis:", "  alpha: 1.5"])
    with pytest.raises(ConfigurationError):
        load_run_config(path)


def test_event_types_fall_back_to_builtin(tmp_path):
    assert load_event_types(tmp_path / "missing.yaml") == DEFAULT_EVENT_TYPES


def test_unknown_crime_category(tmp_path):
    path = write_text(tmp_path / "crimes.yaml", ["felonies:", "  - Theft"])
    with pytest.raises(ConfigurationError, match="felonies"):
        load_crime_types(path)


def test_shipped_whitelists_match_builtin_defaults():
    assert load_event_types() == DEFAULT_EVENT_TYPES
    assert set(load_crime_types()) == {"violent", "nonviolent", "vice", "other"}
