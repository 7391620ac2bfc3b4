"""
Synthetic cities with known ground truth for checking every estimator.

A city is a square grid of block groups with drawn covariates, a treatment
indicator that depends on the covariates, permit and crime counts from
log-linear intensity models, and planted per-unit yearly trends.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np
import pandas as pd
from numpy.random import PCG64, Generator, SeedSequence
from scipy.special import expit

from .config import DEFAULT_EVENT_TYPES, LAND_USE_CATEGORIES, RACE_COLUMNS, CityConfig
from .ingest import BlockGroup, NeighborhoodProfile, profiles_frame, write_blockgroups
from .spatial import polygon_area
from .utils import ensure_dir, write_frame_csv, write_json

logger = logging.getLogger("vibrancy.synth")

POINT_MARGIN_DEG = 1e-6
WARM_MONTHS = (5, 6, 7, 8, 9)
CRIME_CATEGORY_SHARES = {"violent": 0.15, "nonviolent": 0.45, "vice": 0.10, "other": 0.30}
REGULAR_SUBCATEGORY_SHARES = {"public_holiday": 0.8, "religious": 0.2}
SPONTANEOUS_SUBCATEGORY_SHARES = {"community": 0.3, "personal": 0.7}
LOT_COVERAGE = 0.8

CRIME_LABELS = {
    "violent": ["Aggravated Assault", "Robbery", "Homicide", "Rape"],
    "nonviolent": ["Burglary", "Theft", "Motor Vehicle Theft"],
    "vice": ["Drug Violation", "Gambling", "Prostitution"],
    "other": ["Vandalism", "Fraud", "Disorderly Conduct"],
}


@dataclass
class GroundTruth:
    """Everything the generator decided, written as truth.json."""
    seed: int
    treatment_effect: float
    event_coefs: Dict[str, float]
    crime_coefs: Dict[str, float]
    treatment_coefs: Dict[str, float]
    treated: List[str]
    expected_crimes: Dict[str, float]
    expected_events: Dict[str, float]
    crime_trend_slopes: Dict[str, float] = field(default_factory=dict)
    permit_trend_slopes: Dict[str, float] = field(default_factory=dict)
    spontaneity_trend_slopes: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class SyntheticCity:
    """
    An in-memory draw.

    crime_counts has shape (units, years, 4) in CRIME_CATEGORY_SHARES order;
    permit_counts has shape (units, years, 12, 4) by month and event
    sub-category (public_holiday, religious, community, personal).
    """
    config: CityConfig
    ids: List[str]
    blockgroups: List[BlockGroup]
    profiles: List[NeighborhoodProfile]
    lots: pd.DataFrame
    treated: np.ndarray
    crime_counts: np.ndarray
    permit_counts: np.ndarray
    truth: GroundTruth

    @property
    def years(self) -> List[int]:
        return self.config.years

    def profile_frame(self) -> pd.DataFrame:
        return profiles_frame(self.profiles)

    def crime_totals(self) -> pd.Series:
        return pd.Series(self.crime_counts.sum(axis=(1, 2)), index=self.ids, name="crime_total")

    def permit_totals(self) -> pd.Series:
        return pd.Series(self.permit_counts.sum(axis=(1, 2, 3)), index=self.ids, name="n_events")

    def treatment_labels(self) -> Dict[str, bool]:
        return {bg: bool(t) for bg, t in zip(self.ids, self.treated)}

    def yearly_frame(self) -> pd.DataFrame:
        """Per block group and year counts in the layout of the measures series."""
        events = self.permit_counts.sum(axis=2)
        crimes = self.crime_counts
        frame = pd.DataFrame({
            "blockgroup_id": np.repeat(self.ids, len(self.years)),
            "year": np.tile(self.years, len(self.ids)),
            "events": events.sum(axis=2).ravel(),
            "spontaneous": events[:, :, 2:].sum(axis=2).ravel(),
            "regular": events[:, :, :2].sum(axis=2).ravel(),
            "crime_total": crimes.sum(axis=2).ravel(),
            "crime_violent": crimes[:, :, 0].ravel(),
            "crime_nonviolent": crimes[:, :, 1].ravel(),
            "crime_vice": crimes[:, :, 2].ravel(),
        })
        return frame


class CityGenerator:
    """Draws one synthetic city from a CityConfig; the seed fixes every draw."""

    def __init__(self, config: CityConfig):
        self.config = config
        streams = SeedSequence(config.seed).spawn(3)
        self.rng = Generator(PCG64(streams[0]))
        self.permit_rng = Generator(PCG64(streams[1]))
        self.crime_rng = Generator(PCG64(streams[2]))
        self.n = config.n_blockgroups
        self.cols = config.grid_cols or int(math.ceil(math.sqrt(self.n)))
        self.ids = [f"BG{k:05d}" for k in range(self.n)]
        self.n_years = len(config.years)
        self.center_year = (config.first_year + config.last_year) / 2.0

    # -- geometry ----------------------------------------------------------

    def cell_bounds(self, k: int) -> Tuple[float, float, float, float]:
        row, col = divmod(k, self.cols)
        size = self.config.cell_size_deg
        x0 = round(self.config.origin_lon + col * size, 6)
        y0 = round(self.config.origin_lat + row * size, 6)
        return x0, y0, round(x0 + size, 6), round(y0 + size, 6)

    def _blockgroups(self) -> List[BlockGroup]:
        groups = []
        for k, bg_id in enumerate(self.ids):
            x0, y0, x1, y1 = self.cell_bounds(k)
            ring = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]])
            groups.append(BlockGroup(id=bg_id, polygons=((ring,),), area=polygon_area([[ring]])))
        return groups

    # -- covariates --------------------------------------------------------

    def _covariates(self, areas: np.ndarray) -> Tuple[List[NeighborhoodProfile], pd.DataFrame, Dict[str, np.ndarray]]:
        cfg, rng, n = self.config, self.rng, self.n
        log_income = rng.normal(cfg.income_log_mean, cfg.income_log_sd, n)
        log_population = rng.normal(cfg.population_log_mean, cfg.population_log_sd, n)
        race = rng.dirichlet(cfg.race_alpha, n)
        landuse = rng.dirichlet(cfg.landuse_alpha, n)
        income_z = (log_income - cfg.income_log_mean) / cfg.income_log_sd
        # 0 = poorest, 1 = wealthiest
        poverty = expit(income_z + rng.normal(0.0, 0.5, n))
        population = np.rint(np.exp(log_population))

        profiles = []
        lot_rows = []
        for k, bg_id in enumerate(self.ids):
            shares = dict(zip(LAND_USE_CATEGORIES, landuse[k]))
            profiles.append(NeighborhoodProfile(
                blockgroup_id=bg_id, population=float(population[k]),
                **dict(zip(RACE_COLUMNS, race[k].tolist())),
                mean_income=float(np.exp(log_income[k])), poverty_index=float(poverty[k]),
                total_area=float(areas[k]),
                **{f"prop_{c}": float(v) for c, v in shares.items() if c != "other"},
            ))
            lot_total = LOT_COVERAGE * areas[k]
            for category, share in shares.items():
                lot_rows.append((bg_id, share * lot_total, category))
        lots = pd.DataFrame(lot_rows, columns=["blockgroup_id", "area_sqm", "category"])

        raw = {
            "income": log_income,
            "population": np.log(np.maximum(population, 1.0)),
            "poverty": poverty,
            "black": race[:, 1],
            "hispanic": race[:, 3],
            "commercial": landuse[:, 0],
            "residential": landuse[:, 1],
            "vacant": landuse[:, 2],
            "park": landuse[:, 5],
        }
        standardized = {k: (v - v.mean()) / v.std() for k, v in raw.items()}
        return profiles, lots, standardized

    @staticmethod
    def _linear(intercept: float, coefs: Dict[str, float], z: Dict[str, np.ndarray], n: int) -> np.ndarray:
        eta = np.full(n, intercept, dtype=float)
        for name, coef in sorted(coefs.items()):
            eta += coef * z[name]
        return eta

    def _planted_slopes(self, fraction: float, magnitude: float) -> np.ndarray:
        """Slope per unit: +-magnitude for a random fraction of units, 0 elsewhere."""
        planted = self.rng.random(self.n) < fraction
        signs = np.where(self.rng.random(self.n) < 0.5, 1.0, -1.0)
        return np.where(planted, signs * magnitude, 0.0)

    def _counts(self, means: np.ndarray) -> np.ndarray:
        cfg = self.config
        if cfg.noise_family == "negbin":
            means = means * self.rng.gamma(cfg.noise_theta, 1.0 / cfg.noise_theta, means.shape)
        return self.rng.poisson(means)

    # -- draw --------------------------------------------------------------

    def draw(self) -> SyntheticCity:
        cfg, rng, n = self.config, self.rng, self.n
        blockgroups = self._blockgroups()
        profiles, lots, z = self._covariates(np.array([bg.area for bg in blockgroups]))

        treated = rng.random(n) < expit(self._linear(cfg.treatment_intercept, cfg.treatment_coefs, z, n))
        offsets = np.array(cfg.years, dtype=float) - self.center_year

        crime_slopes = self._planted_slopes(cfg.crime_trend_fraction, cfg.crime_trend_slope)
        crime_log_mean = (
            self._linear(cfg.crime_intercept, cfg.crime_coefs, z, n)
            + cfg.treatment_effect * treated
            + rng.normal(0.0, cfg.unit_noise_sd, n)
        )
        yearly_crime = np.exp(crime_log_mean[:, None] - math.log(self.n_years) + crime_slopes[:, None] * offsets[None, :])
        shares = np.array(list(CRIME_CATEGORY_SHARES.values()))
        crime_counts = self._counts(yearly_crime[:, :, None] * shares[None, None, :])

        permit_slopes = self._planted_slopes(cfg.permit_trend_fraction, cfg.permit_trend_slope)
        event_log_mean = (
            self._linear(cfg.event_intercept, cfg.event_coefs, z, n) + rng.normal(0.0, cfg.unit_noise_sd, n)
        )
        month_weights = np.array([cfg.warm_month_multiplier if m in WARM_MONTHS else 1.0 for m in range(1, 13)])
        month_weights = month_weights / month_weights.sum()
        yearly_events = np.exp(event_log_mean[:, None] - math.log(self.n_years) + permit_slopes[:, None] * offsets[None, :])

        spontaneity_slopes = self._planted_slopes(cfg.spontaneity_trend_fraction, cfg.spontaneity_trend_slope)
        p_spontaneous = expit(
            self._linear(cfg.spontaneity_intercept, cfg.spontaneity_coefs, z, n)[:, None]
            + spontaneity_slopes[:, None] * offsets[None, :]
        )
        sub_shares = np.stack([
            (1 - p_spontaneous) * REGULAR_SUBCATEGORY_SHARES["public_holiday"],
            (1 - p_spontaneous) * REGULAR_SUBCATEGORY_SHARES["religious"],
            p_spontaneous * SPONTANEOUS_SUBCATEGORY_SHARES["community"],
            p_spontaneous * SPONTANEOUS_SUBCATEGORY_SHARES["personal"],
        ], axis=-1)
        permit_means = (
            yearly_events[:, :, None, None] * month_weights[None, None, :, None] * sub_shares[:, :, None, :]
        )
        permit_counts = self._counts(permit_means)

        truth = GroundTruth(
            seed=cfg.seed,
            treatment_effect=cfg.treatment_effect,
            event_coefs=dict(cfg.event_coefs),
            crime_coefs=dict(cfg.crime_coefs),
            treatment_coefs=dict(cfg.treatment_coefs),
            treated=[bg for bg, t in zip(self.ids, treated) if t],
            expected_crimes=dict(zip(self.ids, yearly_crime.sum(axis=1).tolist())),
            expected_events=dict(zip(self.ids, yearly_events.sum(axis=1).tolist())),
            crime_trend_slopes={bg: float(s) for bg, s in zip(self.ids, crime_slopes) if s},
            permit_trend_slopes={bg: float(s) for bg, s in zip(self.ids, permit_slopes) if s},
            spontaneity_trend_slopes={bg: float(s) for bg, s in zip(self.ids, spontaneity_slopes) if s},
        )
        logger.info(
            f"Drew a city of {n} block groups: {int(crime_counts.sum())} crimes, "
            f"{int(permit_counts.sum())} permits, {int(treated.sum())} treated"
        )
        return SyntheticCity(
            config=cfg, ids=self.ids, blockgroups=blockgroups, profiles=profiles, lots=lots,
            treated=treated, crime_counts=crime_counts, permit_counts=permit_counts, truth=truth,
        )

    # -- point events ------------------------------------------------------

    def _points(self, rng: Generator, units: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        bounds = np.array([self.cell_bounds(int(k)) for k in range(self.n)])[units]
        span_x = bounds[:, 2] - bounds[:, 0] - 2 * POINT_MARGIN_DEG
        span_y = bounds[:, 3] - bounds[:, 1] - 2 * POINT_MARGIN_DEG
        lon = bounds[:, 0] + POINT_MARGIN_DEG + rng.random(len(units)) * span_x
        lat = bounds[:, 1] + POINT_MARGIN_DEG + rng.random(len(units)) * span_y
        return lat, lon

    def crime_events(self, city: SyntheticCity) -> pd.DataFrame:
        """One row per crime: date, time, lat, lon, crime_type."""
        rng = self.crime_rng
        unit, year_idx, category = np.nonzero(city.crime_counts)
        repeats = city.crime_counts[unit, year_idx, category]
        unit, year_idx, category = (np.repeat(a, repeats) for a in (unit, year_idx, category))
        years = np.array(city.years)[year_idx]
        starts = np.array([date(int(y), 1, 1).toordinal() for y in years])
        lengths = np.array([366 if _leap(int(y)) else 365 for y in years])
        days = starts + (rng.random(len(years)) * lengths).astype(int)
        minutes = rng.integers(0, 24 * 60, len(years))
        names = list(CRIME_CATEGORY_SHARES)
        labels = [
            CRIME_LABELS[names[c]][j % len(CRIME_LABELS[names[c]])]
            for c, j in zip(category, rng.integers(0, 1 << 30, len(category)))
        ]
        lat, lon = self._points(rng, unit)
        frame = pd.DataFrame({
            "date": [date.fromordinal(int(d)).isoformat() for d in days],
            "time": [f"{m // 60:02d}:{m % 60:02d}" for m in minutes],
            "lat": [f"{v:.7f}" for v in lat],
            "lon": [f"{v:.7f}" for v in lon],
            "crime_type": labels,
        })
        return frame.sort_values(["date", "time", "lat", "lon"], kind="mergesort").reset_index(drop=True)

    def permit_events(self, city: SyntheticCity) -> pd.DataFrame:
        """One row per permit: date, lat, lon, event_type."""
        rng = self.permit_rng
        unit, year_idx, month_idx, sub = np.nonzero(city.permit_counts)
        repeats = city.permit_counts[unit, year_idx, month_idx, sub]
        unit, year_idx, month_idx, sub = (np.repeat(a, repeats) for a in (unit, year_idx, month_idx, sub))
        years = np.array(city.years)[year_idx]
        months = month_idx + 1
        lengths = np.array([_month_length(int(y), int(m)) for y, m in zip(years, months)])
        day_of_month = 1 + (rng.random(len(years)) * lengths).astype(int)
        labels_by_sub = [
            DEFAULT_EVENT_TYPES["regular"]["public_holiday"],
            DEFAULT_EVENT_TYPES["regular"]["religious"],
            DEFAULT_EVENT_TYPES["spontaneous"]["community"],
            DEFAULT_EVENT_TYPES["spontaneous"]["personal"],
        ]
        picks = rng.integers(0, 1 << 30, len(sub))
        labels = [labels_by_sub[s][j % len(labels_by_sub[s])] for s, j in zip(sub, picks)]
        lat, lon = self._points(rng, unit)
        frame = pd.DataFrame({
            "date": [date(int(y), int(m), int(d)).isoformat() for y, m, d in zip(years, months, day_of_month)],
            "lat": [f"{v:.7f}" for v in lat],
            "lon": [f"{v:.7f}" for v in lon],
            "event_type": labels,
        })
        return frame.sort_values(["date", "lat", "lon"], kind="mergesort").reset_index(drop=True)


def _leap(year: int) -> bool:
    return year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)


def _month_length(year: int, month: int) -> int:
    following = date(year + (month == 12), month % 12 + 1, 1)
    return (following - timedelta(days=1)).day


def draw_city(config: CityConfig) -> SyntheticCity:
    """
    Draw covariates, treatment and per unit/year counts without writing files.

    Args:
        config: generator parameters

    Returns:
        SyntheticCity: the draw and its GroundTruth
    """
    return CityGenerator(config).draw()


def _acs_frame(profiles: List[NeighborhoodProfile]) -> pd.DataFrame:
    frame = profiles_frame(profiles).reset_index()
    return frame[["blockgroup_id", "population", *RACE_COLUMNS, "mean_income", "poverty_index"]]


def generate_city(config: CityConfig, out_dir: Union[str, Path]) -> Tuple[SyntheticCity, Dict[str, Path]]:
    """
    Draw a city and write its input bundle.

    Writes blockgroups.geojson, permits.csv, crimes.csv, acs.csv, landuse.csv
    and truth.json into out_dir. The same seed gives byte-identical files.

    Returns:
        tuple: (SyntheticCity, name -> written path)
    """
    out_dir = ensure_dir(out_dir)
    generator = CityGenerator(config)
    city = generator.draw()
    paths = {
        "blockgroups": write_blockgroups(city.blockgroups, out_dir / "blockgroups.geojson"),
        "permits": write_frame_csv(generator.permit_events(city), out_dir / "permits.csv"),
        "crimes": write_frame_csv(generator.crime_events(city), out_dir / "crimes.csv"),
        "acs": write_frame_csv(_acs_frame(city.profiles), out_dir / "acs.csv"),
        "landuse": write_frame_csv(city.lots, out_dir / "landuse.csv"),
        "truth": write_json(city.truth.to_dict(), out_dir / "truth.json"),
    }
    logger.info(f"Wrote synthetic city bundle to {out_dir}")
    return city, paths
