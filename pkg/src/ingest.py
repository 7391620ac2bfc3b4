"""
Input parsing for permits, crimes, block-group polygons and census profiles, and
the point-in-polygon join that assigns events to block groups.
"""
import csv
import json
import logging
import math
from dataclasses import asdict, dataclass
from datetime import date, time
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import geojson
import numpy as np
import pandas as pd

from .config import DEFAULT_CRIME_WINDOW, DEFAULT_PERMIT_WINDOW, LAND_USE_CATEGORIES, RACE_COLUMNS
from .exceptions import (
    DuplicateIdError, GeometryError, ProfileValidationError, RowError, SchemaError,
    UnclosedRingError, UnknownLandUseError,
)
from .spatial import assign_to_polygons, polygon_area, rings_bbox
from .utils import ensure_dir, read_frame_csv, write_frame_csv

logger = logging.getLogger("vibrancy.ingest")

PathLike = Union[str, Path]
Window = Tuple[date, date]

ACS_COLUMNS = (
    "blockgroup_id", "population", *RACE_COLUMNS, "mean_income", "poverty_index",
)
LANDUSE_COLUMNS = ("blockgroup_id", "area_sqm", "category")
LAND_USE_PROPORTIONS = tuple(f"prop_{c}" for c in LAND_USE_CATEGORIES if c != "other")
PROPORTION_TOLERANCE = 1e-6


class EventKind(str, Enum):
    PERMIT = "permit"
    CRIME = "crime"


@dataclass(frozen=True)
class PointEvent:
    """A dated, typed permit or crime record located by coordinates or block-group id."""
    date: date
    raw_type: str
    kind: EventKind
    lat: Optional[float] = None
    lon: Optional[float] = None
    blockgroup_id: Optional[str] = None
    time: Optional[time] = None

    @property
    def has_coordinates(self) -> bool:
        return self.lat is not None and self.lon is not None


@dataclass(frozen=True, eq=False)
class BlockGroup:
    """
    A census block group polygon.

    polygons holds one tuple of closed rings per polygon part, exterior ring
    first; rings flattens them for even-odd containment.
    """
    id: str
    polygons: Tuple[Tuple[np.ndarray, ...], ...]
    area: float

    @property
    def rings(self) -> List[np.ndarray]:
        return [ring for polygon in self.polygons for ring in polygon]

    @property
    def bbox(self) -> Tuple[float, float, float, float]:
        return rings_bbox(self.rings)

    def coordinates(self) -> List[List[List[List[float]]]]:
        """MultiPolygon coordinate arrays for GeoJSON output."""
        return [[ring.tolist() for ring in polygon] for polygon in self.polygons]


@dataclass(frozen=True)
class NeighborhoodProfile:
    blockgroup_id: str
    population: float
    prop_white: float
    prop_black: float
    prop_asian: float
    prop_hispanic: float
    prop_other: float
    mean_income: float
    poverty_index: float
    total_area: float
    prop_commercial: float = 0.0
    prop_residential: float = 0.0
    prop_vacant: float = 0.0
    prop_transportation: float = 0.0
    prop_industrial: float = 0.0
    prop_park: float = 0.0
    prop_civic: float = 0.0


@dataclass
class ParseReport:
    """Row accounting for one parsed file: rows_read == records + skipped."""
    path: str
    rows_read: int = 0
    records: int = 0
    skipped: int = 0

    def to_dict(self) -> Dict[str, Union[str, int]]:
        return asdict(self)


@dataclass(frozen=True)
class AssignedEvent:
    """A permit or crime after the spatial join; the unit persisted in assigned.csv."""
    kind: EventKind
    date: date
    raw_type: str
    blockgroup_id: str
    time: Optional[time] = None


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------

def _open_rows(path: PathLike, required: Iterable[Sequence[str]]) -> Iterator[Tuple[int, Dict[str, str], Sequence[str]]]:
    """
    Yield (line number, row, matched schema) for a CSV file.

    Args:
        path: CSV file
        required: alternative column sets; the first one fully present is used
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"File not found: {path}")
    with open(path, "r", encoding="utf-8-sig", newline="") as f:
        reader = csv.DictReader(f)
        header = [h.strip() for h in (reader.fieldnames or [])]
        reader.fieldnames = header
        schemas = list(required)
        schema = next((s for s in schemas if set(s) <= set(header)), None)
        if schema is None:
            expected = " or ".join(",".join(s) for s in schemas)
            raise SchemaError(f"{path}: header {','.join(header) or '<empty>'} does not match {expected}")
        for row in reader:
            yield reader.line_num, row, schema


def _field(row: Dict[str, str], name: str) -> str:
    value = row.get(name)
    return "" if value is None else value.strip()


def _parse_date(value: str, path: Path, line: int) -> date:
    try:
        return date.fromisoformat(value[:10] if len(value) > 10 and value[10] in "T " else value)
    except ValueError:
        raise RowError(f"{path}: malformed date '{value}'", str(path), line)


def _parse_time(value: str, path: Path, line: int) -> Optional[time]:
    if not value:
        return None
    try:
        return time.fromisoformat(value)
    except ValueError:
        raise RowError(f"{path}: malformed time '{value}'", str(path), line)


def _parse_coordinate(value: str, name: str, bound: float, path: Path, line: int) -> float:
    try:
        number = float(value)
    except ValueError:
        raise RowError(f"{path}: malformed {name} '{value}'", str(path), line)
    if not math.isfinite(number) or abs(number) > bound:
        raise RowError(f"{name} out of range", str(path), line)
    return number


def _parse_location(row: Dict[str, str], path: Path, line: int) -> Tuple[Optional[float], Optional[float], Optional[str]]:
    lat_text, lon_text = _field(row, "lat"), _field(row, "lon")
    bg_text = _field(row, "blockgroup_id")
    has_coords = bool(lat_text or lon_text)
    if has_coords == bool(bg_text):
        raise RowError(f"{path}: row needs exactly one of lat/lon or blockgroup_id", str(path), line)
    if bg_text:
        return None, None, bg_text
    if not (lat_text and lon_text):
        raise RowError(f"{path}: both lat and lon are required", str(path), line)
    lat = _parse_coordinate(lat_text, "latitude", 90.0, path, line)
    lon = _parse_coordinate(lon_text, "longitude", 180.0, path, line)
    return lat, lon, None


def _read_events(
    path: PathLike,
    kind: EventKind,
    schemas: Sequence[Sequence[str]],
    type_column: str,
    window: Window,
) -> Tuple[List[PointEvent], ParseReport]:
    path = Path(path)
    report = ParseReport(path=str(path))
    events: List[PointEvent] = []
    start, end = window
    for line, row, _ in _open_rows(path, schemas):
        report.rows_read += 1
        day = _parse_date(_field(row, "date"), path, line)
        raw_type = _field(row, type_column)
        if not raw_type:
            raise RowError(f"{path}: empty {type_column}", str(path), line)
        lat, lon, bg_id = _parse_location(row, path, line)
        clock = _parse_time(_field(row, "time"), path, line) if "time" in row else None
        if not start <= day <= end:
            report.skipped += 1
            continue
        events.append(PointEvent(
            date=day, raw_type=raw_type, kind=kind, lat=lat, lon=lon,
            blockgroup_id=bg_id, time=clock,
        ))
    report.records = len(events)
    if report.skipped:
        logger.warning(f"{path.name}: skipped {report.skipped} of {report.rows_read} rows outside {start}..{end}")
    logger.info(f"Parsed {report.records} {kind.value} records from {path.name}")
    return events, report


def read_permits(path: PathLike, window: Window = DEFAULT_PERMIT_WINDOW) -> Tuple[List[PointEvent], ParseReport]:
    """Parse permits.csv and return the events together with the row accounting."""
    return _read_events(
        path, EventKind.PERMIT,
        [("date", "lat", "lon", "event_type"), ("date", "blockgroup_id", "event_type")],
        "event_type", window,
    )


def read_crimes(path: PathLike, window: Window = DEFAULT_CRIME_WINDOW) -> Tuple[List[PointEvent], ParseReport]:
    """Parse crimes.csv and return the events together with the row accounting."""
    return _read_events(
        path, EventKind.CRIME,
        [("date", "time", "lat", "lon", "crime_type"), ("date", "time", "blockgroup_id", "crime_type")],
        "crime_type", window,
    )


def parse_permits(path: PathLike, window: Window = DEFAULT_PERMIT_WINDOW) -> List[PointEvent]:
    """
    Parse block party permits, one event per row.

    Consecutive-day permits for the same street are separate events.

    Args:
        path: permits CSV with header date,lat,lon,event_type or date,blockgroup_id,event_type
        window: inclusive study window; rows outside are skipped and counted

    Returns:
        list: PointEvent records of kind PERMIT
    """
    return read_permits(path, window)[0]


def parse_crimes(path: PathLike, window: Window = DEFAULT_CRIME_WINDOW) -> List[PointEvent]:
    """
    Parse reported crimes, one event per row.

    Args:
        path: crimes CSV with header date,time,lat,lon,crime_type
        window: inclusive study window; rows outside are skipped and counted

    Returns:
        list: PointEvent records of kind CRIME
    """
    return read_crimes(path, window)[0]


# ---------------------------------------------------------------------------
# Block groups
# ---------------------------------------------------------------------------

def _closed_ring(coords: Sequence[Sequence[float]], bg_id: str) -> np.ndarray:
    ring = np.asarray([pair[:2] for pair in coords], dtype=float)
    if ring.ndim != 2 or len(ring) < 4:
        raise UnclosedRingError(f"Block group {bg_id}: ring has fewer than 4 vertices")
    if not np.array_equal(ring[0], ring[-1]):
        raise UnclosedRingError(f"Block group {bg_id}: ring is not closed (first vertex != last)")
    return ring


def parse_blockgroups(path: PathLike) -> List[BlockGroup]:
    """
    Parse block-group polygons from a GeoJSON FeatureCollection.

    Args:
        path: FeatureCollection of Polygon/MultiPolygon features with property 'id'

    Returns:
        list: BlockGroup records in file order
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"File not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            collection = geojson.load(f)
    except (json.JSONDecodeError, ValueError) as e:
        raise SchemaError(f"{path}: invalid GeoJSON: {str(e)}")
    if collection.get("type") != "FeatureCollection":
        raise SchemaError(f"{path}: expected a FeatureCollection, got {collection.get('type')}")

    groups: List[BlockGroup] = []
    seen = set()
    for number, feature in enumerate(collection.get("features", []), start=1):
        properties = feature.get("properties") or {}
        raw_id = properties.get("id")
        if raw_id is None or isinstance(raw_id, (bool, float)):
            raise SchemaError(f"{path}: feature {number} has no string 'id' property")
        bg_id = str(raw_id)
        if bg_id in seen:
            raise DuplicateIdError(f"{path}: duplicate block group id '{bg_id}'")
        seen.add(bg_id)

        geometry = feature.get("geometry") or {}
        if geometry.get("type") == "Polygon":
            parts = [geometry["coordinates"]]
        elif geometry.get("type") == "MultiPolygon":
            parts = geometry["coordinates"]
        else:
            raise GeometryError(f"{path}: block group {bg_id} has unsupported geometry {geometry.get('type')}")
        polygons = tuple(tuple(_closed_ring(ring, bg_id) for ring in part) for part in parts if part)
        if not polygons:
            raise GeometryError(f"{path}: block group {bg_id} has empty geometry")

        area = properties.get("area_sqm", properties.get("area"))
        area = float(area) if area is not None else polygon_area(polygons)
        if not area > 0:
            raise GeometryError(f"{path}: block group {bg_id} has non-positive area")
        groups.append(BlockGroup(id=bg_id, polygons=polygons, area=area))

    logger.info(f"Parsed {len(groups)} block groups from {path.name}")
    return groups


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

def _number(row: Dict[str, str], name: str, path: Path, line: int, required: bool = True) -> float:
    text = _field(row, name)
    if not text:
        if required:
            raise RowError(f"{path}: missing value for {name}", str(path), line)
        return float("nan")
    try:
        return float(text)
    except ValueError:
        raise RowError(f"{path}: malformed {name} '{text}'", str(path), line)


def _check_proportion(value: float, name: str, bg_id: str) -> None:
    if not math.isnan(value) and not -PROPORTION_TOLERANCE <= value <= 1 + PROPORTION_TOLERANCE:
        raise ProfileValidationError(f"Block group {bg_id}: {name}={value} outside [0, 1]")


def _read_landuse(path: Path) -> Dict[str, Dict[str, float]]:
    allowed = ", ".join(LAND_USE_CATEGORIES)
    lots: Dict[str, Dict[str, float]] = {}
    for line, row, _ in _open_rows(path, [LANDUSE_COLUMNS]):
        bg_id = _field(row, "blockgroup_id")
        category = _field(row, "category").lower()
        if category not in LAND_USE_CATEGORIES:
            raise UnknownLandUseError(f"{path}: unknown land-use category '{category}' at line {line}; allowed: {allowed}")
        area = _number(row, "area_sqm", path, line)
        if area < 0:
            raise ProfileValidationError(f"{path}: negative area {area} at line {line}")
        by_category = lots.setdefault(bg_id, {})
        by_category[category] = by_category.get(category, 0.0) + area
    return lots


def parse_profiles(
    acs_path: PathLike,
    landuse_path: PathLike,
    blockgroups: Optional[Sequence[BlockGroup]] = None,
) -> List[NeighborhoodProfile]:
    """
    Build neighborhood profiles from census attributes and land-use lots.

    Land-use proportions are category lot area over the total lot area of the
    block group; block groups without lots get zero proportions.

    Args:
        acs_path: census attributes CSV keyed by blockgroup_id
        landuse_path: lot CSV with blockgroup_id,area_sqm,category
        blockgroups: when given, total_area is the polygon area instead of the lot total

    Returns:
        list: profiles sorted by blockgroup_id
    """
    acs_path, landuse_path = Path(acs_path), Path(landuse_path)
    lots = _read_landuse(landuse_path)
    polygon_areas = {bg.id: bg.area for bg in blockgroups} if blockgroups is not None else None

    profiles: Dict[str, NeighborhoodProfile] = {}
    for line, row, _ in _open_rows(acs_path, [ACS_COLUMNS]):
        bg_id = _field(row, "blockgroup_id")
        if not bg_id:
            raise RowError(f"{acs_path}: empty blockgroup_id", str(acs_path), line)
        if bg_id in profiles:
            raise ProfileValidationError(f"{acs_path}: duplicate blockgroup_id '{bg_id}' at line {line}")

        population = _number(row, "population", acs_path, line)
        if population < 0:
            raise ProfileValidationError(f"Block group {bg_id}: negative population")
        race = {name: _number(row, name, acs_path, line) for name in RACE_COLUMNS}
        for name, value in race.items():
            _check_proportion(value, name, bg_id)
        race_sum = sum(race.values())
        # unpopulated block groups may carry all-zero race shares
        if not (population == 0 and race_sum == 0) and abs(race_sum - 1.0) > PROPORTION_TOLERANCE:
            raise ProfileValidationError(f"Block group {bg_id}: race proportions sum to {race_sum:.6f}, expected 1")
        income = _number(row, "mean_income", acs_path, line, required=False)
        if not math.isnan(income) and income <= 0:
            raise ProfileValidationError(f"Block group {bg_id}: mean_income must be positive")
        poverty = _number(row, "poverty_index", acs_path, line, required=False)
        _check_proportion(poverty, "poverty_index", bg_id)

        by_category = lots.get(bg_id, {})
        lot_total = sum(by_category.values())
        shares = {
            f"prop_{c}": (by_category.get(c, 0.0) / lot_total if lot_total > 0 else 0.0)
            for c in LAND_USE_CATEGORIES if c != "other"
        }
        if sum(shares.values()) > 1 + PROPORTION_TOLERANCE:
            raise ProfileValidationError(f"Block group {bg_id}: land-use proportions exceed 1")

        if polygon_areas is not None:
            total_area = polygon_areas.get(bg_id, float("nan"))
        else:
            total_area = lot_total
        profiles[bg_id] = NeighborhoodProfile(
            blockgroup_id=bg_id, population=population, **race,
            mean_income=income, poverty_index=poverty, total_area=total_area, **shares,
        )

    orphans = sorted(set(lots) - set(profiles))
    if orphans:
        logger.warning(f"{landuse_path.name}: {len(orphans)} block groups have lots but no census row")
    logger.info(f"Parsed {len(profiles)} neighborhood profiles")
    return [profiles[k] for k in sorted(profiles)]


def profiles_frame(profiles: Sequence[NeighborhoodProfile]) -> pd.DataFrame:
    """Profiles as a DataFrame indexed by blockgroup_id, sorted by id."""
    frame = pd.DataFrame([asdict(p) for p in profiles])
    if frame.empty:
        frame = pd.DataFrame(columns=[f for f in NeighborhoodProfile.__dataclass_fields__])
    return frame.set_index("blockgroup_id").sort_index()


# ---------------------------------------------------------------------------
# Spatial join
# ---------------------------------------------------------------------------

def assign_points(
    events: Sequence[PointEvent], bgs: Sequence[BlockGroup], jobs: int = 1
) -> List[Optional[str]]:
    """
    Assign each event to the block group containing it.

    Events that already carry a blockgroup_id keep it when the id is known.
    Boundary points go to the containing block group with the smallest id;
    points outside every polygon get None.

    Args:
        events: parsed events
        bgs: block groups
        jobs: worker threads for the containment tests

    Returns:
        list: block-group id or None, aligned with events
    """
    known = {bg.id for bg in bgs}
    result: List[Optional[str]] = [None] * len(events)
    located = [k for k, e in enumerate(events) if e.has_coordinates]
    for k, event in enumerate(events):
        if not event.has_coordinates and event.blockgroup_id in known:
            result[k] = event.blockgroup_id

    if located and bgs:
        x = np.array([events[k].lon for k in located], dtype=float)
        y = np.array([events[k].lat for k in located], dtype=float)
        hits = assign_to_polygons(
            [bg.id for bg in bgs], [bg.rings for bg in bgs], [bg.bbox for bg in bgs], x, y, jobs=jobs,
        )
        for k, bg_id in zip(located, hits):
            result[k] = bg_id
    return result


def assign_events(
    events: Sequence[PointEvent], bgs: Sequence[BlockGroup], jobs: int = 1
) -> Tuple[List[AssignedEvent], int]:
    """
    Run the spatial join and keep only events that landed in a block group.

    Returns:
        tuple: (assigned events in input order, number of unassigned events)
    """
    assigned: List[AssignedEvent] = []
    for event, bg_id in zip(events, assign_points(events, bgs, jobs=jobs)):
        if bg_id is None:
            continue
        assigned.append(AssignedEvent(
            kind=event.kind, date=event.date, raw_type=event.raw_type, blockgroup_id=bg_id, time=event.time,
        ))
    unassigned = len(events) - len(assigned)
    if unassigned:
        logger.warning(f"{unassigned} of {len(events)} events fell outside every block group")
    return assigned, unassigned


ASSIGNED_COLUMNS = ["kind", "date", "time", "blockgroup_id", "raw_type"]


def assigned_frame(assigned: Iterable[AssignedEvent]) -> pd.DataFrame:
    """Assigned events as a frame in a canonical order (kind, id, date, time, type)."""
    rows = [
        {
            "kind": a.kind.value,
            "date": a.date.isoformat(),
            "time": a.time.isoformat() if a.time else "",
            "blockgroup_id": a.blockgroup_id,
            "raw_type": a.raw_type,
        }
        for a in assigned
    ]
    frame = pd.DataFrame(rows, columns=ASSIGNED_COLUMNS)
    return frame.sort_values(ASSIGNED_COLUMNS, kind="mergesort").reset_index(drop=True)


def write_assigned(assigned: Iterable[AssignedEvent], path: PathLike) -> Path:
    return write_frame_csv(assigned_frame(assigned), path)


def load_assigned(path: PathLike) -> List[AssignedEvent]:
    """Read assigned.csv back into AssignedEvent records."""
    frame = read_frame_csv(path, keep_default_na=False, dtype=str)
    missing = set(ASSIGNED_COLUMNS) - set(frame.columns)
    if missing:
        raise SchemaError(f"{path}: missing columns {', '.join(sorted(missing))}")
    return [
        AssignedEvent(
            kind=EventKind(row.kind),
            date=date.fromisoformat(row.date),
            raw_type=row.raw_type,
            blockgroup_id=row.blockgroup_id,
            time=time.fromisoformat(row.time) if row.time else None,
        )
        for row in frame.itertuples(index=False)
    ]


def write_profiles(profiles: Sequence[NeighborhoodProfile], path: PathLike) -> Path:
    return write_frame_csv(profiles_frame(profiles), path, index=True)


def load_profiles(path: PathLike) -> pd.DataFrame:
    """Read profiles.csv as a frame indexed by blockgroup_id."""
    frame = read_frame_csv(path)
    if "blockgroup_id" not in frame.columns:
        raise SchemaError(f"{path}: missing blockgroup_id column")
    return frame.set_index("blockgroup_id").sort_index()


def write_blockgroups(
    blockgroups: Sequence[BlockGroup], path: PathLike, properties: Optional[Dict[str, Dict[str, Any]]] = None,
) -> Path:
    """Write block groups as a GeoJSON FeatureCollection, optionally with extra properties per id."""
    features = []
    for bg in blockgroups:
        coords = bg.coordinates()
        geometry = geojson.Polygon(coords[0]) if len(coords) == 1 else geojson.MultiPolygon(coords)
        props = {"id": bg.id}
        if properties is not None:
            props.update(properties.get(bg.id, {}))
        features.append(geojson.Feature(geometry=geometry, properties=props))
    path = Path(path)
    ensure_dir(path.parent)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        geojson.dump(geojson.FeatureCollection(features), f, sort_keys=True)
        f.write("\n")
    return path

