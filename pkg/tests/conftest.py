import json
import os
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
import pytest

from src.config import CityConfig
from src.ingest import BlockGroup
from src.spatial import polygon_area


def square_ring(x0: float, y0: float, size: float = 1.0) -> np.ndarray:
    return np.array([[x0, y0], [x0 + size, y0], [x0 + size, y0 + size], [x0, y0 + size], [x0, y0]], dtype=float)


def grid_blockgroups(rows: int = 5, cols: int = 5, size: float = 1.0, x0: float = 0.0, y0: float = 0.0) -> List[BlockGroup]:
    groups = []
    for r in range(rows):
        for c in range(cols):
            ring = square_ring(x0 + c * size, y0 + r * size, size)
            groups.append(BlockGroup(id=f"G{r:02d}{c:02d}", polygons=((ring,),), area=polygon_area([[ring]])))
    return groups


def write_text(path: Path, lines: Sequence[str]) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def feature(bg_id, coordinates, kind: str = "Polygon", **properties) -> Dict:
    return {
        "type": "Feature",
        "properties": {"id": bg_id, **properties},
        "geometry": {"type": kind, "coordinates": coordinates},
    }


def write_geojson(path: Path, features: List[Dict]) -> Path:
    path.write_text(json.dumps({"type": "FeatureCollection", "features": features}), encoding="utf-8")
    return path


def unit_square(x0: float = 0.0, y0: float = 0.0) -> List[List[List[float]]]:
    return [square_ring(x0, y0).tolist()]


@pytest.fixture
def grid25() -> List[BlockGroup]:
    return grid_blockgroups(5, 5)


@pytest.fixture
def small_city_config() -> CityConfig:
    return CityConfig(n_blockgroups=36, seed=7, event_intercept=3.0, crime_intercept=4.0)


@pytest.fixture
def acs_landuse(tmp_path):
    """Census and lot files for two block groups, A with lots and B without."""
    acs = write_text(tmp_path / "acs.csv", [
        "blockgroup_id,population,prop_white,prop_black,prop_asian,prop_hispanic,prop_other,mean_income,poverty_index",
        "A,1200,0.5,0.3,0.1,0.05,0.05,22026.47,0.4",
        "B,800,0.2,0.6,0.0,0.2,0.0,35000,0.7",
    ])
    landuse = write_text(tmp_path / "landuse.csv", [
        "blockgroup_id,area_sqm,category",
        "A,30,commercial",
        "A,70,residential",
    ])
    return acs, landuse


def real_data_dir():
    """Directory of the real city inputs, or None when they are not available."""
    value = os.getenv("VIBRANCY_REAL_DATA")
    return Path(value) if value else None
