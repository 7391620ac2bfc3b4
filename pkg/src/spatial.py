"""
Planar geometry on lon/lat coordinates: ring areas, even-odd containment and a
uniform grid index for assigning points to block groups.
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .utils import run_ordered

logger = logging.getLogger("vibrancy.spatial")

EARTH_RADIUS_M = 6_371_008.8
_EDGE_TOLERANCE = 1e-12


def ring_signed_area(ring: np.ndarray, lat0: float) -> float:
    """
    Signed area of a closed lon/lat ring in square meters.

    Vertices are projected with an equirectangular projection centred on lat0
    and the shoelace formula is applied; at block-group scale the curvature
    error is negligible.
    """
    k = math.pi / 180.0 * EARTH_RADIUS_M
    x = ring[:, 0] * k * math.cos(math.radians(lat0))
    y = ring[:, 1] * k
    return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))


def polygon_area(polygons: Sequence[Sequence[np.ndarray]]) -> float:
    """
    Area of a (multi)polygon: exterior rings minus their holes, in square meters.

    Args:
        polygons: list of polygons, each a list of rings with the exterior first
    """
    lats = np.concatenate([ring[:, 1] for polygon in polygons for ring in polygon])
    lat0 = float(np.mean(lats))
    total = 0.0
    for polygon in polygons:
        exterior = abs(ring_signed_area(polygon[0], lat0))
        holes = sum(abs(ring_signed_area(hole, lat0)) for hole in polygon[1:])
        total += exterior - holes
    return total


def points_in_rings(rings: Sequence[np.ndarray], x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    Even-odd containment of many points in a set of rings, boundary included.

    Args:
        rings: closed rings as (k, 2) lon/lat arrays
        x, y: point coordinates

    Returns:
        np.ndarray: boolean mask, True where the point is inside or on an edge
    """
    inside = np.zeros(x.shape, dtype=bool)
    on_edge = np.zeros(x.shape, dtype=bool)
    for ring in rings:
        for (x1, y1), (x2, y2) in zip(ring[:-1], ring[1:]):
            straddles = (y1 > y) != (y2 > y)
            if y1 != y2:
                x_cross = (x2 - x1) * (y - y1) / (y2 - y1) + x1
                inside ^= straddles & (x < x_cross)
            cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
            scale = max(abs(x2 - x1), abs(y2 - y1), 1.0)
            on_edge |= (
                (np.abs(cross) <= _EDGE_TOLERANCE * scale)
                & (x >= min(x1, x2)) & (x <= max(x1, x2))
                & (y >= min(y1, y2)) & (y <= max(y1, y2))
            )
    return inside | on_edge


def point_in_rings(rings: Sequence[np.ndarray], x: float, y: float) -> bool:
    """Scalar form of points_in_rings."""
    return bool(points_in_rings(rings, np.array([x]), np.array([y]))[0])


class GridIndex:
    """
    Uniform grid over the bounding box of all polygons.

    The cell size is the median polygon bounding-box width and height, so each
    polygon registers in a handful of cells and each point is tested only
    against the polygons registered in its cell.
    """

    def __init__(self, bboxes: Sequence[Tuple[float, float, float, float]]):
        boxes = np.asarray(bboxes, dtype=float)
        if boxes.size == 0:
            raise ValueError("GridIndex needs at least one bounding box")
        self.min_x = float(boxes[:, 0].min())
        self.min_y = float(boxes[:, 1].min())
        self.max_x = float(boxes[:, 2].max())
        self.max_y = float(boxes[:, 3].max())
        widths = boxes[:, 2] - boxes[:, 0]
        heights = boxes[:, 3] - boxes[:, 1]
        span_x = max(self.max_x - self.min_x, 1e-12)
        span_y = max(self.max_y - self.min_y, 1e-12)
        self.cell_w = float(np.median(widths)) or span_x
        self.cell_h = float(np.median(heights)) or span_y
        self.nx = max(1, int(math.ceil(span_x / self.cell_w)))
        self.ny = max(1, int(math.ceil(span_y / self.cell_h)))

        self.members: List[np.ndarray] = []
        for x0, y0, x1, y1 in boxes:
            ix0, iy0 = self._cell_of(x0, y0)
            ix1, iy1 = self._cell_of(x1, y1)
            cells = [ix * self.ny + iy for ix in range(ix0, ix1 + 1) for iy in range(iy0, iy1 + 1)]
            self.members.append(np.array(cells, dtype=np.int64))

    def _cell_of(self, x: float, y: float) -> Tuple[int, int]:
        ix = min(self.nx - 1, max(0, int((x - self.min_x) // self.cell_w)))
        iy = min(self.ny - 1, max(0, int((y - self.min_y) // self.cell_h)))
        return ix, iy

    def cells_of_points(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Flat cell id per point, -1 for points outside the index bounding box."""
        outside = (x < self.min_x) | (x > self.max_x) | (y < self.min_y) | (y > self.max_y)
        ix = np.clip(((x - self.min_x) // self.cell_w).astype(np.int64), 0, self.nx - 1)
        iy = np.clip(((y - self.min_y) // self.cell_h).astype(np.int64), 0, self.ny - 1)
        cells = ix * self.ny + iy
        cells[outside] = -1
        return cells


def assign_to_polygons(
    ids: Sequence[str],
    rings: Sequence[Sequence[np.ndarray]],
    bboxes: Sequence[Tuple[float, float, float, float]],
    x: np.ndarray,
    y: np.ndarray,
    jobs: int = 1,
) -> List[Optional[str]]:
    """
    Assign every point to the containing polygon with the smallest id.

    Points on a shared boundary are contained by several polygons; the
    lexicographically smallest id wins. Points outside every polygon map to None.
    The result depends on neither the point order nor the worker count.
    """
    n = len(x)
    result: List[Optional[str]] = [None] * n
    if n == 0 or not ids:
        return result

    index = GridIndex(bboxes)
    cells = index.cells_of_points(x, y)
    order = np.argsort(cells, kind="stable")
    sorted_cells = cells[order]

    def containing(k: int) -> np.ndarray:
        members = index.members[k]
        lo = np.searchsorted(sorted_cells, members, side="left")
        hi = np.searchsorted(sorted_cells, members, side="right")
        if not np.any(hi > lo):
            return np.empty(0, dtype=np.int64)
        candidates = np.concatenate([order[a:b] for a, b in zip(lo, hi)])
        candidates = candidates[_in_bbox(bboxes[k], x[candidates], y[candidates])]
        mask = points_in_rings(rings[k], x[candidates], y[candidates])
        return candidates[mask]

    by_id = sorted(range(len(ids)), key=lambda k: ids[k])
    hits = run_ordered(containing, by_id, jobs=jobs)
    # ascending id order: the first polygon to claim a point has the smallest id
    for k, points in zip(by_id, hits):
        for p in points.tolist():
            if result[p] is None:
                result[p] = ids[k]
    return result


def _in_bbox(bbox: Tuple[float, float, float, float], x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x0, y0, x1, y1 = bbox
    return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)


def naive_assign(
    ids: Sequence[str], rings: Sequence[Sequence[np.ndarray]], x: np.ndarray, y: np.ndarray
) -> List[Optional[str]]:
    """All-pairs containment scan; the reference the grid index must agree with."""
    result: List[Optional[str]] = [None] * len(x)
    for k in sorted(range(len(ids)), key=lambda k: ids[k]):
        mask = points_in_rings(rings[k], x, y)
        for p in np.flatnonzero(mask).tolist():
            if result[p] is None:
                result[p] = ids[k]
    return result


def rings_bbox(rings: Sequence[np.ndarray]) -> Tuple[float, float, float, float]:
    stacked = np.concatenate(list(rings))
    return (
        float(stacked[:, 0].min()), float(stacked[:, 1].min()),
        float(stacked[:, 0].max()), float(stacked[:, 1].max()),
    )
