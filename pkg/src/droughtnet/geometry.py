"""Cell-shape geometry, regional tiling, node placement and node-count
estimation for the five sub-networks inside the 100 km x 100 km map.

Coordinates are planar kilometres; at this scale geodesy would change
nothing the simulation claims.  Each region is a square patch anchored
on the map (defaults: four corners plus the centre), and node cells are
laid out on a regular lattice anchored at the region centroid so the
sink cell sits exactly on it.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from enum import Enum

SQRT3 = math.sqrt(3.0)

MAP_SIZE_KM = 100.0
REGION_SIZE_KM = 12.0

# Region anchors (lower-left corners): four corners + centre of the map.
DEFAULT_ANCHORS_KM: dict[int, tuple[float, float]] = {
    1: (0.0, 0.0),
    2: (88.0, 0.0),
    3: (44.0, 44.0),
    4: (88.0, 88.0),
    5: (0.0, 88.0),
}


class PlanningError(Exception):
    pass


class NonPositiveRange(PlanningError):
    pass


class UntileableShape(PlanningError):
    """Circles cannot tile a region without gaps or overlap."""


class InsufficientNodes(PlanningError):
    pass


class CellShape(Enum):
    CIRCLE = "circle"
    SQUARE = "square"
    EQUILATERAL_TRIANGLE = "triangle"
    HEXAGON = "hexagon"


@dataclass(frozen=True, slots=True)
class GeoPoint:
    x_km: float
    y_km: float

    def distance_to(self, other: "GeoPoint") -> float:
        return math.hypot(self.x_km - other.x_km, self.y_km - other.y_km)


@dataclass(slots=True)
class PlacementPlan:
    """Node layout for one region: sensing positions plus the sink cell."""

    region_id: int
    cell_shape: CellShape
    radio_range_km: float
    node_positions: list[GeoPoint]
    sink_position: GeoPoint

    def all_positions(self) -> list[GeoPoint]:
        return [self.sink_position, *self.node_positions]


@dataclass(slots=True)
class ConnectivityReport:
    connected: bool
    all_reach_sink: bool
    unreachable: list[int]
    edge_count: int


def footprint_area(shape: CellShape, radio_range_km: float) -> float:
    """Exact planar area of one cell.

    The radio range is the circle radius, the hexagon circumradius, or
    the circumradius of the square/triangle inscribed in the radio disc.
    """
    if radio_range_km <= 0:
        raise NonPositiveRange(f"radio_range_km={radio_range_km}")
    r2 = radio_range_km * radio_range_km
    if shape is CellShape.CIRCLE:
        return math.pi * r2
    if shape is CellShape.HEXAGON:
        return 1.5 * SQRT3 * r2
    if shape is CellShape.SQUARE:
        return 2.0 * r2
    if shape is CellShape.EQUILATERAL_TRIANGLE:
        return 0.75 * SQRT3 * r2
    raise ValueError(shape)


def estimate_node_count(region_area_km2: float, shape: CellShape, radio_range_km: float) -> int:
    """Sensing cells needed to cover the region; the caller adds 1 sink.

    ceil(area / footprint) with a small tolerance so exact multiples do
    not round up on float error.
    """
    if region_area_km2 <= 0:
        raise PlanningError(f"region_area_km2={region_area_km2}")
    ratio = region_area_km2 / footprint_area(shape, radio_range_km)
    return max(1, math.ceil(ratio - 1e-9))


def _hex_lattice(cx: float, cy: float, circumradius: float, half: float) -> list[GeoPoint]:
    # pointy-top hexagons: columns sqrt(3)R apart, rows 1.5R, odd rows offset
    w = SQRT3 * circumradius
    row_h = 1.5 * circumradius
    pts = []
    jmax = int(math.floor(half / row_h)) + 1
    imax = int(math.floor(half / w)) + 2
    for j in range(-jmax, jmax + 1):
        y = cy + j * row_h
        off = 0.5 * w if j % 2 else 0.0
        for i in range(-imax, imax + 1):
            pts.append(GeoPoint(cx + i * w + off, y))
    return pts


def _square_lattice(cx: float, cy: float, circumradius: float, half: float) -> list[GeoPoint]:
    s = math.sqrt(2.0) * circumradius
    n = int(math.floor(half / s)) + 1
    return [
        GeoPoint(cx + i * s, cy + j * s)
        for j in range(-n, n + 1)
        for i in range(-n, n + 1)
    ]


def _triangle_lattice(cx: float, cy: float, circumradius: float, half: float) -> list[GeoPoint]:
    # alternating up/down triangles; centroids of the two orientations
    a = SQRT3 * circumradius
    h = 0.5 * SQRT3 * a
    jmax = int(math.floor(half / h)) + 1
    imax = int(math.floor(half / a)) + 2
    pts = []
    for j in range(-jmax, jmax + 1):
        y_up = cy + j * h
        y_dn = y_up + h / 3.0
        for i in range(-imax, imax + 1):
            pts.append(GeoPoint(cx + i * a, y_up))
            pts.append(GeoPoint(cx + (i + 0.5) * a, y_dn))
    return pts


_LATTICES = {
    CellShape.HEXAGON: _hex_lattice,
    CellShape.SQUARE: _square_lattice,
    CellShape.EQUILATERAL_TRIANGLE: _triangle_lattice,
}


def region_anchor(region_id: int, anchors: dict[int, tuple[float, float]] | None = None) -> tuple[float, float]:
    table = anchors if anchors is not None else DEFAULT_ANCHORS_KM
    try:
        return table[region_id]
    except KeyError:
        raise PlanningError(f"unknown region {region_id}") from None


def tile_region(
    region_id: int,
    shape: CellShape,
    radio_range_km: float,
    node_count: int,
    anchor_km: tuple[float, float] | None = None,
    region_size_km: float = REGION_SIZE_KM,
) -> PlacementPlan:
    """Lattice placement of ``node_count`` cells (sink included) in a region.

    The lattice is anchored at the region centroid, which becomes the
    sink cell; sensing cells are the nearest remaining lattice points
    inside the region square.  node_count == 1 is the degenerate
    sink-only plan; otherwise asking for fewer cells than the coverage
    estimate raises InsufficientNodes.
    """
    if radio_range_km <= 0:
        raise NonPositiveRange(f"radio_range_km={radio_range_km}")
    if node_count < 1:
        raise PlanningError(f"node_count={node_count}")
    if shape is CellShape.CIRCLE:
        raise UntileableShape("circles leave gaps or overlap; pick hexagon/square/triangle")

    ax, ay = anchor_km if anchor_km is not None else region_anchor(region_id)
    cx, cy = ax + region_size_km / 2.0, ay + region_size_km / 2.0
    centroid = GeoPoint(cx, cy)

    estimate = estimate_node_count(100.0, shape, radio_range_km)
    if node_count != 1 and node_count < estimate:
        raise InsufficientNodes(
            f"node_count {node_count} below coverage estimate {estimate}"
        )

    half = region_size_km / 2.0
    candidates = [
        p
        for p in _LATTICES[shape](cx, cy, radio_range_km, half)
        if abs(p.x_km - cx) <= half + 1e-9 and abs(p.y_km - cy) <= half + 1e-9
    ]
    candidates.sort(key=lambda p: (round(p.distance_to(centroid), 9), p.y_km, p.x_km))
    if len(candidates) < node_count:
        raise PlanningError(
            f"region square of {region_size_km} km fits only {len(candidates)} "
            f"{shape.value} cells, {node_count} requested"
        )

    sink = candidates[0]
    return PlacementPlan(
        region_id=region_id,
        cell_shape=shape,
        radio_range_km=radio_range_km,
        node_positions=candidates[1:node_count],
        sink_position=sink,
    )


def connectivity_check(plan: PlacementPlan, link_range_km: float | None = None) -> ConnectivityReport:
    """BFS over the unit-disc graph (edge iff distance <= 2 x radio range)."""
    reach = link_range_km if link_range_km is not None else 2.0 * plan.radio_range_km
    pts = plan.all_positions()
    n = len(pts)
    adj: list[list[int]] = [[] for _ in range(n)]
    edges = 0
    for i in range(n):
        for j in range(i + 1, n):
            if pts[i].distance_to(pts[j]) <= reach + 1e-9:
                adj[i].append(j)
                adj[j].append(i)
                edges += 1
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    unreachable = [i for i, s in enumerate(seen) if not s]
    return ConnectivityReport(
        connected=not unreachable,
        all_reach_sink=not unreachable,
        unreachable=unreachable,
        edge_count=edges,
    )


def plan_to_dict(plan: PlacementPlan) -> dict:
    nodes = [
        {"node_index": 0, "x_km": plan.sink_position.x_km, "y_km": plan.sink_position.y_km, "is_sink": True}
    ]
    for i, p in enumerate(plan.node_positions, start=1):
        nodes.append({"node_index": i, "x_km": p.x_km, "y_km": p.y_km, "is_sink": False})
    return {
        "region_id": plan.region_id,
        "shape": plan.cell_shape.value,
        "range_km": plan.radio_range_km,
        "nodes": nodes,
    }


def plans_to_json(plans: list[PlacementPlan]) -> str:
    return json.dumps([plan_to_dict(p) for p in plans], indent=2, sort_keys=True)
