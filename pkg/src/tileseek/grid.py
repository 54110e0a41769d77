"""Global equal-angle grid of ~10x10 km cells with deterministic subsampling.

The sphere is split into latitude bands of equal angular height; each band is
split into slices whose count keeps cells roughly square at the band midpoint.
Row 0 is the band whose south edge sits on the equator (even row totals) or the
band centered on the equator (odd totals). All intervals are half-open toward
the north/east so every point belongs to exactly one cell.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Tuple

from .errors import CellIdError

_CELL_ID_RE = re.compile(r"^R(-?\d+)C(\d+)$")


def round_half_away(x: float) -> float:
    """Round with halves going away from zero; the one rounding rule used here."""
    return math.floor(x + 0.5) if x >= 0 else math.ceil(x - 0.5)


@dataclass(frozen=True)
class GridSpec:
    """Parameters fixing the grid geometry and the kept subsample."""

    cell_size_km: float = 10.0
    earth_radius_km: float = 6378.137
    subsample_stride: int = 3
    subsample_anchor: Tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.cell_size_km <= 0:
            raise ValueError(f"cell_size_km must be positive, got {self.cell_size_km}")
        if self.earth_radius_km <= 0:
            raise ValueError(f"earth_radius_km must be positive, got {self.earth_radius_km}")
        if self.subsample_stride < 1:
            raise ValueError(f"subsample_stride must be >= 1, got {self.subsample_stride}")
        r_off, c_off = self.subsample_anchor
        if not (0 <= r_off < self.subsample_stride and 0 <= c_off < self.subsample_stride):
            raise ValueError(
                f"subsample_anchor {self.subsample_anchor} outside [0, {self.subsample_stride})"
            )

    def to_dict(self) -> dict:
        return {
            "cell_size_km": self.cell_size_km,
            "earth_radius_km": self.earth_radius_km,
            "subsample_stride": self.subsample_stride,
            "subsample_anchor": list(self.subsample_anchor),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(
            cell_size_km=float(d["cell_size_km"]),
            earth_radius_km=float(d["earth_radius_km"]),
            subsample_stride=int(d["subsample_stride"]),
            subsample_anchor=tuple(d["subsample_anchor"]),
        )


@dataclass(frozen=True)
class GridCell:
    """Discrete grid address: row counted northward, col eastward from -180."""

    row: int
    col: int


@dataclass(frozen=True)
class GeoPoint:
    """Latitude/longitude in degrees; lon normalized into [-180, 180)."""

    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"lat {self.lat} outside [-90, 90]")
        if not math.isfinite(self.lon):
            raise ValueError(f"lon {self.lon} is not finite")
        lon = math.fmod(self.lon + 180.0, 360.0)
        if lon < 0:
            lon += 360.0
        object.__setattr__(self, "lon", lon - 180.0)


def rows_total(spec: GridSpec) -> int:
    """Number of latitude bands: ceil of meridian half-circumference / cell size."""
    return math.ceil(math.pi * spec.earth_radius_km / spec.cell_size_km)


def row_min(spec: GridSpec) -> int:
    return -(rows_total(spec) // 2)


def row_max(spec: GridSpec) -> int:
    n = rows_total(spec)
    return n - 1 - n // 2


def band_height_deg(spec: GridSpec) -> float:
    return 180.0 / rows_total(spec)


def row_south_lat(spec: GridSpec, row: int) -> float:
    """Latitude of the row's south edge; row bands are [south, south + height)."""
    _check_row(spec, row)
    return -90.0 + (row + rows_total(spec) // 2) * band_height_deg(spec)


def _check_row(spec: GridSpec, row: int) -> None:
    if not row_min(spec) <= row <= row_max(spec):
        raise CellIdError(f"row {row} outside [{row_min(spec)}, {row_max(spec)}]")


def cols_in_row(spec: GridSpec, row: int) -> int:
    """Column slices in a band, sized for ~square cells at the band midpoint."""
    _check_row(spec, row)
    phi_mid = row_south_lat(spec, row) + band_height_deg(spec) / 2.0
    circumference = 2.0 * math.pi * spec.earth_radius_km * math.cos(math.radians(phi_mid))
    return max(1, int(round_half_away(circumference / spec.cell_size_km)))


def check_cell(spec: GridSpec, cell: GridCell) -> GridCell:
    _check_row(spec, cell.row)
    n = cols_in_row(spec, cell.row)
    if not 0 <= cell.col < n:
        raise CellIdError(f"col {cell.col} outside [0, {n}) for row {cell.row}")
    return cell


def cell_of(spec: GridSpec, p: GeoPoint) -> GridCell:
    """Cell containing the point; boundary points belong north/east.

    After the closed-form row/col guess, ownership is corrected against the
    same edge expressions cell_bounds uses, so points sitting exactly on an
    edge (to the last ulp) land in the north/east cell consistently.
    """
    height = band_height_deg(spec)
    row = math.floor((p.lat + 90.0) / height) - rows_total(spec) // 2
    row = min(max(row, row_min(spec)), row_max(spec))  # lat exactly +90 folds into the top band
    while row < row_max(spec) and p.lat >= row_south_lat(spec, row + 1):
        row += 1
    while row > row_min(spec) and p.lat < row_south_lat(spec, row):
        row -= 1
    n = cols_in_row(spec, row)
    width = 360.0 / n
    col = math.floor((p.lon + 180.0) / width)
    col = min(max(col, 0), n - 1)
    while col < n - 1 and p.lon >= -180.0 + (col + 1) * width:
        col += 1
    while col > 0 and p.lon < -180.0 + col * width:
        col -= 1
    return GridCell(row, col)


def cell_center(spec: GridSpec, c: GridCell) -> GeoPoint:
    """Midpoint of the cell's latitude band and longitude slice."""
    check_cell(spec, c)
    lat = row_south_lat(spec, c.row) + band_height_deg(spec) / 2.0
    width = 360.0 / cols_in_row(spec, c.row)
    lon = -180.0 + (c.col + 0.5) * width
    return GeoPoint(lat, lon)


def cell_bounds(spec: GridSpec, c: GridCell) -> Tuple[float, float, float, float]:
    """(lat_south, lat_north, lon_west, lon_east); half-open toward north/east."""
    check_cell(spec, c)
    south = row_south_lat(spec, c.row)
    width = 360.0 / cols_in_row(spec, c.row)
    west = -180.0 + c.col * width
    return south, south + band_height_deg(spec), west, west + width


def subsample_selects(spec: GridSpec, row: int, col: int) -> bool:
    """True when the cell is kept by the stride/anchor subsample predicate."""
    r_off, c_off = spec.subsample_anchor
    stride = spec.subsample_stride
    return (row - r_off) % stride == 0 and (col - c_off) % stride == 0


def enumerate_subsampled(spec: GridSpec) -> Iterator[GridCell]:
    """Kept cells in (row asc, col asc) order; deterministic."""
    r_off, c_off = spec.subsample_anchor
    stride = spec.subsample_stride
    for row in range(row_min(spec), row_max(spec) + 1):
        if (row - r_off) % stride != 0:
            continue
        n = cols_in_row(spec, row)
        first = c_off % stride
        for col in range(first, n, stride):
            yield GridCell(row, col)


def count_subsampled(spec: GridSpec) -> int:
    """Closed-form count of the kept cells; matches enumerate_subsampled."""
    r_off, c_off = spec.subsample_anchor
    stride = spec.subsample_stride
    total = 0
    for row in range(row_min(spec), row_max(spec) + 1):
        if (row - r_off) % stride != 0:
            continue
        n = cols_in_row(spec, row)
        first = c_off % stride
        if first < n:
            total += (n - 1 - first) // stride + 1
    return total


def count_all_cells(spec: GridSpec) -> int:
    return sum(cols_in_row(spec, row) for row in range(row_min(spec), row_max(spec) + 1))


def cell_id_string(c: GridCell) -> str:
    """Canonical ASCII id, e.g. R-45C1023."""
    return f"R{c.row}C{c.col}"


def parse_cell_id(text: str) -> GridCell:
    m = _CELL_ID_RE.match(text)
    if m is None:
        raise CellIdError(f"malformed cell id {text!r}; expected R<row>C<col>")
    return GridCell(int(m.group(1)), int(m.group(2)))


def great_circle_km(spec: GridSpec, a: GeoPoint, b: GeoPoint) -> float:
    """Haversine distance on the spec's sphere."""
    lat1, lon1, lat2, lon2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    s = (
        math.sin((lat2 - lat1) / 2.0) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2.0) ** 2
    )
    return 2.0 * spec.earth_radius_km * math.asin(min(1.0, math.sqrt(s)))
