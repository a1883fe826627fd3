import logging
from typing import ClassVar, Dict, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pyproj import CRS, Transformer
from pyproj.exceptions import CRSError
from scipy import ndimage

from vreatlas.Errors import AlignmentError, InvalidInputError

NODATA = -9999.0

class GridSpec(BaseModel):
    """
    Geometry of a regular, north-up raster in planar metres.

    origin_x and origin_y locate the centre of the lower-left cell. Two grids
    are aligned iff their specs compare equal field by field.
    """
    model_config = ConfigDict(frozen=True)

    n_rows: int = Field(ge=1)
    n_cols: int = Field(ge=1)
    cell_size: float = Field(gt=0)
    origin_x: float = 0.0
    origin_y: float = 0.0
    crs_label: str = ""

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def cell_area(self) -> float:
        return self.cell_size * self.cell_size

    def aligned(self, other: "GridSpec") -> bool:
        return self == other

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Returns the x and y coordinates of every cell centre.

        Returns:
        - tuple: two (n_rows, n_cols) arrays; row 0 is the northernmost row.
        """
        x = self.origin_x + np.arange(self.n_cols) * self.cell_size
        y = self.origin_y + (self.n_rows - 1 - np.arange(self.n_rows)) * self.cell_size
        return np.meshgrid(x, y)


class _Grid(BaseModel):
    """Common storage for all raster kinds; values are copied and made read-only."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    DTYPE: ClassVar[type] = np.float64

    spec: GridSpec
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _freeze(cls, v):
        arr = np.array(v, dtype=cls.DTYPE, copy=True)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check_shape(self):
        if self.values.shape != self.spec.shape:
            raise ValueError(
                f"values have shape {self.values.shape}, spec expects {self.spec.shape}"
            )
        return self

    def replace(self, spec: GridSpec = None, values: np.ndarray = None):
        """Builds a grid of the same kind with a new spec and/or values."""
        kwargs = {name: getattr(self, name) for name in type(self).model_fields}
        if spec is not None:
            kwargs["spec"] = spec
        if values is not None:
            kwargs["values"] = values
        return type(self)(**kwargs)


class NumericGrid(_Grid):
    """Real-valued raster (elevation, wind speed, irradiance, scenicness)."""
    nodata_sentinel: float = NODATA

    def valid_mask(self) -> np.ndarray:
        return (self.values != self.nodata_sentinel) & np.isfinite(self.values)

    def mean(self) -> float:
        valid = self.valid_mask()
        return float(self.values[valid].mean()) if valid.any() else float("nan")


class Mask(_Grid):
    """Boolean raster with set algebra between aligned masks."""
    DTYPE: ClassVar[type] = np.bool_

    def _other(self, other: "Mask") -> np.ndarray:
        ensure_aligned(self, other)
        return other.values

    def __or__(self, other: "Mask") -> "Mask":
        return Mask(spec=self.spec, values=self.values | self._other(other))

    def __and__(self, other: "Mask") -> "Mask":
        return Mask(spec=self.spec, values=self.values & self._other(other))

    def __sub__(self, other: "Mask") -> "Mask":
        return Mask(spec=self.spec, values=self.values & ~self._other(other))

    def __invert__(self) -> "Mask":
        return Mask(spec=self.spec, values=~self.values)

    def issubset(self, other: "Mask") -> bool:
        return not bool((self.values & ~self._other(other)).any())

    def count(self) -> int:
        return int(self.values.sum())

    def area_m2(self) -> float:
        return self.count() * self.spec.cell_area

    @classmethod
    def full(cls, spec: GridSpec, fill: bool = False) -> "Mask":
        return cls(spec=spec, values=np.full(spec.shape, fill, dtype=bool))


class CategoricalGrid(_Grid):
    """Integer-coded raster with a code -> label legend."""
    DTYPE: ClassVar[type] = np.int64

    legend: Dict[int, str] = Field(default_factory=dict)
    nodata_sentinel: int = int(NODATA)

    @model_validator(mode="after")
    def _check_legend(self):
        codes = np.unique(self.values[self.values != self.nodata_sentinel])
        missing = [int(c) for c in codes if int(c) not in self.legend]
        if missing:
            raise ValueError(f"codes {missing} are not in the legend")
        return self

    def valid_mask(self) -> np.ndarray:
        return self.values != self.nodata_sentinel

    def isin(self, codes) -> Mask:
        return Mask(spec=self.spec, values=np.isin(self.values, list(codes)))


Grid = Union[NumericGrid, Mask, CategoricalGrid]

def ensure_aligned(*grids: Grid) -> None:
    """
    Raises AlignmentError unless every grid shares the first grid's spec.
    """
    first = grids[0].spec
    for position, grid in enumerate(grids[1:], start=1):
        if not first.aligned(grid.spec):
            raise AlignmentError(
                f"grid #{position} has spec {grid.spec.model_dump()}, expected {first.model_dump()}"
            )

# Horn 3x3 finite-difference kernels; row 0 is north.
_HORN_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_HORN_Y = np.array([[1.0, 2.0, 1.0], [0.0, 0.0, 0.0], [-1.0, -2.0, -1.0]])

def compute_slope(dem: NumericGrid) -> NumericGrid:
    """
    Computes terrain slope in degrees with the Horn eight-neighbour estimator.

    Border rows and columns are replicated. A cell is nodata when any cell in
    its 3x3 neighbourhood is nodata.

    Parameters:
    - dem (NumericGrid): Elevation in metres.

    Returns:
    - NumericGrid: Slope in degrees in [0, 90).
    """
    if dem.values.size == 0:
        raise InvalidInputError("DEM has no cells")
    valid = dem.valid_mask()
    filled = np.where(valid, dem.values, 0.0)
    scale = 8.0 * dem.spec.cell_size
    dzdx = ndimage.correlate(filled, _HORN_X, mode="nearest") / scale
    dzdy = ndimage.correlate(filled, _HORN_Y, mode="nearest") / scale
    slope = np.degrees(np.arctan(np.hypot(dzdx, dzdy)))
    touched = ndimage.maximum_filter(~valid, size=3, mode="nearest")
    slope[touched] = dem.nodata_sentinel
    return NumericGrid(spec=dem.spec, values=slope, nodata_sentinel=dem.nodata_sentinel)

def buffer_mask(m: Mask, distance: float) -> Mask:
    """
    Grows a mask by a Euclidean distance measured between cell centres.

    Parameters:
    - m (Mask): Input mask.
    - distance (float): Buffer distance in metres, >= 0.

    Returns:
    - Mask: True where some true input cell lies within `distance`.
    """
    if distance < 0:
        raise InvalidInputError(f"buffer distance must be >= 0, got {distance}")
    if distance == 0 or not m.values.any():
        return m
    nearest = ndimage.distance_transform_edt(~m.values, sampling=m.spec.cell_size)
    # float slack only; lattice distances are exact sqrt of integers times cell_size
    return Mask(spec=m.spec, values=nearest <= distance + 1e-9 * m.spec.cell_size)

def resample_nearest(g: Grid, target: GridSpec) -> Grid:
    """
    Resamples a grid onto `target` by nearest source cell centre.

    Target cells whose nearest centre falls outside the source become nodata
    (False for masks).

    Parameters:
    - g (Grid): Source grid of any kind.
    - target (GridSpec): Destination geometry.

    Returns:
    - Grid: Same kind as `g`, on `target`.
    """
    src = g.spec
    if src.aligned(target):
        return g
    tx, ty = target.cell_centers()
    col = np.floor((tx - src.origin_x) / src.cell_size + 0.5).astype(np.int64)
    row = src.n_rows - 1 - np.floor((ty - src.origin_y) / src.cell_size + 0.5).astype(np.int64)
    inside = (col >= 0) & (col < src.n_cols) & (row >= 0) & (row < src.n_rows)
    if not inside.any():
        raise InvalidInputError("target grid does not overlap the source grid")

    fill = False if isinstance(g, Mask) else g.nodata_sentinel
    out = np.full(target.shape, fill, dtype=g.values.dtype)
    out[inside] = g.values[row[inside], col[inside]]
    return g.replace(spec=target, values=out)

def cell_latitudes(spec: GridSpec, fallback_latitude: float) -> np.ndarray:
    """
    Latitude of every cell centre, derived from spec.crs_label with pyproj.

    Grids whose crs_label is not a recognised CRS get `fallback_latitude`
    everywhere.
    """
    try:
        crs = CRS.from_user_input(spec.crs_label)
    except CRSError:
        logging.warning(
            f"crs_label '{spec.crs_label}' is not a known CRS; using latitude {fallback_latitude}"
        )
        return np.full(spec.shape, float(fallback_latitude))
    x, y = spec.cell_centers()
    if crs.is_geographic:
        return y
    transformer = Transformer.from_crs(crs, "EPSG:4326", always_xy=True)
    _, lat = transformer.transform(x, y)
    return np.asarray(lat, dtype=float)
