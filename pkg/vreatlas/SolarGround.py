import logging
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from vreatlas.Errors import DataError
from vreatlas.GridCore import Mask, NumericGrid, cell_latitudes, ensure_aligned

# Largest irradiation gain of an optimally tilted, south-facing module over a horizontal one
MAX_TILT_GAIN = 1.17

class PvParams(BaseModel):
    """Module and system parameters shared by ground and rooftop PV."""
    model_config = ConfigDict(frozen=True)

    efficiency: float = Field(default=0.15, gt=0, le=1)
    performance_ratio: float = Field(default=0.85, gt=0, le=1)
    packing_factor: float = Field(default=0.51, gt=0, le=1)
    hours_per_year: float = Field(default=8760.0, gt=0)


class YieldCell(BaseModel):
    """Row of the ground-PV yield table."""
    cell_id: int
    x: float
    y: float
    area_m2: float
    H_Wm2: float
    energy_kWh: float = Field(ge=0)


YIELD_COLUMNS = list(YieldCell.model_fields)

def optimal_tilt(latitude: float) -> float:
    """
    Optimal south-facing tilt in degrees: 30 at latitude 50 rising linearly to 40 at 58, clamped outside.
    """
    lat = np.clip(latitude, 50.0, 58.0)
    return 30.0 + (lat - 50.0) * (10.0 / 8.0)

def tilt_gain(latitude, tilt: Optional[float] = None):
    """
    Irradiation multiplier of a tilted module relative to a horizontal one.

    The gain is MAX_TILT_GAIN at the optimal tilt for the latitude and 1.0 at
    0 degrees, following a parabola in tilt in between and beyond.

    Parameters:
    - latitude (float or array): Degrees north.
    - tilt (float): Module tilt in degrees; None means the optimal tilt.

    Returns:
    - float or array: The gain factor.
    """
    opt = optimal_tilt(latitude)
    if tilt is None:
        return np.full_like(np.asarray(opt, dtype=float), MAX_TILT_GAIN)[()]
    rel = (tilt - opt) / opt
    return (1.0 + (MAX_TILT_GAIN - 1.0) * (1.0 - rel * rel))[()]

def gain_grid(mask: Mask, fallback_latitude: float = 54.0, tilt: Optional[float] = None) -> NumericGrid:
    """Per-cell tilt gain from the cells' latitudes."""
    lat = cell_latitudes(mask.spec, fallback_latitude)
    return NumericGrid(spec=mask.spec, values=np.asarray(tilt_gain(lat, tilt), dtype=float) * np.ones(mask.spec.shape))

def irradiance_from_annual(annual_kwh_m2: NumericGrid, hours_per_year: float = 8760.0) -> NumericGrid:
    """Converts annual irradiation (kWh/m2 per year) into mean power density (W/m2)."""
    valid = annual_kwh_m2.valid_mask()
    watts = np.where(valid, annual_kwh_m2.values * 1000.0 / hours_per_year, annual_kwh_m2.nodata_sentinel)
    return annual_kwh_m2.replace(values=watts)

def pv_ground_potential(mask: Mask, H_grid: NumericGrid, params: PvParams, gain: NumericGrid) -> Tuple[pd.DataFrame, float]:
    """
    Technical potential of ground-mounted PV on every eligible cell.

    Per cell: energy = gain * h * eta * H * A * PR * PF, with H in W/m2 so that
    H * h / 1000 is kWh/m2 per year.

    Parameters:
    - mask (Mask): Eligible cells.
    - H_grid (NumericGrid): Mean horizontal irradiance in W/m2.
    - params (PvParams): System parameters.
    - gain (NumericGrid): Tilt gain per cell.

    Returns:
    - tuple: (yield table with YIELD_COLUMNS, total kWh per year).
    """
    ensure_aligned(mask, H_grid, gain)
    eligible = mask.values & H_grid.valid_mask()
    skipped = int((mask.values & ~H_grid.valid_mask()).sum())
    if skipped:
        logging.warning(f"{skipped} eligible cell(s) have no irradiance and are left out")

    H = H_grid.values[eligible]
    if H.size and H.min() < 0:
        rows, cols = np.nonzero(eligible & (H_grid.values < 0))
        raise DataError(f"negative irradiance at cell (row {rows[0]}, col {cols[0]})")

    x, y = mask.spec.cell_centers()
    area = mask.spec.cell_area
    energy = (
        gain.values[eligible] * params.hours_per_year * params.efficiency
        * H / 1000.0 * area * params.performance_ratio * params.packing_factor
    )
    table = pd.DataFrame({
        "cell_id": np.flatnonzero(eligible.ravel()),
        "x": x[eligible],
        "y": y[eligible],
        "area_m2": np.full(H.size, area),
        "H_Wm2": H,
        "energy_kWh": energy,
    }, columns=YIELD_COLUMNS)
    return table, float(energy.sum())

def pv_capacity_kw(area_m2, params: PvParams):
    """Peak capacity (kWp) of modules covering area_m2 at the packing factor, rated at 1 kW/m2."""
    return np.asarray(area_m2) * params.packing_factor * params.efficiency
