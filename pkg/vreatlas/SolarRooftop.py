import logging
import math
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from vreatlas.Errors import DataError, InvalidInputError
from vreatlas.GridCore import CategoricalGrid, NumericGrid, ensure_aligned
from vreatlas.SolarGround import MAX_TILT_GAIN, PvParams

AZIMUTH_SECTORS = ["N", "NE", "E", "SE", "S", "SW", "W", "NW"]
TILT_BANDS = list(range(0, 90, 10))
# Azimuth label of a horizontal roof; only valid in the 0 degree band
FLAT = "flat"

# CORINE classes carrying the building stock
ROOF_CATEGORIES = (111, 112, 121)

class RoofClass(BaseModel):
    """One azimuth/tilt class of partial roof areas."""
    model_config = ConfigDict(frozen=True)

    azimuth_sector: str
    tilt_band_deg: int
    p: float = Field(ge=0, le=1)
    irr: float = Field(gt=0, le=1.2)

    @field_validator("azimuth_sector")
    @classmethod
    def _known_sector(cls, v: str) -> str:
        if v not in AZIMUTH_SECTORS and v != FLAT:
            raise ValueError(f"unknown azimuth sector '{v}'")
        return v

    @field_validator("tilt_band_deg")
    @classmethod
    def _known_band(cls, v: int) -> int:
        if v not in TILT_BANDS:
            raise ValueError(f"tilt band must be one of {TILT_BANDS}, got {v}")
        return v

    @model_validator(mode="after")
    def _flat_is_horizontal(self):
        if self.azimuth_sector == FLAT and self.tilt_band_deg != 0:
            raise ValueError(f"azimuth '{FLAT}' needs tilt band 0, got {self.tilt_band_deg}")
        return self

    @property
    def azimuth(self) -> str:
        return FLAT if self.tilt_band_deg == 0 else self.azimuth_sector

    @property
    def tilt_deg(self) -> float:
        """Representative tilt: 0 for the flat band, the band midpoint otherwise."""
        return 0.0 if self.tilt_band_deg == 0 else self.tilt_band_deg + 5.0


class RoofClassModel(BaseModel):
    """
    Distribution of roof area over the 72 azimuth/tilt classes.

    The eight classes of the 0 degree band may name their sector or all be
    labelled "flat"; the 64 tilted classes must each be a distinct
    sector/band pair.
    """
    model_config = ConfigDict(frozen=True)

    classes: Tuple[RoofClass, ...]

    @model_validator(mode="after")
    def _check_classes(self):
        flat = [c for c in self.classes if c.tilt_band_deg == 0]
        named = [c.azimuth_sector for c in flat if c.azimuth_sector != FLAT]
        tilted = {(c.azimuth_sector, c.tilt_band_deg) for c in self.classes if c.tilt_band_deg != 0}
        if len(self.classes) != 72 or len(flat) != 8 or len(set(named)) != len(named) or len(tilted) != 64:
            raise ValueError(
                f"expected 72 distinct azimuth/tilt classes, got {len(tilted) + len(flat)} "
                f"({len(flat)} flat, {len(tilted)} distinct tilted)"
            )
        total = sum(c.p for c in self.classes)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"class proportions sum to {total!r}, not 1")
        return self

    def proportions(self) -> np.ndarray:
        return np.array([c.p for c in self.classes])

    def irradiances(self) -> np.ndarray:
        return np.array([c.irr for c in self.classes])

    def tilts_deg(self) -> np.ndarray:
        return np.array([c.tilt_deg for c in self.classes])

    def roof_area_factor(self) -> float:
        """Sum of p_i / cos(v_i): roof area per unit footprint."""
        return float(np.sum(self.proportions() / np.cos(np.radians(self.tilts_deg()))))

    def yield_factor(self) -> float:
        """Sum of p_i * irr_i / cos(v_i): irradiance-weighted roof area per unit footprint."""
        return float(np.sum(self.proportions() * self.irradiances() / np.cos(np.radians(self.tilts_deg()))))

def _isotropic_irradiance(azimuth_sector: str, tilt_deg: float, sun_elevation: float = 35.0, beam_share: float = 0.5) -> float:
    """
    Relative irradiation of a plane under a single effective southern sun plus isotropic diffuse sky.
    """
    if tilt_deg == 0:
        return 1.0
    e, b = math.radians(sun_elevation), math.radians(tilt_deg)
    gamma = math.radians(AZIMUTH_SECTORS.index(azimuth_sector) * 45.0 - 180.0)
    cos_incidence = max(0.0, math.sin(e) * math.cos(b) + math.cos(e) * math.sin(b) * math.cos(gamma))
    horizontal = beam_share * math.sin(e) + (1.0 - beam_share)
    tilted = beam_share * cos_incidence + (1.0 - beam_share) * (1.0 + math.cos(b)) / 2.0
    return tilted / horizontal

def default_roof_model() -> RoofClassModel:
    """
    Uniform proportions over the 72 classes with isotropic-sky relative irradiances.

    Raw irradiances are rescaled about 1.0 so that horizontal roofs stay at 1.0
    and the best south-facing class reaches MAX_TILT_GAIN.
    """
    raw = {
        (sector, band): _isotropic_irradiance(sector, 0.0 if band == 0 else band + 5.0)
        for sector in AZIMUTH_SECTORS
        for band in TILT_BANDS
    }
    best_south = max(v for (sector, _), v in raw.items() if sector == "S")
    stretch = (MAX_TILT_GAIN - 1.0) / (best_south - 1.0)
    classes = tuple(
        RoofClass(azimuth_sector=sector, tilt_band_deg=band, p=1.0 / 72.0, irr=1.0 + (v - 1.0) * stretch)
        for (sector, band), v in raw.items()
    )
    # 72 * (1/72) can miss 1.0 by an ulp; fold the residue into the first class
    residue = 1.0 - sum(c.p for c in classes)
    classes = (classes[0].model_copy(update={"p": classes[0].p + residue}),) + classes[1:]
    return RoofClassModel(classes=classes)

def footprint_ratio(footprint_area: float, land_area: float) -> float:
    """
    Ratio r = s / A of building footprint to land area.

    Parameters:
    - footprint_area (float): s in m2, 0 <= s <= A.
    - land_area (float): A in m2, > 0.

    Returns:
    - float: r in [0, 1].
    """
    if land_area <= 0:
        raise InvalidInputError(f"land area must be > 0, got {land_area}")
    if footprint_area < 0 or footprint_area > land_area:
        raise InvalidInputError(f"footprint area {footprint_area} must lie in [0, {land_area}]")
    return footprint_area / land_area

def footprint_ratio_table(footprints: pd.DataFrame, land_areas: Dict[int, float]) -> Dict[int, float]:
    """
    Per-category footprint ratios from building footprints sampled in reference cities.

    Parameters:
    - footprints (pd.DataFrame): Columns category, footprint_m2.
    - land_areas (dict): Land area (m2) per category in the same cities.

    Returns:
    - dict: category -> r.
    """
    sums = footprints.groupby("category")["footprint_m2"].sum()
    ratios = {}
    for category, land in sorted(land_areas.items()):
        ratios[int(category)] = footprint_ratio(float(sums.get(category, 0.0)), float(land))
    unknown = sorted(set(int(c) for c in sums.index) - set(ratios))
    if unknown:
        logging.warning(f"Footprints in categories {unknown} have no land area and are ignored")
    return ratios

def usable_roof_area(A: float, r: float, model: RoofClassModel) -> np.ndarray:
    """
    Usable roof area per class: U_i = A * r * p_i / cos(v_i).

    Returns:
    - np.ndarray: 72 areas in m2, in the model's class order.
    """
    return A * r * model.proportions() / np.cos(np.radians(model.tilts_deg()))

def pv_roof_potential(U: np.ndarray, H: float, params: PvParams, model: RoofClassModel) -> float:
    """
    Annual rooftop yield in kWh: h * eta * H * PR * sum(U_i * irr_i).

    No packing factor: partial roof areas already exclude obstructions.
    """
    if H < 0:
        raise DataError(f"negative irradiance {H}")
    return float(
        params.hours_per_year * params.efficiency * H / 1000.0 * params.performance_ratio
        * np.sum(np.asarray(U) * model.irradiances())
    )

ROOF_COLUMNS = ["cell_id", "category", "land_area_m2", "roof_area_m2", "capacity_kW", "H_Wm2", "energy_kWh"]

def rooftop_potential(land_use: CategoricalGrid, ratios: Dict[int, float], H_grid: NumericGrid, params: PvParams, model: RoofClassModel) -> Tuple[pd.DataFrame, float]:
    """
    Top-down transfer of the city footprint ratios to every cell of a land-use grid.

    Each cell whose category has a ratio contributes A * r footprint, spread
    over the roof classes (usable_roof_area) and converted to energy (pv_roof_potential).

    Parameters:
    - land_use (CategoricalGrid): CORINE-style categories.
    - ratios (dict): category -> footprint ratio r.
    - H_grid (NumericGrid): Horizontal irradiance in W/m2.
    - params (PvParams): Efficiency, PR and hours.
    - model (RoofClassModel): Roof class distribution.

    Returns:
    - tuple: (per-cell table with ROOF_COLUMNS, total kWh per year).
    """
    ensure_aligned(land_use, H_grid)
    bad = sorted(c for c, r in ratios.items() if not 0.0 <= r <= 1.0)
    if bad:
        raise DataError(f"footprint ratios outside [0, 1] for categories {bad}")
    eligible = land_use.isin(ratios).values & H_grid.valid_mask()
    H = H_grid.values[eligible]
    if H.size and H.min() < 0:
        raise DataError("negative irradiance on a roof cell")
    categories = land_use.values[eligible]
    r = np.array([ratios[int(c)] for c in categories]) if categories.size else np.zeros(0)
    footprint = land_use.spec.cell_area * r
    # vectorised usable_roof_area + pv_roof_potential: the class sums factor out per cell
    roof_area = footprint * model.roof_area_factor()
    energy = (
        params.hours_per_year * params.efficiency * H / 1000.0 * params.performance_ratio
        * footprint * model.yield_factor()
    )
    table = pd.DataFrame({
        "cell_id": np.flatnonzero(eligible.ravel()),
        "category": categories,
        "land_area_m2": np.full(H.size, land_use.spec.cell_area),
        "roof_area_m2": roof_area,
        "capacity_kW": roof_area * params.efficiency,
        "H_Wm2": H,
        "energy_kWh": energy,
    }, columns=ROOF_COLUMNS)
    return table, float(energy.sum())
