import logging
import math
import time
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.special import gamma

from vreatlas.Economics import EconParams, lcoe
from vreatlas.Errors import ConfigError, DataError, InvalidInputError
from vreatlas.GridCore import CategoricalGrid, Mask, NumericGrid, ensure_aligned
from vreatlas.HelperFunctions import parallel_map

HOURS_PER_YEAR = 8760.0
REFERENCE_HEIGHT = 10.0
QUADRATURE_STEP = 0.01
# Lowest top speed of the yield tables, in m/s of mean hub-height wind
TABLE_SPEED_MAX = 30.0

# Semi-axes of the elliptical turbine footprint, in rotor diameters (8D x 4D ellipse)
DEFAULT_SPACING = (8.0, 4.0)

class TurbineSpec(BaseModel):
    """Techno-economic characteristics of one turbine model."""
    model_config = ConfigDict(frozen=True)

    name: str
    rated_power: float = Field(gt=0, description="kW")
    rotor_diameter: float = Field(gt=0, description="m")
    hub_heights: Tuple[float, ...]
    power_curve: Tuple[Tuple[float, float], ...]
    cut_in: float = Field(ge=0)
    cut_out: float = Field(gt=0)
    investment: float = Field(ge=0, description="GBP per kW")
    om_variable: float = Field(ge=0, description="GBP per kWh")

    @field_validator("hub_heights")
    @classmethod
    def _check_hubs(cls, v):
        if not v:
            raise ValueError("at least one hub height is required")
        if min(v) < REFERENCE_HEIGHT:
            raise ValueError(f"hub heights must be >= {REFERENCE_HEIGHT} m")
        return tuple(sorted(v))

    @model_validator(mode="after")
    def _check_curve(self):
        if len(self.power_curve) < 2:
            raise ValueError(f"{self.name}: power curve needs at least two points")
        speeds = np.array([p[0] for p in self.power_curve])
        power = np.array([p[1] for p in self.power_curve])
        if np.any(np.diff(speeds) <= 0):
            raise ValueError(f"{self.name}: power curve speeds must be strictly increasing")
        if power.min() < 0 or power.max() > self.rated_power * (1 + 1e-9):
            raise ValueError(f"{self.name}: power curve must lie in [0, rated_power]")
        if self.cut_in >= self.cut_out:
            raise ValueError(f"{self.name}: cut_in must be below cut_out")
        return self

    def econ(self, base: EconParams) -> EconParams:
        """The base lifetime and interest with this turbine's costs."""
        return base.model_copy(update={"investment": self.investment, "om": self.om_variable, "om_mode": "per_kwh"})


class WeibullDistribution(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: float = Field(gt=0)
    c: float = Field(gt=0)

    @property
    def mean(self) -> float:
        return self.c * gamma(1.0 + 1.0 / self.k)

    def cdf(self, v):
        v = np.maximum(np.asarray(v, dtype=float), 0.0)
        return -np.expm1(-((v / self.c) ** self.k))


class WindSite(BaseModel):
    """Row of the wind potential table."""
    cell_id: int
    v10: float
    z0: float = Field(gt=0, lt=10)
    turbine: str
    hub_m: float
    n_turbines: int = Field(ge=0)
    capacity_kW: float
    flh: float
    annual_energy_kWh: float = Field(ge=0)
    lcoe: float
    feasible: bool


WIND_COLUMNS = list(WindSite.model_fields)


class TurbineChoice(BaseModel):
    turbine: Optional[TurbineSpec] = None
    hub: Optional[float] = None
    annual_energy: float = 0.0
    lcoe: float = float("nan")

    @property
    def feasible(self) -> bool:
        return self.turbine is not None


def _check_roughness(z0) -> np.ndarray:
    z0 = np.asarray(z0, dtype=float)
    if np.any(z0 <= 0) or np.any(z0 >= REFERENCE_HEIGHT):
        raise InvalidInputError(f"roughness length must lie in (0, {REFERENCE_HEIGHT}) m, got {z0.min()}..{z0.max()}")
    return z0

def extrapolate_wind(v10, z0, hub: float):
    """
    Mean wind speed at hub height from the 10 m value with the logarithmic profile.

    v(hub) = v10 * ln(hub / z0) / ln(10 / z0)
    """
    if hub < REFERENCE_HEIGHT:
        raise InvalidInputError(f"hub height must be >= {REFERENCE_HEIGHT} m, got {hub}")
    z0 = _check_roughness(z0)
    return (np.asarray(v10, dtype=float) * np.log(hub / z0) / np.log(REFERENCE_HEIGHT / z0))[()]

def speed_distribution(v_mean: float, k: float = 2.0) -> WeibullDistribution:
    """Weibull distribution with shape k whose mean equals v_mean (Rayleigh for k = 2)."""
    if not v_mean > 0:
        raise InvalidInputError(f"mean wind speed must be > 0, got {v_mean}")
    return WeibullDistribution(k=k, c=v_mean / gamma(1.0 + 1.0 / k))

def power_at(t: TurbineSpec, v):
    """Turbine output in kW: the power curve interpolated linearly, zero outside [cut_in, cut_out]."""
    v = np.asarray(v, dtype=float)
    speeds = [p[0] for p in t.power_curve]
    power = [p[1] for p in t.power_curve]
    out = np.interp(v, speeds, power)
    return np.where((v >= t.cut_in) & (v <= t.cut_out), out, 0.0)[()]

def annual_energy(t: TurbineSpec, hub: float, dist: WeibullDistribution, step: float = QUADRATURE_STEP) -> float:
    """
    Expected yearly energy of one turbine in kWh.

    Integrates f(v) * P(v) with the midpoint rule on bins of width `step`,
    weighting each bin with its exact Weibull probability, over
    [0, cut_out + 5]. An unbounded cut-out integrates up to the speed whose
    exceedance probability is exp(-40).

    Parameters:
    - t (TurbineSpec): Turbine.
    - hub (float): Hub height in m; must be one of t.hub_heights.
    - dist (WeibullDistribution): Speed distribution at that hub height.
    - step (float): Bin width in m/s.

    Returns:
    - float: kWh per year.
    """
    if hub not in t.hub_heights:
        raise InvalidInputError(f"{t.name} has no {hub} m hub (available: {list(t.hub_heights)})")
    upper = t.cut_out + 5.0 if math.isfinite(t.cut_out) else dist.c * 40.0 ** (1.0 / dist.k)
    n_bins = int(math.ceil(upper / step))
    edges = np.linspace(0.0, n_bins * step, n_bins + 1)
    probability = np.diff(dist.cdf(edges))
    midpoints = 0.5 * (edges[:-1] + edges[1:])
    return float(HOURS_PER_YEAR * np.sum(probability * power_at(t, midpoints)))

def energy_table(t: TurbineSpec, hub: float, k: float = 2.0, v_max: Optional[float] = None, v_step: float = 0.05) -> Tuple[np.ndarray, np.ndarray]:
    """
    Yield of one turbine as a function of the mean hub-height speed.

    The table runs from 0 to v_max, by default TABLE_SPEED_MAX or
    cut_out + 5 m/s, whichever is higher.

    Returns:
    - tuple: (mean speeds, kWh per year), ready for np.interp.
    """
    if v_max is None:
        v_max = max(TABLE_SPEED_MAX, t.cut_out + 5.0) if math.isfinite(t.cut_out) else TABLE_SPEED_MAX
    speeds = np.arange(0.0, v_max + v_step / 2, v_step)
    energy = np.zeros_like(speeds)
    for i, v in enumerate(speeds[1:], start=1):
        energy[i] = annual_energy(t, hub, speed_distribution(v, k))
    return speeds, energy

def select_turbine(v10: float, z0: float, db: Sequence[TurbineSpec], econ: EconParams, k: float = 2.0) -> TurbineChoice:
    """
    Picks the (turbine, hub height) pair with the lowest LCOE at one site.

    Ties go to the higher annual energy, then to the first pair in name and
    hub-height order. A site where no pair produces energy is infeasible.

    Parameters:
    - v10 (float): Mean wind speed at 10 m.
    - z0 (float): Roughness length in m.
    - db (list): Candidate turbines.
    - econ (EconParams): Lifetime and interest; costs come from each turbine.

    Returns:
    - TurbineChoice: The winner, or an infeasible choice.
    """
    if not db:
        raise ConfigError("turbine database is empty")
    best = TurbineChoice()
    for t in sorted(db, key=lambda t: t.name):
        for hub in t.hub_heights:
            v_hub = extrapolate_wind(v10, z0, hub)
            if v_hub <= 0:
                continue
            energy = annual_energy(t, hub, speed_distribution(v_hub, k))
            if energy <= 0:
                continue
            cost = float(lcoe(t.econ(econ), energy / t.rated_power))
            if not best.feasible or cost < best.lcoe or (cost == best.lcoe and energy > best.annual_energy):
                best = TurbineChoice(turbine=t, hub=hub, annual_energy=energy, lcoe=cost)
    return best

def turbines_per_cell(cell_area: float, rotor_diameter: float, spacing: Tuple[float, float] = DEFAULT_SPACING) -> int:
    """Number of elliptical footprints (spacing[0]*D by spacing[1]*D axes) fitting in a cell."""
    footprint = math.pi * (spacing[0] * rotor_diameter / 2.0) * (spacing[1] * rotor_diameter / 2.0)
    return int(math.floor(cell_area / footprint))

def turbine_pairs(db: Sequence[TurbineSpec]) -> List[Tuple[TurbineSpec, float]]:
    """Every (turbine, hub height) pair in name and hub order."""
    return [(t, hub) for t in sorted(db, key=lambda t: t.name) for hub in t.hub_heights]

def yield_tables(db: Sequence[TurbineSpec], k: float = 2.0) -> List[Tuple[np.ndarray, np.ndarray]]:
    """energy_table for every turbine_pairs entry, built on the worker pool."""
    pairs = turbine_pairs(db)
    start_time = time.time()
    tables = parallel_map(lambda pair: energy_table(pair[0], pair[1], k), pairs)
    if len(tables) != len(pairs):
        raise KeyboardInterrupt
    logging.info(f"Time for wind yield tables ({len(pairs)} turbine/hub pairs): {time.time() - start_time:.2f} seconds")
    return tables

def wind_potential(
    mask: Mask,
    v10_grid: NumericGrid,
    category_grid: CategoricalGrid,
    roughness_table: Dict[int, float],
    db: Sequence[TurbineSpec],
    econ: EconParams,
    k: float = 2.0,
    spacing: Tuple[float, float] = DEFAULT_SPACING,
    tables: Optional[List[Tuple[np.ndarray, np.ndarray]]] = None,
) -> Tuple[pd.DataFrame, float]:
    """
    Onshore wind technical potential on the eligible cells.

    Every (turbine, hub) pair gets a yield table over mean hub speed; each
    cell then takes the pair with the lowest LCOE, the same rule as
    select_turbine, and hosts as many turbines as footprints fit.

    Parameters:
    - mask (Mask): Eligible cells.
    - v10_grid (NumericGrid): Mean wind speed at 10 m.
    - category_grid (CategoricalGrid): Land cover, for roughness.
    - roughness_table (dict): Category code -> z0 in m.
    - db (list): Turbine database.
    - econ (EconParams): Lifetime and interest.
    - k (float): Weibull shape.
    - spacing (tuple): Footprint axes in rotor diameters.
    - tables (list): Output of yield_tables(db, k), to reuse across calls.

    Returns:
    - tuple: (table with WIND_COLUMNS, total TWh per year).
    """
    if not db:
        raise ConfigError("turbine database is empty")
    ensure_aligned(mask, v10_grid, category_grid)
    eligible = mask.values & v10_grid.valid_mask() & category_grid.valid_mask()
    v10 = v10_grid.values[eligible]
    categories = category_grid.values[eligible]
    missing = sorted(set(int(c) for c in np.unique(categories)) - set(roughness_table))
    if missing:
        raise DataError(f"land-use category {missing[0]} has no roughness length (missing: {missing})")
    z0 = _check_roughness(np.array([roughness_table[int(c)] for c in categories], dtype=float))

    pairs = turbine_pairs(db)
    if tables is None:
        tables = yield_tables(db, k)

    n = v10.size
    cell_area = mask.spec.cell_area
    best_lcoe = np.full(n, np.inf)
    best_energy = np.zeros(n)
    best_pair = np.full(n, -1)
    for index, ((t, hub), (speeds, energies)) in enumerate(zip(pairs, tables)):
        if turbines_per_cell(cell_area, t.rotor_diameter, spacing) == 0:
            continue
        v_hub = extrapolate_wind(v10, z0, hub) if n else np.zeros(0)
        clamped = int(np.count_nonzero(v_hub > speeds[-1]))
        if clamped:
            logging.warning(
                f"{clamped} cell(s) exceed the {speeds[-1]:g} m/s yield table of {t.name} at {hub:g} m; "
                f"their yield is held at the table's top value"
            )
        energy = np.interp(v_hub, speeds, energies) if n else np.zeros(0)
        cost = np.full(n, np.inf)
        producing = energy > 0
        if producing.any():
            cost[producing] = lcoe(t.econ(econ), energy[producing] / t.rated_power)
        better = (cost < best_lcoe) | ((cost == best_lcoe) & np.isfinite(cost) & (energy > best_energy))
        best_lcoe[better] = cost[better]
        best_energy[better] = energy[better]
        best_pair[better] = index

    feasible = best_pair >= 0
    if (~feasible).any():
        logging.warning(f"{int((~feasible).sum())} eligible cell(s) are infeasible for every turbine")
    names = np.array([pairs[i][0].name if i >= 0 else "" for i in best_pair], dtype=object)
    hubs = np.array([pairs[i][1] if i >= 0 else 0.0 for i in best_pair], dtype=float)
    counts = np.array(
        [turbines_per_cell(cell_area, pairs[i][0].rotor_diameter, spacing) if i >= 0 else 0 for i in best_pair],
        dtype=np.int64,
    )
    rated = np.array([pairs[i][0].rated_power if i >= 0 else 0.0 for i in best_pair], dtype=float)
    cell_energy = counts * best_energy

    table = pd.DataFrame({
        "cell_id": np.flatnonzero(eligible.ravel()),
        "v10": v10,
        "z0": z0,
        "turbine": names,
        "hub_m": hubs,
        "n_turbines": counts,
        "capacity_kW": counts * rated,
        "flh": np.where(feasible, best_energy / np.where(rated > 0, rated, 1.0), 0.0),
        "annual_energy_kWh": cell_energy,
        "lcoe": np.where(feasible, best_lcoe, np.nan),
        "feasible": feasible,
    }, columns=WIND_COLUMNS)
    total_twh = float(cell_energy.sum()) / 1e9
    logging.info(f"Wind potential: {int(feasible.sum())} feasible cell(s), {total_twh:.3f} TWh/yr")
    return table, total_twh

def capacity_density(table: pd.DataFrame, cell_area: float) -> float:
    """Installed MW per km2 over the feasible cells of a wind table."""
    feasible = table[table["feasible"]]
    if feasible.empty:
        return 0.0
    return float(feasible["capacity_kW"].sum() / 1000.0 / (len(feasible) * cell_area / 1e6))

def _cubic_curve(rated: float, cut_in: float = 3.0, rated_speed: float = 12.0, cut_out: float = 25.0):
    ramp = [
        (float(v), rated * (v ** 3 - cut_in ** 3) / (rated_speed ** 3 - cut_in ** 3))
        for v in range(int(cut_in), int(rated_speed) + 1)
    ]
    return tuple(ramp) + ((cut_out, rated),)

def default_turbine_db() -> List[TurbineSpec]:
    """Three synthetic turbine classes so the pipeline runs without a turbine database file."""
    return [
        TurbineSpec(name="large", rated_power=3600.0, rotor_diameter=120.0, hub_heights=(100.0, 120.0, 140.0),
                    power_curve=_cubic_curve(3600.0), cut_in=3.0, cut_out=25.0, investment=1050.0, om_variable=0.02),
        TurbineSpec(name="medium", rated_power=2000.0, rotor_diameter=90.0, hub_heights=(80.0, 100.0),
                    power_curve=_cubic_curve(2000.0), cut_in=3.0, cut_out=25.0, investment=1100.0, om_variable=0.02),
        TurbineSpec(name="small", rated_power=900.0, rotor_diameter=54.0, hub_heights=(50.0, 65.0),
                    power_curve=_cubic_curve(900.0), cut_in=3.0, cut_out=25.0, investment=1250.0, om_variable=0.02),
    ]

def default_roughness_table() -> Dict[int, float]:
    """Roughness length (m) per CORINE land-cover code."""
    return {
        111: 1.2, 112: 0.5, 121: 0.5, 122: 0.075, 124: 0.0005, 131: 0.005, 141: 0.5, 142: 0.5,
        211: 0.05, 231: 0.03, 242: 0.3, 243: 0.3,
        311: 0.75, 312: 0.75, 313: 0.75, 321: 0.03, 322: 0.03, 324: 0.6,
        331: 0.0003, 332: 0.005, 333: 0.01, 411: 0.0005, 412: 0.0005, 512: 0.0005,
    }
