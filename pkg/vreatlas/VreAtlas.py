import json
import logging
import os
import time
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from vreatlas.Economics import GROUND_PV, ONSHORE_WIND, ROOFTOP_PV, EconParams, merit_order, CURVE_COLUMNS, site_lcoe
from vreatlas.Errors import ConfigError, DataError, UnreadableInputError, VreAtlasError
from vreatlas.Exclusion import (
    AgGradeGrid,
    ScenarioConfig,
    apply_scenario,
    attach_land_use,
    builtin_scenarios,
    compose_precedence,
    country_buffer_exclusion,
    effective_scenicness,
    geographic_potential,
    harmonize_ag_grid,
    masks_from_categories,
)
from vreatlas.GridCore import CategoricalGrid, GridSpec, Mask, NumericGrid, compute_slope, resample_nearest
from vreatlas.HelperFunctions import parallel_map, setup_logging, write_csv_file, write_log
from vreatlas.Ingest import (
    load_scenario_file,
    rasterize_points,
    read_ascii_grid,
    read_footprint_ratios,
    read_la_table,
    read_roof_model,
    read_roughness_table,
    read_turbine_db,
    require_file,
    write_ascii_grid,
)
from vreatlas.PlotCurves import emit_plot
from vreatlas.Regions import (
    LA_RESULT_COLUMNS,
    OVERLAP_COLUMNS,
    SCENIC_CURVE_COLUMNS,
    LARegion,
    aggregate_to_la,
    overlap_analysis,
    regions_from_table,
    scenic_cost_curves,
    select_scenic_regions,
)
from vreatlas.SolarGround import PvParams, YIELD_COLUMNS, gain_grid, pv_capacity_kw, pv_ground_potential
from vreatlas.SolarRooftop import ROOF_COLUMNS, default_roof_model, rooftop_potential
from vreatlas.Wind import DEFAULT_SPACING, WIND_COLUMNS, default_roughness_table, default_turbine_db, wind_potential, yield_tables

# Scenicness ceilings compared in the overlap analysis
OVERLAP_THRESHOLDS = (10.0, 5.80, 4.67, 3.67)
# Agricultural grades excluded in the low-restriction scenarios
LOW_RESTRICTION_GRADES = frozenset({1, 2})

ARTIFICIAL_CLC = [111, 112, 121, 122, 123, 124, 131, 132, 133, 141, 142]
WATER_CLC = [411, 412, 421, 422, 423, 511, 512, 521, 522, 523]

TOTALS_COLUMNS = [
    "scenario_id", "label", "scenic_threshold", "ag_excluded_grades",
    "wind_area_km2", "wind_TWh", "pv_ground_area_km2", "pv_ground_TWh", "pv_roof_TWh",
]

class LayerFiles(BaseModel):
    """Input files of a run; relative paths are resolved against the config directory."""
    model_config = ConfigDict(extra="forbid")

    dem: str
    land_cover: str
    scenic_points: str
    regions: str
    la_table: str
    wind_speed: Optional[str] = None
    irradiance: Optional[str] = None
    osm: Optional[str] = None
    countries: Optional[str] = None
    ag_grades: Optional[str] = None
    protected: List[str] = Field(default_factory=list)
    settlements: Optional[str] = None
    turbines: Optional[str] = None
    turbine_curves: Optional[str] = None
    roughness: Optional[str] = None
    roof_model: Optional[str] = None
    footprint_ratios: Optional[str] = None

    def files(self) -> List[Tuple[str, str]]:
        out = []
        for name in type(self).model_fields:
            value = getattr(self, name)
            if isinstance(value, list):
                out.extend((f"{name}[{i}]", p) for i, p in enumerate(value))
            elif value:
                out.append((name, value))
        return out


class RunConfig(BaseModel):
    """Everything a run needs, normally loaded from config.yaml."""
    model_config = ConfigDict(extra="forbid")

    layers: LayerFiles
    output_dir: str = "ResultsVreAtlas"
    config_dir: str = "."
    grid: Optional[GridSpec] = None
    seed: int = 42

    scenarios: List[int] = Field(default_factory=lambda: list(range(1, 9)))
    scenario_files: List[str] = Field(default_factory=list)
    wind: bool = True
    pv_ground: bool = True
    pv_roof: bool = True

    wind_positive_clc: List[int] = Field(default_factory=lambda: [211, 231, 242, 243, 311, 312, 313, 321, 322, 324, 333])
    osm_positive: List[int] = Field(default_factory=lambda: [211, 231, 321])
    osm_negative: List[int] = Field(default_factory=lambda: list(ARTIFICIAL_CLC))
    pv_excluded_clc: List[int] = Field(default_factory=lambda: ARTIFICIAL_CLC + WATER_CLC)
    wind_slope_limit: float = 20.0
    pv_slope_limit: float = 15.0
    protected_buffer_m: float = Field(default=0.0, ge=0)
    country_legend: Dict[int, str] = Field(default_factory=lambda: {1: "England", 2: "Wales", 3: "Scotland"})
    min_votes: int = Field(default=3, ge=0)

    pv: PvParams = PvParams()
    tilt: Optional[float] = None
    fallback_latitude: float = 54.0
    weibull_k: float = Field(default=2.0, gt=0)
    spacing: Tuple[float, float] = DEFAULT_SPACING
    econ_pv_ground: EconParams = GROUND_PV
    econ_pv_roof: EconParams = ROOFTOP_PV
    econ_wind: EconParams = ONSHORE_WIND

    overlap_denominator: Literal["region", "wind"] = "region"
    scenic_weighting: Literal["site", "energy"] = "site"

    # inputs of the statistics and validation subcommands
    planning: Optional[str] = None
    postcodes: Optional[str] = None
    own_results: Optional[str] = None
    external_results: Optional[str] = None
    landuse_shares: Optional[str] = None
    validation_factor: float = Field(default=8.0, gt=0)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "RunConfig":
        """Validates a loaded YAML mapping and resolves its relative paths."""
        try:
            cfg = cls(**data)
        except ValidationError as e:
            first = e.errors()[0]
            where = ".".join(str(p) for p in first["loc"])
            raise ConfigError(f"invalid config at '{where}': {first['msg']}") from e
        return cfg.resolved()

    def resolved(self) -> "RunConfig":
        base = os.path.abspath(self.config_dir)

        def resolve(path: Optional[str]) -> Optional[str]:
            return path if not path or os.path.isabs(path) else os.path.join(base, path)

        layers = {
            name: [resolve(p) for p in value] if isinstance(value, list) else resolve(value)
            for name, value in self.layers.model_dump().items()
        }
        return self.model_copy(update={
            "layers": LayerFiles(**layers),
            "output_dir": resolve(self.output_dir),
            "scenario_files": [resolve(p) for p in self.scenario_files],
            **{k: resolve(getattr(self, k)) for k in ("planning", "postcodes", "own_results", "external_results", "landuse_shares")},
        })

    def check_files(self) -> None:
        """Raises MissingLayerError for the first configured file that does not exist."""
        for _, path in self.layers.files():
            require_file(path)
        for path in self.scenario_files:
            require_file(path)

    def options(self) -> Dict[str, Any]:
        """Flat option summary for run_options.log."""
        summary = {name: path for name, path in self.layers.files()}
        for name, value in self.model_dump(exclude={"layers", "config_dir"}).items():
            summary[name] = value
        return summary


class Layers(BaseModel):
    """Input grids on the master grid."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    spec: GridSpec
    dem: NumericGrid
    land_cover: CategoricalGrid
    osm: Optional[CategoricalGrid] = None
    wind_speed: Optional[NumericGrid] = None
    irradiance: Optional[NumericGrid] = None
    countries: Optional[CategoricalGrid] = None
    ag: AgGradeGrid
    protected: List[Mask] = Field(default_factory=list)
    settlements: Optional[Mask] = None
    regions: CategoricalGrid
    scenic: NumericGrid
    la: List[LARegion]


class ScenarioResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    scenario: ScenarioConfig
    wind_mask: Optional[Mask] = None
    pv_mask: Optional[Mask] = None
    wind: Optional[pd.DataFrame] = None
    wind_twh: float = 0.0
    pv_ground: Optional[pd.DataFrame] = None
    pv_ground_twh: float = 0.0


def load_run_config(config: Mapping[str, Any], output_dir: Optional[str] = None) -> RunConfig:
    if "layers" not in config:
        raise ConfigError("config has no 'layers' section")
    cfg = RunConfig.from_mapping(config)
    if output_dir:
        cfg = cfg.model_copy(update={"output_dir": os.path.abspath(output_dir)})
    return cfg

def _on_master(grid, spec: GridSpec, name: str):
    if grid.spec.aligned(spec):
        return grid
    logging.info(f"Resampling layer '{name}' onto the master grid")
    return resample_nearest(grid, spec)

def load_layers(cfg: RunConfig) -> Layers:
    """Reads every configured layer and puts it on the master grid (the DEM's unless cfg.grid is set)."""
    start_time = time.time()
    cfg.check_files()
    files = cfg.layers
    dem = read_ascii_grid(files.dem)
    spec = cfg.grid or dem.spec

    def numeric(path: Optional[str], name: str) -> Optional[NumericGrid]:
        return _on_master(read_ascii_grid(path), spec, name) if path else None

    def categorical(path: Optional[str], name: str, legend=None) -> Optional[CategoricalGrid]:
        return _on_master(read_ascii_grid(path, "categorical", legend), spec, name) if path else None

    countries = categorical(files.countries, "countries", cfg.country_legend)
    raw_grades = categorical(files.ag_grades, "ag_grades")
    if raw_grades is not None:
        if countries is None:
            raise ConfigError("ag_grades needs the countries layer to harmonise grades")
        ag = harmonize_ag_grid(raw_grades, countries)
    else:
        ag = AgGradeGrid(spec=spec, values=np.full(spec.shape, -9999))
    if files.settlements and countries is None:
        raise ConfigError("settlements need the countries layer for the buffer distances")

    scenic_raw, votes = rasterize_points(files.scenic_points, spec)
    la_table = read_la_table(files.la_table)
    layers = Layers(
        spec=spec,
        dem=_on_master(dem, spec, "dem"),
        land_cover=categorical(files.land_cover, "land_cover"),
        osm=categorical(files.osm, "osm"),
        wind_speed=numeric(files.wind_speed, "wind_speed"),
        irradiance=numeric(files.irradiance, "irradiance"),
        countries=countries,
        ag=ag,
        protected=[_on_master(read_ascii_grid(p, "mask"), spec, "protected") for p in files.protected],
        settlements=_on_master(read_ascii_grid(files.settlements, "mask"), spec, "settlements") if files.settlements else None,
        regions=categorical(files.regions, "regions"),
        scenic=effective_scenicness(scenic_raw, votes, cfg.min_votes),
        la=regions_from_table(la_table),
    )
    logging.info(f"Time for loading layers: {time.time() - start_time:.2f} seconds")
    return layers

def geographic_masks(layers: Layers, cfg: RunConfig) -> Tuple[Mask, Mask, CategoricalGrid]:
    """
    Geographical potential of wind and ground PV, plus the land-use category of every wind cell.

    Returns:
    - tuple: (wind mask, ground-PV mask, land use on the wind mask).
    """
    start_time = time.time()
    spec = layers.spec
    slope = compute_slope(layers.dem)
    protected = [(m, cfg.protected_buffer_m) for m in layers.protected]
    no_osm = CategoricalGrid(spec=spec, values=np.full(spec.shape, -9999))
    osm = layers.osm if layers.osm is not None else no_osm
    osm_pos, osm_neg = masks_from_categories(osm, cfg.osm_positive, cfg.osm_negative)

    clc_pos = layers.land_cover.isin(cfg.wind_positive_clc)
    wind_base = compose_precedence(osm_pos, osm_neg, clc_pos)
    wind_negatives = list(protected)
    if layers.settlements is not None:
        wind_negatives.append((country_buffer_exclusion(layers.settlements, layers.countries), 0.0))
    wind_geo = geographic_potential(wind_base, wind_negatives, slope, cfg.wind_slope_limit)
    land_use = attach_land_use(wind_geo, osm, layers.land_cover)

    land = Mask(spec=spec, values=layers.land_cover.valid_mask())
    pv_base = land - layers.land_cover.isin(cfg.pv_excluded_clc) - osm_neg
    pv_geo = geographic_potential(pv_base, protected, slope, cfg.pv_slope_limit)
    logging.info(
        f"Geographical potential: wind {wind_geo.area_m2() / 1e6:.1f} km2, ground PV {pv_geo.area_m2() / 1e6:.1f} km2"
    )
    logging.info(f"Time for geographical potential: {time.time() - start_time:.2f} seconds")
    return wind_geo, pv_geo, land_use

def scenario_configs(cfg: RunConfig) -> List[ScenarioConfig]:
    """Built-in scenarios selected by id followed by scenario files; ids must be unique."""
    builtins = builtin_scenarios()
    unknown = [i for i in cfg.scenarios if i not in builtins]
    if unknown:
        raise ConfigError(f"unknown scenario ids {unknown}; built-ins are 1..8")
    chosen = [builtins[i] for i in cfg.scenarios] + [load_scenario_file(p) for p in cfg.scenario_files]
    ids = [s.id for s in chosen]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"scenario ids must be unique, got {ids}")
    for s in chosen:
        s.check()
    return chosen

def _rated_everywhere(layers: Layers) -> NumericGrid:
    # layers.scenic is already the effective scenicness, so every cell counts as rated
    return NumericGrid(spec=layers.spec, values=np.full(layers.spec.shape, 1e6))

def scenario_mask(geo: Mask, layers: Layers, scenario: ScenarioConfig) -> Mask:
    return apply_scenario(geo, layers.scenic, _rated_everywhere(layers), layers.ag, scenario)

class _Technologies:
    """Technology inputs loaded once per run."""

    def __init__(self, cfg: RunConfig, layers: Layers):
        files = cfg.layers
        self.cfg = cfg
        self.layers = layers
        if cfg.wind:
            if layers.wind_speed is None:
                raise ConfigError("wind is enabled but no wind_speed layer is configured")
            if files.turbines:
                if not files.turbine_curves:
                    raise ConfigError("turbines need turbine_curves")
                self.db = read_turbine_db(files.turbines, files.turbine_curves)
            else:
                self.db = default_turbine_db()
            self.roughness = read_roughness_table(files.roughness) if files.roughness else default_roughness_table()
            self.tables = yield_tables(self.db, cfg.weibull_k)
        if cfg.pv_ground or cfg.pv_roof:
            if layers.irradiance is None:
                raise ConfigError("PV is enabled but no irradiance layer is configured")
        if cfg.pv_roof:
            if not files.footprint_ratios:
                raise ConfigError("rooftop PV needs footprint_ratios")
            self.ratios = read_footprint_ratios(files.footprint_ratios)
            self.roof_model = read_roof_model(files.roof_model) if files.roof_model else default_roof_model()

    def wind(self, mask: Mask, land_use: CategoricalGrid) -> Tuple[pd.DataFrame, float]:
        return wind_potential(
            mask, self.layers.wind_speed, land_use, self.roughness, self.db, self.cfg.econ_wind,
            self.cfg.weibull_k, self.cfg.spacing, self.tables,
        )

    def pv_ground(self, mask: Mask) -> Tuple[pd.DataFrame, float]:
        gain = gain_grid(mask, self.cfg.fallback_latitude, self.cfg.tilt)
        table, total_kwh = pv_ground_potential(mask, self.layers.irradiance, self.cfg.pv, gain)
        table["capacity_kW"] = pv_capacity_kw(table["area_m2"].to_numpy(), self.cfg.pv)
        table["lcoe"] = site_lcoe(self.cfg.econ_pv_ground, table["energy_kWh"].to_numpy(), table["capacity_kW"].to_numpy())
        return table, total_kwh / 1e9

    def pv_roof(self) -> Tuple[pd.DataFrame, float]:
        table, total_kwh = rooftop_potential(self.layers.land_cover, self.ratios, self.layers.irradiance, self.cfg.pv, self.roof_model)
        table["lcoe"] = site_lcoe(self.cfg.econ_pv_roof, table["energy_kWh"].to_numpy(), table["capacity_kW"].to_numpy())
        return table, total_kwh / 1e9


def write_cost_curve(output_dir: str, name: str, table: pd.DataFrame, energy_column: str) -> str:
    """Cost-curve CSV and SVG of a site table with cell_id, energy and lcoe columns."""
    usable = table[np.isfinite(table["lcoe"].to_numpy(dtype=float)) & (table[energy_column] > 0)]
    curve = merit_order(
        usable[energy_column].to_numpy(dtype=float) / 1e9,
        usable["lcoe"].to_numpy(dtype=float),
        site_ids=usable["cell_id"].to_numpy(),
    )
    csv_path = write_csv_file(output_dir, curve, CURVE_COLUMNS, f"{name}.csv")
    emit_plot(csv_path)
    return csv_path

def _run_one(scenario: ScenarioConfig, wind_geo: Mask, pv_geo: Mask, land_use: CategoricalGrid, layers: Layers, tech: _Technologies) -> ScenarioResult:
    start_time = time.time()
    result = ScenarioResult(scenario=scenario)
    cfg = tech.cfg
    if cfg.wind and scenario.wind:
        result.wind_mask = scenario_mask(wind_geo, layers, scenario.for_wind())
        result.wind, result.wind_twh = tech.wind(result.wind_mask, land_use)
    if cfg.pv_ground and scenario.pv_ground:
        result.pv_mask = scenario_mask(pv_geo, layers, scenario.for_ground_pv())
        result.pv_ground, result.pv_ground_twh = tech.pv_ground(result.pv_mask)
    logging.info(f"Time for scenario {scenario.id}: {time.time() - start_time:.2f} seconds")
    return result

def overlap_table(wind_geo: Mask, pv_geo: Mask, layers: Layers, cfg: RunConfig) -> Tuple[pd.DataFrame, List[str]]:
    """Wind/ground-PV overlap at the four scenicness ceilings against the low-restriction PV mask."""
    wind_masks = {
        t: scenario_mask(wind_geo, layers, ScenarioConfig(id=1, scenic_threshold=t).for_wind())
        for t in OVERLAP_THRESHOLDS
    }
    pv_mask = scenario_mask(pv_geo, layers, ScenarioConfig(id=5, scenic_threshold=10.0, ag_excluded_grades=LOW_RESTRICTION_GRADES).for_ground_pv())
    return overlap_analysis(wind_masks, pv_mask, layers.regions, layers.la, layers.land_cover, cfg.overlap_denominator)

def scenic_curves(wind_table: pd.DataFrame, layers: Layers, cfg: RunConfig) -> Tuple[pd.DataFrame, List[str]]:
    """LCOE and cumulative wind energy per region as scenic land is opened up level by level."""
    sites = wind_table[wind_table["feasible"]]
    cell_ids = sites["cell_id"].to_numpy(dtype=np.int64)
    grid_ids = layers.regions.values.ravel()[cell_ids]
    codes = {r.grid_id: r.code for r in layers.la}
    frame = pd.DataFrame({
        "code": [codes.get(int(g), "") for g in grid_ids],
        "scenicness": layers.scenic.values.ravel()[cell_ids],
        "lcoe": sites["lcoe"].to_numpy(dtype=float),
        "energy_kWh": sites["annual_energy_kWh"].to_numpy(dtype=float),
    })
    curves = scenic_cost_curves(frame[frame["code"] != ""], weighting=cfg.scenic_weighting)
    return curves, select_scenic_regions(curves)

def run_pipeline(cfg: RunConfig) -> Dict[str, str]:
    """
    Runs every enabled technology for every scenario and writes the result files.

    Outputs in cfg.output_dir: scenario_totals.csv, la_results.csv, cost
    curves (CSV + SVG) per technology and scenario, overlap.csv,
    scenic_cost_curves.csv, scenic_regions.csv and run_options.log.

    Parameters:
    - cfg (RunConfig): Validated configuration.

    Returns:
    - dict: Output name -> path.
    """
    total_start = time.time()
    output_dir = cfg.output_dir
    os.makedirs(output_dir, exist_ok=True)
    scenarios = scenario_configs(cfg)
    layers = load_layers(cfg)
    wind_geo, pv_geo, land_use = geographic_masks(layers, cfg)
    tech = _Technologies(cfg, layers)

    results = parallel_map(lambda s: _run_one(s, wind_geo, pv_geo, land_use, layers, tech), scenarios)
    if len(results) != len(scenarios):
        logging.warning(f"Run interrupted; writing results of {len(results)} of {len(scenarios)} scenario(s)")

    outputs: Dict[str, str] = {}
    totals, la_tables = [], []
    for result in results:
        s = result.scenario
        totals.append({
            "scenario_id": s.id,
            "label": s.label,
            "scenic_threshold": s.scenic_threshold,
            "ag_excluded_grades": ";".join(str(g) for g in sorted(s.ag_excluded_grades)),
            "wind_area_km2": result.wind_mask.area_m2() / 1e6 if result.wind_mask is not None else 0.0,
            "wind_TWh": result.wind_twh,
            "pv_ground_area_km2": result.pv_mask.area_m2() / 1e6 if result.pv_mask is not None else 0.0,
            "pv_ground_TWh": result.pv_ground_twh,
            "pv_roof_TWh": 0.0,
        })
        if result.wind is not None:
            la_tables.append(aggregate_to_la(result.wind, layers.regions, layers.la, "wind", s.id, "annual_energy_kWh"))
            outputs[f"wind_s{s.id}"] = write_cost_curve(output_dir, f"cost_curve_wind_s{s.id}", result.wind, "annual_energy_kWh")
        if result.pv_ground is not None:
            la_tables.append(aggregate_to_la(result.pv_ground, layers.regions, layers.la, "pv_ground", s.id))
            outputs[f"pv_ground_s{s.id}"] = write_cost_curve(output_dir, f"cost_curve_pv_ground_s{s.id}", result.pv_ground, "energy_kWh")

    if cfg.pv_roof:
        roof, roof_twh = tech.pv_roof()
        for row in totals:
            row["pv_roof_TWh"] = roof_twh
        la_tables.append(aggregate_to_la(roof, layers.regions, layers.la, "pv_roof", 0))
        outputs["pv_roof"] = write_cost_curve(output_dir, "cost_curve_pv_roof", roof, "energy_kWh")

    outputs["totals"] = write_csv_file(output_dir, pd.DataFrame(totals), TOTALS_COLUMNS, "scenario_totals.csv")
    if la_tables:
        outputs["la_results"] = write_csv_file(output_dir, pd.concat(la_tables, ignore_index=True), LA_RESULT_COLUMNS, "la_results.csv")

    if cfg.wind and cfg.pv_ground:
        overlap, selected = overlap_table(wind_geo, pv_geo, layers, cfg)
        outputs["overlap"] = write_csv_file(output_dir, overlap, OVERLAP_COLUMNS, "overlap.csv")
        logging.info(f"Regions selected by the overlap criteria: {selected}")
    if cfg.wind:
        full_wind, _ = tech.wind(wind_geo, land_use)
        curves, scenic_regions = scenic_curves(full_wind, layers, cfg)
        outputs["scenic_curves"] = write_csv_file(output_dir, curves, SCENIC_CURVE_COLUMNS, "scenic_cost_curves.csv")
        outputs["scenic_regions"] = write_csv_file(output_dir, pd.DataFrame({"code": scenic_regions}), ["code"], "scenic_regions.csv")

    outputs["options"] = write_log(output_dir, cfg.options())
    logging.info(f"Time for full run: {time.time() - total_start:.2f} seconds")
    return outputs

def write_error_report(output_dir: str, error: VreAtlasError) -> str:
    os.makedirs(output_dir, exist_ok=True)
    path = os.path.join(output_dir, "error_report.json")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(error.report(), f, indent=2, sort_keys=True)
        f.write("\n")
    return path

def run_scenario(cfg: RunConfig) -> int:
    """
    Runs the full pipeline and maps failures to exit codes.

    Returns:
    - int: 0 on success, 1 on a configuration error, 2 on a data error
      or unreadable input (with error_report.json in the output directory).
    """
    setup_logging(cfg.output_dir)
    try:
        run_pipeline(cfg)
    except ConfigError as e:
        logging.error(f"Configuration error: {e}")
        write_error_report(cfg.output_dir, e)
        return 1
    except DataError as e:
        logging.error(f"Data error: {e}")
        write_error_report(cfg.output_dir, e)
        return 2
    except (ValueError, OSError) as e:
        logging.exception(f"Unreadable input: {e}")
        write_error_report(cfg.output_dir, UnreadableInputError.wrap(e))
        return 2
    return 0

# ---------------------------------------------------------------- single-stage drivers

def ingest_stage(cfg: RunConfig) -> str:
    """Writes every layer, on the master grid, to <output_dir>/grids with a summary table."""
    layers = load_layers(cfg)
    grid_dir = os.path.join(cfg.output_dir, "grids")
    rows = []
    named = {
        "dem": layers.dem, "land_cover": layers.land_cover, "osm": layers.osm, "wind_speed": layers.wind_speed,
        "irradiance": layers.irradiance, "countries": layers.countries, "ag_grades": layers.ag,
        "settlements": layers.settlements, "regions": layers.regions, "scenicness": layers.scenic,
        **{f"protected_{i}": m for i, m in enumerate(layers.protected)},
    }
    for name, grid in named.items():
        if grid is None:
            continue
        write_ascii_grid(os.path.join(grid_dir, f"{name}.asc"), grid)
        if isinstance(grid, Mask):
            valid, mean = grid.count(), float("nan")
        else:
            ok = grid.values != grid.nodata_sentinel
            valid, mean = int(ok.sum()), float(grid.values[ok].mean()) if ok.any() else float("nan")
        rows.append({"layer": name, "kind": type(grid).__name__, "valid_cells": valid, "mean": mean})
    return write_csv_file(cfg.output_dir, pd.DataFrame(rows), ["layer", "kind", "valid_cells", "mean"], "layer_summary.csv")

def exclude_stage(cfg: RunConfig) -> str:
    """Writes the geographical-potential masks and every scenario's masks with their areas."""
    scenarios = scenario_configs(cfg)
    layers = load_layers(cfg)
    wind_geo, pv_geo, _ = geographic_masks(layers, cfg)
    mask_dir = os.path.join(cfg.output_dir, "masks")
    write_ascii_grid(os.path.join(mask_dir, "wind_geo.asc"), wind_geo)
    write_ascii_grid(os.path.join(mask_dir, "pv_geo.asc"), pv_geo)
    rows = [
        {"scenario_id": 0, "tech": "wind", "area_km2": wind_geo.area_m2() / 1e6},
        {"scenario_id": 0, "tech": "pv_ground", "area_km2": pv_geo.area_m2() / 1e6},
    ]
    for s in scenarios:
        for tech, geo, variant in (("wind", wind_geo, s.for_wind()), ("pv_ground", pv_geo, s.for_ground_pv())):
            mask = scenario_mask(geo, layers, variant)
            write_ascii_grid(os.path.join(mask_dir, f"{tech}_s{s.id}.asc"), mask)
            rows.append({"scenario_id": s.id, "tech": tech, "area_km2": mask.area_m2() / 1e6})
    return write_csv_file(cfg.output_dir, pd.DataFrame(rows), ["scenario_id", "tech", "area_km2"], "mask_areas.csv")

def potential_stage(cfg: RunConfig, tech_name: Literal["wind", "pv-ground", "pv-roof"], scenario_id: int = 1) -> Tuple[str, float]:
    """Per-cell potential of one technology under one scenario; returns the CSV path and total TWh."""
    builtins = builtin_scenarios()
    if scenario_id not in builtins:
        raise ConfigError(f"unknown scenario id {scenario_id}")
    scenario = builtins[scenario_id]
    cfg = cfg.model_copy(update={"wind": tech_name == "wind", "pv_ground": tech_name == "pv-ground", "pv_roof": tech_name == "pv-roof"})
    layers = load_layers(cfg)
    tech = _Technologies(cfg, layers)
    if tech_name == "pv-roof":
        table, twh = tech.pv_roof()
        columns = ROOF_COLUMNS + ["lcoe"]
        name = "potential_pv_roof.csv"
    else:
        wind_geo, pv_geo, land_use = geographic_masks(layers, cfg)
        if tech_name == "wind":
            table, twh = tech.wind(scenario_mask(wind_geo, layers, scenario.for_wind()), land_use)
            columns = WIND_COLUMNS
        else:
            table, twh = tech.pv_ground(scenario_mask(pv_geo, layers, scenario.for_ground_pv()))
            columns = YIELD_COLUMNS + ["capacity_kW", "lcoe"]
        name = f"potential_{tech_name.replace('-', '_')}_s{scenario_id}.csv"
    return write_csv_file(cfg.output_dir, table, columns, name), twh

def overlap_stage(cfg: RunConfig) -> Tuple[str, List[str]]:
    layers = load_layers(cfg)
    wind_geo, pv_geo, _ = geographic_masks(layers, cfg)
    overlap, selected = overlap_table(wind_geo, pv_geo, layers, cfg)
    return write_csv_file(cfg.output_dir, overlap, OVERLAP_COLUMNS, "overlap.csv"), selected
