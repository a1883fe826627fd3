"""Readers and writers for every file the pipeline consumes or emits."""

import logging
import os
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from vreatlas.Economics import CURVE_COLUMNS
from vreatlas.Errors import ConfigError, DataError, MissingLayerError, UnreadableInputError
from vreatlas.Exclusion import ScenarioConfig
from vreatlas.GridCore import NODATA, CategoricalGrid, GridSpec, Mask, NumericGrid
from vreatlas.HelperFunctions import parse_code_list, write_csv_file
from vreatlas.SolarRooftop import RoofClass, RoofClassModel
from vreatlas.Statistics import PlanningRecord
from vreatlas.Wind import TurbineSpec

T = TypeVar("T")

TURBINE_COLUMNS = ["name", "rated_kW", "rotor_m", "hub_heights_semicolon_list", "cut_in", "cut_out",
                   "invest_GBP_per_kW", "om_GBP_per_kWh"]
CURVE_POINT_COLUMNS = ["name", "speed", "power"]
PLANNING_COLUMNS = ["tech", "year", "outcome", "scenicness", "votes", "n_turbines", "capacity_MW",
                    "dist_np_m", "dist_airport_m", "dist_spa_m", "dist_sac_m", "dist_ramsar_m"]
ROOF_MODEL_COLUMNS = ["azimuth_sector", "tilt_band_deg", "p", "irr"]

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "xllcenter", "yllcenter", "cellsize", "nodata_value")

def require_file(path: str) -> str:
    if not path or not os.path.exists(path):
        raise MissingLayerError(f"input file not found: {path}", path=str(path))
    return path

def _validated(path: str, build: Callable[[], T]) -> T:
    """Runs a pydantic constructor and reports validation failures against the file."""
    try:
        return build()
    except ValidationError as e:
        raise DataError(f"{path}: {e.errors()[0]['msg']} ({e.error_count()} problem(s))") from e

def read_table(path: str, columns: Sequence[str] = ()) -> pd.DataFrame:
    """Reads a CSV file and checks that the given columns exist."""
    require_file(path)
    try:
        df = pd.read_csv(path, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"{path}: cannot parse CSV ({e})") from e
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise DataError(f"{path}: missing column(s) {missing}")
    return df

# ---------------------------------------------------------------- grids

def read_ascii_grid(
    path: str,
    kind: Literal["numeric", "categorical", "mask"] = "numeric",
    legend: Optional[Dict[int, str]] = None,
    crs_label: Optional[str] = None,
):
    """
    Reads an ESRI ASCII grid.

    Both xllcorner/yllcorner and xllcenter/yllcenter headers are accepted.
    A sibling .prj file, if present, supplies the CRS label.

    Parameters:
    - path (str): The .asc file.
    - kind (str): numeric, categorical or mask (non-zero valid cells are True).
    - legend (dict): Code -> label for categorical grids; defaults to the codes themselves.
    - crs_label (str): Overrides the .prj content.

    Returns:
    - NumericGrid, CategoricalGrid or Mask.
    """
    require_file(path)
    header: Dict[str, float] = {}
    try:
        with open(path, "r", encoding="utf-8", errors="strict") as f:
            for line in f:
                parts = line.split()
                if len(parts) != 2 or parts[0].lower() not in _HEADER_KEYS:
                    break
                header[parts[0].lower()] = float(parts[1])
    except UnicodeDecodeError as e:
        raise UnreadableInputError(f"{path}: not a UTF-8 text grid ({e})", cause=type(e).__name__) from e
    except ValueError as e:
        raise DataError(f"{path}: malformed header value ({e})") from e
    for key in ("ncols", "nrows", "cellsize"):
        if key not in header:
            raise DataError(f"{path}: header lacks '{key}'")
    cs = header["cellsize"]
    if "xllcenter" in header:
        ox, oy = header["xllcenter"], header["yllcenter"]
    elif "xllcorner" in header:
        ox, oy = header["xllcorner"] + cs / 2.0, header["yllcorner"] + cs / 2.0
    else:
        raise DataError(f"{path}: header lacks the lower-left corner or centre")
    nodata = header.get("nodata_value", NODATA)

    if crs_label is None:
        prj = os.path.splitext(path)[0] + ".prj"
        crs_label = ""
        if os.path.exists(prj):
            try:
                with open(prj, "r", encoding="utf-8", errors="strict") as f:
                    crs_label = f.read().strip()
            except UnicodeDecodeError as e:
                raise UnreadableInputError(f"{prj}: not a UTF-8 projection file ({e})", cause=type(e).__name__) from e
    spec = _validated(path, lambda: GridSpec(
        n_rows=int(header["nrows"]), n_cols=int(header["ncols"]), cell_size=cs,
        origin_x=ox, origin_y=oy, crs_label=crs_label,
    ))
    try:
        values = np.loadtxt(path, skiprows=len(header), dtype=float, ndmin=2)
    except ValueError as e:
        raise DataError(f"{path}: non-numeric cell values ({e})") from e
    if values.shape != spec.shape:
        raise DataError(f"{path}: data block is {values.shape}, header says {spec.shape}")

    if kind == "mask":
        return Mask(spec=spec, values=(values != nodata) & (values != 0))
    if kind == "categorical":
        codes = np.where(values == nodata, NODATA, values).astype(np.int64)
        if legend is None:
            legend = {int(c): str(int(c)) for c in np.unique(codes[codes != int(NODATA)])}
        return _validated(path, lambda: CategoricalGrid(spec=spec, values=codes, legend=legend))
    return NumericGrid(spec=spec, values=np.where(values == nodata, NODATA, values))

def write_ascii_grid(path: str, grid) -> str:
    """Writes any grid as ESRI ASCII with a corner-referenced header."""
    spec = grid.spec
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    if isinstance(grid, NumericGrid):
        values, fmt, nodata = np.where(grid.valid_mask(), grid.values, NODATA), "%.6g", NODATA
    else:
        values, fmt, nodata = grid.values.astype(np.int64), "%d", NODATA
    header = "\n".join([
        f"ncols {spec.n_cols}",
        f"nrows {spec.n_rows}",
        f"xllcorner {spec.origin_x - spec.cell_size / 2.0:.6f}",
        f"yllcorner {spec.origin_y - spec.cell_size / 2.0:.6f}",
        f"cellsize {spec.cell_size:.6f}",
        f"NODATA_value {nodata:g}",
    ])
    np.savetxt(path, values, fmt=fmt, header=header, comments="", newline="\n")
    if spec.crs_label:
        with open(os.path.splitext(path)[0] + ".prj", "w", encoding="utf-8", newline="\n") as f:
            f.write(spec.crs_label + "\n")
    return path

def rasterize_points(points: Union[str, pd.DataFrame], spec: GridSpec) -> Tuple[NumericGrid, NumericGrid]:
    """
    Grids point ratings: the mean value and the summed votes of the points in each cell.

    Parameters:
    - points (str or pd.DataFrame): Columns x, y, value and optionally votes (1 per point otherwise).
    - spec (GridSpec): Target grid.

    Returns:
    - tuple: (value grid with nodata where no point falls, votes grid with 0 there).
    """
    df = read_table(points, ["x", "y", "value"]) if isinstance(points, str) else points
    votes = df["votes"].to_numpy(dtype=float) if "votes" in df.columns else np.ones(len(df))
    col = np.floor((df["x"].to_numpy(dtype=float) - spec.origin_x) / spec.cell_size + 0.5).astype(np.int64)
    row = spec.n_rows - 1 - np.floor((df["y"].to_numpy(dtype=float) - spec.origin_y) / spec.cell_size + 0.5).astype(np.int64)
    inside = (col >= 0) & (col < spec.n_cols) & (row >= 0) & (row < spec.n_rows)
    if (~inside).any():
        logging.warning(f"{int((~inside).sum())} point(s) fall outside the grid and are ignored")
    cell = row[inside] * spec.n_cols + col[inside]
    grouped = pd.DataFrame({"cell": cell, "value": df["value"].to_numpy(dtype=float)[inside], "votes": votes[inside]}).groupby("cell")

    value_grid = np.full(spec.n_rows * spec.n_cols, NODATA)
    vote_grid = np.zeros(spec.n_rows * spec.n_cols)
    means, sums = grouped["value"].mean(), grouped["votes"].sum()
    value_grid[means.index.to_numpy()] = means.to_numpy()
    vote_grid[sums.index.to_numpy()] = sums.to_numpy()
    return (
        NumericGrid(spec=spec, values=value_grid.reshape(spec.shape)),
        NumericGrid(spec=spec, values=vote_grid.reshape(spec.shape)),
    )

# ---------------------------------------------------------------- technology tables

def read_turbine_db(db_path: str, curve_path: str) -> List[TurbineSpec]:
    """Turbine database plus its companion power-curve table."""
    db = read_table(db_path, TURBINE_COLUMNS)
    curves = read_table(curve_path, CURVE_POINT_COLUMNS).sort_values(["name", "speed"], kind="stable")
    by_name = {name: group for name, group in curves.groupby("name")}
    turbines = []
    for row in db.itertuples(index=False):
        if row.name not in by_name:
            raise DataError(f"{curve_path}: no power curve for turbine '{row.name}'")
        points = tuple(zip(by_name[row.name]["speed"].astype(float), by_name[row.name]["power"].astype(float)))
        turbines.append(_validated(db_path, lambda: TurbineSpec(
            name=str(row.name),
            rated_power=row.rated_kW,
            rotor_diameter=row.rotor_m,
            hub_heights=tuple(float(h) for h in str(row.hub_heights_semicolon_list).split(";") if h.strip()),
            power_curve=points,
            cut_in=row.cut_in,
            cut_out=row.cut_out,
            investment=row.invest_GBP_per_kW,
            om_variable=row.om_GBP_per_kWh,
        )))
    if not turbines:
        raise ConfigError(f"{db_path}: turbine database is empty")
    return turbines

def write_turbine_db(output_dir: str, db: Sequence[TurbineSpec], db_file: str = "turbines.csv", curve_file: str = "turbine_curves.csv") -> Tuple[str, str]:
    table = pd.DataFrame([{
        "name": t.name,
        "rated_kW": t.rated_power,
        "rotor_m": t.rotor_diameter,
        "hub_heights_semicolon_list": ";".join(f"{h:g}" for h in t.hub_heights),
        "cut_in": t.cut_in,
        "cut_out": t.cut_out,
        "invest_GBP_per_kW": t.investment,
        "om_GBP_per_kWh": t.om_variable,
    } for t in db])
    points = pd.DataFrame([{"name": t.name, "speed": v, "power": p} for t in db for v, p in t.power_curve])
    return (
        write_csv_file(output_dir, table, TURBINE_COLUMNS, db_file),
        write_csv_file(output_dir, points, CURVE_POINT_COLUMNS, curve_file),
    )

def read_roughness_table(path: str) -> Dict[int, float]:
    df = read_table(path, ["category_code", "z0_m"])
    bad = df[(df["z0_m"] <= 0) | (df["z0_m"] >= 10)]
    if not bad.empty:
        raise DataError(f"{path}: roughness outside (0, 10) m for categories {bad['category_code'].tolist()}")
    return {int(c): float(z) for c, z in zip(df["category_code"], df["z0_m"])}

def read_roof_model(path: str) -> RoofClassModel:
    """72-class roof model; proportions must already sum to 1."""
    df = read_table(path, ROOF_MODEL_COLUMNS)
    return _validated(path, lambda: RoofClassModel(classes=tuple(
        RoofClass(azimuth_sector=str(r.azimuth_sector), tilt_band_deg=int(r.tilt_band_deg), p=float(r.p), irr=float(r.irr))
        for r in df.itertuples(index=False)
    )))

def write_roof_model(output_dir: str, model: RoofClassModel, output_file: str = "roof_model.csv") -> str:
    table = pd.DataFrame([c.model_dump() for c in model.classes])
    # proportions are checked to 1e-9 on load, so they need full precision
    return write_csv_file(output_dir, table, ROOF_MODEL_COLUMNS, output_file, float_format="%.17g")

def read_footprint_ratios(path: str) -> Dict[int, float]:
    df = read_table(path, ["category", "ratio"])
    bad = df[(df["ratio"] < 0) | (df["ratio"] > 1)]
    if not bad.empty:
        raise DataError(f"{path}: footprint ratios outside [0, 1] for categories {bad['category'].tolist()}")
    return {int(c): float(r) for c, r in zip(df["category"], df["ratio"])}

# ---------------------------------------------------------------- planning and regions

def read_planning_table(path: str) -> pd.DataFrame:
    return read_table(path, PLANNING_COLUMNS)

def planning_records(df: pd.DataFrame, source: str = "<table>") -> List[PlanningRecord]:
    """Validated PlanningRecord objects from a planning table."""
    records = []
    for position, row in enumerate(df[PLANNING_COLUMNS].itertuples(index=False)):
        n_turbines = None if pd.isna(row.n_turbines) else int(row.n_turbines)
        records.append(_validated(f"{source} row {position + 1}", lambda: PlanningRecord(
            technology=row.tech, year=int(row.year), outcome=int(row.outcome), scenicness=row.scenicness,
            votes=int(row.votes), n_turbines=n_turbines, capacity_MW=row.capacity_MW,
            dist_np_m=row.dist_np_m, dist_airport_m=row.dist_airport_m, dist_spa_m=row.dist_spa_m,
            dist_sac_m=row.dist_sac_m, dist_ramsar_m=row.dist_ramsar_m,
        )))
    return records

def read_planning_records(path: str) -> List[PlanningRecord]:
    return planning_records(read_planning_table(path), path)

def read_la_table(path: str) -> pd.DataFrame:
    df = read_table(path, ["code", "name", "area_km2"])
    df["code"] = df["code"].astype(str).str.strip()
    return df

def read_postcode_lookup(path: str) -> pd.DataFrame:
    return read_table(path, ["postcode", "la_code"])

def read_region_values(path: str) -> pd.DataFrame:
    """code,value table of per-region results."""
    return read_table(path, ["code", "value"])

# ---------------------------------------------------------------- scenarios and curves

_BOOL_WORDS = {"true": True, "yes": True, "1": True, "on": True, "false": False, "no": False, "0": False, "off": False}

def load_scenario_file(path: str) -> ScenarioConfig:
    """
    Reads a key=value scenario file.

    Keys: id, scenic_threshold, ag_excluded_grades (comma list), label and
    the wind, pv_ground, pv_roof switches. Blank lines and # comments are
    ignored.
    """
    require_file(path)
    fields: Dict[str, object] = {}
    try:
        with open(path, "r", encoding="utf-8", errors="strict") as f:
            lines = f.readlines()
    except UnicodeDecodeError as e:
        raise ConfigError(f"{path}: scenario files must be UTF-8 text ({e})") from e
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{number}: expected key=value, got '{line}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "ag_excluded_grades":
            try:
                fields[key] = parse_code_list(value)
            except ValueError as e:
                raise ConfigError(f"{path}:{number}: {e}") from e
        elif key in ("wind", "pv_ground", "pv_roof"):
            if value.lower() not in _BOOL_WORDS:
                raise ConfigError(f"{path}:{number}: '{value}' is not a yes/no value")
            fields[key] = _BOOL_WORDS[value.lower()]
        elif key in ("id", "scenic_threshold", "label"):
            fields[key] = value
        else:
            raise ConfigError(f"{path}:{number}: unknown key '{key}'")
    try:
        cfg = ScenarioConfig(**fields)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e.errors()[0]['loc'][0]}: {e.errors()[0]['msg']}") from e
    cfg.check()
    return cfg

def read_cost_curve(path: str) -> pd.DataFrame:
    """
    Cost-curve CSV; neither column may decrease.

    Equal neighbouring cumulative values are accepted since the written
    file keeps six significant digits.
    """
    df = read_table(path, CURVE_COLUMNS)
    cumulative = df["cumulative_TWh"].to_numpy(dtype=float)
    cost = df["lcoe_GBP_per_kWh"].to_numpy(dtype=float)
    if np.any(np.diff(cumulative) < 0):
        raise DataError(f"{path}: cumulative_TWh decreases")
    if np.any(np.diff(cost) < 0):
        raise DataError(f"{path}: lcoe_GBP_per_kWh decreases")
    return df
