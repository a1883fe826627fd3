# Synthetic fixtures for trying out and testing vreatlas without the national datasets.
# Everything is drawn from numpy's default_rng(seed), so a seed fixes every file byte for byte.
import logging
import os
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
import yaml
from scipy import ndimage, stats
from scipy.special import expit

from vreatlas.GridCore import CategoricalGrid, GridSpec, Mask, NumericGrid
from vreatlas.HelperFunctions import write_csv_file
from vreatlas.Ingest import PLANNING_COLUMNS, write_ascii_grid, write_roof_model, write_turbine_db
from vreatlas.SolarRooftop import default_roof_model
from vreatlas.Statistics import LANDUSE_CATEGORIES, PlanningRecord
from vreatlas.Wind import default_roughness_table, default_turbine_db

CORINE_LEGEND = {
    111: "Continuous urban fabric",
    112: "Discontinuous urban fabric",
    121: "Industrial or commercial units",
    211: "Non-irrigated arable land",
    231: "Pastures",
    311: "Broad-leaved forest",
    321: "Natural grasslands",
    324: "Transitional woodland-shrub",
    512: "Water bodies",
}
COUNTRY_LEGEND = {1: "England", 2: "Wales", 3: "Scotland"}
FOOTPRINT_RATIOS = {111: 0.35, 112: 0.18, 121: 0.25}

def _smooth(rng: np.random.Generator, shape: Tuple[int, int], sigma: float) -> np.ndarray:
    """Smooth random field scaled to [0, 1]."""
    field = ndimage.gaussian_filter(rng.normal(size=shape), sigma=sigma, mode="reflect")
    return (field - field.min()) / (field.max() - field.min())

def synthetic_planning_records(
    n: int,
    seed: int = 42,
    alpha: float = 0.5,
    beta_scenic: float = -0.25,
    technology: str = "wind",
    years: Sequence[int] = (2010, 2011, 2012, 2013),
) -> List[PlanningRecord]:
    """
    Planning outcomes drawn from a logit in scenicness only: P(granted) = expit(alpha + beta_scenic * S).

    Size and distance covariates are drawn independently of the outcome.
    """
    rng = np.random.default_rng(seed)
    scenic = rng.uniform(1.0, 10.0, n)
    granted = rng.uniform(size=n) < expit(alpha + beta_scenic * scenic)
    distances = np.exp(rng.normal(9.0, 1.0, size=(n, 5)))
    return [
        PlanningRecord(
            technology=technology,
            year=int(rng.choice(years)),
            outcome=int(granted[i]),
            scenicness=float(scenic[i]),
            votes=int(rng.integers(3, 60)),
            n_turbines=int(rng.integers(1, 30)) if technology == "wind" else None,
            capacity_MW=float(rng.uniform(0.5, 80.0)),
            dist_np_m=float(distances[i, 0]),
            dist_airport_m=float(distances[i, 1]),
            dist_spa_m=float(distances[i, 2]),
            dist_sac_m=float(distances[i, 3]),
            dist_ramsar_m=float(distances[i, 4]),
        )
        for i in range(n)
    ]

def validation_fixture(n: int = 24, mean: float = 0.97, std: float = 0.30, seed: int = 42, factor: float = 8.0) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Own and external per-region rooftop results whose deviations have exactly the given mean and SD.

    Deviations are evenly spaced normal quantiles, standardised and shifted.
    """
    rng = np.random.default_rng(seed)
    z = stats.norm.ppf((np.arange(n) + 0.5) / n)
    z = (z - z.mean()) / z.std(ddof=1)
    deviation = rng.permutation(mean + std * z)
    codes = [f"E080000{i:02d}" for i in range(1, n + 1)]
    external = rng.uniform(50.0, 900.0, n)
    own = deviation * external * factor
    return pd.DataFrame({"code": codes, "value": own}), pd.DataFrame({"code": codes, "value": external})

def landuse_share_fixture(deviation: pd.Series, seed: int = 42) -> pd.DataFrame:
    """13-category land-use shares (percent, rows sum to 100) next to a deviation column."""
    rng = np.random.default_rng(seed)
    weights = rng.dirichlet(np.ones(len(LANDUSE_CATEGORIES)), size=len(deviation))
    shares = pd.DataFrame(weights * 100.0, columns=LANDUSE_CATEGORIES)
    shares.insert(0, "deviation", deviation.to_numpy())
    return shares

def make_sample(output_dir: str, seed: int = 42, n_rows: int = 60, n_cols: int = 60, cell_size: float = 1000.0) -> str:
    """
    Writes a complete synthetic study area and a config.yaml that runs it.

    Parameters:
    - output_dir (str): Directory for the fixture; created if missing.
    - seed (int): Random seed.
    - n_rows, n_cols (int): Grid size.
    - cell_size (float): Cell edge in metres.

    Returns:
    - str: Path of the written config.yaml.
    """
    rng = np.random.default_rng(seed)
    os.makedirs(output_dir, exist_ok=True)
    spec = GridSpec(n_rows=n_rows, n_cols=n_cols, cell_size=cell_size,
                    origin_x=350000.0, origin_y=250000.0, crs_label="EPSG:27700")
    shape = spec.shape
    rows, cols = np.indices(shape)

    relief = _smooth(rng, shape, sigma=4.0)
    dem = 20.0 + 900.0 * relief ** 2
    v10 = 4.0 + 4.5 * _smooth(rng, shape, sigma=6.0) + 1.5 * relief
    irradiance = 100.0 + 25.0 * (rows / max(n_rows - 1, 1)) + 2.0 * _smooth(rng, shape, sigma=5.0)

    urban = _smooth(rng, shape, sigma=3.0)
    cover_field = _smooth(rng, shape, sigma=5.0)
    land_cover = np.select(
        [urban > 0.85, urban > 0.75, urban > 0.72, cover_field < 0.12, cover_field < 0.4, cover_field < 0.6,
         cover_field < 0.75, cover_field < 0.9],
        [111, 112, 121, 512, 211, 231, 311, 321],
        default=324,
    )
    osm = np.where(urban > 0.7, 112, np.where((cover_field > 0.45) & (cover_field < 0.5), 231, -9999))

    countries = np.where(rows < n_rows // 3, 3, np.where(cols < n_cols // 4, 2, 1))
    grade_field = _smooth(rng, shape, sigma=3.0)
    england_codes = np.array([1, 2, 31, 32, 4, 5])
    scotland_codes = np.arange(1, 8)
    ag_raw = np.where(
        countries == 3,
        scotland_codes[np.minimum((grade_field * 7).astype(int), 6)],
        england_codes[np.minimum((grade_field * 6).astype(int), 5)],
    )
    ag_raw = np.where(land_cover == 211, ag_raw, np.where(land_cover == 231, ag_raw, -9999))

    protected = _smooth(rng, shape, sigma=4.0) > 0.85
    settlements = np.isin(land_cover, [111, 112])

    region_rows, region_cols = 2, 3
    regions = (rows * region_rows // n_rows) * region_cols + (cols * region_cols // n_cols) + 1
    la_codes = [f"E0600{i:04d}" for i in range(1, region_rows * region_cols + 1)]
    la_table = pd.DataFrame({
        "code": la_codes,
        "name": [f"Authority {chr(65 + i)}" for i in range(len(la_codes))],
        "area_km2": [float((regions == i + 1).sum()) * spec.cell_area / 1e6 for i in range(len(la_codes))],
        "grid_id": list(range(1, len(la_codes) + 1)),
    })

    grids = {
        "dem.asc": NumericGrid(spec=spec, values=dem),
        "wind_speed.asc": NumericGrid(spec=spec, values=v10),
        "irradiance.asc": NumericGrid(spec=spec, values=irradiance),
        "land_cover.asc": CategoricalGrid(spec=spec, values=land_cover, legend=CORINE_LEGEND),
        "osm.asc": CategoricalGrid(spec=spec, values=osm, legend={112: CORINE_LEGEND[112], 231: CORINE_LEGEND[231]}),
        "countries.asc": CategoricalGrid(spec=spec, values=countries, legend=COUNTRY_LEGEND),
        "ag_grades.asc": CategoricalGrid(spec=spec, values=ag_raw, legend={int(c): str(c) for c in np.unique(ag_raw) if c != -9999}),
        "protected.asc": Mask(spec=spec, values=protected),
        "settlements.asc": Mask(spec=spec, values=settlements),
        "regions.asc": CategoricalGrid(spec=spec, values=regions, legend={i + 1: c for i, c in enumerate(la_codes)}),
    }
    for name, grid in grids.items():
        write_ascii_grid(os.path.join(output_dir, name), grid)

    # scenic ratings: a few photos in most cells, none in the rest
    scenic_field = 1.0 + 9.0 * _smooth(rng, shape, sigma=4.0)
    x, y = spec.cell_centers()
    photographed = rng.uniform(size=shape) < 0.8
    n_photos = rng.integers(1, 4, size=shape) * photographed
    index = np.repeat(np.arange(n_rows * n_cols), n_photos.ravel())
    jitter = rng.uniform(-0.45, 0.45, size=(index.size, 2)) * cell_size
    points = pd.DataFrame({
        "x": x.ravel()[index] + jitter[:, 0],
        "y": y.ravel()[index] + jitter[:, 1],
        "value": np.clip(scenic_field.ravel()[index] + rng.normal(0.0, 0.3, index.size), 1.0, 10.0),
        "votes": rng.integers(1, 6, index.size),
    })
    write_csv_file(output_dir, points, ["x", "y", "value", "votes"], "scenic_points.csv")

    write_turbine_db(output_dir, default_turbine_db())
    roughness = pd.DataFrame(sorted(default_roughness_table().items()), columns=["category_code", "z0_m"])
    write_csv_file(output_dir, roughness, ["category_code", "z0_m"], "roughness.csv")
    write_roof_model(output_dir, default_roof_model())
    ratios = pd.DataFrame(sorted(FOOTPRINT_RATIOS.items()), columns=["category", "ratio"])
    write_csv_file(output_dir, ratios, ["category", "ratio"], "footprint_ratios.csv")
    write_csv_file(output_dir, la_table, ["code", "name", "area_km2", "grid_id"], "la_table.csv")

    records = synthetic_planning_records(300, seed) + synthetic_planning_records(200, seed + 1, 1.0, -0.02, "pv_ground")
    planning = pd.DataFrame([r.model_dump() for r in records]).rename(columns={"technology": "tech"})
    postcodes = [f"LS{i % 9 + 1} {i % 7 + 1}AB" for i in range(len(planning))]
    key_kind = rng.integers(0, 3, len(planning))
    planning["la_code"] = [la_codes[i % len(la_codes)] if k == 0 else "" for i, k in enumerate(key_kind)]
    planning["postcode"] = [postcodes[i] if k == 1 else "" for i, k in enumerate(key_kind)]
    write_csv_file(output_dir, planning, PLANNING_COLUMNS + ["la_code", "postcode"], "planning.csv")
    lookup = pd.DataFrame({
        "postcode": sorted(set(postcodes)),
        "la_code": [la_codes[i % len(la_codes)] for i in range(len(set(postcodes)))],
    })
    write_csv_file(output_dir, lookup, ["postcode", "la_code"], "postcodes.csv")

    own, external = validation_fixture(seed=seed)
    write_csv_file(output_dir, own, ["code", "value"], "rooftop_own.csv")
    write_csv_file(output_dir, external, ["code", "value"], "rooftop_external.csv")
    shares = landuse_share_fixture(own["value"] / (external["value"] * 8.0), seed)
    write_csv_file(output_dir, shares, ["deviation"] + LANDUSE_CATEGORIES, "landuse_shares.csv")

    config = {
        "output_dir": "results",
        "seed": seed,
        "layers": {
            "dem": "dem.asc",
            "wind_speed": "wind_speed.asc",
            "irradiance": "irradiance.asc",
            "land_cover": "land_cover.asc",
            "osm": "osm.asc",
            "countries": "countries.asc",
            "ag_grades": "ag_grades.asc",
            "protected": ["protected.asc"],
            "settlements": "settlements.asc",
            "regions": "regions.asc",
            "scenic_points": "scenic_points.csv",
            "la_table": "la_table.csv",
            "turbines": "turbines.csv",
            "turbine_curves": "turbine_curves.csv",
            "roughness": "roughness.csv",
            "roof_model": "roof_model.csv",
            "footprint_ratios": "footprint_ratios.csv",
        },
        "country_legend": COUNTRY_LEGEND,
        "planning": "planning.csv",
        "postcodes": "postcodes.csv",
        "own_results": "rooftop_own.csv",
        "external_results": "rooftop_external.csv",
        "landuse_shares": "landuse_shares.csv",
    }
    config_path = os.path.join(output_dir, "config.yaml")
    with open(config_path, "w", encoding="utf-8", newline="\n") as f:
        yaml.safe_dump(config, f, sort_keys=False)
    logging.info(f"Sample fixture written to {os.path.abspath(output_dir)}")
    return config_path
