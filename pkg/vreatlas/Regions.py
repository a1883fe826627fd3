import logging
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from vreatlas.Errors import ConfigError, DataError, InvalidInputError
from vreatlas.GridCore import CategoricalGrid, Mask, ensure_aligned

LA_RESULT_COLUMNS = ["code", "name", "tech", "scenario_id", "energy_GWh", "energy_GWh_per_km2"]
REJECT_COLUMNS = ["record_index", "la_code", "postcode", "reason"]
DEVIATION_COLUMNS = ["code", "own", "external", "deviation", "flagged"]
SCENIC_CURVE_COLUMNS = ["code", "level", "n_sites", "cumulative_GWh", "mean_lcoe"]

# The two thresholds compared by the overlap selection rule
FULL_THRESHOLD = 10.0
SHRUNK_THRESHOLD = 5.80

class LARegion(BaseModel):
    """A Local Authority and its id in the region grid."""
    model_config = ConfigDict(frozen=True)

    code: str
    name: str
    area_km2: float = Field(gt=0)
    grid_id: int

    @field_validator("code")
    @classmethod
    def _nine_characters(cls, v: str) -> str:
        v = v.strip()
        if len(v) != 9:
            raise ValueError(f"LA code '{v}' is not 9 characters long")
        return v


class OverlapRow(BaseModel):
    code: str
    threshold: float
    wind_area_km2: float = Field(ge=0)
    pv_area_km2: float = Field(ge=0)
    intersection_km2: float = Field(ge=0)
    overlap_fraction: float = Field(ge=0, le=1)
    setting: Literal["urban", "rural", "unknown"]
    selected: bool


OVERLAP_COLUMNS = list(OverlapRow.model_fields)

def regions_from_table(la_table: pd.DataFrame) -> List[LARegion]:
    """LARegion objects from a code,name,area_km2[,grid_id] table; grid ids default to 1-based row order."""
    duplicated = la_table["code"][la_table["code"].duplicated()].unique().tolist()
    if duplicated:
        raise DataError(f"duplicate LA codes {duplicated}")
    grid_ids = la_table["grid_id"] if "grid_id" in la_table.columns else range(1, len(la_table) + 1)
    return [
        LARegion(code=str(code), name=str(name), area_km2=float(area), grid_id=int(gid))
        for code, name, area, gid in zip(la_table["code"], la_table["name"], la_table["area_km2"], grid_ids)
    ]

def _normalise_postcode(value) -> Optional[str]:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return None
    text = str(value).replace(" ", "").upper()
    return text or None

def _present(value) -> Optional[str]:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return None
    text = str(value).strip()
    return text or None

def link_records(la_table: pd.DataFrame, records: pd.DataFrame, postcode_lookup: pd.DataFrame) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Attaches an LA code to every planning record.

    Records are matched on their own LA code first and through the postcode
    lookup second. Unmatched records go to the rejects table with a reason:
    no_key, unknown_la_code or unknown_postcode.

    Parameters:
    - la_table (pd.DataFrame): code,name,area_km2.
    - records (pd.DataFrame): Planning records with optional la_code and postcode columns.
    - postcode_lookup (pd.DataFrame): postcode,la_code.

    Returns:
    - tuple: (matched records with la_code, la_name, match_method; rejects with REJECT_COLUMNS).
    """
    regions = {r.code: r for r in regions_from_table(la_table)}
    lookup = {
        _normalise_postcode(p): str(c).strip()
        for p, c in zip(postcode_lookup.get("postcode", []), postcode_lookup.get("la_code", []))
    }
    codes = records["la_code"] if "la_code" in records.columns else pd.Series([None] * len(records), index=records.index)
    postcodes = records["postcode"] if "postcode" in records.columns else pd.Series([None] * len(records), index=records.index)

    matched_index, matched_code, methods, rejects = [], [], [], []
    for position, (index, code, postcode) in enumerate(zip(records.index, codes, postcodes)):
        code = _present(code)
        postcode = _normalise_postcode(postcode)
        if code in regions:
            matched_index.append(index)
            matched_code.append(code)
            methods.append("la_code")
        elif postcode is not None and lookup.get(postcode) in regions:
            matched_index.append(index)
            matched_code.append(lookup[postcode])
            methods.append("postcode")
        else:
            if code is None and postcode is None:
                reason = "no_key"
            elif postcode is not None:
                reason = "unknown_postcode"
            else:
                reason = "unknown_la_code"
            rejects.append({"record_index": position, "la_code": code, "postcode": postcode, "reason": reason})

    matched = records.loc[matched_index].copy()
    matched["la_code"] = matched_code
    matched["la_name"] = [regions[c].name for c in matched_code]
    matched["match_method"] = methods
    if rejects:
        logging.warning(f"{len(rejects)} of {len(records)} record(s) could not be linked to an LA")
    return matched.reset_index(drop=True), pd.DataFrame(rejects, columns=REJECT_COLUMNS)

def _region_lookup(region_grid: CategoricalGrid, regions: Sequence[LARegion]) -> Dict[int, LARegion]:
    by_id = {r.grid_id: r for r in regions}
    present = np.unique(region_grid.values[region_grid.valid_mask()])
    unknown = sorted(int(v) for v in present if int(v) not in by_id)
    if unknown:
        raise DataError(f"region grid uses ids {unknown} that are not in the LA table")
    return by_id

def aggregate_to_la(
    energy: pd.DataFrame,
    region_grid: CategoricalGrid,
    regions: Sequence[LARegion],
    tech: str = "",
    scenario_id: int = 0,
    energy_column: str = "energy_kWh",
) -> pd.DataFrame:
    """
    Sums per-cell energy by Local Authority.

    Parameters:
    - energy (pd.DataFrame): cell_id (row-major index into region_grid) and energy_column in kWh.
    - region_grid (CategoricalGrid): Region id per cell.
    - regions (list): LARegion objects, one per id.
    - tech (str): Technology label for the output.
    - scenario_id (int): Scenario label for the output.

    Returns:
    - pd.DataFrame: LA_RESULT_COLUMNS, one row per region in table order.
    """
    by_id = _region_lookup(region_grid, regions)
    ids = region_grid.values.ravel()[energy["cell_id"].to_numpy(dtype=np.int64)]
    kwh = energy[energy_column].to_numpy(dtype=float)
    unassigned = ids == region_grid.nodata_sentinel
    if unassigned.any():
        logging.warning(f"{kwh[unassigned].sum() / 1e6:.3f} GWh on {int(unassigned.sum())} cell(s) outside every LA")
    totals = pd.Series(kwh[~unassigned]).groupby(ids[~unassigned]).sum()
    gwh = np.array([totals.get(r.grid_id, 0.0) for r in regions]) / 1e6
    return pd.DataFrame({
        "code": [r.code for r in regions],
        "name": [r.name for r in regions],
        "tech": tech,
        "scenario_id": scenario_id,
        "energy_GWh": gwh,
        "energy_GWh_per_km2": gwh / np.array([r.area_km2 for r in regions]),
    }, columns=LA_RESULT_COLUMNS)

def rural_urban_tags(region_grid: CategoricalGrid, land_cover: CategoricalGrid, regions: Sequence[LARegion]) -> Dict[str, str]:
    """
    "urban" when artificial surfaces (CORINE 1xx) cover more cells of a region than any other level-1 class.
    """
    ensure_aligned(region_grid, land_cover)
    _region_lookup(region_grid, regions)
    both = region_grid.valid_mask() & land_cover.valid_mask()
    counts = pd.crosstab(region_grid.values[both], land_cover.values[both] // 100)
    tags = {}
    for region in regions:
        if region.grid_id not in counts.index:
            tags[region.code] = "unknown"
            continue
        row = counts.loc[region.grid_id]
        artificial = int(row.get(1, 0))
        rest = row.drop(labels=[1], errors="ignore")
        others = int(rest.max()) if len(rest) else 0
        tags[region.code] = "urban" if artificial > others else "rural"
    return tags

def overlap_analysis(
    wind_masks: Dict[float, Mask],
    pv_mask: Mask,
    region_grid: CategoricalGrid,
    regions: Sequence[LARegion],
    land_cover: Optional[CategoricalGrid] = None,
    denominator: Literal["region", "wind"] = "region",
    shrink_limit: float = 0.8,
    min_fraction: float = 0.35,
) -> Tuple[pd.DataFrame, List[str]]:
    """
    Overlap of wind- and ground-PV-eligible land per region and scenicness threshold.

    The overlap fraction is the intersection area divided by the region's area
    on the grid (or by its wind-eligible area). A region is selected when its
    fraction at 5.80 is at most shrink_limit times the fraction at 10 and the
    fraction at 10 exceeds min_fraction.

    Parameters:
    - wind_masks (dict): Threshold -> wind-eligible mask.
    - pv_mask (Mask): Ground-PV-eligible mask.
    - region_grid (CategoricalGrid): Region id per cell.
    - regions (list): LARegion objects.
    - land_cover (CategoricalGrid): CORINE codes for the rural/urban tag.
    - denominator (str): "region" or "wind".

    Returns:
    - tuple: (table with OVERLAP_COLUMNS, selected region codes).
    """
    for needed in (FULL_THRESHOLD, SHRUNK_THRESHOLD):
        if needed not in wind_masks:
            raise ConfigError(f"overlap selection needs the {needed:g} threshold")
    ensure_aligned(pv_mask, region_grid, *wind_masks.values())
    by_id = _region_lookup(region_grid, regions)
    tags = rural_urban_tags(region_grid, land_cover, regions) if land_cover is not None else {}
    cell_km2 = region_grid.spec.cell_area / 1e6
    valid = region_grid.valid_mask()
    ids = region_grid.values[valid]
    id_order = [r.grid_id for r in regions]

    def per_region(values: np.ndarray) -> np.ndarray:
        counts = pd.Series(values[valid].astype(float)).groupby(ids).sum()
        return counts.reindex(id_order, fill_value=0.0).to_numpy() * cell_km2

    region_km2 = per_region(np.ones(region_grid.spec.shape, dtype=bool))
    pv_km2 = per_region(pv_mask.values)
    fractions: Dict[float, np.ndarray] = {}
    rows = []
    for threshold in sorted(wind_masks, reverse=True):
        wind_km2 = per_region(wind_masks[threshold].values)
        both_km2 = per_region(wind_masks[threshold].values & pv_mask.values)
        base = region_km2 if denominator == "region" else wind_km2
        with np.errstate(divide="ignore", invalid="ignore"):
            fractions[threshold] = np.where(base > 0, both_km2 / base, 0.0)
        for i, region in enumerate(regions):
            rows.append({
                "code": region.code,
                "threshold": threshold,
                "wind_area_km2": wind_km2[i],
                "pv_area_km2": pv_km2[i],
                "intersection_km2": both_km2[i],
                "overlap_fraction": min(1.0, float(fractions[threshold][i])),
                "setting": tags.get(region.code, "unknown"),
            })

    full, shrunk = fractions[FULL_THRESHOLD], fractions[SHRUNK_THRESHOLD]
    chosen = (shrunk <= shrink_limit * full) & (full > min_fraction)
    selected = [r.code for r, keep in zip(regions, chosen) if keep]
    for row in rows:
        row["selected"] = row["code"] in selected
    table = pd.DataFrame([OverlapRow(**row).model_dump() for row in rows], columns=OVERLAP_COLUMNS)
    logging.info(f"Overlap analysis: {len(selected)} of {len(by_id)} region(s) selected")
    return table, selected

def validation_compare(own: pd.DataFrame, external: pd.DataFrame, factor: float = 8.0) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Compares own rooftop results with an external study, region by region.

    deviation = own / (external * factor); regions with an external value of
    0 are flagged and left out of the summary.

    Parameters:
    - own (pd.DataFrame): code,value.
    - external (pd.DataFrame): code,value.
    - factor (float): Scaling applied to the external values, > 0.

    Returns:
    - tuple: (table with DEVIATION_COLUMNS, summary with mean, std, min, max).
    """
    if not factor > 0:
        raise InvalidInputError(f"scaling factor must be > 0, got {factor}")
    own_codes, external_codes = set(own["code"]), set(external["code"])
    if own_codes != external_codes:
        mismatch = sorted(own_codes ^ external_codes)
        raise DataError(f"region keys differ between own and external results: {mismatch}")
    merged = own[["code", "value"]].merge(external[["code", "value"]], on="code", suffixes=("_own", "_external"))
    flagged = merged["value_external"] == 0
    if flagged.any():
        logging.warning(f"External value is 0 for {merged.loc[flagged, 'code'].tolist()}; excluded from deviations")
    scaled = merged["value_external"].where(~flagged) * factor
    table = pd.DataFrame({
        "code": merged["code"],
        "own": merged["value_own"],
        "external": merged["value_external"],
        "deviation": merged["value_own"] / scaled,
        "flagged": flagged,
    }, columns=DEVIATION_COLUMNS)
    deviation = table.loc[~flagged, "deviation"]
    summary = pd.DataFrame(
        {"mean": [deviation.mean()], "std": [deviation.std(ddof=1)], "min": [deviation.min()], "max": [deviation.max()]},
        index=["deviation"],
    )
    return table, summary

def scenic_cost_curves(sites: pd.DataFrame, levels: Sequence[int] = tuple(range(3, 11)), weighting: Literal["site", "energy"] = "site") -> pd.DataFrame:
    """
    Cumulative energy and mean LCOE per region over sites at or below each scenicness level.

    Parameters:
    - sites (pd.DataFrame): code, scenicness, lcoe, energy_kWh per site.
    - levels (sequence): Integer scenicness levels.
    - weighting (str): "site" averages LCOE per site, "energy" weights it by energy.

    Returns:
    - pd.DataFrame: SCENIC_CURVE_COLUMNS.
    """
    usable = sites[np.isfinite(sites["lcoe"].astype(float))]
    rows = []
    for code, group in usable.groupby("code", sort=True):
        for level in levels:
            below = group[group["scenicness"] <= level]
            if below.empty:
                mean_lcoe = float("nan")
            elif weighting == "energy" and below["energy_kWh"].sum() > 0:
                mean_lcoe = float(np.average(below["lcoe"], weights=below["energy_kWh"]))
            else:
                mean_lcoe = float(below["lcoe"].mean())
            rows.append({
                "code": code,
                "level": level,
                "n_sites": len(below),
                "cumulative_GWh": float(below["energy_kWh"].sum()) / 1e6,
                "mean_lcoe": mean_lcoe,
            })
    return pd.DataFrame(rows, columns=SCENIC_CURVE_COLUMNS)

def select_scenic_regions(curves: pd.DataFrame, min_share: float = 0.01, level: int = 9, max_share: float = 0.98) -> List[str]:
    """
    Regions whose potential is large nationally yet sensitive to scenicness.

    A region qualifies when its full potential (highest level) holds at least
    min_share of the total over all regions and its potential at scenicness
    <= level is at most max_share of its full potential.
    """
    if curves.empty:
        return []
    top = curves["level"].max()
    full = curves[curves["level"] == top].set_index("code")["cumulative_GWh"]
    partial = curves[curves["level"] == level].set_index("code")["cumulative_GWh"].reindex(full.index, fill_value=0.0)
    total = full.sum()
    if total <= 0:
        return []
    keep = (full >= min_share * total) & (partial <= max_share * full)
    return sorted(full.index[keep].tolist())
