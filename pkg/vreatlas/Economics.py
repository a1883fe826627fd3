import logging
from typing import Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from vreatlas.Errors import InvalidInputError, UndefinedLcoeError

class EconParams(BaseModel):
    """
    Economic assumptions of one technology.

    O&M is either a fixed yearly charge per kW (`per_kw_year`) or a
    charge per kWh generated (`per_kwh`).
    """
    model_config = ConfigDict(frozen=True)

    investment: float = Field(ge=0, description="I0 in GBP per kW")
    om: float = Field(default=0.0, ge=0)
    om_mode: Literal["per_kw_year", "per_kwh"] = "per_kw_year"
    lifetime: int = Field(default=20, ge=1)
    interest: float = Field(default=0.08, ge=0)
    label: str = ""


class CostCurvePoint(BaseModel):
    """One step of a cost-potential curve."""
    model_config = ConfigDict(frozen=True)

    cumulative_energy: float
    marginal_lcoe: float
    site_id: int


CURVE_COLUMNS = ["cumulative_TWh", "lcoe_GBP_per_kWh", "site_id"]

# Economic assumptions per technology; interest 8% reflects a private investor
GROUND_PV = EconParams(investment=500.0, om=8.0, om_mode="per_kw_year", label="pv_ground")
ROOFTOP_PV = EconParams(investment=1130.0, om=9.57, om_mode="per_kw_year", label="pv_roof")
ONSHORE_WIND = EconParams(investment=1050.0, om=0.02, om_mode="per_kwh", label="wind")

PRESETS = {p.label: p for p in (GROUND_PV, ROOFTOP_PV, ONSHORE_WIND)}

def annuity_factor(lifetime: int, interest: float) -> float:
    """Present value of one unit per year over `lifetime` years: sum of (1+i)^-t for t = 1..n."""
    if interest == 0:
        return float(lifetime)
    return (1.0 - (1.0 + interest) ** -lifetime) / interest

def lcoe(params: EconParams, annual_energy):
    """
    Levelized cost of electricity.

    LCOE = (I0 + sum M/(1+i)^t) / (sum E/(1+i)^t) with constant yearly M and E.
    Energy-proportional O&M is added as a flat per-kWh term.

    Parameters:
    - params (EconParams): Investment, O&M, lifetime and interest.
    - annual_energy (float or array): E in kWh per kW of capacity per year.

    Returns:
    - float or array: GBP per kWh.
    """
    E = np.asarray(annual_energy, dtype=float)
    if E.size and not (np.all(np.isfinite(E)) and np.all(E > 0)):
        raise UndefinedLcoeError(f"LCOE needs annual energy > 0, got {annual_energy}")
    af = annuity_factor(params.lifetime, params.interest)
    if params.om_mode == "per_kw_year":
        value = (params.investment + params.om * af) / (E * af)
    else:
        value = params.investment / (E * af) + params.om
    return value[()]

def full_load_hours(energy_kwh, capacity_kw):
    """Annual energy per kW of capacity; zero where there is no capacity."""
    energy = np.asarray(energy_kwh, dtype=float)
    capacity = np.asarray(capacity_kw, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(capacity > 0, energy / capacity, 0.0)[()]

def merit_order(energy, cost, site_ids=None) -> pd.DataFrame:
    """
    Cost-potential curve as a table: sites sorted by LCOE with cumulative energy.

    Sites without energy are dropped with a warning; equal LCOEs keep their
    input order.

    Parameters:
    - energy (array): Annual energy per site in TWh.
    - cost (array): LCOE per site in GBP/kWh.
    - site_ids (array): Identifier per site; defaults to the input position.

    Returns:
    - pd.DataFrame: CURVE_COLUMNS, LCOE non-decreasing.
    """
    energy = np.asarray(energy, dtype=float).ravel()
    cost = np.asarray(cost, dtype=float).ravel()
    ids = np.arange(energy.size, dtype=np.int64) if site_ids is None else np.asarray(site_ids).ravel().astype(np.int64)
    if not (energy.size == cost.size == ids.size):
        raise InvalidInputError(f"cost curve needs one energy, cost and id per site, got {energy.size}, {cost.size}, {ids.size}")
    if not np.all(np.isfinite(cost)):
        raise InvalidInputError("cost curve sites must have a finite LCOE")

    keep = energy > 0
    if not keep.all():
        logging.warning(f"Dropping {int((~keep).sum())} site(s) without energy from the cost curve")
        energy, cost, ids = energy[keep], cost[keep], ids[keep]

    order = np.argsort(cost, kind="stable")
    return pd.DataFrame(
        {
            "cumulative_TWh": np.cumsum(energy[order]),
            "lcoe_GBP_per_kWh": cost[order],
            "site_id": ids[order],
        },
        columns=CURVE_COLUMNS,
    )

def cost_curve(sites: Iterable[Tuple[float, float]], site_ids: Optional[Sequence[int]] = None) -> List[CostCurvePoint]:
    """
    Builds a cost-potential curve as a list of points.

    Parameters:
    - sites (iterable): (annual energy in TWh, LCOE in GBP/kWh) pairs.
    - site_ids (sequence): Identifier per site; defaults to the input position.

    Returns:
    - list: CostCurvePoint objects, LCOE non-decreasing.
    """
    sites = list(sites)
    if not sites:
        return []
    table = merit_order([s[0] for s in sites], [s[1] for s in sites], site_ids)
    return [
        CostCurvePoint(cumulative_energy=float(c), marginal_lcoe=float(l), site_id=int(i))
        for c, l, i in zip(table["cumulative_TWh"].tolist(), table["lcoe_GBP_per_kWh"].tolist(), table["site_id"].tolist())
    ]

def curve_frame(points: List[CostCurvePoint]) -> pd.DataFrame:
    """Cost curve as a table with CURVE_COLUMNS."""
    return pd.DataFrame(
        {
            "cumulative_TWh": [p.cumulative_energy for p in points],
            "lcoe_GBP_per_kWh": [p.marginal_lcoe for p in points],
            "site_id": [p.site_id for p in points],
        },
        columns=CURVE_COLUMNS,
    )

def site_lcoe(params: EconParams, energy_kwh, capacity_kw) -> np.ndarray:
    """LCOE per site from its annual energy and capacity; NaN where a site produces nothing."""
    flh = np.atleast_1d(full_load_hours(energy_kwh, capacity_kw)).astype(float)
    out = np.full(flh.shape, np.nan)
    producing = flh > 0
    if producing.any():
        out[producing] = lcoe(params, flh[producing])
    return out
