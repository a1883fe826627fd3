import logging
from enum import Enum
from typing import ClassVar, Dict, FrozenSet, Iterable, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.spatial import cKDTree

from vreatlas.Errors import ConfigError, DataError, DataQualityError, InvalidInputError
from vreatlas.GridCore import (
    CategoricalGrid,
    Mask,
    NumericGrid,
    _Grid,
    buffer_mask,
    ensure_aligned,
)

class LayerSource(str, Enum):
    OSM = "OSM"
    CORINE = "CORINE"
    PROTECTED = "PROTECTED"
    OTHER = "OTHER"


class Polarity(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


class Country(str, Enum):
    ENGLAND = "England"
    WALES = "Wales"
    SCOTLAND = "Scotland"


# Minimum distance from settlements for wind, by country (metres)
SETTLEMENT_BUFFER_M: Dict[Country, float] = {
    Country.ENGLAND: 350.0,
    Country.SCOTLAND: 2000.0,
    Country.WALES: 500.0,
}

class LayerRole(BaseModel):
    """How an exclusion layer enters the geographical potential."""
    model_config = ConfigDict(frozen=True)

    source: LayerSource = LayerSource.OTHER
    polarity: Polarity = Polarity.NEGATIVE
    buffer_distance: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _buffer_only_for_negatives(self):
        if self.polarity is Polarity.POSITIVE and self.buffer_distance > 0:
            raise ValueError("buffer_distance applies to negative layers only")
        return self


class AgGradeGrid(_Grid):
    """Unified agricultural grade (1 best .. 5 poorest) per cell."""
    DTYPE: ClassVar[type] = np.int64

    nodata_sentinel: int = -9999

    @model_validator(mode="after")
    def _check_grades(self):
        graded = self.values[self.values != self.nodata_sentinel]
        if graded.size and (graded.min() < 1 or graded.max() > 5):
            raise ValueError("unified grades must lie in 1..5")
        return self

    @property
    def unified_grade(self) -> np.ndarray:
        return self.values


class ScenarioConfig(BaseModel):
    """One row of the scenario table: scenicness ceiling plus excluded grades."""
    model_config = ConfigDict(frozen=True)

    id: int = Field(ge=1, le=8)
    scenic_threshold: float
    ag_excluded_grades: FrozenSet[int] = frozenset()
    label: str = ""
    wind: bool = True
    pv_ground: bool = True
    pv_roof: bool = True

    def check(self) -> None:
        if not (0.0 < self.scenic_threshold <= 10.0):
            raise ConfigError(
                f"scenario {self.id}: scenic_threshold {self.scenic_threshold} outside (0, 10]"
            )
        bad = sorted(g for g in self.ag_excluded_grades if g not in range(1, 6))
        if bad:
            raise ConfigError(f"scenario {self.id}: unknown agricultural grades {bad}")

    def for_wind(self) -> "ScenarioConfig":
        """Wind is filtered by scenicness only."""
        return self.model_copy(update={"ag_excluded_grades": frozenset()})

    def for_ground_pv(self) -> "ScenarioConfig":
        """Ground PV is filtered by agricultural grade only."""
        return self.model_copy(update={"scenic_threshold": 10.0})


_THRESHOLDS = {1: 10.0, 2: 5.80, 3: 4.67, 4: 3.67}
_THRESHOLD_LABELS = {1: "technical potential", 2: "75% scenicness", 3: "50% scenicness", 4: "25% scenicness"}

def builtin_scenarios() -> Dict[int, ScenarioConfig]:
    """
    The eight reference scenarios.

    Scenarios 1-4 exclude grades {1,2,3} (high restriction), 5-8 exclude
    {1,2} (low restriction); within each block the scenicness ceiling steps
    down 10, 5.80, 4.67, 3.67.
    """
    scenarios = {}
    for block, (grades, restriction) in enumerate([({1, 2, 3}, "high"), ({1, 2}, "low")]):
        for step, threshold in _THRESHOLDS.items():
            sid = block * 4 + step
            scenarios[sid] = ScenarioConfig(
                id=sid,
                scenic_threshold=threshold,
                ag_excluded_grades=frozenset(grades),
                label=f"{_THRESHOLD_LABELS[step]}, {restriction} agricultural restriction",
            )
    return scenarios

_ENGLAND_WALES_GRADES = {"1": 1, "2": 2, "3a": 3, "3b": 3, "4": 4, "5": 5}
_SCOTLAND_CLASSES = {"1": 1, "2": 2, "3": 3, "4": 3, "5": 4, "6": 5, "7": 5}

def harmonize_ag_grade(country: Country, raw_grade: str) -> int:
    """
    Maps a national agricultural grade label onto the unified 1..5 scale.

    Parameters:
    - country (Country): England, Wales or Scotland.
    - raw_grade (str): England/Wales 1, 2, 3a, 3b, 4, 5; Scotland 1..7.

    Returns:
    - int: Unified grade.
    """
    country = Country(country)
    table = _SCOTLAND_CLASSES if country is Country.SCOTLAND else _ENGLAND_WALES_GRADES
    label = str(raw_grade).strip().lower()
    if label not in table:
        raise InvalidInputError(f"'{raw_grade}' is not an agricultural grade label for {country.value}")
    return table[label]

def raw_grade_label(code: int) -> str:
    """Raster code to grade label; 31 and 32 encode subgrades 3a and 3b."""
    return {31: "3a", 32: "3b"}.get(int(code), str(int(code)))

def harmonize_ag_grid(raw: CategoricalGrid, countries: CategoricalGrid) -> AgGradeGrid:
    """
    Harmonises a raster of national grade codes cell by cell using each cell's country.

    Cells with no grade or no country stay nodata.
    """
    ensure_aligned(raw, countries)
    out = np.full(raw.spec.shape, -9999, dtype=np.int64)
    both = raw.valid_mask() & countries.valid_mask()
    pairs = np.unique(np.stack([countries.values[both], raw.values[both]], axis=1), axis=0)
    for country_code, grade_code in pairs:
        country = Country(countries.legend[int(country_code)])
        unified = harmonize_ag_grade(country, raw_grade_label(grade_code))
        out[both & (countries.values == country_code) & (raw.values == grade_code)] = unified
    return AgGradeGrid(spec=raw.spec, values=out)

def masks_from_categories(grid: CategoricalGrid, positive_codes: Iterable[int], negative_codes: Iterable[int]) -> Tuple[Mask, Mask]:
    """Splits a land-use raster into positive and negative masks; unlisted codes are neither."""
    return grid.isin(positive_codes), grid.isin(negative_codes)

def compose_precedence(osm_pos: Mask, osm_neg: Mask, clc_pos: Mask) -> Mask:
    """
    Combines OSM and CORINE suitability with OSM taking precedence.

    Returns (osm_pos - clc_pos) | (clc_pos - osm_neg): a cell is suitable when
    OSM calls it positive, or CORINE does and OSM does not call it negative.
    """
    ensure_aligned(osm_pos, osm_neg, clc_pos)
    clash = osm_pos.values & osm_neg.values
    if clash.any():
        cells = [(int(r), int(c)) for r, c in zip(*np.nonzero(clash))]
        raise DataQualityError(
            f"{len(cells)} cell(s) are both OSM-positive and OSM-negative, first: {cells[:10]}",
            cells=cells,
        )
    return (osm_pos - clc_pos) | (clc_pos - osm_neg)

def attach_land_use(suitable: Mask, osm: CategoricalGrid, clc: CategoricalGrid) -> CategoricalGrid:
    """
    Land-use category per suitable cell: the OSM code where OSM has one, the CORINE code otherwise.
    """
    ensure_aligned(suitable, osm, clc)
    codes = np.where(osm.valid_mask(), osm.values, clc.values)
    has_code = osm.valid_mask() | clc.valid_mask()
    codes = np.where(suitable.values & has_code, codes, clc.nodata_sentinel)
    legend = {**clc.legend, **osm.legend}
    return CategoricalGrid(spec=clc.spec, values=codes, legend=legend, nodata_sentinel=clc.nodata_sentinel)

def country_buffer_exclusion(settlements: Mask, countries: CategoricalGrid) -> Mask:
    """
    Cells too close to settlements, using the buffer distance of the cell's own country.
    """
    ensure_aligned(settlements, countries)
    excluded = np.zeros(settlements.spec.shape, dtype=bool)
    for code, label in countries.legend.items():
        try:
            distance = SETTLEMENT_BUFFER_M[Country(label)]
        except ValueError:
            logging.warning(f"No settlement buffer for country label '{label}'; cells left unbuffered")
            continue
        in_country = countries.values == code
        if in_country.any():
            excluded |= buffer_mask(settlements, distance).values & in_country
    return Mask(spec=settlements.spec, values=excluded)

def negatives_from_roles(layers: Sequence[Tuple[Mask, LayerRole]]) -> List[Tuple[Mask, float]]:
    """Negative layers with their buffer distances, ready for geographic_potential."""
    return [(mask, role.buffer_distance) for mask, role in layers if role.polarity is Polarity.NEGATIVE]

def geographic_potential(base: Mask, negatives: List[Tuple[Mask, float]], slope: NumericGrid, slope_limit: float) -> Mask:
    """
    Removes buffered negative layers and steep terrain from the base mask.

    Parameters:
    - base (Mask): Suitable area before exclusions.
    - negatives (list): (mask, buffer metres) pairs.
    - slope (NumericGrid): Slope in degrees.
    - slope_limit (float): Cells with slope strictly above this are excluded.

    Returns:
    - Mask: Geographical potential.
    """
    if slope_limit <= 0:
        raise InvalidInputError(f"slope_limit must be > 0, got {slope_limit}")
    ensure_aligned(base, slope, *[m for m, _ in negatives])
    result = base
    for mask, distance in negatives:
        result = result - buffer_mask(mask, distance)
    # unknown slope cannot be shown to be flat enough
    steep = ~slope.valid_mask() | (slope.values > slope_limit)
    return result - Mask(spec=base.spec, values=steep)

def effective_scenicness(scenic: NumericGrid, votes: NumericGrid, min_votes: int = 3) -> NumericGrid:
    """
    Scenicness where rated at least `min_votes` times, nearest rated value elsewhere.

    Distances are measured in cells; ties go to the lowest row-major cell index.
    """
    ensure_aligned(scenic, votes)
    rated = scenic.valid_mask() & votes.valid_mask() & (votes.values >= min_votes)
    if rated.all():
        return scenic
    if not rated.any():
        raise DataError(f"no cell has scenicness rated {min_votes} or more times")

    shape = scenic.spec.shape
    rated_idx = np.flatnonzero(rated.ravel())
    todo = np.flatnonzero(~rated.ravel())
    tree = cKDTree(np.column_stack(np.unravel_index(rated_idx, shape)).astype(float))
    queries = np.column_stack(np.unravel_index(todo, shape)).astype(float)

    k = min(8, rated_idx.size)
    while True:
        dist, nn = tree.query(queries, k=k)
        if k == 1:
            dist, nn = dist[:, None], nn[:, None]
        tied = dist == dist[:, :1]
        if k < rated_idx.size and tied[:, -1].any():
            k = min(2 * k, rated_idx.size)
            continue
        break
    candidates = np.where(tied, rated_idx[nn], np.iinfo(np.int64).max)
    source = candidates.min(axis=1)

    filled = scenic.values.copy().ravel()
    filled[todo] = scenic.values.ravel()[source]
    return scenic.replace(values=filled.reshape(shape))

def apply_scenario(geo: Mask, scenic: NumericGrid, votes: NumericGrid, ag: AgGradeGrid, cfg: ScenarioConfig) -> Mask:
    """
    Applies a scenario's scenicness ceiling and agricultural exclusions to a geographical potential.

    A cell survives when it is in `geo`, its effective scenicness is at most
    cfg.scenic_threshold and its unified grade is not excluded. Cells with no
    grade are never excluded by grade.
    """
    cfg.check()
    ensure_aligned(geo, scenic, votes, ag)
    keep = geo.values.copy()
    if cfg.scenic_threshold < 10.0:
        effective = effective_scenicness(scenic, votes)
        keep &= effective.values <= cfg.scenic_threshold
    if cfg.ag_excluded_grades:
        graded = ag.values != ag.nodata_sentinel
        keep &= ~(graded & np.isin(ag.values, list(cfg.ag_excluded_grades)))
    return Mask(spec=geo.spec, values=keep)
