import numpy as np
import pandas as pd
import pytest

from vreatlas.Errors import ConfigError, DataError, InvalidInputError
from vreatlas.Exclusion import AgGradeGrid, ScenarioConfig, apply_scenario
from vreatlas.GridCore import CategoricalGrid, GridSpec, Mask, NumericGrid
from vreatlas.Regions import (
    LA_RESULT_COLUMNS,
    LARegion,
    aggregate_to_la,
    link_records,
    overlap_analysis,
    regions_from_table,
    rural_urban_tags,
    scenic_cost_curves,
    select_scenic_regions,
    validation_compare,
)
from vreatlas.Sample import validation_fixture

LA_TABLE = pd.DataFrame({
    "code": ["E06000001", "E06000002"],
    "name": ["Hartlepool", "Middlesbrough"],
    "area_km2": [0.5, 0.5],
})
LOOKUP = pd.DataFrame({"postcode": ["TS24 7AA", "TS1 2AB"], "la_code": ["E06000001", "E06000002"]})


def _region_grid(spec, values):
    return CategoricalGrid(spec=spec, values=values, legend={1: "E06000001", 2: "E06000002"})

def _halves(n=10):
    spec = GridSpec(n_rows=n, n_cols=n, cell_size=100.0)
    values = np.where(np.arange(n)[None, :] < n // 2, 1, 2) * np.ones((n, 1), dtype=int)
    return spec, _region_grid(spec, values)

def _first_cells(spec, count):
    values = np.zeros(spec.n_rows * spec.n_cols, dtype=bool)
    values[:count] = True
    return Mask(spec=spec, values=values.reshape(spec.shape))


def test_la_code_must_have_nine_characters():
    with pytest.raises(ValueError):
        LARegion(code="E0600001", name="x", area_km2=1.0, grid_id=1)

def test_duplicate_la_codes_are_rejected():
    with pytest.raises(DataError):
        regions_from_table(pd.concat([LA_TABLE, LA_TABLE]))


def test_link_records_directly_and_through_postcodes():
    records = pd.DataFrame({
        "la_code": ["E06000002", None, None, "W06000099"],
        "postcode": [None, "ts24 7aa", None, None],
    })
    matched, rejects = link_records(LA_TABLE, records, LOOKUP)
    assert matched["la_code"].tolist() == ["E06000002", "E06000001"]
    assert matched["match_method"].tolist() == ["la_code", "postcode"]
    assert matched["la_name"].tolist() == ["Middlesbrough", "Hartlepool"]
    assert rejects["record_index"].tolist() == [2, 3]
    assert rejects["reason"].tolist() == ["no_key", "unknown_la_code"]

def test_unknown_postcode_is_rejected():
    records = pd.DataFrame({"postcode": ["ZZ9 9ZZ"]})
    matched, rejects = link_records(LA_TABLE, records, LOOKUP)
    assert matched.empty
    assert rejects["reason"].tolist() == ["unknown_postcode"]


def test_single_region_holds_all_energy():
    spec = GridSpec(n_rows=2, n_cols=2, cell_size=500.0)
    grid = CategoricalGrid(spec=spec, values=np.ones((2, 2), dtype=int), legend={1: "E06000001"})
    regions = [LARegion(code="E06000001", name="Hartlepool", area_km2=1.0, grid_id=1)]
    energy = pd.DataFrame({"cell_id": [0, 1, 3], "energy_kWh": [1e6, 2e6, 3e6]})
    out = aggregate_to_la(energy, grid, regions, tech="wind", scenario_id=1)
    assert list(out.columns) == LA_RESULT_COLUMNS
    assert out.loc[0, "energy_GWh"] == pytest.approx(6.0)
    assert out.loc[0, "energy_GWh_per_km2"] == pytest.approx(6.0)

def test_energy_follows_region_ids():
    spec, grid = _halves()
    regions = regions_from_table(LA_TABLE)
    left = [r * 10 + c for r in range(10) for c in range(5)]
    energy = pd.DataFrame({"cell_id": left, "energy_kWh": np.full(len(left), 2e4)})
    out = aggregate_to_la(energy, grid, regions)
    assert out["energy_GWh"].tolist() == pytest.approx([1.0, 0.0])

def test_aggregation_conserves_energy():
    spec, grid = _halves()
    rng = np.random.default_rng(5)
    energy = pd.DataFrame({"cell_id": np.arange(100), "energy_kWh": rng.uniform(0.0, 1e5, 100)})
    out = aggregate_to_la(energy, grid, regions_from_table(LA_TABLE))
    assert out["energy_GWh"].sum() == pytest.approx(energy["energy_kWh"].sum() / 1e6)

def test_aggregation_is_additive_over_disjoint_tables():
    spec, grid = _halves()
    regions = regions_from_table(LA_TABLE)
    rng = np.random.default_rng(15)
    for _ in range(20):
        cells = rng.permutation(100)[: rng.integers(2, 100)]
        split = rng.integers(1, cells.size)
        energy = pd.DataFrame({"cell_id": cells, "energy_kWh": rng.uniform(0.0, 1e5, cells.size)})
        first = aggregate_to_la(energy.iloc[:split], grid, regions)
        second = aggregate_to_la(energy.iloc[split:], grid, regions)
        union = aggregate_to_la(energy, grid, regions)
        np.testing.assert_allclose(first["energy_GWh"] + second["energy_GWh"], union["energy_GWh"], rtol=1e-12)

def test_region_id_missing_from_table_is_an_error():
    spec = GridSpec(n_rows=1, n_cols=1, cell_size=100.0)
    grid = CategoricalGrid(spec=spec, values=[[7]], legend={7: "E06000007"})
    with pytest.raises(DataError):
        aggregate_to_la(pd.DataFrame({"cell_id": [0], "energy_kWh": [1.0]}), grid, regions_from_table(LA_TABLE))


def test_rural_urban_tags_need_strict_plurality():
    spec = GridSpec(n_rows=2, n_cols=2, cell_size=100.0)
    grid = _region_grid(spec, [[1, 1], [2, 2]])
    cover = CategoricalGrid(spec=spec, values=[[111, 112], [111, 211]], legend={111: "a", 112: "b", 211: "c"})
    assert rural_urban_tags(grid, cover, regions_from_table(LA_TABLE)) == {"E06000001": "urban", "E06000002": "rural"}


def test_disjoint_masks_do_not_overlap():
    spec, grid = _halves()
    left = Mask(spec=spec, values=grid.values == 1)
    table, selected = overlap_analysis({10.0: left, 5.80: left}, ~left, grid, regions_from_table(LA_TABLE))
    assert (table["overlap_fraction"] == 0.0).all()
    assert selected == []

def test_identical_full_masks_overlap_completely_but_do_not_shrink():
    spec = GridSpec(n_rows=10, n_cols=10, cell_size=100.0)
    grid = CategoricalGrid(spec=spec, values=np.ones(spec.shape, dtype=int), legend={1: "E06000001"})
    regions = [LARegion(code="E06000001", name="Hartlepool", area_km2=1.0, grid_id=1)]
    full = Mask.full(spec, True)
    table, selected = overlap_analysis({10.0: full, 5.80: full}, full, grid, regions)
    assert (table["overlap_fraction"] == 1.0).all()
    assert selected == []

def test_shrinking_overlap_selects_the_region():
    spec = GridSpec(n_rows=10, n_cols=10, cell_size=100.0)
    grid = CategoricalGrid(spec=spec, values=np.ones(spec.shape, dtype=int), legend={1: "E06000001"})
    regions = [LARegion(code="E06000001", name="Hartlepool", area_km2=1.0, grid_id=1)]
    wind = {10.0: _first_cells(spec, 40), 5.80: _first_cells(spec, 30), 4.67: _first_cells(spec, 20)}
    table, selected = overlap_analysis(wind, Mask.full(spec, True), grid, regions)
    assert selected == ["E06000001"]
    fractions = table.set_index("threshold")["overlap_fraction"]
    assert fractions[10.0] == pytest.approx(0.4)
    assert fractions[5.80] == pytest.approx(0.3)
    assert table["selected"].all()

def test_overlap_against_wind_area():
    spec = GridSpec(n_rows=10, n_cols=10, cell_size=100.0)
    grid = CategoricalGrid(spec=spec, values=np.ones(spec.shape, dtype=int), legend={1: "E06000001"})
    regions = [LARegion(code="E06000001", name="Hartlepool", area_km2=1.0, grid_id=1)]
    wind = {10.0: _first_cells(spec, 40), 5.80: _first_cells(spec, 30)}
    table, _ = overlap_analysis(wind, _first_cells(spec, 20), grid, regions, denominator="wind")
    assert table.set_index("threshold")["overlap_fraction"][10.0] == pytest.approx(0.5)

def test_overlap_fraction_grows_with_the_scenic_threshold():
    spec, grid = _halves(20)
    regions = regions_from_table(LA_TABLE)
    no_grades = AgGradeGrid(spec=spec, values=np.full(spec.shape, -9999))
    votes = NumericGrid(spec=spec, values=np.full(spec.shape, 5.0))
    for seed in range(20):
        rng = np.random.default_rng(seed)
        scenic = NumericGrid(spec=spec, values=rng.uniform(1.0, 10.0, spec.shape))
        geo = Mask(spec=spec, values=rng.random(spec.shape) < 0.8)
        wind = {
            t: apply_scenario(geo, scenic, votes, no_grades, ScenarioConfig(id=1, scenic_threshold=t))
            for t in (10.0, 5.80, 4.67, 3.67)
        }
        pv = Mask(spec=spec, values=rng.random(spec.shape) < 0.6)
        table, _ = overlap_analysis(wind, pv, grid, regions)
        for _, rows in table.groupby("code"):
            fractions = rows.sort_values("threshold")["overlap_fraction"].to_numpy()
            assert np.all(np.diff(fractions) >= 0.0), f"seed {seed}"

def test_overlap_needs_both_selection_thresholds():
    spec, grid = _halves()
    with pytest.raises(ConfigError):
        overlap_analysis({10.0: Mask.full(spec)}, Mask.full(spec), grid, regions_from_table(LA_TABLE))


def test_own_equal_to_scaled_external_has_unit_deviation():
    own = pd.DataFrame({"code": ["A", "B"], "value": [80.0, 16.0]})
    external = pd.DataFrame({"code": ["B", "A"], "value": [2.0, 10.0]})
    table, summary = validation_compare(own, external, factor=8.0)
    assert table["deviation"].tolist() == pytest.approx([1.0, 1.0])
    assert summary.loc["deviation", "mean"] == pytest.approx(1.0)

def test_unscaled_comparison():
    own = pd.DataFrame({"code": ["A"], "value": [40.0]})
    external = pd.DataFrame({"code": ["A"], "value": [10.0]})
    table, _ = validation_compare(own, external, factor=1.0)
    assert table.loc[0, "deviation"] == pytest.approx(4.0)

def test_zero_external_value_is_flagged():
    own = pd.DataFrame({"code": ["A", "B"], "value": [8.0, 5.0]})
    external = pd.DataFrame({"code": ["A", "B"], "value": [1.0, 0.0]})
    table, summary = validation_compare(own, external)
    assert table["flagged"].tolist() == [False, True]
    assert np.isnan(table.loc[1, "deviation"])
    assert summary.loc["deviation", "max"] == pytest.approx(1.0)

def test_validation_fixture_statistics():
    own, external = validation_fixture()
    _, summary = validation_compare(own, external, factor=8.0)
    assert summary.loc["deviation", "mean"] == pytest.approx(0.97, abs=0.01)
    assert summary.loc["deviation", "std"] == pytest.approx(0.30, abs=0.01)

def test_validation_rejects_bad_inputs():
    own = pd.DataFrame({"code": ["A"], "value": [1.0]})
    with pytest.raises(InvalidInputError):
        validation_compare(own, own, factor=0.0)
    with pytest.raises(DataError):
        validation_compare(own, pd.DataFrame({"code": ["B"], "value": [1.0]}))


SITES = pd.DataFrame({
    "code": ["A", "A", "A", "B"],
    "scenicness": [2.0, 4.5, 9.0, 3.0],
    "lcoe": [0.05, 0.07, 0.09, np.inf],
    "energy_kWh": [1e6, 3e6, 1e6, 5e6],
})

def test_scenic_cost_curves_accumulate_by_level():
    curves = scenic_cost_curves(SITES, levels=(3, 5, 10))
    a = curves[curves["code"] == "A"].set_index("level")
    assert a["n_sites"].tolist() == [1, 2, 3]
    assert a["cumulative_GWh"].tolist() == pytest.approx([1.0, 4.0, 5.0])
    assert a.loc[5, "mean_lcoe"] == pytest.approx(0.06)
    # sites without a finite cost are dropped
    assert "B" not in set(curves["code"])

def test_energy_weighted_scenic_curve():
    curves = scenic_cost_curves(SITES, levels=(5,), weighting="energy")
    assert curves.loc[0, "mean_lcoe"] == pytest.approx(0.065)

def test_select_scenic_regions():
    curves = pd.DataFrame({
        "code": ["A", "A", "B", "B"],
        "level": [9, 10, 9, 10],
        "n_sites": [1, 2, 1, 1],
        "cumulative_GWh": [1.0, 5.0, 3.0, 3.0],
        "mean_lcoe": [0.05, 0.06, 0.05, 0.05],
    })
    assert select_scenic_regions(curves) == ["A"]
    assert select_scenic_regions(curves.iloc[0:0]) == []
