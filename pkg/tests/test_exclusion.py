import numpy as np
import pytest

from vreatlas.Economics import ONSHORE_WIND
from vreatlas.Errors import ConfigError, DataError, DataQualityError, InvalidInputError
from vreatlas.Exclusion import (
    AgGradeGrid,
    Country,
    LayerRole,
    Polarity,
    ScenarioConfig,
    apply_scenario,
    attach_land_use,
    builtin_scenarios,
    compose_precedence,
    country_buffer_exclusion,
    effective_scenicness,
    geographic_potential,
    harmonize_ag_grade,
    harmonize_ag_grid,
    negatives_from_roles,
)
from vreatlas.GridCore import CategoricalGrid, GridSpec, Mask, NumericGrid, buffer_mask
from vreatlas.SolarGround import PvParams, pv_ground_potential
from vreatlas.Wind import default_turbine_db, wind_potential, yield_tables


def _spec(n=4, cell_size=100.0):
    return GridSpec(n_rows=n, n_cols=n, cell_size=cell_size)

def _mask(spec, values):
    return Mask(spec=spec, values=np.asarray(values, dtype=bool))

def _flat(spec):
    return NumericGrid(spec=spec, values=np.zeros(spec.shape))

def _no_grades(spec):
    return AgGradeGrid(spec=spec, values=np.full(spec.shape, -9999))

def _rated(spec, scenic):
    return NumericGrid(spec=spec, values=scenic), NumericGrid(spec=spec, values=np.full(spec.shape, 5.0))


@pytest.mark.parametrize("country, raw, unified", [
    (Country.ENGLAND, "3a", 3),
    (Country.ENGLAND, "3b", 3),
    (Country.WALES, "5", 5),
    (Country.SCOTLAND, "6", 5),
    (Country.SCOTLAND, "4", 3),
    (Country.SCOTLAND, "1", 1),
])
def test_harmonize_ag_grade(country, raw, unified):
    assert harmonize_ag_grade(country, raw) == unified

def test_unknown_grade_label_is_rejected():
    with pytest.raises(InvalidInputError):
        harmonize_ag_grade(Country.ENGLAND, "7")

def test_harmonize_ag_grid_uses_cell_country():
    spec = _spec(n=2)
    countries = CategoricalGrid(spec=spec, values=[[1, 1], [3, 3]], legend={1: "England", 3: "Scotland"})
    raw = CategoricalGrid(spec=spec, values=[[31, 5], [6, -9999]], legend={31: "3a", 5: "5", 6: "6"})
    ag = harmonize_ag_grid(raw, countries)
    assert ag.values.tolist() == [[3, 5], [5, -9999]]


def test_compose_precedence_truth_table():
    rng = np.random.default_rng(3)
    spec = _spec(n=32)
    osm_pos = rng.random(spec.shape) < 0.3
    osm_neg = (rng.random(spec.shape) < 0.3) & ~osm_pos
    clc_pos = rng.random(spec.shape) < 0.5
    out = compose_precedence(_mask(spec, osm_pos), _mask(spec, osm_neg), _mask(spec, clc_pos))
    oracle = np.zeros(spec.shape, dtype=bool)
    for r in range(32):
        for c in range(32):
            oracle[r, c] = (osm_pos[r, c] and not clc_pos[r, c]) or (clc_pos[r, c] and not osm_neg[r, c])
    assert np.array_equal(out.values, oracle)

def test_osm_negative_overrides_corine_positive():
    spec = _spec(n=1)
    out = compose_precedence(_mask(spec, [[False]]), _mask(spec, [[True]]), _mask(spec, [[True]]))
    assert not out.values[0, 0]

def test_osm_positive_alone_is_included():
    spec = _spec(n=1)
    out = compose_precedence(_mask(spec, [[True]]), _mask(spec, [[False]]), _mask(spec, [[False]]))
    assert out.values[0, 0]

def test_contradictory_osm_cells_are_reported():
    spec = _spec(n=2)
    both = _mask(spec, [[True, False], [False, False]])
    with pytest.raises(DataQualityError) as excinfo:
        compose_precedence(both, both, Mask.full(spec))
    assert excinfo.value.cells == [(0, 0)]
    assert excinfo.value.report()["cells"] == [[0, 0]]


def test_geographic_potential_without_exclusions_is_base():
    spec = _spec()
    base = _mask(spec, np.eye(4))
    assert np.array_equal(geographic_potential(base, [], _flat(spec), 15.0).values, base.values)

def test_slope_limit_is_inclusive():
    spec = GridSpec(n_rows=1, n_cols=2, cell_size=100.0)
    slope = NumericGrid(spec=spec, values=[[15.0, 15.01]])
    out = geographic_potential(Mask.full(spec, True), [], slope, 15.0)
    assert out.values.tolist() == [[True, False]]

def test_buffered_negative_matches_buffer_oracle():
    spec = _spec(n=61)
    point = np.zeros(spec.shape, dtype=bool)
    point[30, 30] = True
    negative = _mask(spec, point)
    out = geographic_potential(Mask.full(spec, True), [(negative, 2000.0)], _flat(spec), 20.0)
    assert np.array_equal(out.values, ~buffer_mask(negative, 2000.0).values)

def test_unknown_slope_is_excluded():
    spec = GridSpec(n_rows=1, n_cols=2, cell_size=100.0)
    slope = NumericGrid(spec=spec, values=[[0.0, -9999.0]])
    out = geographic_potential(Mask.full(spec, True), [], slope, 15.0)
    assert out.values.tolist() == [[True, False]]

def test_only_negative_roles_are_used():
    spec = _spec()
    kept = _mask(spec, np.eye(4))
    roles = [
        (kept, LayerRole(polarity=Polarity.NEGATIVE, buffer_distance=350.0)),
        (Mask.full(spec, True), LayerRole(polarity=Polarity.POSITIVE)),
    ]
    out = negatives_from_roles(roles)
    assert len(out) == 1
    assert out[0][0] is kept and out[0][1] == 350.0

def test_positive_role_cannot_carry_buffer():
    with pytest.raises(ValueError):
        LayerRole(polarity=Polarity.POSITIVE, buffer_distance=10.0)


def test_settlement_buffer_depends_on_country():
    spec = GridSpec(n_rows=1, n_cols=41, cell_size=100.0)
    settlements = np.zeros(spec.shape, dtype=bool)
    settlements[0, 20] = True
    codes = np.where(np.arange(41) < 20, 1, 3)[None, :]
    countries = CategoricalGrid(spec=spec, values=codes, legend={1: "England", 3: "Scotland"})
    excluded = country_buffer_exclusion(_mask(spec, settlements), countries).values[0]
    # England side: 350 m reaches 3 cells west; Scotland side: 2 km reaches 20 cells east
    assert excluded[17:20].all() and not excluded[16]
    assert excluded[20:41].all()

def test_attach_land_use_prefers_osm():
    spec = _spec(n=2)
    osm = CategoricalGrid(spec=spec, values=[[231, -9999], [-9999, -9999]], legend={231: "pastures"})
    clc = CategoricalGrid(spec=spec, values=[[211, 211], [311, 311]], legend={211: "arable", 311: "forest"})
    suitable = _mask(spec, [[True, True], [True, False]])
    out = attach_land_use(suitable, osm, clc)
    assert out.values.tolist() == [[231, 211], [311, -9999]]


def test_builtin_scenarios_table():
    scenarios = builtin_scenarios()
    assert sorted(scenarios) == list(range(1, 9))
    assert [scenarios[i].scenic_threshold for i in range(1, 5)] == [10.0, 5.80, 4.67, 3.67]
    assert scenarios[1].ag_excluded_grades == frozenset({1, 2, 3})
    assert scenarios[8].ag_excluded_grades == frozenset({1, 2})

def test_scenario_check_rejects_bad_threshold():
    with pytest.raises(ConfigError):
        ScenarioConfig(id=1, scenic_threshold=0.0).check()
    with pytest.raises(ConfigError):
        ScenarioConfig(id=1, scenic_threshold=5.0, ag_excluded_grades=frozenset({6})).check()

def test_threshold_ten_removes_nothing():
    spec = _spec()
    rng = np.random.default_rng(1)
    scenic, votes = _rated(spec, rng.uniform(1.0, 10.0, spec.shape))
    geo = Mask.full(spec, True)
    out = apply_scenario(geo, scenic, votes, _no_grades(spec), ScenarioConfig(id=1, scenic_threshold=10.0))
    assert out.count() == geo.count()

def test_threshold_is_inclusive():
    spec = GridSpec(n_rows=1, n_cols=2, cell_size=100.0)
    scenic, votes = _rated(spec, [[5.80, 5.81]])
    out = apply_scenario(Mask.full(spec, True), scenic, votes, _no_grades(spec), ScenarioConfig(id=2, scenic_threshold=5.80))
    assert out.values.tolist() == [[True, False]]

def test_excluded_grade_is_removed():
    spec = GridSpec(n_rows=1, n_cols=3, cell_size=100.0)
    scenic, votes = _rated(spec, np.full(spec.shape, 2.0))
    ag = AgGradeGrid(spec=spec, values=[[2, 3, -9999]])
    cfg = ScenarioConfig(id=5, scenic_threshold=10.0, ag_excluded_grades=frozenset({1, 2}))
    out = apply_scenario(Mask.full(spec, True), scenic, votes, ag, cfg)
    assert out.values.tolist() == [[False, True, True]]

def test_scenario_masks_shrink_with_threshold():
    spec = _spec(n=20)
    rng = np.random.default_rng(11)
    scenic, votes = _rated(spec, rng.uniform(1.0, 10.0, spec.shape))
    geo = _mask(spec, rng.random(spec.shape) < 0.7)
    masks = [
        apply_scenario(geo, scenic, votes, _no_grades(spec), ScenarioConfig(id=1, scenic_threshold=t))
        for t in (10.0, 5.80, 4.67, 3.67)
    ]
    for wider, narrower in zip(masks, masks[1:]):
        assert narrower.issubset(wider)


def test_effective_scenicness_fills_from_nearest_rated_cell():
    spec = GridSpec(n_rows=1, n_cols=4, cell_size=100.0)
    scenic = NumericGrid(spec=spec, values=[[2.0, 9.0, 9.0, 6.0]])
    votes = NumericGrid(spec=spec, values=[[3.0, 1.0, 0.0, 4.0]])
    out = effective_scenicness(scenic, votes)
    # cell 1 is closest to cell 0, cell 2 to cell 3
    assert out.values.tolist() == [[2.0, 2.0, 6.0, 6.0]]

def test_effective_scenicness_breaks_ties_by_cell_order():
    spec = GridSpec(n_rows=1, n_cols=3, cell_size=100.0)
    scenic = NumericGrid(spec=spec, values=[[4.0, 1.0, 8.0]])
    votes = NumericGrid(spec=spec, values=[[3.0, 0.0, 3.0]])
    assert effective_scenicness(scenic, votes).values[0, 1] == 4.0

def test_effective_scenicness_needs_a_rated_cell():
    spec = _spec(n=2)
    scenic = NumericGrid(spec=spec, values=np.full(spec.shape, 5.0))
    votes = NumericGrid(spec=spec, values=np.zeros(spec.shape))
    with pytest.raises(DataError):
        effective_scenicness(scenic, votes)


def test_compose_precedence_matches_cellwise_rule_on_random_instances():
    spec = _spec(n=32)
    for seed in range(100):
        rng = np.random.default_rng(seed)
        osm_pos = rng.random(spec.shape) < rng.uniform(0.0, 0.5)
        osm_neg = (rng.random(spec.shape) < rng.uniform(0.0, 0.5)) & ~osm_pos
        clc_pos = rng.random(spec.shape) < rng.uniform(0.0, 1.0)
        out = compose_precedence(_mask(spec, osm_pos), _mask(spec, osm_neg), _mask(spec, clc_pos))
        oracle = [
            [bool((osm_pos[r, c] and not clc_pos[r, c]) or (clc_pos[r, c] and not osm_neg[r, c])) for c in range(32)]
            for r in range(32)
        ]
        assert out.values.tolist() == oracle, f"seed {seed}"

def _within(points, radius_cells, shape):
    rows, cols = np.nonzero(points)
    r, c = np.mgrid[0:shape[0], 0:shape[1]]
    return (((r[..., None] - rows) ** 2 + (c[..., None] - cols) ** 2) <= radius_cells ** 2).any(axis=-1)

def test_geographic_potential_matches_cellwise_oracle():
    spec = _spec(n=32, cell_size=100.0)
    for seed in range(100):
        rng = np.random.default_rng(seed)
        base = rng.random(spec.shape) < 0.7
        negatives = [(rng.random(spec.shape) < 0.02, float(rng.choice([0.0, 150.0, 320.0, 500.0]))) for _ in range(rng.integers(0, 3))]
        slope_values = rng.uniform(0.0, 30.0, spec.shape)
        slope_values[rng.random(spec.shape) < 0.05] = -9999.0
        out = geographic_potential(
            _mask(spec, base), [(_mask(spec, m), d) for m, d in negatives], NumericGrid(spec=spec, values=slope_values), 15.0,
        )
        oracle = base & (slope_values != -9999.0) & (slope_values <= 15.0)
        for m, d in negatives:
            oracle &= ~_within(m, d / spec.cell_size, spec.shape)
        assert np.array_equal(out.values, oracle), f"seed {seed}"


def _random_site(seed, n=16):
    rng = np.random.default_rng(seed)
    spec = _spec(n=n, cell_size=1000.0)
    scenic = NumericGrid(spec=spec, values=rng.uniform(1.0, 10.0, spec.shape))
    votes_values = rng.integers(0, 8, spec.shape).astype(float)
    votes_values[0, 0] = 5.0
    votes = NumericGrid(spec=spec, values=votes_values)
    ag = AgGradeGrid(spec=spec, values=rng.integers(1, 6, spec.shape))
    geo = _mask(spec, rng.random(spec.shape) < 0.8)
    return rng, spec, geo, scenic, votes, ag

def test_potentials_never_grow_as_scenarios_tighten():
    db = default_turbine_db()
    tables = yield_tables(db)
    scenarios = builtin_scenarios()
    for seed in range(100):
        rng, spec, geo, scenic, votes, ag = _random_site(seed)
        v10 = NumericGrid(spec=spec, values=rng.uniform(4.0, 9.0, spec.shape))
        land = CategoricalGrid(spec=spec, values=np.full(spec.shape, 231), legend={231: "pasture"})
        wind = []
        for scenario_id in (1, 2, 3, 4):
            mask = apply_scenario(geo, scenic, votes, ag, scenarios[scenario_id].for_wind())
            wind.append(wind_potential(mask, v10, land, {231: 0.03}, db, ONSHORE_WIND, tables=tables)[1])
        for wider, narrower in zip(wind, wind[1:]):
            assert narrower <= wider * (1.0 + 1e-12), f"seed {seed}: wind {wind}"

        irradiance = NumericGrid(spec=spec, values=rng.uniform(90.0, 130.0, spec.shape))
        gain = NumericGrid(spec=spec, values=np.ones(spec.shape))
        pv = {}
        for grades in ({1, 2}, {1, 2, 3}):
            cfg = ScenarioConfig(id=5, scenic_threshold=10.0, ag_excluded_grades=frozenset(grades))
            mask = apply_scenario(geo, scenic, votes, ag, cfg.for_ground_pv())
            pv[len(grades)] = pv_ground_potential(mask, irradiance, PvParams(), gain)[1]
        assert pv[2] >= pv[3] * (1.0 - 1e-12), f"seed {seed}: pv {pv}"

def test_fewer_excluded_grades_keep_a_superset():
    for seed in range(20):
        _, spec, geo, scenic, votes, ag = _random_site(seed)
        loose = apply_scenario(geo, scenic, votes, ag, ScenarioConfig(id=5, scenic_threshold=5.8, ag_excluded_grades=frozenset({1, 2})))
        strict = apply_scenario(geo, scenic, votes, ag, ScenarioConfig(id=1, scenic_threshold=5.8, ag_excluded_grades=frozenset({1, 2, 3})))
        assert strict.issubset(loose)
