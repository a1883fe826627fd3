import math

import numpy as np
import pytest

from vreatlas.Economics import (
    CURVE_COLUMNS,
    GROUND_PV,
    ONSHORE_WIND,
    PRESETS,
    ROOFTOP_PV,
    EconParams,
    annuity_factor,
    cost_curve,
    curve_frame,
    merit_order,
    full_load_hours,
    lcoe,
    site_lcoe,
)
from vreatlas.Errors import InvalidInputError, UndefinedLcoeError


def test_annuity_factor_20_years_8_percent():
    assert annuity_factor(20, 0.08) == pytest.approx(9.8181, abs=1e-4)

def test_annuity_factor_without_interest_counts_years():
    assert annuity_factor(20, 0.0) == 20.0

def test_ground_pv_reference_lcoe():
    assert float(lcoe(GROUND_PV, 982.0)) == pytest.approx(0.0600, abs=5e-4)

def test_wind_reference_lcoe():
    expected = 1050.0 / (annuity_factor(20, 0.08) * 2500.0) + 0.02
    assert float(lcoe(ONSHORE_WIND, 2500.0)) == pytest.approx(expected, rel=1e-12)
    assert float(lcoe(ONSHORE_WIND, 2500.0)) == pytest.approx(0.0628, abs=1e-4)

def test_undiscounted_single_year():
    params = EconParams(investment=100.0, om=0.0, lifetime=1, interest=0.0)
    assert float(lcoe(params, 100.0)) == pytest.approx(1.00)

def test_presets_are_keyed_by_technology():
    assert PRESETS == {"pv_ground": GROUND_PV, "pv_roof": ROOFTOP_PV, "wind": ONSHORE_WIND}
    assert ROOFTOP_PV.investment == 1130.0 and ROOFTOP_PV.om == 9.57

@pytest.mark.parametrize("energy", [0.0, -5.0, math.nan])
def test_lcoe_needs_positive_energy(energy):
    with pytest.raises(UndefinedLcoeError):
        lcoe(GROUND_PV, energy)

def test_lcoe_monotone_in_energy_and_investment():
    rng = np.random.default_rng(5)
    for _ in range(50):
        investment = rng.uniform(100.0, 3000.0)
        params = EconParams(investment=investment, om=rng.uniform(0.0, 30.0), interest=rng.uniform(0.0, 0.15))
        e1, e2 = sorted(rng.uniform(200.0, 4000.0, 2))
        assert lcoe(params, e1) > lcoe(params, e2)
        dearer = params.model_copy(update={"investment": investment * 1.5})
        assert lcoe(dearer, e1) > lcoe(params, e1)

def test_lcoe_is_vectorised():
    values = lcoe(GROUND_PV, np.array([900.0, 1000.0]))
    assert values.shape == (2,)
    assert values[0] > values[1]


def test_empty_cost_curve():
    assert cost_curve([]) == []
    assert list(curve_frame([]).columns) == CURVE_COLUMNS

def test_cost_curve_sorts_and_accumulates():
    sites = [(2.0, 0.09), (1.0, 0.05), (3.0, 0.07)]
    points = cost_curve(sites, site_ids=[10, 11, 12])
    assert [p.marginal_lcoe for p in points] == [0.05, 0.07, 0.09]
    assert [p.site_id for p in points] == [11, 12, 10]
    assert [p.cumulative_energy for p in points] == pytest.approx([1.0, 4.0, 6.0])

def test_cost_curve_total_matches_sum():
    rng = np.random.default_rng(9)
    energy = rng.uniform(0.0001, 2.0, 500)
    points = cost_curve(zip(energy, rng.uniform(0.03, 0.2, 500)))
    assert points[-1].cumulative_energy == pytest.approx(energy.sum(), rel=1e-12)
    assert all(a.marginal_lcoe <= b.marginal_lcoe for a, b in zip(points, points[1:]))

def test_equal_costs_keep_input_order():
    points = cost_curve([(1.0, 0.05), (1.0, 0.05)], site_ids=[7, 3])
    assert [p.site_id for p in points] == [7, 3]

def test_sites_without_energy_are_dropped():
    points = cost_curve([(0.0, 0.05), (1.0, 0.06)])
    assert [p.site_id for p in points] == [1]

def test_infinite_cost_is_rejected():
    with pytest.raises(InvalidInputError):
        cost_curve([(1.0, math.inf)])


def test_merit_order_matches_point_list():
    rng = np.random.default_rng(21)
    energy = rng.uniform(0.0, 2.0, 300)
    energy[::17] = 0.0
    cost = np.round(rng.uniform(0.03, 0.2, 300), 3)
    ids = rng.permutation(300) + 1000
    table = merit_order(energy, cost, ids)
    points = cost_curve(zip(energy, cost), site_ids=ids)
    assert list(table.columns) == CURVE_COLUMNS
    assert table["site_id"].tolist() == [p.site_id for p in points]
    assert table["cumulative_TWh"].tolist() == [p.cumulative_energy for p in points]
    assert curve_frame(points).equals(table)

def test_merit_order_of_no_sites():
    table = merit_order([], [])
    assert table.empty
    assert list(table.columns) == CURVE_COLUMNS

def test_merit_order_needs_one_cost_per_site():
    with pytest.raises(InvalidInputError):
        merit_order([1.0, 2.0], [0.05])

@pytest.mark.parametrize("scale", [0.01, 1.17, 100.0])
def test_lcoe_scales_with_currency(scale):
    rng = np.random.default_rng(13)
    energy = rng.uniform(300.0, 4000.0, 20)
    for params in (GROUND_PV, ROOFTOP_PV, ONSHORE_WIND):
        rescaled = params.model_copy(update={"investment": params.investment * scale, "om": params.om * scale})
        np.testing.assert_allclose(lcoe(rescaled, energy), scale * lcoe(params, energy), rtol=1e-12)

def test_lcoe_without_interest_spreads_investment_evenly():
    for n in (1, 10, 25):
        params = EconParams(investment=1200.0, om=15.0, lifetime=n, interest=0.0)
        assert float(lcoe(params, 1500.0)) == pytest.approx((1200.0 / n + 15.0) / 1500.0, rel=1e-12)
        nearly = params.model_copy(update={"interest": 1e-9})
        assert float(lcoe(nearly, 1500.0)) == pytest.approx(float(lcoe(params, 1500.0)), rel=1e-6)


def test_full_load_hours_and_site_lcoe():
    energy = np.array([9820.0, 0.0, 500.0])
    capacity = np.array([10.0, 5.0, 0.0])
    assert full_load_hours(energy, capacity).tolist() == [982.0, 0.0, 0.0]
    costs = site_lcoe(GROUND_PV, energy, capacity)
    assert costs[0] == pytest.approx(float(lcoe(GROUND_PV, 982.0)))
    assert np.isnan(costs[1:]).all()
