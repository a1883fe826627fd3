import numpy as np
import pytest

from vreatlas.Errors import AlignmentError, InvalidInputError
from vreatlas.GridCore import (
    CategoricalGrid,
    GridSpec,
    Mask,
    NumericGrid,
    buffer_mask,
    cell_latitudes,
    compute_slope,
    ensure_aligned,
    resample_nearest,
)


def _spec(n_rows=8, n_cols=8, cell_size=1.0, **kwargs):
    return GridSpec(n_rows=n_rows, n_cols=n_cols, cell_size=cell_size, **kwargs)

def _plane(gradient, spec):
    x, _ = spec.cell_centers()
    return NumericGrid(spec=spec, values=x * gradient)


def test_flat_dem_has_zero_slope():
    spec = _spec()
    slope = compute_slope(NumericGrid(spec=spec, values=np.full(spec.shape, 100.0)))
    assert np.all(slope.values == 0.0)

@pytest.mark.parametrize("degrees, tolerance", [(45.0, 1e-9), (15.0, 1e-6)])
def test_slope_of_inclined_plane(degrees, tolerance):
    spec = _spec()
    slope = compute_slope(_plane(np.tan(np.radians(degrees)), spec))
    interior = slope.values[1:-1, 1:-1]
    assert np.allclose(interior, degrees, atol=tolerance)

def test_slope_ignores_constant_offset():
    spec = _spec(cell_size=30.0)
    rng = np.random.default_rng(7)
    dem = NumericGrid(spec=spec, values=rng.uniform(0.0, 200.0, spec.shape))
    raised = dem.replace(values=dem.values + 1234.5)
    assert np.allclose(compute_slope(dem).values, compute_slope(raised).values, atol=1e-9)

def test_slope_is_nodata_next_to_missing_elevation():
    spec = _spec()
    values = np.full(spec.shape, 10.0)
    values[4, 4] = -9999.0
    slope = compute_slope(NumericGrid(spec=spec, values=values))
    assert not slope.valid_mask()[3:6, 3:6].any()
    assert slope.valid_mask()[0, 0]


def test_buffer_zero_is_identity():
    spec = _spec(cell_size=100.0)
    values = np.zeros(spec.shape, dtype=bool)
    values[2, 3] = True
    m = Mask(spec=spec, values=values)
    assert np.array_equal(buffer_mask(m, 0.0).values, m.values)

def test_buffer_disk_matches_lattice_count():
    spec = _spec(n_rows=21, n_cols=21, cell_size=100.0)
    values = np.zeros(spec.shape, dtype=bool)
    values[10, 10] = True
    grown = buffer_mask(Mask(spec=spec, values=values), 350.0)
    dy, dx = np.mgrid[-10:11, -10:11]
    oracle = dx ** 2 + dy ** 2 <= 3.5 ** 2
    assert grown.count() == 37
    assert np.array_equal(grown.values, oracle)

def test_buffer_of_empty_mask_stays_empty():
    spec = _spec(cell_size=100.0)
    assert buffer_mask(Mask.full(spec), 2000.0).count() == 0

def test_negative_buffer_is_rejected():
    with pytest.raises(InvalidInputError):
        buffer_mask(Mask.full(_spec()), -1.0)


def test_resample_identity_returns_same_values():
    spec = _spec(n_rows=3, n_cols=4)
    grid = NumericGrid(spec=spec, values=np.arange(12.0).reshape(3, 4))
    assert np.array_equal(resample_nearest(grid, spec).values, grid.values)

def test_resample_upsamples_into_blocks():
    source = GridSpec(n_rows=2, n_cols=2, cell_size=2.0, origin_x=1.0, origin_y=1.0)
    target = GridSpec(n_rows=4, n_cols=4, cell_size=1.0, origin_x=0.5, origin_y=0.5)
    grid = CategoricalGrid(spec=source, values=[[1, 2], [3, 4]], legend={1: "a", 2: "b", 3: "c", 4: "d"})
    out = resample_nearest(grid, target)
    assert isinstance(out, CategoricalGrid)
    assert np.array_equal(out.values, np.kron([[1, 2], [3, 4]], np.ones((2, 2), dtype=int)))

def test_resample_to_disjoint_grid_fails():
    source = _spec(n_rows=2, n_cols=2)
    target = _spec(n_rows=2, n_cols=2, origin_x=1000.0, origin_y=1000.0)
    with pytest.raises(InvalidInputError):
        resample_nearest(NumericGrid(spec=source, values=np.ones((2, 2))), target)


def test_mask_algebra_and_area():
    spec = _spec(n_rows=2, n_cols=2, cell_size=10.0)
    a = Mask(spec=spec, values=[[True, True], [False, False]])
    b = Mask(spec=spec, values=[[True, False], [True, False]])
    assert (a | b).count() == 3
    assert (a & b).count() == 1
    assert (a - b).count() == 1
    assert (~a).count() == 2
    assert (a & b).issubset(a)
    assert a.area_m2() == pytest.approx(200.0)

def test_misaligned_masks_raise():
    a = Mask.full(_spec(n_rows=2, n_cols=2))
    b = Mask.full(_spec(n_rows=2, n_cols=3))
    with pytest.raises(AlignmentError):
        a | b
    with pytest.raises(AlignmentError):
        ensure_aligned(a, b)

def test_grid_values_are_read_only():
    grid = NumericGrid(spec=_spec(n_rows=1, n_cols=1), values=[[1.0]])
    with pytest.raises(ValueError):
        grid.values[0, 0] = 2.0

def test_cell_centers_put_row_zero_north():
    spec = GridSpec(n_rows=3, n_cols=2, cell_size=10.0, origin_x=5.0, origin_y=5.0)
    x, y = spec.cell_centers()
    assert x[0].tolist() == [5.0, 15.0]
    assert y[:, 0].tolist() == [25.0, 15.0, 5.0]

def test_unknown_crs_falls_back_to_latitude():
    lat = cell_latitudes(_spec(n_rows=2, n_cols=2, crs_label="not a crs"), 54.0)
    assert np.all(lat == 54.0)

def test_british_national_grid_latitudes_are_british():
    spec = GridSpec(n_rows=2, n_cols=2, cell_size=1000.0, origin_x=400000.0, origin_y=300000.0, crs_label="EPSG:27700")
    lat = cell_latitudes(spec, 0.0)
    assert np.all((lat > 49.0) & (lat < 61.0))
    assert lat[0, 0] > lat[1, 0]


@pytest.mark.parametrize("k", [0.5, 2.0, 10.0])
def test_vertical_scaling_scales_slope_tangent(k):
    rng = np.random.default_rng(3)
    for _ in range(10):
        spec = _spec(n_rows=16, n_cols=16, cell_size=30.0)
        dem = NumericGrid(spec=spec, values=rng.uniform(0.0, 200.0, spec.shape))
        base = np.tan(np.radians(compute_slope(dem).values))
        scaled = np.tan(np.radians(compute_slope(dem.replace(values=dem.values * k)).values))
        np.testing.assert_allclose(scaled, k * base, rtol=1e-9, atol=1e-12)

def _brute_force_buffer(values, radius_cells):
    rows, cols = np.nonzero(values)
    r, c = np.mgrid[0:values.shape[0], 0:values.shape[1]]
    d2 = (r[..., None] - rows) ** 2 + (c[..., None] - cols) ** 2
    return (d2 <= radius_cells ** 2).any(axis=-1)

def test_buffer_matches_all_pairs_distances():
    rng = np.random.default_rng(12)
    spec = _spec(n_rows=32, n_cols=32, cell_size=50.0)
    for _ in range(30):
        values = rng.uniform(size=spec.shape) < 0.03
        values[rng.integers(32), rng.integers(32)] = True
        m = Mask(spec=spec, values=values)
        radius = rng.uniform(0.0, 6.0)
        grown = buffer_mask(m, radius * spec.cell_size)
        assert np.array_equal(grown.values, _brute_force_buffer(values, radius))

def test_buffer_is_extensive_and_monotone():
    rng = np.random.default_rng(14)
    spec = _spec(n_rows=32, n_cols=32, cell_size=100.0)
    for _ in range(20):
        m = Mask(spec=spec, values=rng.uniform(size=spec.shape) < 0.05)
        d1, d2 = sorted(rng.uniform(0.0, 800.0, 2))
        near, far = buffer_mask(m, d1), buffer_mask(m, d2)
        assert m.issubset(near)
        assert near.issubset(far)

def test_resample_is_idempotent_onto_a_target():
    rng = np.random.default_rng(8)
    source = _spec(n_rows=10, n_cols=10, cell_size=1.0)
    target = GridSpec(n_rows=13, n_cols=9, cell_size=0.7, origin_x=0.35, origin_y=-0.4)
    grid = NumericGrid(spec=source, values=rng.uniform(0.0, 5.0, source.shape))
    once = resample_nearest(grid, target)
    twice = resample_nearest(once, target)
    assert once.spec == twice.spec == target
    assert np.array_equal(once.values, twice.values)
    assert not once.valid_mask().all()
