import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from f2narx.data import Dataset, TimeGrid
from f2narx.windowing import (
    assemble_first_window_training,
    assemble_recursive_training,
    geometry_from_n_T,
    make_geometry,
    segment,
)


def _ds(n, n_t, n_s=3, seed=0):
    rng = np.random.default_rng(seed)
    g = TimeGrid(0.0, 0.1, n_t)
    return Dataset(g, rng.standard_normal((n, n_s)), np.zeros((n, 0)), rng.standard_normal((n, n_t)),
                   rng.standard_normal((n, n_t)))


@pytest.mark.parametrize(
    "dt,n_t,T,n_T,n_W,overlap",
    [(0.004, 3001, 0.08, 20, 150, False), (0.005, 9001, 0.45, 90, 100, False), (0.1, 11, 0.3, 3, 4, True)],
)
def test_geometry_examples(dt, n_t, T, n_T, n_W, overlap):
    geo = make_geometry(T, TimeGrid(0.0, dt, n_t))
    assert (geo.n_T, geo.n_W, geo.overlap_last) == (n_T, n_W, overlap)


def test_overlap_windows():
    geo = geometry_from_n_T(3, TimeGrid(0.0, 0.1, 11))
    assert geo.index.tolist() == [[1, 2, 3], [4, 5, 6], [7, 8, 9], [8, 9, 10]]
    assert geo.n_overlap == 2


def test_geometry_errors_and_rounding_warning():
    g = TimeGrid(0.0, 0.1, 11)
    with pytest.raises(ValueError):
        make_geometry(0.01, g)
    with pytest.raises(ValueError):
        make_geometry(1.5, g)
    with pytest.warns(UserWarning):
        assert make_geometry(0.31, g).n_T == 3


def test_constant_response_rows():
    ds = _ds(1, 11)
    ds = Dataset(ds.grid, ds.theta, ds.phi, ds.excitation, np.full((1, 11), 5.0))
    wm = segment(ds, geometry_from_n_T(2, ds.grid))
    assert np.all(wm.Y_tilde == 5.0)


def test_partition_property_and_overlap_rows():
    ds = _ds(2, 13)
    wm = segment(ds, geometry_from_n_T(4, ds.grid))
    assert wm.U_tilde.shape == (6, 4)
    assert np.array_equal(wm.Y_tilde[3:6].ravel(), ds.response[1, 1:])
    ds11 = _ds(1, 11)
    wm = segment(ds11, geometry_from_n_T(3, ds11.grid))
    assert np.array_equal(wm.Y_tilde[2, 1:], wm.Y_tilde[3, :2])
    assert np.array_equal(wm.Y_tilde[2, 1:], ds11.response[0, 8:10])


def test_first_window_columns():
    ds = _ds(1, 11)
    geo = geometry_from_n_T(5, ds.grid)
    Fu = np.arange(4.0).reshape(2, 2)
    Fy = np.arange(6.0).reshape(2, 3)
    X0, Y0 = assemble_first_window_training(ds, geo, Fu, Fy)
    assert X0.shape == (1, 2 + 2 + 3)
    assert np.array_equal(X0[0], np.r_[Fu[0], ds.excitation[0, 0], ds.response[0, 0], ds.theta[0]])
    assert np.array_equal(Y0, Fy[:1])


def test_recursive_rows_and_degenerate_case():
    ds = _ds(2, 7)
    geo = geometry_from_n_T(2, ds.grid)  # n_W = 3
    Fu = np.arange(12.0).reshape(6, 2)
    Fy = 100 + np.arange(6.0).reshape(6, 1)
    X, Y = assemble_recursive_training(ds, geo, Fu, Fy)
    assert X.shape == (4, 2 * 2 + 1 + 3)
    # record 1, window 3: [Fu_3 | Fu_2 | Fy_2 | theta]
    assert np.array_equal(X[3], np.r_[Fu[5], Fu[4], Fy[4], ds.theta[1]])
    assert Y[3, 0] == Fy[5, 0]
    one = geometry_from_n_T(6, ds.grid)
    X, Y = assemble_recursive_training(ds, one, Fu[:2], Fy[:2])
    assert X.shape[0] == 0 and Y.shape[0] == 0


def test_misaligned_features():
    ds = _ds(2, 7)
    geo = geometry_from_n_T(2, ds.grid)
    with pytest.raises(ValueError):
        assemble_recursive_training(ds, geo, np.zeros((5, 2)), np.zeros((6, 1)))


def test_paper_row_count():
    n_W = 150
    assert 100 * (n_W - 1) == 14900


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 5), n_t=st.integers(3, 60), data=st.data())
def test_row_count_identities(n, n_t, data):
    n_T = data.draw(st.integers(1, n_t - 1))
    ds = _ds(n, n_t)
    geo = geometry_from_n_T(n_T, ds.grid)
    wm = segment(ds, geo)
    assert wm.Y_tilde.shape == (n * geo.n_W, n_T)
    rows = n * geo.n_W
    Fu, Fy = np.zeros((rows, 2)), np.zeros((rows, 1))
    assert assemble_first_window_training(ds, geo, Fu, Fy)[0].shape[0] == n
    assert assemble_recursive_training(ds, geo, Fu, Fy)[0].shape[0] == n * (geo.n_W - 1)
    covered = np.unique(geo.index)
    assert np.array_equal(covered, np.arange(1, n_t))
