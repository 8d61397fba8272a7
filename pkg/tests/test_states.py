import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repeater_dp.states import (
    BellDiagonalState,
    ClassGrid,
    StateClass,
    Unclassifiable,
    canonicalize,
    classify,
    shape_parameter,
)


def linear_scan_bin(x, edges):
    """Reference binning: half-open bins, last bin closed."""
    for b in range(len(edges) - 1):
        last = b == len(edges) - 2
        if edges[b] <= x < edges[b + 1] or (last and x == edges[b + 1]):
            return b
    return -1


populations = st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4).filter(lambda v: sum(v) > 1e-3)


def normalized(v):
    v = np.asarray(v, dtype=float)
    return v / v.sum()


@pytest.mark.parametrize("raw, expected", [
    ((0.1, 0.7, 0.1, 0.1), (0.7, 0.1, 0.1, 0.1)),
    ((1, 0, 0, 0), (1, 0, 0, 0)),
    ((0.25, 0.25, 0.25, 0.25), (0.25, 0.25, 0.25, 0.25)),
])
def test_canonicalize_examples(raw, expected):
    assert tuple(canonicalize(raw)) == pytest.approx(expected, abs=1e-15)


def test_canonicalize_rejects_negative_population():
    with pytest.raises(ValueError):
        canonicalize((1.1, -0.1, 0.0, 0.0))


def test_canonicalize_tolerates_tiny_negative_noise():
    s = canonicalize((0.5, 0.5 + 5e-13, -5e-13, 0.0))
    assert min(s) >= 0.0


def test_state_rejects_unnormalized():
    with pytest.raises(ValueError):
        BellDiagonalState(0.5, 0.2, 0.2, 0.2)


@given(populations)
def test_canonicalize_sorts_and_preserves_mass(v):
    s = canonicalize(normalized(v))
    assert s.is_canonical()
    assert sum(s) == pytest.approx(1.0, abs=1e-12)
    assert sorted(s, reverse=True) == pytest.approx(sorted(normalized(v), reverse=True), abs=1e-15)


@given(populations)
def test_canonicalize_is_idempotent(v):
    s = canonicalize(normalized(v))
    assert tuple(canonicalize(s)) == pytest.approx(tuple(s), abs=1e-15)


@pytest.mark.parametrize("F", [0.5, 0.7, 0.9, 0.999])
def test_shape_of_werner_is_one_third(F):
    assert shape_parameter(BellDiagonalState.werner(F)) == pytest.approx(1 / 3, abs=1e-14)


@pytest.mark.parametrize("F", [0.6, 0.95])
def test_shape_of_single_error_is_zero(F):
    assert shape_parameter(BellDiagonalState(F, 1 - F, 0.0, 0.0)) == 0.0


def test_shape_of_perfect_pair_is_zero():
    assert shape_parameter(BellDiagonalState.perfect()) == 0.0


@given(populations)
def test_shape_in_range(v):
    assert 0.0 <= shape_parameter(canonicalize(normalized(v))) <= 0.5


def test_classify_example_bins():
    grid = ClassGrid.uniform(q=50, shape_bins=8)
    s = BellDiagonalState.werner(0.95)
    assert classify(s, grid) == StateClass(45, 5)
    assert linear_scan_bin(0.95, grid.fidelity_edges) == 45
    assert linear_scan_bin(1 / 3, grid.shape_edges) == 5


def test_classify_edges():
    grid = ClassGrid.uniform(q=10, shape_bins=4)
    assert classify(BellDiagonalState.werner(0.5), grid).fidelity_bin == 0
    assert classify(BellDiagonalState.perfect(), grid).fidelity_bin == grid.q - 1


def test_classify_below_half_is_unclassifiable():
    with pytest.raises(Unclassifiable):
        classify(BellDiagonalState(0.4, 0.3, 0.2, 0.1), ClassGrid.uniform())


@settings(max_examples=300)
@given(populations, st.sampled_from(["uniform", "two_tier", "ragged"]))
def test_classify_matches_linear_scan(v, kind):
    if kind == "uniform":
        grid = ClassGrid.uniform(q=37, shape_bins=5)
    elif kind == "two_tier":
        grid = ClassGrid.two_tier(split=0.85, coarse=7, fine=30, shape_bins=3)
    else:
        grid = ClassGrid([0.5, 0.51, 0.8, 0.81, 0.99, 1.0], [0.0, 0.01, 0.3, 0.5])
    s = canonicalize(normalized(v))
    if s.f1 < 0.5:
        return
    got = classify(s, grid)
    assert got.fidelity_bin == linear_scan_bin(s.f1, grid.fidelity_edges)
    assert got.shape_bin == linear_scan_bin(shape_parameter(s), grid.shape_edges)


def test_classify_exact_bin_edges_fall_in_upper_bin():
    grid = ClassGrid.uniform(q=100, shape_bins=8)
    for b, lo in enumerate(grid.fidelity_edges[:-1]):
        f = float(lo)
        e = (1 - f) / 3
        got = classify(BellDiagonalState(f, e, e, 1 - f - 2 * e), grid).fidelity_bin
        assert got == linear_scan_bin(f, grid.fidelity_edges)


@pytest.mark.parametrize("fe, se", [
    ([0.5, 1.0], [0.0, 0.5]),
    ([0.5, 0.7, 0.7, 1.0], [0.0, 0.5]),
    ([0.4, 0.7, 1.0], [0.0, 0.5]),
    ([0.5, 0.7, 1.0], [0.0, 0.4]),
])
def test_grid_rejects_bad_edges(fe, se):
    with pytest.raises(ValueError):
        ClassGrid(fe, se)


def test_grid_flat_roundtrip():
    grid = ClassGrid.uniform(q=12, shape_bins=3)
    for idx in range(grid.n_classes):
        assert grid.flat(grid.unflat(idx)) == idx


def test_two_tier_resolution():
    grid = ClassGrid.two_tier(split=0.9, coarse=40, fine=100)
    assert grid.q == 140
    assert np.diff(grid.fidelity_edges)[-1] == pytest.approx(0.001)
    assert np.diff(grid.fidelity_edges)[0] == pytest.approx(0.01)
