import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from transmission_hjb.errors import ConfigurationError
from transmission_hjb.geometry import (
    Annulus,
    Box,
    Grid,
    GridFunction,
    Region,
    build_grid_1d,
    build_grid_2d,
    build_grid_radial,
    is_on_interface_row,
)

B, E, I, Br = Region.BOUNDARY, Region.EIKONAL, Region.INTERFACE, Region.BROWNIAN


def test_five_node_interval_tags():
    g = build_grid_1d(-1, 1, 0, 0.5)
    assert g.shape == (5,)
    assert list(g.tags) == [B, E, I, Br, B]
    np.testing.assert_allclose(g.axis(0), [-1, -0.5, 0, 0.5, 1])


def test_too_coarse_interval_rejected():
    with pytest.raises(ConfigurationError, match="fewer than 2"):
        build_grid_1d(-1, 1, 0, 1.0)


def test_interface_index_on_shifted_interval():
    g = build_grid_1d(0, 3, 1, 0.5)
    assert g.size == 7
    assert int(np.flatnonzero(g.tags == I)[0]) == 2


def test_incommensurate_spacing_names_ratio():
    with pytest.raises(ConfigurationError, match="interface_pos - a"):
        build_grid_1d(-1, 1, 0, 0.3)


def test_brownian_side_left():
    g = build_grid_1d(-1, 1, 0, 0.5, brownian_side="left")
    assert list(g.tags) == [B, Br, I, E, B]
    assert g.normal_sign == -1


def test_slab_enumeration():
    g = build_grid_2d(Box(-1, 1, -1, 1), 0.0, 0.5)
    assert g.size == 25
    row = is_on_interface_row(g)
    assert row.sum() == 5
    # the two ends of the interface row sit on the outer boundary
    assert np.count_nonzero(g.tags == I) == 3
    assert np.all(g.tags[row] != E) and np.all(g.tags[row] != Br)
    x2 = g.coords()[..., 1]
    assert np.all(g.tags[(x2 > 0) & (g.tags != B)] == Br)
    assert np.all(g.tags[(x2 < 0) & (g.tags != B)] == E)


def test_annulus_exterior_is_radius_test():
    g = build_grid_2d(Annulus(0.5, 2.0), 1.0, 0.25)
    s = np.linalg.norm(g.coords(), axis=-1)
    outside = (s < 0.5 - 1e-12) | (s > 2.0 + 1e-12)
    np.testing.assert_array_equal(g.tags == Region.EXTERIOR, outside)


def test_annulus_degenerate_spacing():
    with pytest.raises(ConfigurationError):
        build_grid_2d(Annulus(0.5, 2.0), 1.0, 2.0)


def test_annulus_neighbors_of_active_nodes_exist():
    g = build_grid_2d(Annulus(0.5, 2.0), 1.5, 0.1)
    nbr = g.neighbor_table()
    tags = g.tags.ravel()
    active = np.isin(tags, [E, Br, I])
    assert np.all(nbr[active] >= 0)
    assert not np.any(tags[nbr[active]] == Region.EXTERIOR)


@given(st.integers(2, 12), st.integers(2, 12))
def test_interval_partition(left, right):
    h = 0.1
    g = build_grid_1d(-left * h, right * h, 0.0, h)
    counts = g.counts()
    assert sum(counts.values()) == g.size
    assert counts[I] == 1 and counts[B] == 2


@given(st.sampled_from([0.5, 0.25, 0.2, 0.125, 0.1]), st.sampled_from(["upper", "lower"]))
def test_slab_reflection_swaps_regions(h, side):
    g = build_grid_2d(Box(-1, 1, -1, 1), 0.0, h, side)
    r = g.reflect_normal()
    flipped = np.flip(g.tags, axis=-1)
    np.testing.assert_array_equal(r.tags == E, flipped == Br)
    np.testing.assert_array_equal(r.tags == Br, flipped == E)
    np.testing.assert_array_equal(r.tags == I, flipped == I)


@given(st.sampled_from([0.5, 0.25, 0.2, 0.1]))
def test_slab_neighbors_total_on_active_nodes(h):
    g = build_grid_2d(Box(-1, 1, -1, 1), 0.0, h)
    nbr = g.neighbor_table()
    active = np.isin(g.tags.ravel(), [E, Br, I])
    assert np.all(nbr[active] >= 0)


def test_neighbor_lookup_by_index():
    g = build_grid_2d(Box(-1, 1, -1, 1), 0.0, 0.5)
    assert g.neighbors((2, 2)) == [(1, 2), (3, 2), (2, 1), (2, 3)]
    assert g.neighbors((0, 0))[0] is None


def test_json_round_trip():
    g = build_grid_2d(Annulus(0.5, 2.0), 1.5, 0.25)
    data = json.loads(g.to_json())
    assert data["dimension"] == 2 and data["shape"] == list(g.shape)
    back = Grid.from_json(g.to_json())
    np.testing.assert_array_equal(back.tags, g.tags)
    assert back.h == g.h and back.origin == g.origin


def test_from_nodes_rebuilds_slab():
    g = build_grid_2d(Box(-1, 1, -1, 1), 0.0, 0.25)
    back = Grid.from_nodes(g.flat_coords(), g.tags.ravel())
    np.testing.assert_array_equal(back.tags, g.tags)
    assert back.interface_level == 0.0


def test_grid_is_immutable():
    g = build_grid_1d(-1, 1, 0, 0.5)
    with pytest.raises(ValueError):
        g.tags[0] = 1


def test_gridfunction_rejects_nonfinite():
    g = build_grid_1d(-1, 1, 0, 0.5)
    with pytest.raises(ValueError):
        GridFunction(g, [0, 1, np.nan, 0, 0])


def test_radial_grid_puts_brownian_inside():
    g = build_grid_radial(0.5, 2.0, 1.5, 0.25, 2)
    s = g.axis(0)
    assert np.all(g.tags[(s > 0.5) & (s < 1.5)] == Br)
    assert np.all(g.tags[(s > 1.5) & (s < 2.0)] == E)
    assert g.params["n"] == 2
