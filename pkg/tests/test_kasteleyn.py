import math

import pytest

from isoradial.errors import GraphError, PolygonError, TooLarge
from isoradial.kasteleyn import (
    box_polygon,
    central_edge,
    check_flatness,
    cut_subgraph,
    enumerate_matchings,
    local_stats,
    log_partition_function,
    partition_function,
    square_box,
)


def test_single_hexagon(honeycomb):
    c = honeycomb.position(honeycomb.instances_within(0j, 3, "dual")[0])
    s = cut_subgraph(honeycomb, box_polygon(c, 2.3))
    assert s.n_vertices == 6
    assert abs(partition_function(s) - 6 * math.sqrt(3)) < 1e-12
    total, count, _ = enumerate_matchings(s)
    assert count == 2 and abs(total - 6 * math.sqrt(3)) < 1e-12
    assert check_flatness(s) < 1e-12


def test_single_square(square):
    c = square.position(square.instances_within(0j, 3, "dual")[0])
    s = cut_subgraph(square, box_polygon(c, 1.6))
    assert s.n_vertices == 4
    assert abs(partition_function(s) - 4) < 1e-12
    assert abs(log_partition_function(s) - math.log(4)) < 1e-12


def test_four_by_four_box(square):
    s = square_box(square, 4)
    assert s.n_vertices == 16
    assert abs(partition_function(s) - 576) < 1e-9
    total, count, _ = enumerate_matchings(s, cap=40, keep=False)
    assert count == 36 and abs(total - 576) < 1e-9
    w, b = central_edge(s)
    assert abs(local_stats(s, [(w, b)]) - 1 / 6) < 1e-12
    with pytest.raises(TooLarge):
        enumerate_matchings(s, cap=10)


def test_unbalanced_and_bad_inputs(square, triangular):
    s = square_box(square, 3)
    assert not s.balanced
    assert partition_function(s) == 0.0
    assert log_partition_function(s) == -math.inf
    with pytest.raises(PolygonError):
        cut_subgraph(square, [0j, 1 + 0j, 2 + 0j])
    with pytest.raises(PolygonError):
        cut_subgraph(square, [0j, 2 + 2j, 2 + 0j, 2j])
    with pytest.raises(GraphError):
        cut_subgraph(triangular, box_polygon(0j, 3))
