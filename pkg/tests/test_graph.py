import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmf.graph import (
    ROOT,
    Graph,
    GraphError,
    NotATreeError,
    TruncationError,
    build_cayley,
    canonical_order,
    connected_subsets,
    cycle_graph,
    path_tree,
    shift_vertex,
    tree_from_edges,
)


def test_cayley_sizes():
    for k in (1, 2, 3):
        for depth in range(4):
            t = build_cayley(k, depth)
            assert len(t.vertices) == sum(k**n for n in range(depth + 1))
            assert len(t.edges) == len(t.vertices) - 1


def test_canonical_order_is_level_then_lex():
    t = build_cayley(2, 2)
    assert t.vertices == ((), (1,), (2,), (1, 1), (1, 2), (2, 1), (2, 2))


def test_levels_boundary_closure():
    t = build_cayley(2, 4)
    for n in range(3):
        sphere, ball = t.levels(n)
        assert t.boundary(ball) == t.sphere(n + 1)
        assert t.closure(ball) == t.ball(n + 1)
        assert all(len(v) == n for v in sphere)


def test_boundary_past_depth_raises():
    t = build_cayley(2, 2)
    with pytest.raises(TruncationError):
        t.boundary(t.ball(2))
    with pytest.raises(TruncationError):
        t.levels(3)
    with pytest.raises(TruncationError):
        t.successors((1, 1))


def test_successors_and_shift():
    t = build_cayley(3, 2)
    assert t.successors((2,)) == ((2, 1), (2, 2), (2, 3))
    assert shift_vertex(2, (1, 3)) == (2, 1, 3)
    assert shift_vertex(1, ROOT) == (1,)
    with pytest.raises(GraphError):
        shift_vertex(4, (1,), k=3)


def test_tree_dist_matches_bfs():
    t = build_cayley(2, 3)
    for x in t.vertices:
        for y in t.vertices:
            assert t.dist(x, y) == Graph.dist(t, x, y)
    assert t.dist((1, 2), (1, 2)) == 0
    assert t.dist((1, 2), (2, 1)) == 4


def test_tree_property_holds_on_trees_and_fails_on_cycle():
    t = build_cayley(2, 3)
    owner = t.check_tree_property([(), (1,)])
    assert owner == {(2,): (), (1, 1): (1,), (1, 2): (1,)}
    c = cycle_graph(4)
    with pytest.raises(NotATreeError):
        c.check_tree_property([0, 1, 2])


def test_connected_hull():
    t = build_cayley(2, 4)
    assert t.connected_hull([(1, 1), (1, 2)]) == ((1,), (1, 1), (1, 2))
    assert t.connected_hull([(1, 1, 2), (2,)]) == ((), (1,), (2,), (1, 1), (1, 1, 2))


def test_tree_from_edges_relabels():
    t = tree_from_edges([("a", "b"), ("a", "c"), ("c", "d")], "a")
    assert t.labels[()] == "a"
    assert t.labels[(2, 1)] == "d"
    with pytest.raises(NotATreeError):
        tree_from_edges([(0, 1), (1, 2), (2, 0)], 0)


def test_path_tree_has_no_frontier():
    p = path_tree(4)
    assert p.boundary(p.vertices) == ()
    assert p.closure([(1,)]) == ((), (1,), (1, 1))


def _brute_connected(graph, max_size):
    from itertools import combinations

    out = set()
    for r in range(1, max_size + 1):
        for s in combinations(graph.vertices, r):
            if graph.is_connected(s):
                out.add(canonical_order(s))
    return out


def test_connected_subsets_matches_brute_force():
    t = build_cayley(2, 2)
    assert set(connected_subsets(t, 7)) == _brute_connected(t, 7)
    c = cycle_graph(5)
    assert set(connected_subsets(c, 5)) == _brute_connected(c, 5)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=50), min_size=1, max_size=12))
def test_random_trees_are_trees(draws):
    edges = [(d % (j + 1), j + 1) for j, d in enumerate(draws)]
    t = tree_from_edges(edges, 0)
    assert len(t.vertices) == len(draws) + 1
    for v in t.vertices:
        if v != ROOT:
            assert t.adjacent(t.parent(v), v)
    # every connected region satisfies the tree property
    for r in connected_subsets(t, 3):
        owner = t.check_tree_property(r)
        assert set(owner) == set(t.boundary(r))
