import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bopco.moo import (Solution, SolutionArchive, common_reference, das_dennis, dominates,
                       hypervolume, non_dominated_sort, nsga3_select, pareto_filter)

vec3 = st.tuples(*[st.integers(0, 4)] * 3)


def naive_layers(points):
    left = list(range(len(points)))
    layers = []
    while left:
        layer = [i for i in left if not any(dominates(points[j], points[i]) for j in left)]
        layers.append(layer)
        left = [i for i in left if i not in layer]
    return layers


def sol(cost, fp="t"):
    return Solution((0,), fp, tuple(float(c) for c in cost))


# -- dominance ----------------------------------------------------------------------

def test_dominance_examples():
    assert dominates((1, 2, 3), (1, 2, 4))
    assert not dominates((1, 2, 3), (1, 2, 3))
    assert not dominates((1, 3, 2), (2, 1, 2))
    with pytest.raises(ValueError):
        dominates((1, 2), (1, 2, 3))


@settings(max_examples=300, deadline=None)
@given(vec3, vec3, vec3)
def test_dominance_is_a_strict_partial_order(a, b, c):
    assert not dominates(a, a)
    assert not (dominates(a, b) and dominates(b, a))
    if dominates(a, b) and dominates(b, c):
        assert dominates(a, c)


# -- non-dominated sort --------------------------------------------------------------

def test_sort_examples():
    assert non_dominated_sort([]) == []
    assert non_dominated_sort([(1, 1, 1)]) == [[0]]
    assert non_dominated_sort([(1, 1, 1), (1, 1, 1)]) == [[0, 1]]
    pts = [(3, 3, 3), (1, 1, 1), (2, 2, 2), (1, 3, 2)]
    assert non_dominated_sort(pts) == [[1], [2, 3], [0]]


@settings(max_examples=200, deadline=None)
@given(st.lists(vec3, max_size=25))
def test_sort_matches_naive(points):
    assert non_dominated_sort(points) == naive_layers(points)


def test_sort_partition_properties():
    rng = np.random.default_rng(0)
    pts = rng.integers(0, 6, size=(80, 3)).tolist()
    layers = non_dominated_sort(pts)
    flat = sorted(i for layer in layers for i in layer)
    assert flat == list(range(80))
    for k, layer in enumerate(layers):
        for i in layer:
            for j in layer:
                assert not dominates(pts[i], pts[j])
            if k:
                assert any(dominates(pts[j], pts[i]) for j in layers[k - 1])


# -- hypervolume ---------------------------------------------------------------------

def test_hypervolume_examples():
    assert hypervolume([(0, 0, 0)], (1, 1, 1)) == 1.0
    assert hypervolume([(0, 0, 0), (0.5, 0.5, 0.5)], (1, 1, 1)) == 1.0
    assert hypervolume([(1, 0, 0), (0, 1, 0)], (2, 2, 2)) == pytest.approx(6.0)
    assert hypervolume([], (1, 1, 1)) == 0.0
    assert hypervolume([(2, 0, 0)], (1, 1, 1)) == 0.0
    assert hypervolume([(1, 1)], (3, 2)) == 2.0


def test_hypervolume_rejects_other_dimensions():
    with pytest.raises(ValueError):
        hypervolume([(0, 0, 0, 0)], (1, 1, 1, 1))


def test_hypervolume_matches_monte_carlo():
    rng = np.random.default_rng(1)
    pts = rng.random((8, 3))
    ref = np.ones(3)
    samples = rng.random((200_000, 3))
    covered = np.zeros(len(samples), dtype=bool)
    for p in pts:
        covered |= np.all(samples >= p, axis=1)
    assert hypervolume(pts, ref) == pytest.approx(covered.mean(), rel=0.02)


@settings(max_examples=100, deadline=None)
@given(st.lists(vec3, min_size=1, max_size=10), vec3)
def test_hypervolume_monotone_under_insertion(points, extra):
    ref = (5, 5, 5)
    assert hypervolume(points + [extra], ref) >= hypervolume(points, ref) - 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(vec3, min_size=1, max_size=10))
def test_hypervolume_ignores_dominated_points(points):
    ref = (5, 5, 5)
    front = [points[i] for i in non_dominated_sort(points)[0]]
    assert hypervolume(points, ref) == pytest.approx(hypervolume(front, ref))


# -- NSGA-III -------------------------------------------------------------------------

def test_das_dennis_counts():
    assert len(das_dennis(3, 6)) == 28
    assert len(das_dennis(2, 12)) == 13
    assert np.allclose(das_dennis(3, 6).sum(axis=1), 1.0)


def test_nsga3_whole_layers_first():
    pts = [(0, 0, 0), (5, 5, 5), (1, 2, 3), (3, 2, 1), (6, 6, 6)]
    assert nsga3_select(pts, 1) == [0]
    assert nsga3_select(pts, 3) == [0, 2, 3]
    assert nsga3_select(pts, 5) == [0, 1, 2, 3, 4]
    assert nsga3_select(pts, 0) == []
    with pytest.raises(ValueError):
        nsga3_select(pts, 6)


def test_nsga3_prefers_better_layers_and_is_deterministic():
    rng = np.random.default_rng(2)
    pts = rng.random((60, 3))
    layers = non_dominated_sort(pts)
    rank = {i: k for k, layer in enumerate(layers) for i in layer}
    a = nsga3_select(pts, 20, seed=5)
    assert a == nsga3_select(pts, 20, seed=5)
    assert len(a) == len(set(a)) == 20
    worst_chosen = max(rank[i] for i in a)
    assert all(rank[i] <= worst_chosen for i in a)
    assert all(i in a for i in range(60) if rank[i] < worst_chosen)


def test_nsga3_spreads_the_boundary_layer():
    # one front of points along a line; extremes should survive a 3-of-9 cut
    pts = [(i, 8 - i, 0) for i in range(9)]
    chosen = nsga3_select(pts, 3, divisions=2)
    assert 0 in chosen and 8 in chosen


# -- archive ---------------------------------------------------------------------------

def test_archive_dedup_and_front():
    a = SolutionArchive()
    assert a.insert(sol((1, 2, 3)))
    assert not a.insert(sol((1, 2, 3)))
    assert a.insert(sol((1, 2, 3), "other"))
    a.insert(sol((2, 3, 4)))
    a.insert(sol((0, 5, 5)))
    assert len(a) == 4
    assert sorted(tuple(s.cost) for s in a.front()) == [(0, 5, 5), (1, 2, 3), (1, 2, 3)]
    assert a.front_dominates((2, 2, 3))
    assert not a.front_dominates((1, 2, 3))


def test_reference_point_rule():
    a = SolutionArchive()
    assert list(a.reference_point()) == [1.0, 1.0, 1.0]
    a.insert(sol((10, 0, 20)))
    assert a.reference_point() == pytest.approx([11.0, 1.0, 22.0])
    a.insert(sol((10.5, 0, 5)))
    # still inside the frozen point: unchanged
    assert a.reference_point() == pytest.approx([11.0, 1.0, 22.0])
    a.insert(sol((12, 0.5, 1)))
    assert a.reference_point() == pytest.approx([13.2, 1.0, 22.0])


def test_archive_eviction_keeps_the_front():
    a = SolutionArchive(cap=10)
    rng = np.random.default_rng(3)
    inserted = [tuple(rng.random(3)) for _ in range(40)]
    for i, c in enumerate(inserted):
        a.insert(sol(c, str(i)))
    assert len(a) <= 10
    true_front = {inserted[i] for i in non_dominated_sort(inserted)[0]}
    assert {tuple(s.cost) for s in a.front()} == true_front


def test_common_reference_and_pareto_filter():
    assert list(common_reference([(1, 0, 2)], [(3, 0, 1)])) == pytest.approx([3.3, 1.0, 2.2])
    assert list(common_reference()) == [1.0, 1.0, 1.0]
    sols = [sol((1, 1, 1), "a"), sol((1, 1, 1), "b"), sol((2, 2, 2), "c"), sol((0, 3, 1), "d")]
    out = pareto_filter(sols)
    assert [s.term_fingerprint for s in out] == ["d", "a"]
