from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import best_cuboid
from subgraph_detect.baseline_search import (
    EXHAUSTIVE,
    WindowCandidate,
    best_whole_frame,
    duration_preset,
    st_cube_sliding,
    st_cube_subvolume,
    t_sliding,
    t_sliding_norm,
)
from subgraph_detect.model_scoring import QuantizedFeature, WordModel
from subgraph_detect.mwcs_solver import solve_path_dp
from subgraph_detect.spacetime_graph import GraphConfig, NodeStructure, VideoExtent, build_graph, graph_from_weights

CUBE = NodeStructure.SPATIOTEMPORAL_CUBE


def cube_graph(grid3d):
    grid3d = np.asarray(grid3d, dtype=float)
    cfg = GraphConfig(node_structure=CUBE, spatial_grid=grid3d.shape[1:])
    return graph_from_weights(grid3d, cfg)


def test_t_sliding_examples():
    g = graph_from_weights([1, -2, 3])
    top = t_sliding(g, durations=EXHAUSTIVE)[0]
    assert top == WindowCandidate((2, 3), None, 3.0)
    assert t_sliding(graph_from_weights([2, -1, 2]))[0] == WindowCandidate((0, 3), None, 3.0)
    ranked = t_sliding(g, step=1, durations={2}, nms_threshold=1.0)
    assert [(c.slab_range, c.score) for c in ranked] == [((1, 3), 1.0), ((0, 2), -1.0)]


def test_t_sliding_records_skipped_durations():
    res = t_sliding(graph_from_weights([1, 2]), durations=[1, 3, 5])
    assert res.skipped_durations == (3, 5)
    assert res[0].slab_range == (0, 1) or res[0].slab_range == (1, 2)
    empty = t_sliding(graph_from_weights([1, 2]), durations=[4])
    assert len(empty) == 0 and empty.skipped_durations == (4,)
    with pytest.raises(ValueError):
        t_sliding(graph_from_weights([1]), durations=[0])
    with pytest.raises(ValueError):
        t_sliding(graph_from_weights([1]), step=0)


def test_t_sliding_step():
    g = graph_from_weights([5, -1, -1, 9, -1])
    starts = sorted(c.slab_range[0] for c in t_sliding(g, step=2, durations=[1], max_results=10, nms_threshold=1.0))
    assert starts == [0, 2, 4]


def test_nms_keeps_low_overlap_windows_only():
    rng = np.random.default_rng(3)
    g = graph_from_weights(rng.normal(size=60))
    ranked = t_sliding(g, max_results=10)
    for i, a in enumerate(ranked):
        for b in ranked.candidates[i + 1:]:
            (s0, e0), (s1, e1) = a.slab_range, b.slab_range
            inter = max(0, min(e0, e1) - max(s0, s1))
            assert inter / ((e0 - s0) + (e1 - s1) - inter) <= 0.5
    scores = [c.score for c in ranked]
    assert scores == sorted(scores, reverse=True)


def test_cuboid_examples():
    # one row, two columns, two slabs: [[1, -5], [2, 1]] per slab
    g = cube_graph([[[1, -5]], [[2, 1]]])
    top = st_cube_sliding(g)[0]
    assert top == WindowCandidate((0, 2), (0, 0, 0, 0), 3.0)
    assert st_cube_subvolume(g) == top
    neg = cube_graph([[[-3, -1]], [[-2, -4]]])
    assert st_cube_subvolume(neg) == WindowCandidate((0, 1), (0, 1, 0, 1), -1.0)
    assert cube_graph([[[7.5]]]).weights.tolist() == [7.5]
    assert st_cube_subvolume(cube_graph([[[7.5]]])) == WindowCandidate((0, 1), (0, 0, 0, 0), 7.5)
    assert st_cube_subvolume(cube_graph(np.ones((2, 2, 3)))) == WindowCandidate((0, 2), (0, 0, 1, 2), 12.0)


def test_one_by_one_grid_reduces_to_t_sliding():
    w = [3, -4, 2, 2, -1, 5]
    cube = st_cube_sliding(cube_graph(np.array(w).reshape(-1, 1, 1)))
    slab = t_sliding(graph_from_weights(w))
    assert [(c.slab_range, c.score) for c in cube] == [(c.slab_range, c.score) for c in slab]


def test_structure_is_checked():
    with pytest.raises(ValueError):
        t_sliding(cube_graph(np.zeros((2, 2, 2))))
    with pytest.raises(ValueError):
        st_cube_subvolume(graph_from_weights([1.0]))


def test_t_sliding_norm_scores():
    model = WordModel([3.0, -1.0])
    fs = [QuantizedFeature(0, 0, 0, 0), QuantizedFeature(1, 0, 0, 0), QuantizedFeature(12, 0, 0, 1)]
    g = build_graph(fs, model, VideoExtent(30, 4, 4), GraphConfig())
    ranked = t_sliding_norm(g, durations=[1], nms_threshold=1.0)
    scores = {c.slab_range: c.score for c in ranked}
    assert scores == {(0, 1): 30.0, (2, 3): 0.0, (1, 2): -10.0}
    with pytest.raises(ValueError):
        t_sliding_norm(graph_from_weights([1.0]))


def test_duration_preset():
    assert duration_preset("thumos", 10) == (1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 15)
    assert duration_preset("thumos", 5)[-1] == 30
    with pytest.raises(KeyError):
        duration_preset("nope", 10)


def test_best_whole_frame():
    g = cube_graph([[[1, 1]], [[-5, 1]], [[3, 3]]])
    assert best_whole_frame(g) == WindowCandidate((2, 3), (0, 0, 0, 1), 6.0)
    assert best_whole_frame(graph_from_weights([1, -2, 3])) == WindowCandidate((2, 3), None, 3.0)


@given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=50))
def test_sliding_equivalence(w):
    top = t_sliding(graph_from_weights(w))[0]
    sol = solve_path_dp(w)
    assert top.score == sol.score
    assert top.slab_range == (sol.node_ids[0], sol.node_ids[-1] + 1)


@st.composite
def small_grids(draw):
    s, r, c = draw(st.integers(1, 3)), draw(st.integers(1, 3)), draw(st.integers(1, 3))
    vals = draw(st.lists(st.integers(-5, 5), min_size=s * r * c, max_size=s * r * c))
    return np.array(vals, dtype=float).reshape(s, r, c)


@given(small_grids())
def test_subvolume_matches_enumeration(grid):
    score, key = best_cuboid(grid)
    g = cube_graph(grid)
    sub = st_cube_subvolume(g)
    assert Fraction(sub.score) == score
    assert (*sub.slab_range, *sub.cell_rect) == key
    assert st_cube_sliding(g)[0] == sub
    assert sum(g.weights[list(sub.node_ids(g))]) == sub.score
