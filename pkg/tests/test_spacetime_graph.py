from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from subgraph_detect.model_scoring import QuantizedFeature, WordModel, score_feature_set
from subgraph_detect.spacetime_graph import (
    FeatureOutOfExtentError,
    GraphConfig,
    Linking,
    NodeStructure,
    VideoExtent,
    assign_feature,
    build_graph,
    graph_from_weights,
    graph_to_dict,
    reweight_nodes,
    slab_subgraph,
)

CUBE = NodeStructure.SPATIOTEMPORAL_CUBE
SLAB = NodeStructure.TEMPORAL_SLAB


def test_slab_graph_examples():
    ext = VideoExtent(30, 96, 96)
    g = build_graph([], WordModel([1.0]), ext, GraphConfig())
    assert g.num_nodes == 3 and g.edges == ((0, 1), (1, 2))
    g = build_graph([], WordModel([1.0]), ext, GraphConfig(linking=Linking.TEMPORAL_JUMP, jump_reach=2))
    assert set(g.edges) == {(0, 1), (1, 2), (0, 2)}


def test_cube_graph_example():
    g = build_graph([], WordModel([1.0]), VideoExtent(20, 96, 96), GraphConfig(node_structure=CUBE))
    assert g.num_nodes == 18
    centre = g.node_id(0, 1, 1)
    assert len(g.adjacency[centre]) == 5  # 4 spatial + 1 temporal (only two slabs)
    crossing = [(u, v) for u, v in g.edges if g.nodes[u].slab != g.nodes[v].slab]
    assert len(crossing) == 9


def test_cube_edges_are_six_connectivity():
    cfg = GraphConfig(node_structure=CUBE, spatial_grid=(2, 3))
    g = graph_from_weights(np.zeros(3 * 6), cfg)
    expected = set()
    for a, b in itertools.combinations(g.nodes, 2):
        diff = sorted([abs(a.slab - b.slab), abs(a.row - b.row), abs(a.col - b.col)])
        if diff == [0, 0, 1]:
            expected.add((a.id, b.id))
    assert set(g.edges) == expected


def test_assign_feature_examples():
    ext = VideoExtent(30, 96, 96)
    assert assign_feature(QuantizedFeature(25, 0, 0, 0), ext, GraphConfig()) == 2
    cfg = GraphConfig(node_structure=CUBE)
    nid = assign_feature(QuantizedFeature(0, 95, 0, 0), VideoExtent(10, 96, 96), cfg)
    assert nid == 2  # slab 0, row 0, col 2
    assert assign_feature(QuantizedFeature(0, 0, 0, 0), ext, cfg) == 0
    # 100 px across 3 columns: cells of 33 px, last column absorbs 34
    assert assign_feature(QuantizedFeature(0, 99, 99, 0), VideoExtent(10, 100, 100), cfg) == 8


def test_out_of_extent_feature_is_named():
    with pytest.raises(FeatureOutOfExtentError, match="record 1"):
        build_graph([QuantizedFeature(0, 0, 0, 0), QuantizedFeature(30, 0, 0, 0)], WordModel([1.0]),
                    VideoExtent(30, 10, 10), GraphConfig())


def test_partial_last_slab_kept():
    g = build_graph([QuantizedFeature(24, 1, 1, 0)], WordModel([2.0]), VideoExtent(25, 10, 10), GraphConfig())
    assert g.num_nodes == 3
    assert g.nodes[2].frame_range == (20, 25)
    assert g.weights.tolist() == [0.0, 0.0, 2.0]


def test_reweight_examples():
    g = graph_from_weights([4.0, 2.0, 5.0])
    assert reweight_nodes(g, set(), 0.0).weights.tolist() == [4.0, 2.0, 5.0]
    h = reweight_nodes(g, {1}, 0.0)
    assert h.weights.tolist() == [4.0, 0.0, 5.0]
    assert g.weights.tolist() == [4.0, 2.0, 5.0]
    assert h.nodes[1].weight == 0.0
    assert reweight_nodes(g, {0, 1, 2}, 0.0).weights.sum() == 0.0
    with pytest.raises(KeyError):
        reweight_nodes(g, {3}, 0.0)


def test_jump_reach_one_equals_adjacent():
    a = graph_from_weights(np.arange(6.0))
    b = graph_from_weights(np.arange(6.0), GraphConfig(linking=Linking.TEMPORAL_JUMP, jump_reach=1))
    assert a.edges == b.edges


def test_config_validation():
    with pytest.raises(ValueError):
        GraphConfig(slab_frames=0)
    with pytest.raises(ValueError):
        GraphConfig(node_structure=CUBE, linking=Linking.TEMPORAL_JUMP)
    with pytest.raises(ValueError):
        GraphConfig(spatial_grid=(0, 3))
    with pytest.raises(ValueError):
        VideoExtent(0, 1, 1)


def test_slab_subgraph_and_export():
    cfg = GraphConfig(node_structure=CUBE, spatial_grid=(2, 2))
    g = graph_from_weights(np.arange(8.0), cfg)
    sub = slab_subgraph(g, 1)
    assert sub.weights.tolist() == [4.0, 5.0, 6.0, 7.0]
    assert sub.edges == ((0, 1), (0, 2), (1, 3), (2, 3))
    doc = graph_to_dict(g)
    assert doc["nodes"][5] == {"id": 5, "slab": 1, "row": 0, "col": 1, "weight": 5.0, "frame_start": 10, "frame_end": 20}
    assert len(doc["edges"]) == len(g.edges)


@st.composite
def feature_streams(draw):
    frames = draw(st.integers(1, 40))
    width = draw(st.integers(3, 50))
    height = draw(st.integers(3, 50))
    k = draw(st.integers(1, 5))
    n = draw(st.integers(0, 40))
    fs = [
        QuantizedFeature(draw(st.integers(0, frames - 1)), draw(st.integers(0, width - 1)),
                         draw(st.integers(0, height - 1)), draw(st.integers(0, k - 1)))
        for _ in range(n)
    ]
    weights = draw(st.lists(st.integers(-5, 5), min_size=k, max_size=k))
    return VideoExtent(frames, width, height), fs, WordModel(np.array(weights, dtype=float))


@given(feature_streams(), st.sampled_from([SLAB, CUBE]), st.integers(1, 12))
def test_weight_conservation_and_partition(stream, structure, F):
    ext, fs, model = stream
    cfg = GraphConfig(node_structure=structure, slab_frames=F)
    g = build_graph(fs, model, ext, cfg)
    assert g.weights.sum() == score_feature_set(fs, model, include_bias=False)
    assert int(g.counts.sum()) == len(fs)
    for f in fs:
        node = g.nodes[assign_feature(f, ext, cfg)]
        x0, y0, x1, y1 = node.pixel_rect
        assert node.frame_range[0] <= f.t < node.frame_range[1]
        assert x0 <= f.x < x1 and y0 <= f.y < y1
    # node voxel sets tile the volume
    volume = sum((n.frame_range[1] - n.frame_range[0]) * (n.pixel_rect[2] - n.pixel_rect[0])
                 * (n.pixel_rect[3] - n.pixel_rect[1]) for n in g.nodes)
    assert volume == ext.num_frames * ext.width * ext.height


@given(st.integers(1, 15), st.integers(1, 5))
def test_jump_edges_invariant(n, reach):
    g = graph_from_weights(np.zeros(n), GraphConfig(linking=Linking.TEMPORAL_JUMP, jump_reach=reach))
    expected = {(i, j) for i in range(n) for j in range(i + 1, n) if j - i <= reach}
    assert set(g.edges) == expected
