"""Weighted space-time graphs over a quantized feature stream.

Nodes are either temporal slabs (``F`` whole frames) or space-time cubes
(``F`` frames by one cell of a ``rows x cols`` grid). Cube ids are
slab-major: ``id = slab * rows * cols + row * cols + col``. A feature is
claimed by the node containing its position; a node's weight is the sum of
its features' word weights (bias excluded).
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .model_scoring import QuantizedFeature, WordModel


class NodeStructure(str, enum.Enum):
    TEMPORAL_SLAB = "temporal_slab"
    SPATIOTEMPORAL_CUBE = "spatiotemporal_cube"


class Linking(str, enum.Enum):
    ADJACENT = "adjacent"
    TEMPORAL_JUMP = "temporal_jump"


class FeatureOutOfExtentError(ValueError):
    pass


@dataclass(frozen=True)
class VideoExtent:
    num_frames: int
    width: int
    height: int

    def __post_init__(self):
        for name in ("num_frames", "width", "height"):
            if getattr(self, name) < 1:
                raise ValueError(f"VideoExtent.{name} must be >= 1, got {getattr(self, name)}")


@dataclass(frozen=True)
class GraphConfig:
    node_structure: NodeStructure = NodeStructure.TEMPORAL_SLAB
    slab_frames: int = 10
    spatial_grid: tuple[int, int] = (3, 3)
    linking: Linking = Linking.ADJACENT
    jump_reach: int = 2

    def __post_init__(self):
        object.__setattr__(self, "node_structure", NodeStructure(self.node_structure))
        object.__setattr__(self, "linking", Linking(self.linking))
        object.__setattr__(self, "spatial_grid", tuple(int(v) for v in self.spatial_grid))
        if self.slab_frames < 1:
            raise ValueError(f"slab_frames must be >= 1, got {self.slab_frames}")
        if len(self.spatial_grid) != 2 or min(self.spatial_grid) < 1:
            raise ValueError(f"spatial_grid must be two positive integers, got {self.spatial_grid}")
        if self.jump_reach < 1:
            raise ValueError(f"jump_reach must be >= 1, got {self.jump_reach}")
        if self.linking is Linking.TEMPORAL_JUMP and self.node_structure is not NodeStructure.TEMPORAL_SLAB:
            raise ValueError("temporal jump linking is only defined for temporal slab nodes")

    @property
    def is_cube(self) -> bool:
        return self.node_structure is NodeStructure.SPATIOTEMPORAL_CUBE

    @property
    def grid(self) -> tuple[int, int]:
        return self.spatial_grid if self.is_cube else (1, 1)

    @property
    def effective_reach(self) -> int:
        return self.jump_reach if self.linking is Linking.TEMPORAL_JUMP else 1


@dataclass(frozen=True)
class SpaceTimeNode:
    id: int
    slab: int
    cell: tuple[int, int] | None  # None marks a whole-frame node
    weight: float
    frame_range: tuple[int, int]  # [start, end)
    pixel_rect: tuple[int, int, int, int]  # x0, y0, x1, y1, half-open

    @property
    def row(self) -> int:
        return 0 if self.cell is None else self.cell[0]

    @property
    def col(self) -> int:
        return 0 if self.cell is None else self.cell[1]


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected node-weighted graph; edges are sorted ``(u, v)`` pairs with ``u < v``."""

    weights: np.ndarray
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(w)):
            raise ValueError("node weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        n = w.size
        clean = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) references a node outside 0..{n - 1}")
            clean.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", tuple(sorted(clean)))

    @property
    def num_nodes(self) -> int:
        return int(self.weights.size)

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return tuple(tuple(sorted(a)) for a in nbrs)

    @cached_property
    def adjacency_masks(self) -> tuple[int, ...]:
        masks = []
        for nb in self.adjacency:
            m = 0
            for v in nb:
                m |= 1 << v
            masks.append(m)
        return tuple(masks)

    def with_weights(self, weights) -> "WeightedGraph":
        return replace(self, weights=weights)

    def is_connected_subset(self, node_ids: Iterable[int]) -> bool:
        ids = set(node_ids)
        if not ids:
            return False
        start = next(iter(ids))
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in self.adjacency[u]:
                if v in ids and v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen == ids


@dataclass(frozen=True, eq=False)
class SpaceTimeGraph(WeightedGraph):
    nodes: tuple[SpaceTimeNode, ...] = ()
    config: GraphConfig = field(default_factory=GraphConfig)
    extent: VideoExtent = field(default_factory=lambda: VideoExtent(1, 1, 1))
    counts: np.ndarray | None = None  # features claimed per node

    def __post_init__(self):
        super().__post_init__()
        if len(self.nodes) != self.num_nodes:
            raise ValueError("one SpaceTimeNode per weight is required")
        if self.counts is not None:
            c = np.array(self.counts, dtype=np.int64).reshape(-1)
            c.setflags(write=False)
            object.__setattr__(self, "counts", c)

    @property
    def num_slabs(self) -> int:
        return num_slabs(self.extent, self.config)

    @property
    def cells_per_slab(self) -> int:
        r, c = self.config.grid
        return r * c

    def slab_weights(self) -> np.ndarray:
        return self.weights.reshape(self.num_slabs, self.cells_per_slab).sum(axis=1)

    def weight_grid(self) -> np.ndarray:
        """Node weights shaped ``(slabs, rows, cols)``."""
        r, c = self.config.grid
        return self.weights.reshape(self.num_slabs, r, c)

    def node_id(self, slab: int, row: int = 0, col: int = 0) -> int:
        r, c = self.config.grid
        return slab * r * c + row * c + col

    def with_weights(self, weights) -> "SpaceTimeGraph":
        w = np.array(weights, dtype=np.float64).reshape(-1)
        nodes = tuple(replace(n, weight=float(wi)) for n, wi in zip(self.nodes, w))
        return replace(self, weights=w, nodes=nodes)


def num_slabs(extent: VideoExtent, config: GraphConfig) -> int:
    return -(-extent.num_frames // config.slab_frames)


def _cell_size(extent: VideoExtent, config: GraphConfig) -> tuple[int, int]:
    rows, cols = config.grid
    if extent.width < cols or extent.height < rows:
        raise ValueError(f"a {extent.width}x{extent.height} frame cannot hold a {rows}x{cols} grid")
    return extent.width // cols, extent.height // rows


def cell_rect(extent: VideoExtent, config: GraphConfig, row: int, col: int) -> tuple[int, int, int, int]:
    """Pixel rectangle ``(x0, y0, x1, y1)`` of a grid cell; the last row/column absorbs the remainder."""
    rows, cols = config.grid
    cw, ch = _cell_size(extent, config)
    x0, y0 = col * cw, row * ch
    x1 = extent.width if col == cols - 1 else x0 + cw
    y1 = extent.height if row == rows - 1 else y0 + ch
    return x0, y0, x1, y1


def slab_frames(extent: VideoExtent, config: GraphConfig, slab: int) -> tuple[int, int]:
    start = slab * config.slab_frames
    return start, min(start + config.slab_frames, extent.num_frames)


def _assign_arrays(t, x, y, extent: VideoExtent, config: GraphConfig) -> np.ndarray:
    rows, cols = config.grid
    slab = t // config.slab_frames
    if not config.is_cube:
        return slab
    cw, ch = _cell_size(extent, config)
    col = np.minimum(x // cw, cols - 1)
    row = np.minimum(y // ch, rows - 1)
    return slab * rows * cols + row * cols + col


def _check_extent(t, x, y, extent: VideoExtent) -> None:
    bad = (t < 0) | (t >= extent.num_frames) | (x < 0) | (x >= extent.width) | (y < 0) | (y >= extent.height)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise FeatureOutOfExtentError(
            f"feature record {i} (t={int(t[i])}, x={int(x[i])}, y={int(y[i])}) lies outside "
            f"the {extent.num_frames}-frame {extent.width}x{extent.height} video"
        )


def assign_feature(feature: QuantizedFeature, extent: VideoExtent, config: GraphConfig) -> int:
    """Id of the node whose voxel set contains the feature position."""
    t, x, y = (np.array([v]) for v in (feature.t, feature.x, feature.y))
    _check_extent(t, x, y, extent)
    return int(_assign_arrays(t, x, y, extent, config)[0])


def feature_array(features: Sequence[QuantizedFeature] | np.ndarray) -> np.ndarray:
    """``(N, 4)`` int64 array of ``t, x, y, word``."""
    if isinstance(features, np.ndarray):
        return features.reshape(-1, 4).astype(np.int64, copy=False)
    arr = np.array([(f.t, f.x, f.y, f.word) for f in features], dtype=np.int64)
    return arr.reshape(-1, 4)


def _edges(config: GraphConfig, n_slabs: int) -> list[tuple[int, int]]:
    rows, cols = config.grid
    per = rows * cols
    edges = []
    if not config.is_cube:
        reach = config.effective_reach
        for i in range(n_slabs):
            for j in range(i + 1, min(n_slabs, i + reach + 1)):
                edges.append((i, j))
        return edges
    for s in range(n_slabs):
        base = s * per
        for r in range(rows):
            for c in range(cols):
                u = base + r * cols + c
                if c + 1 < cols:
                    edges.append((u, u + 1))
                if r + 1 < rows:
                    edges.append((u, u + cols))
                if s + 1 < n_slabs:
                    edges.append((u, u + per))
    return edges


def _nodes(extent: VideoExtent, config: GraphConfig, weights: np.ndarray) -> tuple[SpaceTimeNode, ...]:
    rows, cols = config.grid
    nodes = []
    for s in range(num_slabs(extent, config)):
        fr = slab_frames(extent, config, s)
        for r in range(rows):
            for c in range(cols):
                nid = len(nodes)
                if config.is_cube:
                    cell, rect = (r, c), cell_rect(extent, config, r, c)
                else:
                    cell, rect = None, (0, 0, extent.width, extent.height)
                nodes.append(SpaceTimeNode(nid, s, cell, float(weights[nid]), fr, rect))
    return tuple(nodes)


def build_graph(
    features: Sequence[QuantizedFeature] | np.ndarray,
    model: WordModel,
    extent: VideoExtent,
    config: GraphConfig = GraphConfig(),
) -> SpaceTimeGraph:
    """Partition the video into nodes, weight each by its features, and link them."""
    arr = feature_array(features)
    t, x, y, words = arr.T
    _check_extent(t, x, y, extent)
    if words.size and (words.min() < 0 or words.max() >= model.vocab_size):
        i = int(np.flatnonzero((words < 0) | (words >= model.vocab_size))[0])
        raise IndexError(f"feature record {i} has word {int(words[i])} outside vocabulary of size {model.vocab_size}")
    n_slabs = num_slabs(extent, config)
    rows, cols = config.grid
    n = n_slabs * rows * cols
    node = _assign_arrays(t, x, y, extent, config)
    weights = np.bincount(node, weights=model.weights[words], minlength=n).astype(np.float64)
    counts = np.bincount(node, minlength=n)
    return SpaceTimeGraph(
        weights=weights,
        edges=tuple(_edges(config, n_slabs)),
        nodes=_nodes(extent, config, weights),
        config=config,
        extent=extent,
        counts=counts,
    )


def graph_from_weights(
    weights,
    config: GraphConfig = GraphConfig(),
    extent: VideoExtent | None = None,
    counts=None,
) -> SpaceTimeGraph:
    """Graph with given node weights, shaped ``(slabs,)`` or ``(slabs, rows, cols)``.

    Without an explicit extent, one frame-aligned extent is synthesized
    (``slab_frames`` frames per slab, 32 pixels per cell).
    """
    w = np.asarray(weights, dtype=np.float64)
    rows, cols = config.grid
    if w.ndim == 1 and config.is_cube and w.size % (rows * cols) == 0:
        w = w.reshape(-1, rows, cols)
    n_slabs = w.shape[0] if w.ndim else 1
    if w.size != n_slabs * rows * cols:
        raise ValueError(f"{w.size} weights do not fill {n_slabs} slabs of a {rows}x{cols} grid")
    if extent is None:
        extent = VideoExtent(n_slabs * config.slab_frames, 32 * cols, 32 * rows)
    if num_slabs(extent, config) != n_slabs:
        raise ValueError(f"extent has {num_slabs(extent, config)} slabs but {n_slabs} were given")
    flat = w.reshape(-1)
    return SpaceTimeGraph(
        weights=flat,
        edges=tuple(_edges(config, n_slabs)),
        nodes=_nodes(extent, config, flat),
        config=config,
        extent=extent,
        counts=counts,
    )


def reweight_nodes(graph: WeightedGraph, node_ids: Iterable[int], new_weight: float) -> WeightedGraph:
    """Copy of ``graph`` with the listed nodes set to ``new_weight``."""
    ids = sorted(set(int(i) for i in node_ids))
    for i in ids:
        if not 0 <= i < graph.num_nodes:
            raise KeyError(f"unknown node id {i}")
    if not np.isfinite(new_weight):
        raise ValueError("new_weight must be finite; use a large negative value to emulate removal")
    w = graph.weights.copy()
    w[ids] = new_weight
    return graph.with_weights(w)


def slab_subgraph(graph: SpaceTimeGraph, slab: int) -> WeightedGraph:
    """The 4-connected cell graph of one slab, with local ids ``row * cols + col``."""
    rows, cols = graph.config.grid
    per = rows * cols
    w = graph.weights[slab * per:(slab + 1) * per]
    edges = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if c + 1 < cols:
                edges.append((u, u + 1))
            if r + 1 < rows:
                edges.append((u, u + cols))
    return WeightedGraph(w, tuple(edges))


def graph_to_dict(graph: SpaceTimeGraph) -> dict:
    """Debug export: ``{"nodes": [...], "edges": [[u, v], ...]}``."""
    return {
        "nodes": [
            {
                "id": n.id,
                "slab": n.slab,
                "row": n.row,
                "col": n.col,
                "weight": n.weight,
                "frame_start": n.frame_range[0],
                "frame_end": n.frame_range[1],
            }
            for n in graph.nodes
        ],
        "edges": [[u, v] for u, v in graph.edges],
    }
