"""End-to-end detection on a weighted space-time graph.

``detect_single`` runs one searcher and projects its node set back to
frames and pixels; ``detect_two_stage`` is the cheaper spatial-then-temporal
approximation of the full spatio-temporal search; ``detect_multiple``
repeats detection on reweighted copies of the graph to find several
instances.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from ._exact import exact_weights, max_subarray
from .baseline_search import (
    EXHAUSTIVE,
    NMS_THRESHOLD,
    WindowCandidate,
    st_cube_sliding,
    st_cube_subvolume,
    t_sliding,
    t_sliding_norm,
)
from .mwcs_solver import Optimality, solve_exact, solve_jump_dp, solve_path_dp
from .spacetime_graph import Linking, SpaceTimeGraph, reweight_nodes, slab_subgraph


class Searcher(str, enum.Enum):
    SUBGRAPH = "subgraph"  # picks the exact solver matching the graph
    T_SUBGRAPH = "t-subgraph"
    T_JUMP = "t-jump"
    ST_SUBGRAPH = "st-subgraph"
    TWO_STAGE = "two-stage"
    T_SLIDING = "t-sliding"
    T_SLIDING_NORM = "t-sliding-norm"
    ST_CUBE_SLIDING = "st-cube-sliding"
    ST_CUBE_SUBVOLUME = "st-cube-subvolume"


SLAB_SEARCHERS = {Searcher.T_SUBGRAPH, Searcher.T_JUMP, Searcher.T_SLIDING, Searcher.T_SLIDING_NORM}
CUBE_SEARCHERS = {Searcher.ST_SUBGRAPH, Searcher.TWO_STAGE, Searcher.ST_CUBE_SLIDING, Searcher.ST_CUBE_SUBVOLUME}
RANKED_SEARCHERS = {Searcher.T_SLIDING, Searcher.T_SLIDING_NORM, Searcher.ST_CUBE_SLIDING}

REWEIGHT_MEAN = "mean"


@dataclass(frozen=True)
class SearchOptions:
    """Knobs of the individual searchers."""

    durations: tuple[int, ...] | str = EXHAUSTIVE  # sliding windows, in slabs
    step: int = 1
    nms_threshold: float = NMS_THRESHOLD
    time_budget: float | None = None  # seconds, general exact solver only
    require_overlap: bool = True  # two-stage linking rule, see detect_two_stage


@dataclass(frozen=True)
class Box:
    frame_start: int
    frame_end: int
    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def volume(self) -> int:
        return (self.frame_end - self.frame_start) * (self.x1 - self.x0) * (self.y1 - self.y0)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("frame_start", "frame_end", "x0", "y0", "x1", "y1")}


@dataclass(frozen=True)
class Detection:
    """A located activity.

    ``score`` is the summed weight of ``node_ids`` on the graph the detection
    was found in. ``search_score`` is the searcher's own objective, which
    differs only for the length-normalized sliding window. ``boxes`` holds one
    disjoint box per selected node, or ``None`` when nodes span whole frames.
    """

    method: str
    node_ids: tuple[int, ...]
    score: float
    temporal_extent: tuple[int, int]
    boxes: tuple[Box, ...] | None
    rank: int = 0
    label: str = "activity"
    search_score: float | None = None
    optimality: Optimality = Optimality.EXACT

    def __post_init__(self):
        if not self.node_ids:
            raise ValueError("a detection must select at least one node")
        if self.search_score is None:
            object.__setattr__(self, "search_score", self.score)


@dataclass(frozen=True)
class MultiDetectConfig:
    max_detections: int = 10
    reweight_value: float | str = 0.0  # or REWEIGHT_MEAN: mean weight of the original graph
    stop_below: float = 0.0  # a detection is kept only if its score exceeds this

    def __post_init__(self):
        if self.max_detections < 1:
            raise ValueError(f"max_detections must be >= 1, got {self.max_detections}")
        if isinstance(self.reweight_value, str) and self.reweight_value != REWEIGHT_MEAN:
            raise ValueError(f"reweight_value must be a number or {REWEIGHT_MEAN!r}")


def resolve_searcher(graph: SpaceTimeGraph, searcher: Searcher | str) -> Searcher:
    """Validate the searcher against the graph and resolve ``subgraph`` to a concrete one."""
    s = Searcher(searcher)
    cube = graph.config.is_cube
    jump = graph.config.linking is Linking.TEMPORAL_JUMP
    if s is Searcher.SUBGRAPH:
        if cube:
            return Searcher.ST_SUBGRAPH
        return Searcher.T_JUMP if jump else Searcher.T_SUBGRAPH
    if cube and s in SLAB_SEARCHERS:
        raise ValueError(f"searcher {s.value!r} needs temporal slab nodes, graph has spatio-temporal cubes")
    if not cube and s in CUBE_SEARCHERS:
        raise ValueError(f"searcher {s.value!r} needs spatio-temporal cube nodes, graph has temporal slabs")
    if s is Searcher.T_JUMP and not jump:
        raise ValueError("searcher 't-jump' needs temporal jump linking")
    if s is Searcher.T_SUBGRAPH and jump:
        raise ValueError("searcher 't-subgraph' needs adjacent linking; use 't-jump' on a jump graph")
    return s


def node_sum(graph: SpaceTimeGraph, node_ids) -> float:
    return math.fsum(float(graph.weights[i]) for i in node_ids)


def make_detection(
    graph: SpaceTimeGraph,
    node_ids,
    method: str,
    rank: int = 0,
    label: str = "activity",
    search_score: float | None = None,
    optimality: Optimality = Optimality.EXACT,
) -> Detection:
    ids = tuple(sorted(int(i) for i in node_ids))
    nodes = [graph.nodes[i] for i in ids]
    extent = (min(n.frame_range[0] for n in nodes), max(n.frame_range[1] for n in nodes))
    boxes = None
    if graph.config.is_cube:
        boxes = tuple(Box(*n.frame_range, *n.pixel_rect) for n in nodes)
    return Detection(
        method=method,
        node_ids=ids,
        score=node_sum(graph, ids),
        temporal_extent=extent,
        boxes=boxes,
        rank=rank,
        label=label,
        search_score=search_score,
        optimality=optimality,
    )


def _from_window(graph: SpaceTimeGraph, cand: WindowCandidate, method: str, rank: int = 0) -> Detection:
    return make_detection(graph, cand.node_ids(graph), method, rank, search_score=cand.score)


def detect_two_stage(graph: SpaceTimeGraph, options: SearchOptions = SearchOptions()) -> Detection:
    """Spatial detection per slab, then temporal detection over the slab scores.

    Stage 1 solves the exact 2D problem on each slab's 4-connected cell
    graph. Stage 2 picks the best run of consecutive slabs by their stage-1
    scores. With ``require_overlap`` two consecutive slabs count as linked
    only when their stage-1 cell sets share a cell, so the final union is
    always connected in the full graph; without it the plain maximum
    subarray is taken and the union may fall apart.
    """
    resolve_searcher(graph, Searcher.TWO_STAGE)
    n_slabs = graph.num_slabs
    per = graph.cells_per_slab
    local = [solve_exact(slab_subgraph(graph, s)) for s in range(n_slabs)]
    scores = [sol.score for sol in local]
    ints, _ = exact_weights(scores)
    if options.require_overlap:
        best = None
        start = 0
        for s in range(1, n_slabs + 1):
            if s == n_slabs or not set(local[s].node_ids) & set(local[s - 1].node_ids):
                v, a, b = max_subarray(ints[start:s])
                key = (-v, start + a, start + b)
                if best is None or key < best:
                    best = key
                start = s
        _, a, b = best
    else:
        _, a, b = max_subarray(ints)
    ids = [s * per + c for s in range(a, b + 1) for c in local[s].node_ids]
    return make_detection(graph, ids, Searcher.TWO_STAGE.value, optimality=Optimality.APPROXIMATE)


def detect_single(
    graph: SpaceTimeGraph,
    searcher: Searcher | str = Searcher.SUBGRAPH,
    options: SearchOptions = SearchOptions(),
) -> Detection:
    """Best single region under one searcher. Thresholding is left to the caller."""
    if graph.num_nodes == 0:
        raise ValueError("graph has no nodes")
    s = resolve_searcher(graph, searcher)
    name = s.value
    if s is Searcher.T_SUBGRAPH:
        sol = solve_path_dp(graph.weights)
    elif s is Searcher.T_JUMP:
        sol = solve_jump_dp(graph.weights, graph.config.jump_reach)
    elif s is Searcher.ST_SUBGRAPH:
        sol = solve_exact(graph, time_budget=options.time_budget)
    elif s is Searcher.TWO_STAGE:
        return detect_two_stage(graph, options)
    elif s is Searcher.ST_CUBE_SUBVOLUME:
        return _from_window(graph, st_cube_subvolume(graph), name)
    else:
        ranked = _ranked(graph, s, options, 1)
        if not ranked:
            raise ValueError("no window fits the requested durations")
        return _from_window(graph, ranked[0], name)
    return make_detection(graph, sol.node_ids, name, optimality=sol.optimality)


def _ranked(graph: SpaceTimeGraph, s: Searcher, options: SearchOptions, limit: int):
    if s is Searcher.T_SLIDING:
        return t_sliding(graph, options.step, options.durations, limit, options.nms_threshold)
    if s is Searcher.T_SLIDING_NORM:
        return t_sliding_norm(graph, options.step, options.durations, limit, options.nms_threshold)
    return st_cube_sliding(graph, limit, options.nms_threshold)


def detect_multiple(
    graph: SpaceTimeGraph,
    searcher: Searcher | str = Searcher.SUBGRAPH,
    config: MultiDetectConfig = MultiDetectConfig(),
    options: SearchOptions = SearchOptions(),
) -> list[Detection]:
    """Ranked detections of possibly several instances.

    Subgraph searchers re-solve on a copy of the graph in which every node
    picked so far carries ``config.reweight_value``; each detection reports
    its score on the graph it was found in. Sliding-window searchers take
    their non-maximum-suppressed ranking instead. Detection stops at the
    first score not above ``config.stop_below``.
    """
    s = resolve_searcher(graph, searcher)
    if s in RANKED_SEARCHERS:
        out = []
        for cand in _ranked(graph, s, options, config.max_detections):
            if not cand.score > config.stop_below:
                break
            out.append(_from_window(graph, cand, s.value, len(out)))
        return out
    value = float(np.mean(graph.weights)) if config.reweight_value == REWEIGHT_MEAN else float(config.reweight_value)
    out: list[Detection] = []
    picked: set[int] = set()
    current = graph
    while len(out) < config.max_detections:
        det = detect_single(current, s, options)
        if not det.score > config.stop_below:
            break
        out.append(replace(det, rank=len(out)))
        picked.update(det.node_ids)
        current = reweight_nodes(graph, picked, value)
    return out
