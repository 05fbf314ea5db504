"""Window-shaped comparison searchers over the same node weights.

Temporal sliding windows score slab ranges of chosen durations; cuboid
searchers score every spatial rectangle of grid cells over every slab
range. Everything works at node granularity, with exact integer sums (see
``_exact``) so that top scores coincide with the subgraph solvers bit for
bit. Ranked lists are pruned by greedy non-maximum suppression.
"""

from __future__ import annotations

import math

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from ._exact import exact_weights, max_subarray, to_float
from .spacetime_graph import SpaceTimeGraph

EXHAUSTIVE = "exhaustive"

# Duration presets in frames; converted to slabs by ``duration_preset``.
DURATION_PRESETS = {
    "thumos": (10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 150),
}

NMS_THRESHOLD = 0.5
MAX_RESULTS = 10


@dataclass(frozen=True)
class WindowCandidate:
    """A slab range ``[start, end)`` times an inclusive ``(r0, c0, r1, c1)`` cell rectangle.

    ``cell_rect`` is ``None`` for whole-frame windows on slab graphs.
    """

    slab_range: tuple[int, int]
    cell_rect: tuple[int, int, int, int] | None
    score: float

    def __post_init__(self):
        s, e = self.slab_range
        if not s < e:
            raise ValueError(f"empty slab range {self.slab_range}")
        if self.cell_rect is not None:
            r0, c0, r1, c1 = self.cell_rect
            if not (0 <= r0 <= r1 and 0 <= c0 <= c1):
                raise ValueError(f"malformed cell rectangle {self.cell_rect}")

    def node_ids(self, graph: SpaceTimeGraph) -> tuple[int, ...]:
        rows, cols = graph.config.grid
        r0, c0, r1, c1 = self.cell_rect if self.cell_rect is not None else (0, 0, rows - 1, cols - 1)
        if r1 >= rows or c1 >= cols:
            raise ValueError(f"cell rectangle {self.cell_rect} outside a {rows}x{cols} grid")
        return tuple(
            graph.node_id(s, r, c)
            for s in range(*self.slab_range)
            for r in range(r0, r1 + 1)
            for c in range(c0, c1 + 1)
        )


@dataclass(frozen=True)
class RankedWindows(Sequence):
    """Ranked candidates plus the requested durations that could not be placed."""

    candidates: tuple[WindowCandidate, ...]
    skipped_durations: tuple[int, ...] = field(default=())

    def __getitem__(self, i):
        return self.candidates[i]

    def __len__(self):
        return len(self.candidates)


def duration_preset(name: str, slab_frames: int) -> tuple[int, ...]:
    """A named duration pool in frames, converted to whole slabs."""
    try:
        frames = DURATION_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown duration preset {name!r}; known: {sorted(DURATION_PRESETS)}") from None
    return tuple(sorted({max(1, round(f / slab_frames)) for f in frames}))


def _require(graph: SpaceTimeGraph, cube: bool, who: str) -> None:
    if graph.config.is_cube != cube:
        kind = "spatio-temporal cube" if cube else "temporal slab"
        raise ValueError(f"{who} needs a graph over {kind} nodes")


def _prefix(ints: Sequence[int]) -> list[int]:
    out = [0]
    for v in ints:
        out.append(out[-1] + v)
    return out


def _float_prefix(weights: np.ndarray) -> tuple[np.ndarray, float]:
    """Float prefix sums and a bound on the error of any difference of two of them.

    The bound is 0 when every partial sum is an integer below 2**53.
    """
    pre = np.concatenate([[0.0], np.cumsum(weights)])
    mass = float(np.abs(weights).sum())
    if mass < 2.0**53 and np.all(weights == np.round(weights)):
        return pre, 0.0
    return pre, 2.0 * (weights.size + 1) * np.finfo(np.float64).eps * mass


class _ExactPrefix:
    """Exact integer prefix sums, built on first use."""

    def __init__(self, weights):
        self._weights = weights
        self._pre = None

    def window(self, start: int, end: int) -> int:
        if self._pre is None:
            self._pre = _prefix(exact_weights(self._weights)[0])
        return self._pre[end] - self._pre[start]


def _iou_1d(s, e, s0, e0):
    inter = np.clip(np.minimum(e, e0) - np.maximum(s, s0), 0, None)
    return inter / ((e - s) + (e0 - s0) - inter)


def _rank_temporal(starts, ends, approx, tol, exact, max_results, nms_threshold) -> list[int]:
    """Greedy NMS by descending score, ties to (start, end); returns kept indices.

    ``approx`` holds float scores within ``tol`` of the truth; every window
    that could be the current maximum is re-scored with ``exact``.
    """
    alive = np.ones(starts.size, dtype=bool)
    kept = []
    while len(kept) < max_results and alive.any():
        top = approx[alive].max()
        near = np.flatnonzero(alive & (approx >= top - 2 * tol))
        if near.size == 1:
            i = int(near[0])
        elif tol == 0:
            i = int(near[np.lexsort((ends[near], starts[near]))[0]])
        else:
            i = min(near.tolist(), key=lambda k: (-exact(k), starts[k], ends[k]))
        kept.append(i)
        alive[i] = False
        alive &= ~(_iou_1d(starts, ends, starts[i], ends[i]) > nms_threshold)
    return kept


def _window_arrays(n: int, step: int, durations) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    if isinstance(durations, str):
        if durations != EXHAUSTIVE:
            raise ValueError(f"durations must be a set of slab counts or {EXHAUSTIVE!r}")
        durations = range(1, n + 1)
    starts, ends, skipped = [], [], []
    for d in sorted(set(int(d) for d in durations)):
        if d < 1:
            raise ValueError(f"durations must be >= 1 slab, got {d}")
        if d > n:
            skipped.append(d)
            continue
        s = np.arange(0, n - d + 1, step, dtype=np.int64)
        starts.append(s)
        ends.append(s + d)
    if not starts:
        return np.empty(0, np.int64), np.empty(0, np.int64), tuple(skipped)
    return np.concatenate(starts), np.concatenate(ends), tuple(skipped)


def t_sliding(
    graph: SpaceTimeGraph,
    step: int = 1,
    durations: Iterable[int] | str = EXHAUSTIVE,
    max_results: int = MAX_RESULTS,
    nms_threshold: float = NMS_THRESHOLD,
) -> RankedWindows:
    """Whole-frame temporal windows of the given slab durations, ranked by summed weight.

    Ties rank the earlier start first, then the shorter window.
    """
    _require(graph, False, "t_sliding")
    w = graph.weights
    starts, ends, skipped = _window_arrays(w.size, step, durations)
    if starts.size == 0:
        return RankedWindows((), skipped)
    fpre, tol = _float_prefix(w)
    pre = _ExactPrefix(w)

    def exact(k):
        return pre.window(starts[k], ends[k])

    kept = _rank_temporal(starts, ends, fpre[ends] - fpre[starts], tol, exact, max_results, nms_threshold)
    return RankedWindows(
        tuple(
            WindowCandidate((int(starts[k]), int(ends[k])), None, math.fsum(w[starts[k]:ends[k]].tolist()))
            for k in kept
        ),
        skipped,
    )


def t_sliding_norm(
    graph: SpaceTimeGraph,
    step: int = 1,
    durations: Iterable[int] | str = EXHAUSTIVE,
    max_results: int = MAX_RESULTS,
    nms_threshold: float = NMS_THRESHOLD,
) -> RankedWindows:
    """Sliding windows scored by the L1-normalized histogram response times window length in frames.

    Needs per-node feature counts on the graph. Windows with no features
    score 0.
    """
    _require(graph, False, "t_sliding_norm")
    if graph.counts is None:
        raise ValueError("t_sliding_norm needs per-node feature counts; build the graph from features")
    pre, _ = _float_prefix(graph.weights)
    cnt = np.concatenate([[0], np.cumsum(graph.counts)])
    frames = np.array([0] + [n.frame_range[1] - n.frame_range[0] for n in graph.nodes], dtype=np.int64).cumsum()
    starts, ends, skipped = _window_arrays(graph.num_nodes, step, durations)
    if starts.size == 0:
        return RankedWindows((), skipped)
    raw = pre[ends] - pre[starts]
    c = cnt[ends] - cnt[starts]
    length = frames[ends] - frames[starts]
    scores = np.where(c > 0, raw / np.maximum(c, 1) * length, 0.0)
    kept = _rank_temporal(starts, ends, scores, 0.0, scores.__getitem__, max_results, nms_threshold)
    return RankedWindows(
        tuple(WindowCandidate((int(starts[k]), int(ends[k])), None, float(scores[k])) for k in kept),
        skipped,
    )


def _rectangles(rows: int, cols: int):
    for r0 in range(rows):
        for r1 in range(r0, rows):
            for c0 in range(cols):
                for c1 in range(c0, cols):
                    yield r0, c0, r1, c1


def _rect_slab_sums(graph: SpaceTimeGraph) -> tuple[list[tuple[int, int, int, int]], list[list[int]], int]:
    """Per rectangle, the exact summed weight of each slab."""
    rows, cols = graph.config.grid
    ints, den = exact_weights(graph.weights)
    n_slabs = graph.num_slabs
    per = rows * cols
    # 2D integral image per slab, exact ints
    integ = [[[0] * (cols + 1) for _ in range(rows + 1)] for _ in range(n_slabs)]
    for s in range(n_slabs):
        I = integ[s]
        for r in range(rows):
            acc = 0
            for c in range(cols):
                acc += ints[s * per + r * cols + c]
                I[r + 1][c + 1] = I[r][c + 1] + acc
    rects = list(_rectangles(rows, cols))
    sums = [
        [I[r1 + 1][c1 + 1] - I[r0][c1 + 1] - I[r1 + 1][c0] + I[r0][c0] for I in integ]
        for r0, c0, r1, c1 in rects
    ]
    return rects, sums, den


def _cube_key(score: int, start: int, end: int, rect):
    return (-score, start, end, *rect)


def _iou_3d(a: tuple, b: tuple) -> float:
    (s0, e0, r0, c0, r1, c1), (t0, f0, q0, d0, q1, d1) = a, b
    it = max(0, min(e0, f0) - max(s0, t0))
    ir = max(0, min(r1, q1) - max(r0, q0) + 1)
    ic = max(0, min(c1, d1) - max(c0, d0) + 1)
    inter = it * ir * ic
    va = (e0 - s0) * (r1 - r0 + 1) * (c1 - c0 + 1)
    vb = (f0 - t0) * (q1 - q0 + 1) * (d1 - d0 + 1)
    return inter / (va + vb - inter)


def st_cube_sliding(
    graph: SpaceTimeGraph,
    max_results: int = MAX_RESULTS,
    nms_threshold: float = NMS_THRESHOLD,
) -> RankedWindows:
    """Every cell rectangle over every slab range, ranked with 3D-overlap suppression.

    Ties rank by earlier slab start, shorter range, then the rectangle
    corners in ``(r0, c0, r1, c1)`` order.
    """
    _require(graph, True, "st_cube_sliding")
    rects, sums, den = _rect_slab_sums(graph)
    n = graph.num_slabs
    s_idx, e_idx = np.triu_indices(n + 1, k=1)
    entries = []
    for rect, per_slab in zip(rects, sums):
        pre = _prefix(per_slab)
        for s, e in zip(s_idx.tolist(), e_idx.tolist()):
            entries.append((_cube_key(pre[e] - pre[s], s, e, rect), rect))
    entries.sort(key=lambda t: t[0])
    kept: list[tuple] = []
    out = []
    for key, rect in entries:
        if len(out) >= max_results:
            break
        box = (key[1], key[2], *rect)
        if any(_iou_3d(box, k) > nms_threshold for k in kept):
            continue
        kept.append(box)
        out.append(WindowCandidate((key[1], key[2]), rect, to_float(-key[0], den)))
    return RankedWindows(tuple(out))


def st_cube_subvolume(graph: SpaceTimeGraph) -> WindowCandidate:
    """The maximum-sum axis-aligned cuboid: a maximum-subarray scan per cell rectangle."""
    _require(graph, True, "st_cube_subvolume")
    rects, sums, den = _rect_slab_sums(graph)
    best = None
    for rect, per_slab in zip(rects, sums):
        v, s, e = max_subarray(per_slab)
        key = _cube_key(v, s, e + 1, rect)
        if best is None or key < best:
            best = key
    return WindowCandidate((best[1], best[2]), tuple(best[3:]), to_float(-best[0], den))


def best_whole_frame(graph: SpaceTimeGraph) -> WindowCandidate:
    """The best slab range covering the full frame, on either node structure."""
    ints, den = exact_weights(graph.weights)
    per = graph.cells_per_slab
    slab = [sum(ints[s * per:(s + 1) * per]) for s in range(graph.num_slabs)]
    v, s, e = max_subarray(slab)
    rect = None
    if graph.config.is_cube:
        rows, cols = graph.config.grid
        rect = (0, 0, rows - 1, cols - 1)
    return WindowCandidate((s, e + 1), rect, to_float(v, den))
