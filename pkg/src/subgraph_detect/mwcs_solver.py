"""Maximum-weight connected subgraph (MWCS) search.

All solvers return the nonempty connected node set of maximum total weight.
Ties are broken towards the lexicographically smallest sorted id tuple, so
every solver here returns the same set on the same input. Score comparisons
are carried out exactly (see ``_exact``); the reported score is the
correctly rounded sum of the selected weights.

``solve_exact`` is a branch-and-bound over connected sets that first finds
the optimal value and then the tie-break winner; ``solve_path_dp`` and ``solve_jump_dp`` are linear-time
exact fast paths for temporal chains; ``brute_force_oracle`` is an
independent exhaustive enumeration for verification.
"""

from __future__ import annotations

import enum
import heapq
import math
import time
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ._exact import exact_weights, mask_to_tuple, max_subarray, to_float
from .spacetime_graph import WeightedGraph


class Optimality(str, enum.Enum):
    EXACT = "exact"
    APPROXIMATE = "approximate"


@dataclass(frozen=True)
class SubgraphSolution:
    node_ids: tuple[int, ...]
    score: float
    optimality: Optimality = Optimality.EXACT

    def __post_init__(self):
        if not self.node_ids:
            raise ValueError("a subgraph solution must select at least one node")


@dataclass(frozen=True, eq=False)
class PCSTInstance:
    """Prize-collecting Steiner tree instance equivalent to an MWCS instance.

    ``profit(T) - edge_cost * |E(T)| + offset == W(T)`` for every tree ``T``.
    """

    profits: np.ndarray
    edge_cost: float
    offset: float
    edges: tuple[tuple[int, int], ...]

    def objective(self, node_ids: Sequence[int], tree_edges: Sequence[tuple[int, int]]) -> float:
        return float(sum(self.profits[list(node_ids)]) - self.edge_cost * len(tree_edges))


def to_pcst(graph: WeightedGraph) -> PCSTInstance:
    """Shift weights by the minimum weight so profits and the uniform edge cost are nonnegative."""
    if graph.num_nodes == 0:
        raise ValueError("graph has no nodes")
    w_min = min(0.0, float(graph.weights.min()))
    profits = graph.weights - w_min
    return PCSTInstance(profits=profits, edge_cost=-w_min + 0.0, offset=w_min, edges=graph.edges)


def _solution(weights: np.ndarray, ids, optimality=Optimality.EXACT) -> SubgraphSolution:
    ids = tuple(sorted(int(i) for i in ids))
    return SubgraphSolution(ids, math.fsum(float(weights[i]) for i in ids), optimality)


# --------------------------------------------------------------------------
# fast paths on temporal chains
# --------------------------------------------------------------------------


def solve_path_dp(weights: Sequence[float]) -> SubgraphSolution:
    """Exact MWCS on a path graph (maximum contiguous subarray), linear time."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.size == 0:
        raise ValueError("weight sequence is empty")
    ints, _ = exact_weights(w)
    _, s, e = max_subarray(ints)
    return _solution(w, range(s, e + 1))


def solve_jump_dp(weights: Sequence[float], jump_reach: int) -> SubgraphSolution:
    """Exact MWCS on a chain whose nodes link to every node within ``jump_reach`` steps.

    A node set is connected there iff consecutive selected indices differ by
    at most ``jump_reach``. The recurrence runs right to left, so that the
    greedy forward reconstruction yields the lexicographically smallest
    optimal set: ``g[i] = w[i] + max(0, g[i+1], ..., g[i+jump_reach])``.
    """
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.size == 0:
        raise ValueError("weight sequence is empty")
    if jump_reach < 1:
        raise ValueError(f"jump_reach must be >= 1, got {jump_reach}")
    ints, _ = exact_weights(w)
    n = len(ints)
    g = [0] * n
    nxt = [-1] * n
    for i in range(n - 1, -1, -1):
        best, arg = 0, -1
        for j in range(i + 1, min(n, i + jump_reach + 1)):
            if g[j] > best:
                best, arg = g[j], j
        g[i] = ints[i] + best
        nxt[i] = arg
    top = max(g)
    i = g.index(top)
    ids = []
    while i != -1:
        ids.append(i)
        i = nxt[i]
    return _solution(w, ids)


# --------------------------------------------------------------------------
# general exact solver
# --------------------------------------------------------------------------


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _low(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


class _Timeout(Exception):
    pass


class _Search:
    """Branch-and-bound over connected node sets inside an ``allowed`` mask.

    Maximal connected groups of nonnegative nodes ("blocks") are never split:
    a block adjacent to the current set is absorbed whole, since adding it
    cannot lower the value. Only strictly negative nodes are branched on.
    Two bounds cut the search. The block bound adds, for every reachable
    block, its value minus a share of the cheapest negative node that could
    lead into it; each negative node's cost is divided among the blocks it
    touches, so the shares never overcount. The forced-node bound, used when
    some nodes must be included, adds all reachable block values and
    subtracts the cheapest negative path to the farthest forced node.
    """

    CHECK_EVERY = 1024

    def __init__(self, ints: Sequence[int], adj: Sequence[int], allowed: int, deadline: float | None):
        self.w = ints
        self.adj = adj
        self.deadline = deadline
        self._steps = 0
        self.neg = 0
        nonneg = 0
        for i in _bits(allowed):
            if ints[i] < 0:
                self.neg |= 1 << i
            else:
                nonneg |= 1 << i
        self.nonneg = nonneg

        self.block_of: dict[int, int] = {}
        self.blocks: list[int] = []
        self.vals: list[int] = []
        self.block_nbr: list[int] = []
        rest = nonneg
        while rest:
            block = frontier = rest & -rest
            while frontier:
                nb = 0
                for u in _bits(frontier):
                    nb |= adj[u]
                frontier = nb & nonneg & ~block
                block |= frontier
            rest &= ~block
            k = len(self.blocks)
            nb = 0
            for i in _bits(block):
                self.block_of[i] = k
                nb |= adj[i]
            self.blocks.append(block)
            self.vals.append(sum(ints[i] for i in _bits(block)))
            self.block_nbr.append(nb & self.neg)

        touching: dict[int, int] = {}
        for k, nb in enumerate(self.block_nbr):
            if self.vals[k] > 0:
                for u in _bits(nb):
                    touching[u] = touching.get(u, 0) + 1
        self.charges = [
            sorted((-ints[u] // touching[u], u) for u in _bits(nb)) if self.vals[k] > 0 else []
            for k, nb in enumerate(self.block_nbr)
        ]

    # -- helpers --------------------------------------------------------------

    def _tick(self) -> None:
        self._steps += 1
        if self.deadline is not None and self._steps % self.CHECK_EVERY == 0:
            if time.perf_counter() > self.deadline:
                raise _Timeout

    def _absorb(self, s: int, nb: int, cur: int, avail: int) -> tuple[int, int, int]:
        grow = nb & avail & self.nonneg & ~s
        while grow:
            k = self.block_of[_low(grow)]
            s |= self.blocks[k]
            nb |= self.block_nbr[k]
            cur += self.vals[k]
            grow = nb & avail & self.nonneg & ~s
        return s, nb, cur

    def _reach(self, s: int, avail: int) -> int:
        reach = 0
        frontier = s
        while frontier:
            nb = 0
            for u in _bits(frontier):
                nb |= self.adj[u]
            frontier = nb & avail & ~reach
            reach |= frontier
        return reach

    def _block_gains(self, reach: int, avail: int) -> tuple[int, int]:
        """``(charged gain, raw gain)`` over the positive blocks inside ``reach``."""
        charged = raw = 0
        pos = reach & self.nonneg
        while pos:
            k = self.block_of[_low(pos)]
            pos &= ~self.blocks[k]
            v = self.vals[k]
            if v <= 0:
                continue
            raw += v
            for c, u in self.charges[k]:
                if avail >> u & 1:
                    if v > c:
                        charged += v - c
                    break
        return charged, raw

    def _path_cost(self, s: int, targets: int, avail: int) -> int | None:
        """Cheapest total negative weight on a path from ``s`` to the farthest target."""
        dist = {u: 0 for u in _bits(s)}
        heap = [(0, u) for u in dist]
        left = targets & ~s
        worst = 0
        while heap and left:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            if left >> u & 1:
                left &= ~(1 << u)
                worst = d
            for v in _bits(self.adj[u] & avail):
                nd = d - self.w[v] if self.w[v] < 0 else d
                if nd < dist.get(v, nd + 1):
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        return None if left else worst

    # -- search ---------------------------------------------------------------

    def _dfs(self, s0: int, cur0: int, avail0: int, forced: int, floor: int, stop_at_floor: bool):
        """Best connected superset of ``s0`` containing ``forced``, if it beats ``floor``.

        With ``stop_at_floor`` the first set reaching ``floor`` is returned.
        Otherwise only sets strictly above ``floor`` count and the best is returned.
        """
        best = None
        nb0 = 0
        for u in _bits(s0):
            nb0 |= self.adj[u]
        stack = [(s0, nb0 & ~s0, cur0, avail0 & ~s0, True)]
        while stack:
            self._tick()
            s, nb, cur, avail, fresh = stack.pop()
            if fresh:
                s, nb, cur = self._absorb(s, nb, cur, avail)
                avail &= ~s
                if forced & ~s == 0 and (cur >= floor if stop_at_floor else cur > floor):
                    if stop_at_floor:
                        return s, cur
                    best, floor = (s, cur), cur
            frontier = nb & avail
            if not frontier:
                continue
            reach = self._reach(s, avail)
            if forced & ~(s | reach):
                continue
            charged, raw = self._block_gains(reach, avail)
            ub = cur + charged
            if forced & ~s:
                cost = self._path_cost(s, forced, s | reach)
                ub = min(ub, cur + raw - cost)
            if ub < floor or (ub == floor and not stop_at_floor):
                continue
            z = self._pick(frontier, s, avail)
            zb = 1 << z
            stack.append((s, nb, cur, avail & ~zb, False))
            stack.append((s | zb, nb | self.adj[z], cur + self.w[z], avail & ~zb, True))
        return best

    def _pick(self, frontier: int, s: int, avail: int) -> int:
        best, best_key = -1, None
        for z in _bits(frontier):
            gain = self.w[z]
            seen = set()
            for p in _bits(self.adj[z] & avail & self.nonneg & ~s):
                k = self.block_of[p]
                if k not in seen:
                    seen.add(k)
                    gain += self.vals[k]
            key = (gain, -z)
            if best_key is None or key > best_key:
                best, best_key = z, key
        return best

    def maximize(self) -> tuple[int, int]:
        """Value and one witness of the best connected set holding a positive node.

        Each set is counted under the first block, in descending value order,
        that it contains; later searches keep earlier blocks out.
        """
        order = sorted(
            (k for k in range(len(self.blocks)) if self.vals[k] > 0),
            key=lambda k: (-self.vals[k], _low(self.blocks[k])),
        )
        best_val, best_mask = self.vals[order[0]], self.blocks[order[0]]
        allowed = self.neg | self.nonneg
        for k in order:
            if self.vals[k] + self._block_gains(self._reach(self.blocks[k], allowed), allowed)[0] <= best_val:
                allowed &= ~self.blocks[k]
                continue
            found = self._dfs(self.blocks[k], self.vals[k], allowed, 0, best_val, False)
            if found is not None:
                best_mask, best_val = found
            allowed &= ~self.blocks[k]
        return best_val, best_mask

    def reaches(self, start: int, forced: int, target: int) -> int | None:
        """A connected set with value ``>= target`` containing ``start`` and ``forced``, or None."""
        for i in _bits(start & self.nonneg):
            start |= self.blocks[self.block_of[i]]
        cur = sum(self.w[i] for i in _bits(start))
        found = self._dfs(start, cur, self.neg | self.nonneg, forced, target, True)
        return None if found is None else found[0]


def _is_connected(mask: int, adj: Sequence[int]) -> bool:
    seen = frontier = mask & -mask
    while frontier:
        nb = 0
        for u in _bits(frontier):
            nb |= adj[u]
        frontier = nb & mask & ~seen
        seen |= frontier
    return seen == mask


def _lex_smallest(ints: Sequence[int], adj: Sequence[int], value: int, witness: int, deadline) -> int:
    """Lexicographically smallest sorted id tuple among connected sets worth ``value``.

    Built one element at a time: after fixing the prefix ``chosen`` (all ids
    up to ``last`` decided), the next element is the smallest ``j > last``
    for which some optimal set agrees with ``chosen + {j}`` on ids ``<= j``.
    ``witness`` is always an optimal set agreeing with the decided prefix.
    """
    n = len(ints)
    full = (1 << n) - 1
    chosen, last = 0, -1
    while True:
        if chosen and sum(ints[i] for i in _bits(chosen)) == value and _is_connected(chosen, adj):
            return chosen
        for j in range(last + 1, n):
            want = chosen | 1 << j
            upto = (1 << (j + 1)) - 1
            if witness & upto == want:
                break
            allowed = full & ~(upto & ~want)
            found = _Search(ints, adj, allowed, deadline).reaches(1 << j, want, value)
            if found is not None:
                witness = found
                break
        else:  # pragma: no cover - the witness guarantees a next element
            raise AssertionError("lexicographic search lost its witness")
        chosen, last = want, j


def solve_exact(graph: WeightedGraph, time_budget: float | None = None) -> SubgraphSolution:
    """Maximum-weight connected node set of an arbitrary graph.

    First the optimal value is found, then the lexicographically smallest
    optimal set is assembled element by element. Disconnected graphs are
    handled implicitly: a connected set never spans two components. With a
    ``time_budget`` (seconds) the search may stop early and return its
    incumbent marked ``APPROXIMATE``.
    """
    n = graph.num_nodes
    if n == 0:
        raise ValueError("graph has no nodes")
    ints, _ = exact_weights(graph.weights)
    top = max(ints)
    if top <= 0:
        return _solution(graph.weights, [ints.index(top)])
    deadline = None if time_budget is None else time.perf_counter() + time_budget
    adj = graph.adjacency_masks
    search = _Search(ints, adj, (1 << n) - 1, deadline)
    best = search.blocks[search.block_of[ints.index(top)]]
    try:
        value, best = search.maximize()
        best = _lex_smallest(ints, adj, value, best, deadline)
    except _Timeout:
        return _solution(graph.weights, mask_to_tuple(best), Optimality.APPROXIMATE)
    return _solution(graph.weights, mask_to_tuple(best))


# --------------------------------------------------------------------------
# verification oracle
# --------------------------------------------------------------------------

_CHUNK_BITS = 20


def _byte_tables(adj: Sequence[int], n: int) -> list[np.ndarray]:
    tables = []
    for b in range(0, n, 8):
        tab = np.zeros(256, dtype=np.int64)
        for v in range(256):
            m = 0
            for i in range(8):
                if v >> i & 1 and b + i < n:
                    m |= adj[b + i]
            tab[v] = m
        tables.append(tab)
    return tables


def _connected(masks: np.ndarray, tables: list[np.ndarray]) -> np.ndarray:
    reach = masks & -masks
    while True:
        nb = np.zeros_like(masks)
        for k, tab in enumerate(tables):
            nb |= tab[(reach >> (8 * k)) & 0xFF]
        nxt = (reach | nb) & masks
        if np.array_equal(nxt, reach):
            return reach == masks
        reach = nxt


def brute_force_oracle(graph: WeightedGraph, max_nodes: int = 20) -> SubgraphSolution:
    """Enumerate every nonempty node subset, keep the connected ones, return the best.

    Subset sums are computed in floating point only to discard subsets that
    cannot reach the best connected score found so far; survivors are
    checked for connectivity and compared exactly.
    """
    n = graph.num_nodes
    if n == 0:
        raise ValueError("graph has no nodes")
    if n > max_nodes:
        raise ValueError(f"graph has {n} nodes, above the oracle bound of {max_nodes}")
    if n > 62:
        raise ValueError("the oracle supports at most 62 nodes")
    w = graph.weights
    ints, den = exact_weights(w)
    tables = _byte_tables(graph.adjacency_masks, n)
    slack = 1e-7 * (1.0 + float(np.abs(w).sum()))

    low_bits = min(n, _CHUNK_BITS)
    low_masks = np.arange(1 << low_bits, dtype=np.int64)
    low_sums = np.zeros(1 << low_bits)
    for i in range(low_bits):
        low_sums[1 << i: 1 << (i + 1)] = low_sums[: 1 << i] + w[i]

    best_int = max(ints)
    best_tuple = (ints.index(best_int),)
    floor = float(w.max())
    for high in range(1 << (n - low_bits)):
        high_sum = 0.0
        for i in range(n - low_bits):
            if high >> i & 1:
                high_sum += w[low_bits + i]
        keep = low_sums + high_sum >= floor - slack
        if not keep.any():
            continue
        cand = low_masks[keep] | (high << low_bits)
        cand = cand[cand != 0]
        cand = cand[_connected(cand, tables)]
        if cand.size == 0:
            continue
        for m in cand.tolist():
            val = 0
            for i in _bits(m):
                val += ints[i]
            if val > best_int:
                best_int, best_tuple = val, mask_to_tuple(m)
            elif val == best_int:
                tup = mask_to_tuple(m)
                if tup < best_tuple:
                    best_tuple = tup
        floor = max(floor, to_float(best_int, den))
    return _solution(w, best_tuple)
