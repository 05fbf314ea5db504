"""Deliberately naive reference implementations, independent of the package internals."""

from __future__ import annotations

import itertools
from fractions import Fraction

import networkx as nx


def connected_subsets(n, edges):
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(edges)
    for k in range(1, n + 1):
        for combo in itertools.combinations(range(n), k):
            if nx.is_connected(g.subgraph(combo)):
                yield combo


def naive_mwcs(weights, edges):
    """(exact score, lexicographically smallest optimal id tuple)."""
    best = None
    for combo in connected_subsets(len(weights), edges):
        val = sum(Fraction(float(weights[i])) for i in combo)
        if best is None or val > best[0] or (val == best[0] and combo < best[1]):
            best = (val, combo)
    return best


def path_edges(n):
    return [(i, i + 1) for i in range(n - 1)]


def jump_edges(n, reach):
    return [(i, j) for i in range(n) for j in range(i + 1, min(n, i + reach + 1))]


def grid_edges(rows, cols, slabs=1):
    per = rows * cols
    out = []
    for s in range(slabs):
        for r in range(rows):
            for c in range(cols):
                u = s * per + r * cols + c
                if c + 1 < cols:
                    out.append((u, u + 1))
                if r + 1 < rows:
                    out.append((u, u + cols))
                if s + 1 < slabs:
                    out.append((u, u + per))
    return out


def best_cuboid(grid):
    """Max-sum axis-aligned cuboid of a (slabs, rows, cols) array by full enumeration.

    Returns (exact score, key) with key = (slab_start, slab_end, r0, c0, r1, c1),
    ties broken by the smallest key.
    """
    S, R, C = grid.shape
    best = None
    for s0 in range(S):
        for s1 in range(s0 + 1, S + 1):
            for r0 in range(R):
                for r1 in range(r0, R):
                    for c0 in range(C):
                        for c1 in range(c0, C):
                            val = sum(Fraction(float(v)) for v in grid[s0:s1, r0:r1 + 1, c0:c1 + 1].ravel())
                            key = (s0, s1, r0, c0, r1, c1)
                            if best is None or val > best[0] or (val == best[0] and key < best[1]):
                                best = (val, key)
    return best
