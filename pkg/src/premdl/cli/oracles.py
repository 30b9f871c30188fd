"""Reference answers computed without the Datalog engine.

Shortest paths are over paths of one or more arcs, so ``(x, x)`` is present
only when x lies on a cycle, with the cost of the cheapest such cycle.
"""

from __future__ import annotations

import heapq
from collections import defaultdict

import numpy as np

_INF = 2**61


def _index(arcs) -> tuple[list[int], dict[int, int]]:
    nodes = sorted({a[0] for a in arcs} | {a[1] for a in arcs})
    return nodes, {v: k for k, v in enumerate(nodes)}


def floyd_warshall(arcs) -> set[tuple[int, int, int]]:
    nodes, idx = _index(arcs)
    n = len(nodes)
    dist = np.full((n, n), _INF, dtype=np.int64)
    for a, b, w in arcs:
        if w < 0:
            raise ValueError("negative weights are not supported by the oracle")
        i, j = idx[a], idx[b]
        dist[i, j] = min(dist[i, j], w)
    for k in range(n):
        via = dist[:, k, None] + dist[None, k, :]
        np.minimum(dist, via, out=dist)
        np.minimum(dist, _INF, out=dist)
    return {
        (nodes[i], nodes[j], int(dist[i, j]))
        for i, j in zip(*np.nonzero(dist < _INF))
    }


def dijkstra(arcs) -> set[tuple[int, int, int]]:
    adj: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for a, b, w in arcs:
        if w < 0:
            raise ValueError("negative weights are not supported by the oracle")
        adj[a].append((b, w))
    out = set()
    for s in sorted(adj):
        best: dict[int, int] = {}
        heap = [(w, b) for b, w in adj[s]]
        heapq.heapify(heap)
        while heap:
            d, v = heapq.heappop(heap)
            if v in best:
                continue
            best[v] = d
            for u, w in adj.get(v, ()):
                if u not in best:
                    heapq.heappush(heap, (d + w, u))
        out.update((s, v, d) for v, d in best.items())
    return out


def warshall(arcs) -> set[tuple[int, int]]:
    nodes, idx = _index(arcs)
    n = len(nodes)
    reach = np.zeros((n, n), dtype=bool)
    for a in arcs:
        reach[idx[a[0]], idx[a[1]]] = True
    for k in range(n):
        reach |= reach[:, k, None] & reach[None, k, :]
    return {(nodes[i], nodes[j]) for i, j in zip(*np.nonzero(reach))}


ORACLES = {
    "dijkstra": dijkstra,
    "floyd-warshall": floyd_warshall,
    "warshall": warshall,
}
