"""Seeded graph generators and the small hand-made toy graph."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import RelationStore

# Undirected weighted edges.  Shortest (1,4) improves 10 -> 7 -> 5 over the
# first three iterations of the doubling (non-linear) plan, and the (4,8)
# shortest path is 4-3-2-1-5-6-7-8 with cost 10.
TOY_EDGES: tuple[tuple[int, int, int], ...] = (
    (1, 4, 10),
    (1, 3, 4),
    (3, 4, 3),
    (1, 2, 1),
    (2, 3, 1),
    (1, 5, 2),
    (5, 6, 1),
    (6, 7, 1),
    (7, 8, 1),
    (5, 8, 20),
    (5, 7, 9),
)

# Nodes 1-4 on worker 0 and 5-8 on worker 1.
TOY_ASSIGNMENT: dict[tuple[int], int] = {(n,): 0 if n <= 4 else 1 for n in range(1, 9)}

TOY_FAMILY_OFFSET = 8


def undirected(edges) -> list[tuple[int, ...]]:
    out = []
    for e in edges:
        out.append(tuple(e))
        out.append((e[1], e[0], *e[2:]))
    return sorted(set(out))


def toy_arcs() -> list[tuple[int, int, int]]:
    return undirected(TOY_EDGES)


def toy_family(copies: int) -> list[tuple[int, int, int]]:
    """``copies`` toy graphs, copy k shifted by 8k and joined 4+8k -- 1+8(k+1) with weight 1."""
    edges = []
    for k in range(copies):
        off = k * TOY_FAMILY_OFFSET
        edges.extend((a + off, b + off, w) for a, b, w in TOY_EDGES)
        if k + 1 < copies:
            edges.append((8 + off, 1 + off + TOY_FAMILY_OFFSET, 1))
    return undirected(edges)


def toy_family_assignment(copies: int) -> dict[tuple[int], int]:
    return {
        (n + k * TOY_FAMILY_OFFSET,): w
        for k in range(copies)
        for (n,), w in TOY_ASSIGNMENT.items()
    }


def random_weighted_graph(
    seed: int, max_nodes: int = 12, density: float = 0.3, weights: tuple[int, int] = (1, 10)
) -> tuple[int, list[tuple[int, int, int]]]:
    """Directed graph on 2..max_nodes nodes; each ordered pair (no loops) is an arc with prob. ``density``."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_nodes + 1))
    arcs = []
    for a in range(n):
        for b in range(n):
            if a != b and rng.random() < density:
                arcs.append((a, b, int(rng.integers(weights[0], weights[1] + 1))))
    return n, arcs


def random_dag(seed: int, max_nodes: int = 15, density: float = 0.3) -> tuple[int, list[tuple[int, int]]]:
    """Random DAG: arcs only from lower to higher index under a random node relabelling."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_nodes + 1))
    label = rng.permutation(n)
    arcs = []
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < density:
                arcs.append((int(label[a]), int(label[b])))
    return n, arcs


def random_digraph(seed: int, nodes: int, density: float) -> list[tuple[int, int]]:
    rng = np.random.default_rng(seed)
    mask = rng.random((nodes, nodes)) < density
    np.fill_diagonal(mask, False)
    return [(int(a), int(b)) for a, b in zip(*np.nonzero(mask))]


def arc_store(arcs, predicate: str = "arc") -> RelationStore:
    return RelationStore({predicate: [tuple(a) for a in arcs]})


def write_tsv(path: str | Path, rows) -> None:
    Path(path).write_text("".join("\t".join(str(v) for v in r) + "\n" for r in rows))
