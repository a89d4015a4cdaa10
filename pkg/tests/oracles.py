"""Independent brute-force oracles.

These deliberately re-derive quantities from first principles (double
loops, full partition enumeration) so the fast implementations are
checked against a second route, not against themselves.
"""

from __future__ import annotations

import math
import random
from typing import Iterator

from geosocial.ingest import TileId
from geosocial.network import UndirectedTileNetwork


def tile(i: int) -> TileId:
    return TileId(i, 0)


def net_from_edges(edges) -> UndirectedTileNetwork:
    """Build an undirected network from (i, j, weight) integer triples."""
    nodes: set[TileId] = set()
    weights: dict[tuple[TileId, TileId], float] = {}
    for i, j, w in edges:
        a, b = tile(i), tile(j)
        nodes.update((a, b))
        key = (a, b) if a < b else (b, a)
        weights[key] = weights.get(key, 0.0) + float(w)
    return UndirectedTileNetwork(nodes=nodes, weights=weights)


def modularity_bruteforce(net: UndirectedTileNetwork, assignment) -> float:
    """Direct double-loop evaluation of Q over ordered node pairs."""
    nodes = sorted(net.nodes)
    two_m = 2.0 * net.total_weight()
    deg = net.degrees()
    q = 0.0
    for a in nodes:
        for b in nodes:
            if assignment[a] != assignment[b]:
                continue
            w = net.weight(a, b) if a != b else 0.0
            q += w - deg[a] * deg[b] / two_m
    return q / two_m


def all_partitions(items) -> Iterator[dict]:
    """Every set partition, encoded as restricted growth strings."""
    items = list(items)
    n = len(items)
    if n == 0:
        yield {}
        return

    def rec(i: int, max_label: int, labels: list[int]):
        if i == n:
            yield dict(zip(items, labels))
            return
        for lab in range(max_label + 1):
            yield from rec(i + 1, max_label, labels + [lab])
        yield from rec(i + 1, max_label + 1, labels + [max_label + 1])

    yield from rec(1, 0, [0])


def exhaustive_best_q(net: UndirectedTileNetwork) -> float:
    best = -math.inf
    for assignment in all_partitions(sorted(net.nodes)):
        q = modularity_bruteforce(net, assignment)
        if q > best:
            best = q
    return best


def random_weighted_net(rng: random.Random, n: int, p: float = 0.5) -> UndirectedTileNetwork:
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.append((i, j, rng.uniform(0.1, 3.0)))
    if not edges:
        edges.append((0, 1, rng.uniform(0.1, 3.0)))
    return net_from_edges(edges)
