"""Tile-level mention networks.

Builds the directed weighted network whose nodes are grid tiles and whose
edge a->b accumulates the fractional weight of mention events sent from
users in tile a to users in tile b, then filters out tiles with no
internal mentions and symmetrizes for community detection.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .ingest import PostRecord, TileId, UserLocationMap

Pair = tuple[TileId, TileId]


@dataclass
class TileNetwork:
    """Directed weighted graph over tiles; self-edges (a == b) are allowed."""

    nodes: set[TileId] = field(default_factory=set)
    edges: dict[Pair, float] = field(default_factory=dict)

    def weight(self, a: TileId, b: TileId) -> float:
        return self.edges.get((a, b), 0.0)

    def self_weight(self, a: TileId) -> float:
        return self.edges.get((a, a), 0.0)

    def total_weight(self) -> float:
        return sum(self.edges.values())


@dataclass
class UndirectedTileNetwork:
    """Symmetrized network: weight of {a, b} is e_ab + e_ba, no self-pairs."""

    nodes: set[TileId] = field(default_factory=set)
    weights: dict[Pair, float] = field(default_factory=dict)  # key (a, b) with a < b

    def weight(self, a: TileId, b: TileId) -> float:
        if a > b:
            a, b = b, a
        return self.weights.get((a, b), 0.0)

    def total_weight(self) -> float:
        return sum(self.weights.values())

    def neighbors(self) -> dict[TileId, dict[TileId, float]]:
        """Adjacency view (both directions materialized)."""
        adj: dict[TileId, dict[TileId, float]] = {node: {} for node in self.nodes}
        for (a, b), w in self.weights.items():
            adj[a][b] = w
            adj[b][a] = w
        return adj

    def degrees(self) -> dict[TileId, float]:
        deg = dict.fromkeys(self.nodes, 0.0)
        for (a, b), w in self.weights.items():
            deg[a] += w
            deg[b] += w
        return deg


def build_mention_network(
    posts: Iterable[PostRecord], locations: UserLocationMap
) -> tuple[TileNetwork, int]:
    """Accumulate the directed tile network from mention events.

    Each (author -> mentioned user) event adds f_u(a) * f_v(b) to edge
    (a, b) for every tile pair in the two users' fractional supports, so
    one fully located event contributes exactly 1.0 of total weight.
    A post mentioning k users contributes k events.

    Returns the network and the number of mention events skipped because
    the target (or author) had no located posts.
    """
    acc: dict[Pair, float] = defaultdict(float)
    nodes: set[TileId] = set()
    skipped = 0
    for post in posts:
        author_tiles = locations.tiles_of(post.author_id)
        for target in post.mentioned_ids:
            target_tiles = locations.tiles_of(target)
            if not author_tiles or not target_tiles:
                skipped += 1
                continue
            for a, fa in author_tiles.items():
                for b, fb in target_tiles.items():
                    acc[(a, b)] += fa * fb
                    nodes.add(a)
                    nodes.add(b)
    net = TileNetwork(nodes=nodes, edges=dict(sorted(acc.items())))
    return net, skipped


def filter_tiles(net: TileNetwork) -> TileNetwork:
    """Drop every tile with zero internal mentions (e_aa == 0).

    Removes very sparsely populated tiles whose community assignment would
    be arbitrary. Idempotent.
    """
    keep = {a for a in net.nodes if net.self_weight(a) > 0.0}
    edges = {
        (a, b): w for (a, b), w in net.edges.items() if a in keep and b in keep
    }
    return TileNetwork(nodes=keep, edges=edges)


def symmetrize(net: TileNetwork) -> UndirectedTileNetwork:
    """Collapse direction: w_{ab} = e_ab + e_ba for a != b, self-edges dropped."""
    weights: dict[Pair, float] = defaultdict(float)
    for (a, b), w in net.edges.items():
        if a == b:
            continue
        key = (a, b) if a < b else (b, a)
        weights[key] += w
    return UndirectedTileNetwork(nodes=set(net.nodes), weights=dict(sorted(weights.items())))


def network_stats(net: UndirectedTileNetwork) -> dict[str, float | int | bool]:
    """Summary statistics of the undirected network.

    Density is edges / (n * (n - 1) / 2), defined as 0 for n <= 1.
    """
    n = len(net.nodes)
    edge_count = sum(1 for w in net.weights.values() if w > 0.0)
    if n <= 1:
        density = 0.0
    else:
        density = edge_count / (n * (n - 1) / 2)
    mean_degree = (2.0 * edge_count / n) if n else 0.0
    mean_weighted_degree = (2.0 * net.total_weight() / n) if n else 0.0
    return {
        "node_count": n,
        "edge_count": edge_count,
        "density": density,
        "mean_degree": mean_degree,
        "mean_weighted_degree": mean_weighted_degree,
        "is_connected": _is_connected(net),
    }


def _is_connected(net: UndirectedTileNetwork) -> bool:
    if not net.nodes:
        return False
    adj = net.neighbors()
    start = next(iter(sorted(net.nodes)))
    seen = {start}
    stack = [start]
    while stack:
        node = stack.pop()
        for nbr in adj[node]:
            if nbr not in seen:
                seen.add(nbr)
                stack.append(nbr)
    return len(seen) == len(net.nodes)


def write_edges_csv(
    path, directed: TileNetwork, undirected: UndirectedTileNetwork
) -> None:
    """Write both edge sets to one CSV keyed by a directed/undirected flag."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["a_col", "a_row", "b_col", "b_row", "weight", "kind"])
        for (a, b), w in sorted(directed.edges.items()):
            writer.writerow([a.col, a.row, b.col, b.row, repr(w), "directed"])
        for (a, b), w in sorted(undirected.weights.items()):
            writer.writerow([a.col, a.row, b.col, b.row, repr(w), "undirected"])


def read_edges_csv(path) -> tuple[TileNetwork, UndirectedTileNetwork]:
    """Read back the edge-list file written by write_edges_csv."""
    directed = TileNetwork()
    undirected = UndirectedTileNetwork()
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            a = TileId(int(row["a_col"]), int(row["a_row"]))
            b = TileId(int(row["b_col"]), int(row["b_row"]))
            w = float(row["weight"])
            if row["kind"] == "directed":
                directed.edges[(a, b)] = w
                directed.nodes.add(a)
                directed.nodes.add(b)
            else:
                undirected.weights[(a, b)] = w
    # symmetrize keeps every node, including tiles with only self-edges
    undirected.nodes.update(directed.nodes)
    return directed, undirected
