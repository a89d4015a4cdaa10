"""Weighted modularity and Louvain community detection.

The detector is the standard two-phase local-move + aggregation heuristic
with seeded node order, deterministic tie-breaking (highest gain wins,
ties to the smallest community label) and a 1e-9 per-level gain cutoff,
so identical (network, seed) inputs always produce identical partitions.
Final labels are renumbered so community 0 has the largest total internal
weight.
"""

from __future__ import annotations

import csv
import json
import math
import random
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .errors import ContractViolation, EmptyNetworkError
from .ingest import BBox, GridSpec, PostRecord, TileId, locate_users
from .network import UndirectedTileNetwork, build_mention_network, filter_tiles, symmetrize

# Stop refining a level once a full pass gains less than this much Q.
GAIN_THRESHOLD = 1e-9

DEFAULT_RESTARTS = 100


@dataclass
class Partition:
    """Tile -> community assignment with its modularity score."""

    assignment: dict[TileId, int]
    modularity_q: float
    seed: int
    restarts_used: int = 1

    def community_count(self) -> int:
        return len(set(self.assignment.values()))

    def communities(self) -> dict[int, list[TileId]]:
        groups: dict[int, list[TileId]] = defaultdict(list)
        for tile, label in sorted(self.assignment.items()):
            groups[label].append(tile)
        return dict(sorted(groups.items()))


@dataclass
class SweepRow:
    """One grid resolution's outcome in the sensitivity sweep."""

    resolution: int
    community_count: int
    modularity_q: float
    empty_network: bool = False


def modularity(net: UndirectedTileNetwork, partition) -> float:
    """Newman weighted modularity Q of a partition (resolution fixed at 1).

    Q = sum over communities of [S_in/(2m) - (S_tot/(2m))^2] where S_in
    counts intra-community weight over ordered node pairs and S_tot sums
    member degrees. Accepts a Partition or a plain tile -> label mapping.
    """
    assignment: Mapping[TileId, int] = getattr(partition, "assignment", partition)
    m = net.total_weight()
    if not net.nodes or m <= 0.0:
        raise EmptyNetworkError("modularity requires a network with positive total weight")
    missing = [node for node in net.nodes if node not in assignment]
    if missing:
        raise ContractViolation(f"{len(missing)} nodes lack a community, e.g. {missing[0]}")

    two_m = 2.0 * m
    s_in: dict[int, float] = defaultdict(float)
    s_tot: dict[int, float] = defaultdict(float)
    for (a, b), w in net.weights.items():
        ca, cb = assignment[a], assignment[b]
        if ca == cb:
            s_in[ca] += 2.0 * w
    for node, degree in net.degrees().items():
        s_tot[assignment[node]] += degree

    q = 0.0
    for label in s_tot:
        q += s_in.get(label, 0.0) / two_m - (s_tot[label] / two_m) ** 2
    return q


# -- Louvain internals -------------------------------------------------------
# Graphs are index-based adjacency lists; adj[i][i] stores the full diagonal
# matrix entry (twice the aggregated intra-community weight), so a node's
# weighted degree is simply the sum of its adjacency row.


def _one_level(
    adj: list[dict[int, float]], two_m: float, rng: random.Random
) -> tuple[list[int], bool]:
    """Greedy local moves until a full pass gains less than GAIN_THRESHOLD.

    Returns (node -> community, whether any node moved).
    """
    n = len(adj)
    k = [sum(row.values()) for row in adj]
    node2com = list(range(n))
    com_tot = k.copy()
    order = list(range(n))
    rng.shuffle(order)

    moved_any = False
    while True:
        pass_gain = 0.0
        for node in order:
            com_old = node2com[node]
            weight_to: dict[int, float] = defaultdict(float)
            for nbr, w in adj[node].items():
                if nbr != node:
                    weight_to[node2com[nbr]] += w

            com_tot[com_old] -= k[node]

            def gain(com: int) -> float:
                return weight_to.get(com, 0.0) - com_tot[com] * k[node] / two_m

            best_com = com_old
            best_gain = gain(com_old)
            for com in sorted(weight_to):
                g = gain(com)
                if g > best_gain:  # ties keep the smaller label
                    best_gain, best_com = g, com

            com_tot[best_com] += k[node]
            if best_com != com_old:
                pass_gain += 2.0 * (best_gain - gain(com_old)) / two_m
                node2com[node] = best_com
                moved_any = True
        if pass_gain < GAIN_THRESHOLD:
            break
    return node2com, moved_any


def _renumber(labels: Iterable[int]) -> dict[int, int]:
    return {old: new for new, old in enumerate(sorted(set(labels)))}


def _aggregate(
    adj: list[dict[int, float]], node2com: list[int]
) -> list[dict[int, float]]:
    """Collapse communities into supernodes, accumulating the diagonal."""
    dense = _renumber(node2com)
    size = len(dense)
    agg: list[dict[int, float]] = [defaultdict(float) for _ in range(size)]
    for i, row in enumerate(adj):
        ci = dense[node2com[i]]
        for j, w in row.items():
            cj = dense[node2com[j]]
            agg[ci][cj] += w
    return [dict(row) for row in agg]


def louvain(net: UndirectedTileNetwork, seed: int = 0) -> Partition:
    """Run Louvain once; deterministic for a given (net, seed)."""
    if not net.nodes:
        raise EmptyNetworkError("cannot detect communities in an empty network")
    m = net.total_weight()
    if m <= 0.0:
        raise EmptyNetworkError("cannot detect communities with zero total weight")

    nodes = sorted(net.nodes)
    index = {node: i for i, node in enumerate(nodes)}
    adj: list[dict[int, float]] = [{} for _ in nodes]
    for (a, b), w in net.weights.items():
        ia, ib = index[a], index[b]
        adj[ia][ib] = adj[ia].get(ib, 0.0) + w
        adj[ib][ia] = adj[ib].get(ia, 0.0) + w
    two_m = 2.0 * m

    rng = random.Random(seed)
    membership = list(range(len(nodes)))  # original node -> current supernode
    current = adj
    while True:
        node2com, moved = _one_level(current, two_m, rng)
        if not moved:
            break
        dense = _renumber(node2com)
        membership = [dense[node2com[sn]] for sn in membership]
        current = _aggregate(current, node2com)
        if len(current) == 1:
            break

    raw = {node: membership[index[node]] for node in nodes}
    assignment = _relabel_by_internal_weight(raw, net)
    return Partition(
        assignment=assignment,
        modularity_q=modularity(net, assignment),
        seed=seed,
        restarts_used=1,
    )


def _relabel_by_internal_weight(
    assignment: dict[TileId, int], net: UndirectedTileNetwork
) -> dict[TileId, int]:
    """Renumber labels so community 0 carries the most internal weight.

    Ties break on the smallest member tile, keeping runs reproducible.
    """
    internal: dict[int, float] = defaultdict(float)
    first_tile: dict[int, TileId] = {}
    for tile, label in sorted(assignment.items()):
        first_tile.setdefault(label, tile)
        internal.setdefault(label, 0.0)
    for (a, b), w in net.weights.items():
        if assignment[a] == assignment[b]:
            internal[assignment[a]] += w
    ordering = sorted(internal, key=lambda lab: (-internal[lab], first_tile[lab]))
    remap = {old: new for new, old in enumerate(ordering)}
    return {tile: remap[label] for tile, label in sorted(assignment.items())}


def best_of_restarts(
    net: UndirectedTileNetwork,
    n_restarts: int = DEFAULT_RESTARTS,
    base_seed: int = 0,
) -> Partition:
    """Keep the highest-modularity partition over seeded restarts.

    Seeds run base_seed .. base_seed + n_restarts - 1; ties keep the
    lowest seed.
    """
    if n_restarts < 1:
        raise ValueError(f"n_restarts must be >= 1, got {n_restarts}")
    best: Partition | None = None
    for seed in range(base_seed, base_seed + n_restarts):
        candidate = louvain(net, seed)
        if best is None or candidate.modularity_q > best.modularity_q:
            best = candidate
    assert best is not None
    best.restarts_used = n_restarts
    return best


def resolution_sweep(
    posts: list[PostRecord],
    bbox: BBox,
    resolutions: Iterable[int],
    n_restarts: int = DEFAULT_RESTARTS,
    base_seed: int = 0,
) -> list[SweepRow]:
    """Rerun the grid -> network -> communities chain per grid resolution.

    The user location map is rebuilt for every resolution since tile
    boundaries move. A resolution whose filtered network is empty yields a
    flagged row with community_count 0.
    """
    rows: list[SweepRow] = []
    for resolution in resolutions:
        grid = GridSpec(bbox=bbox, resolution=resolution)
        locations = locate_users(posts, grid)
        net, _ = build_mention_network(posts, locations)
        undirected = symmetrize(filter_tiles(net))
        try:
            partition = best_of_restarts(undirected, n_restarts, base_seed)
        except EmptyNetworkError:
            rows.append(SweepRow(resolution, 0, math.nan, empty_network=True))
            continue
        rows.append(
            SweepRow(resolution, partition.community_count(), partition.modularity_q)
        )
    return rows


def name_communities(
    partition: Partition, namer: Callable[[int, list[TileId]], str]
) -> dict[int, str]:
    """Attach display names to community labels via a caller-supplied hook."""
    return {
        label: namer(label, members)
        for label, members in partition.communities().items()
    }


def write_partition_csv(path, partition: Partition) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["col", "row", "community"])
        for tile, label in sorted(partition.assignment.items()):
            writer.writerow([tile.col, tile.row, label])


def read_partition_csv(path) -> dict[TileId, int]:
    assignment: dict[TileId, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            assignment[TileId(int(row["col"]), int(row["row"]))] = int(row["community"])
    return assignment


def write_sweep_csv(path, rows: list[SweepRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["X", "communities", "Q"])
        for row in rows:
            writer.writerow([row.resolution, row.community_count, repr(row.modularity_q)])


def write_partition_geojson(path, partition: Partition, grid: GridSpec) -> None:
    """Emit tile polygons with their community label for external mapping."""
    features = []
    for tile, label in sorted(partition.assignment.items()):
        w, s, e, n = grid.tile_bounds(tile)
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[[w, s], [e, s], [e, n], [w, n], [w, s]]],
                },
                "properties": {"col": tile.col, "row": tile.row, "community": label},
            }
        )
    collection = {"type": "FeatureCollection", "features": features}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(collection, fh, sort_keys=True)
        fh.write("\n")
