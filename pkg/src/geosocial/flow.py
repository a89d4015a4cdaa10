"""Community-level communication flow.

Collapses the directed tile network onto communities, extracts net-flow
edges pointing at the more-mentioned side, and compares observed volumes
against a closed-form null model that spreads each community's outgoing
mentions over the others in proportion to their incoming shares.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ContractViolation, DegenerateMarginalsError
from .ingest import TileId
from .network import TileNetwork


@dataclass
class CommunityFlowMatrix:
    """m[i][j] = mentions sent from community labels[i] to labels[j]."""

    labels: list[int]
    m: np.ndarray

    def index_of(self, label: int) -> int:
        return self.labels.index(label)

    def out_marginals(self) -> np.ndarray:
        """Outgoing inter-community mentions per community (diagonal excluded).

        The diagonal is zeroed before summing (not subtracted after) so the
        marginals are exact even in floating point.
        """
        off = self.m.copy()
        np.fill_diagonal(off, 0.0)
        return off.sum(axis=1)

    def in_marginals(self) -> np.ndarray:
        off = self.m.copy()
        np.fill_diagonal(off, 0.0)
        return off.sum(axis=0)


@dataclass(frozen=True)
class NetFlowEdge:
    """Directed surplus edge pointing at the more-mentioned community."""

    source: int
    target: int
    weight: float


def induce_flow_matrix(
    net: TileNetwork, assignment: Mapping[TileId, int]
) -> CommunityFlowMatrix:
    """Aggregate directed tile weights onto community pairs.

    Tile self-edges land on the diagonal of their community, so the matrix
    total equals the tile network's total weight exactly.
    """
    missing = [tile for tile in net.nodes if tile not in assignment]
    if missing:
        raise ContractViolation(
            f"{len(missing)} tiles lack a community, e.g. {missing[0]}"
        )
    labels = sorted({assignment[tile] for tile in net.nodes})
    index = {label: i for i, label in enumerate(labels)}
    m = np.zeros((len(labels), len(labels)))
    for (a, b), w in net.edges.items():
        m[index[assignment[a]], index[assignment[b]]] += w
    return CommunityFlowMatrix(labels=labels, m=m)


def net_flow_edges(flow: CommunityFlowMatrix) -> list[NetFlowEdge]:
    """One surplus edge per unordered pair with asymmetric volume.

    The edge runs from the community that mentions more to the one that is
    mentioned more, weighted by the difference; balanced pairs get none.
    """
    edges: list[NetFlowEdge] = []
    n = len(flow.labels)
    for i in range(n):
        for j in range(i + 1, n):
            forward = float(flow.m[i, j])
            backward = float(flow.m[j, i])
            if forward > backward:
                edges.append(NetFlowEdge(flow.labels[i], flow.labels[j], forward - backward))
            elif backward > forward:
                edges.append(NetFlowEdge(flow.labels[j], flow.labels[i], backward - forward))
    return edges


def null_model(flow: CommunityFlowMatrix) -> CommunityFlowMatrix:
    """Expected flows if outgoing mentions followed incoming shares only.

    expected[i][j] = out_i * in_j / (total incoming of everyone but i),
    which preserves each out-marginal exactly. Self-mentions are not
    redirected: the diagonal is copied from the observed matrix.
    """
    n = len(flow.labels)
    if n < 2:
        raise DegenerateMarginalsError("null model needs at least 2 communities")
    out_m = flow.out_marginals()
    in_m = flow.in_marginals()
    expected = np.diag(np.diag(flow.m)).astype(float)
    for i in range(n):
        # summing over j != i (rather than total - in_m[i]) keeps N=2 exact
        rest_in = float(np.delete(in_m, i).sum())
        if rest_in <= 0.0:
            raise DegenerateMarginalsError(
                f"community {flow.labels[i]} sees zero incoming volume elsewhere"
            )
        for j in range(n):
            if i != j:
                # out * (in/rest) keeps the N=2 case bit-exact (ratio is 1.0)
                expected[i, j] = out_m[i] * (in_m[j] / rest_in)
    return CommunityFlowMatrix(labels=list(flow.labels), m=expected)


def simulate_null(
    flow: CommunityFlowMatrix, seed: int = 0, n_samples: int = 200
) -> CommunityFlowMatrix:
    """Monte-Carlo cross-check of null_model by random re-targeting.

    Each community's outgoing mentions are redrawn toward targets with
    probability proportional to their incoming share; the average over
    samples converges on the closed form.
    """
    rng = random.Random(seed)
    n = len(flow.labels)
    out_m = flow.out_marginals()
    in_m = flow.in_marginals()
    acc = np.zeros_like(flow.m)
    for _ in range(n_samples):
        sample = np.diag(np.diag(flow.m)).astype(float)
        for i in range(n):
            targets = [j for j in range(n) if j != i]
            rest_in = float(np.delete(in_m, i).sum())
            weights = [in_m[j] / rest_in for j in targets]
            count = int(round(out_m[i]))
            for _ in range(count):
                pick = rng.choices(targets, weights=weights)[0]
                sample[i, pick] += 1.0
        acc += sample
    return CommunityFlowMatrix(labels=list(flow.labels), m=acc / n_samples)


def in_out_ratio(flow: CommunityFlowMatrix) -> dict[int, float | None]:
    """Incoming over outgoing inter-community mentions per community.

    Communities that send nothing get None (ratio undefined).
    """
    out_m = flow.out_marginals()
    in_m = flow.in_marginals()
    ratios: dict[int, float | None] = {}
    for i, label in enumerate(flow.labels):
        ratios[label] = (in_m[i] / out_m[i]) if out_m[i] > 0.0 else None
    return ratios


# -- report writers ----------------------------------------------------------


def write_flow_matrix_csv(path, flow: CommunityFlowMatrix) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["community"] + [str(lab) for lab in flow.labels])
        for i, label in enumerate(flow.labels):
            writer.writerow([label] + [repr(float(v)) for v in flow.m[i]])


def write_net_flow_csv(path, edges: list[NetFlowEdge]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["from", "to", "weight"])
        for edge in sorted(edges, key=lambda e: (e.source, e.target)):
            writer.writerow([edge.source, edge.target, repr(edge.weight)])


def write_ratio_csv(path, ratios: dict[int, float | None]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["community", "in_out_ratio"])
        for label in sorted(ratios):
            value = ratios[label]
            writer.writerow([label, "" if value is None else f"{value:.3f}"])
