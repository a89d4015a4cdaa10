"""Pipeline stages over versioned file intermediates.

Each stage reads the previous stage's files from the output directory,
writes its own, and records inputs/outputs (with SHA-256 digests) in
manifest.json. Reruns with identical config and inputs reproduce
byte-identical report files; only stage timings differ.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .community import (
    Partition,
    best_of_restarts,
    read_partition_csv,
    resolution_sweep,
    write_partition_csv,
    write_partition_geojson,
    write_sweep_csv,
)
from .errors import PrerequisiteError
from .flow import (
    in_out_ratio,
    induce_flow_matrix,
    net_flow_edges,
    null_model,
    write_flow_matrix_csv,
    write_net_flow_csv,
    write_ratio_csv,
)
from .ingest import (
    DEFAULT_BBOX,
    DEFAULT_RESOLUTION,
    GridSpec,
    PostRecord,
    TileId,
    UserLocationMap,
    locate_users,
    parse_posts,
    post_to_json_line,
)
from .network import (
    build_mention_network,
    filter_tiles,
    network_stats,
    read_edges_csv,
    symmetrize,
    write_edges_csv,
)
from .sentiment import (
    baseline_correct,
    default_lexicon,
    friendliest_pairs,
    load_lexicon,
    polarity_matrix,
    sentiment_summary,
    write_corrected_csv,
    write_pairs_csv,
    write_polarity_csv,
    write_summary_csv,
)
from .vocab import (
    build_region_corpora,
    local_outbound_differences,
    pairwise_differences,
    tfidf,
    write_cosine_matrix_csv,
    write_rankdiff_local_out_csv,
    write_rankdiff_pairs_csv,
    write_tfidf_csv,
)

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"


@dataclass
class PipelineConfig:
    input_path: str
    outdir: str
    bbox: tuple[float, float, float, float] = DEFAULT_BBOX
    resolutions: list[int] = field(default_factory=lambda: [DEFAULT_RESOLUTION])
    restarts: int = 100
    rank_threshold: float = 0.001
    lexicon_path: str | None = None
    top_k: int = 100
    seed: int = 0

    @property
    def resolution(self) -> int:
        """Primary grid resolution (first in the list)."""
        return self.resolutions[0]

    def grid(self) -> GridSpec:
        return GridSpec(bbox=self.bbox, resolution=self.resolution)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        cfg = cls(input_path=data["input_path"], outdir=data["outdir"])
        if "bbox" in data:
            cfg.bbox = tuple(data["bbox"])
        if "resolutions" in data:
            cfg.resolutions = [int(x) for x in data["resolutions"]]
        for key in ("restarts", "top_k", "seed"):
            if key in data and data[key] is not None:
                setattr(cfg, key, int(data[key]))
        if data.get("rank_threshold") is not None:
            cfg.rank_threshold = float(data["rank_threshold"])
        if data.get("lexicon_path") is not None:
            cfg.lexicon_path = str(data["lexicon_path"])
        return cfg


# -- manifest ----------------------------------------------------------------


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def load_manifest(outdir: Path) -> dict:
    path = outdir / MANIFEST_NAME
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    return {
        "format_version": MANIFEST_VERSION,
        "package_version": __version__,
        "config": None,
        "stages": {},
    }


def save_manifest(outdir: Path, manifest: dict) -> None:
    with open(outdir / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def bundle_digests(outdir: Path) -> dict[str, str]:
    """SHA-256 of every report file (the manifest itself is excluded)."""
    return {
        p.name: sha256_file(p)
        for p in sorted(outdir.iterdir())
        if p.is_file() and p.name != MANIFEST_NAME
    }


def _record_stage(
    outdir: Path,
    manifest: dict,
    stage: str,
    started: float,
    inputs: dict[str, str],
    outputs: list[Path],
    info: dict,
    status: str = "ok",
) -> None:
    manifest["stages"][stage] = {
        "status": status,
        "duration_s": round(time.perf_counter() - started, 6),
        "inputs": inputs,
        "outputs": {p.name: sha256_file(p) for p in outputs if p.exists()},
        "info": info,
    }
    save_manifest(outdir, manifest)


def _require(outdir: Path, filename: str, producer: str) -> Path:
    path = outdir / filename
    if not path.exists():
        raise PrerequisiteError(f"missing {path}; run the '{producer}' stage first")
    return path


def _stored_config(outdir: Path) -> PipelineConfig:
    manifest = load_manifest(outdir)
    if not manifest.get("config"):
        raise PrerequisiteError(
            f"no pipeline config recorded in {outdir / MANIFEST_NAME}; run the 'ingest' stage first"
        )
    return PipelineConfig.from_dict(manifest["config"])


# -- intermediates -----------------------------------------------------------


def write_posts_jsonl(path: Path, posts: list[PostRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for post in posts:
            fh.write(post_to_json_line(post))
            fh.write("\n")


def read_posts_jsonl(path: Path, bbox) -> list[PostRecord]:
    with open(path, encoding="utf-8") as fh:
        posts, rejections = parse_posts(fh, bbox)
    if rejections.total():
        raise PrerequisiteError(
            f"{path} is not a clean intermediate ({rejections.total()} rejected lines)"
        )
    return posts


def write_user_tiles_csv(path: Path, locations: UserLocationMap) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "col", "row", "weight"])
        for user in sorted(locations.weights):
            for tile, weight in sorted(locations.weights[user].items()):
                writer.writerow([user, tile.col, tile.row, repr(weight)])


def read_user_tiles_csv(path: Path) -> UserLocationMap:
    weights: dict[str, dict[TileId, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            tile = TileId(int(row["col"]), int(row["row"]))
            weights.setdefault(row["user_id"], {})[tile] = float(row["weight"])
    return UserLocationMap(weights=weights)


def _write_stats_txt(path: Path, stats: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(stats):
            fh.write(f"{key}={stats[key]}\n")


# -- stages ------------------------------------------------------------------


def stage_ingest(config: PipelineConfig) -> dict:
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(outdir)
    manifest["config"] = config.to_dict()
    started = time.perf_counter()

    input_path = Path(config.input_path)
    if not input_path.exists():
        raise FileNotFoundError(f"input file not found: {input_path}")
    with open(input_path, encoding="utf-8") as fh:
        posts, rejections = parse_posts(fh, config.bbox)
    locations = locate_users(posts, config.grid())

    write_posts_jsonl(outdir / "posts.jsonl", posts)
    write_user_tiles_csv(outdir / "user_tiles.csv", locations)

    info = {
        "posts_kept": len(posts),
        "users_located": len(locations),
        "rejections": asdict(rejections),
    }
    _record_stage(
        outdir,
        manifest,
        "ingest",
        started,
        inputs={input_path.name: sha256_file(input_path)},
        outputs=[outdir / "posts.jsonl", outdir / "user_tiles.csv"],
        info=info,
    )
    return info


def stage_network(outdir: Path) -> dict:
    config = _stored_config(outdir)
    manifest = load_manifest(outdir)
    started = time.perf_counter()
    posts_path = _require(outdir, "posts.jsonl", "ingest")
    tiles_path = _require(outdir, "user_tiles.csv", "ingest")

    posts = read_posts_jsonl(posts_path, config.bbox)
    locations = read_user_tiles_csv(tiles_path)
    net, skipped = build_mention_network(posts, locations)
    filtered = filter_tiles(net)
    undirected = symmetrize(filtered)
    stats = network_stats(undirected)

    write_edges_csv(outdir / "tile_edges.csv", filtered, undirected)
    _write_stats_txt(outdir / "network_stats.txt", stats)

    info = {
        "mention_events_skipped": skipped,
        "tiles_before_filter": len(net.nodes),
        "tiles_after_filter": len(filtered.nodes),
        "total_directed_weight": filtered.total_weight(),
        "stats": stats,
    }
    _record_stage(
        outdir,
        manifest,
        "network",
        started,
        inputs={p.name: sha256_file(p) for p in (posts_path, tiles_path)},
        outputs=[outdir / "tile_edges.csv", outdir / "network_stats.txt"],
        info=info,
    )
    return info


def stage_communities(outdir: Path) -> dict:
    config = _stored_config(outdir)
    manifest = load_manifest(outdir)
    started = time.perf_counter()
    edges_path = _require(outdir, "tile_edges.csv", "network")

    _, undirected = read_edges_csv(edges_path)
    partition = best_of_restarts(undirected, config.restarts, config.seed)

    write_partition_csv(outdir / "partition.csv", partition)
    write_partition_geojson(outdir / "partition.geojson", partition, config.grid())

    info = {
        "communities": partition.community_count(),
        "modularity_q": partition.modularity_q,
        "winning_seed": partition.seed,
        "restarts": partition.restarts_used,
    }
    _record_stage(
        outdir,
        manifest,
        "communities",
        started,
        inputs={edges_path.name: sha256_file(edges_path)},
        outputs=[outdir / "partition.csv", outdir / "partition.geojson"],
        info=info,
    )
    return info


def _load_analysis_inputs(outdir: Path, config: PipelineConfig):
    paths = (
        _require(outdir, "posts.jsonl", "ingest"),
        _require(outdir, "user_tiles.csv", "ingest"),
        _require(outdir, "partition.csv", "communities"),
    )
    posts = read_posts_jsonl(paths[0], config.bbox)
    locations = read_user_tiles_csv(paths[1])
    assignment = read_partition_csv(paths[2])
    inputs = {p.name: sha256_file(p) for p in paths}
    return posts, locations, assignment, inputs


def stage_vocab(outdir: Path) -> dict:
    config = _stored_config(outdir)
    manifest = load_manifest(outdir)
    started = time.perf_counter()
    posts, locations, assignment, inputs = _load_analysis_inputs(outdir, config)

    corpora = build_region_corpora(posts, assignment, locations)
    vectors = corpora.word_vectors()
    write_cosine_matrix_csv(outdir / "cosine_matrix.csv", vectors)
    nonempty = [v for v in vectors if v.counts]
    if len(nonempty) >= 2:
        write_tfidf_csv(outdir / "tfidf_top.csv", tfidf(nonempty, config.top_k))
    else:
        write_tfidf_csv(outdir / "tfidf_top.csv", {})
    write_rankdiff_local_out_csv(
        outdir / "rankdiff_local_out.csv",
        local_outbound_differences(corpora, config.rank_threshold),
    )
    write_rankdiff_pairs_csv(
        outdir / "rankdiff_pairs.csv",
        pairwise_differences(corpora, config.rank_threshold),
    )

    info = {"regions": len(corpora.regions), "posts_skipped_no_region": corpora.skipped_posts}
    _record_stage(
        outdir,
        manifest,
        "vocab",
        started,
        inputs=inputs,
        outputs=[
            outdir / "cosine_matrix.csv",
            outdir / "tfidf_top.csv",
            outdir / "rankdiff_local_out.csv",
            outdir / "rankdiff_pairs.csv",
        ],
        info=info,
    )
    return info


def stage_flow(outdir: Path) -> dict:
    config = _stored_config(outdir)
    manifest = load_manifest(outdir)
    started = time.perf_counter()
    edges_path = _require(outdir, "tile_edges.csv", "network")
    partition_path = _require(outdir, "partition.csv", "communities")

    directed, _ = read_edges_csv(edges_path)
    assignment = read_partition_csv(partition_path)
    observed = induce_flow_matrix(directed, assignment)
    expected = null_model(observed)

    write_flow_matrix_csv(outdir / "flow_observed.csv", observed)
    write_flow_matrix_csv(outdir / "flow_null.csv", expected)
    write_net_flow_csv(outdir / "net_flow_edges.csv", net_flow_edges(observed))
    write_ratio_csv(outdir / "inout_ratio.csv", in_out_ratio(observed))

    info = {"total_flow": float(observed.m.sum()), "communities": len(observed.labels)}
    _record_stage(
        outdir,
        manifest,
        "flow",
        started,
        inputs={p.name: sha256_file(p) for p in (edges_path, partition_path)},
        outputs=[
            outdir / "flow_observed.csv",
            outdir / "flow_null.csv",
            outdir / "net_flow_edges.csv",
            outdir / "inout_ratio.csv",
        ],
        info=info,
    )
    return info


def stage_sentiment(outdir: Path) -> dict:
    config = _stored_config(outdir)
    manifest = load_manifest(outdir)
    started = time.perf_counter()

    if config.lexicon_path is not None:
        lexicon_path = Path(config.lexicon_path)
        if not lexicon_path.exists():
            raise FileNotFoundError(f"lexicon file not found: {lexicon_path}")
        lexicon = load_lexicon(lexicon_path)
    else:
        lexicon = default_lexicon()

    posts, locations, assignment, inputs = _load_analysis_inputs(outdir, config)

    matrix, skipped = polarity_matrix(posts, assignment, locations, lexicon)
    write_polarity_csv(outdir / "polarity_matrix.csv", matrix)
    corrected = baseline_correct(matrix)
    write_corrected_csv(outdir / "polarity_corrected.csv", corrected, matrix.labels)
    write_summary_csv(outdir / "sentiment_summary.csv", sentiment_summary(matrix))
    write_pairs_csv(
        outdir / "friendliest_pairs.csv", friendliest_pairs(corrected, matrix.labels)
    )

    info = {
        "events_scored": int(matrix.count.sum()),
        "events_skipped_no_region": skipped,
    }
    _record_stage(
        outdir,
        manifest,
        "sentiment",
        started,
        inputs=inputs,
        outputs=[
            outdir / "polarity_matrix.csv",
            outdir / "polarity_corrected.csv",
            outdir / "sentiment_summary.csv",
            outdir / "friendliest_pairs.csv",
        ],
        info=info,
    )
    return info


def stage_sweep(outdir: Path, resolutions: list[int] | None = None) -> dict:
    config = _stored_config(outdir)
    manifest = load_manifest(outdir)
    started = time.perf_counter()
    posts_path = _require(outdir, "posts.jsonl", "ingest")
    posts = read_posts_jsonl(posts_path, config.bbox)

    sweep_resolutions = resolutions if resolutions is not None else config.resolutions
    rows = resolution_sweep(
        posts, config.bbox, sweep_resolutions, config.restarts, config.seed
    )
    write_sweep_csv(outdir / "sweep.csv", rows)

    info = {
        "rows": [
            {
                "X": row.resolution,
                "communities": row.community_count,
                "Q": row.modularity_q,
                "empty_network": row.empty_network,
            }
            for row in rows
        ]
    }
    _record_stage(
        outdir,
        manifest,
        "sweep",
        started,
        inputs={posts_path.name: sha256_file(posts_path)},
        outputs=[outdir / "sweep.csv"],
        info=info,
    )
    return info


RUN_STAGES = ("ingest", "network", "communities", "vocab", "flow", "sentiment", "sweep")


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute every stage in dependency order; returns the final manifest.

    On stage failure the exception propagates after the manifest records
    which stage failed; earlier outputs stay on disk.
    """
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    stage_calls = {
        "ingest": lambda: stage_ingest(config),
        "network": lambda: stage_network(outdir),
        "communities": lambda: stage_communities(outdir),
        "vocab": lambda: stage_vocab(outdir),
        "flow": lambda: stage_flow(outdir),
        "sentiment": lambda: stage_sentiment(outdir),
        "sweep": lambda: stage_sweep(outdir),
    }
    for stage in RUN_STAGES:
        try:
            stage_calls[stage]()
        except Exception:
            manifest = load_manifest(outdir)
            manifest["stages"].setdefault(stage, {})["status"] = "failed"
            save_manifest(outdir, manifest)
            raise
    manifest = load_manifest(outdir)
    manifest["bundle"] = bundle_digests(outdir)
    save_manifest(outdir, manifest)
    return manifest
