"""Command line interface.

Subcommands mirror the pipeline stages (ingest, network, communities,
vocab, flow, sentiment, sweep) plus synth for generating test corpora and
run for the whole chain. Exit codes: 0 success, 1 usage, 2 data error,
3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from .errors import GeoSocialError
from .ingest import DEFAULT_BBOX, DEFAULT_RESOLUTION
from .pipeline import (
    RUN_STAGES,
    PipelineConfig,
    run_pipeline,
    stage_communities,
    stage_flow,
    stage_ingest,
    stage_network,
    stage_sentiment,
    stage_sweep,
    stage_vocab,
    write_posts_jsonl,
)
from .synth import config_from_dict, generate, planted_config, write_truth_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse reports usage problems via exception, not SystemExit(2)."""

    def error(self, message):
        raise _UsageError(message)


def _parse_bbox(raw: str) -> tuple[float, float, float, float]:
    parts = raw.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("bbox needs lonmin,latmin,lonmax,latmax")
    return tuple(float(p) for p in parts)  # type: ignore[return-value]


def _parse_grids(raw: str) -> list[int]:
    try:
        return [int(p) for p in raw.split(",") if p.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid list {raw!r}") from exc


def build_parser() -> _Parser:
    parser = _Parser(prog="geosocial", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_outdir(p):
        p.add_argument("--outdir", default="out", help="pipeline output directory")

    run = sub.add_parser("run", help="execute the full pipeline")
    run.add_argument("--input", help="line-delimited post records")
    run.add_argument("--config", help="JSON file with PipelineConfig fields")
    run.add_argument(
        "--outdir", default=None, help="pipeline output directory (default: out)"
    )
    run.add_argument("--bbox", type=_parse_bbox, default=None)
    run.add_argument(
        "--grids",
        type=_parse_grids,
        default=None,
        help="comma-separated grid resolutions; the first is primary",
    )
    run.add_argument("--restarts", type=int, default=None)
    run.add_argument("--threshold", type=float, default=None, help="rank frequency threshold")
    run.add_argument("--lexicon", default=None, help="word<TAB>polarity file")
    run.add_argument("--top-k", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)

    ingest = sub.add_parser("ingest", help="parse, filter and locate users")
    ingest.add_argument("--input", required=True)
    add_outdir(ingest)
    ingest.add_argument("--bbox", type=_parse_bbox, default=DEFAULT_BBOX)
    ingest.add_argument("--grid", type=int, default=DEFAULT_RESOLUTION)
    ingest.add_argument("--restarts", type=int, default=100)
    ingest.add_argument("--threshold", type=float, default=0.001)
    ingest.add_argument("--lexicon", default=None)
    ingest.add_argument("--top-k", type=int, default=100)
    ingest.add_argument("--seed", type=int, default=0)

    for name, help_text in (
        ("network", "build, filter and symmetrize the tile network"),
        ("communities", "detect communities on the undirected network"),
        ("vocab", "vocabulary comparison reports"),
        ("flow", "community flow matrices and ratios"),
        ("sentiment", "inter-region sentiment reports"),
    ):
        p = sub.add_parser(name, help=help_text)
        add_outdir(p)
        if name == "sentiment":
            p.add_argument("--lexicon", default=None)

    sweep = sub.add_parser("sweep", help="grid-resolution sensitivity sweep")
    add_outdir(sweep)
    sweep.add_argument("--grids", type=_parse_grids, default=None)

    synth = sub.add_parser("synth", help="generate a synthetic planted corpus")
    add_outdir(synth)
    synth.add_argument("--config", help="JSON synth config")
    synth.add_argument("--seed", type=int, default=7)
    synth.add_argument("--resolution", type=int, default=10)
    synth.add_argument("--users", type=int, default=50, help="users per planted region")
    synth.add_argument("--posts-per-user", type=int, default=10)
    synth.add_argument("--intra-bias", type=float, default=0.9)

    return parser


def _run_config_from_args(args) -> PipelineConfig:
    data: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    if args.input is not None:
        data["input_path"] = args.input
    if args.outdir is not None:
        data["outdir"] = args.outdir
    if args.bbox is not None:
        data["bbox"] = args.bbox
    if args.grids is not None:
        data["resolutions"] = args.grids
    if args.restarts is not None:
        data["restarts"] = args.restarts
    if args.threshold is not None:
        data["rank_threshold"] = args.threshold
    if args.lexicon is not None:
        data["lexicon_path"] = args.lexicon
    if args.top_k is not None:
        data["top_k"] = args.top_k
    if args.seed is not None:
        data["seed"] = args.seed
    if "input_path" not in data:
        raise _UsageError("run requires --input or an input_path in --config")
    data.setdefault("outdir", "out")
    return PipelineConfig.from_dict(data)


def _cmd_run(args) -> int:
    config = _run_config_from_args(args)
    manifest = run_pipeline(config)
    for stage in RUN_STAGES:
        record = manifest["stages"][stage]
        print(f"{stage}: {record['status']} ({record['duration_s']:.2f}s)")
    print(f"reports written to {config.outdir}")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    config = PipelineConfig(
        input_path=args.input,
        outdir=args.outdir,
        bbox=args.bbox,
        resolutions=[args.grid],
        restarts=args.restarts,
        rank_threshold=args.threshold,
        lexicon_path=args.lexicon,
        top_k=args.top_k,
        seed=args.seed,
    )
    info = stage_ingest(config)
    print(
        f"ingest: kept {info['posts_kept']} posts, "
        f"rejected {sum(info['rejections'].values())}, "
        f"located {info['users_located']} users"
    )
    return EXIT_OK


def _cmd_synth(args) -> int:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            config = config_from_dict(json.load(fh))
    else:
        config = planted_config(
            seed=args.seed,
            resolution=args.resolution,
            users_per_region=args.users,
            posts_per_user=args.posts_per_user,
            intra_bias=args.intra_bias,
        )
    posts, truth = generate(config)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_posts_jsonl(outdir / "corpus.jsonl", posts)
    write_truth_csv(outdir / "truth_tiles.csv", outdir / "truth_users.csv", truth)
    print(f"synth: wrote {len(posts)} posts to {outdir / 'corpus.jsonl'}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "ingest":
            return _cmd_ingest(args)
        if args.command == "synth":
            return _cmd_synth(args)

        outdir = Path(args.outdir)
        if args.command == "network":
            info = stage_network(outdir)
            print(
                f"network: {info['tiles_after_filter']} tiles "
                f"({info['tiles_before_filter']} before filter)"
            )
        elif args.command == "communities":
            info = stage_communities(outdir)
            print(
                f"communities: {info['communities']} found, "
                f"Q={info['modularity_q']:.4f}"
            )
        elif args.command == "vocab":
            info = stage_vocab(outdir)
            print(f"vocab: {info['regions']} regions compared")
        elif args.command == "flow":
            info = stage_flow(outdir)
            print(f"flow: total volume {info['total_flow']:.1f}")
        elif args.command == "sentiment":
            if getattr(args, "lexicon", None):
                manifest_config_override(outdir, lexicon_path=args.lexicon)
            info = stage_sentiment(outdir)
            print(f"sentiment: scored {info['events_scored']} mention events")
        elif args.command == "sweep":
            info = stage_sweep(outdir, args.grids)
            for row in info["rows"]:
                print(
                    f"sweep X={row['X']}: {row['communities']} communities, "
                    f"Q={row['Q']:.4f}"
                )
        return EXIT_OK
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GeoSocialError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        print("internal error:", file=sys.stderr)
        traceback.print_exc()
        return EXIT_INTERNAL


def manifest_config_override(outdir: Path, **fields) -> None:
    """Patch stored pipeline config (e.g. a different lexicon path)."""
    from .pipeline import load_manifest, save_manifest

    manifest = load_manifest(outdir)
    if manifest.get("config"):
        manifest["config"].update(fields)
        save_manifest(outdir, manifest)


if __name__ == "__main__":
    sys.exit(main())
