"""Deterministic synthetic corpus generator with planted ground truth.

Places users in per-region tile blocks, biases mention targets toward the
home region, injects region dialect words into intra-region posts, and
inserts lexicon words so each post's polarity hits the target region's
configured sentiment offset. Output is fully determined by the seed.

Two structural guarantees keep the downstream pipeline exact:
  * every tile hosting at least two users gets one intra-tile mention, so
    the internal-mention filter drops nothing;
  * each dialect word also occurs once in its region's first outbound
    post, so it stays eligible for rank-difference comparisons.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

from .errors import ConfigError
from .ingest import GridSpec, PostRecord, TileId
from .sentiment import SentimentLexicon, default_lexicon
from .vocab import tokenize

_EPOCH = datetime(2017, 10, 1, tzinfo=timezone.utc)

DEFAULT_SHARED_VOCAB = [
    "about", "after", "again", "always", "around", "because", "before",
    "between", "come", "could", "down", "during", "every", "first",
    "going", "here", "just", "know", "like", "look", "make", "more",
    "need", "never", "next", "other", "over", "people", "right", "today",
]


@dataclass
class RegionSpec:
    """One planted region: an inclusive tile block plus behavior knobs."""

    block: tuple[int, int, int, int]  # col_min, row_min, col_max, row_max
    user_count: int
    base_mention_rate: float = 1.0  # probability a post mentions someone
    intra_bias: float = 0.9
    dialect_words: list[str] = field(default_factory=list)
    sentiment_offset: float = 0.0

    def tiles(self) -> list[TileId]:
        c0, r0, c1, r1 = self.block
        return [TileId(c, r) for c in range(c0, c1 + 1) for r in range(r0, r1 + 1)]


@dataclass
class SynthConfig:
    seed: int
    grid: GridSpec
    regions: list[RegionSpec]
    posts_per_user: int | tuple[int, int] = 10
    words_per_post: int = 8
    dialect_rate: float = 0.5  # chance an intra-region post carries a dialect word
    shared_vocab: list[str] = field(default_factory=lambda: list(DEFAULT_SHARED_VOCAB))
    lexicon: SentimentLexicon | None = None

    def resolved_lexicon(self) -> SentimentLexicon:
        return self.lexicon if self.lexicon is not None else default_lexicon()


@dataclass
class SynthTruth:
    """Planted labels: which region owns each tile and each user."""

    tile_region: dict[TileId, int]
    user_region: dict[str, int]
    user_tile: dict[str, TileId]


def validate_config(config: SynthConfig) -> None:
    """Raise ConfigError listing every violation found."""
    problems: list[str] = []
    if not config.regions:
        problems.append("at least one region is required")
    lexicon = config.resolved_lexicon()

    seen_tiles: dict[TileId, int] = {}
    x = config.grid.resolution
    for idx, region in enumerate(config.regions):
        c0, r0, c1, r1 = region.block
        if not (0 <= c0 <= c1 < x and 0 <= r0 <= r1 < x):
            problems.append(f"region {idx}: block {region.block} outside {x}x{x} grid")
        else:
            for tile in region.tiles():
                if tile in seen_tiles:
                    problems.append(
                        f"region {idx}: tile {tuple(tile)} already in region {seen_tiles[tile]}"
                    )
                seen_tiles[tile] = idx
        if region.user_count < 2:
            problems.append(f"region {idx}: user_count must be >= 2")
        if not 0.0 < region.base_mention_rate <= 1.0:
            problems.append(f"region {idx}: base_mention_rate must be in (0, 1]")
        if not 0.5 <= region.intra_bias <= 1.0:
            problems.append(
                f"region {idx}: intra_bias must be in [0.5, 1] for recoverable structure"
            )
        if not -0.5 <= region.sentiment_offset <= 0.5:
            problems.append(f"region {idx}: sentiment_offset must be in [-0.5, 0.5]")
        for word in region.dialect_words:
            if word in lexicon:
                problems.append(f"region {idx}: dialect word {word!r} is in the lexicon")
            if word in config.shared_vocab:
                problems.append(f"region {idx}: dialect word {word!r} is in shared_vocab")
            if tokenize(word) != [word]:
                problems.append(f"region {idx}: dialect word {word!r} not a clean token")

    if isinstance(config.posts_per_user, tuple):
        lo, hi = config.posts_per_user
        if not 1 <= lo <= hi:
            problems.append(f"posts_per_user range {config.posts_per_user} invalid")
    elif config.posts_per_user < 1:
        problems.append("posts_per_user must be >= 1")
    if config.words_per_post < 1:
        problems.append("words_per_post must be >= 1")
    if not 0.0 <= config.dialect_rate <= 1.0:
        problems.append("dialect_rate must be in [0, 1]")
    if not config.shared_vocab:
        problems.append("shared_vocab must not be empty")
    for word in config.shared_vocab:
        if word in lexicon:
            problems.append(f"shared_vocab word {word!r} is in the lexicon")
        if tokenize(word) != [word]:
            problems.append(f"shared_vocab word {word!r} not a clean token")

    if problems:
        raise ConfigError("; ".join(problems))


def _sentiment_words(lexicon: SentimentLexicon, target: float) -> list[str]:
    """One or two lexicon words whose mean polarity best matches target."""
    words = sorted(lexicon)
    best: tuple[float, str, str] | None = None
    for i, w1 in enumerate(words):
        for w2 in words[i:]:
            gap = abs((lexicon[w1] + lexicon[w2]) / 2.0 - target)
            key = (gap, w1, w2)
            if best is None or key < best:
                best = key
    assert best is not None
    _, w1, w2 = best
    return [w1] if w1 == w2 else [w1, w2]


def generate(config: SynthConfig) -> tuple[list[PostRecord], SynthTruth]:
    """Build the corpus; identical configs produce identical output."""
    validate_config(config)
    rng = random.Random(config.seed)
    lexicon = config.resolved_lexicon()

    # Region -> users, users -> home tiles (round-robin over the block).
    region_users: list[list[str]] = []
    user_region: dict[str, int] = {}
    user_tile: dict[str, TileId] = {}
    tile_region: dict[TileId, int] = {}
    tile_users: dict[TileId, list[str]] = {}
    uid = 0
    for r_idx, region in enumerate(config.regions):
        tiles = sorted(region.tiles())
        users = []
        for k in range(region.user_count):
            user = f"u{uid:05d}"
            uid += 1
            tile = tiles[k % len(tiles)]
            users.append(user)
            user_region[user] = r_idx
            user_tile[user] = tile
            tile_users.setdefault(tile, []).append(user)
        for tile in tiles:
            tile_region[tile] = r_idx
        region_users.append(users)

    sentiment_cache: dict[float, list[str]] = {}

    def sentiment_for(offset: float) -> list[str]:
        if offset not in sentiment_cache:
            sentiment_cache[offset] = _sentiment_words(lexicon, offset)
        return sentiment_cache[offset]

    posts: list[PostRecord] = []
    forced_tiles: set[TileId] = set()
    dialect_seeded: set[int] = set()
    post_idx = 0

    for r_idx, region in enumerate(config.regions):
        other_regions = [k for k in range(len(config.regions)) if k != r_idx]
        for user in region_users[r_idx]:
            home = user_tile[user]
            if isinstance(config.posts_per_user, tuple):
                n_posts = rng.randint(*config.posts_per_user)
            else:
                n_posts = config.posts_per_user
            for p in range(n_posts):
                target: str | None = None
                mates = tile_users[home]
                if (
                    p == 0
                    and home not in forced_tiles
                    and len(mates) >= 2
                    and mates[0] == user
                ):
                    # guarantee an intra-tile mention so e_aa > 0
                    target = mates[1]
                    forced_tiles.add(home)
                elif rng.random() < region.base_mention_rate:
                    if rng.random() < region.intra_bias or not other_regions:
                        candidates = [u for u in region_users[r_idx] if u != user]
                        target = rng.choice(candidates)
                    else:
                        other = rng.choice(other_regions)
                        target = rng.choice(region_users[other])

                tokens = [rng.choice(config.shared_vocab) for _ in range(config.words_per_post)]
                target_region = user_region[target] if target is not None else None
                if target_region == r_idx and region.dialect_words:
                    if rng.random() < config.dialect_rate:
                        tokens.append(rng.choice(region.dialect_words))
                if (
                    target_region is not None
                    and target_region != r_idx
                    and r_idx not in dialect_seeded
                ):
                    # keep dialect words above the outbound frequency floor
                    tokens.extend(region.dialect_words)
                    dialect_seeded.add(r_idx)
                offset = (
                    config.regions[target_region].sentiment_offset
                    if target_region is not None
                    else 0.0
                )
                tokens.extend(sentiment_for(offset))

                text_parts = ([f"@{target}"] if target is not None else []) + tokens
                lon, lat = config.grid.tile_center(home)
                posts.append(
                    PostRecord(
                        post_id=f"p{post_idx:06d}",
                        author_id=user,
                        mentioned_ids=(target,) if target is not None else (),
                        text=" ".join(text_parts),
                        lon=lon,
                        lat=lat,
                        location_kind="place",
                        timestamp=_EPOCH + timedelta(minutes=post_idx),
                    )
                )
                post_idx += 1

    truth = SynthTruth(
        tile_region=dict(sorted(tile_region.items())),
        user_region=dict(sorted(user_region.items())),
        user_tile=dict(sorted(user_tile.items())),
    )
    return posts, truth


def planted_config(
    seed: int = 7,
    resolution: int = 10,
    users_per_region: int = 50,
    posts_per_user: int = 10,
    intra_bias: float = 0.9,
    sentiment_offsets: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0),
    bbox=None,
) -> SynthConfig:
    """Four quadrant regions with one dialect word each; handy defaults
    for tests and demos."""
    from .ingest import DEFAULT_BBOX

    grid = GridSpec(bbox=bbox or DEFAULT_BBOX, resolution=resolution)
    half = resolution // 2
    blocks = [
        (0, 0, half - 1, half - 1),
        (half, 0, resolution - 1, half - 1),
        (0, half, half - 1, resolution - 1),
        (half, half, resolution - 1, resolution - 1),
    ]
    regions = [
        RegionSpec(
            block=blocks[i],
            user_count=users_per_region,
            intra_bias=intra_bias,
            dialect_words=[f"dialect{i}"],
            sentiment_offset=sentiment_offsets[i],
        )
        for i in range(4)
    ]
    return SynthConfig(
        seed=seed,
        grid=grid,
        regions=regions,
        posts_per_user=posts_per_user,
    )


def config_from_dict(data: dict) -> SynthConfig:
    """Build a SynthConfig from a declarative (JSON-shaped) dict."""
    try:
        grid_data = data["grid"]
        grid = GridSpec(
            bbox=tuple(grid_data["bbox"]), resolution=int(grid_data["resolution"])
        )
        regions = [
            RegionSpec(
                block=tuple(r["block"]),
                user_count=int(r["user_count"]),
                base_mention_rate=float(r.get("base_mention_rate", 1.0)),
                intra_bias=float(r.get("intra_bias", 0.9)),
                dialect_words=list(r.get("dialect_words", [])),
                sentiment_offset=float(r.get("sentiment_offset", 0.0)),
            )
            for r in data["regions"]
        ]
        posts_per_user = data.get("posts_per_user", 10)
        if isinstance(posts_per_user, list):
            posts_per_user = (int(posts_per_user[0]), int(posts_per_user[1]))
        else:
            posts_per_user = int(posts_per_user)
        return SynthConfig(
            seed=int(data["seed"]),
            grid=grid,
            regions=regions,
            posts_per_user=posts_per_user,
            words_per_post=int(data.get("words_per_post", 8)),
            dialect_rate=float(data.get("dialect_rate", 0.5)),
            shared_vocab=list(data.get("shared_vocab", DEFAULT_SHARED_VOCAB)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid synth config: {exc}") from exc


def write_truth_csv(tiles_path, users_path, truth: SynthTruth) -> None:
    import csv

    with open(tiles_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["col", "row", "region"])
        for tile, region in sorted(truth.tile_region.items()):
            writer.writerow([tile.col, tile.row, region])
    with open(users_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "region"])
        for user, region in sorted(truth.user_region.items()):
            writer.writerow([user, region])
