"""Ingestion of located post records.

Reads line-delimited JSON records, keeps place-tagged posts inside a
bounding box, drops GPS-tagged ones, and distributes each user over grid
tiles in proportion to how often they post from each tile.

Input line schema (one JSON object per line):

    {"id": str, "user_id": str, "mentions": [str, ...], "text": str,
     "lon": float, "lat": float, "loc_kind": "place"|"gps", "ts": ISO-8601}
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, NamedTuple

from .errors import ConfigError, OutOfBoundsError

# Lower-left and upper-right corners (lon_min, lat_min, lon_max, lat_max)
# of the default study extent; override per run with --bbox.
DEFAULT_BBOX = (-5.8, 49.9, -1.2, 55.9)
DEFAULT_RESOLUTION = 30

BBox = tuple[float, float, float, float]


class TileId(NamedTuple):
    col: int
    row: int


@dataclass(frozen=True)
class PostRecord:
    """One located post, cleaned: self-mentions already removed."""

    post_id: str
    author_id: str
    mentioned_ids: tuple[str, ...]
    text: str
    lon: float
    lat: float
    location_kind: str  # "place" or "gps"
    timestamp: datetime


@dataclass(frozen=True)
class GridSpec:
    """An X-by-X grid laid over a lon/lat bounding box."""

    bbox: BBox = DEFAULT_BBOX
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self) -> None:
        lon_min, lat_min, lon_max, lat_max = self.bbox
        problems = []
        if not (lon_min < lon_max):
            problems.append(f"lon_min must be < lon_max, got {lon_min} >= {lon_max}")
        if not (lat_min < lat_max):
            problems.append(f"lat_min must be < lat_max, got {lat_min} >= {lat_max}")
        if self.resolution < 2:
            problems.append(f"grid resolution must be >= 2, got {self.resolution}")
        if problems:
            raise ConfigError("; ".join(problems))

    def tile_bounds(self, tile: TileId) -> BBox:
        """Lon/lat bounds of one tile (used for GeoJSON export)."""
        lon_min, lat_min, lon_max, lat_max = self.bbox
        dlon = (lon_max - lon_min) / self.resolution
        dlat = (lat_max - lat_min) / self.resolution
        return (
            lon_min + tile.col * dlon,
            lat_min + tile.row * dlat,
            lon_min + (tile.col + 1) * dlon,
            lat_min + (tile.row + 1) * dlat,
        )

    def tile_center(self, tile: TileId) -> tuple[float, float]:
        w, s, e, n = self.tile_bounds(tile)
        return ((w + e) / 2.0, (s + n) / 2.0)


@dataclass
class RejectionCounts:
    """Per-reason tallies for lines parse_posts did not keep."""

    gps_dropped: int = 0
    out_of_bbox: int = 0
    malformed: int = 0
    empty_after_clean: int = 0

    def total(self) -> int:
        return self.gps_dropped + self.out_of_bbox + self.malformed + self.empty_after_clean


@dataclass
class UserLocationMap:
    """Fractional user-to-tile weights; each user's weights sum to 1."""

    weights: dict[str, dict[TileId, float]] = field(default_factory=dict)

    def tiles_of(self, user_id: str) -> dict[TileId, float]:
        return self.weights.get(user_id, {})

    def majority_tile(self, user_id: str) -> TileId | None:
        """Tile carrying the largest weight; ties go to the smallest TileId."""
        tiles = self.weights.get(user_id)
        if not tiles:
            return None
        return min(tiles, key=lambda t: (-tiles[t], t))

    def __contains__(self, user_id: str) -> bool:
        return user_id in self.weights

    def __len__(self) -> int:
        return len(self.weights)


def _in_bbox(lon: float, lat: float, bbox: BBox) -> bool:
    lon_min, lat_min, lon_max, lat_max = bbox
    return lon_min <= lon <= lon_max and lat_min <= lat <= lat_max


def _parse_timestamp(raw: str) -> datetime:
    # Python 3.10 fromisoformat does not accept a trailing Z.
    if raw.endswith("Z"):
        raw = raw[:-1] + "+00:00"
    ts = datetime.fromisoformat(raw)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _parse_line(line: str) -> PostRecord:
    """Decode one input line; raises ValueError/KeyError/TypeError on bad data."""
    obj = json.loads(line)
    post_id = obj["id"]
    author_id = obj["user_id"]
    if not isinstance(post_id, str) or not post_id:
        raise ValueError("id must be a non-empty string")
    if not isinstance(author_id, str) or not author_id:
        raise ValueError("user_id must be a non-empty string")
    mentions_raw = obj["mentions"]
    if not isinstance(mentions_raw, list) or any(not isinstance(m, str) for m in mentions_raw):
        raise ValueError("mentions must be a list of strings")
    text = obj["text"]
    if not isinstance(text, str):
        raise ValueError("text must be a string")
    lon = float(obj["lon"])
    lat = float(obj["lat"])
    if not (math.isfinite(lon) and math.isfinite(lat)):
        raise ValueError("lon/lat must be finite")
    loc_kind = obj["loc_kind"]
    if loc_kind not in ("place", "gps"):
        raise ValueError(f"loc_kind must be 'place' or 'gps', got {loc_kind!r}")
    timestamp = _parse_timestamp(obj["ts"])

    # Drop self-mentions and duplicate targets, preserving first-seen order;
    # the record itself is kept so its text still counts for other targets.
    seen: set[str] = set()
    mentions = []
    for m in mentions_raw:
        if m == author_id or m in seen:
            continue
        seen.add(m)
        mentions.append(m)

    return PostRecord(
        post_id=post_id,
        author_id=author_id,
        mentioned_ids=tuple(mentions),
        text=text,
        lon=lon,
        lat=lat,
        location_kind=loc_kind,
        timestamp=timestamp,
    )


def parse_posts(
    lines: Iterable[str], bbox: BBox = DEFAULT_BBOX
) -> tuple[list[PostRecord], RejectionCounts]:
    """Parse and filter an input stream of line-delimited post records.

    Keeps place-tagged posts inside `bbox` with non-empty text. Every input
    line is accounted for: len(kept) + rejections.total() == line count.
    A malformed line is counted and skipped, never fatal.
    """
    kept: list[PostRecord] = []
    rejections = RejectionCounts()
    for line in lines:
        if not line.strip():
            rejections.malformed += 1
            continue
        try:
            record = _parse_line(line)
        except (ValueError, KeyError, TypeError):
            rejections.malformed += 1
            continue
        if record.location_kind == "gps":
            rejections.gps_dropped += 1
            continue
        if not _in_bbox(record.lon, record.lat, bbox):
            rejections.out_of_bbox += 1
            continue
        if not record.text.strip():
            rejections.empty_after_clean += 1
            continue
        kept.append(record)
    return kept, rejections


def post_to_json_line(record: PostRecord) -> str:
    """Serialize a record back to the input line format (round-trips)."""
    return json.dumps(
        {
            "id": record.post_id,
            "user_id": record.author_id,
            "mentions": list(record.mentioned_ids),
            "text": record.text,
            "lon": record.lon,
            "lat": record.lat,
            "loc_kind": record.location_kind,
            "ts": record.timestamp.isoformat().replace("+00:00", "Z"),
        },
        ensure_ascii=False,
        sort_keys=True,
    )


def tile_of(lon: float, lat: float, grid: GridSpec) -> TileId:
    """Map a point inside the bbox to its grid tile.

    Cells are half-open; points on the max edge belong to the last cell.
    """
    lon_min, lat_min, lon_max, lat_max = grid.bbox
    if not _in_bbox(lon, lat, grid.bbox):
        raise OutOfBoundsError(
            f"point ({lon}, {lat}) outside bbox {grid.bbox}"
        )
    x = grid.resolution
    col = min(int(x * (lon - lon_min) / (lon_max - lon_min)), x - 1)
    row = min(int(x * (lat - lat_min) / (lat_max - lat_min)), x - 1)
    return TileId(col, row)


def locate_users(posts: Iterable[PostRecord], grid: GridSpec) -> UserLocationMap:
    """Distribute each user over tiles proportionally to their posting counts.

    The weight of user u on tile t is (posts by u in t) / (posts by u).
    All of a user's filtered posts count, mentioning or not.
    """
    per_user: dict[str, Counter[TileId]] = defaultdict(Counter)
    for post in posts:
        per_user[post.author_id][tile_of(post.lon, post.lat, grid)] += 1

    weights: dict[str, dict[TileId, float]] = {}
    for user_id, tile_counts in per_user.items():
        total = sum(tile_counts.values())
        weights[user_id] = {
            tile: count / total for tile, count in sorted(tile_counts.items())
        }
    return UserLocationMap(weights=weights)
