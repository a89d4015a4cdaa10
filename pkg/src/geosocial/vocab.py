"""Regional vocabulary comparison.

Tokenizes post text, aggregates per-region word vectors, and compares
corpora via cosine similarity, tf-idf and frequency-rank differences
between local (intra-region) and outbound (inter-region) messages.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import UndefinedSimilarityError
from .ingest import PostRecord, TileId, UserLocationMap

# Words below this frequency per tweet (strictly) are excluded from
# rank-difference comparisons to avoid spurious large rank gaps.
RANK_FREQUENCY_THRESHOLD = 0.001

DEFAULT_TOP_K = 100


@dataclass(frozen=True)
class TokenizedPost:
    post_id: str
    tokens: tuple[str, ...]


@dataclass
class WordVector:
    """Token counts for one region's aggregated posts."""

    region: int
    counts: dict[str, int]
    total_tweets: int


@dataclass(frozen=True)
class VocabScope:
    """Which slice of a region's messages a ranked vocabulary covers.

    kind is one of local, outbound, pair, pair_complement; pair scopes
    carry the destination region in `other` (for pair_complement, the
    excluded region).
    """

    kind: str
    region: int
    other: int | None = None

    def __str__(self) -> str:
        if self.other is None:
            return f"{self.kind}({self.region})"
        return f"{self.kind}({self.region},{self.other})"


@dataclass
class RankedVocab:
    """Frequency-ranked vocabulary of one corpus (rank 1 = most frequent)."""

    scope: VocabScope | None
    freq_per_tweet: dict[str, float]
    rank: dict[str, int]


@dataclass(frozen=True)
class RankDiffEntry:
    word: str
    delta_r: int
    scope_a: VocabScope | None
    scope_b: VocabScope | None


def tokenize(text: str) -> list[str]:
    """Lowercase and split text, dropping @-mentions and URLs entirely.

    Non-alphanumeric characters (emoji, punctuation, the '#' prefix) are
    stripped from the surviving tokens, keeping hashtag bodies.
    """
    tokens: list[str] = []
    for raw in text.split():
        if raw.startswith("@"):
            continue
        lowered = raw.lower()
        if lowered.startswith(("http://", "https://", "www.")):
            continue
        cleaned = "".join(ch for ch in lowered if ch.isalnum())
        if cleaned:
            tokens.append(cleaned)
    return tokens


def tokenize_post(post: PostRecord) -> TokenizedPost:
    return TokenizedPost(post_id=post.post_id, tokens=tuple(tokenize(post.text)))


def user_region(
    user_id: str, assignment: Mapping[TileId, int], locations: UserLocationMap
) -> int | None:
    """Region of a user's majority tile; None when that tile has no region.

    Ties between equally weighted tiles go to the smallest TileId.
    """
    tile = locations.majority_tile(user_id)
    if tile is None:
        return None
    return assignment.get(tile)


@dataclass
class _PostEvent:
    origin: int
    counts: Counter
    targets: frozenset[int]
    has_mentions: bool


class RegionCorpora:
    """Per-region corpora sliced by message destination.

    A post's origin is its author's region. Destination regions come from
    the mentioned users; a post whose targets span several regions counts
    once in every applicable slice.
    """

    def __init__(self, regions: list[int], events: list[_PostEvent], skipped_posts: int):
        self.regions = regions
        self._events = events
        self.skipped_posts = skipped_posts

    def word_vector(self, region: int) -> WordVector:
        """All tokens of posts originating in a region, mentioning or not."""
        counts: Counter = Counter()
        tweets = 0
        for ev in self._events:
            if ev.origin == region:
                counts.update(ev.counts)
                tweets += 1
        return WordVector(region=region, counts=dict(counts), total_tweets=tweets)

    def word_vectors(self) -> list[WordVector]:
        return [self.word_vector(region) for region in self.regions]

    def corpus(self, scope: VocabScope) -> tuple[dict[str, int], int]:
        """Token counts and tweet count for one destination slice."""
        counts: Counter = Counter()
        tweets = 0
        for ev in self._events:
            if ev.origin != scope.region:
                continue
            if scope.kind == "local":
                hit = scope.region in ev.targets
            elif scope.kind == "outbound":
                hit = bool(ev.targets - {scope.region})
            elif scope.kind == "pair":
                hit = scope.other in ev.targets
            elif scope.kind == "pair_complement":
                hit = bool(ev.targets - {scope.region, scope.other})
            else:
                raise ValueError(f"unknown scope kind {scope.kind!r}")
            if hit:
                counts.update(ev.counts)
                tweets += 1
        return dict(counts), tweets

    def ranked(self, scope: VocabScope) -> RankedVocab:
        counts, tweets = self.corpus(scope)
        if tweets == 0:
            return RankedVocab(scope=scope, freq_per_tweet={}, rank={})
        return rank_words(counts, tweets, scope=scope)


def build_region_corpora(
    posts: Iterable[PostRecord],
    assignment: Mapping[TileId, int],
    locations: UserLocationMap,
) -> RegionCorpora:
    """Tokenize posts and group them by origin region and target regions.

    Posts whose author has no region are skipped (counted); mention
    targets without a region simply contribute no destination.
    """
    region_cache: dict[str, int | None] = {}

    def region_of(user: str) -> int | None:
        if user not in region_cache:
            region_cache[user] = user_region(user, assignment, locations)
        return region_cache[user]

    events: list[_PostEvent] = []
    skipped = 0
    for post in posts:
        origin = region_of(post.author_id)
        if origin is None:
            skipped += 1
            continue
        targets = frozenset(
            r for r in (region_of(u) for u in post.mentioned_ids) if r is not None
        )
        events.append(
            _PostEvent(
                origin=origin,
                counts=Counter(tokenize(post.text)),
                targets=targets,
                has_mentions=bool(post.mentioned_ids),
            )
        )
    regions = sorted(set(assignment.values()))
    return RegionCorpora(regions=regions, events=events, skipped_posts=skipped)


def region_word_vectors(
    posts: Iterable[PostRecord],
    assignment: Mapping[TileId, int],
    locations: UserLocationMap,
) -> tuple[list[WordVector], int]:
    """One aggregated word vector per community; returns (vectors, skipped)."""
    corpora = build_region_corpora(posts, assignment, locations)
    return corpora.word_vectors(), corpora.skipped_posts


def cosine_similarity(w_i, w_j) -> float:
    """Cosine of two word vectors over the shared lexicon space."""
    a: Mapping[str, float] = getattr(w_i, "counts", w_i)
    b: Mapping[str, float] = getattr(w_j, "counts", w_j)
    norm_a = math.sqrt(sum(v * v for v in a.values()))
    norm_b = math.sqrt(sum(v * v for v in b.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        raise UndefinedSimilarityError("cosine similarity undefined for a zero vector")
    shorter, longer = (a, b) if len(a) <= len(b) else (b, a)
    dot = sum(v * longer.get(w, 0.0) for w, v in shorter.items())
    return dot / (norm_a * norm_b)


def tfidf(
    region_documents: list[WordVector], top_k: int | None = DEFAULT_TOP_K
) -> dict[int, list[tuple[str, float]]]:
    """Score terms that differentiate one region document from the rest.

    score(w, d) = count(w, d) * ln(N / df(w)) with df the number of
    documents containing w, so a word present everywhere scores 0.
    """
    if len(region_documents) < 2:
        raise ValueError("tf-idf needs at least 2 region documents")
    n_docs = len(region_documents)
    df: Counter = Counter()
    for doc in region_documents:
        df.update(doc.counts.keys())

    results: dict[int, list[tuple[str, float]]] = {}
    for doc in region_documents:
        scored = [
            (word, count * math.log(n_docs / df[word]))
            for word, count in doc.counts.items()
        ]
        scored.sort(key=lambda item: (-item[1], item[0]))
        results[doc.region] = scored[:top_k] if top_k is not None else scored
    return results


def rank_words(
    counts: Mapping[str, int], tweet_count: int, scope: VocabScope | None = None
) -> RankedVocab:
    """Rank words by descending count (ties lexicographic ascending)."""
    if tweet_count <= 0:
        raise ValueError(f"tweet_count must be > 0, got {tweet_count}")
    ordered = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return RankedVocab(
        scope=scope,
        freq_per_tweet={word: count / tweet_count for word, count in ordered},
        rank={word: position for position, (word, _) in enumerate(ordered, start=1)},
    )


def rank_differences(
    scope_a: RankedVocab,
    scope_b: RankedVocab,
    threshold: float = RANK_FREQUENCY_THRESHOLD,
) -> list[RankDiffEntry]:
    """Rank gaps for words frequent enough in BOTH corpora.

    Eligibility is strict: frequency per tweet must exceed the threshold
    in each corpus. delta_r = rank_a - rank_b, so positive values mark
    words more characteristic of corpus b. Sorted by delta_r descending.
    """
    eligible = [
        word
        for word, freq in scope_a.freq_per_tweet.items()
        if freq > threshold and scope_b.freq_per_tweet.get(word, 0.0) > threshold
    ]
    entries = [
        RankDiffEntry(
            word=word,
            delta_r=scope_a.rank[word] - scope_b.rank[word],
            scope_a=scope_a.scope,
            scope_b=scope_b.scope,
        )
        for word in eligible
    ]
    entries.sort(key=lambda e: (-e.delta_r, e.word))
    return entries


def local_outbound_differences(
    corpora: RegionCorpora, threshold: float = RANK_FREQUENCY_THRESHOLD
) -> dict[int, list[RankDiffEntry]]:
    """delta_r per region between its local and outbound vocabularies."""
    out: dict[int, list[RankDiffEntry]] = {}
    for region in corpora.regions:
        local = corpora.ranked(VocabScope("local", region))
        outbound = corpora.ranked(VocabScope("outbound", region))
        out[region] = rank_differences(local, outbound, threshold)
    return out


def pairwise_differences(
    corpora: RegionCorpora, threshold: float = RANK_FREQUENCY_THRESHOLD
) -> dict[tuple[int, int], list[RankDiffEntry]]:
    """delta_r for each ordered pair (i, j): complement-of-j versus to-j."""
    out: dict[tuple[int, int], list[RankDiffEntry]] = {}
    for i in corpora.regions:
        for j in corpora.regions:
            if i == j:
                continue
            complement = corpora.ranked(VocabScope("pair_complement", i, j))
            pair = corpora.ranked(VocabScope("pair", i, j))
            out[(i, j)] = rank_differences(complement, pair, threshold)
    return out


# -- report writers ----------------------------------------------------------


def write_cosine_matrix_csv(path, vectors: list[WordVector]) -> None:
    labels = [vec.region for vec in vectors]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["region"] + [str(lab) for lab in labels])
        for vec in vectors:
            row: list[str] = [str(vec.region)]
            for other in vectors:
                if not vec.counts or not other.counts:
                    row.append("")
                else:
                    row.append(repr(cosine_similarity(vec, other)))
            writer.writerow(row)


def write_tfidf_csv(path, scores: dict[int, list[tuple[str, float]]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["region", "rank", "term", "score"])
        for region in sorted(scores):
            for position, (term, score) in enumerate(scores[region], start=1):
                writer.writerow([region, position, term, repr(score)])


def write_rankdiff_local_out_csv(path, diffs: dict[int, list[RankDiffEntry]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["region", "term", "delta_r"])
        for region in sorted(diffs):
            for entry in diffs[region]:
                writer.writerow([region, entry.word, entry.delta_r])


def write_rankdiff_pairs_csv(
    path, diffs: dict[tuple[int, int], list[RankDiffEntry]]
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "term", "delta_r"])
        for (i, j) in sorted(diffs):
            for entry in diffs[(i, j)]:
                writer.writerow([i, j, entry.word, entry.delta_r])
