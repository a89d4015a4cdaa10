"""Lexicon-based polarity scoring and inter-region sentiment metrics.

The analyzer is deliberately minimal: a post's polarity is the mean of
lexicon values over matched tokens (no negation or intensifier handling),
with the lexicon pluggable as a word<TAB>polarity file. Metrics derived
from the region-pair polarity matrix: per-sender baselines, corrected
polarity, self-regard, popularity and friendliest pairs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError, ContractViolation
from .ingest import PostRecord, TileId, UserLocationMap
from .vocab import tokenize, user_region

SentimentLexicon = dict[str, float]


def load_lexicon(path) -> SentimentLexicon:
    """Read a word<TAB>polarity file; polarity must lie in [-1, 1].

    Lookup is case-insensitive: keys are lowercased, later duplicates win.
    Blank lines and lines starting with '#' are skipped.
    """
    lexicon: SentimentLexicon = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: expected 'word<TAB>polarity'")
            word, raw_value = parts
            try:
                value = float(raw_value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad polarity {raw_value!r}") from exc
            if not -1.0 <= value <= 1.0:
                raise ConfigError(f"{path}:{lineno}: polarity {value} outside [-1, 1]")
            lexicon[word.lower()] = value
    return lexicon


def default_lexicon() -> SentimentLexicon:
    """The small packaged lexicon (see data/default_lexicon.tsv)."""
    ref = resources.files("geosocial").joinpath("data/default_lexicon.tsv")
    with resources.as_file(ref) as path:
        return load_lexicon(path)


def polarity(tokens: Iterable[str], lexicon: SentimentLexicon) -> float:
    """Mean lexicon polarity over matched tokens; 0.0 when nothing matches."""
    matched = [lexicon[tok] for tok in tokens if tok in lexicon]
    if not matched:
        return 0.0
    value = sum(matched) / len(matched)
    return max(-1.0, min(1.0, value))


@dataclass
class PolarityMatrix:
    """Mean message polarity per (sender, receiver) community pair.

    mean is NaN where no messages were observed; stderr (sample standard
    deviation over sqrt(n)) is NaN below two observations.
    """

    labels: list[int]
    mean: np.ndarray
    count: np.ndarray
    stderr: np.ndarray


def polarity_matrix(
    posts: Iterable[PostRecord],
    assignment: Mapping[TileId, int],
    locations: UserLocationMap,
    lexicon: SentimentLexicon,
) -> tuple[PolarityMatrix, int]:
    """Score every located mention event into its (origin, target) cell.

    A post mentioning k regioned users contributes its polarity k times,
    mirroring how the flow matrix counts events. Events whose endpoint has
    no region are skipped and counted.
    """
    labels = sorted(set(assignment.values()))
    index = {label: i for i, label in enumerate(labels)}
    n = len(labels)
    count = np.zeros((n, n), dtype=int)
    total = np.zeros((n, n))
    total_sq = np.zeros((n, n))
    skipped = 0

    region_cache: dict[str, int | None] = {}

    def region_of(user: str) -> int | None:
        if user not in region_cache:
            region_cache[user] = user_region(user, assignment, locations)
        return region_cache[user]

    for post in posts:
        if not post.mentioned_ids:
            continue
        origin = region_of(post.author_id)
        score = polarity(tokenize(post.text), lexicon)
        for target_user in post.mentioned_ids:
            target = region_of(target_user)
            if origin is None or target is None:
                skipped += 1
                continue
            i, j = index[origin], index[target]
            count[i, j] += 1
            total[i, j] += score
            total_sq[i, j] += score * score

    mean = np.full((n, n), np.nan)
    stderr = np.full((n, n), np.nan)
    observed = count > 0
    mean[observed] = total[observed] / count[observed]
    twice = count >= 2
    variance = np.zeros((n, n))
    variance[twice] = (total_sq[twice] - count[twice] * mean[twice] ** 2) / (
        count[twice] - 1
    )
    variance = np.clip(variance, 0.0, None)  # guard tiny negative rounding
    stderr[twice] = np.sqrt(variance[twice] / count[twice])
    return PolarityMatrix(labels=labels, mean=mean, count=count, stderr=stderr), skipped


def baseline_correct(matrix: PolarityMatrix) -> np.ndarray:
    """Subtract each sender's row mean (diagonal included) from its row.

    Every cell must be defined; rows with missing cells cannot be
    baselined, so restrict the matrix to the defined submatrix first.
    """
    if np.isnan(matrix.mean).any():
        raise ContractViolation(
            "polarity matrix has undefined cells; restrict to the defined submatrix"
        )
    baselines = matrix.mean.mean(axis=1, keepdims=True)
    return matrix.mean - baselines


def self_regard(matrix: PolarityMatrix) -> np.ndarray:
    """Self polarity minus mean outgoing polarity, per community."""
    n = len(matrix.labels)
    if n < 2:
        raise ValueError("self-regard needs at least 2 communities")
    if np.isnan(matrix.mean).any():
        raise ContractViolation(
            "polarity matrix has undefined cells; restrict to the defined submatrix"
        )
    diag = np.diag(matrix.mean)
    off_mean = (matrix.mean.sum(axis=1) - diag) / (n - 1)
    return diag - off_mean


def popularity(corrected: np.ndarray) -> np.ndarray:
    """Mean baseline-corrected polarity received from the other communities."""
    n = corrected.shape[0]
    if n < 2:
        raise ValueError("popularity needs at least 2 communities")
    return (corrected.sum(axis=0) - np.diag(corrected)) / (n - 1)


def friendliest_pairs(
    corrected: np.ndarray, labels: list[int]
) -> list[tuple[int, int, float]]:
    """All unordered pairs ranked by mutual corrected polarity, best first."""
    pairs: list[tuple[int, int, float]] = []
    n = corrected.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            pairs.append((labels[i], labels[j], float(corrected[i, j] + corrected[j, i])))
    pairs.sort(key=lambda item: (-item[2], item[0], item[1]))
    return pairs


@dataclass
class RegionSentiment:
    """Summary row: self-regard and popularity with propagated errors."""

    region: int
    self_regard: float
    self_regard_err: float
    popularity: float
    popularity_err: float


def sentiment_summary(matrix: PolarityMatrix) -> list[RegionSentiment]:
    """Self-regard and popularity per region with independent-cell error
    propagation from the per-cell standard errors (NaN where unavailable)."""
    n = len(matrix.labels)
    corrected = baseline_correct(matrix)
    s = self_regard(matrix)
    pop = popularity(corrected)
    se = matrix.stderr
    var = np.where(np.isnan(se), np.nan, se**2)

    rows: list[RegionSentiment] = []
    for i in range(n):
        off = [j for j in range(n) if j != i]
        s_var = var[i, i] + var[i, off].sum() / (n - 1) ** 2
        # corrected[j, i] = p_ji - mean of row j; cells treated as independent
        ptilde_var = np.empty(n)
        for j in off:
            row_rest = [k for k in range(n) if k != i]
            ptilde_var[j] = (1 - 1 / n) ** 2 * var[j, i] + var[j, row_rest].sum() / n**2
        pop_var = sum(ptilde_var[j] for j in off) / (n - 1) ** 2
        rows.append(
            RegionSentiment(
                region=matrix.labels[i],
                self_regard=float(s[i]),
                self_regard_err=float(math.sqrt(s_var)) if not np.isnan(s_var) else math.nan,
                popularity=float(pop[i]),
                popularity_err=float(math.sqrt(pop_var)) if not np.isnan(pop_var) else math.nan,
            )
        )
    return rows


def format_with_error(value: float, stderr: float) -> str:
    """Render value(err) with the error as one unit of the last digit.

    0.164 with error 0.0014 renders as "0.164(1)"; an error too small for
    three decimals renders as "(0)". Undefined errors render plain.
    """
    if math.isnan(value):
        return "nan"
    if stderr is None or math.isnan(stderr):
        return f"{value:.4f}"
    if stderr <= 1e-9:  # exact or numerically-zero error
        return f"{value:.3f}(0)"
    digits = max(1, -int(math.floor(math.log10(stderr))))
    scaled = round(stderr * 10**digits)
    if scaled >= 10:
        digits -= 1
        scaled = round(stderr * 10**digits)
    if digits < 1 or scaled < 1:
        return f"{value:.3f}(0)"
    return f"{value:.{digits}f}({scaled})"


# -- report writers ----------------------------------------------------------


def write_polarity_csv(path, matrix: PolarityMatrix) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "mean", "count", "stderr"])
        for i, lab_i in enumerate(matrix.labels):
            for j, lab_j in enumerate(matrix.labels):
                mean = matrix.mean[i, j]
                err = matrix.stderr[i, j]
                writer.writerow(
                    [
                        lab_i,
                        lab_j,
                        "" if math.isnan(mean) else repr(float(mean)),
                        int(matrix.count[i, j]),
                        "" if math.isnan(err) else repr(float(err)),
                    ]
                )


def write_corrected_csv(path, corrected: np.ndarray, labels: list[int]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["community"] + [str(lab) for lab in labels])
        for i, label in enumerate(labels):
            writer.writerow([label] + [repr(float(v)) for v in corrected[i]])


def write_summary_csv(path, rows: list[RegionSentiment]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["region", "self_regard", "popularity"])
        for row in rows:
            writer.writerow(
                [
                    row.region,
                    format_with_error(row.self_regard, row.self_regard_err),
                    format_with_error(row.popularity, row.popularity_err),
                ]
            )


def write_pairs_csv(path, pairs: list[tuple[int, int, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "mutual_corrected"])
        for i, j, score in pairs:
            writer.writerow([i, j, repr(score)])
