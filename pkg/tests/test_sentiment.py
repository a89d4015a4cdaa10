import math
import random
from datetime import datetime, timezone

import numpy as np
import pytest

from geosocial.errors import ConfigError, ContractViolation
from geosocial.ingest import PostRecord, TileId, UserLocationMap
from geosocial.sentiment import (
    PolarityMatrix,
    baseline_correct,
    default_lexicon,
    format_with_error,
    friendliest_pairs,
    load_lexicon,
    polarity,
    polarity_matrix,
    popularity,
    self_regard,
    sentiment_summary,
)

TS = datetime(2017, 10, 1, tzinfo=timezone.utc)
A, B = TileId(0, 0), TileId(1, 0)

LEX = {"up": 0.5, "down": -0.5, "top": 1.0, "mid": -0.5, "zero": 0.0}


def post(author, text, mentions=(), idx=0):
    return PostRecord(
        post_id=f"p{idx}",
        author_id=author,
        mentioned_ids=tuple(mentions),
        text=text,
        lon=0.0,
        lat=0.0,
        location_kind="place",
        timestamp=TS,
    )


def pmatrix(values) -> PolarityMatrix:
    arr = np.asarray(values, dtype=float)
    n = arr.shape[0]
    return PolarityMatrix(
        labels=list(range(n)),
        mean=arr,
        count=np.full((n, n), 10),
        stderr=np.zeros((n, n)),
    )


class TestPolarity:
    def test_mean_of_matches(self):
        assert polarity(["up", "up"], LEX) == pytest.approx(0.5)

    def test_no_match_is_neutral(self):
        assert polarity(["blank", "words"], LEX) == 0.0

    def test_unmatched_tokens_ignored(self):
        assert polarity(["top", "mid", "unknown"], LEX) == pytest.approx(0.25)

    def test_zero_polarity_lexicon_word_dilutes_toward_zero(self):
        base = polarity(["top", "mid"], LEX)
        diluted = polarity(["top", "mid", "zero"], LEX)
        assert abs(diluted) < abs(base)
        assert diluted == pytest.approx(base * 2 / 3)

    def test_non_lexicon_token_changes_nothing(self):
        assert polarity(["top", "mid"], LEX) == polarity(["top", "mid", "xyzzy"], LEX)

    def test_always_within_unit_interval(self):
        rng = random.Random(71)
        words = list(LEX)
        for _ in range(50):
            tokens = [rng.choice(words + ["noise"]) for _ in range(rng.randint(0, 8))]
            assert -1.0 <= polarity(tokens, LEX) <= 1.0


class TestPolarityMatrix:
    locations = UserLocationMap(
        weights={"u1": {A: 1.0}, "u2": {A: 1.0}, "v1": {B: 1.0}}
    )
    assignment = {A: 0, B: 1}

    def test_single_region_constant_polarity(self):
        posts = [
            post("u1", "up", mentions=["u2"], idx=0),
            post("u2", "up", mentions=["u1"], idx=1),
        ]
        matrix, skipped = polarity_matrix(posts, {A: 0}, self.locations, LEX)
        assert skipped == 0
        assert matrix.mean[0, 0] == pytest.approx(0.5)
        assert matrix.stderr[0, 0] == 0.0

    def test_two_post_mean_and_stderr(self):
        # polarities 0.1 and 0.3 -> mean 0.2, stderr 0.1
        lex = {"a": 0.1, "b": 0.3}
        posts = [
            post("u1", "a", mentions=["v1"], idx=0),
            post("u2", "b", mentions=["v1"], idx=1),
        ]
        matrix, _ = polarity_matrix(posts, self.assignment, self.locations, lex)
        assert matrix.mean[0, 1] == pytest.approx(0.2)
        assert matrix.count[0, 1] == 2
        assert matrix.stderr[0, 1] == pytest.approx(0.1)

    def test_empty_cells_are_missing_not_zero(self):
        posts = [post("u1", "up", mentions=["u2"])]
        matrix, _ = polarity_matrix(posts, self.assignment, self.locations, LEX)
        assert math.isnan(matrix.mean[0, 1])
        assert matrix.count[0, 1] == 0

    def test_multi_mention_post_counts_once_per_event(self):
        posts = [post("u1", "up", mentions=["u2", "v1"])]
        matrix, _ = polarity_matrix(posts, self.assignment, self.locations, LEX)
        assert matrix.count[0, 0] == 1
        assert matrix.count[0, 1] == 1

    def test_regionless_event_skipped(self):
        locations = UserLocationMap(
            weights={"u1": {A: 1.0}, "ghost": {TileId(9, 9): 1.0}}
        )
        posts = [post("u1", "up", mentions=["ghost"])]
        matrix, skipped = polarity_matrix(posts, self.assignment, locations, LEX)
        assert skipped == 1
        assert matrix.count.sum() == 0


class TestBaselineCorrect:
    def test_constant_row_becomes_zero(self):
        corrected = baseline_correct(pmatrix([[0.2, 0.2], [0.4, 0.4]]))
        np.testing.assert_allclose(corrected, 0.0, atol=1e-15)

    def test_worked_row(self):
        corrected = baseline_correct(pmatrix([[0.1, 0.2, 0.3]] * 3))
        np.testing.assert_allclose(corrected[0], [-0.1, 0.0, 0.1], atol=1e-15)

    def test_row_sums_vanish(self):
        rng = np.random.default_rng(5)
        corrected = baseline_correct(pmatrix(rng.uniform(-1, 1, (6, 6))))
        np.testing.assert_allclose(corrected.sum(axis=1), 0.0, atol=1e-12)

    def test_missing_cell_raises_with_guidance(self):
        matrix = pmatrix([[0.1, np.nan], [0.2, 0.3]])
        with pytest.raises(ContractViolation, match="defined submatrix"):
            baseline_correct(matrix)


class TestSelfRegardAndPopularity:
    def test_constant_row_zero_self_regard(self):
        s = self_regard(pmatrix([[0.3, 0.3], [0.1, 0.1]]))
        np.testing.assert_allclose(s, 0.0, atol=1e-15)

    def test_forced_example(self):
        s = self_regard(pmatrix([[0.3, 0.1, 0.1], [0, 0, 0], [0, 0, 0]]))
        assert s[0] == pytest.approx(0.2)

    def test_diagonal_identity(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = rng.integers(2, 9)
            matrix = pmatrix(rng.uniform(-1, 1, (n, n)))
            corrected = baseline_correct(matrix)
            s = self_regard(matrix)
            np.testing.assert_allclose(
                np.diag(corrected), (n - 1) / n * s, atol=1e-12
            )

    def test_symmetric_constant_matrix_zero_popularity(self):
        corrected = baseline_correct(pmatrix([[0.2] * 3] * 3))
        np.testing.assert_allclose(popularity(corrected), 0.0, atol=1e-15)

    def test_elevated_column_popularity(self):
        # every sender rates region 2 exactly c above its other ratings;
        # after baselining the received boost is c * (1 - 1/n) = 0.05
        n = 3
        c = 0.05 * n / (n - 1)
        mean = np.full((n, n), 0.1)
        for j in range(n):
            if j != 2:
                mean[j, 2] = 0.1 + c
        corrected = baseline_correct(pmatrix(mean))
        pop = popularity(corrected)
        assert pop[2] == pytest.approx(0.05)

    def test_single_region_rejected(self):
        with pytest.raises(ValueError):
            self_regard(pmatrix([[0.1]]))
        with pytest.raises(ValueError):
            popularity(np.array([[0.0]]))


class TestFriendliestPairs:
    def test_two_regions_single_pair(self):
        pairs = friendliest_pairs(np.array([[0.0, 0.1], [0.2, 0.0]]), [0, 1])
        assert pairs == [(0, 1, pytest.approx(0.3))]

    def test_planted_mutual_pair_ranks_first(self):
        corrected = baseline_correct(
            pmatrix(
                [
                    [0.10, 0.30, 0.10],
                    [0.30, 0.10, 0.10],
                    [0.10, 0.10, 0.10],
                ]
            )
        )
        pairs = friendliest_pairs(corrected, [0, 1, 2])
        assert (pairs[0][0], pairs[0][1]) == (0, 1)

    def test_antisymmetric_matrix_full_tie(self):
        rng = np.random.default_rng(3)
        raw = rng.uniform(-1, 1, (4, 4))
        anti = raw - raw.T  # corrected-polarity-like, antisymmetric
        pairs = friendliest_pairs(anti, [0, 1, 2, 3])
        assert all(score == pytest.approx(0.0) for _, _, score in pairs)


class TestFormatting:
    def test_paper_style_strings(self):
        assert format_with_error(0.164, 0.0014) == "0.164(1)"
        assert format_with_error(0.0042, 0.0002) == "0.0042(2)"
        assert format_with_error(-0.0108, 0.0003) == "-0.0108(3)"

    def test_zero_error(self):
        assert format_with_error(0.1, 0.0) == "0.100(0)"

    def test_error_rounding_up_to_ten(self):
        # 0.0095 rounds to 10 at 3 digits; falls back to 2 digits
        assert format_with_error(0.25, 0.0095) == "0.25(1)"

    def test_undefined_error(self):
        assert format_with_error(0.25, math.nan) == "0.2500"


class TestLexicon:
    def test_default_lexicon_loads(self):
        lex = default_lexicon()
        assert len(lex) >= 20
        assert all(-1.0 <= v <= 1.0 for v in lex.values())

    def test_out_of_range_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("word\t1.5\n")
        with pytest.raises(ConfigError):
            load_lexicon(path)

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("word only\n")
        with pytest.raises(ConfigError):
            load_lexicon(path)

    def test_case_insensitive_keys(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("GOOD\t0.5\n# comment\n\n")
        assert load_lexicon(path) == {"good": 0.5}


class TestSummary:
    def test_summary_matches_primitives(self):
        rng = np.random.default_rng(9)
        matrix = pmatrix(rng.uniform(-0.5, 0.5, (4, 4)))
        rows = sentiment_summary(matrix)
        s = self_regard(matrix)
        pop = popularity(baseline_correct(matrix))
        for i, row in enumerate(rows):
            assert row.self_regard == pytest.approx(s[i])
            assert row.popularity == pytest.approx(pop[i])
            assert row.self_regard_err >= 0.0
