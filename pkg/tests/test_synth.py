import numpy as np
import pytest

from geosocial.errors import ConfigError
from geosocial.flow import induce_flow_matrix
from geosocial.ingest import GridSpec, locate_users, parse_posts
from geosocial.network import build_mention_network, filter_tiles
from geosocial.pipeline import write_posts_jsonl
from geosocial.synth import (
    RegionSpec,
    SynthConfig,
    config_from_dict,
    generate,
    planted_config,
    validate_config,
)
from geosocial.vocab import VocabScope, build_region_corpora


def small_config(**overrides) -> SynthConfig:
    # 8 tiles per region, 2 users per tile
    base = dict(
        seed=3,
        grid=GridSpec(bbox=(0.0, 0.0, 4.0, 4.0), resolution=4),
        regions=[
            RegionSpec(block=(0, 0, 1, 3), user_count=16, dialect_words=["foo"]),
            RegionSpec(block=(2, 0, 3, 3), user_count=16, dialect_words=["bar"]),
        ],
        posts_per_user=6,
    )
    base.update(overrides)
    return SynthConfig(**base)


class TestValidation:
    def test_valid_config_passes(self):
        validate_config(small_config())

    def test_all_violations_listed(self):
        config = small_config(
            regions=[
                RegionSpec(block=(0, 0, 9, 9), user_count=1, intra_bias=0.2),
                RegionSpec(block=(0, 0, 1, 3), user_count=4, sentiment_offset=0.9),
            ],
            posts_per_user=0,
        )
        with pytest.raises(ConfigError) as err:
            validate_config(config)
        message = str(err.value)
        assert "outside" in message
        assert "intra_bias" in message
        assert "sentiment_offset" in message
        assert "posts_per_user" in message

    def test_overlapping_blocks_rejected(self):
        config = small_config(
            regions=[
                RegionSpec(block=(0, 0, 2, 2), user_count=4),
                RegionSpec(block=(2, 2, 3, 3), user_count=4),
            ]
        )
        with pytest.raises(ConfigError, match="already in region"):
            validate_config(config)

    def test_lexicon_collision_rejected(self):
        config = small_config(shared_vocab=["good", "plain"])
        with pytest.raises(ConfigError, match="lexicon"):
            validate_config(config)


class TestGenerate:
    def test_same_seed_byte_identical(self, tmp_path):
        paths = []
        for name in ("a.jsonl", "b.jsonl"):
            posts, _ = generate(small_config())
            path = tmp_path / name
            write_posts_jsonl(path, posts)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_different_seed_differs(self):
        posts_a, _ = generate(small_config())
        posts_b, _ = generate(small_config(seed=4))
        assert [p.text for p in posts_a] != [p.text for p in posts_b]

    def test_exact_post_count_for_fixed_rate(self):
        posts, _ = generate(small_config())
        assert len(posts) == 32 * 6

    def test_every_post_survives_ingestion(self, tmp_path):
        config = small_config()
        posts, _ = generate(config)
        path = tmp_path / "posts.jsonl"
        write_posts_jsonl(path, posts)
        with open(path) as fh:
            parsed, rejections = parse_posts(fh, config.grid.bbox)
        assert rejections.total() == 0
        assert len(parsed) == len(posts)

    def test_truth_labels_consistent(self):
        config = small_config()
        posts, truth = generate(config)
        for user, region in truth.user_region.items():
            assert truth.tile_region[truth.user_tile[user]] == region
        authors = {p.author_id for p in posts}
        assert authors == set(truth.user_region)

    def test_full_intra_bias_gives_diagonal_flow(self):
        config = small_config(
            regions=[
                RegionSpec(block=(0, 0, 1, 3), user_count=16, intra_bias=1.0),
                RegionSpec(block=(2, 0, 3, 3), user_count=16, intra_bias=1.0),
            ]
        )
        posts, truth = generate(config)
        locations = locate_users(posts, config.grid)
        net, _ = build_mention_network(posts, locations)
        flow = induce_flow_matrix(net, truth.tile_region)
        off_diagonal = flow.m.sum() - np.trace(flow.m)
        assert off_diagonal == 0.0

    def test_no_tiles_lost_to_internal_mention_filter(self):
        config = small_config()
        posts, _ = generate(config)
        locations = locate_users(posts, config.grid)
        net, _ = build_mention_network(posts, locations)
        assert filter_tiles(net).nodes == net.nodes

    def test_dialect_words_eligible_in_both_corpora(self):
        config = small_config()
        posts, truth = generate(config)
        locations = locate_users(posts, config.grid)
        corpora = build_region_corpora(posts, truth.tile_region, locations)
        for region, word in ((0, "foo"), (1, "bar")):
            local_counts, local_tweets = corpora.corpus(VocabScope("local", region))
            out_counts, out_tweets = corpora.corpus(VocabScope("outbound", region))
            assert local_counts[word] / local_tweets > 0.001
            assert out_counts[word] / out_tweets > 0.001

    def test_sentiment_words_hit_offset_exactly(self):
        from geosocial.sentiment import default_lexicon, polarity
        from geosocial.vocab import tokenize

        config = small_config(
            regions=[
                RegionSpec(block=(0, 0, 1, 3), user_count=16, sentiment_offset=0.1),
                RegionSpec(block=(2, 0, 3, 3), user_count=16, sentiment_offset=-0.25),
            ]
        )
        posts, truth = generate(config)
        lexicon = default_lexicon()
        offsets = {0: 0.1, 1: -0.25}
        for post in posts:
            if not post.mentioned_ids:
                continue
            target_region = truth.user_region[post.mentioned_ids[0]]
            score = polarity(tokenize(post.text), lexicon)
            assert score == pytest.approx(offsets[target_region], abs=1e-12)


class TestHelpers:
    def test_planted_config_is_valid_and_covers_grid(self):
        config = planted_config(resolution=10)
        validate_config(config)
        tiles = {t for region in config.regions for t in region.tiles()}
        assert len(tiles) == 100

    def test_config_from_dict(self):
        data = {
            "seed": 5,
            "grid": {"bbox": [0.0, 0.0, 4.0, 4.0], "resolution": 4},
            "posts_per_user": [2, 5],
            "regions": [
                {"block": [0, 0, 1, 3], "user_count": 8},
                {"block": [2, 0, 3, 3], "user_count": 8, "dialect_words": ["zap"]},
            ],
        }
        config = config_from_dict(data)
        assert config.posts_per_user == (2, 5)
        assert config.regions[1].dialect_words == ["zap"]
        validate_config(config)
        posts, _ = generate(config)
        assert 16 * 2 <= len(posts) <= 16 * 5

    def test_bad_dict_raises_config_error(self):
        with pytest.raises(ConfigError):
            config_from_dict({"seed": 1})
