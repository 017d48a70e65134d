"""Similarity scoring, normalization, fusion rules, and ranking."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cirengine.calibration import CalibrationStats
from cirengine.config import EngineConfig
from cirengine.exceptions import (
    ConfigDependencyViolation,
    FingerprintMismatch,
    InvalidWeight,
    NegativeInputForGeometricBlend,
    NonNegativeMinStat,
)
from cirengine.projection import build_projection, query_side_from_centered
from cirengine.scoring import (
    FusionConfig,
    QueryBundle,
    baseline_fuse,
    check_stats_consistency,
    harris_fuse,
    min_normalize,
    rank_database,
    score_image,
    score_text,
)
from cirengine.store import EmbeddingSet

from helpers import random_unit_rows, unit


class TestScoreImage:
    def test_row_at_mean_scores_zero(self, rng):
        d = 6
        mu = rng.normal(size=d) * 0.1
        proj = build_projection(np.eye(d), k=3, alpha=0.0)
        w, c = query_side_from_centered(rng.normal(size=d), mu, proj)
        assert score_image(mu, w, c) == pytest.approx(0.0, abs=1e-12)

    def test_zero_query_side_scores_zero(self, rng):
        assert score_image(rng.normal(size=4), np.zeros(4), 0.0) == 0.0

    def test_matches_projected_dot_oracle(self, rng):
        d, k = 16, 5
        m = rng.normal(size=(d, d))
        proj = build_projection(m @ m.T + 0.1 * np.eye(d), k=k, alpha=0.0)
        mu = rng.normal(size=d) * 0.05
        q = unit(rng.normal(size=d))
        w, c = query_side_from_centered(q - mu, mu, proj)
        for _ in range(20):
            x = unit(rng.normal(size=d))
            direct = (proj.basis @ (x - mu)) @ (proj.basis @ (q - mu))
            assert score_image(x, w, c) == pytest.approx(direct, rel=1e-9, abs=1e-12)


class TestScoreText:
    def test_zero_text_query(self, rng):
        x = unit(rng.normal(size=4))
        assert score_text(x, np.zeros(4), np.zeros(4)) == 0.0

    def test_row_at_mean(self, rng):
        mu = rng.normal(size=4)
        assert score_text(mu, mu, rng.normal(size=4)) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_pair(self):
        x = np.array([1.0, 0.0, 0.0])
        q_t = np.array([0.0, 1.0, 0.0])
        assert score_text(x, np.zeros(3), q_t) == 0.0


class TestMinNormalize:
    def test_paper_scale_endpoints(self):
        for s_min in (-0.077, -0.117):
            assert min_normalize(s_min, s_min) == 0.0
            assert min_normalize(0.0, s_min) == 1.0

    def test_midpoint(self):
        assert min_normalize(-0.0385, -0.077) == pytest.approx(0.5)

    def test_non_negative_stat_rejected(self):
        with pytest.raises(NonNegativeMinStat):
            min_normalize(0.5, 0.0)

    @given(
        st.floats(-5, 5), st.floats(-5, 5),
        st.floats(-10, -1e-3),
    )
    @settings(max_examples=200, deadline=None)
    def test_order_preserving(self, s1, s2, s_min):
        # monotone always; strictly so when the gap survives the float
        # rounding of the affine shift
        n1, n2 = min_normalize(s1, s_min), min_normalize(s2, s_min)
        if s1 < s2:
            assert n1 <= n2
            if s2 - s1 > 1e-9 * max(abs(s1), abs(s2), abs(s_min)):
                assert n1 < n2
        elif s1 == s2:
            assert n1 == n2

    def test_vectorized(self):
        out = min_normalize(np.array([-0.5, 0.0, 0.5]), -0.5)
        np.testing.assert_allclose(out, [0.0, 1.0, 2.0])


class TestHarrisFuse:
    def test_lambda_zero_is_product(self):
        assert harris_fuse(2.0, 3.0, 0.0) == 6.0

    def test_balanced_pair(self):
        assert harris_fuse(1.0, 1.0, 0.1) == pytest.approx(0.6)

    def test_unbalanced_penalized_below_zero(self):
        assert harris_fuse(2.0, 0.0, 0.1) == pytest.approx(-0.4)

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 1))
    @settings(max_examples=200, deadline=None)
    def test_symmetric(self, a, b, lam):
        assert harris_fuse(a, b, lam) == harris_fuse(b, a, lam)

    def test_lambda_zero_ordering_equals_product(self, rng):
        s_v = rng.uniform(0, 3, size=100)
        s_t = rng.uniform(0, 3, size=100)
        harris_order = np.argsort(-harris_fuse(s_v, s_t, 0.0), kind="stable")
        product_order = np.argsort(-(s_v * s_t), kind="stable")
        np.testing.assert_array_equal(harris_order, product_order)


class TestBaselineFuse:
    def test_modes(self):
        assert baseline_fuse(2.0, 3.0, FusionConfig(mode="text_only")) == 3.0
        assert baseline_fuse(2.0, 3.0, FusionConfig(mode="image_only")) == 2.0
        assert baseline_fuse(2.0, 3.0, FusionConfig(mode="sum")) == 5.0
        assert baseline_fuse(0.5, 0.4, FusionConfig(mode="product")) == pytest.approx(0.2)

    def test_weighted_sum_endpoints(self, rng):
        s_v = rng.normal(size=50)
        s_t = rng.normal(size=50)
        at0 = baseline_fuse(s_v, s_t, FusionConfig(mode="weighted_sum", weight=0.0))
        np.testing.assert_array_equal(at0, s_t)
        at1 = baseline_fuse(s_v, s_t, FusionConfig(mode="weighted_sum", weight=1.0))
        np.testing.assert_array_equal(at1, s_v)

    def test_weighted_product_on_normalized(self):
        out = baseline_fuse(4.0, 1.0, FusionConfig(mode="weighted_product", weight=0.5))
        assert out == pytest.approx(2.0)

    def test_weighted_product_negative_rejected(self):
        with pytest.raises(NegativeInputForGeometricBlend):
            baseline_fuse(-0.1, 1.0, FusionConfig(mode="weighted_product", weight=0.5))

    def test_weight_required_in_range(self):
        with pytest.raises(InvalidWeight):
            FusionConfig(mode="weighted_sum", weight=1.5)
        with pytest.raises(InvalidWeight):
            FusionConfig(mode="weighted_sum")

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            FusionConfig(mode="mystery")


def toy_db_and_stats():
    """3-item database engineered so min-normalized score pairs are exactly
    (1, 1), (1.4, 0.1), (0.1, 1.4) with s_min = -0.5 in both modalities."""
    s_min = -0.5
    pairs = {"a": (1.0, 1.0), "b": (1.4, 0.1), "c": (0.1, 1.4)}
    rows, ids = [], []
    for item_id, (nv, nt) in sorted(pairs.items()):
        s_v = s_min + nv * abs(s_min)
        s_t = s_min + nt * abs(s_min)
        filler = np.sqrt(1.0 - s_v**2 - s_t**2)
        rows.append([s_v, s_t, filler, 0.0])
        ids.append(item_id)
    db = EmbeddingSet(4, tuple(ids), np.asarray(rows, dtype=np.float32), "image")
    stats = CalibrationStats(
        mu_image=np.zeros(4), mu_text=np.zeros(4),
        s_v_min=s_min, s_t_min=s_min,
    )
    bundle = QueryBundle(
        q_v_centered=np.eye(4)[0].astype(np.float64),
        q_t_centered=np.eye(4)[1].astype(np.float64),
    )
    return db, stats, bundle


BARE = dict(contextualization=False, projection=False, query_expansion=False)


class TestRankDatabase:
    def test_toy_triple_harris_ranking(self):
        db, stats, bundle = toy_db_and_stats()
        config = EngineConfig(**BARE)
        ranked = rank_database(bundle, db, stats=stats, proj=None,
                               config=config,
                               fusion=FusionConfig(harris_lambda=0.1))
        assert [item.id for item in ranked] == ["a", "b", "c"]
        assert ranked[0].fused == pytest.approx(0.6, abs=1e-6)
        assert ranked[1].fused == pytest.approx(-0.085, abs=1e-6)
        assert ranked[2].fused == pytest.approx(-0.085, abs=1e-6)
        # b and c tie exactly; ordering is ascending id
        assert ranked[1].fused == ranked[2].fused

    def test_text_only_matches_sort_by_s_t(self):
        db, stats, bundle = toy_db_and_stats()
        config = EngineConfig(**BARE)
        ranked = rank_database(bundle, db, stats, None, config,
                               FusionConfig(mode="text_only"))
        by_s_t = sorted(ranked, key=lambda r: (-r.s_t, r.id))
        assert [r.id for r in ranked] == [r.id for r in by_s_t]

    def test_lambda_zero_equals_product_order(self):
        db, stats, bundle = toy_db_and_stats()
        config = EngineConfig(harris=False, **BARE)
        harris0 = rank_database(bundle, db, stats, None, config,
                                FusionConfig(mode="basic_harris"))
        product = rank_database(bundle, db, stats, None, config,
                                FusionConfig(mode="product"))
        assert [r.id for r in harris0] == [r.id for r in product]

    def test_permutation_invariant(self, rng):
        d = 8
        rows = random_unit_rows(rng, 20, d)
        ids = tuple(f"x_{i:03d}" for i in range(20))
        db = EmbeddingSet(d, ids, rows, "image")
        perm = rng.permutation(20)
        db2 = EmbeddingSet(d, tuple(ids[i] for i in perm), rows[perm], "image")
        stats = CalibrationStats(np.zeros(d), np.zeros(d), -0.5, -0.5)
        bundle = QueryBundle(unit(rng.normal(size=d)), unit(rng.normal(size=d)))
        config = EngineConfig(**BARE)
        fusion = FusionConfig()
        r1 = rank_database(bundle, db, stats, None, config, fusion)
        r2 = rank_database(bundle, db2, stats, None, config, fusion)
        assert [x.id for x in r1] == [x.id for x in r2]
        np.testing.assert_array_equal([x.fused for x in r1],
                                      [x.fused for x in r2])

    def test_every_item_scored_once(self, rng):
        db, stats, bundle = toy_db_and_stats()
        ranked = rank_database(bundle, db, stats, None,
                               EngineConfig(**BARE), FusionConfig())
        assert sorted(item.id for item in ranked) == ["a", "b", "c"]


class TestConfigRules:
    def test_harris_requires_min_norm(self):
        with pytest.raises(ConfigDependencyViolation):
            EngineConfig(min_norm=False, harris=True, **{
                k: v for k, v in BARE.items()
            })

    def test_projection_requires_centering(self):
        with pytest.raises(ConfigDependencyViolation):
            EngineConfig(centering=False, projection=True,
                         contextualization=False, query_expansion=False)

    def test_projected_stats_require_projection(self):
        stats = CalibrationStats(np.zeros(4), np.zeros(4), -0.5, -0.5,
                                 projected=True, projection_fingerprint="abc")
        config = EngineConfig(**BARE)
        with pytest.raises(FingerprintMismatch):
            check_stats_consistency(config, stats, None)

    def test_fingerprint_must_match(self):
        proj = build_projection(np.eye(4), k=2, alpha=0.0)
        stats = CalibrationStats(np.zeros(4), np.zeros(4), -0.5, -0.5,
                                 projected=True, projection_fingerprint="zzz")
        config = EngineConfig(contextualization=False, query_expansion=False)
        with pytest.raises(FingerprintMismatch):
            check_stats_consistency(config, stats, proj)

    def test_unprojected_stats_with_projection_on(self):
        proj = build_projection(np.eye(4), k=2, alpha=0.0)
        stats = CalibrationStats(np.zeros(4), np.zeros(4), -0.5, -0.5)
        config = EngineConfig(contextualization=False, query_expansion=False)
        with pytest.raises(FingerprintMismatch):
            check_stats_consistency(config, stats, proj)

    def test_consistent_combination_accepted(self):
        proj = build_projection(np.eye(4), k=2, alpha=0.0)
        stats = CalibrationStats(np.zeros(4), np.zeros(4), -0.5, -0.5,
                                 projected=True,
                                 projection_fingerprint=proj.fingerprint)
        config = EngineConfig(contextualization=False, query_expansion=False)
        check_stats_consistency(config, stats, proj)
