import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from logofuse.features import (
    FeatureBlock,
    FeatureError,
    FusedFeature,
    QueryWeights,
    color_histogram_extractor,
    edge_orientation_extractor,
    l2_normalize,
    text_presence_extractor,
    weighted_distance,
)
from logofuse.taxonomy import CharacteristicKind as K


def fused(**by_token):
    blocks = {}
    for token, values in by_token.items():
        kind = K.from_token(token)
        blocks[kind] = FeatureBlock(kind, np.asarray(values, dtype=float))
    return FusedFeature(blocks)


class TestNormalize:
    def test_three_four_five(self):
        out = l2_normalize(FeatureBlock(K.COLOR, [3.0, 4.0]))
        np.testing.assert_allclose(out.values, [0.6, 0.8], atol=1e-15)

    def test_zero_vector_exception(self):
        out = l2_normalize(FeatureBlock(K.COLOR, [0.0, 0.0]))
        assert (out.values == 0.0).all()

    def test_random_vector_unit_norm(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            block = l2_normalize(FeatureBlock(K.SHAPE, rng.normal(size=128)))
            # oracle: exact-compensated summation of squares
            norm = math.sqrt(math.fsum(float(v) * float(v) for v in block.values))
            assert abs(norm - 1.0) <= 1e-9


class TestWeightedDistance:
    def test_one_hot_reduces_to_euclidean(self):
        a = fused(color=[1.0, 0.0])
        b = fused(color=[0.0, 0.0])
        w = QueryWeights({K.COLOR: 1.0})
        assert weighted_distance(a, b, w) == 1.0

    def test_two_kind_average(self):
        # color sub-distance 1, shape sub-distance 5, equal weights -> 3
        a = fused(color=[1.0, 0.0], shape=[3.0, 4.0])
        b = fused(color=[0.0, 0.0], shape=[0.0, 0.0])
        w = QueryWeights({K.COLOR: 0.5, K.SHAPE: 0.5})
        assert weighted_distance(a, b, w) == pytest.approx(3.0, abs=1e-15)

    def test_identity(self):
        a = fused(color=[0.3, 0.7], shape=[1.0, 0.0, 0.0])
        w = QueryWeights.normalized({K.COLOR: 2.0, K.SHAPE: 3.0})
        assert weighted_distance(a, a, w) == 0.0

    def test_zero_weight_kind_may_be_absent(self):
        a = fused(color=[1.0, 0.0])
        b = fused(color=[0.0, 1.0])
        w = QueryWeights({K.COLOR: 1.0, K.SHAPE: 0.0})
        assert weighted_distance(a, b, w) == pytest.approx(math.sqrt(2.0))

    def test_missing_positive_kind_is_error(self):
        a = fused(color=[1.0, 0.0])
        b = fused(color=[0.0, 1.0])
        w = QueryWeights.normalized({K.COLOR: 1.0, K.SHAPE: 1.0})
        with pytest.raises(FeatureError):
            weighted_distance(a, b, w)

    def test_dim_mismatch_is_error(self):
        a = fused(color=[1.0, 0.0])
        b = fused(color=[0.0, 1.0, 0.0])
        with pytest.raises(FeatureError):
            weighted_distance(a, b, QueryWeights({K.COLOR: 1.0}))

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.01, 100.0), st.integers(0, 2**32 - 1))
    def test_weight_rescaling_invariance(self, scale, seed):
        rng = np.random.default_rng(seed)
        a = fused(color=rng.normal(size=4), shape=rng.normal(size=6))
        b = fused(color=rng.normal(size=4), shape=rng.normal(size=6))
        raw = {K.COLOR: rng.uniform(0.1, 1.0), K.SHAPE: rng.uniform(0.1, 1.0)}
        w1 = QueryWeights.normalized(raw)
        w2 = QueryWeights.normalized({k: v * scale for k, v in raw.items()})
        d1 = weighted_distance(a, b, w1)
        d2 = weighted_distance(a, b, w2)
        assert abs(d1 - d2) <= 1e-12

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_metric_axioms(self, seed):
        rng = np.random.default_rng(seed)
        pts = [fused(color=rng.normal(size=3), shape=rng.normal(size=5)) for _ in range(3)]
        w = QueryWeights.normalized({K.COLOR: rng.uniform(0, 1) + 1e-6, K.SHAPE: rng.uniform(0, 1) + 1e-6})
        a, b, c = pts
        assert weighted_distance(a, a, w) == 0.0
        assert weighted_distance(a, b, w) == weighted_distance(b, a, w)
        assert weighted_distance(a, c, w) <= weighted_distance(a, b, w) + weighted_distance(b, c, w) + 1e-9

    def test_normalized_blocks_bound_distance(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            a = fused(color=l2_normalize(FeatureBlock(K.COLOR, rng.normal(size=8))).values)
            b = fused(color=l2_normalize(FeatureBlock(K.COLOR, rng.normal(size=8))).values)
            d = weighted_distance(a, b, QueryWeights({K.COLOR: 1.0}))
            assert 0.0 <= d <= 2.0 + 1e-12


class TestQueryWeights:
    def test_normalized_rescales(self):
        w = QueryWeights.normalized({K.COLOR: 70, K.SHAPE: 30})
        assert w.get(K.COLOR) == pytest.approx(0.7)
        assert w.get(K.SHAPE) == pytest.approx(0.3)
        assert sum(w.weights.values()) == pytest.approx(1.0, abs=1e-9)

    def test_all_zero_rejected(self):
        with pytest.raises(FeatureError):
            QueryWeights.normalized({K.COLOR: 0.0})

    def test_negative_rejected(self):
        with pytest.raises(FeatureError):
            QueryWeights.normalized({K.COLOR: -1.0, K.SHAPE: 2.0})

    def test_unnormalized_direct_construction_rejected(self):
        with pytest.raises(FeatureError):
            QueryWeights({K.COLOR: 0.5, K.SHAPE: 0.6})


class TestColorHistogram:
    def test_pure_red_single_bin(self):
        img = np.zeros((8, 8, 3))
        img[..., 0] = 1.0
        block = color_histogram_extractor(img)
        assert block.dim == 125
        nonzero = np.nonzero(block.values)[0]
        assert len(nonzero) == 1
        assert block.values[nonzero[0]] == pytest.approx(1.0)

    def test_half_red_half_blue_two_equal_bins(self):
        img = np.zeros((8, 8, 3))
        img[:4, :, 0] = 1.0
        img[4:, :, 2] = 1.0
        block = color_histogram_extractor(img)
        nonzero = block.values[np.nonzero(block.values)]
        assert len(nonzero) == 2
        np.testing.assert_allclose(nonzero[0], nonzero[1])

    def test_l1_mass_before_l2(self):
        rng = np.random.default_rng(17)
        img = rng.random((16, 16, 3))
        # oracle: per-pixel bin counting with plain loops
        counts = np.zeros(125)
        for y in range(16):
            for x in range(16):
                r, g, b = (min(int(v * 5), 4) for v in img[y, x])
                counts[(r * 5 + g) * 5 + b] += 1
        counts /= counts.sum()
        assert counts.sum() == pytest.approx(1.0, abs=1e-9)
        expected = counts / math.sqrt(math.fsum(c * c for c in counts))
        block = color_histogram_extractor(img)
        np.testing.assert_allclose(block.values, expected, atol=1e-12)


def reference_edge_histogram(img):
    """Loop-based reimplementation of the oriented-edge descriptor,
    returning the raw (unnormalized) histogram."""
    gray = img @ np.array([0.299, 0.587, 0.114])
    h, w = gray.shape
    hist = np.zeros(2 * 4 * 16)
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            gx = (gray[y, x + 1] - gray[y, x - 1]) / 2.0
            gy = (gray[y + 1, x] - gray[y - 1, x]) / 2.0
            mag = math.hypot(gx, gy)
            theta = math.atan2(gy, gx)
            ob = min(int((theta + math.pi) / (2 * math.pi) * 16), 15)
            cr = min(y * 2 // h, 1)
            cc = min(x * 4 // w, 3)
            hist[(cr * 4 + cc) * 16 + ob] += mag
    return hist


class TestEdgeOrientation:
    def test_uniform_image_zero_block(self):
        block = edge_orientation_extractor(np.full((8, 8, 3), 0.5))
        assert block.dim == 128
        assert (block.values == 0.0).all()

    def test_vertical_step_edge(self):
        # hand-derived: step at column 4 of an 8x8 image puts magnitude
        # 0.5 at interior columns 3 and 4, orientation bin 8 (gx>0, gy=0),
        # spread over the four central grid cells -> four 0.5 entries
        img = np.zeros((8, 8, 3))
        img[:, 4:, :] = 1.0
        block = edge_orientation_extractor(img)
        expected = np.zeros(128)
        for cell in (1, 2, 5, 6):
            expected[cell * 16 + 8] = 0.5
        np.testing.assert_allclose(block.values, expected, atol=1e-12)

    def test_matches_reference_on_random_fixture(self):
        rng = np.random.default_rng(77)
        img = rng.random((16, 16, 3))
        raw = reference_edge_histogram(img)
        expected = raw / math.sqrt(math.fsum(v * v for v in raw))
        block = edge_orientation_extractor(img)
        np.testing.assert_allclose(block.values, expected, atol=1e-12)

    def test_rot90_shifts_orientations(self):
        rng = np.random.default_rng(78)
        img = rng.random((16, 16, 3))
        rot = np.rot90(img).copy()
        # extractor agrees with the brute-force reference on both views
        for view in (img, rot):
            raw = reference_edge_histogram(view)
            expected = raw / math.sqrt(math.fsum(v * v for v in raw))
            np.testing.assert_allclose(
                edge_orientation_extractor(view).values, expected, atol=1e-12
            )
        # and the cell-summed orientation histogram shifts by a quarter turn
        orig_total = reference_edge_histogram(img).reshape(8, 16).sum(axis=0)
        rot_total = reference_edge_histogram(rot).reshape(8, 16).sum(axis=0)
        np.testing.assert_allclose(rot_total, np.roll(orig_total, -4), atol=1e-9)


class TestTextHeuristic:
    def test_dark_strip_reads_as_text(self):
        img = np.ones((64, 64, 3))
        img[56:60, 8:56] = 0.0  # ink strip in the bottom quarter
        block = text_presence_extractor(img)
        np.testing.assert_array_equal(block.values, [0.0, 1.0])

    def test_blank_image_reads_as_no_text(self):
        block = text_presence_extractor(np.ones((64, 64, 3)))
        np.testing.assert_array_equal(block.values, [1.0, 0.0])


class TestFusedFeature:
    def test_canonical_order(self):
        f = fused(shape=[1.0], color=[1.0])
        assert f.kinds() == (K.COLOR, K.SHAPE)
        assert f.concatenated().tolist() == [1.0, 1.0]

    def test_kind_key_consistency(self):
        with pytest.raises(FeatureError):
            FusedFeature({K.COLOR: FeatureBlock(K.SHAPE, [1.0])})
