"""Hashed pair/single encoders and cosine similarity.

The independent oracle re-implements FNV-1a hashing from its published
constants so bucket placements are cross-checked, not copied.
"""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sentrank.encoder import (
    BLOCK_A,
    BLOCK_B,
    BLOCK_C,
    DIM,
    cosine,
    encode_pair,
    encode_single,
    tokenize,
)

_MAX_OVERLAP_FEATS = 14  # 6 overlap + 4 jaccard + 4 coverage levels


def oracle_fnv1a(data: str, seed: int = 0x5EED5EED) -> int:
    """Independent FNV-1a 64 from the published offset/prime constants."""
    h = 0xCBF29CE484222325 ^ seed
    for byte in data.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & ((1 << 64) - 1)
    return h


def oracle_bucket(feature: str, width: int) -> tuple[int, float]:
    h = oracle_fnv1a(feature)
    return h % width, 1.0 if (h >> 32) & 1 else -1.0


texts = st.text(alphabet="abc d", min_size=0, max_size=20)


class TestEncodePair:
    def test_empty_inputs_zero_vector(self):
        vec = encode_pair("", "")
        assert vec.shape == (DIM,)
        assert not vec.any()

    def test_disjoint_vocab_interaction_block_zero(self):
        vec = encode_pair("red car", "blue sky")
        assert not vec[BLOCK_A + BLOCK_B:].any()

    def test_identical_two_token_pair_matches_hand_hash(self):
        """'red car' vs itself: 2 shared tokens, jaccard 1, coverage 1."""
        vec = encode_pair("red car", "red car")
        feats = (
            ["#ov1", "#ov2"]
            + [f"#jac{i}" for i in range(1, 5)]
            + [f"#cov{i}" for i in range(1, 5)]
        )
        expected = np.zeros(BLOCK_C)
        for f in feats:
            bucket, sign = oracle_bucket(f, BLOCK_C)
            expected[bucket] += sign
        expected /= np.sqrt(_MAX_OVERLAP_FEATS) * np.sqrt(3.0)
        np.testing.assert_allclose(vec[BLOCK_A + BLOCK_B:], expected, atol=1e-15)

    def test_interaction_norm_maximal_for_identical_pair(self):
        """No right-hand text yields a larger interaction block than the
        left text itself (full overlap lights every thermometer level)."""
        base = np.linalg.norm(encode_pair("red car", "red car")[BLOCK_A + BLOCK_B:])
        for other in ["red", "car", "red bike", "big red car door", "blue sky"]:
            other_norm = np.linalg.norm(
                encode_pair("red car", other)[BLOCK_A + BLOCK_B:]
            )
            assert other_norm <= base + 1e-12

    def test_left_block_matches_hand_hash(self):
        vec = encode_pair("red car", "")
        expected = np.zeros(BLOCK_A)
        for f in ["red", "car", "red car"]:  # unigrams + the one bigram
            bucket, sign = oracle_bucket(f, BLOCK_A)
            expected[bucket] += sign
        expected /= np.linalg.norm(expected)
        np.testing.assert_allclose(vec[:BLOCK_A] * np.sqrt(3.0), expected,
                                   atol=1e-15)

    @given(texts, texts)
    def test_deterministic(self, a, b):
        np.testing.assert_array_equal(encode_pair(a, b), encode_pair(a, b))

    def test_pair_asymmetry(self):
        a, b = "red car", "fast train"
        assert not np.array_equal(encode_pair(a, b), encode_pair(b, a))

    @given(texts, texts)
    def test_norm_at_most_one(self, a, b):
        # The n-gram blocks are unit or zero; the overlap block carries a
        # fixed scale bounded by 1, so the /sqrt(3) concat never exceeds 1.
        assert np.linalg.norm(encode_pair(a, b)) <= 1.0 + 1e-12

    @given(texts, texts)
    def test_finite(self, a, b):
        assert np.isfinite(encode_pair(a, b)).all()

    def test_read_only(self):
        vec = encode_pair("a b", "c d")
        with pytest.raises(ValueError):
            vec[0] = 1.0


class TestEncodeSingle:
    def test_identical_texts_cosine_one(self):
        sim = cosine(encode_single("red car"), encode_single("red car"))
        assert sim == pytest.approx(1.0, abs=1e-12)

    def test_empty_zero_vector(self):
        assert not encode_single("").any()

    def test_overlapping_texts_cosine_strictly_between(self):
        sim = cosine(encode_single("big red car"), encode_single("small red car"))
        assert 0.0 < sim < 1.0

    def test_unit_norm(self):
        assert np.linalg.norm(encode_single("red car")) == pytest.approx(1.0)

    def test_matches_hand_hash(self):
        vec = encode_single("red car")
        expected = np.zeros(DIM)
        for f in ["red", "car", "red car"]:
            bucket, sign = oracle_bucket(f, DIM)
            expected[bucket] += sign
        expected /= np.linalg.norm(expected)
        np.testing.assert_array_equal(vec, expected)


class TestCosine:
    def test_self_similarity(self):
        v = np.array([1.0, 2.0, -3.0])
        assert cosine(v, v) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_known_value(self):
        got = cosine(np.array([1.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0]))
        assert got == pytest.approx(1.0 / np.sqrt(2.0))

    def test_zero_vector_returns_zero(self):
        assert cosine(np.zeros(3), np.array([1.0, 0.0, 0.0])) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            cosine(np.zeros(3), np.zeros(4))

    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=8))
    def test_bounded(self, values):
        v = np.asarray(values)
        u = v[::-1].copy()
        assert -1.0 - 1e-9 <= cosine(u, v) <= 1.0 + 1e-9


class TestTokenize:
    def test_lowercase_and_split(self):
        assert tokenize("Red-CAR 42!") == ["red", "car", "42"]

    def test_empty(self):
        assert tokenize("  ") == []
