"""Deterministic hashed text encoder.

Produces fixed-dimension vectors for (left, sentence) pairs and single
texts.  The pair encoding is built from three hashed feature blocks:

    [ left unigrams+bigrams | sentence unigrams+bigrams | token overlap ]

The n-gram blocks are L2-normalized; the overlap block keeps a fixed
scale so growing overlap keeps growing the signal.  Everything is pure
and seeded by a compile-time constant,
so identical inputs give bit-identical vectors on every platform.
"""

from __future__ import annotations

import functools
import re

import numpy as np

DIM = 256
BLOCK_A = 96   # left-text features
BLOCK_B = 96   # sentence features
BLOCK_C = 64   # interaction features
ENCODER_ID = f"fnv1a64/{BLOCK_A}-{BLOCK_B}-{BLOCK_C}"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_SEED = 0x5EED5EED
_MASK64 = (1 << 64) - 1

_TOKEN_RE = re.compile(r"[a-z0-9]+")

# Largest number of overlap-block features a pair can emit (6 overlap
# levels + 4 jaccard levels + 4 coverage levels); used as its fixed scale.
_MAX_OVERLAP_FEATS = 14


def tokenize(text: str) -> list[str]:
    """Lowercase tokens, split on non-alphanumeric, no stemming."""
    return _TOKEN_RE.findall(text.lower())


def _fnv1a(data: str) -> int:
    h = _FNV_OFFSET ^ _SEED
    for byte in data.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def _ngram_features(tokens: list[str]) -> list[str]:
    feats = list(tokens)
    feats.extend(f"{a} {b}" for a, b in zip(tokens, tokens[1:]))
    return feats


def _hash_into(features: list[str], width: int) -> np.ndarray:
    vec = np.zeros(width)
    for feat in features:
        h = _fnv1a(feat)
        sign = 1.0 if (h >> 32) & 1 else -1.0
        vec[h % width] += sign
    return vec


def _l2(vec: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0.0 else vec


def _overlap_features(a_tokens: list[str], b_tokens: list[str]) -> list[str]:
    """Thermometer-coded overlap-size features for a text pair.

    A pair at overlap level k lights every feature up to k, so a level
    never seen in training still activates the learned lower thresholds
    instead of a single untrained slot.  Token identities are deliberately
    left out of this block: they memorize the training pairs, while the
    size thresholds are what transfer to unseen vocabulary.
    """
    a_set, b_set = set(a_tokens), set(b_tokens)
    shared = a_set & b_set
    feats: list[str] = []
    if shared:
        for level in range(1, min(len(shared), 6) + 1):
            feats.append(f"#ov{level}")
        jac = len(shared) / len(a_set | b_set)
        for level in range(1, int(jac * 4) + 1):
            feats.append(f"#jac{level}")
        cov = len(shared) / len(a_set)
        for level in range(1, int(cov * 4) + 1):
            feats.append(f"#cov{level}")
    return feats


@functools.lru_cache(maxsize=1 << 18)
def encode_pair(left: str, sentence: str) -> np.ndarray:
    """Encode an ordered (query-or-feedback, sentence) pair into R^DIM.

    The returned array is cached and marked read-only; copy before
    mutating.
    """
    a_tokens = tokenize(left)
    b_tokens = tokenize(sentence)
    block_a = _l2(_hash_into(_ngram_features(a_tokens), BLOCK_A))
    block_b = _l2(_hash_into(_ngram_features(b_tokens), BLOCK_B))
    # Fixed scale, not L2: thermometer activations must keep adding
    # magnitude as overlap grows, and normalizing the block would hand
    # back the same norm at every overlap level.
    block_c = _hash_into(
        _overlap_features(a_tokens, b_tokens), BLOCK_C
    ) / np.sqrt(_MAX_OVERLAP_FEATS)
    vec = np.concatenate([block_a, block_b, block_c]) / np.sqrt(3.0)
    vec.flags.writeable = False
    return vec


@functools.lru_cache(maxsize=1 << 16)
def encode_single(text: str) -> np.ndarray:
    """Encode one text as a unit-norm hashed bag of unigrams+bigrams."""
    vec = _l2(_hash_into(_ngram_features(tokenize(text)), DIM))
    vec.flags.writeable = False
    return vec


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    if len(u) != len(v):
        raise ValueError(f"vector length mismatch: {len(u)} vs {len(v)}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))
