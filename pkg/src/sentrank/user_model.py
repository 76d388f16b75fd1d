"""User-simulation head: a softmax classifier over pair encodings.

Scores how likely a user selects a sentence given a query or an earlier
feedback sentence.  Includes self-supervised pretraining from
lexical-overlap labels and rearrangement learning, which pulls the
simulated ranking toward the slate ordering preferred by the value
network.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

import numpy as np

from .corpus import CorpusIndex, Document, Query, QrelTable
from .encoder import DIM, encode_pair, tokenize
from .optim import Adam

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class UserModelParams:
    """Weights of the selection head: softmax(W @ tanh(x) + b)."""

    W: np.ndarray  # (2, d)
    b: np.ndarray  # (2,)

    def __post_init__(self):
        if self.W.shape != (2, self.W.shape[1]) or self.b.shape != (2,):
            raise ValueError("bad user model parameter shapes")
        if not (np.isfinite(self.W).all() and np.isfinite(self.b).all()):
            raise ValueError("non-finite user model parameters")


@dataclass(frozen=True)
class PretrainPair:
    left_text: str
    sentence: str
    label: int  # 1 = Selected, 0 = NotSelected

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")


def init_user_params(seed: int, dim: int = DIM) -> UserModelParams:
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(dim)
    return UserModelParams(
        W=rng.uniform(-bound, bound, size=(2, dim)),
        b=np.zeros(2),
    )


def zero_user_params(dim: int = DIM) -> UserModelParams:
    return UserModelParams(W=np.zeros((2, dim)), b=np.zeros(2))


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def u_scores_from_matrix(params: UserModelParams, X: np.ndarray) -> np.ndarray:
    """P(Selected) for each row of an (n, d) encoding matrix."""
    Z = np.tanh(X)
    P = _softmax_rows(Z @ params.W.T + params.b)
    return P[:, 1]


def u_score(params: UserModelParams, left: str, sentence: str) -> float:
    x = encode_pair(left, sentence)
    p = float(u_scores_from_matrix(params, x[None, :])[0])
    if not np.isfinite(p):
        raise ValueError("non-finite selection probability")
    return p


@functools.lru_cache(maxsize=8192)
def doc_pair_block(left: str, doc: Document, m_sentences: int) -> np.ndarray:
    """Stacked pair encodings of a left text against a document's first
    m sentences; cached because ranking revisits the same pairs heavily."""
    X = np.stack(
        [encode_pair(left, s.text) for s in doc.sentences[:m_sentences]]
    )
    X.flags.writeable = False
    return X


@functools.lru_cache(maxsize=8192)
def doc_pair_block_act(left: str, doc: Document, m_sentences: int) -> np.ndarray:
    """tanh-activated :func:`doc_pair_block`; cached separately because the
    activation is the dominant cost when the same block is rescored with
    updated weights."""
    Z = np.tanh(doc_pair_block(left, doc, m_sentences))
    Z.flags.writeable = False
    return Z


def u_probs_activated(params: UserModelParams, Z: np.ndarray) -> np.ndarray:
    """P(Selected) for rows that are already tanh-activated encodings."""
    return _softmax_rows(Z @ params.W.T + params.b)[:, 1]


def doc_score(
    params: UserModelParams, left: str, doc: Document, m_sentences: int
) -> tuple[float, int]:
    """Max selection probability over the first m sentences of a document.

    Returns (probability, argmax sentence index); ties pick the lowest
    index.
    """
    if m_sentences < 1:
        raise ValueError("m_sentences must be >= 1")
    if not doc.sentences:
        raise ValueError(f"document {doc.doc_id!r} has no sentences")
    probs = u_scores_from_matrix(params, doc_pair_block(left, doc, m_sentences))
    idx = int(np.argmax(probs))
    return float(probs[idx]), idx


def doc_scores_batch(
    params: UserModelParams,
    left: str,
    docs: list[Document],
    m_sentences: int,
) -> tuple[np.ndarray, np.ndarray]:
    """doc_score over many documents with one matrix multiply."""
    blocks = [doc_pair_block_act(left, d, m_sentences) for d in docs]
    probs = u_probs_activated(params, np.concatenate(blocks))
    scores = np.empty(len(docs))
    reps = np.empty(len(docs), dtype=int)
    offset = 0
    for i, block in enumerate(blocks):
        chunk = probs[offset:offset + len(block)]
        reps[i] = int(np.argmax(chunk))
        scores[i] = chunk[reps[i]]
        offset += len(block)
    return scores, reps


def generate_pretrain_pairs(
    index: CorpusIndex,
    qrels: QrelTable,
    queries: list[Query],
    seed: int = 0,
) -> list[PretrainPair]:
    """Overlap-labeled (query, sentence) pairs for self-supervised pretraining.

    For each relevant document the sentence with maximal token overlap
    with the query is labeled Selected.  Judged grade-0 documents
    contribute their maximal-overlap sentence as hard NotSelected pairs
    (the sentences a naive overlap heuristic would pick); random
    sentences from other grade-0 documents pad the negatives to match
    the positive count.
    """
    if len(qrels) == 0:
        raise ValueError("qrels is empty")
    rng = np.random.default_rng(seed)
    pairs: list[PretrainPair] = []

    def best_overlap_sentence(query_tokens: set, doc) -> str:
        overlaps = [
            len(query_tokens & set(tokenize(s.text))) for s in doc.sentences
        ]
        return doc.sentences[int(np.argmax(overlaps))].text

    for query in queries:
        q_tokens = set(tokenize(query.text))
        judged = qrels.doc_ids_for(query.query_id)
        positives = [d for d in judged if qrels.grade(query.query_id, d) > 0]
        hard_negatives = [
            d for d in judged if qrels.grade(query.query_id, d) == 0
        ]
        negatives_docs = sorted(
            d
            for d in index.documents
            if qrels.grade(query.query_id, d) == 0
        )
        n_pos = 0
        for doc_id in sorted(positives):
            doc = index.documents.get(doc_id)
            if doc is None:
                continue
            pairs.append(
                PretrainPair(
                    query.text, best_overlap_sentence(q_tokens, doc), label=1
                )
            )
            n_pos += 1
        n_neg = 0
        for doc_id in sorted(hard_negatives):
            doc = index.documents.get(doc_id)
            if doc is None:
                continue
            pairs.append(
                PretrainPair(
                    query.text, best_overlap_sentence(q_tokens, doc), label=0
                )
            )
            n_neg += 1
        for _ in range(max(0, n_pos - n_neg)):
            if not negatives_docs:
                break
            doc = index.documents[
                negatives_docs[int(rng.integers(len(negatives_docs)))]
            ]
            sent = doc.sentences[int(rng.integers(len(doc.sentences)))]
            pairs.append(PretrainPair(query.text, sent.text, label=0))
    if not any(p.label == 1 for p in pairs):
        raise ValueError("no positives")
    return pairs


def _ce_loss_and_grads(
    params: UserModelParams, X: np.ndarray, labels: np.ndarray,
    weight_decay: float = 0.0,
) -> tuple[float, dict[str, np.ndarray]]:
    return _ce_from_activated(params, np.tanh(X), labels, weight_decay)


def _ce_from_activated(
    params: UserModelParams, Z: np.ndarray, labels: np.ndarray,
    weight_decay: float = 0.0,
) -> tuple[float, dict[str, np.ndarray]]:
    """Same as :func:`_ce_loss_and_grads` but takes pre-activated rows.

    The design matrix is fixed across pretraining epochs, so the tanh is
    hoisted out of the loop."""
    n = len(labels)
    P = _softmax_rows(Z @ params.W.T + params.b)
    eps = 1e-12
    loss = float(-np.mean(np.log(P[np.arange(n), labels] + eps)))
    onehot = np.zeros_like(P)
    onehot[np.arange(n), labels] = 1.0
    dlogits = (P - onehot) / n
    gW = dlogits.T @ Z
    if weight_decay:
        loss += weight_decay * float(np.sum(params.W**2))
        gW = gW + 2.0 * weight_decay * params.W
    return loss, {"W": gW, "b": dlogits.sum(axis=0)}


def pretrain(
    params: UserModelParams,
    pairs: list[PretrainPair],
    epochs: int,
    lr: float,
    weight_decay: float = 0.0,
) -> tuple[UserModelParams, list[float]]:
    """Full-batch Adam on cross-entropy; returns params and per-epoch loss.

    ``weight_decay`` adds an L2 penalty on W.  Hashed token features can
    memorize the training sentences outright; the penalty steers weight
    toward the shared overlap-bucket features, which are the only ones
    that transfer to unseen queries."""
    if not pairs:
        raise ValueError("no pretraining pairs")
    X = np.stack([encode_pair(p.left_text, p.sentence) for p in pairs])
    Z = np.tanh(X)
    labels = np.array([p.label for p in pairs])
    weights = {"W": params.W.copy(), "b": params.b.copy()}
    opt = Adam(lr=lr)
    history: list[float] = []
    for _ in range(epochs):
        loss, grads = _ce_from_activated(
            UserModelParams(W=weights["W"], b=weights["b"]), Z, labels,
            weight_decay,
        )
        if not np.isfinite(loss):
            raise ValueError(f"non-finite pretraining loss: {loss}")
        history.append(loss)
        weights = opt.step(weights, grads)
    return UserModelParams(W=weights["W"], b=weights["b"]), history


def _rearrangement_loss_and_grads(
    params: UserModelParams,
    lefts: list[str],
    target_probs: np.ndarray,
    X: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    probs = u_scores_from_matrix(params, X)
    resid = probs - target_probs
    loss = float(np.mean(resid**2))
    # d p1 / d logits = p1 (1 - p1) * [-1, +1]
    Z = np.tanh(X)
    dp = 2.0 * resid / len(resid)
    scale = dp * probs * (1.0 - probs)
    dlogits = np.stack([-scale, scale], axis=1)
    return loss, {"W": dlogits.T @ Z, "b": dlogits.sum(axis=0)}


def rearrangement_update(
    params: UserModelParams,
    state,
    a_q,
    a_u,
    documents: dict[str, Document],
    lr: float,
    opt: Adam | None = None,
    anchor: UserModelParams | None = None,
    anchor_decay: float = 0.0,
) -> tuple[UserModelParams, float]:
    """One step pulling U's ranking toward the value-optimal slate order.

    ``a_q`` and ``a_u`` must be permutations of the same documents with
    representative sentences already selected.  Targets are computed
    with the pre-step parameters held fixed.  When an ``anchor`` is
    given, an L2 penalty of ``anchor_decay`` keeps the weights near it
    so the sequence of noisy single-slate updates cannot wander far
    from the pretrained solution.
    """
    if len(a_q.doc_ids) != len(a_u.doc_ids):
        raise ValueError("slates have different lengths")
    if set(a_q.doc_ids) != set(a_u.doc_ids):
        raise ValueError("slates rank different document sets")

    def rep_text(slate, j: int) -> str:
        doc = documents[slate.doc_ids[j]]
        return doc.sentences[slate.rep_idx[j]].text

    lefts = [state.query.text] + [s.text for s in state.feedback]
    n_pos = len(a_q.doc_ids)
    X_rows, y_rows = [], []
    for left in lefts:
        for j in range(n_pos):
            X_rows.append(encode_pair(left, rep_text(a_q, j)))
            y_rows.append(encode_pair(left, rep_text(a_u, j)))
    X = np.stack(X_rows)
    targets = u_scores_from_matrix(params, np.stack(y_rows))
    loss, grads = _rearrangement_loss_and_grads(params, lefts, targets, X)
    if anchor is not None and anchor_decay:
        loss += anchor_decay * float(np.sum((params.W - anchor.W) ** 2))
        grads["W"] = grads["W"] + 2.0 * anchor_decay * (params.W - anchor.W)
    if opt is None:
        opt = Adam(lr=lr)
    else:
        opt.lr = lr
    weights = opt.step({"W": params.W.copy(), "b": params.b.copy()}, grads)
    return UserModelParams(W=weights["W"], b=weights["b"]), loss
