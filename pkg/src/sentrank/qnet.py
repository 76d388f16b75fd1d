"""Slate value network.

Each document in a slate is represented by its best sentence under the
feedback-discounted score V, embedded as an NDCG-weighted combination of
pair encodings, and the concatenation of the N document embeddings feeds
a 2-layer dense network producing the scalar slate value Q.  Training is
temporal-difference regression against a periodically synchronized
target copy of the weights.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, replace

import numpy as np

from .corpus import Document, Query, Sentence
from .encoder import DIM, encode_pair
from .optim import Adam
from .user_model import (
    UserModelParams,
    doc_pair_block,
    doc_pair_block_act,
    u_probs_activated,
    u_scores_from_matrix,
)

HIDDEN = 128


@dataclass(frozen=True)
class State:
    """A query plus the feedback sentences accumulated so far."""

    query: Query
    feedback: tuple[Sentence, ...] = ()

    def __post_init__(self):
        texts = [s.text for s in self.feedback]
        if len(set(texts)) != len(texts):
            raise ValueError("duplicate feedback sentence")

    @property
    def n_feedback(self) -> int:
        return len(self.feedback)

    def left_texts(self) -> list[str]:
        return [self.query.text] + [s.text for s in self.feedback]

    def signature(self) -> tuple:
        return (self.query.text, tuple(s.text for s in self.feedback))


@dataclass(frozen=True)
class SlateAction:
    """An ordered list of documents presented as one result page."""

    doc_ids: tuple[str, ...]
    rep_idx: tuple[int, ...] | None = None

    def __post_init__(self):
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise ValueError("duplicate doc_ids in slate")
        if self.rep_idx is not None and len(self.rep_idx) != len(self.doc_ids):
            raise ValueError("rep_idx length mismatch")

    def __len__(self) -> int:
        return len(self.doc_ids)


@dataclass(frozen=True)
class QNetParams:
    W1: np.ndarray  # (h, N*d)
    b1: np.ndarray  # (h,)
    W2: np.ndarray  # (h,)
    b2: float
    tW1: np.ndarray
    tb1: np.ndarray
    tW2: np.ndarray
    tb2: float

    @property
    def slate_size(self) -> int:
        return self.W1.shape[1] // DIM


def init_q_params(seed: int, slate_size: int, hidden: int = HIDDEN) -> QNetParams:
    rng = np.random.default_rng(seed)
    in_dim = slate_size * DIM
    w1 = rng.uniform(-1.0, 1.0, size=(hidden, in_dim)) / np.sqrt(in_dim)
    b1 = np.zeros(hidden)
    w2 = rng.uniform(-1.0, 1.0, size=hidden) / np.sqrt(hidden)
    b2 = 0.0
    return QNetParams(
        W1=w1, b1=b1, W2=w2, b2=b2,
        tW1=w1.copy(), tb1=b1.copy(), tW2=w2.copy(), tb2=b2,
    )


def sync_target(params: QNetParams) -> QNetParams:
    """Copy the online weights into the target network."""
    return replace(
        params,
        tW1=params.W1.copy(), tb1=params.b1.copy(),
        tW2=params.W2.copy(), tb2=params.b2,
    )


@functools.lru_cache(maxsize=64)
def ndcg_weights(n_feedback: int) -> np.ndarray:
    """Position-discount weights 1/ln(e+1), e = 1..E+1, normalized to sum 1."""
    raw = 1.0 / np.log(np.arange(1, n_feedback + 2) + 1.0)
    weights = raw / raw.sum()
    weights.flags.writeable = False
    return weights


def _sentence_value_matrix(
    u_params: UserModelParams, state: State, sentences: list[str]
) -> np.ndarray:
    """V score of each sentence: feedback-discounted selection probability."""
    lefts = state.left_texts()
    X = np.stack(
        [encode_pair(left, sent) for left in lefts for sent in sentences]
    )
    probs = u_scores_from_matrix(u_params, X).reshape(len(lefts), len(sentences))
    return ndcg_weights(state.n_feedback) @ probs


def v_score(u_params: UserModelParams, state: State, sentence: str) -> float:
    return float(_sentence_value_matrix(u_params, state, [sentence])[0])


def select_representative(
    u_params: UserModelParams, state: State, doc: Document, m_sentences: int
) -> int:
    idx, _ = select_representative_with_value(u_params, state, doc, m_sentences)
    return idx


def select_representative_with_value(
    u_params: UserModelParams, state: State, doc: Document, m_sentences: int
) -> tuple[int, float]:
    """Argmax-V sentence among the first m; ties pick the lowest index."""
    if not doc.sentences:
        raise ValueError(f"document {doc.doc_id!r} has no sentences")
    lefts = state.left_texts()
    n_sents = min(m_sentences, len(doc.sentences))
    Z = np.concatenate(
        [doc_pair_block_act(left, doc, m_sentences) for left in lefts]
    )
    probs = u_probs_activated(u_params, Z).reshape(len(lefts), n_sents)
    values = ndcg_weights(state.n_feedback) @ probs
    idx = int(np.argmax(values))
    return idx, float(values[idx])


def representatives_batch(
    u_params: UserModelParams,
    state: State,
    docs: list[Document],
    m_sentences: int,
) -> tuple[list[int], np.ndarray]:
    """Representative index and V value for every doc in one forward pass.

    Equivalent to calling select_representative_with_value per doc but
    with a single matmul over all (left, doc, sentence) pair encodings.
    """
    lefts = state.left_texts()
    counts = [min(m_sentences, len(doc.sentences)) for doc in docs]
    for doc, n_s in zip(docs, counts):
        if n_s == 0:
            raise ValueError(f"document {doc.doc_id!r} has no sentences")
    Z = np.concatenate(
        [doc_pair_block_act(left, doc, m_sentences) for left in lefts for doc in docs]
    )
    probs = u_probs_activated(u_params, Z).reshape(len(lefts), -1)
    values = ndcg_weights(state.n_feedback) @ probs
    reps: list[int] = []
    best = np.empty(len(docs))
    offset = 0
    for j, n_s in enumerate(counts):
        seg = values[offset:offset + n_s]
        idx = int(np.argmax(seg))
        reps.append(idx)
        best[j] = seg[idx]
        offset += n_s
    return reps, best


@functools.lru_cache(maxsize=1 << 16)
def weighted_embed(state: State, doc: Document, rep_idx: int) -> np.ndarray:
    """NDCG-weighted combination of the pair encodings of the representative
    sentence against the query and every feedback sentence."""
    sent = doc.sentences[rep_idx].text
    pairs = np.stack([encode_pair(left, sent) for left in state.left_texts()])
    vec = ndcg_weights(state.n_feedback) @ pairs
    vec.flags.writeable = False
    return vec


def resolve_representatives(
    u_params: UserModelParams,
    state: State,
    action: SlateAction,
    documents: dict[str, Document],
    m_sentences: int,
) -> SlateAction:
    if action.rep_idx is not None:
        return action
    reps, _ = representatives_batch(
        u_params, state, [documents[d] for d in action.doc_ids], m_sentences
    )
    return SlateAction(doc_ids=action.doc_ids, rep_idx=tuple(reps))


def slate_concat(
    state: State, action: SlateAction, documents: dict[str, Document]
) -> np.ndarray:
    """Concatenated weighted embeddings of a slate, in rank order."""
    if action.rep_idx is None:
        raise ValueError("slate has no representative sentences")
    return np.concatenate(
        [
            weighted_embed(state, documents[d], r)
            for d, r in zip(action.doc_ids, action.rep_idx)
        ]
    )


def q_forward_rows(
    params: QNetParams, Z: np.ndarray, use_target: bool = False
) -> np.ndarray:
    """Value of each concatenated-slate row in Z, shape (rows, N*d)."""
    if use_target:
        w1, b1, w2, b2 = params.tW1, params.tb1, params.tW2, params.tb2
    else:
        w1, b1, w2, b2 = params.W1, params.b1, params.W2, params.b2
    H = np.tanh(Z @ w1.T + b1)
    return H @ w2 + b2


def q_value(
    q_params: QNetParams,
    u_params: UserModelParams,
    state: State,
    action: SlateAction,
    documents: dict[str, Document],
    m_sentences: int,
    use_target: bool = False,
) -> float:
    if len(action) != q_params.slate_size:
        raise ValueError(
            f"slate has {len(action)} docs, expected {q_params.slate_size}"
        )
    action = resolve_representatives(
        u_params, state, action, documents, m_sentences
    )
    z = slate_concat(state, action, documents)
    return float(q_forward_rows(q_params, z[None, :], use_target)[0])


def q_value_augmented(
    q_params: QNetParams,
    u_params: UserModelParams,
    state: State,
    augmentations: list[State],
    action: SlateAction,
    documents: dict[str, Document],
    m_sentences: int,
    use_target: bool = False,
) -> float:
    """Mean slate value over the state and its augmentations."""
    total = q_value(
        q_params, u_params, state, action, documents, m_sentences, use_target
    )
    for aug in augmentations:
        total += q_value(
            q_params, u_params, aug, action, documents, m_sentences, use_target
        )
    return total / (len(augmentations) + 1)


def td_target(
    q_params: QNetParams,
    u_params: UserModelParams,
    transition,
    gamma: float,
    candidates: list[SlateAction],
    documents: dict[str, Document],
    m_sentences: int,
    window_m: int | None = None,
) -> float:
    """r for terminal transitions, else r + gamma * max target-value over
    candidate next slates; evaluated on the target network only.

    When ``window_m`` is given, each candidate is first refined by the
    sliding-window search under the target weights.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must be in [0, 1]")
    if transition.terminal:
        return transition.reward
    if not candidates:
        raise ValueError("non-terminal transition needs candidate actions")
    best = -np.inf
    for cand in candidates:
        cand = resolve_representatives(
            u_params, transition.next_state, cand, documents, m_sentences
        )
        if window_m is not None:
            from .policy import sliding_window_rank  # circular at module level

            cand, _ = sliding_window_rank(
                q_params, u_params, transition.next_state, cand,
                window_m, documents, m_sentences, use_target=True,
            )
        value = q_value(
            q_params, u_params, transition.next_state, cand,
            documents, m_sentences, use_target=True,
        )
        best = max(best, value)
    return transition.reward + gamma * best


def td_loss_and_grads(
    q_params: QNetParams,
    Z: np.ndarray,
    group_of_row: np.ndarray,
    targets: np.ndarray,
    weight_decay: float = 0.0,
) -> tuple[float, dict[str, np.ndarray | float]]:
    """Mean squared TD error and its analytic gradients.

    ``Z`` holds one concatenated-slate row per (transition, augmentation)
    pair and ``group_of_row`` maps each row to its transition; rows of a
    group are averaged before the residual against ``targets``.
    """
    n_groups = len(targets)
    group_sizes = np.bincount(group_of_row, minlength=n_groups)
    H = np.tanh(Z @ q_params.W1.T + q_params.b1)
    q_rows = H @ q_params.W2 + q_params.b2
    q_avg = np.bincount(group_of_row, weights=q_rows, minlength=n_groups)
    q_avg /= group_sizes
    resid = q_avg - targets
    loss = float(np.mean(resid**2))

    d_avg = 2.0 * resid / n_groups
    d_rows = d_avg[group_of_row] / group_sizes[group_of_row]
    gW2 = H.T @ d_rows
    gb2 = float(d_rows.sum())
    d_pre = (1.0 - H**2) * np.outer(d_rows, q_params.W2)
    gW1 = d_pre.T @ Z
    gb1 = d_pre.sum(axis=0)
    if weight_decay:
        loss += weight_decay * float(np.sum(q_params.W1**2) + np.sum(q_params.W2**2))
        gW1 = gW1 + 2.0 * weight_decay * q_params.W1
        gW2 = gW2 + 2.0 * weight_decay * q_params.W2
    return loss, {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2}


def train_step(
    q_params: QNetParams,
    u_params: UserModelParams,
    batch: list,
    gamma: float,
    lr: float,
    documents: dict[str, Document],
    candidate_fn,
    m_sentences: int,
    opt: Adam | None = None,
    window_m: int | None = None,
    target_cache: dict | None = None,
    weight_decay: float = 0.0,
) -> tuple[QNetParams, float]:
    """One Adam step on the TD loss over a replay minibatch.

    ``candidate_fn(state) -> list[SlateAction]`` supplies next-action
    candidates for non-terminal targets.  ``target_cache`` may memoize
    TD targets keyed by transition; the caller must clear it whenever the
    target network is synchronized or the user model changes.
    """
    if not batch:
        raise ValueError("empty minibatch")
    targets = np.empty(len(batch))
    for i, tr in enumerate(batch):
        key = tr
        if target_cache is not None and key in target_cache:
            targets[i] = target_cache[key]
            continue
        candidates = [] if tr.terminal else candidate_fn(tr.next_state)
        y = td_target(
            q_params, u_params, tr, gamma, candidates,
            documents, m_sentences, window_m=window_m,
        )
        targets[i] = y
        if target_cache is not None:
            target_cache[key] = y

    rows: list[np.ndarray] = []
    group_of_row: list[int] = []
    for i, tr in enumerate(batch):
        for st in [tr.state, *tr.augmentations]:
            action = resolve_representatives(
                u_params, st, tr.action, documents, m_sentences
            )
            rows.append(slate_concat(st, action, documents))
            group_of_row.append(i)
    Z = np.stack(rows)
    group_of_row = np.array(group_of_row)

    loss, grads = td_loss_and_grads(
        q_params, Z, group_of_row, targets, weight_decay
    )
    if not np.isfinite(loss):
        raise ValueError(f"non-finite TD loss: {loss}")
    gW1, gb1 = grads["W1"], grads["b1"]
    gW2, gb2 = grads["W2"], grads["b2"]

    if opt is None:
        opt = Adam(lr=lr)
    else:
        opt.lr = lr
    new = opt.step(
        {"W1": q_params.W1, "b1": q_params.b1,
         "W2": q_params.W2, "b2": np.array([q_params.b2])},
        {"W1": gW1, "b1": gb1, "W2": gW2, "b2": np.array([gb2])},
    )
    updated = replace(
        q_params,
        W1=new["W1"], b1=new["b1"], W2=new["W2"], b2=float(new["b2"][0]),
    )
    return updated, loss
