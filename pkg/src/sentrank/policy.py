"""Action selection over candidate documents.

The greedy branch ranks candidates with the user-simulation score and
then runs a sliding-window search that trials each window member at the
window head, keeping rearrangements only when they strictly raise the
slate value.  The exploration branch replays logged slates or draws
random ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Document, Query
from .qnet import (
    QNetParams,
    SlateAction,
    State,
    q_forward_rows,
    representatives_batch,
    slate_concat,
)
from .user_model import UserModelParams, doc_scores_batch


@dataclass(frozen=True)
class CandidateSet:
    query_id: str
    doc_ids: tuple[str, ...]


@dataclass
class WindowStats:
    evaluations: int = 0
    q_initial: float = 0.0
    q_final: float = 0.0


@dataclass
class RankingLog:
    """Logged slates per query; the exploration branch consumes entries."""

    slates: dict[str, list[tuple[tuple[str, ...], float | None]]] = field(
        default_factory=dict
    )

    def add(self, query_id: str, doc_ids: list[str], reward: float | None):
        self.slates.setdefault(query_id, []).append((tuple(doc_ids), reward))

    def working_copy(self, query_id: str) -> list[tuple[tuple[str, ...], float | None]]:
        return list(self.slates.get(query_id, []))

    def all_for(self, query_id: str) -> list[tuple[tuple[str, ...], float | None]]:
        return self.slates.get(query_id, [])


def candidate_set(
    u_params: UserModelParams,
    query: Query,
    pool_doc_ids: list[str],
    size: int,
    documents: dict[str, Document],
    m_sentences: int,
) -> CandidateSet:
    """Top documents of the retrieval pool re-ranked by simulated selection
    probability; ties broken by ascending doc_id."""
    if not pool_doc_ids:
        raise ValueError("empty retrieval pool")
    if size > len(pool_doc_ids):
        raise ValueError("candidate size exceeds pool")
    scores, _ = doc_scores_batch(
        u_params, query.text, [documents[d] for d in pool_doc_ids], m_sentences
    )
    scored = list(zip(scores, pool_doc_ids))
    scored.sort(key=lambda sd: (-sd[0], sd[1]))
    return CandidateSet(
        query_id=query.query_id,
        doc_ids=tuple(d for _, d in scored[:size]),
    )


def initial_u_ranking(
    u_params: UserModelParams,
    state: State,
    candidate_doc_ids: tuple[str, ...],
    n: int,
    documents: dict[str, Document],
    m_sentences: int,
) -> SlateAction:
    """Top-n candidates by the V score of their representative sentence."""
    if n > len(candidate_doc_ids):
        raise ValueError("slate size exceeds candidate set")
    reps, values = representatives_batch(
        u_params, state, [documents[d] for d in candidate_doc_ids], m_sentences
    )
    entries = [
        (-values[j], doc_id, reps[j])
        for j, doc_id in enumerate(candidate_doc_ids)
    ]
    entries.sort()
    top = entries[:n]
    return SlateAction(
        doc_ids=tuple(d for _, d, _ in top),
        rep_idx=tuple(r for _, _, r in top),
    )


def _move_to_front(order: list[int], start: int, i: int) -> list[int]:
    out = list(order)
    item = out.pop(start + i)
    out.insert(start, item)
    return out


def sliding_window_rank(
    q_params: QNetParams,
    u_params: UserModelParams,
    state: State,
    slate: SlateAction,
    window: int,
    documents: dict[str, Document],
    m_sentences: int,
    use_target: bool = False,
    stats: WindowStats | None = None,
) -> tuple[SlateAction, WindowStats]:
    """Backward sliding-window slate search.

    Width-``window`` windows slide from the slate tail to the head.  In
    each window every member is trialed at the window's first position
    (relative order of the rest preserved) and the full slate value is
    evaluated; the best trial replaces the incumbent only on strict
    improvement.  Exactly (G - window + 1) * window evaluations are
    performed.
    """
    n_docs = len(slate)
    if not 2 <= window <= n_docs:
        raise ValueError(f"window {window} out of range for slate of {n_docs}")
    if slate.rep_idx is None:
        raise ValueError("slate needs representative sentences")
    if stats is None:
        stats = WindowStats()

    # Embeddings are position-independent, so the search only permutes
    # precomputed per-document blocks of the concatenated input.
    embeds = slate_concat(state, slate, documents).reshape(n_docs, -1)
    order = list(range(n_docs))
    incumbent_q = None
    for start in range(n_docs - window, -1, -1):
        trials = [_move_to_front(order, start, i) for i in range(window)]
        Z = np.stack([embeds[t].reshape(-1) for t in trials])
        values = q_forward_rows(q_params, Z, use_target=use_target)
        stats.evaluations += len(trials)
        if incumbent_q is None:  # first window, trial 0 is the input slate
            stats.q_initial = float(values[0])
        incumbent_q = float(values[0])  # identity trial under this window
        best_i = int(np.argmax(values))
        if best_i != 0 and float(values[best_i]) > incumbent_q:
            order = trials[best_i]
            incumbent_q = float(values[best_i])
    stats.q_final = incumbent_q
    result = SlateAction(
        doc_ids=tuple(slate.doc_ids[i] for i in order),
        rep_idx=tuple(slate.rep_idx[i] for i in order),
    )
    return result, stats


def random_slate(
    rng: np.random.Generator, candidate_doc_ids: tuple[str, ...], n: int
) -> SlateAction:
    """Uniform random n-permutation of the candidates, without replacement."""
    if n > len(candidate_doc_ids):
        raise ValueError("slate size exceeds candidate set")
    picks = rng.choice(len(candidate_doc_ids), size=n, replace=False)
    return SlateAction(doc_ids=tuple(candidate_doc_ids[i] for i in picks))


def epsilon_greedy(
    rng: np.random.Generator,
    epsilon: float,
    logged_slates: list[tuple[tuple[str, ...], float | None]],
    candidates: CandidateSet,
    state: State,
    q_params: QNetParams,
    u_params: UserModelParams,
    n: int,
    window: int,
    documents: dict[str, Document],
    m_sentences: int,
) -> tuple[SlateAction, str]:
    """Pick a slate: explore with probability epsilon, else rank greedily.

    Exploration pops the next logged slate (mutating ``logged_slates``)
    or draws a random one when the log is exhausted.  The greedy branch
    is the U ranking refined by the sliding-window search.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    if n > len(candidates.doc_ids):
        raise ValueError("slate size exceeds candidate set")
    if rng.random() < epsilon:
        if logged_slates:
            doc_ids, _ = logged_slates.pop(0)
            slate = SlateAction(doc_ids=tuple(doc_ids[:n]))
            return slate, "explore_logged"
        return random_slate(rng, candidates.doc_ids, n), "explore_random"
    slate = initial_u_ranking(
        u_params, state, candidates.doc_ids, n, documents, m_sentences
    )
    ranked, _ = sliding_window_rank(
        q_params, u_params, state, slate, window, documents, m_sentences
    )
    return ranked, "greedy"
