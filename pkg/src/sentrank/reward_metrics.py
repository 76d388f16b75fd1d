"""Ranking metrics and reward estimation.

DCG uses the natural-log discount 1/ln(position+1) throughout, matching
the discount used by the feedback weighting, and gains are raw relevance
grades.  Unlabeled slates get their reward transferred from logged
slates via DCG ratios of simulated document scores.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .corpus import Document, Query, QrelTable
from .user_model import UserModelParams, doc_score

log = logging.getLogger(__name__)


@dataclass
class MetricReport:
    ndcg_at_10: float
    mrr: float
    per_query: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "ndcg_at_10": self.ndcg_at_10,
            "mrr": self.mrr,
            "per_query": self.per_query,
        }


def dcg(gains: list[float]) -> float:
    """Sum of gains[k] / ln(k+2) for 0-based position k."""
    if len(gains) == 0:
        return 0.0
    positions = np.arange(1, len(gains) + 1)
    return float(np.sum(np.asarray(gains, dtype=float) / np.log(positions + 1)))


def ndcg_at_k(
    slate_doc_ids: list[str] | tuple[str, ...],
    qrels: QrelTable,
    query: Query,
    k: int,
    all_doc_ids: list[str] | None = None,
) -> float:
    """DCG of the slate's top-k over the ideal top-k across the corpus.

    ``all_doc_ids`` bounds the ideal ordering; defaults to the judged
    documents of the query.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    qid = query.query_id
    pool = all_doc_ids if all_doc_ids is not None else qrels.doc_ids_for(qid)
    ideal_gains = sorted(
        (qrels.grade(qid, d) for d in pool), reverse=True
    )[:k]
    ideal = dcg([g for g in ideal_gains if g > 0])
    if ideal == 0.0:
        return 0.0
    gains = [qrels.grade(qid, d) for d in slate_doc_ids[:k]]
    return dcg(gains) / ideal


def mrr(
    slate_doc_ids: list[str] | tuple[str, ...], qrels: QrelTable, query: Query
) -> float:
    for rank, doc_id in enumerate(slate_doc_ids, start=1):
        if qrels.grade(query.query_id, doc_id) > 0:
            return 1.0 / rank
    return 0.0


def labeled_reward(
    slate_doc_ids: list[str] | tuple[str, ...],
    qrels: QrelTable,
    query: Query,
    all_doc_ids: list[str] | None = None,
) -> float:
    """Reward of a slate whose documents carry relevance judgments."""
    return ndcg_at_k(
        slate_doc_ids, qrels, query, k=len(slate_doc_ids),
        all_doc_ids=all_doc_ids,
    )


def _u_dcg(scores: list[float]) -> float:
    return dcg(scores)


def reward_transition(
    u_params: UserModelParams,
    query: Query,
    slate_doc_ids: tuple[str, ...],
    logged: list[tuple[tuple[str, ...], float | None]],
    documents: dict[str, Document],
    m_sentences: int,
    score_fn=None,
) -> float:
    """Estimate an unlabeled slate's reward from logged slates.

    Each logged slate contributes its reward scaled by the ratio of the
    simulated-score DCGs of the new slate and the logged one.  Logged
    rewards are used where present; otherwise a logged slate's reward is
    its simulated nDCG over its own documents.  ``score_fn(query_text,
    doc) -> float`` overrides the simulated document score (tests use
    this for scale-invariance checks).
    """
    if not logged:
        raise ValueError("reward transition needs a non-empty ranking log")
    if score_fn is None:
        def score_fn(query_text, doc):  # noqa: ANN001 - local default
            return doc_score(u_params, query_text, doc, m_sentences)[0]

    score_cache: dict[str, float] = {}

    def u_of(doc_id: str) -> float:
        if doc_id not in score_cache:
            score_cache[doc_id] = score_fn(query.text, documents[doc_id])
        return score_cache[doc_id]

    target_dcg = _u_dcg([u_of(d) for d in slate_doc_ids])
    estimates = []
    for doc_ids, reward in logged:
        logged_scores = [u_of(d) for d in doc_ids]
        logged_dcg = _u_dcg(logged_scores)
        if logged_dcg == 0.0:
            log.warning(
                "skipping logged slate with zero simulated DCG for query %s",
                query.query_id,
            )
            continue
        ratio = target_dcg / logged_dcg
        if reward is None:
            ideal = _u_dcg(sorted(logged_scores, reverse=True))
            reward = logged_dcg / ideal if ideal > 0.0 else 0.0
        estimates.append(ratio * reward)
    if not estimates:
        raise ValueError("all logged slates had zero simulated DCG")
    return float(np.mean(estimates))
