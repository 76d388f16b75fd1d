"""HTTP session service for interactive search.

Wraps the trained ranking heads behind a small JSON API: create a
session with a query, click sentences as feedback, watch the slate
re-rank, end the session to persist the final state in the feedback
pool.  The web UI consumes exactly these endpoints and field names.

    POST   /api/session                {"query": str}
    POST   /api/session/{id}/feedback  {"doc_id": str, "sentence_idx": int}
    DELETE /api/session/{id}
    GET    /api/metrics
    GET    /api/healthz
"""

from __future__ import annotations

import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .corpus import CorpusIndex, QrelTable, Query, bm25_retrieve
from .policy import CandidateSet, candidate_set
from .qnet import QNetParams, SlateAction, State, representatives_batch
from .replay_state import FeedbackPool, append_feedback
from .reward_metrics import labeled_reward
from .trainer import TrainerConfig, rank_with_policy
from .user_model import UserModelParams

log = logging.getLogger(__name__)

SESSION_TTL_SECONDS = 30 * 60


@dataclass
class Session:
    session_id: str
    query: Query
    state: State
    candidates: CandidateSet
    slate: SlateAction
    state_retrieved: bool
    created: float
    updated: float
    step: int = 1
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass
class ServiceContext:
    """Everything the endpoints need; immutable model snapshot."""

    index: CorpusIndex | None = None
    u_params: UserModelParams | None = None
    q_params: QNetParams | None = None
    config: TrainerConfig = field(default_factory=TrainerConfig)
    pool: FeedbackPool = field(default_factory=FeedbackPool)
    pool_path: str | Path | None = None
    qrels: QrelTable | None = None
    sessions: dict[str, Session] = field(default_factory=dict)
    created_total: int = 0
    sessions_lock: threading.Lock = field(default_factory=threading.Lock)
    pool_lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def ready(self) -> bool:
        return (
            self.index is not None
            and self.u_params is not None
            and self.q_params is not None
        )


class SessionRequest(BaseModel):
    query: str


class FeedbackRequest(BaseModel):
    doc_id: str
    sentence_idx: int


def _error(status: int, code: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code})


def _results_payload(ctx: ServiceContext, session: Session) -> list[dict]:
    documents = ctx.index.documents
    docs = [documents[d] for d in session.slate.doc_ids]
    reps, values = representatives_batch(
        ctx.u_params, session.state, docs, ctx.config.m_sentences
    )
    payload = []
    for doc, rep, value in zip(docs, reps, values):
        shown = doc.sentences[: ctx.config.m_sentences]
        payload.append({
            "doc_id": doc.doc_id,
            "score": float(value),
            "selected_idx": int(rep),
            "sentences": [s.text for s in shown],
        })
    return payload


def _prune_idle(ctx: ServiceContext, now: float) -> None:
    stale = [
        sid
        for sid, s in ctx.sessions.items()
        if now - s.updated > SESSION_TTL_SECONDS
    ]
    for sid in stale:
        log.info("expiring idle session %s", sid)
        del ctx.sessions[sid]


def create_app(ctx: ServiceContext) -> FastAPI:
    app = FastAPI(title="sentrank", docs_url=None, redoc_url=None)
    app.state.ctx = ctx

    @app.get("/api/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/api/metrics")
    def metrics():
        with ctx.sessions_lock:
            active = len(ctx.sessions)
            created = ctx.created_total
        return {
            "pool_size": len(ctx.pool),
            "active_sessions": active,
            "created_total": created,
        }

    @app.post("/api/session")
    def create_session(req: SessionRequest):
        if not ctx.ready:
            return _error(503, "uninitialized")
        if not req.query.strip():
            return _error(400, "empty_query")
        now = time.time()
        session_id = uuid.uuid4().hex
        query = Query(query_id=f"live-{session_id[:8]}", text=req.query)

        pool_ids = [
            d for d, _ in bm25_retrieve(ctx.index, query, ctx.config.size_i)
        ]
        if len(pool_ids) < ctx.config.slate_size:
            return _error(400, "empty_query")
        t_size = min(ctx.config.size_t, len(pool_ids))
        candidates = candidate_set(
            ctx.u_params, query, pool_ids, t_size,
            ctx.index.documents, ctx.config.m_sentences,
        )
        retrieved = None
        if ctx.config.use_state_retrieval:
            with ctx.pool_lock:
                retrieved = ctx.pool.retrieve_state(query, ctx.config.psi)
        state = State(
            query=query,
            feedback=retrieved.feedback if retrieved is not None else (),
        )
        slate = rank_with_policy(
            ctx.u_params, ctx.q_params, state, candidates.doc_ids,
            ctx.config, ctx.index.documents,
        )
        session = Session(
            session_id=session_id, query=query, state=state,
            candidates=candidates, slate=slate,
            state_retrieved=retrieved is not None,
            created=now, updated=now,
        )
        with ctx.sessions_lock:
            _prune_idle(ctx, now)
            ctx.sessions[session_id] = session
            ctx.created_total += 1
        return {
            "session_id": session_id,
            "state_retrieved": session.state_retrieved,
            "results": _results_payload(ctx, session),
        }

    @app.post("/api/session/{session_id}/feedback")
    def post_feedback(session_id: str, req: FeedbackRequest):
        if not ctx.ready:
            return _error(503, "uninitialized")
        with ctx.sessions_lock:
            session = ctx.sessions.get(session_id)
        if session is None:
            return _error(404, "unknown_session")
        with session.lock:
            if req.doc_id not in session.slate.doc_ids:
                return _error(409, "invalid_feedback")
            doc = ctx.index.documents[req.doc_id]
            shown = doc.sentences[: ctx.config.m_sentences]
            if not 0 <= req.sentence_idx < len(shown):
                return _error(409, "invalid_feedback")
            session.state = append_feedback(
                session.state, shown[req.sentence_idx], ctx.config.e_max
            )
            session.slate = rank_with_policy(
                ctx.u_params, ctx.q_params, session.state,
                session.candidates.doc_ids, ctx.config,
                ctx.index.documents,
            )
            session.step += 1
            session.updated = time.time()
            return {"results": _results_payload(ctx, session)}

    @app.delete("/api/session/{session_id}")
    def end_session(session_id: str):
        if not ctx.ready:
            return _error(503, "uninitialized")
        with ctx.sessions_lock:
            session = ctx.sessions.pop(session_id, None)
        if session is None:
            return _error(404, "unknown_session")
        with session.lock:
            reward = 0.0
            if ctx.qrels is not None:
                reward = labeled_reward(
                    session.slate.doc_ids, ctx.qrels, session.query
                )
            with ctx.pool_lock:
                ctx.pool.push_final_state(
                    session.query, session.state, reward
                )
                if ctx.pool_path is not None:
                    ctx.pool.save(ctx.pool_path)
        return {"stored": True}

    return app
