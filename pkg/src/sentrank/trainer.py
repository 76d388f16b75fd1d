"""Training orchestration, user-feedback simulation, synthetic data and
evaluation.

Offline training processes one query per episode: retrieve a document
pool with BM25, shrink it to a candidate set with the user-simulation
score, then run epsilon-greedy slate selection, reward computation,
simulated feedback, replay-based TD updates and rearrangement learning
for a fixed number of steps.  The best state of each episode lands in
the feedback pool that seeds later sessions on similar queries.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .augment import SynonymLexicon, augment_state
from .corpus import CorpusIndex, Document, Query, QrelTable, Sentence, bm25_retrieve
from .optim import Adam
from .policy import (
    CandidateSet,
    RankingLog,
    candidate_set,
    epsilon_greedy,
    initial_u_ranking,
    sliding_window_rank,
)
from .qnet import (
    QNetParams,
    SlateAction,
    State,
    init_q_params,
    q_value,
    resolve_representatives,
    sync_target,
    train_step,
    v_score,
)
from .replay_state import FeedbackPool, ReplayMemory, Transition, append_feedback
from .reward_metrics import MetricReport, labeled_reward, mrr, ndcg_at_k, reward_transition
from .user_model import (
    UserModelParams,
    generate_pretrain_pairs,
    zero_user_params,
    pretrain,
    rearrangement_update,
    u_score,
)

log = logging.getLogger(__name__)

EVAL_MODES = ("bm25", "u_only", "dqrank")


@dataclass
class TrainerConfig:
    epsilon: float = 0.9
    epsilon_decay: float = 0.95
    epsilon_floor: float = 0.05
    gamma: float = 0.6
    sync_every: int = 10           # target-network refresh period (steps)
    steps_per_episode: int = 15
    episodes: int = 200
    slate_size: int = 10
    window: int = 4
    m_sentences: int = 10          # sentences scored per document
    e_max: int = 5                 # feedback sentences kept in a state
    size_i: int = 100              # BM25 pool
    size_t: int = 20               # candidate set
    batch: int = 16
    lr: float = 0.001
    seed: int = 0
    n_augment: int = 2
    psi: float = 0.85              # state-retrieval similarity threshold
    tau: float = 0.5               # feedback acceptance threshold
    replay_capacity: int = 10000
    pretrain_epochs: int = 2500
    pretrain_weight_decay: float = 0.003
    rearrange_anchor_decay: float = 0.01
    q_weight_decay: float = 0.003
    eval_feedback_rounds: int = 3
    rearrange_every: int = 1
    target_window_refine: bool = False
    use_pretrain: bool = True
    use_augment: bool = True
    use_state_retrieval: bool = True

    def validate(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if not 2 <= self.window <= self.slate_size:
            raise ValueError("need 2 <= window <= slate_size")
        if not self.slate_size <= self.size_t <= self.size_i:
            raise ValueError("need slate_size <= size_t <= size_i")
        if not 0.0 <= self.psi <= 1.0:
            raise ValueError("psi must be in [0, 1]")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ValueError("epsilon_decay must be in (0, 1]")
        if not 0.0 <= self.epsilon_floor <= 1.0:
            raise ValueError("epsilon_floor must be in [0, 1]")
        if self.lr <= 0.0:
            raise ValueError("lr must be positive")
        for name in ("sync_every", "steps_per_episode", "episodes", "batch",
                     "e_max", "m_sentences", "replay_capacity"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @classmethod
    def from_json(cls, path: str | Path) -> "TrainerConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        config = cls(**raw)
        config.validate()
        return config


@dataclass
class StepRecord:
    step: int
    branch: str
    doc_ids: tuple[str, ...]
    reward: float
    q_at_selection: float


@dataclass
class EpisodeTrace:
    query_id: str
    steps: list[StepRecord]
    final_feedback: list[str]
    best_reward: float

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "steps": [asdict(s) | {"doc_ids": list(s.doc_ids)} for s in self.steps],
            "final_feedback": self.final_feedback,
            "best_reward": self.best_reward,
        }


@dataclass
class TrainResult:
    u_pretrained: UserModelParams
    u_final: UserModelParams
    q_params: QNetParams
    pool: FeedbackPool
    traces: list[EpisodeTrace]
    replay: ReplayMemory


def simulate_feedback(
    u_params: UserModelParams,
    qrels: QrelTable | None,
    state: State,
    action: SlateAction,
    tau: float,
    documents: dict[str, Document],
    m_sentences: int,
    e_max: int,
) -> State:
    """Append the relevant representative sentence a satisfied user would pick.

    Among the slate's relevant documents (all documents when no
    judgments exist) the representative sentence with the highest V
    score is appended, provided its selection probability against the
    query exceeds tau.  At most one sentence per step.
    """
    action = resolve_representatives(
        u_params, state, action, documents, m_sentences
    )
    qid = state.query.query_id
    eligible = []
    for doc_id, rep in zip(action.doc_ids, action.rep_idx):
        if qrels is not None and qrels.grade(qid, doc_id) <= 0:
            continue
        eligible.append((doc_id, rep))
    if not eligible:
        return state
    best_sent = None
    best_v = -math.inf
    for doc_id, rep in eligible:
        sent = documents[doc_id].sentences[rep]
        value = v_score(u_params, state, sent.text)
        if value > best_v:
            best_v, best_sent = value, sent
    if u_score(u_params, state.query.text, best_sent.text) <= tau:
        return state
    return append_feedback(state, best_sent, e_max)


def compute_reward(
    u_params: UserModelParams,
    query: Query,
    action: SlateAction,
    qrels: QrelTable,
    ranking_log: RankingLog,
    documents: dict[str, Document],
    m_sentences: int,
) -> float:
    """Labeled nDCG when any slate document is judged for the query, else
    the transferred reward from the full (unconsumed) ranking log."""
    if any(qrels.has_judgment(query.query_id, d) for d in action.doc_ids):
        return labeled_reward(action.doc_ids, qrels, query)
    logged = ranking_log.all_for(query.query_id)
    if not logged:
        return 0.0
    return reward_transition(
        u_params, query, action.doc_ids, logged, documents, m_sentences
    )


def run_offline(
    config: TrainerConfig,
    index: CorpusIndex,
    queries: list[Query],
    qrels: QrelTable,
    ranking_log: RankingLog,
    lexicon: SynonymLexicon | None = None,
) -> TrainResult:
    config.validate()
    rng = np.random.default_rng(config.seed)
    documents = index.documents

    # Zero init keeps never-seen hashed features silent at eval time.
    u_init = zero_user_params()
    if config.use_pretrain:
        pairs = generate_pretrain_pairs(index, qrels, queries, seed=config.seed)
        u_pretrained, _ = pretrain(
            u_init, pairs, config.pretrain_epochs, config.lr,
            config.pretrain_weight_decay,
        )
    else:
        u_pretrained = u_init

    ctx = {"u": u_pretrained}
    q_params = init_q_params(config.seed + 1, config.slate_size)
    q_opt = Adam(config.lr)
    u_opt = Adam(config.lr)
    replay = ReplayMemory(config.replay_capacity)
    pool = FeedbackPool()
    candidates_by_query: dict[str, CandidateSet] = {}
    target_cache: dict = {}
    epsilon = config.epsilon
    step_count = 0
    traces: list[EpisodeTrace] = []

    def candidate_fn(next_state: State) -> list[SlateAction]:
        tq = candidates_by_query[next_state.query.query_id]
        return [
            initial_u_ranking(
                ctx["u"], next_state, tq.doc_ids, config.slate_size,
                documents, config.m_sentences,
            )
        ]

    for episode in range(config.episodes):
        query = queries[episode % len(queries)]
        pool_ids = [
            d for d, _ in bm25_retrieve(index, query, config.size_i)
        ]
        if len(pool_ids) < config.slate_size:
            log.warning(
                "episode %d: retrieval pool for %s too small (%d), skipping",
                episode, query.query_id, len(pool_ids),
            )
            continue
        t_size = min(config.size_t, len(pool_ids))
        tq = candidate_set(
            ctx["u"], query, pool_ids, t_size, documents, config.m_sentences
        )
        candidates_by_query[query.query_id] = tq

        state = None
        if config.use_state_retrieval:
            retrieved = pool.retrieve_state(query, config.psi)
            if retrieved is not None:
                state = State(query=query, feedback=retrieved.feedback)
        if state is None:
            state = State(query=query)

        working_log = ranking_log.working_copy(query.query_id)
        best_reward = -math.inf
        best_state = state
        steps: list[StepRecord] = []

        for t in range(1, config.steps_per_episode + 1):
            action, branch = epsilon_greedy(
                rng, epsilon, working_log, tq, state, q_params, ctx["u"],
                config.slate_size, config.window, documents, config.m_sentences,
            )
            action = resolve_representatives(
                ctx["u"], state, action, documents, config.m_sentences
            )
            reward = compute_reward(
                ctx["u"], query, action, qrels, ranking_log,
                documents, config.m_sentences,
            )
            q_sel = q_value(
                q_params, ctx["u"], state, action, documents, config.m_sentences
            )
            next_state = simulate_feedback(
                ctx["u"], qrels, state, action, config.tau,
                documents, config.m_sentences, config.e_max,
            )
            terminal = t == config.steps_per_episode
            augmentations = ()
            if config.use_augment and lexicon is not None:
                augmentations = augment_state(lexicon, state, config.n_augment)
            replay.push(Transition(
                state=state, action=action, reward=reward,
                next_state=next_state, terminal=terminal,
                augmentations=augmentations,
            ))

            batch = replay.sample(rng, config.batch)
            q_params, _ = train_step(
                q_params, ctx["u"], batch, config.gamma, config.lr,
                documents, candidate_fn, config.m_sentences,
                opt=q_opt, target_cache=target_cache,
                weight_decay=config.q_weight_decay,
                window_m=config.window if config.target_window_refine else None,
            )

            if branch == "greedy" and step_count % config.rearrange_every == 0:
                a_u = initial_u_ranking(
                    ctx["u"], state, tq.doc_ids, config.slate_size,
                    documents, config.m_sentences,
                )
                ctx["u"], _ = rearrangement_update(
                    ctx["u"], state, action, a_u, documents, config.lr,
                    opt=u_opt, anchor=u_pretrained,
                    anchor_decay=config.rearrange_anchor_decay,
                )
                # U moved, so representatives and TD targets went stale.
                target_cache.clear()

            step_count += 1
            if step_count % config.sync_every == 0:
                q_params = sync_target(q_params)
                target_cache.clear()

            if reward > best_reward:
                best_reward, best_state = reward, next_state
            steps.append(StepRecord(
                step=t, branch=branch, doc_ids=action.doc_ids,
                reward=reward, q_at_selection=q_sel,
            ))
            state = next_state

        pool.push_final_state(query, best_state, best_reward)
        traces.append(EpisodeTrace(
            query_id=query.query_id,
            steps=steps,
            final_feedback=[s.text for s in state.feedback],
            best_reward=best_reward,
        ))
        epsilon = max(config.epsilon_floor, epsilon * config.epsilon_decay)

    return TrainResult(
        u_pretrained=u_pretrained,
        u_final=ctx["u"],
        q_params=q_params,
        pool=pool,
        traces=traces,
        replay=replay,
    )


def write_traces(traces: list[EpisodeTrace], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            fh.write(json.dumps(trace.to_dict(), sort_keys=True) + "\n")


def rank_with_policy(
    u_params: UserModelParams,
    q_params: QNetParams,
    state: State,
    candidate_doc_ids: tuple[str, ...],
    config: TrainerConfig,
    documents: dict[str, Document],
) -> SlateAction:
    """The greedy ranking branch: U ordering refined by the window search."""
    slate = initial_u_ranking(
        u_params, state, candidate_doc_ids, config.slate_size,
        documents, config.m_sentences,
    )
    ranked, _ = sliding_window_rank(
        q_params, u_params, state, slate, config.window,
        documents, config.m_sentences,
    )
    return ranked


def evaluate(
    u_pretrained: UserModelParams,
    u_final: UserModelParams,
    q_params: QNetParams | None,
    index: CorpusIndex,
    queries: list[Query],
    qrels: QrelTable,
    mode: str,
    config: TrainerConfig,
) -> MetricReport:
    """nDCG@10 and MRR of per-query slates under a ranking mode.

    ``bm25`` serves the raw retrieval order, ``u_only`` the candidate
    re-ranking under the pretrained user model, ``dqrank`` the full
    greedy policy under the trained heads.
    """
    if mode not in EVAL_MODES:
        raise ValueError(f"mode must be one of {EVAL_MODES}")
    documents = index.documents
    per_query: dict[str, dict[str, float]] = {}
    ndcgs, mrrs = [], []
    for query in queries:
        pool_ids = [d for d, _ in bm25_retrieve(index, query, config.size_i)]
        if not pool_ids:
            per_query[query.query_id] = {"ndcg_at_10": 0.0, "mrr": 0.0}
            ndcgs.append(0.0)
            mrrs.append(0.0)
            continue
        if mode == "bm25":
            slate_ids = tuple(pool_ids[: config.slate_size])
        else:
            u_params = u_pretrained if mode == "u_only" else u_final
            t_size = min(config.size_t, len(pool_ids))
            tq = candidate_set(
                u_params, query, pool_ids, t_size, documents,
                config.m_sentences,
            )
            if mode == "u_only":
                slate_ids = tq.doc_ids[: config.slate_size]
            else:
                # The trained system is interactive: each round the
                # simulated user picks a relevant sentence and the slate
                # is re-ranked under the enriched state.  The final
                # round's slate is what gets scored.
                state = State(query=query)
                if len(tq.doc_ids) >= config.slate_size and q_params is not None:
                    slate = rank_with_policy(
                        u_final, q_params, state, tq.doc_ids, config, documents
                    )
                    for _ in range(config.eval_feedback_rounds):
                        state = simulate_feedback(
                            u_final, qrels, state, slate, config.tau,
                            documents, config.m_sentences, config.e_max,
                        )
                        slate = rank_with_policy(
                            u_final, q_params, state, tq.doc_ids, config,
                            documents,
                        )
                    slate_ids = slate.doc_ids
                else:
                    slate_ids = tq.doc_ids[: config.slate_size]
        n = ndcg_at_k(slate_ids, qrels, query, k=10)
        r = mrr(slate_ids, qrels, query)
        per_query[query.query_id] = {"ndcg_at_10": n, "mrr": r}
        ndcgs.append(n)
        mrrs.append(r)
    return MetricReport(
        ndcg_at_10=float(np.mean(ndcgs)) if ndcgs else 0.0,
        mrr=float(np.mean(mrrs)) if mrrs else 0.0,
        per_query=per_query,
    )


def kfold_split(
    queries: list[Query], k: int, seed: int
) -> list[tuple[list[Query], list[Query]]]:
    """Disjoint near-equal (train, test) query partitions."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > len(queries):
        raise ValueError("k exceeds number of queries")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(queries))
    folds = np.array_split(order, k)
    splits = []
    for fold in folds:
        test_idx = set(int(i) for i in fold)
        test = [queries[i] for i in sorted(test_idx)]
        train = [q for i, q in enumerate(queries) if i not in test_idx]
        splits.append((train, test))
    return splits


@dataclass
class SessionTrace:
    query_id: str
    state_retrieved: bool
    slates: list[tuple[str, ...]]
    states: list[State]


def run_online_session(
    u_params: UserModelParams,
    q_params: QNetParams,
    index: CorpusIndex,
    pool: FeedbackPool,
    config: TrainerConfig,
    query: Query,
    feedback_events: list[tuple[str, int]],
    qrels: QrelTable | None = None,
) -> SessionTrace:
    """A scripted interactive session: rank, apply sentence clicks, re-rank.

    No weight updates happen here; the final state is pushed to the
    feedback pool for future sessions.
    """
    documents = index.documents
    pool_ids = [d for d, _ in bm25_retrieve(index, query, config.size_i)]
    if len(pool_ids) < config.slate_size:
        raise ValueError(f"retrieval pool too small for {query.query_id!r}")
    t_size = min(config.size_t, len(pool_ids))
    tq = candidate_set(
        u_params, query, pool_ids, t_size, documents, config.m_sentences
    )
    retrieved = None
    if config.use_state_retrieval:
        retrieved = pool.retrieve_state(query, config.psi)
    state = State(
        query=query,
        feedback=retrieved.feedback if retrieved is not None else (),
    )
    slate = rank_with_policy(
        u_params, q_params, state, tq.doc_ids, config, documents
    )
    slates = [slate.doc_ids]
    states = [state]
    for doc_id, sent_idx in feedback_events:
        if doc_id not in slate.doc_ids:
            raise ValueError(f"feedback references doc {doc_id!r} not in slate")
        doc = documents[doc_id]
        if not 0 <= sent_idx < len(doc.sentences):
            raise ValueError(f"sentence index {sent_idx} out of range")
        state = append_feedback(state, doc.sentences[sent_idx], config.e_max)
        slate = rank_with_policy(
            u_params, q_params, state, tq.doc_ids, config, documents
        )
        slates.append(slate.doc_ids)
        states.append(state)
    reward = 0.0
    if qrels is not None:
        reward = labeled_reward(slate.doc_ids, qrels, query)
    pool.push_final_state(query, state, reward)
    return SessionTrace(
        query_id=query.query_id,
        state_retrieved=retrieved is not None,
        slates=slates,
        states=states,
    )
