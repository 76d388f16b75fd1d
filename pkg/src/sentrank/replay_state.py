"""Replay memory, the feedback pool with state retrieval, and state updates."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Query, Sentence
from .encoder import cosine, encode_single
from .qnet import SlateAction, State


@dataclass(frozen=True)
class Transition:
    state: State
    action: SlateAction
    reward: float
    next_state: State
    terminal: bool
    augmentations: tuple[State, ...] = ()

    def __post_init__(self):
        if not np.isfinite(self.reward):
            raise ValueError("non-finite reward")


class ReplayMemory:
    """Ring buffer of transitions; oldest evicted first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self._buf: deque[Transition] = deque(maxlen=capacity)

    def push(self, transition: Transition) -> None:
        self._buf.append(transition)

    def sample(self, rng: np.random.Generator, batch: int) -> list[Transition]:
        """Uniform sample with replacement."""
        if not self._buf:
            raise ValueError("cannot sample from empty replay memory")
        picks = rng.integers(0, len(self._buf), size=batch)
        return [self._buf[int(i)] for i in picks]

    def __len__(self) -> int:
        return len(self._buf)

    def __iter__(self):
        return iter(self._buf)


@dataclass
class PoolEntry:
    query_id: str
    query_text: str
    embedding: np.ndarray  # float32, unit norm or zero
    state: State
    reward: float
    order: int


class FeedbackPool:
    """Best final state per query, retrievable by query-embedding similarity."""

    def __init__(self):
        self._entries: dict[str, PoolEntry] = {}
        self._counter = 0

    def push_final_state(self, query: Query, state: State, reward: float) -> bool:
        """Insert or replace if the reward beats the stored best."""
        existing = self._entries.get(query.query_id)
        if existing is not None and reward <= existing.reward:
            return False
        order = existing.order if existing is not None else self._counter
        if existing is None:
            self._counter += 1
        self._entries[query.query_id] = PoolEntry(
            query_id=query.query_id,
            query_text=query.text,
            embedding=encode_single(query.text).astype(np.float32),
            state=state,
            reward=reward,
            order=order,
        )
        return True

    def retrieve_state(self, query: Query, psi: float) -> State | None:
        """Stored state of the most similar past query, if strictly above psi."""
        if not 0.0 <= psi <= 1.0:
            raise ValueError("psi must be in [0, 1]")
        if not self._entries:
            return None
        probe = encode_single(query.text).astype(np.float32)
        best: PoolEntry | None = None
        best_cos = -np.inf
        for entry in sorted(self._entries.values(), key=lambda e: e.order):
            sim = min(cosine(probe, entry.embedding), 1.0)
            if sim > best_cos:  # ties keep the earliest-inserted entry
                best, best_cos = entry, sim
        if best is None or best_cos <= psi:
            return None
        return best.state

    def __len__(self) -> int:
        return len(self._entries)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in sorted(self._entries.values(), key=lambda e: e.order):
                fh.write(json.dumps({
                    "query_id": entry.query_id,
                    "query_text": entry.query_text,
                    "embedding": [float(v) for v in entry.embedding],
                    "feedback": [s.text for s in entry.state.feedback],
                    "reward": entry.reward,
                }) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "FeedbackPool":
        pool = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                query = Query(rec["query_id"], rec["query_text"])
                state = State(
                    query=query,
                    feedback=tuple(
                        Sentence(text=t, index=i)
                        for i, t in enumerate(rec["feedback"])
                    ),
                )
                pool._entries[query.query_id] = PoolEntry(
                    query_id=query.query_id,
                    query_text=query.text,
                    embedding=np.asarray(rec["embedding"], dtype=np.float32),
                    state=state,
                    reward=float(rec["reward"]),
                    order=pool._counter,
                )
                pool._counter += 1
        return pool


def append_feedback(state: State, sentence: Sentence, e_max: int) -> State:
    """Append one feedback sentence; FIFO-evict at capacity, skip duplicates."""
    if any(s.text == sentence.text for s in state.feedback):
        return state
    feedback = state.feedback + (sentence,)
    if len(feedback) > e_max:
        feedback = feedback[len(feedback) - e_max:]
    return State(query=state.query, feedback=feedback)
