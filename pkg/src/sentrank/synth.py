"""Seeded synthetic search corpus for desk-scale experiments.

Topics carry disjoint content vocabularies.  Each query draws a few
topic words; its relevant documents embed an answer sentence containing
all query words plus companion topic words.  Two kinds of confounders
keep the baselines honest: term-frequency decoys that inflate BM25, and
near-miss sentences that carry full query overlap but a marker token, so
lexical overlap alone over-ranks them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .augment import SynonymLexicon
from .corpus import (
    CorpusIndex,
    Query,
    QrelTable,
    build_index,
    make_document,
)
from .policy import RankingLog
from .reward_metrics import labeled_reward

# Filler vocabulary with paraphrase synonyms; queries embed one of these
# so augmentation always has an eligible token.
FILLER_SYNONYMS = {
    "about": ["regarding", "concerning"],
    "report": ["summary", "overview"],
    "guide": ["manual", "handbook"],
    "study": ["survey", "review"],
    "info": ["details", "facts"],
    "note": ["memo", "remark"],
}
STOPWORDS = {"the", "of", "on", "with", "for", "about", "info", "note"}
PLAIN_FILLERS = ["the", "of", "on", "with", "for"]
NEAR_MISS_MARKER = "retracted"

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def _make_word(rng: np.random.Generator, used: set[str]) -> str:
    while True:
        n_syll = 2 + int(rng.integers(2))
        word = "".join(
            _CONSONANTS[int(rng.integers(len(_CONSONANTS)))]
            + _VOWELS[int(rng.integers(len(_VOWELS)))]
            for _ in range(n_syll)
        )
        if word not in used and word not in FILLER_SYNONYMS:
            used.add(word)
            return word


@dataclass
class SyntheticDataset:
    index: CorpusIndex
    queries: list[Query]
    qrels: QrelTable
    ranking_log: RankingLog
    lexicon: SynonymLexicon
    corpus_records: list[dict]


def generate_synthetic_corpus(
    seed: int,
    n_topics: int = 8,
    docs_per_topic: int = 30,
    queries_per_topic: int = 8,
    slate_size: int = 10,
) -> SyntheticDataset:
    if min(n_topics, docs_per_topic, queries_per_topic) < 1:
        raise ValueError("all sizes must be >= 1")
    rng = np.random.default_rng(seed)
    used_words: set[str] = set()
    topic_vocab = [
        [_make_word(rng, used_words) for _ in range(40)]
        for _ in range(n_topics)
    ]

    # doc sentences as token lists; appended role sentences come later
    doc_sents: dict[str, list[list[str]]] = {}
    appended: dict[str, int] = {}
    for t in range(n_topics):
        vocab = topic_vocab[t]
        for j in range(docs_per_topic):
            doc_id = f"t{t}d{j}"
            sents = []
            for _ in range(3):
                words = [
                    vocab[int(rng.integers(len(vocab)))] for _ in range(4)
                ]
                words.insert(
                    int(rng.integers(len(words) + 1)),
                    PLAIN_FILLERS[int(rng.integers(len(PLAIN_FILLERS)))],
                )
                sents.append(words)
            doc_sents[doc_id] = sents
            appended[doc_id] = 0

    filler_keys = sorted(FILLER_SYNONYMS)
    queries: list[Query] = []
    grades: dict[tuple[str, str], int] = {}
    query_words: dict[str, list[str]] = {}

    def pick_docs(topic: int, count: int, max_appended: int) -> list[str]:
        ids = [f"t{topic}d{j}" for j in range(docs_per_topic)]
        perm = rng.permutation(len(ids))
        ordered = sorted(
            range(len(ids)), key=lambda i: (appended[ids[i]], perm[i])
        )
        picked = [
            ids[i] for i in ordered if appended[ids[i]] < max_appended
        ][:count]
        return picked

    for t in range(n_topics):
        vocab = topic_vocab[t]
        for qn in range(queries_per_topic):
            qid = f"t{t}q{qn}"
            words = [
                vocab[i] for i in rng.choice(len(vocab), size=3, replace=False)
            ]
            filler = filler_keys[int(rng.integers(len(filler_keys)))]
            queries.append(Query(qid, f"{filler} {' '.join(words)}"))
            query_words[qid] = words

            relevant = pick_docs(t, 3, max_appended=4)
            for doc_id in relevant:
                companions = [
                    vocab[i]
                    for i in rng.choice(len(vocab), size=2, replace=False)
                    if vocab[i] not in words
                ]
                answer = list(words) + companions + [
                    PLAIN_FILLERS[int(rng.integers(len(PLAIN_FILLERS)))]
                ]
                doc_sents[doc_id].append(answer)
                appended[doc_id] += 1
                grades[(qid, doc_id)] = 2

            weak = pick_docs(t, 7, max_appended=4)
            weak = [d for d in weak if d not in relevant][:4]
            for doc_id in weak:
                extra = [
                    words[0],
                    words[1],
                    vocab[int(rng.integers(len(vocab)))],
                    PLAIN_FILLERS[int(rng.integers(len(PLAIN_FILLERS)))],
                ]
                doc_sents[doc_id].append(extra)
                appended[doc_id] += 1
                grades[(qid, doc_id)] = 1

            near = pick_docs(t, 12, max_appended=4)
            near = [d for d in near if (qid, d) not in grades][:2]
            for doc_id in near:
                sent = list(words) + [
                    NEAR_MISS_MARKER,
                    vocab[int(rng.integers(len(vocab)))],
                ]
                doc_sents[doc_id].append(sent)
                appended[doc_id] += 1
                grades[(qid, doc_id)] = 0

            # BM25 decoys in other topics: two query words at high tf
            other_topics = [o for o in range(n_topics) if o != t]
            if other_topics:
                for _ in range(2):
                    o = other_topics[int(rng.integers(len(other_topics)))]
                    doc_id = pick_docs(o, 1, max_appended=6)
                    if not doc_id:
                        continue
                    doc_id = doc_id[0]
                    spam = (words[:2] * 5) + [
                        PLAIN_FILLERS[int(rng.integers(len(PLAIN_FILLERS)))]
                    ]
                    doc_sents[doc_id].append(spam)
                    appended[doc_id] += 1
                    grades[(qid, doc_id)] = 0

    corpus_records = []
    documents = []
    for doc_id in sorted(doc_sents):
        texts = [" ".join(words) + "." for words in doc_sents[doc_id]]
        corpus_records.append({"doc_id": doc_id, "sentences": texts})
        documents.append(make_document(doc_id, texts))
    index = build_index(documents)
    qrels = QrelTable(grades)

    from .corpus import bm25_retrieve  # late import keeps module heads light

    ranking_log = RankingLog()
    for query in queries:
        pool = [d for d, _ in bm25_retrieve(index, query, 3 * slate_size)]
        if len(pool) < slate_size:
            continue
        top = pool[:slate_size]
        ranking_log.add(
            query.query_id, top, labeled_reward(top, qrels, query)
        )
        for _ in range(2):
            picks = rng.choice(len(pool), size=slate_size, replace=False)
            ranking_log.add(query.query_id, [pool[i] for i in picks], None)

    lexicon = SynonymLexicon(
        synonyms=dict(FILLER_SYNONYMS), stopwords=set(STOPWORDS)
    )
    return SyntheticDataset(
        index=index,
        queries=queries,
        qrels=qrels,
        ranking_log=ranking_log,
        lexicon=lexicon,
        corpus_records=corpus_records,
    )


def write_dataset(dataset: SyntheticDataset, out_dir: str | Path) -> dict[str, Path]:
    """Write corpus/queries/qrels/ranking-log/lexicon files; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": out / "corpus.jsonl",
        "queries": out / "queries.tsv",
        "qrels": out / "qrels.tsv",
        "wq": out / "wq.jsonl",
        "lexicon": out / "lexicon.tsv",
        "stopwords": out / "stopwords.txt",
    }
    with open(paths["corpus"], "w", encoding="utf-8") as fh:
        for rec in dataset.corpus_records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(paths["queries"], "w", encoding="utf-8") as fh:
        for q in dataset.queries:
            fh.write(f"{q.query_id}\t{q.text}\n")
    with open(paths["qrels"], "w", encoding="utf-8") as fh:
        for (qid, did), grade in sorted(dataset.qrels.items()):
            fh.write(f"{qid}\t0\t{did}\t{grade}\n")
    with open(paths["wq"], "w", encoding="utf-8") as fh:
        for qid in sorted(dataset.ranking_log.slates):
            for doc_ids, reward in dataset.ranking_log.slates[qid]:
                rec = {"query_id": qid, "doc_ids": list(doc_ids)}
                if reward is not None:
                    rec["reward"] = reward
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    dataset.lexicon.save(paths["lexicon"], paths["stopwords"])
    return paths


def load_ranking_log(path: str | Path) -> RankingLog:
    ranking_log = RankingLog()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            ranking_log.add(
                rec["query_id"], rec["doc_ids"], rec.get("reward")
            )
    return ranking_log
