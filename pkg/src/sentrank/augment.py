"""Query paraphrasing for reward-smooth state augmentation.

A rule-based substitute for a neural paraphraser: swap one content token
for a lexicon synonym (cycling through variants deterministically) and
optionally drop one stopword.  Each variant changes at most one content
token plus at most one stopword, keeping rewards locally smooth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .qnet import State


@dataclass
class SynonymLexicon:
    synonyms: dict[str, list[str]] = field(default_factory=dict)
    stopwords: set[str] = field(default_factory=set)

    def __post_init__(self):
        for token, subs in self.synonyms.items():
            if token in subs:
                raise ValueError(f"token {token!r} maps to itself")

    @classmethod
    def load(
        cls, lexicon_path: str | Path, stopwords_path: str | Path | None = None
    ) -> "SynonymLexicon":
        synonyms: dict[str, list[str]] = {}
        with open(lexicon_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                token, subs = line.rstrip("\n").split("\t")
                synonyms[token] = [s for s in subs.split(",") if s]
        stopwords: set[str] = set()
        if stopwords_path is not None:
            with open(stopwords_path, encoding="utf-8") as fh:
                stopwords = {ln.strip() for ln in fh if ln.strip()}
        return cls(synonyms=synonyms, stopwords=stopwords)

    def save(self, lexicon_path: str | Path, stopwords_path: str | Path) -> None:
        with open(lexicon_path, "w", encoding="utf-8") as fh:
            for token in sorted(self.synonyms):
                fh.write(f"{token}\t{','.join(self.synonyms[token])}\n")
        with open(stopwords_path, "w", encoding="utf-8") as fh:
            for token in sorted(self.stopwords):
                fh.write(token + "\n")


def paraphrase(
    lexicon: SynonymLexicon, text: str, variant_index: int
) -> tuple[str, bool]:
    """Deterministic paraphrase variant of a text.

    Substitutes the synonym of one eligible token, chosen cyclically by
    ``variant_index``; odd variants additionally drop the first
    stopword.  Returns (text, changed).
    """
    if variant_index < 0:
        raise ValueError("variant_index must be >= 0")
    words = text.split()
    eligible = [i for i, w in enumerate(words) if w.lower() in lexicon.synonyms]
    if not eligible:
        return text, False
    pos = eligible[variant_index % len(eligible)]
    subs = lexicon.synonyms[words[pos].lower()]
    words[pos] = subs[(variant_index // len(eligible)) % len(subs)]
    if variant_index % 2 == 1:
        for i, w in enumerate(words):
            if i != pos and w.lower() in lexicon.stopwords:
                del words[i]
                break
    return " ".join(words), True


def augment_state(
    lexicon: SynonymLexicon, state: State, n: int
) -> tuple[State, ...]:
    """n paraphrased-query copies of a state; feedback is kept verbatim."""
    if n < 0:
        raise ValueError("n must be >= 0")
    out = []
    for variant in range(n):
        text, _ = paraphrase(lexicon, state.query.text, variant)
        query = type(state.query)(query_id=state.query.query_id, text=text)
        out.append(State(query=query, feedback=state.feedback))
    return tuple(out)
