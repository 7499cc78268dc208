"""Retrieval baseline: reuse the training message of the nearest diff.

The index stores one bag-of-words count vector per training diff.  A
query is answered by taking the top-k training diffs by cosine
similarity, re-ranking those k by smoothed sentence BLEU-4 between the
candidate diff and the query diff, and returning the winner's message.
Ties break toward the lowest training index.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .metrics import bleu_sentence
from .preprocess import ProcessedExample


@dataclass
class BowIndex:
    """Immutable bag-of-words index over training diffs."""

    vectors: list[dict[str, int]]
    norms: list[float]
    diffs: list[list[str]]
    messages: list[list[str]]
    fallback_message: list[str]

    @property
    def size(self) -> int:
        return len(self.vectors)


def build_index(train: Sequence[ProcessedExample]) -> BowIndex:
    """Index every training example with a non-empty diff."""
    if not train:
        raise ValueError("cannot build a retrieval index from an empty training set")
    vectors, norms, diffs, messages = [], [], [], []
    message_freq = Counter()
    for ex in train:
        message_freq[tuple(ex.target_tokens)] += 1
        if not ex.source_tokens:
            continue
        vec = dict(Counter(ex.source_tokens))
        vectors.append(vec)
        norms.append(math.sqrt(sum(c * c for c in vec.values())))
        diffs.append(list(ex.source_tokens))
        messages.append(list(ex.target_tokens))
    if not vectors:
        raise ValueError("every training example has an empty diff")
    fallback = list(message_freq.most_common(1)[0][0])
    return BowIndex(
        vectors=vectors, norms=norms, diffs=diffs, messages=messages,
        fallback_message=fallback,
    )


def _cosine(query: dict[str, int], query_norm: float, vec: dict[str, int], norm: float) -> float:
    if len(query) > len(vec):
        query, vec = vec, query
    dot = sum(c * vec.get(tok, 0) for tok, c in query.items())
    return dot / (query_norm * norm)


def nngen_generate(index: BowIndex, query_tokens: Sequence[str], k: int = 5) -> list[str]:
    """Return the training message whose diff best matches the query diff.

    Candidates are the top-k by cosine similarity (k clamped to the
    index size); the winner among them has the highest smoothed
    sentence BLEU-4 of candidate diff against query diff.  An empty
    query falls back to the most frequent training message.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not query_tokens:
        return list(index.fallback_message)
    query = dict(Counter(query_tokens))
    query_norm = math.sqrt(sum(c * c for c in query.values()))
    sims = [
        _cosine(query, query_norm, vec, norm)
        for vec, norm in zip(index.vectors, index.norms)
    ]
    k = min(k, index.size)
    # sort by (-sim, index): stable top-k with lowest-index tie-break
    candidates = sorted(range(index.size), key=lambda i: (-sims[i], i))[:k]
    best = max(
        candidates,
        key=lambda i: (bleu_sentence(list(query_tokens), index.diffs[i]), -i),
    )
    return list(index.messages[best])
