"""Token/index vocabularies with reserved special tokens.

Indices 0-3 are always ``<pad>``, ``<sos>``, ``<eos>``, ``<unk>``.
Construction is deterministic: tokens are ordered most-frequent-first
with lexicographic tie-breaking, so the same corpus always yields the
same vocabulary (and the same fingerprint).
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

PAD, SOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ("<pad>", "<sos>", "<eos>", "<unk>")


@dataclass(frozen=True)
class Vocabulary:
    """Immutable bidirectional token<->index map."""

    tokens: tuple[str, ...]
    index: dict[str, int] = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "Vocabulary":
        tokens = tuple(tokens)
        if tokens[:4] != SPECIALS:
            raise ValueError("vocabulary must start with the 4 special tokens")
        index = {tok: i for i, tok in enumerate(tokens)}
        if len(index) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        return cls(tokens=tokens, index=index)


def build_vocab(
    examples: Iterable[Sequence[str]],
    min_freq: int = 1,
    max_size: int | None = None,
) -> Vocabulary:
    """Count tokens over ``examples`` and keep those with frequency >= ``min_freq``.

    Ordering is most-frequent-first, ties broken lexicographically; with
    ``max_size`` the list is truncated to ``max_size - 4`` before the
    specials are prepended.  An empty corpus yields just the specials.
    """
    if min_freq < 1:
        raise ValueError(f"min_freq must be >= 1, got {min_freq}")
    counts = Counter()
    for seq in examples:
        counts.update(seq)
    kept = sorted(
        (tok for tok, c in counts.items() if c >= min_freq),
        key=lambda tok: (-counts[tok], tok),
    )
    if max_size is not None:
        kept = kept[: max(0, max_size - len(SPECIALS))]
    return Vocabulary.from_tokens(SPECIALS + tuple(kept))


def encode(v: Vocabulary, tokens: Sequence[str], add_markers: bool = False) -> list[int]:
    """Map tokens to ids; unknown tokens become <unk>; markers wrap with <sos>/<eos>."""
    ids = [v.index.get(tok, UNK) for tok in tokens]
    if add_markers:
        return [SOS] + ids + [EOS]
    return ids


def decode(v: Vocabulary, ids: Sequence[int]) -> list[str]:
    """Inverse of encode up to <unk>; all special tokens are omitted."""
    out = []
    for i in ids:
        i = int(i)
        if i < 0 or i >= v.size:
            raise ValueError(f"id {i} out of range for vocabulary of {v.size}")
        if i >= len(SPECIALS):
            out.append(v.tokens[i])
    return out


def fingerprint(v: Vocabulary) -> int:
    """64-bit FNV-1a over the newline-joined ordered token list."""
    h = 0xCBF29CE484222325
    for byte in "\n".join(v.tokens).encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def save_vocab(v: Vocabulary, path: str | Path) -> None:
    payload = {"specials": list(SPECIALS), "tokens": list(v.tokens[len(SPECIALS):])}
    Path(path).write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")


def load_vocab(path: str | Path) -> Vocabulary:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if tuple(payload.get("specials", ())) != SPECIALS:
        raise ValueError(f"unexpected specials in vocabulary file {path}")
    return Vocabulary.from_tokens(SPECIALS + tuple(payload["tokens"]))
