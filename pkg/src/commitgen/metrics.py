"""Machine-translation evaluation metrics for token sequences.

Corpus BLEU-4 aggregates clipped n-gram counts over the whole corpus
and applies the brevity penalty once; ROUGE-1/2, ROUGE-L, ROUGE-W and
METEOR are computed per pair and averaged.  Per-pair scores live in
[0, 1]; the report scales everything to 0-100.

METEOR here is the exact-match variant: no stemming, no synonymy.
ROUGE-W uses the consecutive-run weight f(k) = k**alpha with
alpha = 1.2; METEOR uses the (10, 0.5, 3) constants.  Both sets of
constants are arguments, not hidden.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Sequence

Tokens = Sequence[str]


class EmptyCorpusError(ValueError):
    pass


class AlignmentError(ValueError):
    pass


@dataclass
class EvalReport:
    """Corpus scores on the 0-100 scale, one column per metric."""

    bleu: float
    rouge1_f1: float
    rouge2_f1: float
    rougeL_f1: float
    rougeW_f1: float
    meteor: float
    pair_count: int

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(
            {
                "bleu": d["bleu"],
                "rouge1": d["rouge1_f1"],
                "rouge2": d["rouge2_f1"],
                "rougeL": d["rougeL_f1"],
                "rougeW": d["rougeW_f1"],
                "meteor": d["meteor"],
                "pairs": d["pair_count"],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        d = json.loads(text)
        return cls(
            bleu=d["bleu"],
            rouge1_f1=d["rouge1"],
            rouge2_f1=d["rouge2"],
            rougeL_f1=d["rougeL"],
            rougeW_f1=d["rougeW"],
            meteor=d["meteor"],
            pair_count=d["pairs"],
        )


def _ngrams(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_corpus(pairs: Sequence[tuple[Tokens, Tokens]], max_n: int = 4) -> float:
    """Corpus-level BLEU on the 0-100 scale.

    Clipped n-gram matches and hypothesis n-gram counts are summed over
    all pairs for each order; the score is the geometric mean of the
    aggregate precisions times the brevity penalty exp(1 - r/c) for
    c <= r.  Any all-zero aggregate precision gives 0.
    """
    if not pairs:
        raise EmptyCorpusError("BLEU needs at least one (reference, hypothesis) pair")
    matches = [0] * max_n
    totals = [0] * max_n
    ref_len = 0
    hyp_len = 0
    for ref, hyp in pairs:
        ref_len += len(ref)
        hyp_len += len(hyp)
        for n in range(1, max_n + 1):
            hyp_counts = _ngrams(hyp, n)
            if not hyp_counts:
                continue
            ref_counts = _ngrams(ref, n)
            totals[n - 1] += sum(hyp_counts.values())
            matches[n - 1] += sum(
                min(c, ref_counts.get(g, 0)) for g, c in hyp_counts.items()
            )
    if hyp_len == 0:
        return 0.0
    if any(m == 0 or t == 0 for m, t in zip(matches, totals)):
        return 0.0
    log_precision = sum(math.log(m / t) for m, t in zip(matches, totals)) / max_n
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_precision)


def bleu_sentence(ref: Tokens, hyp: Tokens, max_n: int = 4) -> float:
    """Add-one-smoothed sentence BLEU in [0, 1]; used by the retrieval re-ranker."""
    if len(hyp) == 0:
        return 0.0
    log_precision = 0.0
    for n in range(1, max_n + 1):
        hyp_counts = _ngrams(hyp, n)
        ref_counts = _ngrams(ref, n)
        total = sum(hyp_counts.values())
        match = sum(min(c, ref_counts.get(g, 0)) for g, c in hyp_counts.items())
        log_precision += math.log((match + 1.0) / (total + 1.0))
    bp = 1.0 if len(hyp) > len(ref) else math.exp(1.0 - len(ref) / max(1, len(hyp)))
    return bp * math.exp(log_precision / max_n)


def _f1(p: float, r: float) -> float:
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


def rouge_n(ref: Tokens, hyp: Tokens, n: int) -> tuple[float, float, float]:
    """Clipped n-gram overlap precision, recall and F1, each in [0, 1]."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    ref_counts = _ngrams(ref, n)
    hyp_counts = _ngrams(hyp, n)
    overlap = sum(min(c, ref_counts.get(g, 0)) for g, c in hyp_counts.items())
    hyp_total = sum(hyp_counts.values())
    ref_total = sum(ref_counts.values())
    p = overlap / hyp_total if hyp_total else 0.0
    r = overlap / ref_total if ref_total else 0.0
    return p, r, _f1(p, r)


def _lcs_length(a: Tokens, b: Tokens) -> int:
    m, n = len(a), len(b)
    prev = [0] * (n + 1)
    for i in range(1, m + 1):
        cur = [0] * (n + 1)
        for j in range(1, n + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[n]


def rouge_l(ref: Tokens, hyp: Tokens) -> float:
    """F1 over the longest common subsequence, in [0, 1]."""
    if not ref or not hyp:
        return 0.0
    lcs = _lcs_length(ref, hyp)
    p = lcs / len(hyp)
    r = lcs / len(ref)
    return _f1(p, r)


def rouge_w(ref: Tokens, hyp: Tokens, alpha: float = 1.2) -> float:
    """F1 over the weighted LCS favouring consecutive matches, in [0, 1].

    Consecutive runs of length k weigh f(k) = k**alpha; precision and
    recall invert the weighting with f^-1(x) = x**(1/alpha).
    """
    if alpha <= 1.0:
        raise ValueError(f"alpha must be > 1, got {alpha}")
    if not ref or not hyp:
        return 0.0

    def f(k: float) -> float:
        return k ** alpha

    m, n = len(ref), len(hyp)
    c = [[0.0] * (n + 1) for _ in range(m + 1)]
    w = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            if ref[i - 1] == hyp[j - 1]:
                k = w[i - 1][j - 1]
                c[i][j] = c[i - 1][j - 1] + f(k + 1) - f(k)
                w[i][j] = k + 1
            else:
                c[i][j] = max(c[i - 1][j], c[i][j - 1])
                w[i][j] = 0
    wlcs = c[m][n]
    p = (wlcs / f(n)) ** (1.0 / alpha)
    r = (wlcs / f(m)) ** (1.0 / alpha)
    return _f1(p, r)


def _greedy_alignment(ref: Tokens, hyp: Tokens) -> list[tuple[int, int]]:
    """Leftmost-greedy exact unigram alignment: (hyp position, ref position)."""
    taken = [False] * len(ref)
    pairs = []
    for i, tok in enumerate(hyp):
        for j, rtok in enumerate(ref):
            if not taken[j] and rtok == tok:
                taken[j] = True
                pairs.append((i, j))
                break
    return pairs


def meteor(
    ref: Tokens,
    hyp: Tokens,
    recall_weight: float = 10.0,
    penalty_weight: float = 0.5,
    penalty_power: float = 3.0,
) -> float:
    """Exact-match METEOR in [0, 1].

    F_mean = 10PR/(R+9P) over greedy unigram matches, discounted by the
    fragmentation penalty 0.5*(chunks/matches)**3.  No matches -> 0.
    """
    pairs = _greedy_alignment(ref, hyp)
    matches = len(pairs)
    if matches == 0:
        return 0.0
    p = matches / len(hyp)
    r = matches / len(ref)
    f_mean = (recall_weight * p * r) / (r + (recall_weight - 1.0) * p)
    chunks = 1
    for (hi, ri), (hj, rj) in zip(pairs, pairs[1:]):
        if hj != hi + 1 or rj != ri + 1:
            chunks += 1
    penalty = penalty_weight * (chunks / matches) ** penalty_power
    return f_mean * (1.0 - penalty)


def read_token_lines(path: str | Path) -> list[list[str]]:
    """One whitespace-joined token sequence per line.

    ``.jsonl`` files are also accepted; each record contributes its
    ``hypothesis``, ``target`` or ``source`` field, in that preference
    order.
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if path.suffix == ".jsonl":
        out = []
        for line in lines:
            if not line.strip():
                continue
            rec = json.loads(line)
            for key in ("hypothesis", "target", "source"):
                if key in rec:
                    out.append(list(rec[key]))
                    break
            else:
                raise ValueError(f"{path}: record without hypothesis/target/source")
        return out
    return [line.split() for line in lines]


def evaluate_pairs(pairs: Sequence[tuple[Tokens, Tokens]]) -> EvalReport:
    if not pairs:
        raise EmptyCorpusError("cannot evaluate an empty corpus")
    n = len(pairs)
    return EvalReport(
        bleu=bleu_corpus(pairs),
        rouge1_f1=100.0 * sum(rouge_n(r, h, 1)[2] for r, h in pairs) / n,
        rouge2_f1=100.0 * sum(rouge_n(r, h, 2)[2] for r, h in pairs) / n,
        rougeL_f1=100.0 * sum(rouge_l(r, h) for r, h in pairs) / n,
        rougeW_f1=100.0 * sum(rouge_w(r, h) for r, h in pairs) / n,
        meteor=100.0 * sum(meteor(r, h) for r, h in pairs) / n,
        pair_count=n,
    )


def evaluate(refs_path: str | Path, hyps_path: str | Path) -> EvalReport:
    """Score aligned reference/hypothesis files and return the report."""
    refs = read_token_lines(refs_path)
    hyps = read_token_lines(hyps_path)
    if len(refs) != len(hyps):
        raise AlignmentError(
            f"reference/hypothesis line counts differ: {len(refs)} vs {len(hyps)}"
        )
    return evaluate_pairs(list(zip(refs, hyps)))
