"""Raw commit ingestion, commit-level filters, splits, and dataset stats.

Commits come from local git clones (via the ``git`` binary) or from
JSONL archives; there is deliberately no remote crawling.  Bytes that
are not valid UTF-8 are replaced with U+FFFD at read time.
"""

from __future__ import annotations

import json
import logging
import re
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Iterator, Sequence

import numpy as np

if TYPE_CHECKING:
    from .preprocess import ProcessedExample

log = logging.getLogger(__name__)

_SHA_RE = re.compile(r"^[0-9a-f]{40}$")


class CorpusSizeError(ValueError):
    pass


@dataclass(frozen=True)
class RawCommit:
    """One commit as ingested: message, unified diff text, ancestry."""

    repo: str
    sha: str
    message: str
    diff: str
    parent_count: int

    def __post_init__(self):
        if not _SHA_RE.match(self.sha):
            raise ValueError(f"sha must be 40 lowercase hex chars, got {self.sha!r}")
        if self.parent_count < 0:
            raise ValueError("parent_count must be non-negative")


@dataclass(frozen=True)
class CommitFilterConfig:
    max_diff_bytes: int = 1_048_576
    drop_merges: bool = True
    drop_initial: bool = True
    per_repo_cap: int = 10_000

    def __post_init__(self):
        if self.max_diff_bytes <= 0:
            raise ValueError("max_diff_bytes must be positive")
        if self.per_repo_cap <= 0:
            raise ValueError("per_repo_cap must be positive")


@dataclass(frozen=True)
class FilterDecision:
    keep: bool
    reason: str  # merge | initial | oversize | keep


def filter_commit(c: RawCommit, cfg: CommitFilterConfig) -> FilterDecision:
    """Drop merges, parentless commits, and oversized diffs."""
    if cfg.drop_merges and c.parent_count > 1:
        return FilterDecision(False, "merge")
    if cfg.drop_initial and c.parent_count == 0:
        return FilterDecision(False, "initial")
    if len(c.diff.encode("utf-8")) > cfg.max_diff_bytes:
        return FilterDecision(False, "oversize")
    return FilterDecision(True, "keep")


# ---------------------------------------------------------------------------
# Ingestion.


def read_corpus(
    path: str | Path,
    fmt: str = "jsonl",
    per_repo_cap: int = 10_000,
) -> Iterator[RawCommit]:
    """Stream commits from a JSONL archive or a local git repository.

    JSONL records come in file order; malformed lines are logged with
    their line number and skipped.  Git repositories yield newest-first
    from the default branch (HEAD), at most ``per_repo_cap`` commits;
    the initial commit is yielded too, with ``parent_count`` 0, for the
    filter stage to drop.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus path does not exist: {path}")
    if fmt == "jsonl":
        yield from _read_jsonl(path)
    elif fmt == "git-repo":
        yield from _read_git_repo(path, per_repo_cap)
    else:
        raise ValueError(f"unknown corpus format {fmt!r}")


def _read_jsonl(path: Path) -> Iterator[RawCommit]:
    with open(path, "rb") as fh:
        for lineno, raw_line in enumerate(fh, 1):
            line = raw_line.decode("utf-8", errors="replace").strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                yield RawCommit(
                    repo=rec.get("repo", path.stem),
                    sha=rec["sha"],
                    message=rec["message"],
                    diff=rec["diff"],
                    parent_count=int(rec["parent_count"]),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                log.warning("%s:%d: skipping malformed record: %s", path, lineno, exc)


def _git(repo: Path, *args: str) -> str:
    out = subprocess.run(
        ["git", "-C", str(repo), *args],
        check=True,
        capture_output=True,
    )
    return out.stdout.decode("utf-8", errors="replace")


def _read_git_repo(path: Path, cap: int) -> Iterator[RawCommit]:
    try:
        log_text = _git(path, "log", "--format=%H%x1f%P%x1f%B%x1e")
    except subprocess.CalledProcessError as exc:
        raise OSError(
            f"git log failed for {path}: {exc.stderr.decode(errors='replace').strip()}"
        ) from exc
    repo_name = path.name
    count = 0
    for record in log_text.split("\x1e"):
        record = record.strip("\n")
        if not record.strip():
            continue
        if count >= cap:
            break
        sha, parents, message = record.split("\x1f", 2)
        sha = sha.strip()
        parent_count = len(parents.split())
        if parent_count == 0:
            diff = _git(path, "show", "--format=", "--patch", "--no-color", sha)
        else:
            diff = _git(path, "diff", "--no-color", f"{sha}^", sha)
        yield RawCommit(
            repo=repo_name,
            sha=sha,
            message=message,
            diff=diff,
            parent_count=parent_count,
        )
        count += 1


def write_corpus_jsonl(commits: Iterable[RawCommit], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in commits:
            fh.write(json.dumps(
                {
                    "repo": c.repo,
                    "sha": c.sha,
                    "message": c.message,
                    "diff": c.diff,
                    "parent_count": c.parent_count,
                },
                ensure_ascii=False,
            ))
            fh.write("\n")


# ---------------------------------------------------------------------------
# Sampling and splitting.


@dataclass(frozen=True)
class SplitSpec:
    sample_size: int = 36_000
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        if abs(sum(self.ratios) - 1.0) > 1e-12:
            raise ValueError(f"ratios must sum to 1, got {self.ratios}")
        if self.sample_size < 10:
            raise ValueError("sample_size must be at least 10")


def sample_and_split(
    examples: Sequence, spec: SplitSpec
) -> tuple[set[int], set[int], set[int]]:
    """Sample ``spec.sample_size`` indices without replacement and split them.

    The generator is PCG64 seeded with ``spec.seed``, so identical seeds
    give identical splits on every platform.  Set sizes are the floored
    ratio shares; leftover rows go to the training set.
    """
    n = len(examples)
    if n < spec.sample_size:
        raise CorpusSizeError(
            f"corpus has {n} examples but sample_size is {spec.sample_size}; "
            "lower sample_size to proceed"
        )
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    chosen = rng.choice(n, size=spec.sample_size, replace=False)
    n_train = int(spec.sample_size * spec.ratios[0])
    n_valid = int(spec.sample_size * spec.ratios[1])
    n_test = int(spec.sample_size * spec.ratios[2])
    n_train += spec.sample_size - (n_train + n_valid + n_test)
    train = set(int(i) for i in chosen[:n_train])
    valid = set(int(i) for i in chosen[n_train:n_train + n_valid])
    test = set(int(i) for i in chosen[n_train + n_valid:])
    return train, valid, test


# ---------------------------------------------------------------------------
# Dataset statistics.


@dataclass
class CorpusStats:
    count: int
    source_length_histogram: dict[int, int]
    target_length_histogram: dict[int, int]
    vocab_estimate: int


def corpus_stats(examples: Sequence["ProcessedExample"]) -> CorpusStats:
    """Exact token-count histograms and a distinct-token estimate."""
    source_hist: dict[int, int] = {}
    target_hist: dict[int, int] = {}
    distinct: set[str] = set()
    for ex in examples:
        s, t = len(ex.source_tokens), len(ex.target_tokens)
        source_hist[s] = source_hist.get(s, 0) + 1
        target_hist[t] = target_hist.get(t, 0) + 1
        distinct.update(ex.source_tokens)
        distinct.update(ex.target_tokens)
    return CorpusStats(
        count=len(examples),
        source_length_histogram=dict(sorted(source_hist.items())),
        target_length_histogram=dict(sorted(target_hist.items())),
        vocab_estimate=len(distinct),
    )


def stats_to_json(stats: CorpusStats) -> str:
    return json.dumps(
        {
            "count": stats.count,
            "source_hist": {str(k): v for k, v in stats.source_length_histogram.items()},
            "target_hist": {str(k): v for k, v in stats.target_length_histogram.items()},
        }
    )


def render_length_histogram_svg(stats: CorpusStats, path: str | Path) -> None:
    """Bar chart of the diff (source) token-length distribution."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    hist = stats.source_length_histogram
    fig, ax = plt.subplots(figsize=(8, 4))
    if hist:
        ax.bar(list(hist.keys()), list(hist.values()), width=1.0, color="#4878a8")
    ax.set_xlabel("tokens in diff")
    ax.set_ylabel("frequency")
    ax.set_title("Distribution of diff token counts")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
