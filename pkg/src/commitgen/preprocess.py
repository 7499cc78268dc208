"""Commit preprocessing: two regimes turning raw commits into token pairs.

The *reference* regime keeps the message's first sentence, strips issue
ids, tokenizes message and raw diff by whitespace/punctuation, and
filters by a runtime top-20-verb list.  The *rigorous* regime cleans
messages aggressively (labels, mentions, urls, hashes, version
placeholders, camelCase splitting, ascii-only, lowercase), parses the
diff into per-file blocks, keeps only whitelisted extensions, and
replaces paths with bare filenames plus hunk context.

Part-of-speech tagging is a bundled lexicon lookup, so the pipeline is
hermetic.  The lexicon file is one ``token<TAB>TAG`` line per entry
(tags VERB/NOUN/OTHER); a token listed with a non-VERB tag first and a
VERB line as well is treated as verb-ambiguous and rescued by the
"i"-prepend check.  Drop in a bigger file to widen coverage.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import RawCommit

VERB, NOUN, OTHER = "VERB", "NOUN", "OTHER"
VERSION_TOKEN = "<version>"

# longest first so greedy scanning inside punctuation runs works
OPERATOR_TOKENS = (
    "<<=", ">>=", "===", "!==", "...", "/*", "*/", "//", "++", "--",
    "==", "!=", "<=", ">=", "->", "=>", "&&", "||", "+=", "-=", "*=",
    "/=", "%=", "&=", "|=", "^=", "::", "<<", ">>", "**",
)

_LABEL_RE = re.compile(r"^\s*\[[^\[\]]*\]\s*")
_PAREN_ISSUE_RE = re.compile(r"\(#\d+\)")
_ISSUE_RE = re.compile(r"#\d+")
_MENTION_RE = re.compile(r"@[A-Za-z0-9_][\w-]*")
_URL_RE = re.compile(r"https?://\S+")
# case-insensitive so one cleaning pass equals two (lowercasing happens last)
_HEX_RE = re.compile(r"\b[0-9a-fA-F]{7,40}\b")
_VERSION_RE = re.compile(r"\bv?\d+(?:\.\d+)+(?:-\w+)?\b")


class DiffParseError(ValueError):
    """Malformed diff block; carries the byte offset of the offending hunk."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for one preprocessing run."""

    mode: str  # "reference" or "rigorous"
    max_msg_tokens: int = 30
    min_msg_tokens: int = 1
    max_diff_tokens: int = 100
    extension_whitelist: frozenset[str] | None = None
    verb_filter: str = "starts-with-verb"  # "vdo-approx", "starts-with-verb", "off"
    top_verbs: frozenset[str] | None = None

    def __post_init__(self):
        if self.mode not in ("reference", "rigorous"):
            raise ValueError(f"unknown pipeline mode {self.mode!r}")
        if not 0 < self.min_msg_tokens <= self.max_msg_tokens:
            raise ValueError("need 0 < min_msg_tokens <= max_msg_tokens")
        if self.max_diff_tokens <= 0:
            raise ValueError("max_diff_tokens must be positive")
        if self.verb_filter not in ("vdo-approx", "starts-with-verb", "off"):
            raise ValueError(f"unknown verb_filter {self.verb_filter!r}")

    @classmethod
    def reference(cls, **overrides) -> "PipelineConfig":
        defaults = dict(mode="reference", min_msg_tokens=1, verb_filter="vdo-approx")
        defaults.update(overrides)
        return cls(**defaults)

    @classmethod
    def rigorous(cls, **overrides) -> "PipelineConfig":
        defaults = dict(
            mode="rigorous",
            min_msg_tokens=2,
            verb_filter="starts-with-verb",
            extension_whitelist=frozenset({"java"}),
        )
        defaults.update(overrides)
        return cls(**defaults)


@dataclass(frozen=True)
class ProcessedExample:
    """Parallel token sequences: diff source and message target."""

    source_tokens: tuple[str, ...]
    target_tokens: tuple[str, ...]
    origin_sha: str


@dataclass(frozen=True)
class Rejection:
    sha: str
    reason: str  # msg-too-short | msg-too-long | diff-too-long | no-verb | empty-diff


@dataclass
class FileDiff:
    """One per-file block of a unified diff, after parsing."""

    filename: str
    change_context: str | None
    added_lines: list[str] = field(default_factory=list)
    removed_lines: list[str] = field(default_factory=list)

    @property
    def lines_changed(self) -> int:
        return len(self.added_lines) + len(self.removed_lines)


@dataclass(frozen=True)
class PosLexicon:
    """Word -> coarse tag table plus the verb-ambiguity set."""

    tag_map: dict[str, str]
    verb_set: frozenset[str]
    ambiguous_verbs: frozenset[str]

    def tag(self, token: str) -> str:
        return self.tag_map.get(token, OTHER)


def load_lexicon(path: str | Path) -> PosLexicon:
    tag_map: dict[str, str] = {}
    verb_lines: set[str] = set()
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            token, tag = line.split("\t")
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: expected token<TAB>TAG") from exc
        if tag not in (VERB, NOUN, OTHER):
            raise ValueError(f"{path}:{lineno}: unknown tag {tag!r}")
        if tag == VERB:
            verb_lines.add(token)
        tag_map.setdefault(token, tag)  # first line wins as primary tag
    verb_set = frozenset(t for t, tag in tag_map.items() if tag == VERB)
    ambiguous = frozenset(t for t in verb_lines if tag_map[t] != VERB)
    return PosLexicon(tag_map=tag_map, verb_set=verb_set, ambiguous_verbs=ambiguous)


@lru_cache(maxsize=1)
def default_lexicon() -> PosLexicon:
    with resources.as_file(resources.files("commitgen.data") / "pos_lexicon.tsv") as p:
        return load_lexicon(p)


# ---------------------------------------------------------------------------
# Message cleaning.


def split_subtokens(token: str) -> list[str]:
    """Split camelCase/digit boundaries; concatenation preserves the input."""
    if not token:
        raise ValueError("cannot split an empty token")
    parts = []
    start = 0
    for i in range(1, len(token)):
        prev, cur = token[i - 1], token[i]
        boundary = (
            (prev.islower() and cur.isupper())
            or (prev.isdigit() and cur.isalpha())
            or (prev.isalpha() and cur.isdigit())
            or (
                prev.isupper()
                and cur.isupper()
                and i + 1 < len(token)
                and token[i + 1].islower()
            )
        )
        if boundary:
            parts.append(token[start:i])
            start = i
    parts.append(token[start:])
    return parts


def _ascii_only(text: str, keep_newlines: bool = False) -> str:
    out = []
    for ch in text:
        if ch == "\n" and keep_newlines:
            out.append(ch)
        elif 32 <= ord(ch) <= 126:
            out.append(ch)
        else:
            out.append(" ")
    return "".join(out)


def _clean_message_pass(s: str) -> str:
    while _LABEL_RE.match(s):
        s = _LABEL_RE.sub(" ", s, count=1)
    s = _PAREN_ISSUE_RE.sub(" ", s)
    s = _ISSUE_RE.sub(" ", s)
    s = _MENTION_RE.sub(" ", s)
    s = _URL_RE.sub(" ", s)
    s = _HEX_RE.sub(" ", s)
    s = _VERSION_RE.sub(f" {VERSION_TOKEN} ", s)
    lines = []
    for line in s.split("\n"):
        words = []
        for word in line.split():
            words.extend(split_subtokens(word))
        lines.append(" ".join(words))
    s = "\n".join(lines)
    s = _ascii_only(s, keep_newlines=True).lower()
    return "\n".join(" ".join(line.split()) for line in s.split("\n"))


def clean_message(raw: str) -> str:
    """Scrub a commit message: labels, issue ids, mentions, urls, hashes,
    version placeholders, camelCase splits, ascii-only, lowercase.

    The rule pass runs to a fixpoint, which makes the whole function
    idempotent (one pass is not: lowercasing can expose hex words, and
    removals can expose leading labels).  Newlines survive so the first
    line can still be selected afterwards.
    """
    s = raw
    for _ in range(10):
        nxt = _clean_message_pass(s)
        if nxt == s:
            return s
        s = nxt
    return s


def first_sentence(text: str) -> str:
    """First sentence of the first line.

    A sentence ends at the first ``.``/``!``/``?`` followed by
    whitespace or end of line, which leaves dots inside filenames and
    version strings alone.  Trailing punctuation and redundant
    whitespace are stripped.
    """
    line = text.strip().split("\n")[0]
    for i, ch in enumerate(line):
        if ch in ".!?" and (i + 1 == len(line) or line[i + 1].isspace()):
            line = line[:i]
            break
    line = line.rstrip(" \t.!?,;:")
    return " ".join(line.split())


def tokenize_text(text: str, protected: Sequence[str] = (VERSION_TOKEN,)) -> list[str]:
    """Whitespace/punctuation tokenizer that keeps operators intact.

    Word runs stay whole; punctuation runs are scanned greedily for
    known operators and comment markers (``++``, ``//``, ``/*`` ...),
    everything else splits into single characters.  Substrings listed in
    ``protected`` are emitted as single tokens.
    """
    tokens = []
    pieces = [text]
    for keep in protected:
        nxt = []
        for piece in pieces:
            if isinstance(piece, tuple):
                nxt.append(piece)
                continue
            segments = piece.split(keep)
            for si, seg in enumerate(segments):
                if si:
                    nxt.append((keep,))
                nxt.append(seg)
        pieces = nxt
    for piece in pieces:
        if isinstance(piece, tuple):
            tokens.append(piece[0])
            continue
        for run in re.findall(r"\w+|[^\w\s]+", piece):
            if run[0].isalnum() or run[0] == "_":
                tokens.append(run)
                continue
            i = 0
            while i < len(run):
                for op in OPERATOR_TOKENS:
                    if run.startswith(op, i):
                        tokens.append(op)
                        i += len(op)
                        break
                else:
                    tokens.append(run[i])
                    i += 1
    return tokens


def _subtoken_lower_ascii(tokens: Iterable[str]) -> list[str]:
    out = []
    for tok in tokens:
        for sub in split_subtokens(tok):
            sub = _ascii_only(sub).replace(" ", "").lower()
            if sub:
                out.append(sub)
    return out


# ---------------------------------------------------------------------------
# Verb filtering.


def tag_sequence(tokens: Sequence[str], lexicon: PosLexicon) -> list[str]:
    """Coarse tags with one context rule: a noun/other token right after
    the pronoun "i" that is verb-ambiguous gets tagged VERB."""
    tags = []
    for i, tok in enumerate(tokens):
        tag = lexicon.tag(tok)
        if (
            tag != VERB
            and i > 0
            and tokens[i - 1] == "i"
            and tok in lexicon.ambiguous_verbs
        ):
            tag = VERB
        tags.append(tag)
    return tags


def tag_and_verb_filter(tokens: Sequence[str], lexicon: PosLexicon) -> bool:
    """Accept when the message starts with a verb, retrying with a
    prepended "i" to rescue verbs mis-tagged as nouns."""
    if not tokens:
        return False
    if tag_sequence(tokens, lexicon)[0] == VERB:
        return True
    retagged = tag_sequence(["i", *tokens], lexicon)
    return retagged[1] == VERB


def compute_top_verbs(
    messages: Iterable[str], lexicon: PosLexicon, k: int = 20
) -> frozenset[str]:
    """The k most frequent message-leading verbs of a corpus.

    This is the runtime stand-in for the reference method's fixed
    verb list: count the first token of each reference-cleaned message
    when the lexicon tags it VERB, keep the top k (ties lexicographic).
    """
    from collections import Counter

    counts = Counter()
    for raw in messages:
        tokens = _reference_message_tokens(raw)
        if tokens and lexicon.tag(tokens[0]) == VERB:
            counts[tokens[0]] += 1
    ranked = sorted(counts, key=lambda t: (-counts[t], t))
    return frozenset(ranked[:k])


# ---------------------------------------------------------------------------
# Diff parsing.


_DIFF_HEADER_RE = re.compile(r"^diff --git a/(.*?) b/(.*)$", re.M)
_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@(.*)$")
_OLD_PATH_RE = re.compile(r"^--- (?:a/(.*)|/dev/null)\s*$")
_NEW_PATH_RE = re.compile(r"^\+\+\+ (?:b/(.*)|/dev/null)\s*$")


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def parse_diff(raw: str) -> list[FileDiff]:
    """Split unified git-diff text into per-file blocks.

    Filenames are basenames of the post-image path (pre-image for
    deletions); hunk-header context text is kept, one copy per hunk;
    blocks with neither additions nor deletions are dropped.  Text
    without a ``diff --git`` marker parses to an empty list; a hunk cut
    short of its declared line counts raises ``DiffParseError``.
    """
    headers = list(_DIFF_HEADER_RE.finditer(raw))
    if not headers:
        return []
    blocks = []
    for hi, header in enumerate(headers):
        end = headers[hi + 1].start() if hi + 1 < len(headers) else len(raw)
        block_text = raw[header.start():end]
        blocks.append(_parse_block(header, block_text, raw))
    return [b for b in blocks if b.lines_changed > 0]


def _parse_block(header: re.Match, block_text: str, whole: str) -> FileDiff:
    pre_path, post_path = header.group(1), header.group(2)
    old_path = new_path = None
    added, removed, contexts = [], [], []

    lines = block_text.split("\n")
    pos = 1  # line index within the block; line 0 is the diff --git header
    while pos < len(lines):
        line = lines[pos]
        m = _OLD_PATH_RE.match(line)
        if m:
            old_path = m.group(1)
            pos += 1
            continue
        m = _NEW_PATH_RE.match(line)
        if m:
            new_path = m.group(1)
            pos += 1
            continue
        m = _HUNK_RE.match(line)
        if m:
            old_count = int(m.group(2)) if m.group(2) is not None else 1
            new_count = int(m.group(4)) if m.group(4) is not None else 1
            context = m.group(5).strip()
            if context:
                contexts.append(context)
            hunk_char_pos = header.start() + sum(len(l) + 1 for l in lines[:pos])
            pos += 1
            seen_old = seen_new = 0
            while pos < len(lines) and (seen_old < old_count or seen_new < new_count):
                body = lines[pos]
                if body.startswith("+"):
                    added.append(body[1:])
                    seen_new += 1
                elif body.startswith("-"):
                    removed.append(body[1:])
                    seen_old += 1
                elif body.startswith(" ") or body == "":
                    seen_old += 1
                    seen_new += 1
                elif body.startswith("\\"):
                    pass  # "\ No newline at end of file"
                else:
                    break
                pos += 1
            if seen_old < old_count or seen_new < new_count:
                raise DiffParseError(
                    "truncated hunk", _byte_offset(whole, hunk_char_pos)
                )
            continue
        pos += 1

    path = new_path or post_path
    if new_path is None and old_path is not None:
        path = old_path  # deletion: post-image is /dev/null
    filename = path.rsplit("/", 1)[-1] if path else pre_path.rsplit("/", 1)[-1]
    return FileDiff(
        filename=filename,
        change_context=" ".join(contexts) if contexts else None,
        added_lines=added,
        removed_lines=removed,
    )


def _extension(filename: str) -> str:
    if "." not in filename:
        return ""
    return filename.rsplit(".", 1)[-1].lower()


def clean_and_tokenize_diff(files: Sequence[FileDiff], cfg: PipelineConfig) -> list[str]:
    """Flatten per-file blocks into the source token sequence.

    Files outside the extension whitelist contribute nothing; the rest
    are ordered by most lines changed.  Each file emits filename tokens,
    hunk-context tokens, then removed lines behind a ``-`` marker token
    and added lines behind ``+``.
    """
    if cfg.extension_whitelist is not None:
        files = [f for f in files if _extension(f.filename) in cfg.extension_whitelist]
    files = sorted(files, key=lambda f: -f.lines_changed)
    tokens: list[str] = []
    for f in files:
        tokens.extend(_subtoken_lower_ascii(tokenize_text(f.filename)))
        if f.change_context:
            tokens.extend(_subtoken_lower_ascii(tokenize_text(f.change_context)))
        for line in f.removed_lines:
            tokens.append("-")
            tokens.extend(_subtoken_lower_ascii(tokenize_text(line)))
        for line in f.added_lines:
            tokens.append("+")
            tokens.extend(_subtoken_lower_ascii(tokenize_text(line)))
    return tokens


# ---------------------------------------------------------------------------
# End-to-end processing.


def _reference_message_tokens(raw: str) -> list[str]:
    msg = first_sentence(raw)
    msg = _PAREN_ISSUE_RE.sub(" ", msg)
    msg = _ISSUE_RE.sub(" ", msg)
    return [t.lower() for t in tokenize_text(msg)]


def _rigorous_message_tokens(raw: str) -> list[str]:
    return tokenize_text(first_sentence(clean_message(raw)))


def process_example(
    c: RawCommit,
    cfg: PipelineConfig,
    lexicon: PosLexicon | None = None,
) -> ProcessedExample | Rejection:
    """Run one commit through the configured pipeline.

    Returns a ``ProcessedExample`` or a ``Rejection`` whose reason is
    one of msg-too-short, msg-too-long, no-verb, empty-diff,
    diff-too-long.  Assumes commit-level filters already ran.
    """
    lexicon = lexicon or default_lexicon()

    if cfg.mode == "reference":
        msg_tokens = _reference_message_tokens(c.message)
    else:
        msg_tokens = _rigorous_message_tokens(c.message)

    if len(msg_tokens) < cfg.min_msg_tokens:
        return Rejection(c.sha, "msg-too-short")
    if len(msg_tokens) > cfg.max_msg_tokens:
        return Rejection(c.sha, "msg-too-long")

    if cfg.verb_filter == "vdo-approx":
        if cfg.top_verbs is None:
            raise ValueError(
                "verb_filter 'vdo-approx' needs top_verbs; see compute_top_verbs"
            )
        if msg_tokens[0] not in cfg.top_verbs:
            return Rejection(c.sha, "no-verb")
    elif cfg.verb_filter == "starts-with-verb":
        if not tag_and_verb_filter(msg_tokens, lexicon):
            return Rejection(c.sha, "no-verb")

    if cfg.mode == "reference":
        diff_text = _HEX_RE.sub(" ", c.diff)
        src_tokens = [t.lower() for t in tokenize_text(diff_text)]
    else:
        src_tokens = clean_and_tokenize_diff(parse_diff(c.diff), cfg)

    if not src_tokens:
        return Rejection(c.sha, "empty-diff")
    if len(src_tokens) > cfg.max_diff_tokens:
        return Rejection(c.sha, "diff-too-long")

    return ProcessedExample(
        source_tokens=tuple(src_tokens),
        target_tokens=tuple(msg_tokens),
        origin_sha=c.sha,
    )


# ---------------------------------------------------------------------------
# JSONL serialization.


def write_processed(examples: Iterable[ProcessedExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(
                {
                    "sha": ex.origin_sha,
                    "source": list(ex.source_tokens),
                    "target": list(ex.target_tokens),
                },
                ensure_ascii=False,
            ))
            fh.write("\n")


def read_processed(path: str | Path) -> list[ProcessedExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append(ProcessedExample(
                source_tokens=tuple(rec["source"]),
                target_tokens=tuple(rec["target"]),
                origin_sha=rec.get("sha", ""),
            ))
    return out


def write_rejections(rejections: Iterable[Rejection], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rejections:
            fh.write(json.dumps({"sha": r.sha, "reason": r.reason}))
            fh.write("\n")
