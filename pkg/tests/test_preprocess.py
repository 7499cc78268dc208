import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commitgen import preprocess as pp
from commitgen.corpus import RawCommit

LEX = pp.default_lexicon()


def commit(message="fix bug in parser", diff="", sha_char="a"):
    return RawCommit(
        repo="r", sha=sha_char * 40, message=message, diff=diff, parent_count=1
    )


JAVA_DIFF = """diff --git a/src/main/App.java b/src/main/App.java
index 1111111..2222222 100644
--- a/src/main/App.java
+++ b/src/main/App.java
@@ -1,2 +1,2 @@ class App
-int oldValue;
+int newValue;
"""


# ---------------------------------------------------------------------------
# clean_message.


def test_clean_label_issue_and_camel():
    assert pp.clean_message("[FIX] Fix parserError (#123)") == "fix parser error"


def test_clean_version_placeholder():
    assert pp.clean_message("Bump to 1.2.3") == "bump to <version>"


def test_clean_no_rule_fires():
    assert pp.clean_message("fix bug") == "fix bug"


def test_clean_removes_mentions_urls_hashes():
    assert pp.clean_message("Fix crash thanks @bob") == "fix crash thanks"
    assert pp.clean_message("Fix docs see https://example.com/a?b=c now") == "fix docs see now"
    assert pp.clean_message("Revert deadbeefcafe1234 changes") == "revert changes"


def test_clean_keeps_short_hex_words():
    # "decade" is 6 chars, below the 7-char hash threshold
    assert pp.clean_message("add decade fade") == "add decade fade"


def test_clean_version_variants():
    assert pp.clean_message("upgrade to v2.0-beta now") == "upgrade to <version> now"
    assert pp.clean_message("use 10.4.1") == "use <version>"


def test_clean_strips_repeated_labels():
    assert pp.clean_message("[a] [b] Fix it") == "fix it"


def test_clean_drops_non_ascii():
    assert pp.clean_message("Fix über bug") == "fix ber bug"


def test_clean_preserves_newlines_for_line_selection():
    cleaned = pp.clean_message("Add tests.\nMore detail")
    assert cleaned.split("\n")[0] == "add tests."


@given(st.text(max_size=80))
@settings(max_examples=200, deadline=None)
def test_clean_message_idempotent(text):
    once = pp.clean_message(text)
    assert pp.clean_message(once) == once


# ---------------------------------------------------------------------------
# first_sentence.


def test_first_sentence_first_line():
    assert pp.first_sentence("add tests.\nmore detail") == "add tests"


def test_first_sentence_boundary_trace():
    assert pp.first_sentence("fix a. then b.") == "fix a"


def test_first_sentence_single():
    assert pp.first_sentence("update readme") == "update readme"


def test_first_sentence_keeps_filename_dots():
    assert pp.first_sentence("fix utils.py bug. more") == "fix utils.py bug"


def test_first_sentence_question_and_bang():
    assert pp.first_sentence("why? because") == "why"
    assert pp.first_sentence("ship it!") == "ship it"


# ---------------------------------------------------------------------------
# split_subtokens.


def test_split_camel_case():
    assert pp.split_subtokens("camelCase") == ["camel", "Case"]


def test_split_acronym_and_digit():
    assert pp.split_subtokens("HTTPServer2") == ["HTTP", "Server", "2"]


def test_split_plain():
    assert pp.split_subtokens("plain") == ["plain"]


def test_split_digit_to_letter():
    assert pp.split_subtokens("2fast") == ["2", "fast"]


def test_split_empty_rejected():
    with pytest.raises(ValueError):
        pp.split_subtokens("")


@given(st.text(min_size=1, max_size=30))
@settings(max_examples=200, deadline=None)
def test_split_subtokens_preserves_characters(token):
    assert "".join(pp.split_subtokens(token)) == token


# ---------------------------------------------------------------------------
# Tokenizer.


def test_tokenizer_preserves_operators():
    assert pp.tokenize_text("++x; // done") == ["++", "x", ";", "//", "done"]


def test_tokenizer_splits_plain_punctuation():
    assert pp.tokenize_text("foo();") == ["foo", "(", ")", ";"]


def test_tokenizer_comment_blocks():
    assert pp.tokenize_text("/* hi */") == ["/*", "hi", "*/"]


def test_tokenizer_keeps_version_token_whole():
    assert pp.tokenize_text("bump to <version>") == ["bump", "to", "<version>"]


@given(st.text(max_size=60))
@settings(max_examples=200, deadline=None)
def test_tokenizer_never_emits_whitespace(text):
    for tok in pp.tokenize_text(text):
        assert tok
        assert not any(ch.isspace() for ch in tok)


@given(st.sampled_from(["++", "--", "//", "/*", "*/"]), st.text(max_size=10))
@settings(max_examples=100, deadline=None)
def test_tokenizer_operator_survives_alone(op, noise):
    assert op in pp.tokenize_text(f"{noise} {op} {noise}")


# ---------------------------------------------------------------------------
# Verb filter.


def test_verb_filter_accepts_plain_verb():
    assert pp.tag_and_verb_filter(["fix", "bug", "in", "parser"], LEX)


def test_verb_filter_rescues_ambiguous_via_i_prepend():
    assert LEX.tag("support") == pp.NOUN
    assert "support" in LEX.ambiguous_verbs
    assert pp.tag_and_verb_filter(["support", "new", "api"], LEX)


def test_verb_filter_rejects_non_verb():
    assert not pp.tag_and_verb_filter(["new", "feature", "added"], LEX)


def test_verb_filter_unknown_token_is_other():
    assert LEX.tag("zzyzx") == pp.OTHER
    assert not pp.tag_and_verb_filter(["zzyzx", "stuff"], LEX)


def test_lexicon_invariant_verbs_subset_of_tag_map():
    assert all(LEX.tag_map[t] == pp.VERB for t in LEX.verb_set)


def test_load_lexicon_rejects_bad_tag(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("fix\tVB\n", encoding="utf-8")
    with pytest.raises(ValueError):
        pp.load_lexicon(path)


def test_compute_top_verbs():
    messages = ["Fix a bug", "Fix another", "Add tests", "New: stuff"] * 3
    top = pp.compute_top_verbs(messages, LEX, k=1)
    assert top == frozenset({"fix"})


# ---------------------------------------------------------------------------
# Diff parsing.


def test_parse_diff_minimal_block():
    raw = (
        "diff --git a/src/A.java b/src/A.java\n"
        "index 123..456 100644\n"
        "--- a/src/A.java\n"
        "+++ b/src/A.java\n"
        "@@ -1,1 +1,1 @@ class A\n"
        "-old\n"
        "+new\n"
    )
    files = pp.parse_diff(raw)
    assert len(files) == 1
    f = files[0]
    assert f.filename == "A.java"
    assert f.change_context == "class A"
    assert f.added_lines == ["new"]
    assert f.removed_lines == ["old"]
    assert f.lines_changed == 2


def test_parse_diff_mode_only_block_dropped():
    raw = (
        "diff --git a/tool.sh b/tool.sh\n"
        "old mode 100644\n"
        "new mode 100755\n"
    )
    assert pp.parse_diff(raw) == []


def test_parse_diff_empty_string():
    assert pp.parse_diff("") == []


def test_parse_diff_no_marker():
    assert pp.parse_diff("just some text") == []


def test_parse_diff_deletion_uses_pre_image_name():
    raw = (
        "diff --git a/gone/Old.java b/gone/Old.java\n"
        "deleted file mode 100644\n"
        "--- a/gone/Old.java\n"
        "+++ /dev/null\n"
        "@@ -1,1 +0,0 @@\n"
        "-bye\n"
    )
    files = pp.parse_diff(raw)
    assert files[0].filename == "Old.java"
    assert files[0].removed_lines == ["bye"]


def test_parse_diff_new_file():
    raw = (
        "diff --git a/New.java b/New.java\n"
        "new file mode 100644\n"
        "--- /dev/null\n"
        "+++ b/New.java\n"
        "@@ -0,0 +1,2 @@\n"
        "+a\n"
        "+b\n"
    )
    files = pp.parse_diff(raw)
    assert files[0].filename == "New.java"
    assert files[0].added_lines == ["a", "b"]


def test_parse_diff_multiple_files_and_hunks():
    raw = (
        "diff --git a/x/A.java b/x/A.java\n"
        "--- a/x/A.java\n"
        "+++ b/x/A.java\n"
        "@@ -1,1 +1,1 @@ void one()\n"
        "-p\n"
        "+q\n"
        "@@ -10,1 +10,2 @@ void two()\n"
        " keep\n"
        "+r\n"
        "diff --git a/y/B.java b/y/B.java\n"
        "--- a/y/B.java\n"
        "+++ b/y/B.java\n"
        "@@ -1,1 +1,1 @@\n"
        "-s\n"
        "+t\n"
    )
    files = pp.parse_diff(raw)
    assert [f.filename for f in files] == ["A.java", "B.java"]
    assert files[0].change_context == "void one() void two()"
    assert files[0].lines_changed == 3


def test_parse_diff_truncated_hunk_reports_byte_offset():
    raw = (
        "diff --git a/A.java b/A.java\n"
        "--- a/A.java\n"
        "+++ b/A.java\n"
        "@@ -1,3 +1,3 @@\n"
        "-only one line\n"
    )
    with pytest.raises(pp.DiffParseError) as err:
        pp.parse_diff(raw)
    assert err.value.byte_offset == raw.index("@@")


def test_parse_diff_no_newline_marker_ignored():
    raw = (
        "diff --git a/A.java b/A.java\n"
        "--- a/A.java\n"
        "+++ b/A.java\n"
        "@@ -1,1 +1,1 @@\n"
        "-x\n"
        "\\ No newline at end of file\n"
        "+y\n"
        "\\ No newline at end of file\n"
    )
    f = pp.parse_diff(raw)[0]
    assert f.removed_lines == ["x"]
    assert f.added_lines == ["y"]


# ---------------------------------------------------------------------------
# clean_and_tokenize_diff.


def test_diff_tokens_keep_operators():
    fd = pp.FileDiff("A.java", None, added_lines=["++x; // done"], removed_lines=[])
    cfg = pp.PipelineConfig.rigorous()
    tokens = pp.clean_and_tokenize_diff([fd], cfg)
    assert tokens == ["a", ".", "java", "+", "++", "x", ";", "//", "done"]


def test_diff_files_sorted_by_lines_changed():
    small = pp.FileDiff("Small.java", None, added_lines=["one"], removed_lines=[])
    big = pp.FileDiff(
        "Big.java", None, added_lines=["a", "b"], removed_lines=["c"]
    )
    cfg = pp.PipelineConfig.rigorous()
    tokens = pp.clean_and_tokenize_diff([small, big], cfg)
    assert tokens.index("big") < tokens.index("small")


def test_diff_extension_whitelist():
    cs = pp.FileDiff("Foo.cs", None, added_lines=["x"], removed_lines=[])
    cfg = pp.PipelineConfig.rigorous(extension_whitelist=frozenset({"java"}))
    assert pp.clean_and_tokenize_diff([cs], cfg) == []


def test_diff_marker_tokens_per_line():
    fd = pp.FileDiff("A.java", None, added_lines=["x", "y"], removed_lines=["z"])
    cfg = pp.PipelineConfig.rigorous()
    tokens = pp.clean_and_tokenize_diff([fd], cfg)
    assert tokens == ["a", ".", "java", "-", "z", "+", "x", "+", "y"]


def test_diff_context_tokens_after_filename():
    fd = pp.FileDiff(
        "App.java", "class AppServer", added_lines=["v"], removed_lines=[]
    )
    cfg = pp.PipelineConfig.rigorous()
    tokens = pp.clean_and_tokenize_diff([fd], cfg)
    assert tokens == ["app", ".", "java", "class", "app", "server", "+", "v"]


# ---------------------------------------------------------------------------
# process_example end to end.


def test_process_accepts_simple_rigorous_commit():
    c = commit(message="fix npe", diff=JAVA_DIFF)
    out = pp.process_example(c, pp.PipelineConfig.rigorous())
    assert isinstance(out, pp.ProcessedExample)
    assert out.target_tokens == ("fix", "npe")
    assert out.source_tokens[0] == "app"
    assert "+" in out.source_tokens and "-" in out.source_tokens


def test_process_rejects_long_message():
    c = commit(message=" ".join(["fix"] + ["token"] * 30), diff=JAVA_DIFF)
    out = pp.process_example(c, pp.PipelineConfig.rigorous())
    assert out == pp.Rejection(c.sha, "msg-too-long")


def test_process_rejects_short_message_rigorous():
    c = commit(message="fix", diff=JAVA_DIFF)
    out = pp.process_example(c, pp.PipelineConfig.rigorous())
    assert out == pp.Rejection(c.sha, "msg-too-short")


def test_process_rejects_no_verb():
    c = commit(message="new feature added", diff=JAVA_DIFF)
    out = pp.process_example(c, pp.PipelineConfig.rigorous())
    assert out == pp.Rejection(c.sha, "no-verb")


def test_process_rejects_empty_diff():
    c = commit(message="fix npe", diff="")
    out = pp.process_example(c, pp.PipelineConfig.rigorous())
    assert out == pp.Rejection(c.sha, "empty-diff")


def test_process_rejects_whitelist_filtered_diff_as_empty():
    diff = JAVA_DIFF.replace(".java", ".cs")
    c = commit(message="fix npe", diff=diff)
    out = pp.process_example(c, pp.PipelineConfig.rigorous())
    assert out == pp.Rejection(c.sha, "empty-diff")


def test_process_rejects_oversized_diff():
    lines = "\n".join(f"+line{i} {i}" for i in range(60))
    diff = (
        "diff --git a/src/Big.java b/src/Big.java\n"
        "--- a/src/Big.java\n"
        "+++ b/src/Big.java\n"
        f"@@ -0,0 +1,60 @@\n{lines}\n"
    )
    c = commit(message="fix npe", diff=diff)
    out = pp.process_example(c, pp.PipelineConfig.rigorous())
    assert out == pp.Rejection(c.sha, "diff-too-long")


def test_process_reference_mode_uses_top_verbs():
    cfg = pp.PipelineConfig.reference(top_verbs=frozenset({"fix"}))
    accepted = pp.process_example(commit(message="fix it now", diff=JAVA_DIFF), cfg)
    assert isinstance(accepted, pp.ProcessedExample)
    rejected = pp.process_example(commit(message="add it now", diff=JAVA_DIFF), cfg)
    assert rejected.reason == "no-verb"


def test_process_reference_mode_needs_top_verbs():
    cfg = pp.PipelineConfig.reference()
    with pytest.raises(ValueError):
        pp.process_example(commit(diff=JAVA_DIFF), cfg)


def test_process_reference_tokenizes_raw_diff():
    cfg = pp.PipelineConfig.reference(top_verbs=frozenset({"fix"}))
    out = pp.process_example(commit(message="fix it now", diff=JAVA_DIFF), cfg)
    # reference mode keeps the raw diff shape: paths survive, hashes go
    assert "src" in out.source_tokens
    assert "1111111" not in out.source_tokens


def test_processed_jsonl_round_trip(tmp_path):
    c = commit(message="fix npe", diff=JAVA_DIFF)
    ex = pp.process_example(c, pp.PipelineConfig.rigorous())
    path = tmp_path / "proc.jsonl"
    pp.write_processed([ex], path)
    assert pp.read_processed(path) == [ex]


def test_pipeline_config_validation():
    with pytest.raises(ValueError):
        pp.PipelineConfig(mode="bogus")
    with pytest.raises(ValueError):
        pp.PipelineConfig(mode="rigorous", min_msg_tokens=5, max_msg_tokens=2)
    with pytest.raises(ValueError):
        pp.PipelineConfig(mode="rigorous", verb_filter="strict")


# ---------------------------------------------------------------------------
# Fuzzing the whole pipeline: outputs always satisfy the invariants.


@given(st.text(max_size=120), st.text(max_size=400))
@settings(max_examples=120, deadline=None)
def test_pipeline_output_satisfies_invariants(message, diff_text):
    cfg = pp.PipelineConfig.rigorous(extension_whitelist=None)
    c = RawCommit(repo="r", sha="f" * 40, message=message, diff=diff_text, parent_count=1)
    try:
        out = pp.process_example(c, cfg)
    except pp.DiffParseError:
        return  # malformed hunk structure is an error, not a rejection
    if isinstance(out, pp.Rejection):
        assert out.reason in {
            "msg-too-short", "msg-too-long", "diff-too-long", "no-verb", "empty-diff",
        }
        return
    assert 0 < len(out.source_tokens) <= cfg.max_diff_tokens
    assert cfg.min_msg_tokens <= len(out.target_tokens) <= cfg.max_msg_tokens
    for tok in out.source_tokens + out.target_tokens:
        assert tok
        assert not any(ch.isspace() for ch in tok)
        assert tok == tok.lower()
