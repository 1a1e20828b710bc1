import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arforge.bpe import (BOS_ID, DESK_NUM_MERGES, END_OF_WORD, EOS_ID, PAD_ID,
                         RESERVED_SYMBOLS, UNK_ID, MergeTable, Tokenizer,
                         TokenizerError, Vocabulary, decode, encode, learn_merges,
                         load_merges, load_vocab, save_merges, save_vocab,
                         segment_word)


def build_tokenizer(lines, num_merges=DESK_NUM_MERGES, vocab_cap=1000):
    table, vocab = learn_merges([lines], num_merges, vocab_cap)
    return Tokenizer(table, vocab)


def test_first_merge_on_ab_abc_fixture():
    # "ab" -> (a, b, </w>), "abc" -> (a, b, c, </w>); the pair (a, b) occurs
    # twice, every other adjacent pair once, so it must be learned first
    table, _ = learn_merges([["ab abc"]], num_merges=1)
    assert table.merges == (("a", "b"),)


def test_tied_counts_break_lexicographically():
    # one word "ab": (a, b) and (b, </w>) both occur once; (a, b) sorts first
    table, _ = learn_merges([["ab"]], num_merges=1)
    assert table.merges == (("a", "b"),)


def test_merges_can_absorb_the_word_marker():
    table, _ = learn_merges([["ab ab ab"]], num_merges=2)
    assert table.merges[0] == ("a", "b")
    assert table.merges[1] == ("ab", END_OF_WORD)


def test_learning_stops_when_nothing_left_to_merge():
    table, _ = learn_merges([["ab"]], num_merges=50)
    # "ab</w>" fully merges in 2 steps; no third merge exists
    assert len(table) == 2


def test_reserved_ids_are_stable():
    _, vocab = learn_merges([["ab abc"]], num_merges=2)
    assert vocab.symbols[:4] == list(RESERVED_SYMBOLS)
    assert (PAD_ID, BOS_ID, EOS_ID, UNK_ID) == (0, 1, 2, 3)


def test_encode_decode_round_trip_simple():
    tok = build_tokenizer(["the cat sat", "the dog ran"])
    for line in ("the cat sat", "dog ran the", "cat cat cat"):
        assert tok.decode(tok.encode(line)) == line


def test_encode_unknown_character_falls_back_to_unk():
    tok = build_tokenizer(["ab"])
    ids = tok.encode("aZ")
    assert UNK_ID in ids


def test_encode_rejects_embedded_newline():
    tok = build_tokenizer(["ab"])
    with pytest.raises(TokenizerError):
        tok.encode("a\nb")


def test_segment_word_applies_merges_in_rank_order():
    ranks = {("a", "b"): 0, ("ab", "c"): 1}
    assert segment_word("abc", ranks) == ("abc", END_OF_WORD)
    # without the second merge the "c" stays split off
    assert segment_word("abc", {("a", "b"): 0}) == ("ab", "c", END_OF_WORD)


def test_segment_word_leftmost_occurrence_first():
    # merging (a, a) in "aaa": leftmost application gives (aa, a), and the
    # remaining pair (aa, a) is a different symbol pair
    assert segment_word("aaa", {("a", "a"): 0}) == ("aa", "a", END_OF_WORD)


def test_vocab_cap_evicts_rare_symbols_to_unk():
    # two merges fully fuse the dominant word "aa"; the rare word "zq" stays
    # split as (z, q, </w>) and a cap of 7 evicts "z", the rarest symbol
    lines = ["aa " * 50 + "zq"]
    table, vocab = learn_merges([lines], num_merges=2, vocab_cap=7)
    assert len(vocab) == 7
    tok = Tokenizer(table, vocab)
    assert UNK_ID in tok.encode("zq")
    assert UNK_ID not in tok.encode("aa")


def test_vocabulary_rejects_missing_reserved_prefix():
    with pytest.raises(TokenizerError):
        Vocabulary(["a", "b"])


def test_vocabulary_rejects_duplicates():
    with pytest.raises(TokenizerError):
        Vocabulary(list(RESERVED_SYMBOLS) + ["x", "x"])


def test_merge_and_vocab_files_round_trip(tmp_path):
    table, vocab = learn_merges([["the cat sat on the mat"]], num_merges=20)
    save_merges(tmp_path / "merges.txt", table)
    save_vocab(tmp_path / "vocab.txt", vocab)
    table2 = load_merges(tmp_path / "merges.txt")
    vocab2 = load_vocab(tmp_path / "vocab.txt")
    assert table2.merges == table.merges
    assert vocab2.symbols == vocab.symbols
    line = "the cat sat"
    assert encode(line, table2, vocab2) == encode(line, table, vocab)


def test_load_vocab_rejects_id_gaps(tmp_path):
    path = tmp_path / "vocab.txt"
    path.write_text("<pad>\t0\n<bos>\t1\n<eos>\t2\n<unk>\t3\na\t5\n")
    with pytest.raises(TokenizerError):
        load_vocab(path)


def test_tokenizer_cache_consistent_with_fresh_encoder():
    tok = build_tokenizer(["repeat repeat repeat unique"])
    first = tok.encode("repeat unique")
    again = tok.encode("repeat unique")  # second call hits the word cache
    assert first == again


words = st.lists(st.text(alphabet="abcde", min_size=1, max_size=6), min_size=1, max_size=8)


@given(words)
@settings(max_examples=60, deadline=None)
def test_round_trip_over_learned_character_set(train_words):
    tok = build_tokenizer([" ".join(train_words)], num_merges=30)
    # rearranged text over the same characters, so every symbol is known
    line = " ".join(w[::-1] for w in train_words)
    assert tok.decode(tok.encode(line)) == line


@given(words)
@settings(max_examples=30, deadline=None)
def test_encoding_never_emits_reserved_ids(train_words):
    tok = build_tokenizer([" ".join(train_words)], num_merges=10)
    ids = tok.encode(" ".join(train_words))
    assert PAD_ID not in ids
    assert BOS_ID not in ids
    assert EOS_ID not in ids
