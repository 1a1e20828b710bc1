"""Bundled deterministic toy translation task."""

import pytest

from arforge.toy import ToySpec, ToyTask, generate_toy_files

SPEC = ToySpec(vocab_size=20, min_len=3, max_len=9, train_pairs=50, dev_pairs=10,
               test_pairs=10, mono_lines=40)


def test_spec_validation():
    with pytest.raises(ValueError):
        ToySpec(vocab_size=1)
    with pytest.raises(ValueError):
        ToySpec(vocab_size=101)
    with pytest.raises(ValueError):
        ToySpec(min_len=5, max_len=4)
    with pytest.raises(ValueError):
        ToySpec(min_len=0)


def test_translation_reverses_and_maps_tokens():
    task = ToyTask(SPEC, seed=5)
    line = "s03 s07 s01"
    out = task.translate(line).split()
    assert len(out) == 3
    # token-by-token: position i of the output is the mapped token from
    # position -1-i of the input
    for i, word in enumerate(reversed(line.split())):
        idx = task.source_tokens.index(word)
        assert out[i] == task.target_tokens[task._map[idx]]


def test_mapping_is_a_bijection():
    task = ToyTask(SPEC, seed=5)
    assert sorted(task._map) == list(range(SPEC.vocab_size))


def test_sampled_lines_respect_length_and_vocabulary():
    task = ToyTask(SPEC, seed=7)
    lines = task._source_lines(200, "probe")
    for line in lines:
        words = line.split()
        assert SPEC.min_len <= len(words) <= SPEC.max_len
        assert all(w in task.source_tokens for w in words)


def test_sampled_lines_echo_their_phrase():
    task = ToyTask(SPEC, seed=7)
    for line in task._source_lines(300, "probe"):
        words = line.split()
        phrase_len = (len(words) + 1) // 2
        phrase = words[:phrase_len]
        assert words == (phrase + phrase)[:len(words)]


def test_phrases_follow_the_transition_graph():
    task = ToyTask(SPEC, seed=7)
    allowed = {task.source_tokens[i]: {task.source_tokens[j] for j in succ}
               for i, succ in enumerate(task._successors)}
    for line in task._source_lines(300, "probe"):
        words = line.split()
        phrase = words[:(len(words) + 1) // 2]
        for a, b in zip(phrase, phrase[1:]):
            assert b in allowed[a], f"illegal bigram {a} {b}"


def test_parallel_pairs_are_reference_translations():
    task = ToyTask(SPEC, seed=9)
    corpus = task.parallel(20, "train", "src", "tgt")
    for src, tgt in corpus.pairs():
        assert task.translate(src) == tgt


def test_task_is_seed_deterministic():
    a = ToyTask(SPEC, seed=11)._source_lines(20, "train")
    b = ToyTask(SPEC, seed=11)._source_lines(20, "train")
    c = ToyTask(SPEC, seed=12)._source_lines(20, "train")
    assert a == b
    assert a != c


def test_splits_draw_from_distinct_streams():
    task = ToyTask(SPEC, seed=11)
    train = task._source_lines(20, "train")
    dev = task._source_lines(20, "dev")
    assert train != dev


def test_generate_toy_files_layout(tmp_path):
    paths = generate_toy_files(SPEC, seed=3, out_dir=tmp_path, src_lang="aa", tgt_lang="bb")
    expected = {"train_source", "train_target", "dev_source", "dev_target",
                "test_source", "test_target", "mono_source", "mono_target"}
    assert set(paths) == expected
    counts = {"train": SPEC.train_pairs, "dev": SPEC.dev_pairs, "test": SPEC.test_pairs}
    for split, count in counts.items():
        src_lines = open(paths[f"{split}_source"], encoding="utf-8").read().splitlines()
        tgt_lines = open(paths[f"{split}_target"], encoding="utf-8").read().splitlines()
        assert len(src_lines) == len(tgt_lines) == count
    for side in ("mono_source", "mono_target"):
        lines = open(paths[side], encoding="utf-8").read().splitlines()
        assert len(lines) == SPEC.mono_lines
    # language codes flow into the file names
    assert paths["train_source"].endswith("train.aa.txt")
    assert paths["mono_target"].endswith("mono.bb.txt")


def test_generated_files_are_reproducible(tmp_path):
    a = generate_toy_files(SPEC, seed=3, out_dir=tmp_path / "a")
    b = generate_toy_files(SPEC, seed=3, out_dir=tmp_path / "b")
    for key in a:
        assert open(a[key], encoding="utf-8").read() == open(b[key], encoding="utf-8").read()
