"""Decoding: length penalty, beam search vs brute force, incremental stepper."""

import itertools
import math

import numpy as np
import pytest

from arforge.bpe import BOS_ID, EOS_ID, PAD_ID
from arforge.corpus import MonolingualCorpus, Origin, Provenance
from arforge.decoding import (DecodeSettings, Hypothesis, TransformerStepper,
                              beam_decode, beam_decode_batch, beam_search,
                              greedy_decode, length_penalty, translate_corpus)
from arforge.model import ModelConfig, ModelRole, encode_source, forward_logits, init_model
from arforge.rng import SplitMix64
from arforge.tensor import no_grad

CFG = ModelConfig(num_layers=2, model_dim=16, num_heads=2, ffn_dim=16, dropout=0.0)
VOCAB = 23


def small_model(seed=0):
    return init_model(CFG, VOCAB, VOCAB, ModelRole.S2T, seed=seed)


# -- scoring -------------------------------------------------------------------


def test_length_penalty_values():
    assert length_penalty(1, 0.0) == 1.0
    assert length_penalty(7, 0.6) == pytest.approx(((5 + 7) / 6) ** 0.6)


def test_finished_hypothesis_counts_end_token_in_length():
    unfinished = Hypothesis((5, 6), -1.0, finished=False)
    finished = Hypothesis((5, 6), -1.0, finished=True)
    assert unfinished.score(1.0) == pytest.approx(-1.0 / length_penalty(2, 1.0))
    assert finished.score(1.0) == pytest.approx(-1.0 / length_penalty(3, 1.0))


def test_settings_validation_and_max_len():
    with pytest.raises(ValueError):
        DecodeSettings(beam_size=0)
    with pytest.raises(ValueError):
        DecodeSettings(length_alpha=-1.0)
    assert DecodeSettings(max_len_factor=2, max_len_extra=10).max_len(7) == 24


# -- beam = 1 degenerates to greedy ------------------------------------------------


def test_beam_one_equals_greedy_on_seeded_sources():
    rng = SplitMix64(404)
    for trial in range(50):
        model = small_model(seed=trial % 5)
        length = 1 + rng.next_below(8)
        src = [4 + rng.next_below(VOCAB - 4) for _ in range(length)]
        assert beam_decode(model, src, beam_size=1, length_alpha=0.6) == \
            greedy_decode(model, src)


# -- exhaustive beam vs brute force on a fixed two-step table -----------------------


class TableStepper:
    """Markov toy model: step log-probs depend only on the previous token."""

    def __init__(self, tables):
        self.tables = tables  # per-step (vocab, vocab) log-prob matrices
        self.t = 0

    def step(self, last_tokens):
        out = self.tables[self.t][np.asarray(last_tokens)]
        self.t += 1
        return out

    def reorder(self, perm):
        pass  # no per-row state beyond what the caller feeds back in


def normalized_random_tables(vocab, steps, seed):
    rng = SplitMix64(seed)
    tables = []
    for _ in range(steps):
        raw = rng.uniform(-4.0, 0.0, (vocab, vocab))
        tables.append(raw - np.log(np.exp(raw).sum(axis=1, keepdims=True)))
    return tables


def brute_force_best(tables, vocab, max_len, alpha):
    """Enumerate every decode the search could produce and rank identically.

    Length starts at one: the search never finishes on the first step."""
    candidates = []
    for length in range(1, max_len + 1):
        for seq in itertools.product([t for t in range(vocab) if t != EOS_ID], repeat=length):
            prev = BOS_ID
            cum = 0.0
            for i, tok in enumerate(seq):
                cum += tables[i][prev][tok]
                prev = tok
            if length < max_len:
                candidates.append(Hypothesis(seq, cum + tables[length][prev][EOS_ID], True))
            elif seq:
                candidates.append(Hypothesis(seq, cum, False))
    finished = [h for h in candidates if h.finished]
    pool = finished if finished else candidates
    return max(pool, key=lambda h: h.score(alpha))


@pytest.mark.parametrize("alpha", [0.0, 0.6])
def test_wide_beam_matches_brute_force(alpha):
    vocab, max_len = 6, 2
    tables = normalized_random_tables(vocab, max_len + 1, seed=31)
    best = brute_force_best(tables, vocab, max_len, alpha)
    # beam as wide as the vocabulary (the acceptance setting)
    hyp = beam_search(TableStepper(tables), vocab, vocab, [max_len], alpha)[0][0]
    assert hyp.tokens == best.tokens
    assert hyp.log_prob == pytest.approx(best.log_prob, abs=1e-12)
    # and an exhaustive beam, which cannot prune at this horizon
    hyp = beam_search(TableStepper(tables), 2 * vocab * vocab, vocab, [max_len], alpha)[0][0]
    assert hyp.tokens == best.tokens


def test_wide_beam_matches_brute_force_across_seeds():
    vocab, max_len = 5, 2
    for seed in range(40, 60):
        tables = normalized_random_tables(vocab, max_len + 1, seed=seed)
        best = brute_force_best(tables, vocab, max_len, 0.0)
        hyp = beam_search(TableStepper(tables), 2 * vocab * vocab, vocab, [max_len], 0.0)[0][0]
        assert hyp.tokens == best.tokens, f"seed {seed}"


def test_beam_score_is_sum_of_step_log_probs():
    vocab = 6
    tables = normalized_random_tables(vocab, 4, seed=77)
    hyp = beam_search(TableStepper(tables), 3, vocab, [3], 0.0)[0][0]
    prev, cum = BOS_ID, 0.0
    for i, tok in enumerate(hyp.tokens):
        cum += tables[i][prev][tok]
        prev = tok
    if hyp.finished:
        cum += tables[len(hyp.tokens)][prev][EOS_ID]
    assert hyp.log_prob == pytest.approx(cum, abs=1e-12)


def test_hypotheses_never_come_back_empty():
    vocab = 5
    tables = normalized_random_tables(vocab, 2, seed=3)
    for t in range(2):
        tables[t] = tables[t].copy()
        tables[t][:, EOS_ID] = 5.0  # eos dominates every step
    # out of budget after one step: the single-token hypothesis survives
    hyps = beam_search(TableStepper(tables), 3, vocab, [1], 0.6)[0]
    assert len(hyps[0].tokens) == 1
    assert not hyps[0].finished
    # with room to spare, eos may close the hypothesis from step two on
    hyps = beam_search(TableStepper(tables), 3, vocab, [2], 0.6)[0]
    assert len(hyps[0].tokens) == 1
    assert hyps[0].finished


def test_finished_hypotheses_rank_before_unfinished():
    vocab = 5
    tables = normalized_random_tables(vocab, 3, seed=9)
    for hyps in beam_search(TableStepper(tables), 4, vocab, [2], 0.6):
        seen_unfinished = False
        for h in hyps:
            if not h.finished:
                seen_unfinished = True
            else:
                assert not seen_unfinished


def test_beam_rejects_nonpositive_max_len():
    with pytest.raises(ValueError):
        beam_search(TableStepper(normalized_random_tables(5, 1, 0)), 2, 5, [0], 0.6)


# -- incremental stepper equals the teacher-forced decoder --------------------------


def test_stepper_matches_full_forward_log_probs():
    model = small_model(seed=8)
    src = np.array([[4, 5, 6, 7]])
    prefix = [BOS_ID, 9, 10, 11, 12]
    full = forward_logits(model, src, np.array([prefix])).values[0]
    full_lp = full - np.log(np.exp(full - full.max(-1, keepdims=True)).sum(-1, keepdims=True)) \
        - full.max(-1, keepdims=True)

    with no_grad():
        memory, mask = encode_source(model, src)
    stepper = TransformerStepper(model, memory.values, mask, capacity=len(prefix))
    for pos, token in enumerate(prefix):
        step_lp = stepper.step(np.array([token]))
        assert np.allclose(step_lp[0], full_lp[pos], atol=1e-10), f"position {pos}"


def test_stepper_reorder_copies_row_history():
    model = small_model(seed=9)
    src = np.array([[4, 5], [6, 7]])
    with no_grad():
        memory, mask = encode_source(model, src)
    stepper = TransformerStepper(model, memory.values, mask, capacity=4)
    stepper.step(np.array([BOS_ID, BOS_ID]))
    stepper.reorder(np.array([1, 1]))  # both rows continue sentence 1's history
    out = stepper.step(np.array([9, 9]))
    assert np.allclose(out[0], out[1], atol=1e-12)


def test_stepper_capacity_is_validated():
    model = small_model()
    src = np.array([[4]])
    with no_grad():
        memory, mask = encode_source(model, src)
    with pytest.raises(ValueError, match="capacity"):
        TransformerStepper(model, memory.values, mask, capacity=CFG.max_positions + 1)


# -- batch entry points ---------------------------------------------------------------


def test_beam_decode_batch_empty_input():
    assert beam_decode_batch(small_model(), [], DecodeSettings()) == []


def test_beam_decode_respects_max_len():
    model = small_model(seed=2)
    out = beam_decode(model, [4, 5, 6], beam_size=2, max_len=1)
    assert len(out) <= 1


def test_batch_decoding_matches_single_sentence_decoding():
    model = small_model(seed=6)
    sources = [[4, 5, 6], [7], [8, 9, 10, 11], [12, 13]]
    settings = DecodeSettings(beam_size=3, length_alpha=0.6)
    batched = beam_decode_batch(model, sources, settings)
    for src, got in zip(sources, batched):
        assert got == beam_decode(model, src, beam_size=3, length_alpha=0.6)


def test_translate_corpus_preserves_order_and_metadata():
    model = small_model(seed=1)

    class WordTokenizer:
        def encode(self, line):
            return [4 + (hash(w) % (VOCAB - 4)) for w in line.split()]

        def decode(self, ids):
            return " ".join(f"w{i}" for i in ids)

    corpus = MonolingualCorpus(["a b c", "d", "e f g h i", "j k"], "src",
                               Provenance.AUTHENTIC, Origin.MONOLINGUAL)
    settings = DecodeSettings(beam_size=2, batch_sentences=2)
    out = translate_corpus(model, corpus, WordTokenizer(), settings, "tgt")
    assert len(out) == len(corpus)
    assert out.language == "tgt"
    assert out.provenance is Provenance.SYNTHETIC
    assert out.origin is Origin.MONOLINGUAL
    # grouping by length must not permute the output
    again = translate_corpus(model, corpus, WordTokenizer(), settings, "tgt")
    assert out.lines == again.lines
    singles = [translate_corpus(model, MonolingualCorpus([line], "src"), WordTokenizer(),
                                settings, "tgt").lines[0] for line in corpus.lines]
    assert out.lines == singles
