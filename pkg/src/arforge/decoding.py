"""Greedy and beam-search decoding.

The beam engine works on a grid of rows (sentence x beam slot) against a
"stepper" that returns next-token log-probabilities for every row and can
reorder its internal state when beams are re-ranked.  The transformer
stepper keeps incremental per-layer attention caches, so each step costs
one position, not the whole prefix; a test pins its equivalence to the
full forward pass.

A hypothesis finishes only when its end-of-sentence extension ranks inside
the top of the per-step candidates, which makes beam size 1 reproduce
greedy decoding token for token.  Finished hypotheses are rescored by
log_prob / ((5 + len) / 6)^alpha and preferred over unfinished ones; only
when nothing finished within the length limit is the best unfinished
hypothesis returned.  End-of-sentence is masked at the very first step, so
a hypothesis always carries at least one token and one-sentence-per-line
corpus files keep their line count through translation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .bpe import BOS_ID, EOS_ID, PAD_ID
from .corpus import MonolingualCorpus, Origin, Provenance
from .model import TransformerModel, encode_source
from .tensor import no_grad


@dataclass(frozen=True)
class DecodeSettings:
    beam_size: int = 4
    length_alpha: float = 0.6
    max_len_factor: int = 2
    max_len_extra: int = 10
    batch_sentences: int = 64

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError(f"beam_size must be >= 1, got {self.beam_size}")
        if self.max_len_factor < 0 or self.max_len_extra < 1:
            raise ValueError("need max_len_factor >= 0 and max_len_extra >= 1")
        if self.length_alpha < 0:
            raise ValueError(f"length_alpha must be >= 0, got {self.length_alpha}")
        if self.batch_sentences < 1:
            raise ValueError(f"batch_sentences must be >= 1, got {self.batch_sentences}")

    def max_len(self, source_length: int) -> int:
        return self.max_len_factor * source_length + self.max_len_extra


def length_penalty(length: int, alpha: float) -> float:
    """((5 + len) / 6)^alpha; alpha 0 leaves raw log-probabilities."""
    return ((5.0 + length) / 6.0) ** alpha


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]
    log_prob: float
    finished: bool

    def score(self, alpha: float) -> float:
        # the end token counts toward the normalized length
        length = len(self.tokens) + (1 if self.finished else 0)
        return self.log_prob / length_penalty(max(length, 1), alpha)


class Stepper(Protocol):
    def step(self, last_tokens: np.ndarray) -> np.ndarray: ...
    def reorder(self, perm: np.ndarray) -> None: ...


def _np_norm(x, gain, bias, eps):
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / np.sqrt(var + eps) * gain + bias


def _np_softmax(x):
    if x.shape[-1] == 0:
        return x.copy()
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _np_log_softmax(x):
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


class TransformerStepper:
    """Incremental decoder state for `rows` hypotheses over a fixed memory.

    Caches per-layer self-attention keys/values for every decoded position
    and the cross-attention projections of the encoder memory, so one step
    computes only the newest position.
    """

    def __init__(self, model: TransformerModel, memory: np.ndarray, memory_mask: np.ndarray,
                 capacity: int):
        cfg = model.config
        if capacity > cfg.max_positions:
            raise ValueError(
                f"decode capacity {capacity} exceeds max_positions {cfg.max_positions}")
        self.model = model
        self.rows = memory.shape[0]
        self.heads = cfg.num_heads
        self.head_dim = cfg.model_dim // cfg.num_heads
        self.length = 0
        self.mem_mask = memory_mask  # (rows, 1, 1, T_src) additive
        p = {name: t.values for name, t in model.params.items()}
        self._p = p
        self.layers = []
        for i in range(cfg.num_layers):
            cross_k = self._project(memory, p[f"dec.{i}.cross.wk"], p[f"dec.{i}.cross.bk"])
            cross_v = self._project(memory, p[f"dec.{i}.cross.wv"], p[f"dec.{i}.cross.bv"])
            self.layers.append({
                "idx": i,
                "cross_k": cross_k,
                "cross_v": cross_v,
                "self_k": np.zeros((self.rows, self.heads, capacity, self.head_dim)),
                "self_v": np.zeros((self.rows, self.heads, capacity, self.head_dim)),
            })

    def _project(self, x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
        # (rows, T, D) -> (rows, heads, T, head_dim)
        out = x @ w + b
        r, t, _ = out.shape
        return out.reshape(r, t, self.heads, self.head_dim).transpose(0, 2, 1, 3)

    def _heads_of(self, x: np.ndarray) -> np.ndarray:
        # (rows, D) -> (rows, heads, 1, head_dim)
        return x.reshape(self.rows, self.heads, self.head_dim)[:, :, None, :]

    def step(self, last_tokens: np.ndarray) -> np.ndarray:
        """Feed one token per row; returns (rows, vocab) log-probabilities."""
        cfg = self.model.config
        p = self._p
        pos = self.length
        scale = math.sqrt(cfg.model_dim)
        x = p["tgt_embed"][last_tokens] * scale + self.model.positional_encoding()[pos]
        inv_sqrt = 1.0 / math.sqrt(self.head_dim)
        for layer in self.layers:
            i = layer["idx"]
            h = _np_norm(x, p[f"dec.{i}.norm1.gain"], p[f"dec.{i}.norm1.bias"], cfg.norm_eps)
            q = self._heads_of(h @ p[f"dec.{i}.self.wq"] + p[f"dec.{i}.self.bq"])
            k_new = h @ p[f"dec.{i}.self.wk"] + p[f"dec.{i}.self.bk"]
            v_new = h @ p[f"dec.{i}.self.wv"] + p[f"dec.{i}.self.bv"]
            layer["self_k"][:, :, pos, :] = k_new.reshape(self.rows, self.heads, self.head_dim)
            layer["self_v"][:, :, pos, :] = v_new.reshape(self.rows, self.heads, self.head_dim)
            keys = layer["self_k"][:, :, :pos + 1, :]
            values = layer["self_v"][:, :, :pos + 1, :]
            weights = _np_softmax(np.matmul(q, keys.swapaxes(-1, -2)) * inv_sqrt)
            ctx = np.matmul(weights, values)[:, :, 0, :].reshape(self.rows, -1)
            x = x + ctx @ p[f"dec.{i}.self.wo"] + p[f"dec.{i}.self.bo"]

            h = _np_norm(x, p[f"dec.{i}.norm2.gain"], p[f"dec.{i}.norm2.bias"], cfg.norm_eps)
            q = self._heads_of(h @ p[f"dec.{i}.cross.wq"] + p[f"dec.{i}.cross.bq"])
            scores = np.matmul(q, layer["cross_k"].swapaxes(-1, -2)) * inv_sqrt + self.mem_mask
            weights = _np_softmax(scores)
            ctx = np.matmul(weights, layer["cross_v"])[:, :, 0, :].reshape(self.rows, -1)
            x = x + ctx @ p[f"dec.{i}.cross.wo"] + p[f"dec.{i}.cross.bo"]

            h = _np_norm(x, p[f"dec.{i}.norm3.gain"], p[f"dec.{i}.norm3.bias"], cfg.norm_eps)
            hidden = np.maximum(h @ p[f"dec.{i}.ffn.w1"] + p[f"dec.{i}.ffn.b1"], 0.0)
            x = x + hidden @ p[f"dec.{i}.ffn.w2"] + p[f"dec.{i}.ffn.b2"]
        x = _np_norm(x, p["dec.norm.gain"], p["dec.norm.bias"], cfg.norm_eps)
        logits = x @ p["out.w"] + p["out.b"]
        self.length = pos + 1
        return _np_log_softmax(logits)

    def reorder(self, perm: np.ndarray) -> None:
        if np.array_equal(perm, np.arange(self.rows)):
            return
        self.mem_mask = self.mem_mask[perm]
        for layer in self.layers:
            layer["cross_k"] = layer["cross_k"][perm]
            layer["cross_v"] = layer["cross_v"][perm]
            layer["self_k"] = layer["self_k"][perm]
            layer["self_v"] = layer["self_v"][perm]


def _encode_for_decode(model: TransformerModel, sources: Sequence[Sequence[int]],
                       beam_size: int) -> tuple[np.ndarray, np.ndarray]:
    batch = len(sources)
    max_src = max((len(s) for s in sources), default=0)
    src = np.full((batch, max_src), PAD_ID, dtype=np.int64)
    for row, s in enumerate(sources):
        src[row, :len(s)] = s
    with no_grad():
        memory, mask = encode_source(model, src)
    return np.repeat(memory.values, beam_size, axis=0), np.repeat(mask, beam_size, axis=0)


def beam_search(stepper: Stepper, beam_size: int, vocab_size: int, max_lens: Sequence[int],
                length_alpha: float) -> list[list[Hypothesis]]:
    """Run the beam over `len(max_lens)` sentences sharing one stepper.

    Row layout is sentence-major: rows [s * beam_size, (s + 1) * beam_size)
    belong to sentence s.  Returns, per sentence, the surviving hypotheses
    sorted best first under the length-normalized score (finished ones
    first).  Ties break toward earlier discovery, so beam size 1 equals
    greedy decoding exactly.
    """
    num_sentences = len(max_lens)
    if any(m < 1 for m in max_lens):
        raise ValueError("every max_len must be >= 1")
    k = beam_size
    rows = num_sentences * k
    horizon = max(max_lens)
    tokens = np.full((rows, horizon), PAD_ID, dtype=np.int64)
    cum = np.full(rows, -np.inf)
    cum[np.arange(num_sentences) * k] = 0.0
    live = [1] * num_sentences
    finished: list[list[Hypothesis]] = [[] for _ in range(num_sentences)]
    done = [False] * num_sentences
    last = np.full(rows, PAD_ID, dtype=np.int64)
    last[np.arange(num_sentences) * k] = BOS_ID

    for t in range(horizon + 1):
        for s in range(num_sentences):
            if not done[s] and t >= max_lens[s]:
                # out of length budget: keep the best unfinished hypothesis
                # only if nothing finished earlier
                if not finished[s] and live[s] > 0:
                    base = s * k
                    best = max(range(live[s]), key=lambda j: (cum[base + j], -j))
                    finished[s].append(Hypothesis(tuple(tokens[base + best, :t]),
                                                  float(cum[base + best]), False))
                done[s] = True
        if all(done):
            break
        log_probs = stepper.step(last)
        if t == 0:
            # an empty hypothesis is never a translation
            log_probs[:, EOS_ID] = -np.inf
        perm = np.arange(rows)
        new_cum = np.full(rows, -np.inf)
        new_last = np.full(rows, PAD_ID, dtype=np.int64)
        filled = np.zeros(rows, dtype=bool)
        for s in range(num_sentences):
            if done[s]:
                continue
            base = s * k
            lk = live[s]
            open_slots = k - len(finished[s])
            cand = cum[base:base + lk, None] + log_probs[base:base + lk, :]
            flat = cand.ravel()
            take = min(open_slots, flat.size)
            hyp_idx = np.repeat(np.arange(lk), vocab_size)
            tok_idx = np.tile(np.arange(vocab_size), lk)
            order = np.lexsort((tok_idx, hyp_idx, -flat))[:take]
            placed = 0
            for c in order:
                h, tok, score = int(hyp_idx[c]), int(tok_idx[c]), float(flat[c])
                if tok == EOS_ID:
                    finished[s].append(
                        Hypothesis(tuple(tokens[base + h, :t]), score, True))
                else:
                    row = base + placed
                    perm[row] = base + h
                    new_cum[row] = score
                    new_last[row] = tok
                    filled[row] = True
                    placed += 1
            live[s] = placed
            if placed == 0:
                # every open slot finished; nothing left to extend
                done[s] = True
        tokens = tokens[perm]
        tokens[filled, t] = new_last[filled]
        cum = new_cum
        last = new_last
        stepper.reorder(perm)

    results = []
    for s in range(num_sentences):
        ranked = sorted(
            finished[s],
            key=lambda hyp: (not hyp.finished, -hyp.score(length_alpha)),
        )
        results.append(ranked)
    return results


def _clamped_max_len(model: TransformerModel, source_len: int, settings: DecodeSettings,
                     max_len: int | None) -> int:
    limit = max_len if max_len is not None else settings.max_len(source_len)
    return max(1, min(limit, model.config.max_positions - 1))


def beam_decode_batch(model: TransformerModel, sources: Sequence[Sequence[int]],
                      settings: DecodeSettings,
                      max_lens: Sequence[int] | None = None) -> list[list[int]]:
    """Beam-decode a batch of token-id sources; returns stripped token ids
    (no bos/eos) per sentence, best hypothesis first."""
    if not sources:
        return []
    if max_lens is None:
        max_lens = [_clamped_max_len(model, len(s), settings, None) for s in sources]
    else:
        max_lens = [_clamped_max_len(model, len(s), settings, m)
                    for s, m in zip(sources, max_lens)]
    memory, mask = _encode_for_decode(model, sources, settings.beam_size)
    stepper = TransformerStepper(model, memory, mask, max(max_lens) + 1)
    hyps = beam_search(stepper, settings.beam_size, model.tgt_vocab_size, max_lens,
                       settings.length_alpha)
    return [list(h[0].tokens) for h in hyps]


def beam_decode(model: TransformerModel, source: Sequence[int], beam_size: int = 4,
                length_alpha: float = 0.6, max_len: int | None = None) -> list[int]:
    """Best translation of one source under beam search."""
    settings = DecodeSettings(beam_size=beam_size, length_alpha=length_alpha)
    return beam_decode_batch(model, [list(source)], settings,
                             max_lens=None if max_len is None else [max_len])[0]


def greedy_decode(model: TransformerModel, source: Sequence[int],
                  max_len: int | None = None) -> list[int]:
    """Argmax decoding (ties toward the lowest token id); stops at eos, but
    never before emitting at least one token."""
    settings = DecodeSettings(beam_size=1)
    limit = _clamped_max_len(model, len(source), settings, max_len)
    memory, mask = _encode_for_decode(model, [list(source)], 1)
    stepper = TransformerStepper(model, memory, mask, limit + 1)
    tokens: list[int] = []
    last = np.array([BOS_ID], dtype=np.int64)
    for _ in range(limit):
        log_probs = stepper.step(last)
        if not tokens:
            log_probs[0, EOS_ID] = -np.inf
        token = int(np.argmax(log_probs[0]))
        if token == EOS_ID:
            break
        tokens.append(token)
        last = np.array([token], dtype=np.int64)
    return tokens


def translate_corpus(model: TransformerModel, corpus: MonolingualCorpus, tokenizer,
                     settings: DecodeSettings, out_language: str,
                     provenance: Provenance = Provenance.SYNTHETIC) -> MonolingualCorpus:
    """Translate every line, preserving order and count.

    Sentences are grouped by tokenized length into decode batches so the
    beam grid wastes little work; results are restored to input order.
    """
    ids = [tokenizer.encode(line) for line in corpus.lines]
    order = sorted(range(len(ids)), key=lambda i: len(ids[i]))
    outputs: list[list[int] | None] = [None] * len(ids)
    for start in range(0, len(order), settings.batch_sentences):
        chunk = order[start:start + settings.batch_sentences]
        decoded = beam_decode_batch(model, [ids[i] for i in chunk], settings)
        for i, out in zip(chunk, decoded):
            outputs[i] = out
    lines = [tokenizer.decode(out) for out in outputs]
    return MonolingualCorpus(lines, out_language, provenance, corpus.origin)
