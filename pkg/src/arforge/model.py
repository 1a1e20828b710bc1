"""Encoder-decoder translation model (self-attention, float64, numpy).

Pre-norm residual blocks with a final layer norm per stack, sinusoidal
position encodings, shared joint vocabulary, untied embeddings, and a
label-smoothed cross-entropy training loss.  The desk-scale defaults (2
layers, width 64) are what this package actually trains; the full-scale
configuration is kept only as documentation of the modeled setup.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .bpe import BOS_ID, EOS_ID, PAD_ID
from .checkpoint import load_config_sidecar, load_tensors, save_config_sidecar, save_tensors
from .rng import SplitMix64, derive_seed
from .tensor import (Tensor, add, embedding_lookup, layer_norm, make_node, matmul, mul,
                     relu, reshape, scale, softmax, transpose)

MASK_VALUE = -1e9


@dataclass(frozen=True)
class ModelConfig:
    num_layers: int = 2
    model_dim: int = 64
    num_heads: int = 4
    ffn_dim: int = 128
    dropout: float = 0.1
    label_smoothing: float = 0.1
    max_positions: int = 128
    shared_vocab: bool = True
    norm_eps: float = 1e-6

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.model_dim < 1 or self.num_heads < 1 or self.ffn_dim < 1:
            raise ValueError("model_dim, num_heads and ffn_dim must be >= 1")
        if self.model_dim % self.num_heads != 0:
            raise ValueError(
                f"model_dim {self.model_dim} not divisible by num_heads {self.num_heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError(f"label_smoothing must lie in [0, 1), got {self.label_smoothing}")
        if self.max_positions < 1:
            raise ValueError(f"max_positions must be >= 1, got {self.max_positions}")


DESK_SCALE = ModelConfig()
# documented full-scale setup; never trained by this package
FULL_SCALE = ModelConfig(num_layers=6, model_dim=512, num_heads=8, ffn_dim=2048,
                         max_positions=1024)


class ModelRole(str, Enum):
    S2T = "s2t"  # source language -> target language
    T2S = "t2s"  # target language -> source language
    S2S = "s2s"  # source-language repair (noisy -> clean)
    T2T = "t2t"  # target-language repair (noisy -> clean)


def sinusoid_table(max_positions: int, dim: int) -> np.ndarray:
    """Fixed position encodings: interleaved sin/cos over geometric frequencies."""
    pos = np.arange(max_positions, dtype=np.float64)[:, None]
    idx = np.arange(dim, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, (2.0 * np.floor(idx / 2.0)) / dim)
    return np.where(idx % 2 == 0, np.sin(angle), np.cos(angle))


class TransformerModel:
    def __init__(self, config: ModelConfig, src_vocab_size: int, tgt_vocab_size: int,
                 role: ModelRole, params: dict[str, Tensor]):
        if config.shared_vocab and src_vocab_size != tgt_vocab_size:
            raise ValueError(
                f"shared_vocab set but vocab sizes differ: {src_vocab_size} vs {tgt_vocab_size}")
        self.config = config
        self.src_vocab_size = src_vocab_size
        self.tgt_vocab_size = tgt_vocab_size
        self.role = role
        self.params = params
        self._pe: np.ndarray | None = None

    def param(self, name: str) -> Tensor:
        return self.params[name]

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return list(self.params.items())

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def positional_encoding(self) -> np.ndarray:
        if self._pe is None:
            self._pe = sinusoid_table(self.config.max_positions, self.config.model_dim)
        return self._pe

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.values.copy() for name, p in self.params.items()}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            p.values[...] = snapshot[name]


def _attention_param_names(prefix: str) -> list[tuple[str, str]]:
    return [(f"{prefix}.w{x}", f"{prefix}.b{x}") for x in ("q", "k", "v", "o")]


def init_model(config: ModelConfig, src_vocab_size: int, tgt_vocab_size: int,
               role: ModelRole, seed: int) -> TransformerModel:
    """Fresh model with scaled-uniform parameters from the given seed.

    Weight matrices draw from U(-a, a) with a = sqrt(6 / (fan_in +
    fan_out)), embeddings from U(-sqrt(3/dim), sqrt(3/dim)); biases start
    at zero, norm gains at one.  Parameter creation order is fixed, so the
    same seed always produces bit-identical parameters.
    """
    rng = SplitMix64(derive_seed(seed, f"init/{role.value}"))
    d, f = config.model_dim, config.ffn_dim
    params: dict[str, Tensor] = {}

    def matrix(name, rows, cols):
        limit = math.sqrt(6.0 / (rows + cols))
        params[name] = Tensor(rng.uniform(-limit, limit, (rows, cols)), requires_grad=True)

    def bias(name, size):
        params[name] = Tensor(np.zeros(size), requires_grad=True)

    def norm(prefix):
        params[f"{prefix}.gain"] = Tensor(np.ones(d), requires_grad=True)
        params[f"{prefix}.bias"] = Tensor(np.zeros(d), requires_grad=True)

    def attention(prefix):
        for w_name, b_name in _attention_param_names(prefix):
            matrix(w_name, d, d)
            bias(b_name, d)

    def ffn(prefix):
        matrix(f"{prefix}.w1", d, f)
        bias(f"{prefix}.b1", f)
        matrix(f"{prefix}.w2", f, d)
        bias(f"{prefix}.b2", d)

    embed_limit = math.sqrt(3.0 / d)
    params["src_embed"] = Tensor(rng.uniform(-embed_limit, embed_limit, (src_vocab_size, d)),
                                 requires_grad=True)
    params["tgt_embed"] = Tensor(rng.uniform(-embed_limit, embed_limit, (tgt_vocab_size, d)),
                                 requires_grad=True)
    for i in range(config.num_layers):
        norm(f"enc.{i}.norm1")
        attention(f"enc.{i}.attn")
        norm(f"enc.{i}.norm2")
        ffn(f"enc.{i}.ffn")
    norm("enc.norm")
    for i in range(config.num_layers):
        norm(f"dec.{i}.norm1")
        attention(f"dec.{i}.self")
        norm(f"dec.{i}.norm2")
        attention(f"dec.{i}.cross")
        norm(f"dec.{i}.norm3")
        ffn(f"dec.{i}.ffn")
    norm("dec.norm")
    matrix("out.w", d, tgt_vocab_size)
    bias("out.b", tgt_vocab_size)
    return TransformerModel(config, src_vocab_size, tgt_vocab_size, role, params)


def _dropout(x: Tensor, rate: float, rng: SplitMix64 | None) -> Tensor:
    """Inverted dropout; identity when no rng is supplied (inference)."""
    if rng is None or rate <= 0.0:
        return x
    keep = (rng.next_floats(x.size) >= rate).astype(np.float64).reshape(x.shape)
    return mul(x, Tensor(keep / (1.0 - rate)))


def key_padding_mask(ids: np.ndarray) -> np.ndarray:
    """(B, 1, 1, T) additive mask hiding pad positions from attention keys."""
    return np.where(ids == PAD_ID, MASK_VALUE, 0.0)[:, None, None, :]


def causal_mask(length: int) -> np.ndarray:
    """(1, 1, T, T) additive mask hiding future positions."""
    upper = np.triu(np.full((length, length), MASK_VALUE), k=1)
    return upper[None, None, :, :]


def _split_heads(x: Tensor, heads: int) -> Tensor:
    b, t, d = x.shape
    return transpose(reshape(x, (b, t, heads, d // heads)), (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    b, h, t, dh = x.shape
    return reshape(transpose(x, (0, 2, 1, 3)), (b, t, h * dh))


def _attention(model: TransformerModel, prefix: str, x_query: Tensor, x_keys: Tensor,
               mask: np.ndarray | None, rng: SplitMix64 | None) -> Tensor:
    cfg = model.config
    head_dim = cfg.model_dim // cfg.num_heads
    q = _split_heads(add(matmul(x_query, model.param(f"{prefix}.wq")),
                         model.param(f"{prefix}.bq")), cfg.num_heads)
    k = _split_heads(add(matmul(x_keys, model.param(f"{prefix}.wk")),
                         model.param(f"{prefix}.bk")), cfg.num_heads)
    v = _split_heads(add(matmul(x_keys, model.param(f"{prefix}.wv")),
                         model.param(f"{prefix}.bv")), cfg.num_heads)
    scores = scale(matmul(q, transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(head_dim))
    if mask is not None:
        scores = add(scores, Tensor(mask))
    weights = _dropout(softmax(scores), cfg.dropout, rng)
    ctx = _merge_heads(matmul(weights, v))
    return add(matmul(ctx, model.param(f"{prefix}.wo")), model.param(f"{prefix}.bo"))


def _ffn(model: TransformerModel, prefix: str, x: Tensor) -> Tensor:
    hidden = relu(add(matmul(x, model.param(f"{prefix}.w1")), model.param(f"{prefix}.b1")))
    return add(matmul(hidden, model.param(f"{prefix}.w2")), model.param(f"{prefix}.b2"))


def _norm(model: TransformerModel, prefix: str, x: Tensor) -> Tensor:
    return layer_norm(x, model.param(f"{prefix}.gain"), model.param(f"{prefix}.bias"),
                      eps=model.config.norm_eps)


def _embed(model: TransformerModel, table_name: str, ids: np.ndarray, offset: int,
           rng: SplitMix64 | None) -> Tensor:
    cfg = model.config
    length = ids.shape[1]
    if offset + length > cfg.max_positions:
        raise ValueError(
            f"sequence length {offset + length} exceeds max_positions {cfg.max_positions}")
    x = scale(embedding_lookup(model.param(table_name), ids), math.sqrt(cfg.model_dim))
    pe = model.positional_encoding()[offset:offset + length][None, :, :]
    return _dropout(add(x, Tensor(pe)), cfg.dropout, rng)


def encode_source(model: TransformerModel, src_ids: np.ndarray,
                  dropout_rng: SplitMix64 | None = None) -> tuple[Tensor, np.ndarray]:
    """Run the encoder stack; returns (memory, additive source key mask)."""
    src_ids = np.asarray(src_ids)
    mask = key_padding_mask(src_ids)
    x = _embed(model, "src_embed", src_ids, 0, dropout_rng)
    cfg = model.config
    for i in range(cfg.num_layers):
        normed = _norm(model, f"enc.{i}.norm1", x)
        x = add(x, _dropout(_attention(model, f"enc.{i}.attn", normed, normed, mask, dropout_rng),
                            cfg.dropout, dropout_rng))
        x = add(x, _dropout(_ffn(model, f"enc.{i}.ffn", _norm(model, f"enc.{i}.norm2", x)),
                            cfg.dropout, dropout_rng))
    return _norm(model, "enc.norm", x), mask


def decode_states(model: TransformerModel, memory: Tensor, memory_mask: np.ndarray,
                  tgt_prefix: np.ndarray, dropout_rng: SplitMix64 | None = None) -> Tensor:
    """Decoder stack over a full target prefix with causal masking."""
    tgt_prefix = np.asarray(tgt_prefix)
    length = tgt_prefix.shape[1]
    self_mask = causal_mask(length) + key_padding_mask(tgt_prefix)
    x = _embed(model, "tgt_embed", tgt_prefix, 0, dropout_rng)
    cfg = model.config
    for i in range(cfg.num_layers):
        normed = _norm(model, f"dec.{i}.norm1", x)
        x = add(x, _dropout(_attention(model, f"dec.{i}.self", normed, normed, self_mask,
                                       dropout_rng), cfg.dropout, dropout_rng))
        normed = _norm(model, f"dec.{i}.norm2", x)
        x = add(x, _dropout(_attention(model, f"dec.{i}.cross", normed, memory, memory_mask,
                                       dropout_rng), cfg.dropout, dropout_rng))
        x = add(x, _dropout(_ffn(model, f"dec.{i}.ffn", _norm(model, f"dec.{i}.norm3", x)),
                            cfg.dropout, dropout_rng))
    return _norm(model, "dec.norm", x)


def output_logits(model: TransformerModel, decoder_states: Tensor) -> Tensor:
    return add(matmul(decoder_states, model.param("out.w")), model.param("out.b"))


def forward_logits(model: TransformerModel, src_ids: np.ndarray, tgt_prefix: np.ndarray,
                   dropout_rng: SplitMix64 | None = None) -> Tensor:
    """Teacher-forced logits (batch, prefix_len, tgt_vocab).

    `tgt_prefix` must start with bos in every row; pad with pad-id on the
    right.  Pass a dropout rng only during training.
    """
    tgt_prefix = np.asarray(tgt_prefix)
    if tgt_prefix.ndim != 2 or tgt_prefix.shape[1] < 1:
        raise ValueError(f"target prefix must be (batch, >=1), got {tgt_prefix.shape}")
    if not np.all(tgt_prefix[:, 0] == BOS_ID):
        raise ValueError("every target prefix must begin with the bos token")
    memory, memory_mask = encode_source(model, src_ids, dropout_rng)
    states = decode_states(model, memory, memory_mask, tgt_prefix, dropout_rng)
    return output_logits(model, states)


def smoothed_targets(gold: np.ndarray, vocab_size: int, smoothing: float) -> np.ndarray:
    """Distribution with 1 - eps on the gold id and eps/(V-1) elsewhere."""
    if vocab_size < 2:
        raise ValueError(f"need vocab_size >= 2, got {vocab_size}")
    q = np.full(gold.shape + (vocab_size,), smoothing / (vocab_size - 1))
    np.put_along_axis(q, gold[..., None], 1.0 - smoothing, axis=-1)
    return q


def label_smoothed_loss(logits: Tensor, gold: np.ndarray, smoothing: float,
                        token_mask: np.ndarray) -> Tensor:
    """Mean smoothed cross-entropy over unmasked positions (fused graph node).

    grad wrt logits is (softmax - smoothed_targets) * mask / n_tokens.
    """
    if not 0.0 <= smoothing < 1.0:
        raise ValueError(f"smoothing must lie in [0, 1), got {smoothing}")
    gold = np.asarray(gold)
    token_mask = np.asarray(token_mask, dtype=bool)
    if logits.shape[:-1] != gold.shape or gold.shape != token_mask.shape:
        raise ValueError(
            f"mismatched shapes: logits {logits.shape}, gold {gold.shape}, "
            f"mask {token_mask.shape}")
    vocab = logits.shape[-1]
    if vocab < 2:
        raise ValueError(f"need at least 2 vocabulary entries, got {vocab}")
    n_tokens = int(token_mask.sum())
    if n_tokens == 0:
        raise ValueError("empty batch: every position is masked as padding")

    x = logits.values
    x_max = x.max(axis=-1, keepdims=True)
    with np.errstate(over="ignore", under="ignore"):
        log_z = x_max + np.log(np.exp(x - x_max).sum(axis=-1, keepdims=True))
    log_probs = x - log_z
    gold_lp = np.take_along_axis(log_probs, gold[..., None], axis=-1)[..., 0]
    rest_lp = log_probs.sum(axis=-1) - gold_lp
    per_token = -((1.0 - smoothing) * gold_lp + (smoothing / (vocab - 1)) * rest_lp)
    loss = (per_token * token_mask).sum() / n_tokens

    def vjp(g):
        probs = np.exp(log_probs)
        diff = probs - smoothed_targets(gold, vocab, smoothing)
        return (diff * token_mask[..., None] * (g.reshape(()) / n_tokens),)

    return make_node(np.asarray(loss), (logits,), vjp)


def make_training_batch(pairs: list[tuple[list[int], list[int]]]) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Pad a batch of token-id pairs into teacher-forcing arrays.

    Returns (src, decoder_input, gold, token_mask): decoder input is
    bos + target, gold is target + eos, both padded to the longest target
    plus one; the mask marks real (non-pad) gold positions.
    """
    if not pairs:
        raise ValueError("cannot build an empty batch")
    batch = len(pairs)
    max_src = max(len(s) for s, _ in pairs)
    max_tgt = max(len(t) for _, t in pairs) + 1
    src = np.full((batch, max_src), PAD_ID, dtype=np.int64)
    dec_in = np.full((batch, max_tgt), PAD_ID, dtype=np.int64)
    gold = np.full((batch, max_tgt), PAD_ID, dtype=np.int64)
    mask = np.zeros((batch, max_tgt), dtype=bool)
    for row, (s, t) in enumerate(pairs):
        src[row, :len(s)] = s
        dec_in[row, 0] = BOS_ID
        dec_in[row, 1:len(t) + 1] = t
        gold[row, :len(t)] = t
        gold[row, len(t)] = EOS_ID
        mask[row, :len(t) + 1] = True
    return src, dec_in, gold, mask


_SIDECAR_FIELDS = ("num_layers", "model_dim", "num_heads", "ffn_dim", "dropout",
                   "label_smoothing", "max_positions", "shared_vocab", "norm_eps")


def save_model(model: TransformerModel, prefix: str | os.PathLike) -> None:
    save_tensors(prefix, model.params)
    fields: dict[str, object] = {
        "role": model.role.value,
        "src_vocab_size": model.src_vocab_size,
        "tgt_vocab_size": model.tgt_vocab_size,
    }
    for name in _SIDECAR_FIELDS:
        fields[name] = getattr(model.config, name)
    save_config_sidecar(f"{prefix}.config", fields)


def load_model(prefix: str | os.PathLike) -> TransformerModel:
    raw = load_config_sidecar(f"{prefix}.config")
    config = ModelConfig(
        num_layers=int(raw["num_layers"]),
        model_dim=int(raw["model_dim"]),
        num_heads=int(raw["num_heads"]),
        ffn_dim=int(raw["ffn_dim"]),
        dropout=float(raw["dropout"]),
        label_smoothing=float(raw["label_smoothing"]),
        max_positions=int(raw["max_positions"]),
        shared_vocab=raw["shared_vocab"] == "True",
        norm_eps=float(raw["norm_eps"]),
    )
    arrays = load_tensors(prefix)
    params = {name: Tensor(values, requires_grad=True) for name, values in arrays.items()}
    return TransformerModel(config, int(raw["src_vocab_size"]), int(raw["tgt_vocab_size"]),
                            ModelRole(raw["role"]), params)
