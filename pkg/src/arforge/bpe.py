"""Joint byte-pair-encoding subword tokenizer.

Learning greedily merges the most frequent adjacent symbol pair over the
word frequencies of all supplied corpora together (one shared merge table
and vocabulary for both languages); ties break on the lexicographically
smaller pair.  Words start as their characters plus a separate end-of-word
marker symbol, which later merges may absorb, so fully merged words carry
the marker inside their final token.  Encoding replays merges in learned
order; decoding concatenates symbols and turns the marker back into word
boundaries, which makes decode(encode(s)) == s for any single-spaced
sentence over the learned character set as long as nothing was evicted by
the vocabulary cap.
"""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

END_OF_WORD = "</w>"

PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3
RESERVED_SYMBOLS = ("<pad>", "<bos>", "<eos>", "<unk>")

# Full-scale settings from the experiments this tool models, kept as
# documentation only; the desk-scale defaults below are what actually runs.
FULL_SCALE_NUM_MERGES = {"large": 32000, "small": 10000}
FULL_SCALE_VOCAB_CAP = {"large": 30000, "small": 10000}
DESK_NUM_MERGES = 300
DESK_VOCAB_CAP = 1000


class TokenizerError(ValueError):
    pass


@dataclass(frozen=True)
class MergeTable:
    """Ordered merge pairs; earlier entries have higher priority."""

    merges: tuple[tuple[str, str], ...]

    def __len__(self) -> int:
        return len(self.merges)

    def ranks(self) -> dict[tuple[str, str], int]:
        return {pair: rank for rank, pair in enumerate(self.merges)}


@dataclass
class Vocabulary:
    """Symbol <-> id with the four reserved ids first: pad, bos, eos, unk."""

    symbols: list[str]
    id_of: dict[str, int] = field(init=False)

    def __post_init__(self):
        if tuple(self.symbols[:4]) != RESERVED_SYMBOLS:
            raise TokenizerError(f"vocabulary must start with {RESERVED_SYMBOLS}")
        self.id_of = {}
        for i, sym in enumerate(self.symbols):
            if sym in self.id_of:
                raise TokenizerError(f"duplicate symbol {sym!r}")
            self.id_of[sym] = i

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self.id_of

    def id(self, symbol: str) -> int:
        return self.id_of.get(symbol, UNK_ID)

    def symbol(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.symbols):
            raise TokenizerError(f"token id {token_id} outside [0, {len(self.symbols)})")
        return self.symbols[token_id]


def _word_start(word: str) -> tuple[str, ...]:
    return tuple(word) + (END_OF_WORD,)


def _count_pairs(word_freq: dict[tuple[str, ...], int]) -> Counter:
    counts: Counter = Counter()
    for symbols, freq in word_freq.items():
        for i in range(len(symbols) - 1):
            counts[(symbols[i], symbols[i + 1])] += freq
    return counts


def _merge_word(symbols: tuple[str, ...], pair: tuple[str, str], joined: str) -> tuple[str, ...]:
    out = []
    i = 0
    n = len(symbols)
    while i < n:
        if i < n - 1 and symbols[i] == pair[0] and symbols[i + 1] == pair[1]:
            out.append(joined)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def learn_merges(corpora: Sequence[Iterable[str]], num_merges: int,
                 vocab_cap: int | None = DESK_VOCAB_CAP) -> tuple[MergeTable, Vocabulary]:
    """Learn up to `num_merges` merges jointly over all corpora.

    Returns the merge table and a vocabulary holding the reserved symbols,
    every initial symbol (characters plus the end-of-word marker) and every
    merge output, ranked by frequency in the final segmentation of the
    learning corpus (ties by symbol).  With `vocab_cap` set, only the most
    frequent symbols keep ids; evicted symbols encode as unk.
    """
    if num_merges < 0:
        raise TokenizerError(f"num_merges must be >= 0, got {num_merges}")
    if vocab_cap is not None and vocab_cap < len(RESERVED_SYMBOLS):
        raise TokenizerError(f"vocab_cap must be >= {len(RESERVED_SYMBOLS)}, got {vocab_cap}")

    word_freq: dict[tuple[str, ...], int] = {}
    for corpus in corpora:
        for line in corpus:
            for word in line.split():
                key = _word_start(word)
                word_freq[key] = word_freq.get(key, 0) + 1
    if not word_freq:
        raise TokenizerError("cannot learn merges from an empty corpus")

    base_symbols = set()
    for symbols in word_freq:
        base_symbols.update(symbols)

    merges: list[tuple[str, str]] = []
    for _ in range(num_merges):
        counts = _count_pairs(word_freq)
        if not counts:
            break
        best_pair, best_count = None, 0
        for pair, count in counts.items():
            if count > best_count or (count == best_count and pair < best_pair):
                best_pair, best_count = pair, count
        joined = best_pair[0] + best_pair[1]
        word_freq = {_merge_word(sym, best_pair, joined): freq for sym, freq in word_freq.items()}
        merges.append(best_pair)

    symbol_freq: Counter = Counter()
    for symbols, freq in word_freq.items():
        for sym in symbols:
            symbol_freq[sym] += freq
    all_symbols = set(base_symbols)
    all_symbols.update(a + b for a, b in merges)
    ordered = sorted(all_symbols, key=lambda s: (-symbol_freq[s], s))
    if vocab_cap is not None:
        ordered = ordered[: vocab_cap - len(RESERVED_SYMBOLS)]
    vocab = Vocabulary(list(RESERVED_SYMBOLS) + ordered)
    return MergeTable(tuple(merges)), vocab


def segment_word(word: str, ranks: dict[tuple[str, str], int]) -> tuple[str, ...]:
    """Apply merges to one word in priority order until none applies."""
    symbols = _word_start(word)
    while len(symbols) > 1:
        best_rank, best_pair = None, None
        for i in range(len(symbols) - 1):
            rank = ranks.get((symbols[i], symbols[i + 1]))
            if rank is not None and (best_rank is None or rank < best_rank):
                best_rank, best_pair = rank, (symbols[i], symbols[i + 1])
        if best_pair is None:
            break
        symbols = _merge_word(symbols, best_pair, best_pair[0] + best_pair[1])
    return symbols


def encode(text: str, table: MergeTable, vocab: Vocabulary,
           _cache: dict[str, tuple[int, ...]] | None = None) -> list[int]:
    """Whitespace-split, segment each word, and map symbols to ids (unk fallback)."""
    if "\n" in text:
        raise TokenizerError("sentences may not contain newlines")
    ranks = table.ranks()
    ids: list[int] = []
    for word in text.split():
        cached = _cache.get(word) if _cache is not None else None
        if cached is None:
            cached = tuple(vocab.id(sym) for sym in segment_word(word, ranks))
            if _cache is not None:
                _cache[word] = cached
        ids.extend(cached)
    return ids


def decode(ids: Sequence[int], vocab: Vocabulary) -> str:
    """Concatenate symbols and convert end-of-word markers back to spaces.

    The unk id decodes to the literal string "<unk>"; out-of-range ids are
    rejected.
    """
    text = "".join(vocab.symbol(i) for i in ids)
    words = text.split(END_OF_WORD)
    if words and words[-1] == "":
        words.pop()
    return " ".join(words)


class Tokenizer:
    """Merge table + vocabulary with a per-instance word cache for corpus work."""

    def __init__(self, table: MergeTable, vocab: Vocabulary):
        self.table = table
        self.vocab = vocab
        self._cache: dict[str, tuple[int, ...]] = {}

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def encode(self, text: str) -> list[int]:
        return encode(text, self.table, self.vocab, _cache=self._cache)

    def decode(self, ids: Sequence[int]) -> str:
        return decode(ids, self.vocab)

    def encode_corpus(self, lines: Iterable[str]) -> list[list[int]]:
        return [self.encode(line) for line in lines]


def save_merges(path: str | os.PathLike, table: MergeTable) -> None:
    """One merge per line, "left right", in learning order."""
    with open(path, "w", encoding="utf-8") as fh:
        for left, right in table.merges:
            fh.write(f"{left} {right}\n")


def load_merges(path: str | os.PathLike) -> MergeTable:
    merges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            if len(parts) != 2:
                raise TokenizerError(f"{path}:{lineno}: expected 'left right', got {line!r}")
            merges.append((parts[0], parts[1]))
    return MergeTable(tuple(merges))


def save_vocab(path: str | os.PathLike, vocab: Vocabulary) -> None:
    """One "symbol<TAB>id" per line, ascending id."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, sym in enumerate(vocab.symbols):
            fh.write(f"{sym}\t{i}\n")


def load_vocab(path: str | os.PathLike) -> Vocabulary:
    entries: list[tuple[int, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise TokenizerError(f"{path}:{lineno}: expected 'symbol<TAB>id', got {line!r}")
            entries.append((int(parts[1]), parts[0]))
    entries.sort()
    if [i for i, _ in entries] != list(range(len(entries))):
        raise TokenizerError(f"{path}: ids must form a gapless range from 0")
    return Vocabulary([sym for _, sym in entries])
