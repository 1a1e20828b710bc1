"""Bundled toy translation task: a deterministic token-mapped reversal language.

Source sentences are built from phrases: a phrase is a walk over word tokens
s00..sNN through a sparse seeded transition graph (each token allows only a
handful of successors), and every line states its phrase twice, truncated to
the drawn line length.  Both layers are redundancy in the way natural text is
redundant: a corrupted token usually breaks an allowed bigram, and the echoed
copy of the phrase still carries the original.  That is what makes learned
repair of machine-generated noise possible at this scale.  The "translation"
reverses the token order and maps each token through a fixed seeded bijection
onto the target tokens t00..tNN; reversal preserves the echo structure.
Monolingual target text is generated by translating fresh source sentences,
so it follows the same distribution as real targets.  Everything derives
from one seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import MonolingualCorpus, Origin, ParallelCorpus, Provenance
from .rng import SplitMix64, derive_seed


@dataclass(frozen=True)
class ToySpec:
    vocab_size: int = 40
    min_len: int = 3
    max_len: int = 12
    train_pairs: int = 2000
    dev_pairs: int = 200
    test_pairs: int = 200
    mono_lines: int = 10000

    def __post_init__(self):
        if self.vocab_size < 2 or self.vocab_size > 100:
            raise ValueError(f"vocab_size must lie in [2, 100], got {self.vocab_size}")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError(f"need 1 <= min_len <= max_len, got {self.min_len}, {self.max_len}")


_BRANCH = 5


class ToyTask:
    def __init__(self, spec: ToySpec, seed: int):
        self.spec = spec
        self.seed = seed
        self.source_tokens = [f"s{i:02d}" for i in range(spec.vocab_size)]
        self.target_tokens = [f"t{i:02d}" for i in range(spec.vocab_size)]
        mapping = list(range(spec.vocab_size))
        SplitMix64(derive_seed(seed, "toy/mapping")).shuffle(mapping)
        self._map = mapping
        # mildly skewed start-token frequencies make subword statistics non-flat
        weights = 1.0 / (np.arange(spec.vocab_size) + 3.0)
        self._start_cumulative = np.cumsum(weights / weights.sum())
        # sparse successor sets; shuffled so the weight ranking below is not
        # tied to token index order
        branch = min(_BRANCH, spec.vocab_size)
        chain_rng = SplitMix64(derive_seed(seed, "toy/chain"))
        successors = []
        for _ in range(spec.vocab_size):
            nxt = chain_rng.sample_indices(spec.vocab_size, branch)
            chain_rng.shuffle(nxt)
            successors.append(nxt)
        self._successors = successors
        step = 1.0 / (np.arange(branch) + 1.0)
        self._step_cumulative = np.cumsum(step / step.sum())

    def translate(self, source_line: str) -> str:
        """Reference translation: reverse the tokens and map each one."""
        words = source_line.split()
        out = [self.target_tokens[self._map[self.source_tokens.index(w)]]
               for w in reversed(words)]
        return " ".join(out)

    def _sample_source_line(self, rng: SplitMix64) -> str:
        length = self.spec.min_len + rng.next_below(self.spec.max_len - self.spec.min_len + 1)
        phrase_len = (length + 1) // 2
        draws = rng.next_floats(phrase_len)
        cur = int(np.searchsorted(self._start_cumulative, draws[0], side="right"))
        picks = [cur]
        for d in draws[1:]:
            rank = int(np.searchsorted(self._step_cumulative, d, side="right"))
            cur = self._successors[cur][rank]
            picks.append(cur)
        echoed = (picks + picks)[:length]
        return " ".join(self.source_tokens[i] for i in echoed)

    def _source_lines(self, count: int, label: str) -> list[str]:
        rng = SplitMix64(derive_seed(self.seed, f"toy/{label}"))
        return [self._sample_source_line(rng) for _ in range(count)]

    def parallel(self, count: int, label: str, src_lang: str, tgt_lang: str) -> ParallelCorpus:
        src_lines = self._source_lines(count, label)
        src = MonolingualCorpus(src_lines, src_lang, Provenance.AUTHENTIC, Origin.BILINGUAL)
        tgt = MonolingualCorpus([self.translate(s) for s in src_lines], tgt_lang,
                                Provenance.AUTHENTIC, Origin.BILINGUAL)
        return ParallelCorpus(src, tgt)

    def monolingual_source(self, count: int, lang: str) -> MonolingualCorpus:
        return MonolingualCorpus(self._source_lines(count, "mono-src"), lang,
                                 Provenance.AUTHENTIC, Origin.MONOLINGUAL)

    def monolingual_target(self, count: int, lang: str) -> MonolingualCorpus:
        lines = [self.translate(s) for s in self._source_lines(count, "mono-tgt")]
        return MonolingualCorpus(lines, lang, Provenance.AUTHENTIC, Origin.MONOLINGUAL)


def generate_toy_files(spec: ToySpec, seed: int, out_dir: str | os.PathLike,
                       src_lang: str = "src", tgt_lang: str = "tgt") -> dict[str, str]:
    """Write the toy corpora under `out_dir` and return the path map used by
    the pipeline data configuration."""
    task = ToyTask(spec, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpora = {
        "train": task.parallel(spec.train_pairs, "train", src_lang, tgt_lang),
        "dev": task.parallel(spec.dev_pairs, "dev", src_lang, tgt_lang),
        "test": task.parallel(spec.test_pairs, "test", src_lang, tgt_lang),
    }
    paths: dict[str, str] = {}
    for name, corpus in corpora.items():
        src_path = out / f"{name}.{src_lang}.txt"
        tgt_path = out / f"{name}.{tgt_lang}.txt"
        corpus.source.save(src_path)
        corpus.target.save(tgt_path)
        paths[f"{name}_source"] = str(src_path)
        paths[f"{name}_target"] = str(tgt_path)
    mono_src = task.monolingual_source(spec.mono_lines, src_lang)
    mono_tgt = task.monolingual_target(spec.mono_lines, tgt_lang)
    mono_src_path = out / f"mono.{src_lang}.txt"
    mono_tgt_path = out / f"mono.{tgt_lang}.txt"
    mono_src.save(mono_src_path)
    mono_tgt.save(mono_tgt_path)
    paths["mono_source"] = str(mono_src_path)
    paths["mono_target"] = str(mono_tgt_path)
    return paths
