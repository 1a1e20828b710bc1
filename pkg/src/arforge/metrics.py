"""Translation quality metrics: corpus/sentence BLEU, change rate, better rate.

BLEU is case-insensitive (simple Unicode lowercasing), whitespace-tokenized,
clipped up to 4-grams, single reference, with brevity penalty
min(1, exp(1 - r/c)).  Corpus BLEU is unsmoothed: any available order with
zero precision zeroes the score; orders with no candidate n-grams anywhere
in the corpus are dropped and the geometric mean renormalizes over the
rest (so corpus_bleu(X, X) is 100 even for short sentences).  Sentence
BLEU add-one smooths orders >= 2 and skips orders longer than the
candidate.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

MAX_ORDER = 4


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class BleuBreakdown:
    """Score plus the quantities it was computed from.

    `precisions[n-1]` is the clipped n-gram precision, or None when the
    corpus contains no candidate n-grams of that order.
    """

    score: float
    precisions: tuple[float | None, ...]
    brevity_penalty: float
    candidate_tokens: int
    reference_tokens: int

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "precisions": list(self.precisions),
            "brevity_penalty": self.brevity_penalty,
            "candidate_tokens": self.candidate_tokens,
            "reference_tokens": self.reference_tokens,
        }


def _tokenize(line: str) -> list[str]:
    return line.lower().split()


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(candidates: Sequence[str], references: Sequence[str]) -> BleuBreakdown:
    """Corpus-level BLEU with n-gram counts pooled over all sentence pairs."""
    if len(candidates) != len(references):
        raise MetricsError(
            f"got {len(candidates)} candidates but {len(references)} references")
    if len(candidates) == 0:
        raise MetricsError("cannot score an empty corpus")

    matched = [0] * MAX_ORDER
    total = [0] * MAX_ORDER
    cand_tokens = ref_tokens = 0
    for cand, ref in zip(candidates, references):
        c_toks = _tokenize(cand)
        r_toks = _tokenize(ref)
        cand_tokens += len(c_toks)
        ref_tokens += len(r_toks)
        for n in range(1, MAX_ORDER + 1):
            c_counts = _ngram_counts(c_toks, n)
            if not c_counts:
                continue
            r_counts = _ngram_counts(r_toks, n)
            total[n - 1] += sum(c_counts.values())
            matched[n - 1] += sum(min(count, r_counts[gram]) for gram, count in c_counts.items())

    precisions: list[float | None] = [
        (matched[i] / total[i]) if total[i] > 0 else None for i in range(MAX_ORDER)
    ]
    if cand_tokens == 0:
        return BleuBreakdown(0.0, tuple(precisions), 0.0, 0, ref_tokens)
    bp = min(1.0, math.exp(1.0 - ref_tokens / cand_tokens))
    available = [p for p in precisions if p is not None]
    if not available or any(p == 0.0 for p in available):
        score = 0.0
    else:
        score = 100.0 * bp * math.exp(math.fsum(math.log(p) for p in available) / len(available))
    return BleuBreakdown(score, tuple(precisions), bp, cand_tokens, ref_tokens)


def sentence_bleu(candidate: str, reference: str) -> float:
    """Sentence-level BLEU with add-one smoothing on orders >= 2.

    Orders longer than the candidate are skipped and the geometric mean
    renormalizes over the remaining orders; an empty candidate scores 0.
    """
    c_toks = _tokenize(candidate)
    r_toks = _tokenize(reference)
    if not r_toks:
        raise MetricsError("reference sentence is empty")
    if not c_toks:
        return 0.0
    log_terms = []
    for n in range(1, min(MAX_ORDER, len(c_toks)) + 1):
        c_counts = _ngram_counts(c_toks, n)
        r_counts = _ngram_counts(r_toks, n)
        clipped = sum(min(count, r_counts[gram]) for gram, count in c_counts.items())
        total = sum(c_counts.values())
        if n >= 2:
            clipped += 1
            total += 1
        if clipped == 0:
            return 0.0
        log_terms.append(math.log(clipped / total))
    bp = min(1.0, math.exp(1.0 - len(r_toks) / len(c_toks)))
    return 100.0 * bp * math.exp(math.fsum(log_terms) / len(log_terms))


def change_rate(inputs: Sequence[str], outputs: Sequence[str]) -> float:
    """Fraction of positions where output differs from input.

    Comparison is exact on codepoints after trimming trailing whitespace.
    """
    if len(inputs) != len(outputs):
        raise MetricsError(f"got {len(inputs)} inputs but {len(outputs)} outputs")
    if len(inputs) == 0:
        raise MetricsError("cannot score an empty corpus")
    changed = sum(1 for a, b in zip(inputs, outputs) if a.rstrip() != b.rstrip())
    return changed / len(inputs)


def better_rate(noisy: Sequence[str], repaired: Sequence[str],
                references: Sequence[str]) -> float:
    """Fraction of sentences whose repaired sentence BLEU strictly beats the
    noisy one; ties and regressions count against."""
    if not len(noisy) == len(repaired) == len(references):
        raise MetricsError(
            f"got {len(noisy)} noisy, {len(repaired)} repaired, {len(references)} references")
    if len(noisy) == 0:
        raise MetricsError("cannot score an empty corpus")
    better = sum(
        1 for n, r, ref in zip(noisy, repaired, references)
        if sentence_bleu(r, ref) > sentence_bleu(n, ref)
    )
    return better / len(noisy)


@dataclass(frozen=True)
class RepairQualityReport:
    """Before/after quality of one repair model on its held-out dev pairs."""

    name: str
    bleu_before: float
    bleu_after: float
    change_rate: float
    better_rate: float
    sentence_count: int

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "bleu_before": self.bleu_before,
            "bleu_after": self.bleu_after,
            "change_rate": self.change_rate,
            "better_rate": self.better_rate,
            "sentence_count": self.sentence_count,
        }


def repair_quality_report(name: str, noisy: Sequence[str], repaired: Sequence[str],
                          references: Sequence[str]) -> RepairQualityReport:
    return RepairQualityReport(
        name=name,
        bleu_before=corpus_bleu(list(noisy), list(references)).score,
        bleu_after=corpus_bleu(list(repaired), list(references)).score,
        change_rate=change_rate(list(noisy), list(repaired)),
        better_rate=better_rate(noisy, repaired, references),
        sentence_count=len(noisy),
    )
