"""Corpora with provenance, aligned-file and TSV loading, token-budget
batching, ratio subsampling, and the downstream data-mixing strategies."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence

from .rng import SplitMix64, derive_seed


class CorpusError(ValueError):
    pass


class AlignmentError(CorpusError):
    pass


class Provenance(str, Enum):
    AUTHENTIC = "authentic"
    SYNTHETIC = "synthetic"
    REPAIRED = "repaired"


class Origin(str, Enum):
    BILINGUAL = "bilingual"
    MONOLINGUAL = "monolingual"


class PairKind(str, Enum):
    AUTHENTIC = "authentic"
    BT = "bt"            # synthetic source, authentic target
    FT = "ft"            # authentic source, synthetic target
    BTR = "btr"          # repaired source, authentic target
    FTR = "ftr"          # authentic source, repaired target
    AR_SOURCE = "ar_source"  # noisy/clean source-language repair pairs
    AR_TARGET = "ar_target"  # noisy/clean target-language repair pairs


@dataclass
class MonolingualCorpus:
    lines: list[str]
    language: str
    provenance: Provenance = Provenance.AUTHENTIC
    origin: Origin = Origin.MONOLINGUAL

    def __post_init__(self):
        for i, line in enumerate(self.lines):
            if "\n" in line:
                raise CorpusError(f"line {i + 1} contains an embedded newline")

    def __len__(self) -> int:
        return len(self.lines)

    def __iter__(self) -> Iterator[str]:
        return iter(self.lines)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in self.lines:
                fh.write(line + "\n")


@dataclass
class ParallelCorpus:
    source: MonolingualCorpus
    target: MonolingualCorpus
    kind: PairKind = PairKind.AUTHENTIC

    def __post_init__(self):
        if len(self.source) != len(self.target):
            raise AlignmentError(
                f"source has {len(self.source)} lines but target has {len(self.target)}")

    def __len__(self) -> int:
        return len(self.source)

    def pairs(self) -> Iterator[tuple[str, str]]:
        return zip(self.source.lines, self.target.lines)

    def subset(self, indices: Sequence[int]) -> "ParallelCorpus":
        src = MonolingualCorpus([self.source.lines[i] for i in indices],
                                self.source.language, self.source.provenance, self.source.origin)
        tgt = MonolingualCorpus([self.target.lines[i] for i in indices],
                                self.target.language, self.target.provenance, self.target.origin)
        return ParallelCorpus(src, tgt, self.kind)

    def save_tsv(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for src, tgt in self.pairs():
                if "\t" in src or "\t" in tgt:
                    raise CorpusError("TSV lines may not contain tabs inside sentences")
                fh.write(f"{src}\t{tgt}\n")


def _read_lines(path: str | os.PathLike) -> list[str]:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read().split("\n")
    except UnicodeDecodeError as exc:
        raise CorpusError(f"{path}: not valid UTF-8 ({exc})") from None


def load_monolingual(path: str | os.PathLike, language: str,
                     provenance: Provenance = Provenance.AUTHENTIC,
                     origin: Origin = Origin.MONOLINGUAL) -> MonolingualCorpus:
    """One sentence per line, UTF-8, LF; blank lines are dropped."""
    lines = [line for line in _read_lines(path) if line.strip()]
    return MonolingualCorpus(lines, language, provenance, origin)


def load_parallel(source_path: str | os.PathLike, target_path: str | os.PathLike,
                  source_language: str, target_language: str,
                  kind: PairKind = PairKind.AUTHENTIC) -> ParallelCorpus:
    """Two aligned files; a blank line on either side drops the pair on both."""
    src_raw = _read_lines(source_path)
    tgt_raw = _read_lines(target_path)
    # trailing newline produces one empty tail entry on each side; trim it
    if src_raw and src_raw[-1] == "":
        src_raw.pop()
    if tgt_raw and tgt_raw[-1] == "":
        tgt_raw.pop()
    if len(src_raw) != len(tgt_raw):
        raise AlignmentError(
            f"{source_path} has {len(src_raw)} lines but {target_path} has {len(tgt_raw)}")
    kept = [(s, t) for s, t in zip(src_raw, tgt_raw) if s.strip() and t.strip()]
    src = MonolingualCorpus([s for s, _ in kept], source_language, Provenance.AUTHENTIC,
                            Origin.BILINGUAL)
    tgt = MonolingualCorpus([t for _, t in kept], target_language, Provenance.AUTHENTIC,
                            Origin.BILINGUAL)
    return ParallelCorpus(src, tgt, kind)


def load_parallel_tsv(path: str | os.PathLike, source_language: str, target_language: str,
                      kind: PairKind = PairKind.AUTHENTIC) -> ParallelCorpus:
    """source<TAB>target per line; any other tab count is an error."""
    pairs = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        if line.count("\t") != 1:
            raise CorpusError(f"{path}:{lineno}: expected exactly one tab, got {line.count(chr(9))}")
        src, tgt = line.split("\t")
        if src.strip() and tgt.strip():
            pairs.append((src, tgt))
    src = MonolingualCorpus([s for s, _ in pairs], source_language, Provenance.AUTHENTIC,
                            Origin.BILINGUAL)
    tgt = MonolingualCorpus([t for _, t in pairs], target_language, Provenance.AUTHENTIC,
                            Origin.BILINGUAL)
    return ParallelCorpus(src, tgt, kind)


TokenizedPair = tuple[list[int], list[int]]


def batch_by_length(pairs: Sequence[TokenizedPair], source_budget: int,
                    target_budget: int) -> list[list[int]]:
    """Partition pair indices into batches under per-side token budgets.

    Pairs are stably sorted by source length, then packed greedily: a batch
    closes as soon as adding the next pair would push either side over its
    budget.  A single pair larger than a budget still forms its own batch.
    Every index appears in exactly one batch; epoch-level shuffling happens
    at batch granularity in the trainer, not here.
    """
    if source_budget < 1 or target_budget < 1:
        raise CorpusError(f"token budgets must be >= 1, got {source_budget}, {target_budget}")
    order = sorted(range(len(pairs)), key=lambda i: len(pairs[i][0]))
    batches: list[list[int]] = []
    current: list[int] = []
    src_total = tgt_total = 0
    for i in order:
        s_len, t_len = len(pairs[i][0]), len(pairs[i][1])
        if current and (src_total + s_len > source_budget or tgt_total + t_len > target_budget):
            batches.append(current)
            current, src_total, tgt_total = [], 0, 0
        current.append(i)
        src_total += s_len
        tgt_total += t_len
    if current:
        batches.append(current)
    return batches


def subsample_to_ratio(synthetic: ParallelCorpus, authentic_size: int, ratio: float,
                       seed: int) -> ParallelCorpus:
    """Uniform sample without replacement down to authentic_size * ratio pairs.

    Counts sentence pairs, keeps original order among the selected pairs,
    and never upsamples: a synthetic corpus smaller than the quota is
    returned whole.
    """
    if ratio < 0:
        raise CorpusError(f"ratio must be >= 0, got {ratio}")
    quota = int(authentic_size * ratio)
    if quota >= len(synthetic):
        return synthetic
    rng = SplitMix64(seed)
    return synthetic.subset(rng.sample_indices(len(synthetic), quota))


class MixStrategy(str, Enum):
    BASE = "BASE"
    BT = "BT"
    FT = "FT"
    BT_FT = "BT_FT"
    BTR_REP = "BTR_REP"
    FTR_REP = "FTR_REP"
    BTR_ADD = "BTR_ADD"
    FTR_ADD = "FTR_ADD"
    BTR_ADD_FTR_ADD = "BTR_ADD_FTR_ADD"

    @property
    def display_name(self) -> str:
        if self is MixStrategy.BASE:
            return "BASE"
        parts = self.value.split("_")
        if parts[0] in ("BT", "FT") and len(parts) == 1:
            return f"BASE + {parts[0]}"
        if self is MixStrategy.BT_FT:
            return "BASE + BT + FT"
        out = []
        i = 0
        while i < len(parts):
            out.append(f"{parts[i]}-{parts[i + 1]}")
            i += 2
        return "BASE + " + " + ".join(out)


ALL_STRATEGIES = tuple(MixStrategy)

# which synthetic corpora each strategy needs
REQUIREMENTS = {
    MixStrategy.BASE: (),
    MixStrategy.BT: ("bt",),
    MixStrategy.FT: ("ft",),
    MixStrategy.BT_FT: ("bt", "ft"),
    MixStrategy.BTR_REP: ("btr",),
    MixStrategy.FTR_REP: ("ftr",),
    MixStrategy.BTR_ADD: ("bt", "btr"),
    MixStrategy.FTR_ADD: ("ft", "ftr"),
    MixStrategy.BTR_ADD_FTR_ADD: ("bt", "btr", "ft", "ftr"),
}


class MixtureError(CorpusError):
    pass


@dataclass
class MixturePhase:
    corpora: list[ParallelCorpus]

    def total_pairs(self) -> int:
        return sum(len(c) for c in self.corpora)

    def all_pairs(self) -> list[tuple[str, str]]:
        out: list[tuple[str, str]] = []
        for corpus in self.corpora:
            out.extend(corpus.pairs())
        return out


@dataclass
class MixturePlan:
    """Ordered training phases for one strategy; later phases fine-tune."""

    strategy: MixStrategy
    phases: list[MixturePhase]
    ratio: float

    def to_summary(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "display": self.strategy.display_name,
            "ratio": self.ratio,
            "phases": [
                [{"kind": c.kind.value, "pairs": len(c)} for c in phase.corpora]
                for phase in self.phases
            ],
        }


def build_mixture(strategy: MixStrategy, authentic: ParallelCorpus,
                  bt: ParallelCorpus | None = None, ft: ParallelCorpus | None = None,
                  btr: ParallelCorpus | None = None, ftr: ParallelCorpus | None = None,
                  ratio: float = 1.0, seed: int = 0,
                  bt_in_first_phase: bool = False) -> MixturePlan:
    """Assemble the training phases for one mixing strategy.

    Each synthetic corpus is independently subsampled to |authentic| * ratio
    pairs first.  Strategies with forward-translated data train on it in a
    first phase and fine-tune on the remaining data second; everything else
    is a single phase.
    """
    if len(authentic) == 0:
        raise MixtureError("authentic corpus is empty")
    available = {"bt": bt, "ft": ft, "btr": btr, "ftr": ftr}
    for name in REQUIREMENTS[strategy]:
        if available[name] is None:
            raise MixtureError(f"strategy {strategy.value} needs the {name} corpus")
    sub = {
        name: subsample_to_ratio(c, len(authentic), ratio, derive_seed(seed, f"subsample/{name}"))
        for name, c in available.items()
        if c is not None and name in REQUIREMENTS[strategy]
    }

    s = MixStrategy
    if strategy is s.BASE:
        phases = [[authentic]]
    elif strategy is s.BT:
        phases = [[authentic, sub["bt"]]]
    elif strategy is s.FT:
        phases = [[sub["ft"]], [authentic]]
    elif strategy is s.BT_FT:
        first = [sub["ft"], sub["bt"]] if bt_in_first_phase else [sub["ft"]]
        phases = [first, [authentic, sub["bt"]]]
    elif strategy is s.BTR_REP:
        phases = [[authentic, sub["btr"]]]
    elif strategy is s.FTR_REP:
        phases = [[sub["ftr"]], [authentic]]
    elif strategy is s.BTR_ADD:
        phases = [[authentic, sub["bt"], sub["btr"]]]
    elif strategy is s.FTR_ADD:
        phases = [[sub["ft"], sub["ftr"]], [authentic]]
    elif strategy is s.BTR_ADD_FTR_ADD:
        phases = [[sub["ft"], sub["ftr"]], [authentic, sub["bt"], sub["btr"]]]
    else:  # pragma: no cover - enum is closed
        raise MixtureError(f"unhandled strategy {strategy}")
    return MixturePlan(strategy, [MixturePhase(list(p)) for p in phases], ratio)
