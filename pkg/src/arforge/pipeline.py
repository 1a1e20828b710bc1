"""End-to-end orchestration of the repair-training experiment.

A run wires the stages together in dependency order: learn a joint subword
vocabulary, pretrain the two base translation models, synthesize parallel
data from monolingual text in both directions, build round-trip repair
pairs, train the two repair models, repair the synthetic corpora, then
train one model per mixing strategy and score everything.

Each stage writes its artifacts under the run directory and records a
fingerprint (config slice, input content hashes, stage seed) in a ledger,
so an interrupted or repeated run resumes without redoing finished work.
Stage methods double as the command-line entry points; they require their
upstream artifacts to exist already, while `full_run` builds everything.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Sequence

from .bpe import Tokenizer, learn_merges, load_merges, load_vocab, save_merges, save_vocab
from .corpus import (ALL_STRATEGIES, REQUIREMENTS, MixStrategy, MonolingualCorpus,
                     PairKind, ParallelCorpus, Provenance, build_mixture,
                     load_monolingual, load_parallel)
from .decoding import DecodeSettings, translate_corpus
from .metrics import RepairQualityReport, corpus_bleu, repair_quality_report
from .model import (ModelConfig, ModelRole, TransformerModel, init_model, load_model,
                    save_model)
from .rng import SplitMix64, derive_seed
from .toy import ToySpec, generate_toy_files
from .training import TrainingSchedule, train

REPORT_SCHEMA = "repair-experiment-report/v1"


class ConfigError(ValueError):
    """A missing, malformed or contradictory experiment configuration."""


class StageError(RuntimeError):
    """A pipeline stage failed; the message always names the stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class TokenizerConfig:
    num_merges: int = 300
    vocab_cap: int = 1000

    def __post_init__(self):
        if self.num_merges < 0:
            raise ValueError(f"num_merges must be >= 0, got {self.num_merges}")
        if self.vocab_cap < 5:
            raise ValueError(f"vocab_cap must be >= 5, got {self.vocab_cap}")


@dataclass(frozen=True)
class DataConfig:
    """Paths to the eight input corpora; relative paths are resolved against
    the configuration file's directory."""

    train_source: str
    train_target: str
    dev_source: str
    dev_target: str
    test_source: str
    test_target: str
    mono_source: str
    mono_target: str


_DEFAULT_NMT_STEPS = 600
_DEFAULT_AR_STEPS = 900
_DEFAULT_STRATEGY_STEPS = 600


def _default_schedule(max_steps: int) -> TrainingSchedule:
    return TrainingSchedule(max_steps=max_steps, warmup_steps=400)


@dataclass(frozen=True)
class ExperimentConfig:
    run_dir: str
    seed: int = 0
    source_language: str = "src"
    target_language: str = "tgt"
    toy: ToySpec | None = None
    data: DataConfig | None = None
    mono_cap: int | None = None
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)
    nmt_model: ModelConfig = field(default_factory=ModelConfig)
    nmt_training: TrainingSchedule = field(
        default_factory=lambda: _default_schedule(_DEFAULT_NMT_STEPS))
    ar_model: ModelConfig = field(default_factory=ModelConfig)
    ar_training: TrainingSchedule = field(
        default_factory=lambda: _default_schedule(_DEFAULT_AR_STEPS))
    strategy_training: TrainingSchedule = field(
        default_factory=lambda: _default_schedule(_DEFAULT_STRATEGY_STEPS))
    decode: DecodeSettings = field(default_factory=DecodeSettings)
    strategies: tuple[MixStrategy, ...] = ALL_STRATEGIES
    ar_dev_size: int = 1000
    mix_ratio: float = 1.0

    def __post_init__(self):
        if not self.run_dir:
            raise ConfigError("run_dir must be a non-empty path")
        if (self.toy is None) == (self.data is None):
            raise ConfigError("configure exactly one of data.toy and data paths")
        if self.source_language == self.target_language:
            raise ConfigError("source_language and target_language must differ")
        if self.mono_cap is not None and self.mono_cap < 1:
            raise ConfigError(f"mono_cap must be >= 1, got {self.mono_cap}")
        if self.ar_dev_size < 1:
            raise ConfigError(f"ar_dev_size must be >= 1, got {self.ar_dev_size}")
        if self.mix_ratio <= 0:
            raise ConfigError(f"mix_ratio must be positive, got {self.mix_ratio}")
        if not self.strategies:
            raise ConfigError("strategies must name at least one mixing strategy")
        if len(set(self.strategies)) != len(self.strategies):
            raise ConfigError("strategies contains duplicates")

    def to_dict(self) -> dict:
        """Plain-JSON form; also the canonical shape for config echoes."""
        return {
            "run_dir": self.run_dir,
            "seed": self.seed,
            "source_language": self.source_language,
            "target_language": self.target_language,
            "data": {"toy": asdict(self.toy)} if self.toy else asdict(self.data),
            "mono_cap": self.mono_cap,
            "tokenizer": asdict(self.tokenizer),
            "nmt": {"model": asdict(self.nmt_model),
                    "training": _schedule_dict(self.nmt_training)},
            "ar": {"model": asdict(self.ar_model),
                   "training": _schedule_dict(self.ar_training)},
            "strategy_training": _schedule_dict(self.strategy_training),
            "decode": asdict(self.decode),
            "strategies": [s.value for s in self.strategies],
            "ar_dev_size": self.ar_dev_size,
            "mix_ratio": self.mix_ratio,
        }


def _schedule_dict(schedule: TrainingSchedule) -> dict:
    # the seed is always derived per stage; it never belongs in a config echo
    out = asdict(schedule)
    del out["seed"]
    return out


def _build(cls, mapping: dict, where: str, banned: Sequence[str] = ()):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where}: expected an object, got {type(mapping).__name__}")
    allowed = {f.name for f in fields(cls)} - set(banned)
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**mapping)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _parse_strategies(raw, where: str) -> tuple[MixStrategy, ...]:
    if raw == "all":
        return ALL_STRATEGIES
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{where}: expected \"all\" or a non-empty list of names")
    out = []
    for name in raw:
        try:
            out.append(MixStrategy(name))
        except ValueError:
            known = ", ".join(s.value for s in MixStrategy)
            raise ConfigError(f"{where}: unknown strategy {name!r} (known: {known})") from None
    return tuple(out)


_TOP_LEVEL_KEYS = ("run_dir", "seed", "source_language", "target_language", "data",
                   "mono_cap", "tokenizer", "nmt", "ar", "strategy_training",
                   "decode", "strategies", "ar_dev_size", "mix_ratio")
_DATA_PATH_KEYS = tuple(f.name for f in fields(DataConfig))


def config_from_dict(raw: dict, base_dir: str | os.PathLike = ".") -> ExperimentConfig:
    """Validate a parsed JSON object into an ExperimentConfig.

    Relative paths (run_dir and corpus files) resolve against `base_dir`,
    normally the directory containing the configuration file.
    """
    if not isinstance(raw, dict):
        raise ConfigError(f"top level: expected an object, got {type(raw).__name__}")
    unknown = sorted(set(raw) - set(_TOP_LEVEL_KEYS))
    if unknown:
        raise ConfigError(f"top level: unknown keys {unknown}")
    if "run_dir" not in raw:
        raise ConfigError("top level: missing required key 'run_dir'")
    base = Path(base_dir)

    def resolve(p: str) -> str:
        return str(p) if os.path.isabs(p) else str(base / p)

    data_raw = raw.get("data")
    toy = None
    data = None
    if data_raw is None:
        raise ConfigError("top level: missing required key 'data'")
    if not isinstance(data_raw, dict):
        raise ConfigError(f"data: expected an object, got {type(data_raw).__name__}")
    if "toy" in data_raw:
        extra = sorted(set(data_raw) - {"toy"})
        if extra:
            raise ConfigError(f"data: toy generation excludes explicit paths {extra}")
        toy = _build(ToySpec, data_raw["toy"], "data.toy")
    else:
        missing = sorted(set(_DATA_PATH_KEYS) - set(data_raw))
        if missing:
            raise ConfigError(f"data: missing path keys {missing}")
        data = _build(DataConfig, {k: resolve(v) for k, v in data_raw.items()}, "data")

    nmt_raw = raw.get("nmt", {})
    ar_raw = raw.get("ar", {})
    for name, section in (("nmt", nmt_raw), ("ar", ar_raw)):
        if not isinstance(section, dict):
            raise ConfigError(f"{name}: expected an object")
        extra = sorted(set(section) - {"model", "training"})
        if extra:
            raise ConfigError(f"{name}: unknown keys {extra}")

    def schedule(mapping, where, default_steps):
        merged = {"max_steps": default_steps, "warmup_steps": 400, **mapping}
        return _build(TrainingSchedule, merged, where, banned=("seed",))

    try:
        return ExperimentConfig(
            run_dir=resolve(raw["run_dir"]),
            seed=int(raw.get("seed", 0)),
            source_language=str(raw.get("source_language", "src")),
            target_language=str(raw.get("target_language", "tgt")),
            toy=toy,
            data=data,
            mono_cap=raw.get("mono_cap"),
            tokenizer=_build(TokenizerConfig, raw.get("tokenizer", {}), "tokenizer"),
            nmt_model=_build(ModelConfig, nmt_raw.get("model", {}), "nmt.model"),
            nmt_training=schedule(nmt_raw.get("training", {}), "nmt.training",
                                  _DEFAULT_NMT_STEPS),
            ar_model=_build(ModelConfig, ar_raw.get("model", {}), "ar.model"),
            ar_training=schedule(ar_raw.get("training", {}), "ar.training",
                                 _DEFAULT_AR_STEPS),
            strategy_training=schedule(raw.get("strategy_training", {}),
                                       "strategy_training", _DEFAULT_STRATEGY_STEPS),
            decode=_build(DecodeSettings, raw.get("decode", {}), "decode"),
            strategies=_parse_strategies(raw.get("strategies", "all"), "strategies"),
            ar_dev_size=int(raw.get("ar_dev_size", 1000)),
            mix_ratio=float(raw.get("mix_ratio", 1.0)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return config_from_dict(raw, base_dir=path.parent)


# ---------------------------------------------------------------------------
# hashing and the stage ledger


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _digest_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def file_digest(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunStats:
    """What one invocation actually did, for logs and resume tests."""

    stages_run: list[str] = field(default_factory=list)
    stages_skipped: list[str] = field(default_factory=list)
    training_steps: int = 0
    wall_time: float = 0.0


class StageLedger:
    """Per-stage completion records persisted as JSON in the run directory.

    A stage is current when its recorded fingerprint (a hash over the config
    slice, the input content hashes and the stage seed) matches and every
    recorded output file still exists with its recorded content hash.
    """

    def __init__(self, path: Path, entries: dict[str, dict]):
        self.path = path
        self.entries = entries

    @classmethod
    def load(cls, path: Path) -> "StageLedger":
        if not path.exists():
            return cls(path, {})
        try:
            entries = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise StageError("ledger", f"{path} is corrupt ({exc}); delete it to rebuild") from None
        return cls(path, entries)

    def save(self) -> None:
        tmp = self.path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(self.entries, sort_keys=True, indent=2) + "\n",
                       encoding="utf-8")
        os.replace(tmp, self.path)

    def is_current(self, name: str, fingerprint: str, root: Path) -> bool:
        entry = self.entries.get(name)
        if entry is None or entry.get("fingerprint") != fingerprint:
            return False
        for rel, digest in entry.get("outputs", {}).items():
            path = root / rel
            if not path.is_file() or file_digest(path) != digest:
                return False
        return True

    def record(self, name: str, fingerprint: str, outputs: dict[str, str],
               wall_time: float) -> None:
        self.entries[name] = {
            "fingerprint": fingerprint,
            "outputs": outputs,
            "wall_time": round(wall_time, 3),
        }


# ---------------------------------------------------------------------------
# the pipeline


def _fmt_delta(delta) -> str:
    return "n/a" if delta is None else f"{delta:+.2f}"


REPAIR_TABLE_HEADER = "model | BLEU noisy | BLEU repaired | CR | BR"


def render_repair_row(row: dict) -> str:
    """One repair-quality line, percentages with two decimals."""
    return (f"{row['name']} | {row['bleu_before']:.2f} | {row['bleu_after']:.2f}"
            f" | {row['change_rate'] * 100:.2f}% | {row['better_rate'] * 100:.2f}%")


def render_report_table(report: dict) -> str:
    """Human-readable report: strategy scores then repair quality."""
    lines = ["Strategy results (test set)", "strategy | BLEU | Δ"]
    for row in report["strategies"]:
        lines.append(f"{row['display']} | {row['bleu']:.2f} | {_fmt_delta(row['delta'])}")
    lines.append("")
    lines.append("Repair quality (held-out repair dev pairs)")
    lines.append(REPAIR_TABLE_HEADER)
    for row in report["ar_repair"]:
        lines.append(render_repair_row(row))
    return "\n".join(lines) + "\n"


class Pipeline:
    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.run_dir = Path(config.run_dir)
        for sub in ("", "data", "tokenizer", "models", "corpora", "corpora/ar", "reports"):
            (self.run_dir / sub).mkdir(parents=True, exist_ok=True)
        self.ledger = StageLedger.load(self.run_dir / "ledger.json")
        self.stats = RunStats()
        self._tokenizer: Tokenizer | None = None
        self._models: dict[ModelRole, TransformerModel] = {}
        self._data_paths: dict[str, str] | None = None
        self._echo_config()

    def _echo_config(self) -> None:
        echo = self.run_dir / "config.effective.json"
        echo.write_text(json.dumps(self.config.to_dict(), sort_keys=True, indent=2) + "\n",
                        encoding="utf-8")

    # -- plumbing ----------------------------------------------------------

    def _stage_seed(self, label: str) -> int:
        return derive_seed(self.config.seed, label)

    def _run_stage(self, name: str, payload: dict, outputs: Sequence[Path],
                   action: Callable[[], None]) -> bool:
        """Run `action` unless the ledger proves the outputs are current.

        Returns True when the stage executed, False when it was skipped.
        """
        fingerprint = _digest_text(canonical_json(payload))
        if self.ledger.is_current(name, fingerprint, self.run_dir):
            if name not in self.stats.stages_skipped and name not in self.stats.stages_run:
                self.stats.stages_skipped.append(name)
            return False
        start = time.perf_counter()
        try:
            action()
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, str(exc)) from exc
        recorded = {}
        for path in outputs:
            if not path.is_file():
                raise StageError(name, f"expected output {path} was not produced")
            recorded[str(path.relative_to(self.run_dir))] = file_digest(path)
        self.ledger.record(name, fingerprint, recorded, time.perf_counter() - start)
        self.ledger.save()
        self.stats.stages_run.append(name)
        return True

    def _require_file(self, stage: str, path: Path, producer: str) -> Path:
        if not path.is_file():
            raise StageError(stage, f"missing input {path}; run '{producer}' first")
        return path

    # -- data --------------------------------------------------------------

    def data_paths(self) -> dict[str, str]:
        """Corpus file locations, generating the bundled toy data on demand."""
        if self._data_paths is not None:
            return self._data_paths
        if self.config.data is not None:
            self._data_paths = {f.name: getattr(self.config.data, f.name)
                                for f in fields(DataConfig)}
            return self._data_paths
        spec = self.config.toy
        seed = self._stage_seed("toy-data")
        data_dir = self.run_dir / "data"
        src, tgt = self.config.source_language, self.config.target_language
        names = {}
        for split in ("train", "dev", "test"):
            names[f"{split}_source"] = data_dir / f"{split}.{src}.txt"
            names[f"{split}_target"] = data_dir / f"{split}.{tgt}.txt"
        names["mono_source"] = data_dir / f"mono.{src}.txt"
        names["mono_target"] = data_dir / f"mono.{tgt}.txt"
        payload = {"toy": asdict(spec), "seed": seed, "languages": [src, tgt]}
        self._run_stage("data", payload, list(names.values()),
                        lambda: generate_toy_files(spec, seed, data_dir, src, tgt))
        self._data_paths = {key: str(path) for key, path in names.items()}
        return self._data_paths

    def _load_parallel(self, split: str, kind: PairKind = PairKind.AUTHENTIC) -> ParallelCorpus:
        paths = self.data_paths()
        return load_parallel(paths[f"{split}_source"], paths[f"{split}_target"],
                             self.config.source_language, self.config.target_language,
                             kind=kind)

    def _load_mono(self, side: str) -> MonolingualCorpus:
        paths = self.data_paths()
        lang = getattr(self.config, f"{side}_language")
        corpus = load_monolingual(paths[f"mono_{side}"], lang)
        cap = self.config.mono_cap
        if cap is not None and len(corpus) > cap:
            corpus = MonolingualCorpus(corpus.lines[:cap], lang, corpus.provenance,
                                       corpus.origin)
        return corpus

    # -- tokenizer ---------------------------------------------------------

    @property
    def merges_path(self) -> Path:
        return self.run_dir / "tokenizer" / "merges.txt"

    @property
    def vocab_path(self) -> Path:
        return self.run_dir / "tokenizer" / "vocab.txt"

    def learn_tokenizer(self) -> Tokenizer:
        """Learn joint subword merges over both sides of the training corpus."""
        paths = self.data_paths()
        payload = {
            "tokenizer": asdict(self.config.tokenizer),
            "inputs": {key: file_digest(paths[key]) for key in ("train_source", "train_target")},
        }

        def action():
            corpus = self._load_parallel("train")
            table, vocab = learn_merges([corpus.source.lines, corpus.target.lines],
                                        self.config.tokenizer.num_merges,
                                        self.config.tokenizer.vocab_cap)
            save_merges(self.merges_path, table)
            save_vocab(self.vocab_path, vocab)

        self._run_stage("tokenizer", payload, [self.merges_path, self.vocab_path], action)
        return self.tokenizer("tokenizer")

    def tokenizer(self, stage: str = "tokenizer") -> Tokenizer:
        if self._tokenizer is None:
            self._require_file(stage, self.merges_path, "learn-bpe")
            self._require_file(stage, self.vocab_path, "learn-bpe")
            self._tokenizer = Tokenizer(load_merges(self.merges_path),
                                        load_vocab(self.vocab_path))
        return self._tokenizer

    def _encode_pairs(self, corpus: ParallelCorpus, flip: bool = False) -> list:
        tok = self.tokenizer()
        pairs = []
        for src, tgt in corpus.pairs():
            a, b = tok.encode(src), tok.encode(tgt)
            pairs.append((b, a) if flip else (a, b))
        return pairs

    # -- base model pretraining --------------------------------------------

    def _model_prefix(self, name: str) -> Path:
        return self.run_dir / "models" / name

    def _model_files(self, name: str) -> list[Path]:
        prefix = self._model_prefix(name)
        return [Path(f"{prefix}.manifest"), Path(f"{prefix}.blob"), Path(f"{prefix}.config")]

    def _model_digests(self, name: str) -> dict[str, str]:
        return {path.name: file_digest(path) for path in self._model_files(name)}

    def _train_model(self, stage: str, role: ModelRole, model_cfg: ModelConfig,
                     schedule: TrainingSchedule, train_pairs, dev_pairs) -> None:
        tok = self.tokenizer(stage)
        seed = self._stage_seed(stage)
        model = init_model(model_cfg, tok.vocab_size, tok.vocab_size, role, seed=seed)
        model, log = train(model, train_pairs, dev_pairs, replace(schedule, seed=seed))
        self.stats.training_steps += log.steps_run
        save_model(model, self._model_prefix(role.value))

    def pretrain(self) -> tuple[TransformerModel, TransformerModel]:
        """Train the forward and reverse base models on the authentic corpus."""
        paths = self.data_paths()
        self.tokenizer("pretrain")
        corpus_digests = {key: file_digest(paths[key])
                          for key in ("train_source", "train_target", "dev_source", "dev_target")}
        for role in (ModelRole.S2T, ModelRole.T2S):
            stage = f"pretrain-{role.value}"
            flip = role is ModelRole.T2S
            payload = {
                "model": asdict(self.config.nmt_model),
                "training": _schedule_dict(self.config.nmt_training),
                "tokenizer": file_digest(self.merges_path),
                "vocab": file_digest(self.vocab_path),
                "inputs": corpus_digests,
                "seed": self._stage_seed(stage),
            }

            def action(role=role, stage=stage, flip=flip):
                train_pairs = self._encode_pairs(self._load_parallel("train"), flip=flip)
                dev_pairs = self._encode_pairs(self._load_parallel("dev"), flip=flip)
                self._train_model(stage, role, self.config.nmt_model,
                                  self.config.nmt_training, train_pairs, dev_pairs)

            self._run_stage(stage, payload, self._model_files(role.value), action)
        return self.model(ModelRole.S2T), self.model(ModelRole.T2S)

    def model(self, role: ModelRole, stage: str | None = None) -> TransformerModel:
        if role not in self._models:
            prefix = self._model_prefix(role.value)
            producer = "pretrain" if role in (ModelRole.S2T, ModelRole.T2S) else "train-ar"
            for path in self._model_files(role.value):
                self._require_file(stage or f"load-{role.value}", path, producer)
            self._models[role] = load_model(prefix)
        return self._models[role]

    # -- synthetic data ----------------------------------------------------

    @property
    def bt_synthetic_path(self) -> Path:
        src = self.config.source_language
        return self.run_dir / "corpora" / f"{src}.synthetic.bt.txt"

    @property
    def ft_synthetic_path(self) -> Path:
        tgt = self.config.target_language
        return self.run_dir / "corpora" / f"{tgt}.synthetic.ft.txt"

    @property
    def bt_repaired_path(self) -> Path:
        src = self.config.source_language
        return self.run_dir / "corpora" / f"{src}.repaired.bt.txt"

    @property
    def ft_repaired_path(self) -> Path:
        tgt = self.config.target_language
        return self.run_dir / "corpora" / f"{tgt}.repaired.ft.txt"

    def _translate_file(self, stage: str, role: ModelRole, corpus: MonolingualCorpus,
                        out_language: str, out_path: Path,
                        provenance: Provenance = Provenance.SYNTHETIC) -> None:
        model = self.model(role, stage)
        translated = translate_corpus(model, corpus, self.tokenizer(stage),
                                      self.config.decode, out_language, provenance)
        translated.save(out_path)

    def generate_synthetic(self) -> dict[str, Path]:
        """Translate both monolingual corpora through the base models.

        Back-translation sends the target-language text through the reverse
        model to make synthetic sources; forward translation sends the
        source-language text through the forward model to make synthetic
        targets.  Line order follows the monolingual input exactly.
        """
        paths = self.data_paths()
        decode_cfg = asdict(self.config.decode)
        jobs = (
            ("synth-bt", ModelRole.T2S, "mono_target", "target",
             self.config.source_language, self.bt_synthetic_path),
            ("synth-ft", ModelRole.S2T, "mono_source", "source",
             self.config.target_language, self.ft_synthetic_path),
        )
        for stage, role, mono_key, side, out_lang, out_path in jobs:
            payload = {
                "decode": decode_cfg,
                "mono_cap": self.config.mono_cap,
                "model": self._pretrained_digest(stage, role),
                "input": file_digest(paths[mono_key]),
            }

            def action(stage=stage, role=role, side=side, out_lang=out_lang, out_path=out_path):
                self._translate_file(stage, role, self._load_mono(side), out_lang, out_path)

            self._run_stage(stage, payload, [out_path], action)
        return {"bt": self.bt_synthetic_path, "ft": self.ft_synthetic_path}

    def _pretrained_digest(self, stage: str, role: ModelRole) -> dict[str, str]:
        for path in self._model_files(role.value):
            self._require_file(stage, path, "pretrain" if role in (ModelRole.S2T, ModelRole.T2S)
                               else "train-ar")
        return self._model_digests(role.value)

    # -- repair training data ----------------------------------------------

    def _ar_path(self, side: str, split: str, part: str) -> Path:
        return self.run_dir / "corpora" / "ar" / f"{side}.{split}.{part}.txt"

    def _ar_full_path(self, side: str, part: str) -> Path:
        return self.run_dir / "corpora" / "ar" / f"{side}.{part}.txt"

    def generate_ar_data(self) -> None:
        """Build round-trip (noisy, clean) repair pairs for both languages.

        The first translation hop is exactly the synthetic corpus from
        `generate_synthetic`, so only the return hop is decoded here: the
        synthetic target text comes back through the reverse model to make
        noisy source text, and vice versa.  The clean side is the original
        monolingual text, then a seeded sample is split off as the repair
        dev set.
        """
        paths = self.data_paths()
        decode_cfg = asdict(self.config.decode)
        jobs = (
            # noisy source = T2S(FT synthetic targets); clean = mono source
            ("ar-data-src", "src", ModelRole.T2S, self.ft_synthetic_path, "synth",
             self.config.target_language, self.config.source_language, "mono_source", "source"),
            # noisy target = S2T(BT synthetic sources); clean = mono target
            ("ar-data-tgt", "tgt", ModelRole.S2T, self.bt_synthetic_path, "synth",
             self.config.source_language, self.config.target_language, "mono_target", "target"),
        )
        for (stage, side, role, hop_path, producer, hop_lang, out_lang,
             mono_key, mono_side) in jobs:
            self._require_file(stage, hop_path, producer)
            noisy_path = self._ar_full_path(side, "noisy")
            clean_path = self._ar_full_path(side, "clean")
            payload = {
                "decode": decode_cfg,
                "mono_cap": self.config.mono_cap,
                "model": self._pretrained_digest(stage, role),
                "hop": file_digest(hop_path),
                "mono": file_digest(paths[mono_key]),
            }

            def action(stage=stage, role=role, hop_path=hop_path, hop_lang=hop_lang,
                       out_lang=out_lang, mono_side=mono_side, noisy_path=noisy_path,
                       clean_path=clean_path):
                clean = self._load_mono(mono_side)
                hop = load_monolingual(hop_path, hop_lang, Provenance.SYNTHETIC)
                if len(hop) != len(clean):
                    raise StageError(stage, f"round-trip hop has {len(hop)} lines but the "
                                            f"monolingual corpus has {len(clean)}")
                self._translate_file(stage, role, hop, out_lang, noisy_path)
                clean.save(clean_path)

            self._run_stage(stage, payload, [noisy_path, clean_path], action)
            self._split_ar_dev(side)

    def _ar_dev_count(self, total: int) -> int:
        # default 1000, clamped to 10% of the pairs and to leaving >= 1 for training
        return min(self.config.ar_dev_size, max(1, total // 10), total - 1)

    def _split_ar_dev(self, side: str) -> None:
        stage = f"ar-split-{side}"
        noisy_path = self._ar_full_path(side, "noisy")
        clean_path = self._ar_full_path(side, "clean")
        self._require_file(stage, noisy_path, "ar-data")
        self._require_file(stage, clean_path, "ar-data")
        seed = self._stage_seed(stage)
        outputs = [self._ar_path(side, split, part)
                   for split in ("train", "dev") for part in ("noisy", "clean")]
        payload = {
            "ar_dev_size": self.config.ar_dev_size,
            "seed": seed,
            "noisy": file_digest(noisy_path),
            "clean": file_digest(clean_path),
        }

        def action():
            lang = (self.config.source_language if side == "src"
                    else self.config.target_language)
            noisy = load_monolingual(noisy_path, lang, Provenance.SYNTHETIC)
            clean = load_monolingual(clean_path, lang)
            pairs = ParallelCorpus(noisy, clean,
                                   PairKind.AR_SOURCE if side == "src" else PairKind.AR_TARGET)
            if len(pairs) < 2:
                raise StageError(stage, f"need at least 2 repair pairs, have {len(pairs)}")
            dev_count = self._ar_dev_count(len(pairs))
            rng = SplitMix64(seed)
            dev_idx = set(rng.sample_indices(len(pairs), dev_count))
            train_idx = [i for i in range(len(pairs)) if i not in dev_idx]
            dev = pairs.subset(sorted(dev_idx))
            tr = pairs.subset(train_idx)
            tr.source.save(self._ar_path(side, "train", "noisy"))
            tr.target.save(self._ar_path(side, "train", "clean"))
            dev.source.save(self._ar_path(side, "dev", "noisy"))
            dev.target.save(self._ar_path(side, "dev", "clean"))

        self._run_stage(stage, payload, outputs, action)

    # -- repair models -----------------------------------------------------

    def _ar_role(self, side: str) -> ModelRole:
        return ModelRole.S2S if side == "src" else ModelRole.T2T

    def train_ar(self) -> tuple[TransformerModel, TransformerModel]:
        """Train the two same-language repair models on the round-trip pairs."""
        for side in ("src", "tgt"):
            role = self._ar_role(side)
            stage = f"train-ar-{role.value}"
            split_files = {}
            for split in ("train", "dev"):
                for part in ("noisy", "clean"):
                    path = self._ar_path(side, split, part)
                    self._require_file(stage, path, "ar-data")
                    split_files[f"{split}_{part}"] = file_digest(path)
            payload = {
                "model": asdict(self.config.ar_model),
                "training": _schedule_dict(self.config.ar_training),
                "tokenizer": file_digest(self.merges_path),
                "vocab": file_digest(self.vocab_path),
                "inputs": split_files,
                "seed": self._stage_seed(stage),
            }

            def action(side=side, role=role, stage=stage):
                lang = (self.config.source_language if side == "src"
                        else self.config.target_language)
                kind = PairKind.AR_SOURCE if side == "src" else PairKind.AR_TARGET

                def load_split(split):
                    noisy = load_monolingual(self._ar_path(side, split, "noisy"), lang,
                                             Provenance.SYNTHETIC)
                    clean = load_monolingual(self._ar_path(side, split, "clean"), lang)
                    return self._encode_pairs(ParallelCorpus(noisy, clean, kind))

                self._train_model(stage, role, self.config.ar_model,
                                  self.config.ar_training,
                                  load_split("train"), load_split("dev"))

            self._run_stage(stage, payload, self._model_files(role.value), action)
        return self.model(ModelRole.S2S), self.model(ModelRole.T2T)

    def repair_synthetic(self) -> dict[str, Path]:
        """Beam-decode both synthetic corpora through their repair models."""
        jobs = (
            ("repair-bt", "src", self.bt_synthetic_path, self.bt_repaired_path,
             self.config.source_language),
            ("repair-ft", "tgt", self.ft_synthetic_path, self.ft_repaired_path,
             self.config.target_language),
        )
        for stage, side, in_path, out_path, lang in jobs:
            self._require_file(stage, in_path, "synth")
            role = self._ar_role(side)
            payload = {
                "decode": asdict(self.config.decode),
                "model": self._pretrained_digest(stage, role),
                "input": file_digest(in_path),
            }

            def action(stage=stage, role=role, in_path=in_path, out_path=out_path, lang=lang):
                noisy = load_monolingual(in_path, lang, Provenance.SYNTHETIC)
                self._translate_file(stage, role, noisy, lang, out_path,
                                     provenance=Provenance.REPAIRED)

            self._run_stage(stage, payload, [out_path], action)
        return {"bt": self.bt_repaired_path, "ft": self.ft_repaired_path}

    # -- reports -----------------------------------------------------------

    def _ar_report_path(self, side: str) -> Path:
        return self.run_dir / "reports" / f"ar.{side}.json"

    def ar_quality_reports(self) -> list[RepairQualityReport]:
        """Score both repair models on their held-out dev pairs."""
        reports = []
        for side in ("src", "tgt"):
            stage = f"ar-report-{side}"
            role = self._ar_role(side)
            lang = (self.config.source_language if side == "src"
                    else self.config.target_language)
            noisy_path = self._ar_path(side, "dev", "noisy")
            clean_path = self._ar_path(side, "dev", "clean")
            self._require_file(stage, noisy_path, "ar-data")
            self._require_file(stage, clean_path, "ar-data")
            repaired_path = self._ar_path(side, "dev", "repaired")
            report_path = self._ar_report_path(side)
            payload = {
                "decode": asdict(self.config.decode),
                "model": self._pretrained_digest(stage, role),
                "noisy": file_digest(noisy_path),
                "clean": file_digest(clean_path),
            }

            def action(stage=stage, role=role, lang=lang, noisy_path=noisy_path,
                       clean_path=clean_path, repaired_path=repaired_path,
                       report_path=report_path):
                noisy = load_monolingual(noisy_path, lang, Provenance.SYNTHETIC)
                self._translate_file(stage, role, noisy, lang, repaired_path,
                                     provenance=Provenance.REPAIRED)
                repaired = load_monolingual(repaired_path, lang, Provenance.REPAIRED)
                clean = load_monolingual(clean_path, lang)
                report = repair_quality_report(f"{lang.upper()}2{lang.upper()}",
                                               noisy.lines, repaired.lines, clean.lines)
                report_path.write_text(
                    json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")

            self._run_stage(stage, payload, [repaired_path, report_path], action)
            raw = json.loads(report_path.read_text(encoding="utf-8"))
            reports.append(RepairQualityReport(**raw))
        return reports

    # -- strategy training and evaluation ------------------------------------

    def _strategy_corpora(self, stage: str, strategy: MixStrategy) -> dict:
        """Load the synthetic/repaired corpora this strategy's mixture needs."""
        need = REQUIREMENTS[strategy]
        src, tgt = self.config.source_language, self.config.target_language
        out: dict[str, ParallelCorpus | None] = {"bt": None, "ft": None, "btr": None, "ftr": None}
        mono_src = self._load_mono("source") if {"ft", "ftr"} & set(need) else None
        mono_tgt = self._load_mono("target") if {"bt", "btr"} & set(need) else None

        def synth_side(path, producer, lang, provenance):
            self._require_file(stage, path, producer)
            return load_monolingual(path, lang, provenance)

        if "bt" in need:
            out["bt"] = ParallelCorpus(
                synth_side(self.bt_synthetic_path, "synth", src, Provenance.SYNTHETIC),
                mono_tgt, PairKind.BT)
        if "btr" in need:
            out["btr"] = ParallelCorpus(
                synth_side(self.bt_repaired_path, "repair", src, Provenance.REPAIRED),
                mono_tgt, PairKind.BTR)
        if "ft" in need:
            out["ft"] = ParallelCorpus(
                mono_src,
                synth_side(self.ft_synthetic_path, "synth", tgt, Provenance.SYNTHETIC),
                PairKind.FT)
        if "ftr" in need:
            out["ftr"] = ParallelCorpus(
                mono_src,
                synth_side(self.ft_repaired_path, "repair", tgt, Provenance.REPAIRED),
                PairKind.FTR)
        return out

    def _mixture_inputs_digest(self, strategy: MixStrategy) -> dict[str, str]:
        paths = self.data_paths()
        digests = {"train_source": file_digest(paths["train_source"]),
                   "train_target": file_digest(paths["train_target"]),
                   "dev_source": file_digest(paths["dev_source"]),
                   "dev_target": file_digest(paths["dev_target"])}
        extra_paths = {
            "bt": (self.bt_synthetic_path, "mono_target"),
            "btr": (self.bt_repaired_path, "mono_target"),
            "ft": (self.ft_synthetic_path, "mono_source"),
            "ftr": (self.ft_repaired_path, "mono_source"),
        }
        for name in REQUIREMENTS[strategy]:
            path, mono_key = extra_paths[name]
            if path.is_file():
                digests[name] = file_digest(path)
            digests[f"{name}_mono"] = file_digest(paths[mono_key])
        return digests

    def build_strategy_mixture(self, strategy: MixStrategy):
        """Assemble (and summarize on disk) the mixture plan for one strategy."""
        stage = f"mix-{strategy.value}"
        corpora = self._strategy_corpora(stage, strategy)
        plan = build_mixture(strategy, self._load_parallel("train"),
                             bt=corpora["bt"], ft=corpora["ft"],
                             btr=corpora["btr"], ftr=corpora["ftr"],
                             ratio=self.config.mix_ratio,
                             seed=self._stage_seed(f"mix/{strategy.value}"))
        summary_path = self.run_dir / "reports" / f"mixture.{strategy.value}.json"
        summary_path.write_text(json.dumps(plan.to_summary(), sort_keys=True, indent=2) + "\n",
                                encoding="utf-8")
        return plan

    def _strategy_model_name(self, strategy: MixStrategy) -> str:
        return f"strategy.{strategy.value}"

    def train_strategy(self, strategy: MixStrategy) -> Path:
        """Train one model per the strategy's mixture phases; later phases
        fine-tune the earlier result with a fresh optimizer and schedule."""
        stage = f"train-{strategy.value}"
        self.tokenizer(stage)
        name = self._strategy_model_name(strategy)
        seed = self._stage_seed(f"strategy/{strategy.value}")
        payload = {
            "model": asdict(self.config.nmt_model),
            "training": _schedule_dict(self.config.strategy_training),
            "tokenizer": file_digest(self.merges_path),
            "vocab": file_digest(self.vocab_path),
            "mix_ratio": self.config.mix_ratio,
            "inputs": self._mixture_inputs_digest(strategy),
            "seed": seed,
        }

        def action():
            tok = self.tokenizer(stage)
            plan = self.build_strategy_mixture(strategy)
            dev_pairs = self._encode_pairs(self._load_parallel("dev"))
            model = init_model(self.config.nmt_model, tok.vocab_size, tok.vocab_size,
                               ModelRole.S2T, seed=seed)
            for i, phase in enumerate(plan.phases):
                phase_pairs = [(tok.encode(a), tok.encode(b)) for a, b in phase.all_pairs()]
                schedule = replace(self.config.strategy_training,
                                   seed=derive_seed(seed, f"phase{i}"))
                model, log = train(model, phase_pairs, dev_pairs, schedule)
                self.stats.training_steps += log.steps_run
            save_model(model, self._model_prefix(name))

        self._run_stage(stage, payload, self._model_files(name), action)
        return self._model_prefix(name)

    def evaluate_strategy(self, strategy: MixStrategy) -> float:
        """Decode the test set with the strategy's model and score it."""
        stage = f"eval-{strategy.value}"
        paths = self.data_paths()
        name = self._strategy_model_name(strategy)
        for path in self._model_files(name):
            self._require_file(stage, path, "train")
        report_path = self.run_dir / "reports" / f"strategy.{strategy.value}.json"
        hyp_path = self.run_dir / "corpora" / f"test.hyp.{strategy.value}.txt"
        payload = {
            "decode": asdict(self.config.decode),
            "model": self._model_digests(name),
            "test_source": file_digest(paths["test_source"]),
            "test_target": file_digest(paths["test_target"]),
        }

        def action():
            model = load_model(self._model_prefix(name))
            test = self._load_parallel("test")
            hyp = translate_corpus(model, test.source, self.tokenizer(stage),
                                   self.config.decode, self.config.target_language)
            hyp.save(hyp_path)
            bleu = corpus_bleu(hyp.lines, test.target.lines)
            report_path.write_text(json.dumps({
                "strategy": strategy.value,
                "display": strategy.display_name,
                "bleu": bleu.score,
            }, sort_keys=True, indent=2) + "\n", encoding="utf-8")

        self._run_stage(stage, payload, [hyp_path, report_path], action)
        return json.loads(report_path.read_text(encoding="utf-8"))["bleu"]

    def run_strategy(self, strategy: MixStrategy) -> float:
        self.train_strategy(strategy)
        return self.evaluate_strategy(strategy)

    # -- the whole experiment ------------------------------------------------

    @property
    def report_json_path(self) -> Path:
        return self.run_dir / "report.json"

    @property
    def report_text_path(self) -> Path:
        return self.run_dir / "report.txt"

    def assemble_report(self) -> dict:
        """Collect the per-stage report fragments into the final report.

        Reading the fragments back from disk (rather than using in-memory
        floats) makes a resumed run produce byte-identical output.
        """
        strategies = []
        scores = {}
        for strategy in self.config.strategies:
            path = self.run_dir / "reports" / f"strategy.{strategy.value}.json"
            self._require_file("report", path, "evaluate")
            scores[strategy] = json.loads(path.read_text(encoding="utf-8"))
        base = scores.get(MixStrategy.BASE, {}).get("bleu")
        for strategy in self.config.strategies:
            row = scores[strategy]
            row["delta"] = None if base is None else row["bleu"] - base
            strategies.append(row)
        repair = []
        for side in ("src", "tgt"):
            path = self._ar_report_path(side)
            self._require_file("report", path, "ar-report")
            repair.append(json.loads(path.read_text(encoding="utf-8")))
        return {
            "schema": REPORT_SCHEMA,
            "seed": self.config.seed,
            "source_language": self.config.source_language,
            "target_language": self.config.target_language,
            "strategies": strategies,
            "ar_repair": repair,
        }

    def write_report(self) -> dict:
        report = self.assemble_report()
        self.report_json_path.write_text(
            json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        self.report_text_path.write_text(render_report_table(report), encoding="utf-8")
        return report

    def full_run(self) -> tuple[dict, RunStats]:
        """Execute every stage in dependency order and write the report."""
        start = time.perf_counter()
        self.data_paths()
        self.learn_tokenizer()
        self.pretrain()
        self.generate_synthetic()
        self.generate_ar_data()
        self.train_ar()
        self.repair_synthetic()
        self.ar_quality_reports()
        for strategy in self.config.strategies:
            self.run_strategy(strategy)
        report = self.write_report()
        self.stats.wall_time = time.perf_counter() - start
        return report, self.stats
