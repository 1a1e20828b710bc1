"""Desk-scale experiments in repairing synthetic parallel data.

The package trains small transformer translation models from scratch on
float64 numpy, synthesizes parallel corpora from monolingual text by
forward and back translation, learns same-language repair models from
round-trip noise, and scores nine data-mixing strategies end to end.
Everything is seeded and deterministic: identical configurations produce
byte-identical reports.
"""

from .bpe import MergeTable, Tokenizer, Vocabulary, learn_merges
from .corpus import (ALL_STRATEGIES, MixStrategy, MonolingualCorpus, ParallelCorpus,
                     batch_by_length, build_mixture, load_monolingual, load_parallel,
                     subsample_to_ratio)
from .decoding import DecodeSettings, beam_decode, greedy_decode, translate_corpus
from .gradcheck import check_gradients
from .metrics import (BleuBreakdown, RepairQualityReport, better_rate, change_rate,
                      corpus_bleu, repair_quality_report, sentence_bleu)
from .model import (ModelConfig, ModelRole, TransformerModel, init_model,
                    label_smoothed_loss, load_model, save_model)
from .optim import AdamState, LrSchedule, adam_step, learning_rate
from .pipeline import (ConfigError, ExperimentConfig, Pipeline, RunStats, StageError,
                       StageLedger, config_from_dict, load_config)
from .rng import SplitMix64, derive_seed
from .tensor import Tensor, backward, no_grad
from .toy import ToySpec, generate_toy_files
from .training import TrainingSchedule, evaluate_loss, train

__version__ = "0.1.0"

__all__ = [
    "ALL_STRATEGIES", "AdamState", "BleuBreakdown", "ConfigError", "DecodeSettings",
    "ExperimentConfig", "LrSchedule", "MergeTable", "MixStrategy", "ModelConfig",
    "ModelRole", "MonolingualCorpus", "ParallelCorpus", "Pipeline",
    "RepairQualityReport", "RunStats", "SplitMix64", "StageError", "StageLedger",
    "Tensor", "Tokenizer", "ToySpec", "TrainingSchedule", "TransformerModel",
    "Vocabulary", "adam_step", "backward", "batch_by_length", "beam_decode",
    "better_rate", "build_mixture", "change_rate", "check_gradients",
    "config_from_dict", "corpus_bleu", "derive_seed", "evaluate_loss",
    "generate_toy_files", "greedy_decode", "init_model", "label_smoothed_loss",
    "learn_merges", "learning_rate", "load_config", "load_model", "load_monolingual",
    "load_parallel", "no_grad", "repair_quality_report", "save_model",
    "sentence_bleu", "subsample_to_ratio", "train", "translate_corpus",
]
