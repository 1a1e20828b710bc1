"""Command-line surface: one subcommand per pipeline operation.

Every subcommand takes --config pointing at an experiment JSON file plus a
small set of override flags; flags beat the AR_FORGE_RUN_DIR environment
variable, which beats the config file.  The effective configuration is
echoed into the run directory on every invocation.

Exit codes: 0 success, 1 stage failure, 2 usage error, 3 config error.
Expected failures print a single `arforge: <class>-error:` line to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from .corpus import MixStrategy
from .pipeline import (REPAIR_TABLE_HEADER, ConfigError, ExperimentConfig, Pipeline,
                       StageError, load_config, render_repair_row, render_report_table)

_STRATEGY_COMMANDS = ("mix", "train", "evaluate", "run-all")
_COMMANDS = (
    ("learn-bpe", "learn the joint subword merges and vocabulary"),
    ("pretrain", "train the forward and reverse base translation models"),
    ("synth", "translate both monolingual corpora into synthetic parallel data"),
    ("ar-data", "build round-trip repair pairs and split off their dev sets"),
    ("train-ar", "train the two same-language repair models"),
    ("repair", "repair both synthetic corpora with the trained repair models"),
    ("mix", "summarize the training mixture each strategy would use"),
    ("train", "train one translation model per mixing strategy"),
    ("evaluate", "score trained strategy models on the held-out test set"),
    ("ar-report", "score both repair models on their held-out dev pairs"),
    ("run-all", "run every stage in order and write the final report"),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arforge",
        description="synthetic-parallel-data repair experiments at desk scale")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, help_text in _COMMANDS:
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", required=True, metavar="PATH",
                       help="experiment configuration JSON file")
        p.add_argument("--run-dir", metavar="DIR",
                       help="override the run directory (also honors AR_FORGE_RUN_DIR)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--beam", type=int, help="override the decode beam size")
        p.add_argument("--alpha", type=float,
                       help="override the decode length-normalization strength")
        p.add_argument("--max-len-factor", type=int,
                       help="override the decode length budget multiplier")
        if name in _STRATEGY_COMMANDS:
            p.add_argument("--strategies", metavar="LIST",
                           help="comma-separated subset of mixing strategies")
        if name in ("ar-report", "run-all"):
            p.add_argument("--format", choices=("json", "table"), default="table",
                           help="report rendering (default: table)")
    return parser


def _parse_strategy_list(raw: str) -> tuple[MixStrategy, ...]:
    names = [part.strip() for part in raw.split(",") if part.strip()]
    if not names:
        raise ConfigError("--strategies: expected a comma-separated list of names")
    out = []
    for name in names:
        try:
            out.append(MixStrategy(name))
        except ValueError:
            known = ", ".join(s.value for s in MixStrategy)
            raise ConfigError(f"--strategies: unknown strategy {name!r} (known: {known})") from None
    if len(set(out)) != len(out):
        raise ConfigError("--strategies: list contains duplicates")
    return tuple(out)


def effective_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file merged with the environment and flag overrides."""
    config = load_config(args.config)
    run_dir = args.run_dir or os.environ.get("AR_FORGE_RUN_DIR") or config.run_dir
    updates: dict = {"run_dir": run_dir}
    if args.seed is not None:
        updates["seed"] = args.seed
    strategies = getattr(args, "strategies", None)
    if strategies is not None:
        updates["strategies"] = _parse_strategy_list(strategies)
    decode_updates = {}
    if args.beam is not None:
        decode_updates["beam_size"] = args.beam
    if args.alpha is not None:
        decode_updates["length_alpha"] = args.alpha
    if args.max_len_factor is not None:
        decode_updates["max_len_factor"] = args.max_len_factor
    try:
        if decode_updates:
            updates["decode"] = replace(config.decode, **decode_updates)
        return replace(config, **updates)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def emit_report(report: dict, format: str) -> str:
    """Render the final experiment report, canonically for JSON."""
    if format == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    return render_report_table(report)


def _print_stats(pipe: Pipeline) -> None:
    ran, skipped = pipe.stats.stages_run, pipe.stats.stages_skipped
    parts = [f"{len(ran)} stage(s) run", f"{len(skipped)} skipped"]
    if pipe.stats.training_steps:
        parts.append(f"{pipe.stats.training_steps} training steps")
    print("; ".join(parts))


def _dispatch(command: str, args: argparse.Namespace, pipe: Pipeline) -> None:
    config = pipe.config
    if command == "learn-bpe":
        tok = pipe.learn_tokenizer()
        print(f"tokenizer ready: {len(tok.table)} merges, {tok.vocab_size} symbols")
    elif command == "pretrain":
        s2t, t2s = pipe.pretrain()
        print(f"base models ready: {s2t.role.value}, {t2s.role.value} "
              f"({s2t.parameter_count()} parameters each)")
    elif command == "synth":
        paths = pipe.generate_synthetic()
        print(f"synthetic corpora: {paths['bt']}, {paths['ft']}")
    elif command == "ar-data":
        pipe.generate_ar_data()
        print(f"repair pairs ready under {pipe.run_dir / 'corpora' / 'ar'}")
    elif command == "train-ar":
        s2s, t2t = pipe.train_ar()
        print(f"repair models ready: {s2s.role.value}, {t2t.role.value}")
    elif command == "repair":
        paths = pipe.repair_synthetic()
        print(f"repaired corpora: {paths['bt']}, {paths['ft']}")
    elif command == "mix":
        for strategy in config.strategies:
            summary = pipe.build_strategy_mixture(strategy).to_summary()
            phases = " then ".join(
                " + ".join(f"{c['kind']}:{c['pairs']}" for c in phase)
                for phase in summary["phases"])
            print(f"{strategy.value} | {phases}")
    elif command == "train":
        for strategy in config.strategies:
            prefix = pipe.train_strategy(strategy)
            print(f"{strategy.value} | model at {prefix}")
    elif command == "evaluate":
        for strategy in config.strategies:
            bleu = pipe.evaluate_strategy(strategy)
            print(f"{strategy.display_name} | {bleu:.2f}")
    elif command == "ar-report":
        reports = [r.to_dict() for r in pipe.ar_quality_reports()]
        if args.format == "json":
            sys.stdout.write(json.dumps(reports, sort_keys=True, indent=2) + "\n")
        else:
            print(REPAIR_TABLE_HEADER)
            for row in reports:
                print(render_repair_row(row))
    elif command == "run-all":
        report, _ = pipe.full_run()
        sys.stdout.write(emit_report(report, args.format))
        print(f"report written to {pipe.report_json_path}")
    else:  # pragma: no cover - argparse rejects unknown subcommands
        raise ConfigError(f"unknown command {command!r}")


def run_command(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = effective_config(args)
        pipe = Pipeline(config)
        _dispatch(args.command, args, pipe)
        _print_stats(pipe)
        return 0
    except ConfigError as exc:
        print(f"arforge: config-error: {exc}", file=sys.stderr)
        return 3
    except StageError as exc:
        print(f"arforge: stage-error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    raise SystemExit(run_command())


if __name__ == "__main__":
    console_main()
