"""Run the whole repair experiment at miniature scale and resume it.

Generates a tiny deterministic translation task, runs every stage of the
pipeline (pretrain, synthesize, round-trip repair pairs, repair models,
strategy training, evaluation), prints the final report, then runs again
to show the ledger skipping all finished work.

The point here is the plumbing: with 40-step models every score in the
report is noise.  For a calibrated run where repair visibly pays off,
use the bundled config (about 10 minutes):

    arforge run-all --config configs/toy.json
"""

import argparse
import time

from arforge.pipeline import Pipeline, config_from_dict


def make_config(run_dir):
    model = {"num_layers": 1, "model_dim": 32, "num_heads": 2, "ffn_dim": 64}
    return config_from_dict({
        "run_dir": str(run_dir),
        "seed": 5,
        "data": {"toy": {"vocab_size": 16, "min_len": 2, "max_len": 6,
                         "train_pairs": 120, "dev_pairs": 20, "test_pairs": 20,
                         "mono_lines": 120}},
        "tokenizer": {"num_merges": 80, "vocab_cap": 300},
        "nmt": {"model": model,
                "training": {"max_steps": 40, "warmup_steps": 20,
                             "checkpoint_interval": 10}},
        "ar": {"model": model,
               "training": {"max_steps": 40, "warmup_steps": 20,
                            "checkpoint_interval": 10}},
        "strategy_training": {"max_steps": 30, "warmup_steps": 20,
                              "checkpoint_interval": 10},
        "decode": {"beam_size": 2},
        "strategies": ["BASE", "BT", "BTR_ADD"],
        "ar_dev_size": 20,
    })


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--run-dir", default="runs/demo",
                        help="where artifacts land (default: runs/demo)")
    args = parser.parse_args()

    config = make_config(args.run_dir)
    t0 = time.time()
    pipeline = Pipeline(config)
    report, stats = pipeline.full_run()
    print(f"first run: {len(stats.stages_run)} stages, "
          f"{stats.training_steps} training steps, {time.time() - t0:.0f}s")
    print()
    print(pipeline.report_text_path.read_text(encoding="utf-8"))

    # the ledger remembers finished stages by config + input content hashes
    t0 = time.time()
    again, stats = Pipeline(config).full_run()
    print(f"second run: {len(stats.stages_run)} stages run, "
          f"{stats.training_steps} training steps, {time.time() - t0:.1f}s")
    assert again == report
    print("resumed report is identical")


if __name__ == "__main__":
    main()
