"""Train a miniature transformer on the bundled toy reversal language.

Small enough to watch end to end: learns subwords, trains a one-layer
model for a couple hundred steps, then decodes a few held-out sentences
greedily and with a beam and scores them.
"""

import time

from arforge.bpe import Tokenizer, learn_merges
from arforge.decoding import beam_decode, greedy_decode
from arforge.metrics import corpus_bleu
from arforge.model import ModelConfig, ModelRole, init_model
from arforge.toy import ToySpec, ToyTask
from arforge.training import TrainingSchedule, train


def main():
    spec = ToySpec(vocab_size=12, min_len=2, max_len=6,
                   train_pairs=300, dev_pairs=40, test_pairs=20, mono_lines=10)
    task = ToyTask(spec, seed=5)
    train_c = task.parallel(spec.train_pairs, "train", "src", "tgt")
    dev_c = task.parallel(spec.dev_pairs, "dev", "src", "tgt")

    table, vocab = learn_merges([train_c.source.lines, train_c.target.lines],
                                num_merges=60, vocab_cap=200)
    tok = Tokenizer(table, vocab)
    print(f"tokenizer: {len(table)} merges over {tok.vocab_size} symbols")

    def encode(corpus):
        return [(tok.encode(s), tok.encode(t)) for s, t in corpus.pairs()]

    cfg = ModelConfig(num_layers=1, model_dim=32, num_heads=2, ffn_dim=64)
    model = init_model(cfg, tok.vocab_size, tok.vocab_size, ModelRole.S2T, seed=5)
    print(f"model: {model.parameter_count()} parameters")

    sched = TrainingSchedule(max_steps=200, warmup_steps=60,
                             checkpoint_interval=40, seed=5)
    t0 = time.time()
    model, log = train(model, encode(train_c), encode(dev_c), sched)
    print(f"trained {log.steps_run} steps in {time.time() - t0:.0f}s, "
          f"best dev loss {min(l for _, l in log.dev_losses):.3f} "
          f"at step {log.best_step}")

    for src, ref in list(dev_c.pairs())[:5]:
        out = tok.decode(greedy_decode(model, tok.encode(src)))
        beam = tok.decode(beam_decode(model, tok.encode(src), beam_size=4))
        mark = "==" if out == ref else "!="
        print(f"  {src!r} -> {out!r} {mark} ref {ref!r}"
              + ("" if beam == out else f" (beam chose {beam!r})"))

    all_hyps = [tok.decode(beam_decode(model, tok.encode(s), beam_size=4))
                for s, _ in dev_c.pairs()]
    bleu = corpus_bleu(all_hyps, dev_c.target.lines)
    print(f"dev BLEU after 200 steps: {bleu.score:.2f}")


if __name__ == "__main__":
    main()
