"""Work through the evaluation metrics by hand.

Corpus BLEU with its brevity penalty, the smoothed sentence variant, and
the two repair-quality rates: how often a repairer touches a sentence
(change rate) and how often the touch helped (better rate).
"""

import math

from arforge.metrics import (better_rate, change_rate, corpus_bleu,
                             repair_quality_report, sentence_bleu)
from arforge.pipeline import REPAIR_TABLE_HEADER, render_repair_row


def main():
    # one word short of the reference: all precisions are 1.0, so the whole
    # score is the brevity penalty exp(1 - 5/4) ~ 0.7788
    b = corpus_bleu(["a b c d"], ["a b c d e"])
    print(f"candidate 'a b c d' vs reference 'a b c d e':")
    print(f"  bleu {b.score:.2f}  brevity penalty {b.brevity_penalty:.4f} "
          f"(= e^-0.25 = {math.exp(-0.25):.4f})")
    print(f"  n-gram precisions {b.precisions}")

    perfect = corpus_bleu(["a b c d"], ["a b c d"])
    print(f"exact match scores {perfect.score:.1f}")

    # corpus BLEU pools n-gram counts across sentences; one unmatched order
    # still zeroes the whole product because nothing is smoothed
    pooled = corpus_bleu(["a b", "x y z"], ["a b", "x q z"])
    print(f"pooled two-sentence corpus: {pooled.score:.2f} "
          f"(the lone trigram 'x y z' matched nothing)")

    # which is why the per-sentence variant smooths zero counts
    print(f"sentence_bleu('a b', 'a x') = {sentence_bleu('a b', 'a x'):.2f}")

    # a repairer is judged on held-out (noisy, repaired, clean) triples
    noisy = ["the cat sat on teh mat", "dogs barks loud", "all fine here"]
    repaired = ["the cat sat on the mat", "dogs barks loud", "all fine her"]
    clean = ["the cat sat on the mat", "the dog barks loud", "all fine here"]
    cr = change_rate(noisy, repaired)
    br = better_rate(noisy, repaired, clean)
    print(f"change rate {cr:.3f} (2 of 3 touched), better rate {br:.3f} "
          f"(1 fix, 1 regression)")

    report = repair_quality_report("EN2EN", noisy, repaired, clean)
    print(REPAIR_TABLE_HEADER)
    print(render_repair_row(report.to_dict()))


if __name__ == "__main__":
    main()
