"""Learn a byte-pair vocabulary on a small corpus and poke at its behaviour.

Shows what the merge table looks like, that encode/decode round-trips any
training-alphabet text, and what happens to characters the vocabulary has
never seen.
"""

from arforge.bpe import UNK_ID, Tokenizer, learn_merges

CORPUS = [
    "the cat sat on the mat",
    "the dog sat on the log",
    "a cat and a dog sat together",
    "the mat and the log are damp",
]


def main():
    table, vocab = learn_merges([CORPUS], num_merges=30, vocab_cap=80)
    tok = Tokenizer(table, vocab)
    print(f"{len(table)} merges, {tok.vocab_size} symbols")
    print("first merges learned:")
    for left, right in table.merges[:8]:
        print(f"  {left!r} + {right!r}")

    for line in ("the cat sat", "a damp dog on the mat"):
        ids = tok.encode(line)
        pieces = [vocab.symbols[i] for i in ids]
        print(f"{line!r} -> {pieces} -> {tok.decode(ids)!r}")
        assert tok.decode(ids) == line

    # characters never seen in training map to the unknown id; decode marks them
    ids = tok.encode("the zebra sat")
    print(f"'the zebra sat' contains unknown ids: {UNK_ID in ids}")
    print(f"decoded back as: {tok.decode(ids)!r}")


if __name__ == "__main__":
    main()
