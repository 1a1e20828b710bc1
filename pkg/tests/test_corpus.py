"""Corpus containers, loaders, token-budget batching, and mixing strategies."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arforge.corpus import (ALL_STRATEGIES, AlignmentError, CorpusError, MixStrategy,
                            MixtureError, MonolingualCorpus, Origin, PairKind,
                            ParallelCorpus, Provenance, batch_by_length, build_mixture,
                            load_monolingual, load_parallel, load_parallel_tsv,
                            subsample_to_ratio)


def mono(lines, lang="src", provenance=Provenance.AUTHENTIC):
    return MonolingualCorpus(list(lines), lang, provenance, Origin.MONOLINGUAL)


def parallel(n, kind=PairKind.AUTHENTIC, tag="p"):
    src = mono([f"{tag} s{i}" for i in range(n)])
    tgt = mono([f"{tag} t{i}" for i in range(n)], lang="tgt")
    return ParallelCorpus(src, tgt, kind)


# -- containers --------------------------------------------------------------


def test_monolingual_rejects_embedded_newline():
    with pytest.raises(CorpusError, match="line 2"):
        MonolingualCorpus(["ok", "bad\nline"], "src")


def test_parallel_rejects_mismatched_sides():
    with pytest.raises(AlignmentError, match="3 lines but .* 2"):
        ParallelCorpus(mono(["a", "b", "c"]), mono(["x", "y"], lang="tgt"))


def test_subset_preserves_metadata_and_order():
    corpus = parallel(5, kind=PairKind.BT)
    sub = corpus.subset([3, 1])
    assert sub.kind is PairKind.BT
    assert sub.source.lines == ["p s3", "p s1"]
    assert sub.target.lines == ["p t3", "p t1"]
    assert sub.source.language == "src" and sub.target.language == "tgt"


# -- file round trips ---------------------------------------------------------


def test_monolingual_save_load_round_trip(tmp_path):
    corpus = mono(["one line", "two  spaced", "three"])
    path = tmp_path / "mono.txt"
    corpus.save(path)
    loaded = load_monolingual(path, "src")
    assert loaded.lines == corpus.lines


def test_load_monolingual_drops_blank_lines(tmp_path):
    path = tmp_path / "mono.txt"
    path.write_text("a\n\n   \nb\n", encoding="utf-8")
    assert load_monolingual(path, "src").lines == ["a", "b"]


def test_load_parallel_drops_pair_when_either_side_blank(tmp_path):
    sp, tp = tmp_path / "s.txt", tmp_path / "t.txt"
    sp.write_text("s1\n\ns3\n", encoding="utf-8")
    tp.write_text("t1\nt2\nt3\n", encoding="utf-8")
    corpus = load_parallel(sp, tp, "src", "tgt")
    assert corpus.source.lines == ["s1", "s3"]
    assert corpus.target.lines == ["t1", "t3"]


def test_load_parallel_rejects_length_mismatch(tmp_path):
    sp, tp = tmp_path / "s.txt", tmp_path / "t.txt"
    sp.write_text("s1\ns2\n", encoding="utf-8")
    tp.write_text("t1\n", encoding="utf-8")
    with pytest.raises(AlignmentError):
        load_parallel(sp, tp, "src", "tgt")


def test_tsv_round_trip_and_tab_validation(tmp_path):
    corpus = parallel(3)
    path = tmp_path / "pairs.tsv"
    corpus.save_tsv(path)
    loaded = load_parallel_tsv(path, "src", "tgt")
    assert list(loaded.pairs()) == list(corpus.pairs())

    bad = tmp_path / "bad.tsv"
    bad.write_text("a\tb\tc\n", encoding="utf-8")
    with pytest.raises(CorpusError, match="exactly one tab"):
        load_parallel_tsv(bad, "src", "tgt")


def test_save_tsv_rejects_tab_in_sentence(tmp_path):
    corpus = ParallelCorpus(mono(["has\ttab"]), mono(["t"], lang="tgt"))
    with pytest.raises(CorpusError, match="tab"):
        corpus.save_tsv(tmp_path / "x.tsv")


# -- batching -----------------------------------------------------------------


def _pairs_of_lengths(src_lens, tgt_lens):
    return [([0] * s, [0] * t) for s, t in zip(src_lens, tgt_lens)]


def test_batching_packs_by_sorted_source_length():
    pairs = _pairs_of_lengths([3, 1, 2, 5], [1, 1, 1, 1])
    # sorted by source length: indices 1 (1), 2 (2), 0 (3), 3 (5)
    assert batch_by_length(pairs, 5, 100) == [[1, 2], [0], [3]]


def test_batching_closes_on_target_budget_too():
    pairs = _pairs_of_lengths([1, 1, 1], [4, 4, 4])
    assert batch_by_length(pairs, 100, 8) == [[0, 1], [2]]


def test_oversize_pair_forms_singleton_batch():
    pairs = _pairs_of_lengths([12, 1], [1, 1])
    assert batch_by_length(pairs, 5, 5) == [[1], [0]]


def test_batching_rejects_nonpositive_budget():
    with pytest.raises(CorpusError):
        batch_by_length(_pairs_of_lengths([1], [1]), 0, 5)


token_lists = st.lists(
    st.tuples(st.integers(min_value=1, max_value=12), st.integers(min_value=1, max_value=12)),
    min_size=0, max_size=40,
)


@given(token_lists, st.integers(min_value=4, max_value=30), st.integers(min_value=4, max_value=30))
@settings(max_examples=120, deadline=None)
def test_batches_partition_corpus_and_respect_budgets(lens, src_budget, tgt_budget):
    pairs = [([0] * s, [0] * t) for s, t in lens]
    batches = batch_by_length(pairs, src_budget, tgt_budget)
    flat = sorted(i for batch in batches for i in batch)
    assert flat == list(range(len(pairs)))
    for batch in batches:
        assert batch
        src_total = sum(len(pairs[i][0]) for i in batch)
        tgt_total = sum(len(pairs[i][1]) for i in batch)
        if len(batch) > 1:
            assert src_total <= src_budget and tgt_total <= tgt_budget


# -- subsampling ----------------------------------------------------------------


def test_subsample_returns_whole_corpus_when_under_quota():
    corpus = parallel(3)
    assert subsample_to_ratio(corpus, 10, 1.0, seed=1) is corpus


def test_subsample_hits_quota_and_keeps_order():
    corpus = parallel(20)
    sub = subsample_to_ratio(corpus, 10, 0.5, seed=7)
    assert len(sub) == 5
    positions = [corpus.source.lines.index(line) for line in sub.source.lines]
    assert positions == sorted(positions)
    # aligned subsetting: target picked at the same positions
    assert [corpus.target.lines[i] for i in positions] == sub.target.lines


def test_subsample_is_seed_deterministic():
    corpus = parallel(30)
    a = subsample_to_ratio(corpus, 10, 1.0, seed=3)
    b = subsample_to_ratio(corpus, 10, 1.0, seed=3)
    c = subsample_to_ratio(corpus, 10, 1.0, seed=4)
    assert a.source.lines == b.source.lines
    assert a.source.lines != c.source.lines


def test_subsample_rejects_negative_ratio():
    with pytest.raises(CorpusError):
        subsample_to_ratio(parallel(3), 3, -0.5, seed=0)


# -- strategy display names ------------------------------------------------------


@pytest.mark.parametrize("strategy,display", [
    (MixStrategy.BASE, "BASE"),
    (MixStrategy.BT, "BASE + BT"),
    (MixStrategy.FT, "BASE + FT"),
    (MixStrategy.BT_FT, "BASE + BT + FT"),
    (MixStrategy.BTR_REP, "BASE + BTR-REP"),
    (MixStrategy.FTR_REP, "BASE + FTR-REP"),
    (MixStrategy.BTR_ADD, "BASE + BTR-ADD"),
    (MixStrategy.FTR_ADD, "BASE + FTR-ADD"),
    (MixStrategy.BTR_ADD_FTR_ADD, "BASE + BTR-ADD + FTR-ADD"),
])
def test_display_names(strategy, display):
    assert strategy.display_name == display


def test_all_strategies_enumerates_nine():
    assert len(ALL_STRATEGIES) == 9
    assert ALL_STRATEGIES[0] is MixStrategy.BASE


# -- mixture construction ---------------------------------------------------------


AUTH = parallel(4, tag="auth")
BT = parallel(10, kind=PairKind.BT, tag="bt")
FT = parallel(10, kind=PairKind.FT, tag="ft")
BTR = parallel(10, kind=PairKind.BTR, tag="btr")
FTR = parallel(10, kind=PairKind.FTR, tag="ftr")


def kinds_of(plan):
    return [[c.kind for c in phase.corpora] for phase in plan.phases]


def test_base_uses_only_authentic_in_one_phase():
    plan = build_mixture(MixStrategy.BASE, AUTH)
    assert kinds_of(plan) == [[PairKind.AUTHENTIC]]
    assert plan.phases[0].total_pairs() == 4


def test_bt_mixes_into_single_phase_with_ratio_quota():
    plan = build_mixture(MixStrategy.BT, AUTH, bt=BT)
    assert kinds_of(plan) == [[PairKind.AUTHENTIC, PairKind.BT]]
    assert [len(c) for c in plan.phases[0].corpora] == [4, 4]


def test_ft_trains_first_then_fine_tunes_on_authentic():
    plan = build_mixture(MixStrategy.FT, AUTH, ft=FT)
    assert kinds_of(plan) == [[PairKind.FT], [PairKind.AUTHENTIC]]


def test_bt_ft_keeps_bt_in_fine_tune_phase_by_default():
    plan = build_mixture(MixStrategy.BT_FT, AUTH, bt=BT, ft=FT)
    assert kinds_of(plan) == [[PairKind.FT], [PairKind.AUTHENTIC, PairKind.BT]]


def test_bt_ft_can_move_bt_into_first_phase():
    plan = build_mixture(MixStrategy.BT_FT, AUTH, bt=BT, ft=FT, bt_in_first_phase=True)
    assert kinds_of(plan)[0] == [PairKind.FT, PairKind.BT]


def test_rep_strategies_replace_synthetic_with_repaired():
    plan = build_mixture(MixStrategy.BTR_REP, AUTH, btr=BTR)
    assert kinds_of(plan) == [[PairKind.AUTHENTIC, PairKind.BTR]]
    plan = build_mixture(MixStrategy.FTR_REP, AUTH, ftr=FTR)
    assert kinds_of(plan) == [[PairKind.FTR], [PairKind.AUTHENTIC]]


def test_add_strategies_keep_both_versions():
    plan = build_mixture(MixStrategy.BTR_ADD, AUTH, bt=BT, btr=BTR)
    assert kinds_of(plan) == [[PairKind.AUTHENTIC, PairKind.BT, PairKind.BTR]]
    plan = build_mixture(MixStrategy.FTR_ADD, AUTH, ft=FT, ftr=FTR)
    assert kinds_of(plan) == [[PairKind.FT, PairKind.FTR], [PairKind.AUTHENTIC]]


def test_combined_add_strategy_spans_both_phases():
    plan = build_mixture(MixStrategy.BTR_ADD_FTR_ADD, AUTH, bt=BT, ft=FT, btr=BTR, ftr=FTR)
    assert kinds_of(plan) == [
        [PairKind.FT, PairKind.FTR],
        [PairKind.AUTHENTIC, PairKind.BT, PairKind.BTR],
    ]
    # every synthetic corpus subsampled to the authentic size at ratio 1.0
    sizes = [[len(c) for c in phase.corpora] for phase in plan.phases]
    assert sizes == [[4, 4], [4, 4, 4]]


def test_missing_required_corpus_is_an_error():
    with pytest.raises(MixtureError, match="needs the btr corpus"):
        build_mixture(MixStrategy.BTR_ADD, AUTH, bt=BT)


def test_empty_authentic_is_an_error():
    empty = ParallelCorpus(mono([]), mono([], lang="tgt"))
    with pytest.raises(MixtureError, match="empty"):
        build_mixture(MixStrategy.BASE, empty)


def test_fractional_ratio_shrinks_synthetic_share():
    plan = build_mixture(MixStrategy.BT, AUTH, bt=BT, ratio=0.5)
    assert [len(c) for c in plan.phases[0].corpora] == [4, 2]


def test_mixture_summary_shape():
    plan = build_mixture(MixStrategy.BT, AUTH, bt=BT, seed=5)
    summary = plan.to_summary()
    assert summary["strategy"] == "BT"
    assert summary["display"] == "BASE + BT"
    assert summary["phases"] == [[{"kind": "authentic", "pairs": 4}, {"kind": "bt", "pairs": 4}]]


def test_mixture_subsample_is_seeded():
    a = build_mixture(MixStrategy.BT, AUTH, bt=BT, seed=1)
    b = build_mixture(MixStrategy.BT, AUTH, bt=BT, seed=1)
    assert a.phases[0].corpora[1].source.lines == b.phases[0].corpora[1].source.lines
