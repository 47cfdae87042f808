import numpy as np
import pytest

from tkgq import evaluation, model
from tkgq.data import FilterIndex, build_filter_index
from tkgq.evaluation import RankingResult, evaluate, rank_query
from tkgq.model import ModelParams

import oracles
import synth


def params_for(vocab, dim=4, seed=0):
    return ModelParams.init(vocab.n_entities, vocab.n_relations,
                            vocab.n_timestamps, dim, seed=seed)


def oracle_evaluate(params, quads, filter_index) -> RankingResult:
    """Brute-force reference ranker: same model scores, but filtering and
    rank arithmetic redone by per-candidate scan in plain Python."""
    n_rel = params.n_relations
    ranks = []
    for direction in ("tail", "head"):
        for h, r, t, tau in np.asarray(quads).tolist():
            if direction == "tail":
                e, rel, gold = h, r, t
            else:
                e, rel, gold = t, r + n_rel, h
            scores = model.score_all_entities(params.astype(np.float64), e, rel, tau)
            true_ids = set(filter_index.answers(e, rel, tau).tolist())
            ranks.append(oracles.rank_by_scan(scores.tolist(), gold, true_ids - {gold}))
    return RankingResult.from_ranks(np.array(ranks))


class TestRankQuery:
    def make_fixed(self):
        # |E| = 3, with directly planted candidate scores via a diagonal trick:
        # entity j = e_j scaled, relation/time identity-ish
        vocab_sizes = (3, 1, 1)
        p = ModelParams.init(*vocab_sizes, dim=1, seed=0)
        return p

    def test_gold_highest_is_rank_one(self):
        rng = np.random.default_rng(0)
        vocab, ds = synth.make_bundle(rng, n_entities=4)
        p = params_for(vocab)
        filt = build_filter_index(ds)
        scores = model.score_all_entities(p, 0, 0, 0)
        gold = int(np.argmax(scores))
        assert rank_query(p, (0, 0, 0), gold, filt) == 1

    def test_gold_lowest_no_filtering(self):
        rng = np.random.default_rng(1)
        vocab, ds = synth.make_bundle(rng, n_entities=3, n_timestamps=2)
        p = params_for(vocab)
        # query key absent from the filter index -> nothing removed
        empty = FilterIndex({})
        scores = model.score_all_entities(p, 1, 2, 1)
        gold = int(np.argmin(scores))
        assert rank_query(p, (1, 2, 1), gold, empty) == 3

    def test_filtered_competitors_removed(self):
        rng = np.random.default_rng(2)
        vocab, ds = synth.make_bundle(rng, n_entities=5)
        p = params_for(vocab)
        scores = model.score_all_entities(p, 0, 1, 0)
        order = np.argsort(-scores)
        gold = int(order[2])  # two entities score higher
        # filter away the top-2 as known true answers
        filt = FilterIndex({(0, 1, 0): np.array(sorted([order[0], order[1], gold]), dtype=np.int32)})
        assert rank_query(p, (0, 1, 0), gold, filt) == 1

    def test_tie_breaking_half_rounded_worse(self):
        vocab, _ = synth.make_bundle(np.random.default_rng(3), n_entities=4)
        p = params_for(vocab)
        # make all entities identical: every candidate ties with gold
        for comp in p.entity.components():
            comp[:] = comp[0]
        # 3 ties -> rank = 1 + 0 + (3+1)//2 = 3
        assert rank_query(p, (0, 0, 0), 2, FilterIndex({})) == 3

    def test_matches_scan_oracle_on_random_models(self):
        rng = np.random.default_rng(4)
        for trial in range(10):
            vocab, ds = synth.make_bundle(
                rng, n_entities=int(rng.integers(3, 9)), n_train=10
            )
            p = params_for(vocab, seed=trial)
            filt = build_filter_index(ds)
            h, r, t, tau = ds.test[0].tolist()
            got = rank_query(p, (h, r, tau), t, filt)
            scores = model.score_all_entities(p, h, r, tau)
            true_ids = set(filt.answers(h, r, tau).tolist()) - {t}
            assert got == oracles.rank_by_scan(scores.tolist(), t, true_ids)


class TestEvaluate:
    def test_all_rank_one(self):
        ranks = np.ones(8, dtype=int)
        res = RankingResult.from_ranks(ranks)
        assert res.mrr == 1.0
        assert res.hits == {1: 1.0, 3: 1.0, 10: 1.0}

    def test_known_rank_arithmetic(self):
        res = RankingResult.from_ranks(np.array([1, 2, 4, 10]))
        assert res.mrr == pytest.approx(0.4625)
        assert res.hits[1] == 0.25
        assert res.hits[3] == 0.5
        assert res.hits[10] == 1.0

    def test_two_queries_per_fact(self):
        rng = np.random.default_rng(5)
        vocab, ds = synth.make_bundle(rng, n_test=6)
        p = params_for(vocab)
        res = evaluate(p, ds.test, build_filter_index(ds))
        assert res.n_queries == 12
        assert len(res.ranks) == 12

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(6)
        vocab, ds = synth.make_bundle(rng, n_entities=7, n_train=15, n_test=5)
        p = params_for(vocab, seed=9)
        filt = build_filter_index(ds)
        got = evaluate(p, ds.test, filt)
        expect = oracle_evaluate(p, ds.test, filt)
        np.testing.assert_array_equal(got.ranks, expect.ranks)
        assert got.mrr == expect.mrr
        assert got.hits == expect.hits

    def test_block_size_has_no_effect(self):
        rng = np.random.default_rng(7)
        vocab, ds = synth.make_bundle(rng, n_test=9)
        p = params_for(vocab)
        filt = build_filter_index(ds)
        a = evaluate(p, ds.test, filt, block=2)
        b = evaluate(p, ds.test, filt, block=1000)
        np.testing.assert_array_equal(a.ranks, b.ranks)

    def test_metric_invariants(self):
        rng = np.random.default_rng(8)
        vocab, ds = synth.make_bundle(rng, n_test=8)
        p = params_for(vocab)
        res = evaluate(p, ds.test, build_filter_index(ds))
        assert res.hits[1] <= res.hits[3] <= res.hits[10] <= 1.0
        assert res.hits[1] <= res.mrr <= 1.0

    def test_filtered_rank_never_worse_than_unfiltered(self):
        rng = np.random.default_rng(9)
        vocab, ds = synth.make_bundle(rng, n_train=25, n_test=8)
        p = params_for(vocab)
        filt = build_filter_index(ds)
        filtered = evaluate(p, ds.test, filt)
        unfiltered = evaluate(p, ds.test, FilterIndex({}))
        assert (filtered.ranks <= unfiltered.ranks).all()

    def test_rank_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(10)
        vocab, ds = synth.make_bundle(rng, n_test=6)
        p = params_for(vocab)
        filt = build_filter_index(ds)
        base = evaluate(p, ds.test, filt)
        # scaling all entity embeddings scales every score by the same
        # positive factor: a strictly monotone transform of the candidates
        for comp in p.entity.components():
            comp *= 3.0
        scaled = evaluate(p, ds.test, filt)
        np.testing.assert_array_equal(base.ranks, scaled.ranks)

    def test_mean_of_independent_queries(self):
        rng = np.random.default_rng(11)
        vocab, ds = synth.make_bundle(rng, n_test=5)
        p = params_for(vocab)
        filt = build_filter_index(ds)
        res = evaluate(p, ds.test, filt)
        singles = []
        for h, r, t, tau in ds.test.tolist():
            singles.append(rank_query(p, (h, r, tau), t, filt))
        for h, r, t, tau in ds.test.tolist():
            singles.append(rank_query(p, (t, r + ds.n_relations, tau), h, filt))
        np.testing.assert_array_equal(res.ranks, np.array(singles))


class TestReports:
    def test_format_table(self):
        res = RankingResult.from_ranks(np.array([1, 2]))
        text = evaluation.format_table(res, title="test")
        assert "MRR" in text
        assert "Hits@10" in text
        assert "0.750000" in text  # (1 + 0.5) / 2

    def test_write_results_key_value(self, tmp_path):
        res = RankingResult.from_ranks(np.array([1, 4]))
        path = tmp_path / "results.txt"
        evaluation.write_results(path, res, split="test")
        content = dict(
            line.split(" = ") for line in path.read_text().strip().splitlines()
        )
        assert content["split"] == "test"
        assert float(content["mrr"]) == pytest.approx(0.625)
        assert int(content["n_queries"]) == 2

    def test_rank_dump(self, tmp_path):
        rng = np.random.default_rng(12)
        vocab, ds = synth.make_bundle(rng, n_test=3)
        p = params_for(vocab)
        res = evaluate(p, ds.test, build_filter_index(ds))
        path = tmp_path / "ranks.tsv"
        evaluation.write_rank_dump(path, ds.test, res)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "fact\tdirection\tgold\trank"
        assert len(lines) == 1 + 6
        first = lines[1].split("\t")
        assert first[1] == "tail"
        assert int(first[2]) == ds.test[0, 2]
