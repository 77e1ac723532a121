import math

import numpy as np
import pytest

from softctc import (
    ConfusionNetwork,
    ConfusionSet,
    Labeling,
    NBestList,
    ValidationError,
    Vocabulary,
    best_path,
    build_cn,
    count_variant_paths,
    merge_cns,
    normalize_cn,
    outlier_metric,
    prune,
    smooth,
    trivial_cn,
)
from softctc.confusion import levenshtein_align
from softctc.oracle import enumerate_cn_strings

V = Vocabulary.from_characters("actu")


def lab(text):
    return V.encode(text)


def nbest(*pairs):
    return NBestList(tuple((lab(t), w) for t, w in pairs))


def set_by_name(s):
    return {V.symbols[k]: p for k, p in sorted(s.alternatives.items())}


class TestConfusionSet:
    def test_rejects_empty_alternatives(self):
        with pytest.raises(ValidationError):
            ConfusionSet({}, 1.0)

    def test_rejects_nonpositive_alternative(self):
        with pytest.raises(ValidationError):
            ConfusionSet({0: 0.0})

    def test_rejects_negative_null(self):
        with pytest.raises(ValidationError):
            ConfusionSet({0: 1.0}, -0.1)

    def test_size_counts_null_only_when_present(self):
        assert ConfusionSet({0: 0.5, 1: 0.5}).size() == 2
        assert ConfusionSet({0: 0.5, 1: 0.3}, 0.2).size() == 3

    def test_best_prefers_smaller_symbol_on_tie(self):
        sym, score = ConfusionSet({1: 0.5, 0: 0.5}).best()
        assert sym == 0 and score == 0.5

    def test_best_null_wins_only_strictly(self):
        sym, _ = ConfusionSet({0: 0.5}, 0.5).best()
        assert sym == 0
        sym, score = ConfusionSet({0: 0.4}, 0.6).best()
        assert sym is None and score == 0.6

    def test_normalized_is_exact_for_exact_totals(self):
        s = ConfusionSet({0: 0.6, 1: 0.3}, 0.1).normalized()
        assert s.alternatives == {0: 0.6, 1: 0.3}
        assert s.null == 0.1


class TestNetworkValidation:
    def test_normalized_flag_checks_set_totals(self):
        with pytest.raises(ValidationError):
            ConfusionNetwork((ConfusionSet({0: 0.5}),), normalized=True)

    def test_raw_network_allows_any_totals(self):
        cn = ConfusionNetwork(
            (ConfusionSet({0: 2.5}),), normalized=False, total_score=2.5
        )
        assert cn.total_score == 2.5

    def test_trivial_cn(self):
        cn = trivial_cn(lab("cat"))
        assert len(cn) == 3
        assert all(s.size() == 1 for s in cn.sets)
        assert best_path(cn).symbols == lab("cat").symbols


class TestLevenshteinAlign:
    def test_identity_is_all_matches(self):
        ops = levenshtein_align((0, 1, 2), (0, 1, 2))
        assert [op for op, _, _ in ops] == ["match"] * 3

    def test_single_substitution(self):
        ops = levenshtein_align(lab("cat").symbols, lab("cut").symbols)
        assert [op for op, _, _ in ops] == ["match", "substitute", "match"]

    def test_insertion_in_the_middle(self):
        # "cat" vs "cast": insert after the second position
        va = Vocabulary.from_characters("acst")
        ops = levenshtein_align(va.encode("cat").symbols, va.encode("cast").symbols)
        assert [op for op, _, _ in ops] == ["match", "match", "insert", "match"]

    def test_deletion(self):
        ops = levenshtein_align(lab("cat").symbols, lab("ct").symbols)
        assert [op for op, _, _ in ops] == ["match", "delete", "match"]

    def test_prefers_substitution_over_indel_pairs(self):
        ops = levenshtein_align((0, 1), (1, 0))
        assert [op for op, _, _ in ops] == ["substitute", "substitute"]

    def test_empty_sides(self):
        assert [op for op, _, _ in levenshtein_align((), (0, 1))] == ["insert", "insert"]
        assert [op for op, _, _ in levenshtein_align((0, 1), ())] == ["delete", "delete"]


class TestBuildCn:
    def test_single_hypothesis_trivial(self):
        cn = build_cn(nbest(("cat", 0.9)))
        assert [set_by_name(s) for s in cn.sets] == [{"c": 1.0}, {"a": 1.0}, {"t": 1.0}]
        assert all(s.null == 0.0 for s in cn.sets)

    def test_substitution_pair(self):
        cn = build_cn(nbest(("cat", 0.6), ("cut", 0.3)))
        mid = cn.sets[1]
        assert set_by_name(mid) == pytest.approx({"a": 2 / 3, "u": 1 / 3})
        assert mid.null == 0.0

    def test_deletion_pair_adds_null(self):
        cn = build_cn(nbest(("cat", 0.6), ("ct", 0.3)))
        mid = cn.sets[1]
        assert set_by_name(mid) == pytest.approx({"a": 2 / 3})
        assert mid.null == pytest.approx(1 / 3)

    def test_three_way_golden_trace(self):
        cn = build_cn(nbest(("cat", 0.6), ("cut", 0.3), ("ct", 0.1)))
        assert [set_by_name(s) for s in cn.sets] == [
            {"c": 1.0},
            {"a": 0.6, "u": 0.3},
            {"t": 1.0},
        ]
        assert [s.null for s in cn.sets] == [0.0, 0.1, 0.0]

    def test_insertion_creates_set_with_prior_mass_on_null(self):
        va = Vocabulary.from_characters("acst")
        nb = NBestList(((va.encode("cat"), 0.7), (va.encode("cast"), 0.2)))
        cn = build_cn(nb, normalize=False)
        inserted = cn.sets[2]
        assert inserted.alternatives == {va.encode("s").symbols[0]: 0.2}
        assert inserted.null == pytest.approx(0.7)

    def test_fold_order_is_by_descending_weight(self):
        # listed out of order; the top hypothesis must still seed the network
        cn = build_cn(nbest(("ct", 0.1), ("cat", 0.6), ("cut", 0.3)))
        assert best_path(cn).symbols == lab("cat").symbols

    def test_mass_conservation_every_set(self):
        rng = np.random.default_rng(5)
        texts = ["cat", "cut", "ct", "at", "cata", "ca", "tau", "c", ""]
        for _ in range(40):
            chosen = rng.choice(len(texts), size=rng.integers(2, 6), replace=False)
            weights = rng.uniform(0.05, 1.0, size=len(chosen))
            weights /= weights.sum() * rng.uniform(1.0, 2.0)
            nb = NBestList(
                tuple((lab(texts[i]), float(w)) for i, w in zip(chosen, weights))
            )
            cn = build_cn(nb, normalize=False)
            for s in cn.sets:
                assert s.total() == pytest.approx(nb.total_weight, abs=1e-9)

    def test_implied_distribution_sums_to_one(self):
        rng = np.random.default_rng(6)
        texts = ["cat", "cut", "ct", "at", "ca", ""]
        for _ in range(25):
            chosen = rng.choice(len(texts), size=rng.integers(2, 5), replace=False)
            weights = rng.uniform(0.05, 1.0, size=len(chosen))
            weights /= weights.sum()
            nb = NBestList(
                tuple((lab(texts[i]), float(w)) for i, w in zip(chosen, weights))
            )
            cn = build_cn(nb)
            total = sum(w for _, w in enumerate_cn_strings(cn))
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_every_hypothesis_recoverable_as_path(self):
        nb = nbest(("cat", 0.5), ("cut", 0.2), ("at", 0.2), ("ca", 0.1))
        cn = build_cn(nb)
        strings = {labd.symbols for labd, _ in enumerate_cn_strings(cn)}
        for labd, _ in nb.entries:
            assert labd.symbols in strings


class TestBestPath:
    def test_argmax_per_set(self):
        cn = build_cn(nbest(("cat", 0.6), ("cut", 0.3)))
        assert V.decode(best_path(cn)) == "cat"

    def test_null_dominant_set_contributes_nothing(self):
        cn = ConfusionNetwork((ConfusionSet({0: 0.4}, 0.6),))
        assert best_path(cn).symbols == ()

    def test_top_hypothesis_survives_construction(self):
        nb = nbest(("cat", 0.5), ("cut", 0.25), ("ta", 0.25))
        assert V.decode(best_path(build_cn(nb))) == "cat"


class TestMergeCns:
    def test_merge_with_itself_is_identity_after_normalization(self):
        raw = build_cn(nbest(("cat", 0.6), ("cut", 0.3)), normalize=False)
        merged = merge_cns([raw, raw])
        reference = normalize_cn(raw)
        assert len(merged) == len(reference)
        for m, r in zip(merged.sets, reference.sets):
            assert set_by_name(m) == pytest.approx(set_by_name(r))
            assert m.null == pytest.approx(r.null)

    def test_insertion_set_gets_other_networks_mass_on_null(self):
        a = ConfusionNetwork(
            (ConfusionSet({0: 0.8}),), normalized=False, total_score=0.8
        )
        b = ConfusionNetwork(
            (ConfusionSet({0: 0.5}), ConfusionSet({1: 0.5})),
            normalized=False,
            total_score=0.5,
        )
        merged = merge_cns([a, b])
        assert len(merged) == 2
        assert merged.sets[0].alternatives == {0: 1.0}
        assert merged.sets[1].alternatives[1] == pytest.approx(0.5 / 1.3)
        assert merged.sets[1].null == pytest.approx(0.8 / 1.3)

    def test_merge_weighs_inputs_by_total_confidence(self):
        heavy = build_cn(nbest(("cat", 0.8)), normalize=False)
        light = build_cn(nbest(("cut", 0.2)), normalize=False)
        merged = merge_cns([heavy, light])
        mid = merged.sets[1]
        assert set_by_name(mid) == pytest.approx({"a": 0.8, "u": 0.2})

    def test_merge_requires_raw_networks(self):
        normalized = build_cn(nbest(("cat", 1.0)))
        with pytest.raises(ValidationError):
            merge_cns([normalized, normalized])

    def test_merge_single_network_normalizes(self):
        raw = build_cn(nbest(("cat", 0.6), ("ct", 0.2)), normalize=False)
        merged = merge_cns([raw])
        for s in merged.sets:
            assert s.total() == pytest.approx(1.0)

    def test_merge_mass_conservation(self):
        a = build_cn(nbest(("cat", 0.5), ("cut", 0.2)), normalize=False)
        b = build_cn(nbest(("at", 0.2), ("ct", 0.1)), normalize=False)
        merged = merge_cns([a, b])
        # every set of the merged normalized network sums to one
        for s in merged.sets:
            assert s.total() == pytest.approx(1.0, abs=1e-9)


class TestSmooth:
    def cn_of(self, alts, null=0.0):
        return ConfusionNetwork((ConfusionSet(alts, null),))

    def test_identity_at_one(self):
        cn = self.cn_of({0: 0.9, 1: 0.1})
        out = smooth(cn, 1)
        assert out.sets[0].alternatives == {0: 0.9, 1: 0.1}

    def test_square_root_case(self):
        out = smooth(self.cn_of({0: 0.9, 1: 0.1}), 2)
        assert out.sets[0].alternatives[0] == pytest.approx(0.75, abs=1e-12)
        assert out.sets[0].alternatives[1] == pytest.approx(0.25, abs=1e-12)

    def test_infinity_is_uniform_including_null(self):
        out = smooth(self.cn_of({0: 0.8, 1: 0.15}, 0.05), math.inf)
        s = out.sets[0]
        assert s.alternatives == pytest.approx({0: 1 / 3, 1: 1 / 3})
        assert s.null == pytest.approx(1 / 3)

    def test_infinity_skips_absent_null(self):
        out = smooth(self.cn_of({0: 0.8, 1: 0.2}), math.inf)
        assert out.sets[0].alternatives == pytest.approx({0: 0.5, 1: 0.5})
        assert out.sets[0].null == 0.0

    def test_composition_law(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            probs = rng.dirichlet(np.ones(3))
            cn = self.cn_of({0: probs[0], 1: probs[1]}, probs[2])
            a, b = rng.uniform(1.0, 4.0, size=2)
            twice = smooth(smooth(cn, a), b).sets[0]
            once = smooth(cn, a * b).sets[0]
            for k in twice.alternatives:
                assert twice.alternatives[k] == pytest.approx(once.alternatives[k], abs=1e-9)
            assert twice.null == pytest.approx(once.null, abs=1e-9)

    def test_rejects_degrees_below_one(self):
        with pytest.raises(ValidationError):
            smooth(self.cn_of({0: 1.0}), 0.5)


class TestPrune:
    def cn_of(self, alts, null=0.0):
        return ConfusionNetwork((ConfusionSet(alts, null),))

    def test_below_cutoff_removed(self):
        out = prune(self.cn_of({0: 0.995, 1: 0.005}))
        assert out.sets[0].alternatives == {0: 1.0}

    def test_nothing_below_cutoff_unchanged(self):
        out = prune(self.cn_of({0: 0.6, 1: 0.4}))
        assert out.sets[0].alternatives == {0: 0.6, 1: 0.4}

    def test_null_never_pruned(self):
        out = prune(self.cn_of({0: 0.99, 1: 0.006}, 0.004))
        s = out.sets[0]
        assert s.alternatives == pytest.approx({0: 0.99 / 0.994})
        assert s.null == pytest.approx(0.004 / 0.994)

    def test_exactly_at_cutoff_removed(self):
        out = prune(self.cn_of({0: 0.99, 1: 0.01}))
        assert list(out.sets[0].alternatives) == [0]

    def test_keeps_best_when_everything_falls_below(self):
        out = prune(self.cn_of({0: 0.004, 1: 0.006}, 0.99))
        s = out.sets[0]
        assert list(s.alternatives) == [1]
        assert s.null == pytest.approx(0.99 / 0.996)

    def test_idempotent(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            probs = rng.dirichlet(np.full(4, 0.3))
            cn = self.cn_of({0: probs[0], 1: probs[1], 2: probs[2]}, probs[3])
            once = prune(cn)
            twice = prune(once)
            assert set(once.sets[0].alternatives) == set(twice.sets[0].alternatives)
            for k, p in once.sets[0].alternatives.items():
                assert twice.sets[0].alternatives[k] == pytest.approx(p, rel=1e-12)
            assert twice.sets[0].null == pytest.approx(once.sets[0].null, abs=1e-12)


class TestOutlierMetric:
    def test_singletons(self):
        cn = trivial_cn(lab("cata"))
        assert outlier_metric(cn) == 0.25

    def test_mixed_sizes(self):
        sets = (
            ConfusionSet({0: 0.5, 1: 0.5}),
            ConfusionSet({0: 0.4, 1: 0.3}, 0.3),
            ConfusionSet({0: 1.0}),
            ConfusionSet({0: 0.5, 1: 0.3}, 0.2),
        )
        cn = ConfusionNetwork(sets)
        assert outlier_metric(cn) == pytest.approx(18 / 4)

    def test_empty_network(self):
        cn = trivial_cn(Labeling(()))
        assert outlier_metric(cn) == 0.0


class TestCountVariantPaths:
    def test_all_singletons(self):
        assert count_variant_paths(trivial_cn(lab("catca"))) == 1

    def test_product_of_sizes(self):
        sets = tuple(ConfusionSet({0: 0.6, 1: 0.4}) for _ in range(3))
        assert count_variant_paths(ConfusionNetwork(sets)) == 8

    def test_exact_big_integer(self):
        sets = tuple(
            ConfusionSet({k: 1.0 / 13 for k in range(12)}, 1.0 / 13) for _ in range(20)
        )
        cn = ConfusionNetwork(sets)
        assert count_variant_paths(cn) == 13**20
