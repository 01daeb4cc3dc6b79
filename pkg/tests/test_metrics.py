import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from recsample.metrics import (EvalInstance, average_precision, coverage_at_k, evaluate_rankings,
                               hr_at_k, ndcg_at_k, precision_recall_at_k, relative_delta)


def inst(ranking, relevant, n=None):
    return EvalInstance(ranking, frozenset(relevant), n or len(ranking))


@st.composite
def instances(draw):
    n = draw(st.integers(1, 20))
    ranking = draw(st.permutations(range(n)))
    relevant = draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=min(5, n)))
    return EvalInstance(list(ranking), frozenset(relevant), n)


# definition-level oracles, written position by position

def o_dcg(inst, k):
    return sum(1 / math.log2(p + 1) for p in range(1, min(k, len(inst.ranking)) + 1)
               if inst.ranking[p - 1] in inst.relevant)


def o_ndcg(inst, k):
    ideal = sum(1 / math.log2(p + 1) for p in range(1, min(k, len(inst.relevant)) + 1))
    return o_dcg(inst, k) / ideal


def o_hits(inst, k):
    return sum(1 for x in list(inst.ranking)[:k] if x in inst.relevant)


def o_ap(inst):
    total = 0.0
    for p in range(1, len(inst.ranking) + 1):
        if inst.ranking[p - 1] in inst.relevant:
            total += o_hits(inst, p) / p
    return total / len(inst.relevant)


class TestExamples:
    def test_ndcg(self):
        assert ndcg_at_k(inst([0, 1, 2], {0}), 20) == 1.0
        assert ndcg_at_k(inst([1, 0, 2], {0}), 20) == pytest.approx(1 / math.log2(3), abs=1e-15)
        assert ndcg_at_k(inst([1, 2, 0], {0}), 2) == 0.0

    def test_hr(self):
        assert hr_at_k(inst([1, 2, 0], {0}), 3) == 1.0
        assert hr_at_k(inst([1, 2, 0], {0}), 2) == 0.0
        rep = evaluate_rankings({0: [0, 1], 1: [1, 0]}, {0: {0}, 1: {0}}, 2, ks=(1,))
        assert rep.value("hr", 1) == 0.5

    def test_precision_recall(self):
        assert precision_recall_at_k(inst([0, 2, 1, 3], {0, 1}), 2) == (0.5, 0.5)
        assert precision_recall_at_k(inst([1, 0, 2], {0, 1}), 2) == (1.0, 1.0)
        assert precision_recall_at_k(inst([2, 3, 0], {0}), 2) == (0.0, 0.0)

    def test_coverage(self):
        assert coverage_at_k([[0, 1], [1, 2]], 2, 4) == 0.75
        assert coverage_at_k([[0, 1, 2]] * 3, 2, 5) == 2 / 5
        with pytest.raises(ValueError):
            coverage_at_k([[0]], 1, 0)

    def test_ap(self):
        assert average_precision(inst([0, 1, 2], {0})) == 1.0
        assert average_precision(inst([1, 2, 0], {0})) == pytest.approx(1 / 3, abs=1e-15)
        assert average_precision(inst([0, 1, 2], {0, 1})) == 1.0

    def test_invalid(self):
        with pytest.raises(ValueError):
            ndcg_at_k(inst([0], {0}), 0)
        with pytest.raises(ValueError):
            EvalInstance([0, 0], frozenset({0}), 2)
        with pytest.raises(ValueError):
            EvalInstance([0, 1], frozenset({5}), 2)
        with pytest.raises(ValueError):
            precision_recall_at_k(EvalInstance([0, 1], frozenset(), 2), 1)

    def test_relative_delta(self):
        assert relative_delta(0.9, 1.0) == pytest.approx(-0.1)
        assert relative_delta(1.0, 0.0) is None


class TestOracle:
    @given(instances(), st.integers(1, 25))
    def test_all_metrics(self, x, k):
        assert abs(ndcg_at_k(x, k) - o_ndcg(x, k)) <= 1e-12
        assert hr_at_k(x, k) == float(o_hits(x, k) > 0)
        p, r = precision_recall_at_k(x, k)
        assert abs(p - o_hits(x, k) / k) <= 1e-12
        assert abs(r - o_hits(x, k) / len(x.relevant)) <= 1e-12
        assert abs(average_precision(x) - o_ap(x)) <= 1e-12

    @given(st.lists(instances(), min_size=1, max_size=5), st.integers(1, 10))
    def test_coverage_oracle(self, xs, k):
        n = max(x.catalog_size for x in xs)
        seen = set()
        for x in xs:
            for item in list(x.ranking)[:k]:
                seen.add(int(item))
        assert abs(coverage_at_k([x.ranking for x in xs], k, n) - len(seen) / n) <= 1e-12

    @given(instances(), st.integers(1, 25))
    def test_range_and_perfect(self, x, k):
        for v in (ndcg_at_k(x, k), average_precision(x), *precision_recall_at_k(x, k)):
            assert 0.0 <= v <= 1.0
        ideal = sorted(x.ranking, key=lambda i: i not in x.relevant)
        assert ndcg_at_k(EvalInstance(ideal, x.relevant, x.catalog_size), k) == pytest.approx(1.0)


class TestProperties:
    @given(instances(), st.integers(1, 25), st.data())
    def test_moving_relevant_up_never_hurts(self, x, k, data):
        ranking = list(x.ranking)
        positions = [p for p, i in enumerate(ranking) if i in x.relevant and p > 0]
        if not positions:
            return
        p = data.draw(st.sampled_from(positions))
        q = data.draw(st.integers(0, p - 1))
        moved = ranking[:]
        moved.insert(q, moved.pop(p))
        y = EvalInstance(moved, x.relevant, x.catalog_size)
        assert ndcg_at_k(y, k) >= ndcg_at_k(x, k) - 1e-15
        assert hr_at_k(y, k) >= hr_at_k(x, k)
        assert precision_recall_at_k(y, k) >= precision_recall_at_k(x, k)
        assert average_precision(y) >= average_precision(x) - 1e-15

    @given(st.lists(st.permutations(range(8)), min_size=1, max_size=4), st.integers(1, 8), st.randoms())
    def test_coverage_ignores_order_within_top_k(self, lists, k, rnd):
        shuffled = []
        for r in lists:
            top = list(r[:k])
            rnd.shuffle(top)
            shuffled.append(top + list(r[k:]))
        assert coverage_at_k(lists, k, 8) == coverage_at_k(shuffled, k, 8)


class TestAggregate:
    def test_users_without_targets_excluded(self):
        rep = evaluate_rankings({0: [0, 1, 2], 1: [2, 1, 0], 2: [1, 0, 2]},
                                {0: {0}, 1: set(), 2: {0}}, 3, ks=(1, 2))
        assert rep.excluded_users == [1] and rep.num_users == 2
        assert rep.value("hr", 1) == 0.5
        assert rep.value("pr_auc_ap") == pytest.approx((1 + 0.5) / 2)
        assert rep.value("coverage", 1) == 2 / 3

    def test_rows_and_json(self):
        rep = evaluate_rankings({0: [0, 1]}, {0: {1}}, 2, ks=(1,))
        rows = rep.rows("inmo", "ts", 0.5, 0, {("ndcg", 1): -0.5})
        assert {r["metric"] for r in rows} == {"hr", "ndcg", "precision", "recall", "coverage", "pr_auc_ap"}
        assert [r["k"] for r in rows if r["metric"] == "pr_auc_ap"] == ["all"]
        assert [r["delta"] for r in rows if r["metric"] == "ndcg"] == [-0.5]
        back = type(rep).from_json(rep.to_json())
        assert back.means == rep.means
