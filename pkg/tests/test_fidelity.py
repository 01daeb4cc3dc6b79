import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from recsample.fidelity import FidelityError, fidelity_report, fisher_pearson_skewness, ks_d_statistic
from recsample.graph import CollabGraph, KnowledgeGraph, NodeSet, induced_subgraph_cg
from recsample.ingest import SyntheticSpec, generate_synthetic
from recsample.samplers import SampleSpec, sample_pipeline

multisets = st.lists(st.integers(0, 20), min_size=1, max_size=50)


def brute_ks(a, b):
    best = 0.0
    for x in set(a) | set(b):
        fa = sum(v <= x for v in a) / len(a)
        fb = sum(v <= x for v in b) / len(b)
        best = max(best, abs(fa - fb))
    return best


def brute_skew(xs):
    n = len(xs)
    mean = math.fsum(xs) / n
    m2 = math.fsum((x - mean) ** 2 for x in xs) / n
    m3 = math.fsum((x - mean) ** 3 for x in xs) / n
    return m3 / m2 ** 1.5


class TestKS:
    @pytest.mark.parametrize("a,b,want", [
        ([3, 1, 2], [1, 2, 3], 0.0),
        ([1, 1, 2], [1, 2, 2], 1 / 3),
        ([1], [2], 1.0),
    ])
    def test_examples(self, a, b, want):
        assert ks_d_statistic(a, b) == pytest.approx(want, abs=1e-15)

    @pytest.mark.parametrize("a,b", [([], [1]), ([1], [])])
    def test_empty_raises(self, a, b):
        with pytest.raises(FidelityError):
            ks_d_statistic(a, b)

    @given(multisets, multisets)
    def test_matches_oracle(self, a, b):
        d = ks_d_statistic(a, b)
        assert abs(d - brute_ks(a, b)) <= 1e-12
        assert 0.0 <= d <= 1.0

    @given(multisets, multisets)
    def test_symmetric(self, a, b):
        assert ks_d_statistic(a, b) == ks_d_statistic(b, a)

    @given(multisets)
    def test_self_distance_zero(self, a):
        assert ks_d_statistic(a, a) == 0.0


class TestSkewness:
    def test_symmetric_example(self):
        assert fisher_pearson_skewness([1, 2, 3]) == 0.0

    def test_hand_computed(self):
        assert fisher_pearson_skewness([1, 1, 10]) == pytest.approx(54 / 18 ** 1.5, rel=1e-12)

    @pytest.mark.parametrize("xs", [[1, 2], [4, 4, 4, 4], []])
    def test_undefined(self, xs):
        with pytest.raises(FidelityError):
            fisher_pearson_skewness(xs)

    @given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=40))
    def test_matches_oracle(self, xs):
        if np.ptp(xs) < 1e-3:
            return
        want = brute_skew(xs)
        assert fisher_pearson_skewness(xs) == pytest.approx(want, rel=1e-10, abs=1e-12)

    @given(st.lists(st.integers(-50, 50), min_size=3, max_size=30),
           st.floats(0.1, 10) | st.floats(-10, -0.1), st.floats(-100, 100))
    def test_affine_equivariance(self, xs, c, d):
        if len(set(xs)) < 2:
            return
        base = fisher_pearson_skewness(xs)
        moved = fisher_pearson_skewness([c * x + d for x in xs])
        assert abs(moved - math.copysign(1, c) * base) <= 1e-9

    @given(st.lists(st.integers(-50, 50), min_size=1, max_size=20))
    def test_mirror_symmetric_input(self, half):
        xs = half + [-x for x in half]
        if len(set(xs)) < 2 or len(xs) < 3:
            return
        assert abs(fisher_pearson_skewness(xs)) <= 1e-12


class TestReport:
    def graphs(self):
        return generate_synthetic(SyntheticSpec(num_users=120, num_items=60, edges_per_user=6))

    def test_self_comparison(self):
        cg, kg = self.graphs()
        rep = fidelity_report((cg, kg), (cg, kg))
        assert all(v == 0.0 for v in rep.d_statistics.values())
        assert rep.user_ratio_original == rep.user_ratio_sample == 120 / 180
        assert rep.stime_original == rep.stime_sample
        assert rep.density_cg_original == pytest.approx(cg.num_edges / (120 * 60))
        assert rep.density_kg_original == pytest.approx(kg.num_triples / kg.num_entities ** 2)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_temporal_half_moves_times_later(self, seed):
        cg, kg = generate_synthetic(SyntheticSpec(num_users=120, num_items=60, edges_per_user=6, seed=seed))
        res = sample_pipeline(cg, kg, SampleSpec("ts", 0.5, seed=0))
        rep = fidelity_report((cg, kg), (res.cg_sample, res.kg_sample), res.kg_map)
        assert res.cg_sample.times.mean() > cg.times.mean()
        # older edges induced between recent nodes form a left tail
        assert rep.stime_sample < rep.stime_original
        assert rep.stime_sample == pytest.approx(brute_skew(res.cg_sample.times.tolist()), rel=1e-10)

    def test_dropping_high_degree_users(self):
        cg = CollabGraph.from_edges([(0, 0, 0), (0, 1, 1), (1, 0, 2), (2, 1, 3), (3, 2, 4), (3, 0, 5)])
        low = [u for u in range(cg.num_users) if cg.user_degrees()[u] <= 1]
        sub, _ = induced_subgraph_cg(cg, NodeSet.of(low, range(cg.num_items)))
        rep = fidelity_report((cg, None), (sub, None))
        want = brute_ks(cg.user_degrees().tolist(), sub.user_degrees().tolist())
        assert rep.d_statistics["cg_user"] == pytest.approx(want, abs=1e-12)
        assert rep.d_statistics["cg_user"] == pytest.approx(0.5)

    def test_empty_kg_fields_absent(self):
        cg, _ = self.graphs()
        rep = fidelity_report((cg, None), (cg, KnowledgeGraph.empty()))
        assert rep.d_statistics["kg_item_in"] is None and rep.density_kg_sample is None
        assert rep.to_json()["d_statistics"]["cg_item"] == 0.0

    def test_d_range_on_samples(self):
        cg, kg = self.graphs()
        for kind in ("ff", "ffb", "rw", "rj", "ps", "ts", "ns"):
            res = sample_pipeline(cg, kg, SampleSpec(kind, 0.2, seed=1))
            rep = fidelity_report((cg, kg), (res.cg_sample, res.kg_sample), res.kg_map)
            assert all(v is None or 0 <= v <= 1 for v in rep.d_statistics.values())
