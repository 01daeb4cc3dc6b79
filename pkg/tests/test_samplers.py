import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from recsample.graph import (CollabGraph, KnowledgeGraph, NodeSet, induced_subgraph_cg,
                             induced_subgraph_kg)
from recsample.ingest import SyntheticSpec, generate_synthetic
from recsample.samplers import (SamplerKind, SampleSpec, edge_budget, forest_fire, niche_sample,
                                pinsage_sample, random_walk_sample, sample_graph, sample_pipeline,
                                temporal_sample)
from recsample.samplers._common import IndexedSet
from recsample.samplers.forest_fire import FireVariant, _ignite

from conftest import collab_graphs, knowledge_graphs

ALL_KINDS = list(SamplerKind)


def induced_edges(g, nodes: NodeSet) -> int:
    """Brute-force induced edge count."""
    if isinstance(g, CollabGraph):
        return sum(1 for u, i in zip(g.users.tolist(), g.items.tolist())
                   if u in nodes.users and i in nodes.items)
    return sum(1 for h, t in zip(g.heads.tolist(), g.tails.tolist())
               if h in nodes.entities and t in nodes.entities)


def max_degree(g) -> int:
    if isinstance(g, CollabGraph):
        return int(max(g.user_degrees().max(initial=0), g.item_degrees().max(initial=0)))
    return int((g.in_degrees() + g.out_degrees()).max(initial=0))


def run(g, kind, budget, seed=0, seeds=None):
    spec = SampleSpec(kind, 0.5, seed=seed)
    return sample_graph(g, kind, budget, spec, np.random.default_rng(seed), seeds)


def non_isolated(g: CollabGraph) -> NodeSet:
    return NodeSet.of(np.flatnonzero(g.user_degrees()), np.flatnonzero(g.item_degrees()))


class TestIndexedSet:
    @given(st.integers(1, 40), st.data())
    def test_kth_matches_sorted(self, n, data):
        members = data.draw(st.sets(st.integers(0, n - 1)))
        s = IndexedSet(n, members=members)
        removed = data.draw(st.sets(st.sampled_from(sorted(members)))) if members else set()
        for v in removed:
            s.discard(v)
        ref = sorted(members - removed)
        assert len(s) == len(ref)
        assert [s.kth(k) for k in range(len(ref))] == ref

    def test_full(self):
        s = IndexedSet(5, full=True)
        assert [s.kth(k) for k in range(5)] == [0, 1, 2, 3, 4]
        with pytest.raises(IndexError):
            s.kth(5)


class TestBudgetSoundness:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    @given(g=collab_graphs(max_users=7, max_items=7, min_edges=1), frac=st.floats(0, 1), seed=st.integers(0, 50))
    def test_cg(self, kind, g, frac, seed):
        b = math.floor(frac * g.num_edges)
        nodes = run(g, kind, b, seed)
        e = induced_edges(g, nodes)
        assert min(b, g.num_edges) <= e <= min(b, g.num_edges) + max_degree(g)

    @pytest.mark.parametrize("kind", [SamplerKind.FF, SamplerKind.FFB, SamplerKind.RW, SamplerKind.RJ])
    @given(kg=knowledge_graphs(max_entities=9), frac=st.floats(0, 1), seed=st.integers(0, 50))
    def test_kg(self, kind, kg, frac, seed):
        b = math.floor(frac * kg.num_triples)
        nodes = run(kg, kind, b, seed)
        e = induced_edges(kg, nodes)
        assert min(b, kg.num_triples) <= e <= min(b, kg.num_triples) + max_degree(kg)


class TestDeterminismAndExhaustion:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_same_seed_same_nodes(self, kind):
        g, _ = generate_synthetic(SyntheticSpec(num_users=60, num_items=30, edges_per_user=5))
        b = edge_budget(0.3, g.num_edges)
        assert run(g, kind, b, 7) == run(g, kind, b, 7)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    @given(g=collab_graphs(max_users=6, max_items=6, min_edges=1), seed=st.integers(0, 20))
    def test_full_budget(self, kind, g, seed):
        nodes = run(g, kind, g.num_edges, seed)
        if kind.bipartite_only:
            assert nodes == non_isolated(g)
        else:
            assert nodes == NodeSet.everything(g)

    @pytest.mark.parametrize("kind", [SamplerKind.PS, SamplerKind.TS, SamplerKind.NS])
    @given(g=collab_graphs(max_users=6, max_items=6, min_edges=1), data=st.data())
    def test_scan_monotone(self, kind, g, data):
        b1 = data.draw(st.integers(0, g.num_edges))
        b2 = data.draw(st.integers(b1, g.num_edges))
        assert run(g, kind, b1, 3).issubset(run(g, kind, b2, 3))

    def test_zero_budget_is_empty(self, small_cg):
        for kind in ALL_KINDS:
            assert len(run(small_cg, kind, 0)) == 0


class TestPinSage:
    # u1:{i1,i2}, u2:{i2,i3}
    G = CollabGraph.from_edges([(0, 0, 1), (0, 1, 1), (1, 1, 1), (1, 2, 1)])

    @staticmethod
    def seed_with_order(order):
        for s in range(100):
            if np.random.default_rng(s).permutation(np.array([0, 1])).tolist() == order:
                return s
        raise AssertionError("no seed")

    def test_budget_two_stops_after_first(self):
        s = self.seed_with_order([0, 1])
        nodes = pinsage_sample(self.G, 2, seed=s)
        assert nodes == NodeSet.of([0], [0, 1])
        assert induced_edges(self.G, nodes) == 2

    def test_budget_three_takes_second_whole(self):
        s = self.seed_with_order([0, 1])
        nodes = pinsage_sample(self.G, 3, seed=s)
        assert nodes == NodeSet.of([0, 1], [0, 1, 2])
        assert induced_edges(self.G, nodes) == 4

    @given(collab_graphs(max_users=6, max_items=6, min_edges=1), st.integers(0, 30), st.data())
    def test_matches_oracle(self, g, seed, data):
        b = data.draw(st.integers(0, g.num_edges))
        order = np.random.default_rng(seed).permutation(np.flatnonzero(g.user_degrees())).tolist()
        users, items = set(), set()
        for u in order:
            if induced_edges(g, NodeSet.of(users, items)) >= b:
                break
            users.add(u)
            items.update(g.user_items(u).tolist())
        assert pinsage_sample(g, b, seed=seed) == NodeSet.of(users, items)


class TestTemporal:
    def test_newest_three(self):
        g = CollabGraph.from_edges([(k, k, k + 1) for k in range(6)])
        nodes = temporal_sample(g, 3)
        assert nodes == NodeSet.of([3, 4, 5], [3, 4, 5])

    def test_tie_higher_index_first(self):
        g = CollabGraph.from_edges([(0, 0, 9), (1, 1, 9), (2, 2, 1)])
        assert temporal_sample(g, 1) == NodeSet.of([1], [1])

    @given(collab_graphs(max_users=6, max_items=6, min_edges=1), st.data())
    def test_matches_oracle(self, g, data):
        b = data.draw(st.integers(1, g.num_edges))
        order = sorted(range(g.num_edges), key=lambda k: (-int(g.times[k]), -k))
        users, items = set(), set()

        def count():
            return induced_edges(g, NodeSet.of(users, items))

        for k in order:
            users.add(int(g.users[k]))
            if count() >= b:
                break
            items.add(int(g.items[k]))
            if count() >= b:
                break
        assert temporal_sample(g, b) == NodeSet.of(users, items)


class TestNiche:
    def test_rarest_item_first(self):
        # i1:1, i2:2, i3:3 ; user 0 also rated i2, i3
        g = CollabGraph.from_edges([(0, 0, 0), (0, 1, 0), (1, 1, 0), (0, 2, 0), (1, 2, 0), (2, 2, 0)])
        nodes = niche_sample(g, 1)
        assert nodes == NodeSet.of([0], [0])
        assert induced_edges(g, nodes) == 1

    def test_equal_degree_low_index_first(self):
        g = CollabGraph.from_edges([(0, 1, 0), (1, 0, 0)])
        assert niche_sample(g, 1) == NodeSet.of([1], [0])

    @given(collab_graphs(max_users=6, max_items=6, min_edges=1), st.data())
    def test_matches_oracle(self, g, data):
        b = data.draw(st.integers(1, g.num_edges))
        deg = g.item_degrees().tolist()
        order = sorted((i for i in range(g.num_items) if deg[i] > 0), key=lambda i: (deg[i], i))
        users, items = set(), set()
        for i in order:
            items.add(i)
            users.update(g.item_users(i).tolist())
            if induced_edges(g, NodeSet.of(users, items)) >= b:
                break
        assert niche_sample(g, b) == NodeSet.of(users, items)


class TestForestFire:
    PATH = KnowledgeGraph.from_triples([(0, 0, 1), (1, 0, 2)])  # a -> b -> c

    def test_full_ignition_burns_everything(self):
        g, _ = generate_synthetic(SyntheticSpec(num_users=40, num_items=20, edges_per_user=4))
        nodes = forest_fire(g, None, g.num_edges, 1.0, 1.0, seed=1)
        assert nodes == NodeSet.everything(g)

    def test_path_trace(self):
        trace = []
        one = forest_fire(self.PATH, NodeSet.of(entities=[0]), 1, 1.0, 0.0, seed=0, trace=trace)
        assert one == NodeSet.of(entities=[0, 1])
        assert trace == [(0, "seed")]
        trace = []
        two = forest_fire(self.PATH, NodeSet.of(entities=[0]), 2, 1.0, 0.0, seed=0, trace=trace)
        assert two == NodeSet.of(entities=[0, 1, 2])
        # budget == |E| runs to exhaustion
        assert trace == [(0, "seed"), (1, "burning"), (2, "burning")]

    def test_longer_path_stops_at_budget(self):
        path = KnowledgeGraph.from_triples([(0, 0, 1), (1, 0, 2), (2, 0, 3)])
        trace = []
        nodes = forest_fire(path, NodeSet.of(entities=[0]), 2, 1.0, 0.0, seed=0, trace=trace)
        assert nodes == NodeSet.of(entities=[0, 1, 2])
        assert trace == [(0, "seed"), (1, "burning")]

    @given(kg=knowledge_graphs(max_entities=10), seed=st.integers(0, 100))
    def test_no_ignition_adds_one_node_per_step(self, kg, seed):
        trace = []
        b = max(kg.num_triples - 1, 0)
        nodes = forest_fire(kg, None, b, 0.0, 0.0, seed=seed, trace=trace)
        picked = [v for v, _ in trace]
        assert len(set(picked)) == len(picked) == len(nodes)
        assert all(src == "random" for _, src in trace)

    def test_seeds_processed_first(self):
        g, kg = generate_synthetic(SyntheticSpec(num_users=40, num_items=20, edges_per_user=4))
        seeds = [3, 7, 11]
        trace = []
        forest_fire(kg, NodeSet.of(entities=seeds), kg.num_triples, 0.0, 0.0, seed=2, trace=trace)
        assert sorted(v for v, _ in trace[:3]) == seeds

    def test_geometric_mean(self):
        rng = np.random.default_rng(0)
        cands = np.arange(1000)
        for p in (0.2, 0.35, 0.5):
            counts = [len(_ignite(cands, p, FireVariant.BINOMIAL, rng)) for _ in range(4000)]
            assert abs(np.mean(counts) - 1 / (1 - p)) < 0.05 / (1 - p)

    def test_bernoulli_mean(self):
        rng = np.random.default_rng(0)
        cands = np.arange(50)
        counts = [len(_ignite(cands, 0.35, FireVariant.BERNOULLI, rng)) for _ in range(4000)]
        assert abs(np.mean(counts) - 50 * 0.35) < 0.3

    def test_ffb_mean_override(self):
        assert SampleSpec("ffb", 0.5, ffb_mean=4.0).burn_probabilities() == (0.75, 0.75)
        assert SampleSpec("ff", 0.5, ffb_mean=4.0).burn_probabilities() == (0.35, 0.2)
        with pytest.raises(ValueError):
            SampleSpec("ffb", 0.5, ffb_mean=0.5)


class TestWalks:
    STAR = KnowledgeGraph.from_triples([(0, 0, k) for k in range(1, 9)])  # center 0

    def test_center_steps_to_leaf(self):
        steps = []
        nodes = random_walk_sample(self.STAR, NodeSet.of(entities=[0]), 1, p_c=0.0, seed=3, steps=steps)
        assert steps[0][0] != 0 and steps[0][1] == "walk"
        assert len(nodes) == 2 and 0 in nodes.entities

    @given(seed=st.integers(0, 200))
    def test_star_walk_alternates(self, seed):
        steps = []
        random_walk_sample(self.STAR, NodeSet.of(entities=[0]), self.STAR.num_triples, p_c=0.0,
                           walk_len=10, seed=seed, steps=steps)
        first_walk = [v for v, _ in steps[:10]]
        assert all(v != 0 for v in first_walk[0::2])
        assert all(v == 0 for v in first_walk[1::2])

    def test_restart_returns_to_start(self):
        steps = []
        random_walk_sample(self.STAR, NodeSet.of(entities=[3]), self.STAR.num_triples, p_c=1.0,
                           walk_len=5, seed=0, steps=steps)
        assert steps[:5] == [(3, "restart")] * 5

    def test_rj_full_teleport_is_uniform(self):
        steps = []
        chain = KnowledgeGraph.from_triples([(k, 0, k + 1) for k in range(9)])
        for seed in range(300):
            random_walk_sample(chain, None, chain.num_triples, p_c=1.0, jump=True, seed=seed, steps=steps)
        assert all(how == "jump" for _, how in steps)
        counts = np.bincount([v for v, _ in steps], minlength=10)
        expected = len(steps) / 10
        chi2 = ((counts - expected) ** 2 / expected).sum()
        assert chi2 < 27.9  # 99.9% quantile, 9 dof

    @pytest.mark.parametrize("jump", [False, True])
    def test_exhaustion_covers_graph(self, jump):
        g, _ = generate_synthetic(SyntheticSpec(num_users=30, num_items=20, edges_per_user=3))
        nodes = random_walk_sample(g, None, g.num_edges, jump=jump, seed=4)
        assert nodes == NodeSet.everything(g)


class TestPipeline:
    def make(self):
        return generate_synthetic(SyntheticSpec(num_users=100, num_items=50, edges_per_user=5))

    def test_ratio_one_identity(self):
        cg, kg = self.make()
        res = sample_pipeline(cg, kg, SampleSpec("ff", 1.0))
        assert res.cg_sample.num_edges == cg.num_edges and res.kg_sample.num_triples == kg.num_triples
        assert res.achieved_ratio_cg == res.achieved_ratio_kg == 1.0

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_achieved_ratio_bound(self, kind):
        cg, kg = self.make()
        res = sample_pipeline(cg, kg, SampleSpec(kind, 0.5, seed=2))
        assert 0.5 <= res.achieved_ratio_cg <= 0.5 + max_degree(cg) / cg.num_edges
        assert res.achieved_ratio_cg == res.cg_sample.num_edges / cg.num_edges

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_kg_seeds_are_sampled_item_entities(self, kind):
        cg, kg = self.make()
        res = sample_pipeline(cg, kg, SampleSpec(kind, 0.2, seed=5))
        kept_items = res.cg_map.items.tolist()
        want = sorted(kg.item_entity_map[i] for i in kept_items if i in kg.item_entity_map)
        assert list(res.kg_seed_entities) == want
        n = len(set(want))
        starts = [v for v, _ in res.kg_trace]
        assert set(starts[:n]) <= set(want) | {v for v, s in res.kg_trace[:n] if s == "burning"}

    def test_kg_map_rekeyed_to_sample_items(self):
        cg, kg = self.make()
        res = sample_pipeline(cg, kg, SampleSpec("rw", 0.3, seed=1))
        for item, ent in res.kg_sample.item_entity_map.items():
            orig_item = int(res.cg_map.items[item])
            assert kg.item_entity_map[orig_item] == int(res.kg_map.entities[ent])

    def test_disjoint_items_fall_back_to_random_starts(self):
        cg = CollabGraph.from_edges([(0, 0, 0), (1, 0, 0), (1, 1, 0)])
        kg = KnowledgeGraph.from_triples([(0, 0, 1), (1, 0, 2), (2, 0, 3)], item_entity_map={5: 0})
        res = sample_pipeline(cg, kg, SampleSpec("ff", 0.5, seed=0))
        assert res.kg_seed_entities == ()
        assert res.kg_trace[0][1] == "random"

    def test_empty_kg(self):
        cg, _ = self.make()
        res = sample_pipeline(cg, None, SampleSpec("ts", 0.5))
        assert res.kg_sample.num_entities == 0 and res.achieved_ratio_kg == 1.0

    def test_bipartite_kinds_use_walks_on_kg(self):
        cg, kg = self.make()
        res = sample_pipeline(cg, kg, SampleSpec("ts", 0.5, seed=0))
        assert res.kg_sample.num_triples >= edge_budget(0.5, kg.num_triples)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SampleSpec("ff", 0.0)
        with pytest.raises(ValueError):
            SampleSpec("ff", 0.5, p_f=1.5)
        with pytest.raises(ValueError):
            SampleSpec("zz", 0.5)

    def test_budget_rounding(self):
        assert edge_budget(0.1, 30) == 3
        assert edge_budget(0.05, 10) == 1
        assert edge_budget(1.0, 7) == 7
