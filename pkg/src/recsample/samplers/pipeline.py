from __future__ import annotations

import enum
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..graph import (CollabGraph, KnowledgeGraph, NodeMap, NodeSet, induced_subgraph_cg,
                     induced_subgraph_kg)
from .bipartite import niche_sample, pinsage_sample, temporal_sample
from .forest_fire import forest_fire
from .walks import random_walk_sample


class SamplerKind(str, enum.Enum):
    FF = "ff"
    FFB = "ffb"
    RW = "rw"
    RJ = "rj"
    PS = "ps"
    TS = "ts"
    NS = "ns"

    @property
    def bipartite_only(self) -> bool:
        return self in (SamplerKind.PS, SamplerKind.TS, SamplerKind.NS)


@dataclass(frozen=True)
class SampleSpec:
    kind: SamplerKind
    ratio: float
    p_f: float = 0.35
    p_b: float = 0.2
    p_c: float = 0.15
    walk_len: int = 10
    walks_per_node: int = 1
    seed: int = 0
    ffb_mean: float | None = None

    def __post_init__(self):
        if not isinstance(self.kind, SamplerKind):
            object.__setattr__(self, "kind", SamplerKind(str(self.kind).lower()))
        if not 0 < self.ratio <= 1:
            raise ValueError(f"ratio must lie in (0, 1], got {self.ratio}")
        for name in ("p_f", "p_b", "p_c"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.walk_len < 1 or self.walks_per_node < 1:
            raise ValueError("walk_len and walks_per_node must be at least 1")
        if self.ffb_mean is not None and self.ffb_mean < 1:
            raise ValueError("ffb_mean must be at least 1")

    def burn_probabilities(self) -> tuple:
        """``(p_f, p_b)`` actually used; FFB with ``ffb_mean`` uses ``1 - 1/mean`` both ways."""
        if self.kind is SamplerKind.FFB and self.ffb_mean is not None:
            p = 1.0 - 1.0 / self.ffb_mean
            return p, p
        return self.p_f, self.p_b

    def to_json(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


def edge_budget(ratio: float, num_edges: int) -> int:
    return min(math.ceil(ratio * num_edges - 1e-9), num_edges)


def sample_graph(graph, kind: SamplerKind, budget: int, spec: SampleSpec, rng,
                 seed_nodes: NodeSet | None = None, trace=None) -> NodeSet:
    """Run one sampler on one graph."""
    kind = SamplerKind(kind)
    if kind in (SamplerKind.FF, SamplerKind.FFB):
        variant = "bernoulli" if kind is SamplerKind.FF else "binomial"
        p_f, p_b = spec.burn_probabilities()
        return forest_fire(graph, seed_nodes, budget, p_f, p_b, variant, rng=rng, trace=trace)
    if kind in (SamplerKind.RW, SamplerKind.RJ):
        return random_walk_sample(graph, seed_nodes, budget, spec.p_c, spec.walk_len,
                                  spec.walks_per_node, jump=kind is SamplerKind.RJ, rng=rng,
                                  trace=trace)
    if kind is SamplerKind.PS:
        return pinsage_sample(graph, budget, rng=rng)
    if kind is SamplerKind.TS:
        return temporal_sample(graph, budget)
    return niche_sample(graph, budget)


@dataclass(frozen=True, eq=False)
class SampleResult:
    spec: SampleSpec
    cg_sample: CollabGraph
    cg_map: NodeMap
    kg_sample: KnowledgeGraph
    kg_map: NodeMap
    achieved_ratio_cg: float
    achieved_ratio_kg: float
    cg_seconds: float
    kg_seconds: float
    kg_seed_entities: tuple = ()
    kg_trace: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "spec": self.spec.to_json(),
            "seed": self.spec.seed,
            "achieved_ratio_cg": self.achieved_ratio_cg,
            "achieved_ratio_kg": self.achieved_ratio_kg,
            "cg_edges": self.cg_sample.num_edges,
            "kg_triples": self.kg_sample.num_triples,
            "wall_seconds": {"cg": self.cg_seconds, "kg": self.kg_seconds},
        }


def _ratio(part: int, whole: int) -> float:
    return part / whole if whole else 1.0


def sample_pipeline(cg: CollabGraph, kg: KnowledgeGraph | None, spec: SampleSpec) -> SampleResult:
    """Sample the collaborative graph, then the KG seeded from its items.

    Stage two starts from the entities of the items kept in stage one.
    Samplers that only work on bipartite graphs (PS, TS, NS) use random
    walks for the KG. The KG sample's ``item_entity_map`` is keyed by the
    item indices of the CG sample. ``ratio == 1`` returns both graphs
    unchanged.
    """
    if cg.num_edges == 0:
        raise ValueError("cannot sample an empty collaborative graph")
    kg = kg if kg is not None else KnowledgeGraph.empty()
    cg_rng, kg_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(2))

    t0 = time.perf_counter()
    if spec.ratio >= 1:
        cg_nodes = NodeSet.everything(cg)
    else:
        cg_nodes = sample_graph(cg, spec.kind, edge_budget(spec.ratio, cg.num_edges), spec, cg_rng)
    cg_sample, cg_map = induced_subgraph_cg(cg, cg_nodes)
    t1 = time.perf_counter()

    seeds = sorted(kg.item_entity_map[i] for i in cg_nodes.items if i in kg.item_entity_map)
    trace: list = []
    if kg.num_entities == 0:
        kg_nodes = NodeSet()
    elif spec.ratio >= 1:
        kg_nodes = NodeSet.everything(kg)
    else:
        kind = SamplerKind.RW if spec.kind.bipartite_only else spec.kind
        kg_nodes = sample_graph(kg, kind, edge_budget(spec.ratio, kg.num_triples), spec, kg_rng,
                                NodeSet.of(entities=seeds), trace)
    kg_sample, kg_map = induced_subgraph_kg(kg, kg_nodes)
    inv_items = NodeMap.inverse(cg_map.items, cg.num_items)
    rekeyed = {int(inv_items[item]): ent for item, ent in kg_sample.item_entity_map.items()
               if inv_items[item] >= 0}
    kg_sample = KnowledgeGraph(kg_sample.num_entities, kg_sample.relation_labels, kg_sample.heads,
                               kg_sample.relations, kg_sample.tails, rekeyed)
    t2 = time.perf_counter()

    return SampleResult(spec, cg_sample, cg_map, kg_sample, kg_map,
                        _ratio(cg_sample.num_edges, cg.num_edges),
                        _ratio(kg_sample.num_triples, kg.num_triples),
                        t1 - t0, t2 - t1, tuple(seeds), trace)
