"""Pre-training node samplers for collaborative graphs and knowledge graphs.

Every sampler returns a :class:`~recsample.graph.NodeSet`; the training
graph is the subgraph induced by it.
"""
from .bipartite import niche_sample, pinsage_sample, temporal_sample
from .forest_fire import FireVariant, forest_fire
from .pipeline import SampleResult, SampleSpec, SamplerKind, edge_budget, sample_graph, sample_pipeline
from .walks import random_walk_sample

__all__ = [
    "FireVariant", "SampleResult", "SampleSpec", "SamplerKind", "edge_budget", "forest_fire",
    "niche_sample", "pinsage_sample", "random_walk_sample", "sample_graph", "sample_pipeline",
    "temporal_sample",
]
