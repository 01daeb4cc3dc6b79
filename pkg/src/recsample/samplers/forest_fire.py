from __future__ import annotations

import enum

import numpy as np

from ..graph import NodeSet
from ._common import GraphView, InducedCounter, StartPicker, budget_reached, make_rng


class FireVariant(enum.Enum):
    BERNOULLI = "bernoulli"
    BINOMIAL = "binomial"


def _ignite(cands: np.ndarray, p: float, variant: FireVariant, rng) -> np.ndarray:
    if len(cands) == 0:
        return cands
    if variant is FireVariant.BERNOULLI:
        return cands[rng.random(len(cands)) < p]
    # geometric burn count with mean 1 / (1 - p)
    k = len(cands) if p >= 1 else min(int(rng.geometric(1.0 - p)), len(cands))
    return np.sort(rng.choice(cands, size=k, replace=False))


def forest_fire(graph, seed_nodes: NodeSet | None, edge_budget: int, p_f: float = 0.35,
                p_b: float = 0.2, variant="bernoulli", rng=None, seed=None,
                trace: list | None = None) -> NodeSet:
    """Forest fire node sampling.

    Each processed node ``w`` burns unburned out-neighbours (forward, ``p_f``)
    and in-neighbours (backward, ``p_b``). The ``bernoulli`` variant ignites
    every neighbour independently; ``binomial`` ignites a geometric number
    of them with mean ``1/(1-p)``, chosen uniformly. Seed nodes are
    processed before any uniform restart.

    Sampling stops as soon as the subgraph induced by the burning set has
    ``edge_budget`` edges, checked after each burned node, or when every
    node has been processed. A budget of at least ``|E|`` burns the whole
    graph.
    """
    variant = FireVariant(variant)
    rng = make_rng(rng, seed)
    view = GraphView(graph)
    burning = InducedCounter(view)
    if view.n == 0:
        return view.to_nodeset([])
    exhaust = edge_budget >= view.num_edges
    if budget_reached(burning, edge_budget, exhaust):
        return view.to_nodeset([])
    picker = StartPicker(view, view.local_ids(seed_nodes), trace)
    member = burning.member
    w = picker.first(rng)
    while True:
        out = view.out(w)
        inn = view.inn(w)
        fwd = _ignite(np.unique(out[~member[out]]), p_f, variant, rng)
        bwd = _ignite(np.unique(inn[~member[inn]]), p_b, variant, rng)
        done = False
        for x in (w, *fwd.tolist(), *bwd.tolist()):
            burning.add(x)
            picker.burned(x)
            if budget_reached(burning, edge_budget, exhaust):
                done = True
                break
        picker.processed(w)
        if done or picker.exhausted:
            break
        w = picker.next(rng)
    return view.to_nodeset(burning.order)
