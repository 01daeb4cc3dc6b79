"""Samplers that only make sense on the user-item graph."""
from __future__ import annotations

import numpy as np

from ..graph import CollabGraph, NodeSet
from ._common import GraphView, InducedCounter, budget_reached, make_rng


def _require_cg(cg):
    if not isinstance(cg, CollabGraph):
        raise TypeError("this sampler needs a CollabGraph")


def pinsage_sample(cg: CollabGraph, edge_budget: int, rng=None, seed=None) -> NodeSet:
    """Draw users uniformly without replacement, each with all its items.

    The user whose items push the induced edge count to the budget is kept
    whole. Users without ratings are never drawn.
    """
    _require_cg(cg)
    rng = make_rng(rng, seed)
    view = GraphView(cg)
    counter = InducedCounter(view)
    exhaust = edge_budget > cg.num_edges
    if budget_reached(counter, edge_budget, exhaust):
        return NodeSet()
    active = np.flatnonzero(cg.user_degrees())
    for u in rng.permutation(active).tolist():
        counter.add(u)
        for i in cg.user_items(u).tolist():
            counter.add(i + view.offset)
        if budget_reached(counter, edge_budget, exhaust):
            break
    return view.to_nodeset(counter.order)


def temporal_sample(cg: CollabGraph, edge_budget: int) -> NodeSet:
    """Take endpoints of the newest edges first.

    Edges are scanned by descending time, ties by descending input index.
    The budget is checked after each endpoint so one step never adds more
    edges than a single node's degree.
    """
    _require_cg(cg)
    view = GraphView(cg)
    counter = InducedCounter(view)
    exhaust = edge_budget > cg.num_edges
    if budget_reached(counter, edge_budget, exhaust):
        return NodeSet()
    order = np.lexsort((np.arange(cg.num_edges), cg.times))[::-1]
    users, items = cg.users[order].tolist(), (cg.items[order] + view.offset).tolist()
    for u, i in zip(users, items):
        counter.add(u)
        if budget_reached(counter, edge_budget, exhaust):
            break
        counter.add(i)
        if budget_reached(counter, edge_budget, exhaust):
            break
    return view.to_nodeset(counter.order)


def niche_sample(cg: CollabGraph, edge_budget: int) -> NodeSet:
    """Least-rated items first, each together with all of its users.

    Items are scanned by ascending degree, ties by ascending index; items
    without ratings are skipped.
    """
    _require_cg(cg)
    view = GraphView(cg)
    counter = InducedCounter(view)
    exhaust = edge_budget > cg.num_edges
    if budget_reached(counter, edge_budget, exhaust):
        return NodeSet()
    deg = cg.item_degrees()
    order = np.lexsort((np.arange(cg.num_items), deg))
    for i in order[deg[order] > 0].tolist():
        counter.add(i + view.offset)
        for u in cg.item_users(i).tolist():
            counter.add(u)
        if budget_reached(counter, edge_budget, exhaust):
            break
    return view.to_nodeset(counter.order)
