from __future__ import annotations

from ..graph import NodeSet
from ._common import GraphView, InducedCounter, StartPicker, budget_reached, make_rng


def random_walk_sample(graph, seed_nodes: NodeSet | None, edge_budget: int, p_c: float = 0.15,
                       walk_len: int = 10, walks_per_node: int = 1, jump: bool = False,
                       rng=None, seed=None, trace: list | None = None,
                       steps: list | None = None) -> NodeSet:
    """Random walk (``jump=False``) or random jump (``jump=True``) sampling.

    From each start node, ``walks_per_node`` walks of ``walk_len`` steps move
    to a uniform neighbour (edges taken in either direction). With
    probability ``p_c`` a step instead returns to the start node, or, when
    jumping, teleports to a uniform node. A dead end counts as a restart or
    a jump. Every start is a node not used as a start before, picked with
    the same seed-first rule as forest fire, so the whole graph is
    eventually covered.

    ``trace`` receives ``(start, source)`` per start and ``steps`` receives
    ``(node, "walk" | "restart" | "jump")`` per step.
    """
    if walk_len < 1:
        raise ValueError("walk_len must be at least 1")
    rng = make_rng(rng, seed)
    view = GraphView(graph)
    visited = InducedCounter(view)
    if view.n == 0:
        return view.to_nodeset([])
    exhaust = edge_budget >= view.num_edges
    if budget_reached(visited, edge_budget, exhaust):
        return view.to_nodeset([])
    picker = StartPicker(view, view.local_ids(seed_nodes), trace)
    und_idx, ptr, n = view.und_idx, view.und_ptr_l, view.n

    def visit(v):
        visited.add(v)
        picker.burned(v)
        return budget_reached(visited, edge_budget, exhaust)

    start = picker.first(rng)
    while True:
        done = visit(start)
        for _ in range(walks_per_node):
            if done:
                break
            cur = start
            for _ in range(walk_len):
                lo, hi = ptr[cur], ptr[cur + 1]
                if rng.random() < p_c or lo == hi:
                    if not jump:
                        cur = start
                        if steps is not None:
                            steps.append((cur, "restart"))
                        continue
                    cur = int(rng.integers(n))
                    how = "jump"
                else:
                    cur = int(und_idx[lo + int(rng.integers(hi - lo))])
                    how = "walk"
                if steps is not None:
                    steps.append((cur, how))
                if visit(cur):
                    done = True
                    break
        picker.processed(start)
        if done or picker.exhausted:
            break
        start = picker.next(rng)
    return view.to_nodeset(visited.order)
