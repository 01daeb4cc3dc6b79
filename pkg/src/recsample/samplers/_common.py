from __future__ import annotations

import numpy as np

from ..graph import CollabGraph, KnowledgeGraph, NodeSet


class GraphView:
    """Both graph types flattened to nodes ``0..n-1`` with directed CSR lists.

    Collaborative graphs put users first, then items, with every edge
    oriented user -> item (the "likes" orientation). Neighbour lists are
    sorted, so ascending-index iteration is the canonical order.
    """

    def __init__(self, graph):
        self.graph = graph
        if isinstance(graph, CollabGraph):
            self.offset = graph.num_users
            self.n = graph.num_users + graph.num_items
            src = graph.users
            dst = graph.items + self.offset
        elif isinstance(graph, KnowledgeGraph):
            self.offset = None
            self.n = graph.num_entities
            src, dst = graph.heads, graph.tails
        else:
            raise TypeError(f"not a graph: {type(graph).__name__}")
        self.num_edges = len(src)
        self.out_ptr, self.out_idx = _csr(src, dst, self.n)
        self.in_ptr, self.in_idx = _csr(dst, src, self.n)
        both_src = np.concatenate([src, dst])
        both_dst = np.concatenate([dst, src])
        # self loops appear once, not twice
        loop = np.concatenate([np.zeros(len(src), bool), src == dst])
        self.und_ptr, self.und_idx = _csr(both_src[~loop], both_dst[~loop], self.n)
        self.out_ptr_l = self.out_ptr.tolist()
        self.in_ptr_l = self.in_ptr.tolist()
        self.und_ptr_l = self.und_ptr.tolist()
        self.degree = np.diff(self.und_ptr) + np.bincount(src[src == dst], minlength=self.n)

    def out(self, v: int) -> np.ndarray:
        return self.out_idx[self.out_ptr_l[v]:self.out_ptr_l[v + 1]]

    def inn(self, v: int) -> np.ndarray:
        return self.in_idx[self.in_ptr_l[v]:self.in_ptr_l[v + 1]]

    def und(self, v: int) -> np.ndarray:
        return self.und_idx[self.und_ptr_l[v]:self.und_ptr_l[v + 1]]

    def local_ids(self, nodes: NodeSet | None) -> list:
        if nodes is None:
            return []
        if self.offset is None:
            ids = sorted(nodes.entities)
        else:
            ids = sorted(nodes.users) + [i + self.offset for i in sorted(nodes.items)]
        for v in ids:
            if not 0 <= v < self.n:
                raise ValueError(f"seed node {v} out of range")
        return ids

    def to_nodeset(self, ids) -> NodeSet:
        ids = sorted(ids)
        if self.offset is None:
            return NodeSet.of(entities=ids)
        off = self.offset
        return NodeSet.of([v for v in ids if v < off], [v - off for v in ids if v >= off])


def _csr(rows, cols, n):
    order = np.lexsort((cols, rows))
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=ptr[1:])
    return ptr, cols[order].astype(np.int64)


class IndexedSet:
    """Subset of ``0..n-1`` with O(log n) insert, delete and k-th smallest.

    Picking ``kth(rng.integers(len(s)))`` is a uniform draw over the members
    listed in ascending order.
    """

    def __init__(self, n: int, full: bool = False, members=()):
        self.n = n
        self._bits = [False] * n
        self._tree = [0] * (n + 1)
        self._size = 0
        if full:
            self._bits = [True] * n
            self._size = n
            tree = self._tree
            for i in range(1, n + 1):
                tree[i] += 1
                j = i + (i & -i)
                if j <= n:
                    tree[j] += tree[i]
        for v in members:
            self.add(v)
        self._top = 1 << max(n.bit_length() - 1, 0) if n else 0

    def __len__(self):
        return self._size

    def __contains__(self, v):
        return self._bits[v]

    def _update(self, v, delta):
        i = v + 1
        tree, n = self._tree, self.n
        while i <= n:
            tree[i] += delta
            i += i & -i

    def add(self, v: int) -> bool:
        if self._bits[v]:
            return False
        self._bits[v] = True
        self._size += 1
        self._update(v, 1)
        return True

    def discard(self, v: int) -> bool:
        if not self._bits[v]:
            return False
        self._bits[v] = False
        self._size -= 1
        self._update(v, -1)
        return True

    def kth(self, k: int) -> int:
        """The k-th smallest member, 0-based."""
        if not 0 <= k < self._size:
            raise IndexError(k)
        pos, rem, step, tree = 0, k + 1, self._top, self._tree
        while step:
            nxt = pos + step
            if nxt <= self.n and tree[nxt] < rem:
                pos = nxt
                rem -= tree[nxt]
            step >>= 1
        return pos

    def choice(self, rng: np.random.Generator) -> int:
        return self.kth(int(rng.integers(self._size)))


class InducedCounter:
    """Tracks a node set and the number of edges of its induced subgraph."""

    def __init__(self, view: GraphView):
        self.view = view
        self.member = np.zeros(view.n, dtype=bool)
        self.edges = 0
        self.order: list[int] = []

    def __contains__(self, v):
        return bool(self.member[v])

    def __len__(self):
        return len(self.order)

    def add(self, v: int) -> int:
        if self.member[v]:
            return 0
        self.member[v] = True
        self.order.append(v)
        view = self.view
        out = view.out(v)
        inn = view.inn(v)
        # self loops are counted through the out list only
        gained = int(self.member[out].sum()) + int(self.member[inn].sum()) - int((inn == v).sum())
        self.edges += gained
        return gained


def budget_reached(counter: InducedCounter, budget: int, exhaust: bool) -> bool:
    return not exhaust and counter.edges >= budget


def make_rng(rng=None, seed=None) -> np.random.Generator:
    if rng is not None:
        return rng
    return np.random.default_rng(seed)


class StartPicker:
    """Start/next-node rule shared by forest fire and the walk samplers.

    While some seed node has not been processed, the next node is drawn from
    the unprocessed seed and burning nodes together. Afterwards it is drawn
    from unprocessed burning nodes, and when none are left uniformly from
    all unprocessed nodes.
    """

    def __init__(self, view: GraphView, seeds, trace=None):
        n = view.n
        self.seeds = set(seeds)
        self.seeds_left = len(self.seeds)
        self.pending = IndexedSet(n, members=self.seeds)  # (seeds | B) - F
        self.frontier = IndexedSet(n)                      # B - F
        self.unprocessed = IndexedSet(n, full=True)        # V - F
        self.trace = trace

    def burned(self, v: int):
        """``v`` joined the sample set B."""
        if v in self.unprocessed:
            self.pending.add(v)
            self.frontier.add(v)

    def processed(self, v: int):
        """``v`` joined the processed set F."""
        if self.unprocessed.discard(v):
            self.pending.discard(v)
            self.frontier.discard(v)
            if v in self.seeds:
                self.seeds_left -= 1

    @property
    def exhausted(self) -> bool:
        return len(self.unprocessed) == 0

    def first(self, rng) -> int:
        pool = self.pending if self.seeds_left else self.unprocessed
        return self._emit(pool.choice(rng), rng)

    def next(self, rng) -> int:
        if self.seeds_left:
            pool = self.pending
        elif len(self.frontier):
            pool = self.frontier
        else:
            pool = self.unprocessed
        return self._emit(pool.choice(rng), rng)

    def _emit(self, v, rng):
        if self.trace is not None:
            if v in self.seeds:
                source = "seed"
            elif v in self.frontier:
                source = "burning"
            else:
                source = "random"
            self.trace.append((v, source))
        return v
