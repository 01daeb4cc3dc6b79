"""Loading, activity filtering, temporal splitting and synthetic data."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import CollabGraph, KnowledgeGraph, NodeMap, NodeSet, induced_subgraph_cg

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86_400


class IngestError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Ratings:
    graph: CollabGraph
    user_ids: list
    item_ids: list
    duplicates: int = 0


def load_ratings(path, dedup_policy: str = "latest") -> Ratings:
    """Read a ``user<TAB>item<TAB>time`` file.

    String ids become dense indices in first-seen order. Repeated
    (user, item) pairs are resolved by ``dedup_policy``: ``"latest"`` keeps
    the newest timestamp, ``"earliest"`` the oldest, ``"error"`` raises.
    """
    if dedup_policy not in ("latest", "earliest", "error"):
        raise ValueError(f"unknown dedup policy {dedup_policy!r}")
    path = Path(path)
    user_idx: dict[str, int] = {}
    item_idx: dict[str, int] = {}
    pair_slot: dict[tuple[int, int], int] = {}
    users, items, times = [], [], []
    duplicates = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise IngestError(f"{path}:{lineno}: expected user<TAB>item<TAB>time")
            try:
                t = int(parts[2])
            except ValueError:
                raise IngestError(f"{path}:{lineno}: time {parts[2]!r} is not an integer") from None
            if t < 0:
                raise IngestError(f"{path}:{lineno}: negative time")
            u = user_idx.setdefault(parts[0], len(user_idx))
            i = item_idx.setdefault(parts[1], len(item_idx))
            slot = pair_slot.get((u, i))
            if slot is None:
                pair_slot[(u, i)] = len(users)
                users.append(u)
                items.append(i)
                times.append(t)
                continue
            duplicates += 1
            if dedup_policy == "error":
                raise IngestError(f"{path}:{lineno}: duplicate rating ({parts[0]}, {parts[1]})")
            if dedup_policy == "latest":
                times[slot] = max(times[slot], t)
            else:
                times[slot] = min(times[slot], t)
    if not users:
        raise IngestError(f"{path}: no ratings")
    if duplicates:
        logger.info("%s: resolved %d duplicate ratings (%s)", path, duplicates, dedup_policy)
    graph = CollabGraph(len(user_idx), len(item_idx), users, items, times)
    return Ratings(graph, list(user_idx), list(item_idx), duplicates)


@dataclass(frozen=True, eq=False)
class LoadedKG:
    graph: KnowledgeGraph
    entity_ids: list


def load_triples(path, item_ids=(), links_path=None) -> LoadedKG:
    """Read a ``head<TAB>relation<TAB>tail`` file.

    Items are linked to entities through ``links_path`` (``item<TAB>entity``
    lines) when given; otherwise an item is linked to the entity with the
    same string id. Duplicate triples are dropped.
    """
    path = Path(path)
    ent_idx: dict[str, int] = {}
    rel_idx: dict[str, int] = {}
    seen = set()
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise IngestError(f"{path}:{lineno}: expected head<TAB>relation<TAB>tail")
            h = ent_idx.setdefault(parts[0], len(ent_idx))
            r = rel_idx.setdefault(parts[1], len(rel_idx))
            t = ent_idx.setdefault(parts[2], len(ent_idx))
            if (h, r, t) not in seen:
                seen.add((h, r, t))
                rows.append((h, r, t))
    links = {}
    if links_path is not None:
        with open(links_path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.rstrip("\r\n")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise IngestError(f"{links_path}:{lineno}: expected item<TAB>entity")
                links[parts[0]] = parts[1]
    else:
        links = {i: i for i in item_ids}
    mapping = {}
    item_pos = {iid: k for k, iid in enumerate(item_ids)}
    for iid, eid in links.items():
        if iid in item_pos and eid in ent_idx:
            mapping[item_pos[iid]] = ent_idx[eid]
    kg = KnowledgeGraph.from_triples(rows, len(ent_idx), list(rel_idx), mapping)
    return LoadedKG(kg, list(ent_idx))


def restrict_to_kg_items(cg: CollabGraph, kg: KnowledgeGraph):
    """Drop items without a KG entity (and their ratings); users are kept."""
    linked = [i for i in range(cg.num_items) if i in kg.item_entity_map]
    sub, nmap = induced_subgraph_cg(cg, NodeSet.of(range(cg.num_users), linked))
    return sub, nmap


def align_kg(kg: KnowledgeGraph, item_map: NodeMap) -> KnowledgeGraph:
    """Re-key ``item_entity_map`` to a CG derived through ``item_map``."""
    mapping = {new: kg.item_entity_map[int(old)] for new, old in enumerate(item_map.items)
               if int(old) in kg.item_entity_map}
    return KnowledgeGraph(kg.num_entities, kg.relation_labels, kg.heads, kg.relations, kg.tails,
                          mapping)


def filter_min_activity(cg: CollabGraph, min_ratings: int = 5, min_span_days: float = 5,
                        day_unit: float = SECONDS_PER_DAY):
    """Remove low-activity users and items until nothing changes.

    A user survives with at least ``min_ratings`` ratings spanning at least
    ``min_span_days`` days; an item survives with at least ``min_ratings``
    ratings. Returns ``(graph, node_map)``; the graph has no isolated nodes.
    """
    if day_unit <= 0:
        raise ValueError("day_unit must be positive")
    min_span = min_span_days * day_unit
    user_ok = np.ones(cg.num_users, bool)
    item_ok = np.ones(cg.num_items, bool)
    while True:
        alive = user_ok[cg.users] & item_ok[cg.items]
        u, i, t = cg.users[alive], cg.items[alive], cg.times[alive]
        udeg = np.bincount(u, minlength=cg.num_users)
        ideg = np.bincount(i, minlength=cg.num_items)
        tmax = np.full(cg.num_users, -1, np.int64)
        tmin = np.full(cg.num_users, np.iinfo(np.int64).max, np.int64)
        np.maximum.at(tmax, u, t)
        np.minimum.at(tmin, u, t)
        span = np.where(udeg > 0, tmax - tmin, -1)
        new_user_ok = user_ok & (udeg >= min_ratings) & (span >= min_span)
        new_item_ok = item_ok & (ideg >= min_ratings)
        if (new_user_ok == user_ok).all() and (new_item_ok == item_ok).all():
            break
        user_ok, item_ok = new_user_ok, new_item_ok
    return induced_subgraph_cg(cg, NodeSet.of(np.flatnonzero(user_ok), np.flatnonzero(item_ok)))


@dataclass(frozen=True)
class SplitRatios:
    train: float = 0.8
    val: float = 0.1
    test: float = 0.1

    def __post_init__(self):
        for v in (self.train, self.val, self.test):
            if not 0 < v < 1:
                raise ValueError("split fractions must lie in (0, 1)")
        if abs(self.train + self.val + self.test - 1) > 1e-9:
            raise ValueError("split fractions must sum to 1")


@dataclass(frozen=True, eq=False)
class SplitSkeleton:
    """Edge-index partition of a graph into train/val/test windows."""

    graph: CollabGraph
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


def temporal_split(cg: CollabGraph, ratios: SplitRatios = SplitRatios()) -> SplitSkeleton:
    """Cut the edges, sorted by (time, input index), into three windows.

    The first ``floor(train * |E|)`` edges train, the next
    ``floor(val * |E|)`` validate, the rest test.
    """
    n = cg.num_edges
    if n < 3:
        raise IngestError(f"cannot split {n} edges into three windows")
    order = np.lexsort((np.arange(n), cg.times))
    n_train = math.floor(ratios.train * n + 1e-9)
    n_val = math.floor(ratios.val * n + 1e-9)
    parts = order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:]
    if any(len(p) == 0 for p in parts):
        raise IngestError(f"split of {n} edges leaves an empty window")
    return SplitSkeleton(cg, *parts)


@dataclass(frozen=True, eq=False)
class UserHoldout:
    context: np.ndarray  # edge indices, chronological
    target: np.ndarray


@dataclass(frozen=True, eq=False)
class EvaluationSplit:
    """Train graph plus per-user context/target edges for val and test.

    ``train`` shares the full graph's index space; users or items that only
    appear later are isolated nodes in it.
    """

    graph: CollabGraph
    train_edges: np.ndarray
    train: CollabGraph
    val: dict
    test: dict
    excluded_val: list = field(default_factory=list)
    excluded_test: list = field(default_factory=list)

    def window(self, name: str) -> dict:
        if name not in ("val", "test"):
            raise ValueError(f"unknown window {name!r}")
        return self.val if name == "val" else self.test

    def inference_graph(self, window: str) -> CollabGraph:
        """Train edges plus the context edges of every evaluated user in ``window``."""
        holdouts = self.window(window)
        ctx = [h.context for h in holdouts.values()]
        idx = np.sort(np.concatenate([self.train_edges, *ctx])) if ctx else np.sort(self.train_edges)
        g = self.graph
        return CollabGraph(g.num_users, g.num_items, g.users[idx], g.items[idx], g.times[idx])

    def to_json(self) -> dict:
        def dump(window):
            return {str(u): {"context": h.context.tolist(), "target": h.target.tolist()}
                    for u, h in sorted(window.items())}
        return {"train": self.train_edges.tolist(), "val": dump(self.val), "test": dump(self.test),
                "excluded_val": list(self.excluded_val), "excluded_test": list(self.excluded_test)}

    @classmethod
    def from_json(cls, graph: CollabGraph, data: dict) -> "EvaluationSplit":
        def load(window):
            return {int(u): UserHoldout(np.array(h["context"], np.int64), np.array(h["target"], np.int64))
                    for u, h in window.items()}
        train_edges = np.array(data["train"], dtype=np.int64)
        return cls(graph, train_edges, _subset(graph, train_edges), load(data["val"]),
                   load(data["test"]), data.get("excluded_val", []), data.get("excluded_test", []))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()))


def _subset(g: CollabGraph, idx: np.ndarray) -> CollabGraph:
    idx = np.sort(idx)
    return CollabGraph(g.num_users, g.num_items, g.users[idx], g.items[idx], g.times[idx])


def holdout_context(skeleton: SplitSkeleton, context_fraction: float = 0.5, min_context: int = 1,
                    min_target: int = 1, context_size: int | None = None) -> EvaluationSplit:
    """Split each val/test user's edges into chronological context and targets.

    The first ``ceil(context_fraction * n)`` edges (at least ``min_context``)
    of a user become context, the remainder targets. ``context_size`` fixes
    the context length instead. Users left without enough context or
    targets are excluded and listed in the result.
    """
    g = skeleton.graph

    def per_window(edge_idx):
        kept, excluded = {}, []
        if len(edge_idx) == 0:
            return kept, excluded
        order = np.lexsort((edge_idx, g.times[edge_idx], g.users[edge_idx]))
        ordered = edge_idx[order]
        users = g.users[ordered]
        bounds = np.flatnonzero(np.diff(users)) + 1
        for chunk in np.split(ordered, bounds):
            user = int(g.users[chunk[0]])
            n = len(chunk)
            if context_size is not None:
                n_ctx = context_size
            else:
                n_ctx = max(math.ceil(context_fraction * n - 1e-9), min_context)
            if n_ctx < min_context or n - n_ctx < min_target:
                excluded.append(user)
                continue
            kept[user] = UserHoldout(chunk[:n_ctx].copy(), chunk[n_ctx:].copy())
        return kept, excluded

    val, ex_val = per_window(skeleton.val)
    test, ex_test = per_window(skeleton.test)
    return EvaluationSplit(g, np.sort(skeleton.train), _subset(g, skeleton.train), val, test,
                           ex_val, ex_test)


@dataclass(frozen=True)
class SyntheticSpec:
    num_users: int = 200
    num_items: int = 100
    edges_per_user: int = 10
    num_clusters: int = 2
    cross_cluster_noise: float = 0.05
    degree_exponent: float = 0.0
    time_span: int = 365 * SECONDS_PER_DAY
    seed: int = 0

    def __post_init__(self):
        for name in ("num_users", "num_items", "edges_per_user", "num_clusters", "time_span"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.cross_cluster_noise < 1:
            raise ValueError("cross_cluster_noise must lie in [0, 1)")
        if self.num_clusters > min(self.num_users, self.num_items):
            raise ValueError("more clusters than users or items")


def user_cluster(spec: SyntheticSpec, user: int) -> int:
    return user % spec.num_clusters


def item_cluster(spec: SyntheticSpec, item: int) -> int:
    return item % spec.num_clusters


def generate_synthetic(spec: SyntheticSpec):
    """Planted-cluster interaction graph and its category KG.

    User ``u`` and item ``i`` belong to clusters ``u % C`` and ``i % C``.
    Each user draws ``edges_per_user`` distinct items: a binomial share from
    its own cluster, weighted by a power law over within-cluster rank, the
    rest uniformly from the other clusters. The KG links every item entity
    to one category entity per cluster.
    """
    rng = np.random.default_rng(spec.seed)
    C = spec.num_clusters
    members = [np.arange(c, spec.num_items, C) for c in range(C)]
    smallest = min(len(m) for m in members)
    if spec.edges_per_user > smallest:
        raise ValueError(f"edges_per_user={spec.edges_per_user} exceeds cluster size {smallest}")
    weights = []
    for m in members:
        w = (np.arange(len(m)) + 1.0) ** -spec.degree_exponent
        weights.append(w / w.sum())
    noise = spec.cross_cluster_noise if C > 1 else 0.0
    users, items = [], []
    for u in range(spec.num_users):
        c = u % C
        others = np.concatenate([members[o] for o in range(C) if o != c]) if C > 1 else np.zeros(0, np.int64)
        n_cross = min(int(rng.binomial(spec.edges_per_user, noise)), len(others))
        n_own = spec.edges_per_user - n_cross
        own = rng.choice(members[c], size=n_own, replace=False, p=weights[c])
        cross = rng.choice(others, size=n_cross, replace=False) if n_cross else np.zeros(0, np.int64)
        picked = np.concatenate([own, cross])
        users.extend([u] * len(picked))
        items.extend(picked.tolist())
    times = rng.integers(0, spec.time_span, size=len(users))
    cg = CollabGraph(spec.num_users, spec.num_items, users, items, times)
    triples = [(i, 0, spec.num_items + i % C) for i in range(spec.num_items)]
    kg = KnowledgeGraph.from_triples(triples, spec.num_items + C, ["in_cluster"],
                                     {i: i for i in range(spec.num_items)})
    return cg, kg


def compact(cg: CollabGraph):
    """Drop isolated users and items; returns ``(graph, node_map)``."""
    return induced_subgraph_cg(cg, NodeSet.of(np.flatnonzero(cg.user_degrees()),
                                              np.flatnonzero(cg.item_degrees())))


__all__ = [
    "IngestError", "Ratings", "load_ratings", "LoadedKG", "load_triples", "restrict_to_kg_items",
    "align_kg",
    "filter_min_activity", "SplitRatios", "SplitSkeleton", "temporal_split", "UserHoldout",
    "EvaluationSplit", "holdout_context", "SyntheticSpec", "generate_synthetic", "compact",
    "user_cluster", "item_cluster", "NodeMap",
]
