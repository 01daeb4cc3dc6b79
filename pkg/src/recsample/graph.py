"""Immutable collaborative and knowledge graphs.

Node indices are dense per kind (users, items, entities). Subgraph
operations re-densify indices and return a :class:`NodeMap` that points
back into the graph they were cut from.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterator, Mapping, NamedTuple

import numpy as np


class GraphValidationError(ValueError):
    pass


class NodeKind(enum.Enum):
    USER = "user"
    ITEM = "item"
    ENTITY = "entity"


class Direction(enum.Enum):
    IN = "in"
    OUT = "out"
    UNDIRECTED = "undirected"


class NodeRef(NamedTuple):
    kind: NodeKind
    index: int


class InteractionEdge(NamedTuple):
    user: int
    item: int
    time: int


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


def _frozen_int_array(values) -> np.ndarray:
    arr = np.array(values, dtype=np.int64).reshape(-1)
    arr.flags.writeable = False
    return arr


def _csr(rows: np.ndarray, cols: np.ndarray, n_rows: int):
    """Row pointer, column and edge-id arrays sorted by (row, col, edge id)."""
    order = np.lexsort((np.arange(len(rows)), cols, rows))
    counts = np.bincount(rows, minlength=n_rows) if n_rows else np.zeros(0, np.int64)
    ptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    for a in (ptr, cols[order], order):
        a.flags.writeable = False
    return ptr, cols[order], order


@dataclass(frozen=True, eq=False)
class CollabGraph:
    """Bipartite user-item interaction graph with one timestamp per edge.

    Edges are stored column-wise (``users``, ``items``, ``times``) in their
    input order. At most one edge per (user, item) pair is allowed.
    """

    num_users: int
    num_items: int
    users: np.ndarray
    items: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        users = _frozen_int_array(self.users)
        items = _frozen_int_array(self.items)
        times = _frozen_int_array(self.times)
        if not (len(users) == len(items) == len(times)):
            raise GraphValidationError("edge columns differ in length")
        if self.num_users < 0 or self.num_items < 0:
            raise GraphValidationError("node counts must be non-negative")
        if len(users):
            if users.min() < 0 or users.max() >= self.num_users:
                raise GraphValidationError("user index out of range")
            if items.min() < 0 or items.max() >= self.num_items:
                raise GraphValidationError("item index out of range")
            if times.min() < 0:
                raise GraphValidationError("timestamps must be non-negative")
            keys = users * self.num_items + items
            if len(np.unique(keys)) != len(keys):
                raise GraphValidationError("duplicate (user, item) edge")
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "_user_adj", _csr(users, items, self.num_users))
        object.__setattr__(self, "_item_adj", _csr(items, users, self.num_items))

    @classmethod
    def from_edges(cls, edges, num_users=None, num_items=None) -> "CollabGraph":
        edges = list(edges)
        cols = np.array(edges, dtype=np.int64).reshape(-1, 3) if edges else np.zeros((0, 3), np.int64)
        if num_users is None:
            num_users = int(cols[:, 0].max()) + 1 if len(cols) else 0
        if num_items is None:
            num_items = int(cols[:, 1].max()) + 1 if len(cols) else 0
        return cls(num_users, num_items, cols[:, 0], cols[:, 1], cols[:, 2])

    @property
    def num_edges(self) -> int:
        return len(self.users)

    def edges(self) -> Iterator[InteractionEdge]:
        for u, i, t in zip(self.users.tolist(), self.items.tolist(), self.times.tolist()):
            yield InteractionEdge(u, i, t)

    def user_items(self, user: int) -> np.ndarray:
        ptr, nbr, _ = self._user_adj
        return nbr[ptr[user]:ptr[user + 1]]

    def item_users(self, item: int) -> np.ndarray:
        ptr, nbr, _ = self._item_adj
        return nbr[ptr[item]:ptr[item + 1]]

    def user_edge_ids(self, user: int) -> np.ndarray:
        ptr, _, eid = self._user_adj
        return eid[ptr[user]:ptr[user + 1]]

    def user_degrees(self) -> np.ndarray:
        return np.diff(self._user_adj[0])

    def item_degrees(self) -> np.ndarray:
        return np.diff(self._item_adj[0])

    def edge_keys(self) -> np.ndarray:
        """Sorted ``user * num_items + item`` codes, for fast membership tests."""
        return np.sort(self.users * self.num_items + self.items)

    def __repr__(self):
        return f"CollabGraph(users={self.num_users}, items={self.num_items}, edges={self.num_edges})"


@dataclass(frozen=True, eq=False)
class KnowledgeGraph:
    """Directed labeled multigraph over entities.

    ``item_entity_map`` is a partial injective mapping from item index to
    entity index; items not in it have no KG counterpart.
    """

    num_entities: int
    relation_labels: tuple
    heads: np.ndarray
    relations: np.ndarray
    tails: np.ndarray
    item_entity_map: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        heads = _frozen_int_array(self.heads)
        rels = _frozen_int_array(self.relations)
        tails = _frozen_int_array(self.tails)
        labels = tuple(str(x) for x in self.relation_labels)
        if not (len(heads) == len(rels) == len(tails)):
            raise GraphValidationError("triple columns differ in length")
        if self.num_entities < 0:
            raise GraphValidationError("entity count must be non-negative")
        if len(heads):
            lo = min(heads.min(), tails.min())
            hi = max(heads.max(), tails.max())
            if lo < 0 or hi >= self.num_entities:
                raise GraphValidationError("entity index out of range")
            if rels.min() < 0 or rels.max() >= len(labels):
                raise GraphValidationError("relation index out of range")
            keys = np.stack([heads, rels, tails], axis=1)
            if len(np.unique(keys, axis=0)) != len(keys):
                raise GraphValidationError("duplicate triple")
        mapping = {int(k): int(v) for k, v in dict(self.item_entity_map).items()}
        if len(set(mapping.values())) != len(mapping):
            raise GraphValidationError("item_entity_map is not injective")
        for item, ent in mapping.items():
            if item < 0 or not 0 <= ent < self.num_entities:
                raise GraphValidationError(f"bad item_entity_map entry {item} -> {ent}")
        object.__setattr__(self, "heads", heads)
        object.__setattr__(self, "relations", rels)
        object.__setattr__(self, "tails", tails)
        object.__setattr__(self, "relation_labels", labels)
        object.__setattr__(self, "item_entity_map", MappingProxyType(mapping))
        object.__setattr__(self, "_out_adj", _csr(heads, tails, self.num_entities))
        object.__setattr__(self, "_in_adj", _csr(tails, heads, self.num_entities))

    @classmethod
    def from_triples(cls, triples, num_entities=None, relation_labels=None,
                     item_entity_map=None) -> "KnowledgeGraph":
        triples = list(triples)
        cols = np.array(triples, dtype=np.int64).reshape(-1, 3) if triples else np.zeros((0, 3), np.int64)
        if num_entities is None:
            num_entities = int(max(cols[:, 0].max(), cols[:, 2].max())) + 1 if len(cols) else 0
        if relation_labels is None:
            n_rel = int(cols[:, 1].max()) + 1 if len(cols) else 0
            relation_labels = [f"r{k}" for k in range(n_rel)]
        return cls(num_entities, tuple(relation_labels), cols[:, 0], cols[:, 1], cols[:, 2],
                   item_entity_map or {})

    @classmethod
    def empty(cls) -> "KnowledgeGraph":
        return cls.from_triples([])

    @property
    def num_triples(self) -> int:
        return len(self.heads)

    def triples(self) -> Iterator[Triple]:
        for h, r, t in zip(self.heads.tolist(), self.relations.tolist(), self.tails.tolist()):
            yield Triple(h, r, t)

    def out_neighbors(self, entity: int) -> np.ndarray:
        ptr, nbr, _ = self._out_adj
        return nbr[ptr[entity]:ptr[entity + 1]]

    def in_neighbors(self, entity: int) -> np.ndarray:
        ptr, nbr, _ = self._in_adj
        return nbr[ptr[entity]:ptr[entity + 1]]

    def out_degrees(self) -> np.ndarray:
        return np.diff(self._out_adj[0])

    def in_degrees(self) -> np.ndarray:
        return np.diff(self._in_adj[0])

    def item_entities(self) -> np.ndarray:
        return np.array(sorted(self.item_entity_map.values()), dtype=np.int64)

    def __repr__(self):
        return (f"KnowledgeGraph(entities={self.num_entities}, "
                f"relations={len(self.relation_labels)}, triples={self.num_triples})")


@dataclass(frozen=True)
class NodeSet:
    users: frozenset = frozenset()
    items: frozenset = frozenset()
    entities: frozenset = frozenset()

    @classmethod
    def of(cls, users=(), items=(), entities=()) -> "NodeSet":
        return cls(frozenset(int(x) for x in users), frozenset(int(x) for x in items),
                   frozenset(int(x) for x in entities))

    @classmethod
    def everything(cls, graph) -> "NodeSet":
        if isinstance(graph, CollabGraph):
            return cls.of(range(graph.num_users), range(graph.num_items))
        return cls.of(entities=range(graph.num_entities))

    def __len__(self):
        return len(self.users) + len(self.items) + len(self.entities)

    def __contains__(self, ref) -> bool:
        kind, index = ref
        return index in self._members(NodeKind(kind))

    def _members(self, kind: NodeKind) -> frozenset:
        return {NodeKind.USER: self.users, NodeKind.ITEM: self.items,
                NodeKind.ENTITY: self.entities}[kind]

    def issubset(self, other: "NodeSet") -> bool:
        return (self.users <= other.users and self.items <= other.items
                and self.entities <= other.entities)


@dataclass(frozen=True, eq=False)
class NodeMap:
    """New-to-old index arrays for each node kind.

    ``users[k]`` is the index, in the parent graph, of user ``k`` of the
    derived graph.
    """

    users: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    items: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    entities: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    def __post_init__(self):
        for name in ("users", "items", "entities"):
            object.__setattr__(self, name, _frozen_int_array(getattr(self, name)))

    @classmethod
    def identity(cls, graph) -> "NodeMap":
        if isinstance(graph, CollabGraph):
            return cls(np.arange(graph.num_users), np.arange(graph.num_items))
        return cls(entities=np.arange(graph.num_entities))

    def then(self, parent: "NodeMap") -> "NodeMap":
        """Compose with ``parent`` (the map of the graph this one was cut from)."""
        def comp(mine, theirs):
            return theirs[mine] if len(theirs) else mine
        return NodeMap(comp(self.users, parent.users), comp(self.items, parent.items),
                       comp(self.entities, parent.entities))

    @staticmethod
    def inverse(new_to_old: np.ndarray, size: int) -> np.ndarray:
        """Old-to-new lookup with -1 for dropped nodes."""
        inv = np.full(size, -1, dtype=np.int64)
        inv[new_to_old] = np.arange(len(new_to_old))
        return inv

    def to_json(self) -> dict:
        return {"users": self.users.tolist(), "items": self.items.tolist(),
                "entities": self.entities.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "NodeMap":
        return cls(data.get("users", []), data.get("items", []), data.get("entities", []))


def _check_members(members, bound: int, what: str) -> np.ndarray:
    arr = np.array(sorted(members), dtype=np.int64)
    if len(arr) and (arr[0] < 0 or arr[-1] >= bound):
        raise GraphValidationError(f"{what} index out of range")
    return arr


def induced_subgraph_cg(graph: CollabGraph, nodes: NodeSet):
    """Keep the given users and items plus every edge between them.

    Returns ``(subgraph, node_map)``. Nodes keep their relative order,
    edges keep input order and timestamps. Selected nodes without any
    surviving edge stay in the subgraph as isolated nodes.
    """
    keep_u = _check_members(nodes.users, graph.num_users, "user")
    keep_i = _check_members(nodes.items, graph.num_items, "item")
    inv_u = NodeMap.inverse(keep_u, graph.num_users)
    inv_i = NodeMap.inverse(keep_i, graph.num_items)
    new_u = inv_u[graph.users]
    new_i = inv_i[graph.items]
    mask = (new_u >= 0) & (new_i >= 0)
    sub = CollabGraph(len(keep_u), len(keep_i), new_u[mask], new_i[mask], graph.times[mask])
    return sub, NodeMap(users=keep_u, items=keep_i)


def induced_subgraph_kg(graph: KnowledgeGraph, nodes: NodeSet):
    """KG counterpart of :func:`induced_subgraph_cg`.

    ``item_entity_map`` keeps the item keys of the input and drops entries
    whose entity did not survive.
    """
    keep = _check_members(nodes.entities, graph.num_entities, "entity")
    inv = NodeMap.inverse(keep, graph.num_entities)
    new_h = inv[graph.heads]
    new_t = inv[graph.tails]
    mask = (new_h >= 0) & (new_t >= 0)
    mapping = {item: int(inv[ent]) for item, ent in graph.item_entity_map.items() if inv[ent] >= 0}
    sub = KnowledgeGraph(len(keep), graph.relation_labels, new_h[mask], graph.relations[mask],
                         new_t[mask], mapping)
    return sub, NodeMap(entities=keep)


def degree_sequence(graph, kind: NodeKind, direction: Direction) -> np.ndarray:
    """Per-node degrees (zeros included), ordered by node index."""
    kind, direction = NodeKind(kind), Direction(direction)
    if isinstance(graph, CollabGraph):
        if direction is not Direction.UNDIRECTED or kind is NodeKind.ENTITY:
            raise GraphValidationError(
                f"collaborative graph has no {kind.value}/{direction.value} degrees")
        return graph.user_degrees() if kind is NodeKind.USER else graph.item_degrees()
    if isinstance(graph, KnowledgeGraph):
        if kind is not NodeKind.ENTITY or direction is Direction.UNDIRECTED:
            raise GraphValidationError(
                f"knowledge graph has no {kind.value}/{direction.value} degrees")
        return graph.in_degrees() if direction is Direction.IN else graph.out_degrees()
    raise TypeError(f"not a graph: {type(graph).__name__}")


# --- canonical on-disk form -------------------------------------------------

CG_FILE = "cg.tsv"
KG_FILE = "kg.tsv"
MANIFEST_FILE = "manifest.json"
FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class GraphBundle:
    cg: CollabGraph
    kg: KnowledgeGraph
    node_map: NodeMap | None = None
    extra: dict = field(default_factory=dict)


def write_graphs(directory, cg: CollabGraph, kg: KnowledgeGraph | None = None,
                 node_map: NodeMap | None = None, extra: dict | None = None) -> Path:
    """Write ``cg.tsv``, ``kg.tsv`` and ``manifest.json`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    kg = kg if kg is not None else KnowledgeGraph.empty()
    for label in kg.relation_labels:
        if "\t" in label or "\n" in label:
            raise GraphValidationError(f"relation label {label!r} contains a tab or newline")
    with open(directory / CG_FILE, "w") as fh:
        for u, i, t in zip(cg.users.tolist(), cg.items.tolist(), cg.times.tolist()):
            fh.write(f"{u}\t{i}\t{t}\n")
    with open(directory / KG_FILE, "w") as fh:
        labels = kg.relation_labels
        for h, r, t in zip(kg.heads.tolist(), kg.relations.tolist(), kg.tails.tolist()):
            fh.write(f"{h}\t{labels[r]}\t{t}\n")
    manifest = {
        "format_version": FORMAT_VERSION,
        "num_users": cg.num_users,
        "num_items": cg.num_items,
        "num_edges": cg.num_edges,
        "num_entities": kg.num_entities,
        "num_triples": kg.num_triples,
        "relation_labels": list(kg.relation_labels),
        "item_entity_map": {str(k): v for k, v in sorted(kg.item_entity_map.items())},
    }
    if node_map is not None:
        manifest["node_map"] = node_map.to_json()
    if extra:
        manifest["extra"] = extra
    (directory / MANIFEST_FILE).write_text(json.dumps(manifest, indent=1))
    return directory


def _read_int_tsv(path: Path, label_col: bool = False):
    rows, labels = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise GraphValidationError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
            try:
                if label_col:
                    rows.append((int(parts[0]), int(parts[2])))
                    labels.append(parts[1])
                else:
                    rows.append(tuple(int(p) for p in parts))
            except ValueError as exc:
                raise GraphValidationError(f"{path}:{lineno}: {exc}") from None
    return rows, labels


def read_graphs(directory) -> GraphBundle:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE
    if not manifest_path.exists():
        raise FileNotFoundError(f"no {MANIFEST_FILE} in {directory}")
    manifest = json.loads(manifest_path.read_text())
    edges, _ = _read_int_tsv(directory / CG_FILE)
    cols = np.array(edges, dtype=np.int64).reshape(-1, 3)
    cg = CollabGraph(manifest["num_users"], manifest["num_items"], cols[:, 0], cols[:, 1], cols[:, 2])
    pairs, labels = _read_int_tsv(directory / KG_FILE, label_col=True)
    label_list = list(manifest.get("relation_labels", []))
    label_index = {lab: k for k, lab in enumerate(label_list)}
    try:
        rels = [label_index[lab] for lab in labels]
    except KeyError as exc:
        raise GraphValidationError(f"relation {exc} missing from manifest") from None
    pcols = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    kg = KnowledgeGraph(manifest.get("num_entities", 0), tuple(label_list), pcols[:, 0],
                        np.array(rels, dtype=np.int64), pcols[:, 1],
                        {int(k): v for k, v in manifest.get("item_entity_map", {}).items()})
    node_map = NodeMap.from_json(manifest["node_map"]) if "node_map" in manifest else None
    return GraphBundle(cg, kg, node_map, manifest.get("extra", {}))
