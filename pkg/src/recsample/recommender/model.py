"""Key-query initial embeddings, light propagation and the two pairwise losses.

Gradients are derived by hand; the whole forward pass is linear in the
parameters up to the scores, so the backward pass reuses the same sparse
operators.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from ..graph import CollabGraph

CHECKPOINT_VERSION = 1
PARAM_NAMES = ("key_user_emb", "key_item_emb", "template_user", "template_item", "W_s")


@dataclass
class TrainConfig:
    dim: int = 64
    layers: int = 2
    norm_exponent: float = 1.0
    key_fraction: float = 1.0
    learning_rate: float = 10.0
    epochs: int = 30
    batch_size: int = 64
    self_loss_weight: float = 0.1
    negatives_per_positive: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        if self.layers < 0:
            raise ValueError("layers must be non-negative")
        if self.norm_exponent < 0:
            raise ValueError("norm_exponent must be non-negative")
        if not 0 < self.key_fraction <= 1:
            raise ValueError("key_fraction must lie in (0, 1]")
        if self.batch_size < 1 or self.negatives_per_positive < 1 or self.epochs < 0:
            raise ValueError("batch_size, negatives_per_positive must be positive, epochs >= 0")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        names = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key in names:
                kwargs[key] = (float if names[key] == "float" else int)(value)
        return cls(**kwargs)


@dataclass(eq=False)
class ModelParams:
    """Learned state.

    ``key_users``/``key_items`` hold node indices in the reference index
    space (the graph inference runs on); row ``k`` of ``key_user_emb``
    belongs to user ``key_users[k]``.
    """

    key_users: np.ndarray
    key_items: np.ndarray
    key_user_emb: np.ndarray
    key_item_emb: np.ndarray
    template_user: np.ndarray
    template_item: np.ndarray
    W_s: np.ndarray
    layers: int = 2
    norm_exponent: float = 1.0

    @property
    def dim(self) -> int:
        return self.template_user.shape[0]

    def arrays(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "ModelParams":
        return ModelParams(self.key_users.copy(), self.key_items.copy(),
                           **{k: v.copy() for k, v in self.arrays().items()},
                           layers=self.layers, norm_exponent=self.norm_exponent)

    def save(self, path, config: TrainConfig | None = None, extra: dict | None = None):
        meta = {"version": CHECKPOINT_VERSION, "layers": self.layers,
                "norm_exponent": self.norm_exponent,
                "config": asdict(config) if config else None, "extra": extra or {}}
        with open(path, "wb") as fh:
            np.savez(fh, key_users=self.key_users, key_items=self.key_items, meta=json.dumps(meta),
                     **self.arrays())

    @classmethod
    def load(cls, path) -> "ModelParams":
        with np.load(Path(path), allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("version") != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
            return cls(data["key_users"], data["key_items"],
                       **{name: data[name] for name in PARAM_NAMES},
                       layers=meta["layers"], norm_exponent=meta["norm_exponent"])

    @staticmethod
    def checkpoint_meta(path) -> dict:
        with np.load(Path(path), allow_pickle=False) as data:
            return json.loads(str(data["meta"]))


def select_keys(cg: CollabGraph, key_fraction: float = 1.0):
    """Highest-degree ``ceil(fraction * n)`` users and items, ties to lower index.

    ``n`` counts nodes with at least one edge. Returned indices are sorted.
    """
    if cg.num_edges == 0:
        raise ValueError("cannot select keys from an empty graph")
    if not 0 < key_fraction <= 1:
        raise ValueError("key_fraction must lie in (0, 1]")

    def top(deg):
        active = np.flatnonzero(deg)
        n_keys = math.ceil(key_fraction * len(active) - 1e-9)
        order = np.lexsort((active, -deg[active]))
        return np.sort(active[order[:n_keys]])

    return top(cg.user_degrees()), top(cg.item_degrees())


class GraphOps:
    """Sparse operators of one graph for a fixed key set.

    ``key_users``/``key_items`` are indices into ``graph``.
    """

    def __init__(self, graph: CollabGraph, key_users, key_items, norm_exponent: float, layers: int):
        U, I = graph.num_users, graph.num_items
        key_users = np.asarray(key_users, np.int64)
        key_items = np.asarray(key_items, np.int64)
        if len(key_users) and key_users.max() >= U or len(key_items) and key_items.max() >= I:
            raise ValueError("key index outside the graph")
        self.graph = graph
        self.num_users, self.num_items = U, I
        self.layers = layers
        A = sp.csr_matrix((np.ones(graph.num_edges), (graph.users, graph.items)), shape=(U, I))
        du = np.asarray(A.sum(axis=1)).ravel()
        di = np.asarray(A.sum(axis=0)).ravel()
        self.user_norm = (du + 1.0) ** -norm_exponent
        self.item_norm = (di + 1.0) ** -norm_exponent
        self.A_key_items = A[:, key_items].tocsr()          # U x Ki
        self.A_key_users_T = A[key_users, :].T.tocsr()      # I x Ku
        self.A_key_items_T = self.A_key_items.T.tocsr()
        self.A_key_users = self.A_key_users_T.T.tocsr()
        with np.errstate(divide="ignore"):
            iu = np.where(du > 0, du ** -0.5, 0.0)
            ii = np.where(di > 0, di ** -0.5, 0.0)
        w = iu[graph.users] * ii[graph.items]
        rows = np.concatenate([graph.users, graph.items + U])
        cols = np.concatenate([graph.items + U, graph.users])
        self.P = sp.csr_matrix((np.concatenate([w, w]), (rows, cols)), shape=(U + I, U + I))
        self.user_key_pos = np.full(U, -1, np.int64)
        self.user_key_pos[key_users] = np.arange(len(key_users))
        self.item_key_pos = np.full(I, -1, np.int64)
        self.item_key_pos[key_items] = np.arange(len(key_items))

    def initial(self, p: ModelParams) -> np.ndarray:
        """Layer-0 vectors for all users then all items."""
        eu = self.user_norm[:, None] * (self.A_key_items @ p.key_item_emb) + p.template_user
        ei = self.item_norm[:, None] * (self.A_key_users_T @ p.key_user_emb) + p.template_item
        return np.vstack([eu, ei])

    def propagate(self, e0: np.ndarray) -> np.ndarray:
        acc = e0.copy()
        cur = e0
        for _ in range(self.layers):
            cur = self.P @ cur
            acc += cur
        return acc / (self.layers + 1)

    def forward(self, p: ModelParams) -> np.ndarray:
        return self.propagate(self.initial(p))

    def backward(self, grad_out: np.ndarray) -> dict:
        """Gradients of the embedding parameters given d(loss)/d(output)."""
        # P is symmetric, so the adjoint of propagate is propagate itself
        g0 = self.propagate(grad_out)
        gu, gi = g0[:self.num_users], g0[self.num_users:]
        return {
            "key_item_emb": self.A_key_items_T @ (self.user_norm[:, None] * gu),
            "key_user_emb": self.A_key_users @ (self.item_norm[:, None] * gi),
            "template_user": gu.sum(axis=0),
            "template_item": gi.sum(axis=0),
        }


def _log_sigmoid_neg(x):
    """``-ln sigmoid(x)`` and its derivative, overflow-safe."""
    return np.logaddexp(0.0, -x), -expit(-x)


def bpr_terms(out_u, out_i, out_j):
    """Mean BPR loss over triples and the gradients w.r.t. the three inputs."""
    x = np.einsum("nd,nd->n", out_u, out_i - out_j)
    loss, dx = _log_sigmoid_neg(x)
    dx = dx / len(x)
    return float(loss.mean()), dx[:, None] * (out_i - out_j), dx[:, None] * out_u, -dx[:, None] * out_u


def self_enhanced_terms(W, e_u, e_i, e_j):
    """Mean ``-ln sigmoid(e_u W e_i - e_u W e_j)`` and its gradients.

    Returns ``(loss, d_eu, d_ei, d_ej, d_W)``; an empty batch has loss 0.
    """
    if len(e_u) == 0:
        z = np.zeros((0, W.shape[0]))
        return 0.0, z, z, z, np.zeros_like(W)
    diff = e_i - e_j
    x = np.einsum("nd,nd->n", e_u @ W, diff)
    loss, dx = _log_sigmoid_neg(x)
    dx = dx / len(x)
    d_eu = dx[:, None] * (diff @ W.T)
    uw = dx[:, None] * (e_u @ W)
    d_W = (dx[:, None] * e_u).T @ diff
    return float(loss.mean()), d_eu, uw, -uw, d_W


def loss_and_grad(p: ModelParams, ops: GraphOps, users, pos, neg, self_loss_weight: float):
    """Combined objective ``bpr + weight * self_enhanced`` on local triples.

    Returns ``(loss, grads, parts)`` with ``grads`` keyed like
    :data:`PARAM_NAMES` and ``parts = {"bpr": ..., "self": ...}``.
    """
    users, pos, neg = (np.asarray(a, np.int64) for a in (users, pos, neg))
    U = ops.num_users
    out = ops.forward(p)
    bpr, g_u, g_i, g_j = bpr_terms(out[users], out[pos + U], out[neg + U])
    grad_out = np.zeros_like(out)
    np.add.at(grad_out, users, g_u)
    np.add.at(grad_out, pos + U, g_i)
    np.add.at(grad_out, neg + U, g_j)
    grads = ops.backward(grad_out)

    ku, ki, kj = ops.user_key_pos[users], ops.item_key_pos[pos], ops.item_key_pos[neg]
    ok = (ku >= 0) & (ki >= 0) & (kj >= 0)
    ku, ki, kj = ku[ok], ki[ok], kj[ok]
    self_loss, d_eu, d_ei, d_ej, d_W = self_enhanced_terms(
        p.W_s, p.key_user_emb[ku], p.key_item_emb[ki], p.key_item_emb[kj])
    w = self_loss_weight
    np.add.at(grads["key_user_emb"], ku, w * d_eu)
    np.add.at(grads["key_item_emb"], ki, w * d_ei)
    np.add.at(grads["key_item_emb"], kj, w * d_ej)
    grads["W_s"] = w * d_W
    return bpr + w * self_loss, grads, {"bpr": bpr, "self": self_loss}


def init_embeddings(graph: CollabGraph, params: ModelParams, key_users=None, key_items=None):
    """Layer-0 user and item vectors on ``graph``.

    Each node averages the raw vectors of its key neighbours, scaled by
    ``(deg + 1) ** -norm_exponent`` where ``deg`` counts all neighbours, and
    adds its template. Keys default to those stored in ``params``.
    """
    key_users = params.key_users if key_users is None else key_users
    key_items = params.key_items if key_items is None else key_items
    ops = GraphOps(graph, key_users, key_items, params.norm_exponent, 0)
    e0 = ops.initial(params)
    return e0[:graph.num_users], e0[graph.num_users:]


def propagate(graph: CollabGraph, user_e0: np.ndarray, item_e0: np.ndarray, layers: int):
    """Mean of layers ``0..layers`` of symmetric-normalised neighbour sums."""
    if layers < 0:
        raise ValueError("layers must be non-negative")
    ops = GraphOps(graph, [], [], 0.0, layers)
    out = ops.propagate(np.vstack([user_e0, item_e0]))
    return out[:graph.num_users], out[graph.num_users:]
