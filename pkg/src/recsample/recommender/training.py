from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..graph import CollabGraph, NodeMap
from .model import GraphOps, ModelParams, TrainConfig, loss_and_grad, select_keys

logger = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite loss {loss} in epoch {epoch}")
        self.epoch = epoch


@dataclass
class TrainResult:
    params: ModelParams
    loss_trace: list = field(default_factory=list)
    key_users_local: np.ndarray | None = None
    key_items_local: np.ndarray | None = None


def init_params(rng: np.random.Generator, n_key_users: int, n_key_items: int, config: TrainConfig,
                key_users, key_items) -> ModelParams:
    d = config.dim

    def draw(*shape):
        return rng.uniform(-0.01, 0.01, size=shape)

    return ModelParams(np.asarray(key_users, np.int64), np.asarray(key_items, np.int64),
                       draw(n_key_users, d), draw(n_key_items, d), draw(d), draw(d), draw(d, d),
                       layers=config.layers, norm_exponent=config.norm_exponent)


def sample_negatives(rng, users: np.ndarray, candidates: np.ndarray, edge_keys: np.ndarray,
                     num_items: int, max_rounds: int = 100) -> np.ndarray:
    """Uniform draws from ``candidates`` avoiding each user's training items."""
    neg = candidates[rng.integers(len(candidates), size=len(users))]
    for _ in range(max_rounds):
        keys = users * num_items + neg
        pos = np.searchsorted(edge_keys, keys)
        pos[pos == len(edge_keys)] = 0
        clash = np.flatnonzero(edge_keys[pos] == keys)
        if len(clash) == 0:
            break
        neg[clash] = candidates[rng.integers(len(candidates), size=len(clash))]
    return neg


def train(train_cg: CollabGraph, config: TrainConfig = TrainConfig(),
          node_map: NodeMap | None = None) -> TrainResult:
    """Fit the model with plain minibatch SGD.

    Every batch draws ``batch_size`` training edges uniformly with
    replacement and ``negatives_per_positive`` negatives per edge; an epoch
    has ``ceil(|E| / batch_size)`` batches and each batch propagates over
    the whole graph. All randomness (initial parameters included) comes
    from one stream seeded by ``config.seed``. ``node_map`` translates key
    indices into the reference index space stored in the parameters.
    """
    if train_cg.num_edges == 0:
        raise ValueError("cannot train on an empty graph")
    rng = np.random.default_rng(config.seed)
    ku, ki = select_keys(train_cg, config.key_fraction)
    ref_u = node_map.users[ku] if node_map is not None else ku
    ref_i = node_map.items[ki] if node_map is not None else ki
    params = init_params(rng, len(ku), len(ki), config, ref_u, ref_i)
    ops = GraphOps(train_cg, ku, ki, config.norm_exponent, config.layers)
    edge_keys = train_cg.edge_keys()
    candidates = np.flatnonzero(train_cg.item_degrees())
    n_batches = math.ceil(train_cg.num_edges / config.batch_size)
    n_neg = config.negatives_per_positive
    lr = config.learning_rate
    trace = []
    for epoch in range(config.epochs):
        total = 0.0
        for _ in range(n_batches):
            picked = rng.integers(train_cg.num_edges, size=config.batch_size)
            users = np.repeat(train_cg.users[picked], n_neg)
            pos = np.repeat(train_cg.items[picked], n_neg)
            neg = sample_negatives(rng, users, candidates, edge_keys, train_cg.num_items)
            loss, grads, _ = loss_and_grad(params, ops, users, pos, neg, config.self_loss_weight)
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            for name, g in grads.items():
                getattr(params, name)[...] -= lr * g
            total += loss
        trace.append(total / n_batches)
        logger.debug("epoch %d loss %.5f", epoch, trace[-1])
    return TrainResult(params, trace, ku, ki)
