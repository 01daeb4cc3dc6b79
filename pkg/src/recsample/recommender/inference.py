from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..graph import CollabGraph
from .model import GraphOps, ModelParams


@dataclass(frozen=True, eq=False)
class RankingResult:
    user: int
    items: np.ndarray
    scores: np.ndarray


def _rank(user, scores: np.ndarray, exclude, num_items: int) -> RankingResult:
    exclude = np.asarray(sorted(set(int(x) for x in exclude)), dtype=np.int64)
    if len(exclude) and (exclude[0] < 0 or exclude[-1] >= num_items):
        raise ValueError("exclude set references an unknown item")
    keep = np.ones(num_items, bool)
    keep[exclude] = False
    items = np.flatnonzero(keep)
    order = np.lexsort((items, -scores[items]))
    return RankingResult(int(user), items[order], scores[items[order]])


class InductiveScorer:
    """Embeds every node of ``graph`` from frozen key embeddings.

    ``graph`` must share the reference index space of ``params`` (key
    indices are looked up in it directly). Users or items unseen in
    training get their vectors from their neighbours here.
    """

    def __init__(self, params: ModelParams, graph: CollabGraph):
        self.params = params
        self.graph = graph
        ops = GraphOps(graph, params.key_users, params.key_items, params.norm_exponent, params.layers)
        out = ops.forward(params)
        self.user_emb = out[:graph.num_users]
        self.item_emb = out[graph.num_users:]

    def scores(self, user: int) -> np.ndarray:
        return self.item_emb @ self.user_emb[user]

    def rank(self, user: int, exclude=None) -> RankingResult:
        if exclude is None:
            exclude = self.graph.user_items(user)
        return _rank(user, self.scores(user), exclude, self.graph.num_items)


def score_all(params: ModelParams, inference_graph: CollabGraph, user: int, exclude) -> RankingResult:
    """Rank all items for ``user`` on ``inference_graph``, minus ``exclude``."""
    return InductiveScorer(params, inference_graph).rank(user, exclude)


class TopPop:
    """Items by descending training count, ties by ascending index."""

    def __init__(self, train_cg: CollabGraph):
        deg = train_cg.item_degrees()
        self.num_items = train_cg.num_items
        self.order = np.lexsort((np.arange(self.num_items), -deg))
        # strictly decreasing pseudo-scores reproduce the order in _rank
        self._scores = np.empty(self.num_items)
        self._scores[self.order] = -np.arange(self.num_items, dtype=float)

    def rank(self, user: int, exclude=()) -> RankingResult:
        return _rank(user, self._scores, exclude, self.num_items)


def toppop(train_cg: CollabGraph) -> np.ndarray:
    return TopPop(train_cg).order


class RandomRanker:
    def __init__(self, num_items: int, seed: int = 0):
        self.num_items = num_items
        self.seed = seed

    def rank(self, user: int, exclude=()) -> RankingResult:
        rng = np.random.default_rng([self.seed, user])
        return _rank(user, rng.random(self.num_items), exclude, self.num_items)
