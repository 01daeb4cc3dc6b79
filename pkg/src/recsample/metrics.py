"""Full-catalog ranking metrics with binary relevance."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

RANKED_METRICS = ("hr", "ndcg", "precision", "recall", "coverage")
AP_METRIC = "pr_auc_ap"
CSV_COLUMNS = ("method", "sampler", "ratio", "seed", "metric", "k", "value", "delta")


@dataclass(frozen=True, eq=False)
class EvalInstance:
    ranking: np.ndarray
    relevant: frozenset
    catalog_size: int

    def __post_init__(self):
        ranking = np.asarray(self.ranking, dtype=np.int64).ravel()
        if len(np.unique(ranking)) != len(ranking):
            raise ValueError("ranking contains duplicates")
        relevant = frozenset(int(x) for x in self.relevant)
        if any(not 0 <= r < self.catalog_size for r in relevant):
            raise ValueError("relevant item outside the catalog")
        object.__setattr__(self, "ranking", ranking)
        object.__setattr__(self, "relevant", relevant)

    def hits(self, k: int | None = None) -> np.ndarray:
        top = self.ranking if k is None else self.ranking[:k]
        if not self.relevant:
            return np.zeros(len(top), bool)
        return np.isin(top, np.fromiter(self.relevant, np.int64))


def _check_k(k):
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")


def ndcg_at_k(inst: EvalInstance, k: int) -> float:
    _check_k(k)
    if not inst.relevant:
        return 0.0
    hits = inst.hits(k)
    discounts = 1.0 / np.log2(np.arange(2, k + 2))
    dcg = float(discounts[:len(hits)][hits].sum())
    idcg = float(discounts[:min(k, len(inst.relevant))].sum())
    return dcg / idcg


def hr_at_k(inst: EvalInstance, k: int) -> float:
    _check_k(k)
    return float(inst.hits(k).any())


def precision_recall_at_k(inst: EvalInstance, k: int):
    _check_k(k)
    if not inst.relevant:
        raise ValueError("precision/recall undefined without relevant items")
    n_hits = int(inst.hits(k).sum())
    return n_hits / k, n_hits / len(inst.relevant)


def coverage_at_k(rankings, k: int, catalog_size: int) -> float:
    """Share of the catalog appearing in at least one top-k list."""
    _check_k(k)
    if catalog_size <= 0:
        raise ValueError("catalog_size must be positive")
    seen = set()
    for r in rankings:
        seen.update(np.asarray(r)[:k].tolist())
    return len(seen) / catalog_size


def average_precision(inst: EvalInstance) -> float:
    """Mean of precision@p over the positions p of relevant items.

    Relevant items missing from the ranking contribute zero.
    """
    if not inst.relevant:
        raise ValueError("average precision undefined without relevant items")
    hits = inst.hits()
    positions = np.flatnonzero(hits) + 1
    precisions = np.arange(1, len(positions) + 1) / positions
    return float(precisions.sum() / len(inst.relevant))


@dataclass
class MetricsReport:
    """Per-user values and their means, keyed by ``(metric, k)``.

    Average precision uses ``k=None``; coverage has no per-user values.
    """

    means: dict
    per_user: dict
    num_users: int
    excluded_users: list = field(default_factory=list)

    def value(self, metric: str, k: int | None = None) -> float:
        return self.means[(metric, k)]

    def to_json(self) -> dict:
        return {
            "num_users": self.num_users,
            "excluded_users": list(self.excluded_users),
            "means": [{"metric": m, "k": k, "value": v} for (m, k), v in sorted(
                self.means.items(), key=lambda kv: (kv[0][0], kv[0][1] or 0))],
        }

    @classmethod
    def from_json(cls, data: dict) -> "MetricsReport":
        means = {(row["metric"], row["k"]): row["value"] for row in data["means"]}
        return cls(means, {}, data["num_users"], data.get("excluded_users", []))

    def rows(self, method: str, sampler: str, ratio: float, seed: int, deltas: dict | None = None):
        deltas = deltas or {}
        out = []
        for (metric, k), value in sorted(self.means.items(), key=lambda kv: (kv[0][0], kv[0][1] or 0)):
            out.append({"method": method, "sampler": sampler, "ratio": ratio, "seed": seed,
                        "metric": metric, "k": "all" if k is None else k, "value": value,
                        "delta": deltas.get((metric, k))})
        return out


def evaluate_rankings(rankings: dict, relevant: dict, catalog_size: int, ks=(20,)) -> MetricsReport:
    """Aggregate metrics over users.

    ``rankings`` and ``relevant`` map user -> ranked items / target items.
    Users without targets are excluded and listed.
    """
    ks = tuple(ks)
    for k in ks:
        _check_k(k)
    per_user: dict = {}
    excluded = []
    users = []
    for user in sorted(rankings):
        rel = relevant.get(user, ())
        if not rel:
            excluded.append(user)
            continue
        users.append(user)
        inst = EvalInstance(rankings[user], frozenset(rel), catalog_size)
        for k in ks:
            p, r = precision_recall_at_k(inst, k)
            per_user.setdefault(("hr", k), []).append(hr_at_k(inst, k))
            per_user.setdefault(("ndcg", k), []).append(ndcg_at_k(inst, k))
            per_user.setdefault(("precision", k), []).append(p)
            per_user.setdefault(("recall", k), []).append(r)
        per_user.setdefault((AP_METRIC, None), []).append(average_precision(inst))
    means = {key: float(np.mean(vals)) for key, vals in per_user.items()}
    for k in ks:
        if users:
            means[("coverage", k)] = coverage_at_k([rankings[u] for u in users], k, catalog_size)
    per_user = {key: dict(zip(users, vals)) for key, vals in per_user.items()}
    return MetricsReport(means, per_user, len(users), excluded)


def relative_delta(value: float, baseline: float):
    """``(value - baseline) / baseline``; ``None`` when the baseline is zero."""
    if baseline == 0 or baseline is None or value is None or math.isnan(baseline):
        return None
    return (value - baseline) / baseline
