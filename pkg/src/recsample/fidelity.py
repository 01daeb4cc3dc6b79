"""Structural fidelity of a sample against the graph it was drawn from."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import CollabGraph, KnowledgeGraph, NodeMap


class FidelityError(ValueError):
    pass


def ks_d_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov distance ``sup_x |F_a(x) - F_b(x)|``.

    Both empirical CDFs are step functions, so the supremum is attained at
    one of the pooled sample values; it is evaluated there exactly.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise FidelityError("KS statistic needs two non-empty samples")
    points = np.union1d(a, b)
    fa = np.searchsorted(a, points, side="right") / a.size
    fb = np.searchsorted(b, points, side="right") / b.size
    return float(np.abs(fa - fb).max())


def fisher_pearson_skewness(values) -> float:
    """``m3 / m2**1.5`` with population central moments."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 3:
        raise FidelityError("skewness needs at least 3 values")
    if np.ptp(x) == 0:
        raise FidelityError("skewness undefined for zero variance")
    dev = x - x.mean()
    m2 = np.mean(dev ** 2)
    m3 = np.mean(dev ** 3)
    return float(m3 / m2 ** 1.5)


def _skew_or_none(values):
    try:
        return fisher_pearson_skewness(values)
    except FidelityError:
        return None


def _d_or_none(a, b):
    if len(a) == 0 or len(b) == 0:
        return None
    return ks_d_statistic(a, b)


@dataclass
class FidelityReport:
    d_statistics: dict
    stime_original: float | None
    stime_sample: float | None
    user_ratio_original: float | None
    user_ratio_sample: float | None
    density_cg_original: float | None
    density_cg_sample: float | None
    density_kg_original: float | None
    density_kg_sample: float | None
    counts: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def _user_ratio(cg: CollabGraph):
    n = cg.num_users + cg.num_items
    return cg.num_users / n if n else None


def _density_cg(cg: CollabGraph):
    n = cg.num_users * cg.num_items
    return cg.num_edges / n if n else None


def _density_kg(kg: KnowledgeGraph):
    return kg.num_triples / kg.num_entities ** 2 if kg.num_entities else None


def fidelity_report(original, sample, sample_kg_map: NodeMap | None = None) -> FidelityReport:
    """Compare ``sample = (cg, kg)`` against ``original = (cg, kg)``.

    Degree distributions are compared per node type: users and items of the
    collaborative graph, in- and out-degrees of item entities and of
    descriptive entities in the KG. Sample degrees are measured inside the
    sample. Item entities of the sample are found through ``sample_kg_map``
    when given, otherwise through the sample's own ``item_entity_map``.
    Entries that cannot be computed (empty KG, too few timestamps) are
    ``None``.
    """
    ocg, okg = original
    scg, skg = sample
    okg = okg if okg is not None else KnowledgeGraph.empty()
    skg = skg if skg is not None else KnowledgeGraph.empty()
    d = {
        "cg_user": _d_or_none(ocg.user_degrees(), scg.user_degrees()),
        "cg_item": _d_or_none(ocg.item_degrees(), scg.item_degrees()),
    }
    o_is_item = np.zeros(okg.num_entities, bool)
    o_is_item[okg.item_entities()] = True
    s_is_item = np.zeros(skg.num_entities, bool)
    if sample_kg_map is not None:
        s_is_item = o_is_item[sample_kg_map.entities] if okg.num_entities else s_is_item
    else:
        s_is_item[skg.item_entities()] = True
    for group, o_mask, s_mask in (("item", o_is_item, s_is_item), ("desc", ~o_is_item, ~s_is_item)):
        d[f"kg_{group}_in"] = _d_or_none(okg.in_degrees()[o_mask], skg.in_degrees()[s_mask])
        d[f"kg_{group}_out"] = _d_or_none(okg.out_degrees()[o_mask], skg.out_degrees()[s_mask])
    counts = {
        "original": {"users": ocg.num_users, "items": ocg.num_items, "edges": ocg.num_edges,
                     "entities": okg.num_entities, "triples": okg.num_triples},
        "sample": {"users": scg.num_users, "items": scg.num_items, "edges": scg.num_edges,
                   "entities": skg.num_entities, "triples": skg.num_triples},
    }
    return FidelityReport(
        d_statistics=d,
        stime_original=_skew_or_none(ocg.times),
        stime_sample=_skew_or_none(scg.times),
        user_ratio_original=_user_ratio(ocg),
        user_ratio_sample=_user_ratio(scg),
        density_cg_original=_density_cg(ocg),
        density_cg_sample=_density_cg(scg),
        density_kg_original=_density_kg(okg),
        density_kg_sample=_density_kg(skg),
        counts=counts,
    )
