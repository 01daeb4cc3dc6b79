import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from recsample.graph import CollabGraph, KnowledgeGraph

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def collab_graphs(draw, max_users=8, max_items=8, min_edges=0):
    num_users = draw(st.integers(max(1, -(-min_edges // max_items)), max_users))
    num_items = draw(st.integers(max(1, -(-min_edges // num_users)), max_items))
    cells = draw(st.lists(st.booleans(), min_size=num_users * num_items,
                          max_size=num_users * num_items))
    pairs = [divmod(k, num_items) for k, on in enumerate(cells) if on]
    if len(pairs) < min_edges:
        extra = [divmod(k, num_items) for k, on in enumerate(cells) if not on]
        pairs = sorted(pairs + extra[:min_edges - len(pairs)])
    order = draw(st.permutations(range(len(pairs))))
    times = draw(st.lists(st.integers(0, 50), min_size=len(pairs), max_size=len(pairs)))
    edges = [(pairs[k][0], pairs[k][1], t) for k, t in zip(order, times)]
    return CollabGraph.from_edges(edges, num_users, num_items)


@st.composite
def knowledge_graphs(draw, max_entities=8, num_labels=2):
    n = draw(st.integers(1, max_entities))
    triples = draw(st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, num_labels - 1),
                                     st.integers(0, n - 1))))
    items = draw(st.lists(st.integers(0, n - 1), unique=True, max_size=n))
    return KnowledgeGraph.from_triples(sorted(triples), n, [f"r{k}" for k in range(num_labels)],
                                       {k: e for k, e in enumerate(items)})


@pytest.fixture
def small_cg():
    # u0:{i0,i1}, u1:{i1}
    return CollabGraph.from_edges([(0, 0, 1), (0, 1, 2), (1, 1, 3)])


def edge_set(cg):
    return sorted(zip(cg.users.tolist(), cg.items.tolist(), cg.times.tolist()))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line per acceptance criterion; ``ok=None`` means skipped."""
    lines = request.config.stash[_VERDICTS]

    def record(number, title, ok, detail=""):
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"[{status}] criterion {number}: {title}" + (f" ({detail})" if detail else "")
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
