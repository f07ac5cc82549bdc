import itertools

import numpy as np
import pytest
from hypothesis import strategies as st

from mcdn.graph import Admg, ordinal


def random_admg(rng, n_max=6, n_min=2, p_dir=0.35, p_bi=0.35, k=2):
    """Random ADMG: directed edges only go forward in a random order, so it is acyclic."""
    n = int(rng.integers(n_min, n_max + 1))
    names = [f"X{i}" for i in range(1, n + 1)]
    order = list(rng.permutation(names))
    directed, bidirected = [], []
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < p_dir:
            directed.append((order[i], order[j]))
        if rng.random() < p_bi:
            bidirected.append((order[i], order[j]))
    return Admg(names, directed, bidirected, {v: ordinal(k) for v in names})


@st.composite
def admgs(draw, n_max=6, n_min=1):
    n = draw(st.integers(n_min, n_max))
    names = [f"V{i}" for i in range(n)]
    perm = draw(st.permutations(names))
    pairs = list(itertools.combinations(range(n), 2))
    directed = [(perm[i], perm[j]) for i, j in pairs if draw(st.booleans())]
    bidirected = [(perm[i], perm[j]) for i, j in pairs if draw(st.booleans())]
    return Admg(names, directed, bidirected)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number])
