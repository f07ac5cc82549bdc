"""Binary bi-directed models in Moebius form, and the worked binary identities.

A Moebius table stores ``q_A = P(X_A = 0)`` for every connected vertex set
``A`` of a bi-directed graph; sets that split into several components take
the product of their components' entries.
"""

import math
from collections import deque
from itertools import combinations

import numpy as np

from .errors import UnsupportedConfigurationError
from .factors import OrdinalMarginal
from .gallery import single_district, two_districts
from .model import McdnModel, snap_mass

MAX_VERTICES = 16


def _components(g, vs):
    vs = set(vs)
    out = []
    while vs:
        root = min(vs, key=g.index)
        comp = {root}
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for s in g.spouses(v):
                if s in vs and s not in comp:
                    comp.add(s)
                    queue.append(s)
        vs -= comp
        out.append(frozenset(comp))
    return out


def connected_sets(g, vertices=None):
    """Non-empty vertex sets that are connected in the bi-directed skeleton.

    Sets are grown breadth-first from single vertices by adding one
    neighbour at a time, and returned ordered by size, then by the
    declaration positions of their members.
    """
    vertices = list(g.vertices if vertices is None else vertices)
    if len(vertices) > MAX_VERTICES:
        raise UnsupportedConfigurationError(
            f"connected-set enumeration is capped at {MAX_VERTICES} vertices, got {len(vertices)}"
        )
    allowed = set(vertices)
    found = set()
    frontier = [frozenset([v]) for v in vertices]
    found.update(frontier)
    while frontier:
        nxt = []
        for s in frontier:
            border = {w for v in s for w in g.spouses(v) if w in allowed} - s
            for w in border:
                t = s | {w}
                if t not in found:
                    found.add(t)
                    nxt.append(t)
        frontier = nxt
    return sorted(found, key=lambda s: (len(s), sorted(g.index(v) for v in s)))


class MoebiusTable:
    """``q`` parameters of a binary bi-directed graph, stored on connected sets."""

    def __init__(self, graph, q):
        if graph.directed_edges:
            raise UnsupportedConfigurationError("Moebius tables need a purely bi-directed graph")
        for v in graph.vertices:
            if graph.kind(v).cardinality != 2:
                raise UnsupportedConfigurationError(f"{v!r} is not binary")
        self.graph = graph
        self.q = {frozenset(k): float(val) for k, val in q.items() if k}
        self._cache = {}
        for a in self.q:
            if len(_components(graph, a)) != 1:
                raise ValueError(f"{sorted(a)} is not connected; store connected sets only")

    def __getitem__(self, a):
        return self.q_of(a)

    def q_of(self, a):
        a = frozenset(a)
        if not a:
            return 1.0
        if a not in self._cache:
            out = 1.0
            for comp in _components(self.graph, a):
                out *= self.q[comp]
            self._cache[a] = out
        return self._cache[a]

    def violations(self, tol=1e-12):
        """Human-readable list of broken table invariants."""
        bad = []
        for a, val in self.q.items():
            lim = min(self.q[frozenset([v])] for v in a)
            if val < -tol or val > lim + tol:
                bad.append(f"q{sorted(a)}={val} outside [0, {lim}]")
        for a in self.q:
            for b in self.q:
                if a < b and self.q[b] > self.q[a] + tol:
                    bad.append(f"q{sorted(b)} > q{sorted(a)}")
        return bad

    def items(self):
        order = connected_sets(self.graph)
        return [(tuple(self.graph.sort(a)), self.q[a]) for a in order if a in self.q]


def moebius_to_pmf(t: MoebiusTable, assignment) -> float:
    """P(X_A = 0, X_rest = 1) by the alternating sum over supersets of A."""
    g = t.graph
    zeros = frozenset(v for v in g.vertices if int(assignment[v]) == 0)
    ones = [v for v in g.vertices if v not in zeros]
    total = 0.0
    for r in range(len(ones) + 1):
        sign = -1.0 if r % 2 else 1.0
        for extra in combinations(ones, r):
            total += sign * t.q_of(zeros | frozenset(extra))
    return float(snap_mass(total))


def cdn_to_moebius(m: McdnModel) -> MoebiusTable:
    """q_A for every connected set, read off the joint CDF at x_A = 0 and 1 elsewhere."""
    g = m.graph
    if g.directed_edges:
        raise UnsupportedConfigurationError("model must be purely bi-directed")
    q = {}
    for a in connected_sets(g):
        x = {v: 0 if v in a else 1 for v in g.vertices}
        q[a] = float(m.bidirected_cdf(x)[0])
    return MoebiusTable(g, q)


# -- worked binary examples ---------------------------------------------------

def _frank2(theta, u, v):
    # closed-form bivariate Frank copula
    if abs(theta) < 1e-8:
        return u * v
    num = math.expm1(-theta * u) * math.expm1(-theta * v)
    return -math.log1p(num / math.expm1(-theta)) / theta


def random_binary_model(graph, rng, theta_range=(-5.0, 8.0), theta_range_multi=(0.1, 8.0), independent=False):
    marginals = {}
    for v in graph.vertices:
        pa = graph.parents(v)
        cards = [graph.kind(p).cardinality for p in pa]
        k = graph.kind(v).cardinality
        table = rng.dirichlet(np.ones(k), size=tuple(cards) if cards else None)
        table = table / table.sum(axis=-1, keepdims=True)
        marginals[v] = OrdinalMarginal(v, pa, table, cards)
    m = McdnModel(graph, marginals)
    if independent:
        return m
    thetas = [rng.uniform(*theta_range) if len(c) == 2 else rng.uniform(*theta_range_multi) for c in m.cliques]
    return m.with_thetas(thetas)


def _two_districts_gap(m):
    joint = m.joint_table()  # axes X1, X2, X3, X4
    direct = float(joint[0, 1, 1, 0])
    q1 = joint[0].sum()
    q4 = joint[..., 0].sum()
    q12_4 = joint[0, 0, :, 0].sum() / q4
    q34_1 = joint[0, :, 0, 0].sum() / q1
    expansion = q1 * q4 - q34_1 * q1 - q12_4 * q4 + q12_4 * q34_1
    return abs(direct - expansion)


def _single_district_gap(m):
    ms = m.marginals
    th = {tuple(c): t for c, t in m.thetas().items()}
    u = {
        "X1": ms["X1"].row([0])[0],
        "X2": ms["X2"].row([0])[0],
        "X3": ms["X3"].row([0])[0],
        "X4": ms["X4"].row()[0],
        "X5": ms["X5"].row()[0],
    }
    cliques_in = {v: sum(v in c for c in th) for v in u}
    a = {v: u[v] ** (1.0 / (cliques_in[v] + 1)) for v in u}

    def c(x, y):
        return _frank2(th[(x, y)], a[x], a[y])

    # seven factors; the parentless X4, X5 terms ride along with a clique factor
    f = a["X1"] * c("X1", "X3") * c("X2", "X3") * (c("X3", "X4") * a["X4"])
    g = (c("X4", "X5") * a["X5"]) * a["X3"] * a["X2"]
    zero = {v: 0 for v in m.vertices}
    p0 = float(m.prob(zero)[0])
    gap = abs(p0 - f * g)

    # parameters that only enter f (X1's table, theta_13) against ones that
    # only enter g (X5's table, theta_45): the log cross-ratio must vanish
    def variant(f_side, g_side):
        mm = dict(ms)
        thetas = dict(th)
        if f_side:
            mm["X1"] = OrdinalMarginal("X1", ["X2"], ms["X1"].table[..., ::-1], [2])
            thetas[("X1", "X3")] = th[("X1", "X3")] + 1.0
        if g_side:
            mm["X5"] = OrdinalMarginal("X5", [], ms["X5"].table[..., ::-1])
            thetas[("X4", "X5")] = th[("X4", "X5")] - 1.0
        return math.log(float(McdnModel(m.graph, mm, thetas).prob(zero)[0]))

    cross = variant(False, False) + variant(True, True) - variant(True, False) - variant(False, True)
    return max(gap, abs(cross))


def verify_worked_identity(example, params=None, seed=None, independent=False) -> float:
    """Discrepancy of a worked binary identity.

    Parameters
    ----------
    example : {"two-districts", "single-district"}
        ``two-districts``: P(X1=0, X2=1, X3=1, X4=0) from the district
        product against its four-term expansion in conditional zero
        probabilities. ``single-district``: P(X=0) against a product of seven
        clique and marginal factors, plus a check that it splits into a part
        over X1..X4 and a part over X2..X5.
    params : McdnModel, optional
        A binary model on the example graph; drawn at random if omitted.
    """
    builders = {"two-districts": (two_districts, _two_districts_gap), "single-district": (single_district, _single_district_gap)}
    if example not in builders:
        raise ValueError(f"unknown example {example!r}; choose from {sorted(builders)}")
    build, gap = builders[example]
    if params is None:
        rng = np.random.default_rng(seed)
        params = random_binary_model(build(), rng, independent=independent)
    return gap(params)
