"""Acyclic directed mixed graphs and the graph algorithms the models rely on.

Vertices are plain strings. Every algorithm breaks ties by the order in which
vertices were declared, so all outputs are reproducible.
"""

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .errors import CycleError, GraphError

ORDINAL = "ordinal"
CONTINUOUS = "continuous"


@dataclass(frozen=True)
class VariableKind:
    name: str
    cardinality: Optional[int] = None

    def __post_init__(self):
        if self.name == ORDINAL:
            if self.cardinality is None or int(self.cardinality) < 2:
                raise GraphError(f"ordinal variables need cardinality >= 2, got {self.cardinality}")
        elif self.name == CONTINUOUS:
            if self.cardinality is not None:
                raise GraphError("continuous variables take no cardinality")
        else:
            raise GraphError(f"unknown variable kind {self.name!r}")

    @property
    def is_ordinal(self):
        return self.name == ORDINAL

    def __str__(self):
        if self.is_ordinal:
            return f"{ORDINAL} {self.cardinality}"
        return CONTINUOUS


def ordinal(k: int = 2) -> VariableKind:
    return VariableKind(ORDINAL, int(k))


def continuous() -> VariableKind:
    return VariableKind(CONTINUOUS)


class Admg:
    """An acyclic directed mixed graph.

    Parameters
    ----------
    vertices : sequence of str
        Vertex names in declaration order.
    directed : iterable of (parent, child) pairs
    bidirected : iterable of unordered pairs
    kinds : dict, optional
        Vertex name to :class:`VariableKind`. Missing vertices default to
        binary ordinal.

    Raises
    ------
    GraphError
        On duplicate names, unknown endpoints, self-loops or repeated edges.
    CycleError
        If the directed part has a cycle.
    """

    def __init__(self, vertices: Sequence[str], directed=(), bidirected=(), kinds=None):
        vertices = tuple(vertices)
        if len(set(vertices)) != len(vertices):
            seen = set()
            dup = next(v for v in vertices if v in seen or seen.add(v))
            raise GraphError(f"duplicate vertex {dup!r}")
        self._vertices = vertices
        self._index = {v: i for i, v in enumerate(vertices)}
        kinds = dict(kinds or {})
        for v in kinds:
            if v not in self._index:
                raise GraphError(f"kind given for unknown vertex {v!r}")
        self._kinds = {v: kinds.get(v, ordinal(2)) for v in vertices}

        self._pa = {v: [] for v in vertices}
        self._ch = {v: [] for v in vertices}
        self._sp = {v: [] for v in vertices}
        dir_edges = set()
        for a, b in directed:
            self._check_endpoints(a, b)
            if (a, b) in dir_edges:
                raise GraphError(f"repeated directed edge {a} -> {b}")
            dir_edges.add((a, b))
            self._pa[b].append(a)
            self._ch[a].append(b)
        bi_edges = set()
        for a, b in bidirected:
            self._check_endpoints(a, b)
            key = self._pair(a, b)
            if key in bi_edges:
                raise GraphError(f"repeated bi-directed edge {a} <-> {b}")
            bi_edges.add(key)
            self._sp[a].append(b)
            self._sp[b].append(a)
        for table in (self._pa, self._ch, self._sp):
            for v in table:
                table[v] = tuple(self.sort(table[v]))
        self._directed = tuple(sorted(dir_edges, key=lambda e: (self._index[e[0]], self._index[e[1]])))
        self._bidirected = tuple(sorted(bi_edges, key=lambda e: (self._index[e[0]], self._index[e[1]])))
        cycle = self._find_cycle()
        if cycle:
            raise CycleError(cycle)

    def _check_endpoints(self, a, b):
        for v in (a, b):
            if v not in self._index:
                raise GraphError(f"edge endpoint {v!r} is not a declared vertex")
        if a == b:
            raise GraphError(f"self-loop on {a!r}")

    def _pair(self, a, b):
        return (a, b) if self._index[a] < self._index[b] else (b, a)

    def _find_cycle(self):
        white, grey, black = 0, 1, 2
        color = {v: white for v in self._vertices}
        for root in self._vertices:
            if color[root] != white:
                continue
            stack = [(root, iter(self._ch[root]))]
            path = [root]
            color[root] = grey
            while stack:
                v, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    color[v] = black
                    stack.pop()
                    path.pop()
                elif color[nxt] == grey:
                    return path[path.index(nxt):] + [nxt]
                elif color[nxt] == white:
                    color[nxt] = grey
                    stack.append((nxt, iter(self._ch[nxt])))
                    path.append(nxt)
        return None

    # -- basic accessors ---------------------------------------------------
    @property
    def vertices(self) -> Tuple[str, ...]:
        return self._vertices

    @property
    def directed_edges(self) -> Tuple[Tuple[str, str], ...]:
        return self._directed

    @property
    def bidirected_edges(self) -> Tuple[Tuple[str, str], ...]:
        return self._bidirected

    @property
    def kinds(self) -> Dict[str, VariableKind]:
        return dict(self._kinds)

    def kind(self, v) -> VariableKind:
        return self._kinds[v]

    def index(self, v) -> int:
        return self._index[v]

    def __contains__(self, v):
        return v in self._index

    def __len__(self):
        return len(self._vertices)

    def parents(self, v) -> Tuple[str, ...]:
        return self._pa[v]

    def children(self, v) -> Tuple[str, ...]:
        return self._ch[v]

    def spouses(self, v) -> Tuple[str, ...]:
        return self._sp[v]

    def sort(self, vs: Iterable[str]) -> List[str]:
        """Sort vertices by declaration order."""
        return sorted(vs, key=self._index.__getitem__)

    def parents_of(self, vs: Iterable[str]) -> FrozenSet[str]:
        out = set()
        for v in vs:
            out.update(self._pa[v])
        return frozenset(out)

    def ancestors(self, vs: Iterable[str]) -> FrozenSet[str]:
        """Ancestors of ``vs``, including ``vs`` itself."""
        seen = set(vs)
        queue = deque(seen)
        while queue:
            v = queue.popleft()
            for p in self._pa[v]:
                if p not in seen:
                    seen.add(p)
                    queue.append(p)
        return frozenset(seen)

    def descendants(self, vs: Iterable[str]) -> FrozenSet[str]:
        seen = set(vs)
        queue = deque(seen)
        while queue:
            v = queue.popleft()
            for c in self._ch[v]:
                if c not in seen:
                    seen.add(c)
                    queue.append(c)
        return frozenset(seen)

    def is_ancestral(self, vs: Iterable[str]) -> bool:
        vs = frozenset(vs)
        return self.ancestors(vs) == vs

    def induced(self, vs: Iterable[str]) -> "Admg":
        keep = set(vs)
        order = [v for v in self._vertices if v in keep]
        return Admg(
            order,
            [(a, b) for a, b in self._directed if a in keep and b in keep],
            [(a, b) for a, b in self._bidirected if a in keep and b in keep],
            {v: self._kinds[v] for v in order},
        )

    def strip_bidirected(self) -> "Admg":
        return Admg(self._vertices, self._directed, (), self._kinds)

    def __eq__(self, other):
        if not isinstance(other, Admg):
            return NotImplemented
        return (
            self._vertices == other._vertices
            and self._kinds == other._kinds
            and set(self._directed) == set(other._directed)
            and {frozenset(e) for e in self._bidirected} == {frozenset(e) for e in other._bidirected}
        )

    def __hash__(self):
        return hash((self._vertices, frozenset(self._directed), frozenset(map(frozenset, self._bidirected))))

    def __repr__(self):
        parts = [f"{a}->{b}" for a, b in self._directed] + [f"{a}<->{b}" for a, b in self._bidirected]
        return f"Admg({list(self._vertices)}, {', '.join(parts)})"


@dataclass(frozen=True)
class District:
    """A connected component of the bi-directed skeleton with its subgraph."""

    members: Tuple[str, ...]
    external_parents: Tuple[str, ...]
    subgraph: Admg = field(repr=False)
    cliques: Tuple[Tuple[str, ...], ...]

    def __contains__(self, v):
        return v in self.members

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class IndependenceConstraint:
    """``target`` is independent of ``independent_of`` given ``conditioning``."""

    target: str
    conditioning: Tuple[str, ...]
    independent_of: Tuple[str, ...]
    ancestral_set: Tuple[str, ...]

    def __str__(self):
        return f"{self.target} _||_ {{{', '.join(self.independent_of)}}} | {{{', '.join(self.conditioning)}}}"


def topological_order(g: Admg) -> List[str]:
    """Emit the earliest-declared vertex whose parents are all emitted, repeatedly."""
    done = set()
    order = []
    remaining = list(g.vertices)
    while remaining:
        for i, v in enumerate(remaining):
            if all(p in done for p in g.parents(v)):
                order.append(v)
                done.add(v)
                del remaining[i]
                break
        else:
            # unreachable for a validated Admg
            raise CycleError(remaining)
    return order


def _components(vertices: Sequence[str], neighbours) -> List[List[str]]:
    seen = set()
    comps = []
    for root in vertices:
        if root in seen:
            continue
        comp = [root]
        seen.add(root)
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for w in neighbours(v):
                if w not in seen:
                    seen.add(w)
                    comp.append(w)
                    queue.append(w)
        comps.append(comp)
    return comps


def maximal_cliques(vertices: Sequence[str], adjacent) -> List[Tuple[str, ...]]:
    """Maximal cliques (size >= 1) by Bron-Kerbosch with pivoting.

    ``vertices`` fixes the output order: every clique is listed in that order
    and cliques are sorted lexicographically by vertex position.
    """
    pos = {v: i for i, v in enumerate(vertices)}
    nbrs = {v: {w for w in adjacent(v) if w in pos} for v in vertices}
    out = []

    def expand(r, p, x):
        if not p and not x:
            out.append(tuple(sorted(r, key=pos.__getitem__)))
            return
        pivot = max(p | x, key=lambda u: (len(nbrs[u] & p), -pos[u]))
        for v in sorted(p - nbrs[pivot], key=pos.__getitem__):
            expand(r | {v}, p & nbrs[v], x & nbrs[v])
            p = p - {v}
            x = x | {v}

    expand(set(), set(vertices), set())
    out.sort(key=lambda c: [pos[v] for v in c])
    return out


def _make_district(g: Admg, members: Sequence[str]) -> District:
    members = tuple(g.sort(members))
    mset = set(members)
    ext = tuple(g.sort(g.parents_of(members) - mset))
    eset = set(ext)
    keep = mset | eset
    order = [v for v in g.vertices if v in keep]
    sub = Admg(
        order,
        [(a, b) for a, b in g.directed_edges if a in keep and b in keep and not (a in eset and b in eset)],
        [(a, b) for a, b in g.bidirected_edges if a in keep and b in keep and not (a in eset and b in eset)],
        {v: g.kind(v) for v in order},
    )
    if len(members) == 1:
        cliques = ()
    else:
        cliques = tuple(maximal_cliques(members, lambda v: g.spouses(v)))
    return District(members, ext, sub, cliques)


def districts(g: Admg) -> List[District]:
    """Districts of ``g`` ordered by their earliest-declared member."""
    return [_make_district(g, comp) for comp in _components(g.vertices, g.spouses)]


def district_of(g: Admg, v: str) -> District:
    for d in districts(g):
        if v in d.members:
            return d
    raise KeyError(v)


def is_barren(d: District) -> bool:
    members = set(d.members)
    return not any(a in members and b in members for a, b in d.subgraph.directed_edges)


def star_name(g: Admg, v: str) -> str:
    name = v + "*"
    while name in g:
        name += "*"
    return name


def transform_artificial(g: Admg) -> Tuple[Admg, Dict[str, str]]:
    """Reduce ``g`` to a graph whose districts are all barren.

    Every vertex with at least one child gets an artificial copy placed
    between it and its children. Childless vertices get no copy.

    Returns
    -------
    (Admg, dict)
        The transformed graph and the map from original vertex to its copy.
    """
    star = {}
    taken = set(g.vertices)
    for v in g.vertices:
        if g.children(v):
            name = v + "*"
            while name in taken:
                name += "*"
            taken.add(name)
            star[v] = name
    order = []
    kinds = {}
    for v in g.vertices:
        order.append(v)
        kinds[v] = g.kind(v)
        if v in star:
            order.append(star[v])
            kinds[star[v]] = g.kind(v)
    directed = [(v, star[v]) for v in g.vertices if v in star]
    directed += [(star[a], b) for a, b in g.directed_edges]
    return Admg(order, directed, g.bidirected_edges, kinds), star


def _as_set(g, vs, label):
    if isinstance(vs, str):
        vs = [vs]
    vs = frozenset(vs)
    for v in vs:
        if v not in g:
            raise GraphError(f"unknown vertex {v!r} in {label}")
    return vs


def m_separated(g: Admg, x, y, z=()) -> bool:
    """True iff ``x`` and ``y`` are m-separated given ``z``.

    Reachability search over (vertex, arrowhead-at-vertex) states. A vertex
    is a collider on a walk when both adjacent edges have an arrowhead at it;
    bi-directed edges carry arrowheads at both ends.
    """
    x, y, z = _as_set(g, x, "x"), _as_set(g, y, "y"), _as_set(g, z, "z")
    if x & y or x & z or y & z:
        raise ValueError("x, y and z must be pairwise disjoint")
    if not x or not y:
        return True
    an_z = g.ancestors(z)

    def edges(v):
        # (neighbour, arrowhead at v, arrowhead at neighbour)
        for c in g.children(v):
            yield c, False, True
        for p in g.parents(v):
            yield p, True, False
        for s in g.spouses(v):
            yield s, True, True

    seen = set()
    queue = deque()
    for v in x:
        for n, _, head_n in edges(v):
            queue.append((n, head_n))
    while queue:
        state = queue.popleft()
        if state in seen:
            continue
        seen.add(state)
        v, head_in = state
        if v in y:
            return False
        if v in x:
            continue
        for n, head_v, head_n in edges(v):
            if head_in and head_v:
                if v not in an_z:
                    continue
            elif v in z:
                continue
            if (n, head_n) not in seen:
                queue.append((n, head_n))
    return True


def markov_blanket(g: Admg, v: str, ancestral_set) -> FrozenSet[str]:
    """District of ``v`` in the subgraph induced by ``ancestral_set`` plus its parents, minus ``v``."""
    a = frozenset(ancestral_set)
    comp = {v}
    queue = deque([v])
    while queue:
        w = queue.popleft()
        for s in g.spouses(w):
            if s in a and s not in comp:
                comp.add(s)
                queue.append(s)
    return frozenset((comp | g.parents_of(comp)) - {v})


def ordered_local_constraints(g: Admg, order=None, mode="auto", max_full=12) -> List[IndependenceConstraint]:
    """Constraints of the ordered local Markov condition.

    Parameters
    ----------
    order : sequence of str, optional
        A total order in which no vertex follows one of its descendants.
        Defaults to :func:`topological_order`.
    mode : {"auto", "full", "bounded"}
        ``full`` visits every ancestral set of predecessors containing the
        vertex; ``bounded`` only the smallest (the vertex's ancestors) and
        the largest (all predecessors). ``auto`` picks ``full`` when the
        graph has at most ``max_full`` vertices.
    """
    if order is None:
        order = topological_order(g)
    else:
        order = list(order)
        if sorted(order, key=g.index) != list(g.vertices):
            raise GraphError("order must list every vertex exactly once")
        pos = {v: i for i, v in enumerate(order)}
        for a, b in g.directed_edges:
            if pos[a] > pos[b]:
                raise GraphError(f"order places {b} before its ancestor {a}")
    if mode == "auto":
        mode = "full" if len(g) <= max_full else "bounded"
    if mode not in ("full", "bounded"):
        raise ValueError(f"unknown mode {mode!r}")

    out = []
    emitted = set()
    for i, v in enumerate(order):
        preds = frozenset(order[:i])
        base = g.ancestors([v])
        if mode == "full":
            rest = g.sort(preds - base)
            sets = []
            known = set()
            for r in range(len(rest) + 1):
                for extra in combinations(rest, r):
                    a = g.ancestors(base | set(extra))
                    if a not in known:
                        known.add(a)
                        sets.append(a)
        else:
            sets = [base, preds | {v}]
        for a in sets:
            mb = markov_blanket(g, v, a)
            rest = a - mb - {v}
            if not rest:
                continue
            key = (v, mb, rest)
            if key in emitted:
                continue
            emitted.add(key)
            out.append(IndependenceConstraint(v, tuple(g.sort(mb)), tuple(g.sort(rest)), tuple(g.sort(a))))
    return out


# -- text format -------------------------------------------------------------

def parse_graph(text: str) -> Admg:
    """Parse the line-oriented graph format.

    ::

        var X1 ordinal 2
        var Y continuous
        edge X1 -> Y
        edge X1 <-> X2

    ``#`` starts a comment. Errors carry the offending line number.
    """
    vertices = []
    kinds = {}
    directed = []
    bidirected = []
    edge_lines = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "var":
            if len(tok) == 4 and tok[2] == ORDINAL:
                try:
                    k = int(tok[3])
                except ValueError:
                    raise GraphError(f"bad cardinality {tok[3]!r}", lineno) from None
                try:
                    kind = ordinal(k)
                except GraphError as e:
                    raise GraphError(str(e), lineno) from None
            elif len(tok) == 3 and tok[2] == CONTINUOUS:
                kind = continuous()
            else:
                raise GraphError("expected 'var <name> ordinal <k>' or 'var <name> continuous'", lineno)
            if tok[1] in kinds:
                raise GraphError(f"vertex {tok[1]!r} declared twice", lineno)
            vertices.append(tok[1])
            kinds[tok[1]] = kind
        elif tok[0] == "edge":
            if len(tok) != 4 or tok[2] not in ("->", "<->"):
                raise GraphError("expected 'edge <a> -> <b>' or 'edge <a> <-> <b>'", lineno)
            a, b = tok[1], tok[3]
            for v in (a, b):
                if v not in kinds:
                    raise GraphError(f"undeclared vertex {v!r}", lineno)
            if a == b:
                raise GraphError(f"self-loop on {a!r}", lineno)
            if tok[2] == "->":
                key = ("->", a, b)
                directed.append((a, b))
            else:
                key = ("<->",) + tuple(sorted((a, b)))
                bidirected.append((a, b))
            if key in edge_lines:
                raise GraphError(f"edge repeated (first on line {edge_lines[key]})", lineno)
            edge_lines[key] = lineno
        else:
            raise GraphError(f"unknown directive {tok[0]!r}", lineno)
    return Admg(vertices, directed, bidirected, kinds)


def format_graph(g: Admg) -> str:
    lines = [f"var {v} {g.kind(v)}" for v in g.vertices]
    lines += [f"edge {a} -> {b}" for a, b in g.directed_edges]
    lines += [f"edge {a} <-> {b}" for a, b in g.bidirected_edges]
    return "\n".join(lines) + "\n"


def read_graph(path) -> Admg:
    with open(path) as fh:
        return parse_graph(fh.read())


def write_graph(g: Admg, path):
    with open(path, "w") as fh:
        fh.write(format_graph(g))
