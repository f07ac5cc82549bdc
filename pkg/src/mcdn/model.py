"""Joint MCDN models: district factorisation, CDF-to-mass conversion and checks."""

import copy
import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import (
    NotATreeError,
    NotDIncreasingError,
    UnsupportedConfigurationError,
)
from .factors import FrankCopula, GaussianMarginal, OrdinalMarginal, ProductCopula, THETA_ZERO
from .graph import (
    Admg,
    District,
    districts,
    is_barren,
    m_separated,
    ordered_local_constraints,
    transform_artificial,
)

SNAP_TOL = 1e-12
NEG_TOL = 1e-9
MAX_CONFIGS = 1 << 22


class TreeFallbackWarning(UserWarning):
    pass


def snap_mass(p):
    """Clip inclusion-exclusion output to [0, 1]; fail on clearly negative mass."""
    p = np.asarray(p, dtype=float)
    if np.any(p < -NEG_TOL):
        raise NotDIncreasingError(f"CDF not d-increasing: mass {np.min(p):.3g}")
    return np.clip(p, 0.0, 1.0)


def pmf_from_cdf(cdf, x):
    """Probability mass at the lattice point ``x`` from a CDF over ordinal variables.

    Parameters
    ----------
    cdf : callable
        Takes a tuple of integer levels and returns ``P(X <= x)``.
    x : sequence of int

    Terms with a coordinate below 0 are zero and never passed to ``cdf``.
    """
    x = tuple(int(v) for v in x)
    total = 0.0
    for z in itertools.product((0, 1), repeat=len(x)):
        point = tuple(v - s for v, s in zip(x, z))
        if min(point, default=0) < 0:
            continue
        sign = -1.0 if sum(z) % 2 else 1.0
        total += sign * float(cdf(point))
    return float(snap_mass(total))


def inclusion_exclusion(copula_cdf, upper, lower):
    """Vectorised mass of a copula CDF over the boxes ``(lower, upper]``.

    ``upper`` and ``lower`` are ``(n, t)`` arrays of copula arguments. The
    sum runs over all 2**t corners, so it is only for small ``t``.
    """
    n, t = upper.shape
    total = np.zeros(n)
    for mask in range(1 << t):
        pick = np.array([(mask >> j) & 1 for j in range(t)], dtype=bool)
        u = np.where(pick, lower, upper)
        sign = -1.0 if bin(mask).count("1") % 2 else 1.0
        total += sign * copula_cdf(u)
    return total


def tree_edges(copula: ProductCopula):
    """Return (parent index, child index, clique index, flipped) in BFS order, or None if not a tree."""
    t = len(copula.members)
    if any(len(c) != 2 for c in copula.cliques) or len(copula.cliques) != t - 1:
        return None
    pos = {v: i for i, v in enumerate(copula.members)}
    adj = {i: [] for i in range(t)}
    for k, (a, b) in enumerate(copula.cliques):
        adj[pos[a]].append((pos[b], k, False))
        adj[pos[b]].append((pos[a], k, True))
    seen = {0}
    order = []
    queue = [0]
    while queue:
        v = queue.pop(0)
        for w, k, flipped in adj[v]:
            if w not in seen:
                seen.add(w)
                # flipped: the clique lists the child first
                order.append((v, w, k, flipped))
                queue.append(w)
    if len(seen) != t:
        return None
    return order


def tree_sum(copula: ProductCopula, upper, lower, edges=None):
    """Inclusion-exclusion over a tree of bivariate cliques by message passing.

    The 2**t corner sum factorises over the tree: each vertex carries a
    binary "lowered or not" state and each clique couples two such states.
    """
    if edges is None:
        edges = tree_edges(copula)
        if edges is None:
            raise NotATreeError(f"cliques {copula.cliques} do not form a tree")
    n, t = upper.shape
    p = copula.exponents
    a = np.stack([upper ** p, lower ** p], axis=-1)  # (n, t, 2)
    h = a * np.array([1.0, -1.0])
    msg_in = [np.ones((n, 2)) for _ in range(t)]
    for parent, child, k, child_first in reversed(edges):
        cop = copula.copulas[k]
        belief = h[:, child, :] * msg_in[child]  # (n, 2) over child state
        m = np.zeros((n, 2))
        for zp in (0, 1):
            for zc in (0, 1):
                ap, ac = a[:, parent, zp], a[:, child, zc]
                args = np.stack([ac, ap] if child_first else [ap, ac], axis=-1)
                m[:, zp] += cop.cdf(args) * belief[:, zc]
        msg_in[parent] = msg_in[parent] * m
    return np.sum(h[:, 0, :] * msg_in[0], axis=-1)


@dataclass
class _DistrictSpec:
    district: District
    cols: list           # column positions of members in the model's vertex order
    marginals: list
    copula: ProductCopula
    kind: str            # "ordinal", "continuous" or "mixed"
    edges: object        # tree edges or None


class McdnModel:
    """Copula MCDN over an ADMG.

    Parameters
    ----------
    graph : Admg
        The user's graph. Districts with internal directed edges are handled
        by evaluating on the artificial-vertex transform of the graph.
    marginals : dict
        Vertex name to :class:`OrdinalMarginal` or :class:`GaussianMarginal`,
        conditioned on exactly the vertex's parents in ``graph``.
    thetas : dict or sequence, optional
        Frank parameter per clique, keyed by the clique tuple or listed in
        :attr:`cliques` order. Defaults to independence.
    """

    def __init__(self, graph: Admg, marginals, thetas=None):
        self.graph = graph
        self.marginals = dict(marginals)
        self._check_marginals()
        dists = districts(graph)
        if all(is_barren(d) for d in dists):
            self.work_graph, self.star_map = graph, {}
            work_dists = dists
        else:
            self.work_graph, self.star_map = transform_artificial(graph)
            work_dists = [d for d in districts(self.work_graph) if d.members[0] in graph]
        pos = {v: i for i, v in enumerate(graph.vertices)}
        self.cliques = [c for d in work_dists for c in d.cliques]
        if thetas is None:
            thetas = [0.0 if len(c) == 2 else THETA_ZERO / 10 for c in self.cliques]
        elif hasattr(thetas, "keys"):
            thetas = [thetas[tuple(c)] for c in self.cliques]
        thetas = list(thetas)
        if len(thetas) != len(self.cliques):
            raise ValueError(f"expected {len(self.cliques)} copula parameters, got {len(thetas)}")
        self._specs = []
        k = 0
        for d in work_dists:
            cops = []
            for c in d.cliques:
                cops.append(FrankCopula(thetas[k], len(c)))
                k += 1
            kinds = {graph.kind(v).is_ordinal for v in d.members}
            kind = "mixed" if len(kinds) > 1 else ("ordinal" if kinds.pop() else "continuous")
            cop = ProductCopula(d.members, d.cliques, cops)
            self._specs.append(_DistrictSpec(
                d, [pos[v] for v in d.members], [self.marginals[v] for v in d.members],
                cop, kind, tree_edges(cop),
            ))
        self._pos = pos
        self._pa_cols = {v: [pos[p] for p in self.marginals[v].parents] for v in graph.vertices}

    def _check_marginals(self):
        g = self.graph
        for v in g.vertices:
            if v not in self.marginals:
                raise ValueError(f"no marginal for {v!r}")
            m = self.marginals[v]
            if m.vertex != v:
                raise ValueError(f"marginal for {v!r} is labelled {m.vertex!r}")
            if set(m.parents) != set(g.parents(v)) or len(m.parents) != len(g.parents(v)):
                raise ValueError(f"marginal of {v!r} conditions on {m.parents}, graph parents are {g.parents(v)}")
            kind = g.kind(v)
            if kind.is_ordinal:
                if not isinstance(m, OrdinalMarginal):
                    raise ValueError(f"{v!r} is ordinal but has {type(m).__name__}")
                if m.cardinality != kind.cardinality:
                    raise ValueError(f"{v!r}: table has {m.cardinality} levels, graph says {kind.cardinality}")
                for p, card in zip(m.parents, m.parent_cards):
                    pk = g.kind(p)
                    if not pk.is_ordinal:
                        raise UnsupportedConfigurationError(f"ordinal {v!r} cannot condition on continuous {p!r}")
                    if pk.cardinality != card:
                        raise ValueError(f"{v!r}: parent {p!r} cardinality mismatch")
            elif not isinstance(m, GaussianMarginal):
                raise ValueError(f"{v!r} is continuous but has {type(m).__name__}")
        extra = set(self.marginals) - set(g.vertices)
        if extra:
            raise ValueError(f"marginals for unknown vertices {sorted(extra)}")

    # -- parameters --------------------------------------------------------
    @property
    def vertices(self):
        return self.graph.vertices

    @property
    def districts(self):
        return [s.district for s in self._specs]

    @property
    def copulas(self):
        return [s.copula for s in self._specs]

    def theta_vector(self):
        return np.array([c.theta for s in self._specs for c in s.copula.copulas])

    def thetas(self):
        return {tuple(c): th for c, th in zip(self.cliques, self.theta_vector())}

    def with_thetas(self, thetas):
        thetas = list(np.asarray(thetas, dtype=float).reshape(-1))
        if len(thetas) != len(self.cliques):
            raise ValueError(f"expected {len(self.cliques)} copula parameters, got {len(thetas)}")
        new = copy.copy(self)
        new._specs = []
        k = 0
        for s in self._specs:
            cops = []
            for c in s.copula.cliques:
                cops.append(FrankCopula(thetas[k], len(c)))
                k += 1
            new._specs.append(_DistrictSpec(s.district, s.cols, s.marginals, s.copula.with_copulas(cops), s.kind, s.edges))
        return new

    def with_marginals(self, marginals):
        return McdnModel(self.graph, marginals, self.theta_vector())

    def is_all_ordinal(self):
        return all(self.graph.kind(v).is_ordinal for v in self.vertices)

    # -- evaluation --------------------------------------------------------
    def _as_array(self, x):
        if isinstance(x, Dataset):
            return x.aligned(self.graph)
        if hasattr(x, "keys"):
            missing = [v for v in self.vertices if v not in x]
            if missing:
                raise ValueError(f"configuration lacks {missing}")
            return np.array([[float(x[v]) for v in self.vertices]])
        x = np.asarray(x, dtype=float)
        return x.reshape(1, -1) if x.ndim == 1 else x

    def _marginal_u(self, spec, X, shift=0.0):
        cols = []
        for v, col, m in zip(spec.district.members, spec.cols, spec.marginals):
            pa = [X[:, c] for c in self._pa_cols[v]]
            cols.append(m.cdf(X[:, col] - shift, pa))
        return np.stack(cols, axis=-1)

    def district_cdf_rows(self, i, X):
        """Conditional CDF of district ``i`` at each row of ``X`` (parents read from the same rows)."""
        spec = self._specs[i]
        return spec.copula.cdf(self._marginal_u(spec, X))

    def district_log_terms(self, i, X, method="auto"):
        spec = self._specs[i]
        if spec.kind == "mixed":
            raise UnsupportedConfigurationError(
                f"district {spec.district.members} mixes ordinal and continuous variables"
            )
        if spec.kind == "ordinal":
            upper = self._marginal_u(spec, X)
            lower = self._marginal_u(spec, X, 1.0)
            if len(spec.cols) == 1:
                mass = upper[:, 0] - lower[:, 0]
            elif method != "dense" and spec.edges is not None:
                mass = tree_sum(spec.copula, upper, lower, spec.edges)
            else:
                mass = inclusion_exclusion(spec.copula.cdf, upper, lower)
            with np.errstate(divide="ignore"):
                return np.log(snap_mass(mass))
        u = self._marginal_u(spec, X)
        logf = 0.0
        for v, col, m in zip(spec.district.members, spec.cols, spec.marginals):
            logf = logf + m.logpdf(X[:, col], [X[:, c] for c in self._pa_cols[v]])
        with np.errstate(divide="ignore", invalid="ignore"):
            dens = spec.copula.density(u) if len(spec.cols) > 1 else np.ones(len(X))
            return np.log(np.maximum(dens, 0.0)) + logf

    def log_prob(self, x, method="auto"):
        """Per-row log mass (or density) of a configuration array, mapping or Dataset."""
        X = self._as_array(x)
        if np.any(~np.isfinite(X)):
            raise ValueError("joint_prob needs finite values for every vertex")
        total = np.zeros(X.shape[0])
        for i in range(len(self._specs)):
            total = total + self.district_log_terms(i, X, method)
        return total

    def prob(self, x, method="auto"):
        return np.exp(self.log_prob(x, method))

    def bidirected_cdf(self, x):
        """Joint CDF for a graph without directed edges (product of district CDFs)."""
        if self.graph.directed_edges:
            raise UnsupportedConfigurationError("joint CDF is only a product of district CDFs without directed edges")
        X = self._as_array(x)
        out = np.ones(X.shape[0])
        for i in range(len(self._specs)):
            out = out * self.district_cdf_rows(i, X)
        return out

    def configurations(self):
        cards = []
        for v in self.vertices:
            kind = self.graph.kind(v)
            if not kind.is_ordinal:
                raise UnsupportedConfigurationError("enumeration needs an all-ordinal model")
            cards.append(kind.cardinality)
        total = math.prod(cards)
        if total > MAX_CONFIGS:
            raise UnsupportedConfigurationError(f"{total} configurations exceed the enumeration limit {MAX_CONFIGS}")
        grid = np.array(list(itertools.product(*[range(k) for k in cards])), dtype=float)
        return grid.reshape(total, len(cards)), tuple(cards)

    def joint_table(self):
        """The full joint mass as an array with one axis per vertex."""
        grid, cards = self.configurations()
        return self.prob(grid).reshape(cards)


def joint_prob(m: McdnModel, x) -> float:
    """Mass or density of one complete configuration ``x`` (a mapping vertex -> value)."""
    return float(m.prob(x)[0])


def row_logliks(m: McdnModel, data: Dataset):
    return m.log_prob(data.aligned(m.graph))


def loglik(m: McdnModel, data: Dataset, exclude_zero=False) -> float:
    """Sum of row log-likelihoods.

    Rows of zero probability are reported in a warning by index. They make
    the result ``-inf`` unless ``exclude_zero`` is set, in which case they
    are left out of the sum.
    """
    terms = row_logliks(m, data)
    bad = np.flatnonzero(~np.isfinite(terms))
    if bad.size:
        warnings.warn(f"zero-probability rows: {bad.tolist()}", RuntimeWarning, stacklevel=2)
        if not exclude_zero:
            return -math.inf
        terms = terms[np.isfinite(terms)]
    return math.fsum(terms.tolist())


def tree_pmf(d: District, marginals, copula: ProductCopula, x, pa=None, fallback=True) -> float:
    """District mass by message passing over a tree of bivariate cliques.

    Non-tree districts raise :class:`NotATreeError`, or with ``fallback``
    emit :class:`TreeFallbackWarning` and use the dense corner sum.
    """
    values = dict(pa or {})
    values.update(x)
    upper, lower = [], []
    for v in d.members:
        m = marginals[v]
        pav = [np.asarray([values[p]], dtype=float) for p in m.parents]
        xv = np.asarray([values[v]], dtype=float)
        upper.append(m.cdf(xv, pav))
        lower.append(m.cdf(xv - 1, pav))
    upper = np.stack(upper, axis=-1)
    lower = np.stack(lower, axis=-1)
    if len(d.members) == 1:
        return float(snap_mass(upper[0, 0] - lower[0, 0]))
    edges = tree_edges(copula)
    if edges is None:
        if not fallback:
            raise NotATreeError(f"district {d.members} is not tree-structured")
        warnings.warn(f"district {d.members} is not a tree; using the dense sum", TreeFallbackWarning, stacklevel=2)
        return float(snap_mass(inclusion_exclusion(copula.cdf, upper, lower))[0])
    return float(snap_mass(tree_sum(copula, upper, lower, edges))[0])


def dense_pmf(d: District, marginals, copula: ProductCopula, x, pa=None) -> float:
    """District mass by the full 2**|D| inclusion-exclusion sum."""
    from .factors import district_cdf

    values = dict(pa or {})
    values.update(x)
    pa_only = {k: v for k, v in values.items() if k not in d.members}

    def cdf(point):
        return district_cdf(d, marginals, copula, dict(zip(d.members, point)), pa_only)

    return pmf_from_cdf(cdf, [values[v] for v in d.members])


# -- Markov checks -------------------------------------------------------------

def ci_violation(joint, xs, ys, zs):
    """max |P(x,y,z) P(z) - P(x,z) P(y,z)| for axis groups of a joint table."""
    keep = list(xs) + list(ys) + list(zs)
    drop = tuple(a for a in range(joint.ndim) if a not in keep)
    marg = joint.sum(axis=drop) if drop else joint
    remaining = [a for a in range(joint.ndim) if a in keep]
    marg = np.transpose(marg, [remaining.index(a) for a in keep])
    nx = math.prod(joint.shape[a] for a in xs)
    ny = math.prod(joint.shape[a] for a in ys)
    nz = math.prod(joint.shape[a] for a in zs)
    pxyz = marg.reshape(nx, ny, nz)
    pz = pxyz.sum(axis=(0, 1))
    pxz = pxyz.sum(axis=1)
    pyz = pxyz.sum(axis=0)
    return float(np.max(np.abs(pxyz * pz[None, None, :] - pxz[:, None, :] * pyz[None, :, :])))


@dataclass
class MarkovReport:
    max_violation: float
    worst: str
    n_constraints: int
    n_triples: int
    tol: float

    @property
    def passed(self):
        return self.max_violation <= self.tol

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"constraints: {self.n_constraints}\n"
            f"m-separation triples: {self.n_triples}\n"
            f"max violation: {self.max_violation:.3e}\n"
            f"worst: {self.worst}\n"
            f"tolerance: {self.tol:.1e}\n"
            f"status: {status}"
        )


def random_separations(g: Admg, rng, count=20, attempts=400):
    """Random (x, y, z) triples that are m-separated in ``g``."""
    found = []
    verts = list(g.vertices)
    if len(verts) < 2:
        return found
    seen = set()
    for _ in range(attempts):
        if len(found) >= count:
            break
        perm = [verts[i] for i in rng.permutation(len(verts))]
        x = [perm[0]]
        ny = int(rng.integers(1, min(2, len(perm) - 1) + 1))
        y = perm[1:1 + ny]
        rest = perm[1 + ny:]
        z = [v for v in rest if rng.random() < 0.5]
        key = (tuple(x), tuple(sorted(y)), tuple(sorted(z)))
        if key in seen:
            continue
        seen.add(key)
        if m_separated(g, x, y, z):
            found.append((x, y, z))
    return found


def check_markov(m: McdnModel, tol=1e-8, graph=None, n_triples=20, seed=0) -> MarkovReport:
    """Test the enumerated joint against the independences of ``graph`` (default: the model's).

    Checks every ordered-local-Markov constraint and ``n_triples`` random
    m-separation statements.
    """
    g = graph if graph is not None else m.graph
    if len(m.vertices) > 10:
        raise UnsupportedConfigurationError("check_markov enumerates the joint; at most 10 vertices")
    joint = m.joint_table()
    axis = {v: i for i, v in enumerate(m.vertices)}
    worst, worst_label = 0.0, "none"
    cons = ordered_local_constraints(g)
    for c in cons:
        val = ci_violation(joint, [axis[c.target]], [axis[v] for v in c.independent_of], [axis[v] for v in c.conditioning])
        if val > worst:
            worst, worst_label = val, str(c)
    triples = random_separations(g, np.random.default_rng(seed), n_triples)
    for x, y, z in triples:
        val = ci_violation(joint, [axis[v] for v in x], [axis[v] for v in y], [axis[v] for v in z])
        if val > worst:
            worst, worst_label = val, " | ".join(["{" + ", ".join(x) + "} _||_ {" + ", ".join(y) + "}", "{" + ", ".join(z) + "}"])
    return MarkovReport(worst, worst_label, len(cons), len(triples), tol)


def sample_ordinal(m: McdnModel, n, seed=None) -> Dataset:
    """Exact sampling from an all-ordinal model by enumerating its joint."""
    if len(m.vertices) > 12:
        raise UnsupportedConfigurationError("exact sampling supports at most 12 vertices")
    grid, _ = m.configurations()
    p = m.prob(grid)
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(p), size=int(n), p=p)
    return Dataset(m.vertices, grid[idx].reshape(int(n), len(m.vertices)), m.graph.kinds)
