"""CDF building blocks: conditional marginals, Frank copulas and product copulas.

All evaluators are vectorised over rows; the scalar functions at the bottom of
the module are thin wrappers used for single evaluations.
"""

import math
from functools import lru_cache
from itertools import combinations

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import log_ndtr, ndtr

from .errors import NotBarrenError

# Below this |theta| the Frank copula is evaluated as the independence copula.
THETA_ZERO = 1e-8
SUM_TOL = 1e-12


def _parent_index(parent_cards, pa_values):
    """Mixed-radix index of a parent configuration, first parent most significant."""
    idx = np.zeros(np.shape(pa_values[0]) if pa_values else (), dtype=np.int64)
    for card, vals in zip(parent_cards, pa_values):
        vals = np.asarray(vals)
        iv = vals.astype(np.int64)
        if np.any(iv != vals) or np.any(iv < 0) or np.any(iv >= card):
            raise ValueError(f"parent value outside 0..{card - 1}")
        idx = idx * card + iv
    return idx


class OrdinalMarginal:
    """Conditional probability table of an ordinal vertex.

    ``table`` has shape ``parent_cards + (k,)``; the last axis is the
    probability vector over the vertex's levels for one parent configuration.
    """

    def __init__(self, vertex, parents, table, parent_cards=None, alpha=0.0):
        self.vertex = vertex
        self.parents = tuple(parents)
        table = np.array(table, dtype=float)
        if parent_cards is None:
            parent_cards = table.shape[:-1]
        self.parent_cards = tuple(int(c) for c in parent_cards)
        if len(self.parent_cards) != len(self.parents):
            raise ValueError(f"{vertex}: {len(self.parents)} parents but {len(self.parent_cards)} cardinalities")
        if table.ndim == 1 and self.parent_cards:
            raise ValueError(f"{vertex}: table does not cover parent configurations")
        table = table.reshape(self.parent_cards + (table.shape[-1],))
        self.cardinality = table.shape[-1]
        if self.cardinality < 2:
            raise ValueError(f"{vertex}: need at least two levels")
        if np.any(table < 0) or not np.all(np.isfinite(table)):
            raise ValueError(f"{vertex}: probabilities must be finite and non-negative")
        sums = table.sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > SUM_TOL):
            raise ValueError(f"{vertex}: probability vectors must sum to 1 (worst {sums.flat[np.argmax(np.abs(sums - 1))]!r})")
        if alpha < 0:
            raise ValueError("alpha must be non-negative")
        self.alpha = float(alpha)
        self.table = table
        self.table.setflags(write=False)
        flat = table.reshape(-1, self.cardinality)
        cum = np.cumsum(flat, axis=1)
        cum[:, -1] = 1.0
        self._cum = np.minimum(cum, 1.0)

    def __repr__(self):
        return f"OrdinalMarginal({self.vertex!r}, parents={self.parents}, k={self.cardinality})"

    def row(self, pa_values=()):
        return self.table.reshape(-1, self.cardinality)[int(_parent_index(self.parent_cards, list(pa_values)))]

    def cdf(self, x, pa_values):
        """F(x | pa) for arrays ``x`` and a list of parent value arrays.

        ``x`` may hold +inf (gives 1) or any negative value (gives 0).
        """
        x = np.asarray(x, dtype=float)
        idx = _parent_index(self.parent_cards, [np.broadcast_to(p, x.shape) for p in pa_values]) if self.parents else np.zeros(x.shape, dtype=np.int64)
        below = x < 0
        xi = np.clip(np.nan_to_num(x, posinf=self.cardinality - 1), 0, self.cardinality - 1).astype(np.int64)
        return np.where(below, 0.0, self._cum[idx, xi])

    def pmf(self, x, pa_values):
        x = np.asarray(x, dtype=float)
        return self.cdf(x, pa_values) - self.cdf(x - 1, pa_values)


class GaussianMarginal:
    """Conditional Gaussian with mean linear in fixed basis functions of the parents.

    The only basis is ``"linear"``: an intercept followed by each parent value.
    """

    BASES = ("linear",)

    def __init__(self, vertex, parents, weights, variance, basis="linear"):
        self.vertex = vertex
        self.parents = tuple(parents)
        if basis not in self.BASES:
            raise ValueError(f"unknown basis {basis!r}")
        self.basis = basis
        self.weights = np.array(weights, dtype=float).reshape(-1)
        if self.weights.size != len(self.parents) + 1:
            raise ValueError(f"{vertex}: expected {len(self.parents) + 1} weights, got {self.weights.size}")
        if not variance > 0:
            raise ValueError(f"{vertex}: variance must be positive")
        self.variance = float(variance)
        self.sd = math.sqrt(self.variance)

    def __repr__(self):
        return f"GaussianMarginal({self.vertex!r}, parents={self.parents}, weights={self.weights.tolist()}, variance={self.variance})"

    def design(self, pa_values, n=None):
        cols = [np.asarray(p, dtype=float) for p in pa_values]
        shape = np.broadcast_shapes(*(c.shape for c in cols)) if cols else (() if n is None else (n,))
        return np.stack([np.ones(shape)] + [np.broadcast_to(c, shape) for c in cols], axis=-1)

    def mean(self, pa_values, n=None):
        return self.design(pa_values, n) @ self.weights

    def _z(self, x, pa_values):
        x = np.asarray(x, dtype=float)
        return (x - self.mean(pa_values, x.shape[0] if x.ndim else None)) / self.sd

    def cdf(self, x, pa_values):
        return ndtr(self._z(x, pa_values))

    def logpdf(self, x, pa_values):
        z = self._z(x, pa_values)
        return -0.5 * z * z - 0.5 * math.log(2 * math.pi * self.variance)

    def pdf(self, x, pa_values):
        return np.exp(self.logpdf(x, pa_values))

    def logcdf(self, x, pa_values):
        return log_ndtr(self._z(x, pa_values))


@lru_cache(maxsize=None)
def _polylog_numerator(n):
    """Numerator N_n with Li_{-n}(w) = N_n(w) / (1 - w)^(n + 1)."""
    num = Polynomial([0.0, 1.0])
    one_minus_w = Polynomial([1.0, -1.0])
    w = Polynomial([0.0, 1.0])
    for m in range(n):
        num = w * (num.deriv() * one_minus_w + (m + 1) * num)
    return num


def _polylog(order, w):
    """Li_order(w) for order <= 1 and w < 1."""
    if order == 1:
        return -np.log1p(-w)
    n = -order
    return _polylog_numerator(n)(w) / (1.0 - w) ** (n + 1)


class FrankCopula:
    """Frank copula of dimension ``dim`` with parameter ``theta``.

    Uses the Archimedean form with generator
    ``psi(u) = -log(expm1(-theta*u) / expm1(-theta))``. Negative ``theta`` is
    only valid in two dimensions.
    """

    def __init__(self, theta, dim=2):
        theta = float(theta)
        dim = int(dim)
        if dim < 2:
            raise ValueError("copula dimension must be at least 2")
        if not math.isfinite(theta):
            raise ValueError("theta must be finite")
        if dim >= 3 and theta <= 0:
            raise ValueError(f"Frank copula in {dim} dimensions needs theta > 0, got {theta}")
        self.theta = theta
        self.dim = dim

    def __repr__(self):
        return f"FrankCopula(theta={self.theta!r}, dim={self.dim})"

    @property
    def independent(self):
        return abs(self.theta) < THETA_ZERO

    def _w(self, u):
        # w = (1 - e^-theta) * prod_i expm1(-theta u_i) / expm1(-theta)
        th = self.theta
        ratio = np.expm1(-th * u) / np.expm1(-th)
        return -np.expm1(-th) * np.prod(ratio, axis=-1)

    def cdf(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim} arguments, got {u.shape[-1]}")
        if self.independent:
            return np.prod(u, axis=-1)
        out = -np.log1p(-self._w(u)) / self.theta
        # grounded exactly, and clipped to the Frechet upper bound
        out = np.minimum(out, np.min(u, axis=-1))
        return np.where(np.any(u <= 0, axis=-1), 0.0, np.maximum(out, 0.0))

    def partial(self, u, which):
        """Mixed partial derivative of the CDF in the arguments listed in ``which``."""
        u = np.asarray(u, dtype=float)
        which = tuple(which)
        if not which:
            return self.cdf(u)
        if self.independent:
            rest = [i for i in range(self.dim) if i not in which]
            return np.prod(u[..., rest], axis=-1) if rest else np.ones(u.shape[:-1])
        th = self.theta
        k = len(which)
        w = self._w(u)
        dphi = (-1) ** k * _polylog(1 - k, w) / th
        sub = u[..., list(which)]
        dpsi = th * np.exp(-th * sub) / np.expm1(-th * sub)
        return dphi * np.prod(dpsi, axis=-1)

    def density(self, u):
        return self.partial(u, range(self.dim))


class ProductCopula:
    """Product of clique copulas with power-corrected arguments.

    ``C(u) = prod_S C_S(a_S) * prod_v a_v`` with ``a_v = u_v ** (1 / (d_v + 1))``
    and ``d_v`` the number of cliques containing ``v``.
    """

    def __init__(self, members, cliques=(), copulas=()):
        self.members = tuple(members)
        self.cliques = tuple(tuple(c) for c in cliques)
        self.copulas = tuple(copulas)
        if len(self.cliques) != len(self.copulas):
            raise ValueError("one copula per clique required")
        pos = {v: i for i, v in enumerate(self.members)}
        self._cols = []
        for clique, cop in zip(self.cliques, self.copulas):
            for v in clique:
                if v not in pos:
                    raise ValueError(f"clique member {v!r} is not a district member")
            if len(clique) != cop.dim:
                raise ValueError(f"clique {clique} of size {len(clique)} given a {cop.dim}-dimensional copula")
            self._cols.append([pos[v] for v in clique])
        self.counts = np.zeros(len(self.members), dtype=int)
        for cols in self._cols:
            self.counts[cols] += 1
        self.exponents = 1.0 / (self.counts + 1.0)

    def __repr__(self):
        return f"ProductCopula(members={self.members}, cliques={self.cliques}, copulas={self.copulas})"

    def with_copulas(self, copulas):
        return ProductCopula(self.members, self.cliques, copulas)

    def _check(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != len(self.members):
            raise ValueError(f"expected {len(self.members)} arguments, got {u.shape[-1]}")
        return u

    def cdf(self, u):
        u = self._check(u)
        a = u ** self.exponents
        out = np.prod(a, axis=-1)
        for cols, cop in zip(self._cols, self.copulas):
            out = out * cop.cdf(a[..., cols])
        return out

    def density(self, u):
        """Mixed partial derivative in every argument.

        Each argument is differentiated in exactly one factor; the sum over
        those assignments is accumulated by dynamic programming over the set
        of arguments already differentiated.
        """
        u = self._check(u)
        p = self.exponents
        a = u ** p
        da = p * u ** (p - 1.0)
        t = len(self.members)
        last = {}
        factors = []
        for f, (cols, cop) in enumerate(zip(self._cols, self.copulas)):
            factors.append(("clique", cols, cop))
        for i in range(t):
            factors.append(("own", [i], None))
        for f, (_, cols, _) in enumerate(factors):
            for i in cols:
                last[i] = f
        state = {0: np.ones(u.shape[:-1])}
        for f, (kind, cols, cop) in enumerate(factors):
            new = {}
            for mask, val in state.items():
                free = [j for j, c in enumerate(cols) if not mask >> c & 1]
                for r in range(len(free) + 1):
                    for pick in combinations(free, r):
                        if kind == "own":
                            term = da[..., cols[0]] if pick else a[..., cols[0]]
                        else:
                            term = cop.partial(a[..., cols], pick)
                            for j in pick:
                                term = term * da[..., cols[j]]
                        m2 = mask
                        for j in pick:
                            m2 |= 1 << cols[j]
                        new[m2] = new.get(m2, 0.0) + val * term
            done = [i for i, fl in last.items() if fl == f]
            state = {m: v for m, v in new.items() if all(m >> i & 1 for i in done)}
        return state.get((1 << t) - 1, np.zeros(u.shape[:-1]))


def ordinal_cdf(m: OrdinalMarginal, x, pa=()):
    """F_v(x | pa) for one value. ``pa`` is a mapping or a sequence in parent order."""
    pa_values = [pa[p] for p in m.parents] if hasattr(pa, "keys") else list(pa)
    if len(pa_values) != len(m.parents):
        raise ValueError(f"{m.vertex}: incomplete parent configuration")
    return float(m.cdf(np.asarray(x, dtype=float), [np.asarray(v) for v in pa_values]))


def gaussian_cdf(m: GaussianMarginal, x, pa=()):
    pa_values = [pa[p] for p in m.parents] if hasattr(pa, "keys") else list(pa)
    if len(pa_values) != len(m.parents):
        raise ValueError(f"{m.vertex}: incomplete parent configuration")
    return float(m.cdf(np.asarray(x, dtype=float), [np.asarray(v, dtype=float) for v in pa_values]))


def marginal_cdf(m, x, pa=()):
    if isinstance(m, OrdinalMarginal):
        return ordinal_cdf(m, x, pa)
    return gaussian_cdf(m, x, pa)


def _check_unit(u):
    u = np.asarray(u, dtype=float)
    if np.any(np.isnan(u)) or np.any(u < 0) or np.any(u > 1):
        raise ValueError("copula arguments must lie in [0, 1]")
    return u


def frank_cdf(c: FrankCopula, u):
    return float(c.cdf(_check_unit(u)))


def product_copula_cdf(p: ProductCopula, u):
    u = _check_unit(u)
    if u.shape != (len(p.members),):
        raise ValueError(f"expected {len(p.members)} arguments, got shape {u.shape}")
    return float(p.cdf(u))


def district_cdf(d, marginals, copula: ProductCopula, x, pa):
    """Conditional CDF of a barren district at ``x`` given parent values ``pa``.

    Each member's copula argument is its own conditional marginal CDF, so
    parents of other members never enter it.
    """
    from .graph import is_barren

    if not is_barren(d):
        raise NotBarrenError(
            f"district {d.members} has internal directed edges; apply transform_artificial first"
        )
    if tuple(copula.members) != tuple(d.members):
        raise ValueError("copula members do not match the district")
    if {tuple(c) for c in copula.cliques} != {tuple(c) for c in d.cliques}:
        raise ValueError("copula cliques do not match the district's cliques")
    values = dict(pa)
    values.update(x)
    u = [marginal_cdf(marginals[v], values[v], values) for v in d.members]
    return product_copula_cdf(copula, u)
