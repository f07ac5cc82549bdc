"""Two-stage estimation: marginals first, then copula parameters by Metropolis-Hastings.

Also holds the cross-validated comparison against a DAG baseline, reported
in millibits per test observation.
"""

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
from scipy.special import logsumexp

from .data import Dataset
from .errors import DataError, UnsupportedConfigurationError
from .factors import FrankCopula, GaussianMarginal, OrdinalMarginal
from .model import McdnModel, inclusion_exclusion, snap_mass, tree_sum

LOG2 = math.log(2.0)
# log-scale parameters start here rather than at the independence limit log(0) = -inf
LOG_THETA_INIT = math.log(1e-2)


def fit_marginals(g, data: Dataset, alpha=1.0):
    """Fit every vertex's conditional marginal on its own.

    Ordinal vertices get smoothed conditional frequency tables (``alpha``
    pseudo-counts per cell). Continuous vertices get a least-squares linear
    regression on their parents with the maximum-likelihood residual
    variance.
    """
    X = data.aligned(g)
    pos = {v: i for i, v in enumerate(g.vertices)}
    out = {}
    for v in g.vertices:
        parents = g.parents(v)
        pa_cols = [X[:, pos[p]] for p in parents]
        kind = g.kind(v)
        y = X[:, pos[v]]
        if kind.is_ordinal:
            cards = [g.kind(p).cardinality for p in parents]
            if any(c is None for c in cards):
                raise UnsupportedConfigurationError(f"ordinal {v!r} cannot condition on a continuous parent")
            k = kind.cardinality
            n_conf = math.prod(cards)
            idx = np.zeros(len(y), dtype=np.int64)
            for c, col in zip(cards, pa_cols):
                idx = idx * c + col.astype(np.int64)
            counts = np.zeros((n_conf, k))
            np.add.at(counts, (idx, y.astype(np.int64)), 1.0)
            counts += alpha
            totals = counts.sum(axis=1, keepdims=True)
            empty = totals[:, 0] == 0
            if np.any(empty):
                warnings.warn(f"{v}: {int(empty.sum())} parent configurations unseen; using uniform rows", RuntimeWarning)
                counts[empty] = 1.0
                totals[empty] = k
            table = counts / totals
            out[v] = OrdinalMarginal(v, parents, table.reshape(tuple(cards) + (k,)), cards, alpha)
        else:
            if len(y) == 0:
                raise DataError(f"cannot fit continuous {v!r} without data")
            design = np.column_stack([np.ones(len(y))] + pa_cols)
            weights, *_ = np.linalg.lstsq(design, y, rcond=None)
            resid = y - design @ weights
            var = float(np.mean(resid ** 2))
            if var <= 1e-12:
                warnings.warn(f"{v}: residual variance {var:.3g} floored at 1e-12", RuntimeWarning)
                var = 1e-12
            out[v] = GaussianMarginal(v, parents, weights, var)
    return out


@dataclass
class Pseudodata:
    """Marginal CDF values per row and vertex.

    ``upper`` is F_v(x_v | pa); ``lower`` is F_v(x_v - 1 | pa) for ordinal
    columns and NaN for continuous ones.
    """

    columns: tuple
    upper: np.ndarray
    lower: np.ndarray
    ordinal: tuple

    @property
    def n(self):
        return self.upper.shape[0]


def pseudodata(g, marginals, data: Dataset) -> Pseudodata:
    X = data.aligned(g)
    pos = {v: i for i, v in enumerate(g.vertices)}
    upper = np.empty_like(X)
    lower = np.full_like(X, np.nan)
    for v in g.vertices:
        m = marginals[v]
        pa = [X[:, pos[p]] for p in m.parents]
        j = pos[v]
        upper[:, j] = m.cdf(X[:, j], pa)
        if isinstance(m, OrdinalMarginal):
            lower[:, j] = m.cdf(X[:, j] - 1, pa)
    return Pseudodata(tuple(g.vertices), upper, lower, tuple(g.kind(v).is_ordinal for v in g.vertices))


class CopulaLikelihood:
    """Log-likelihood of the copula parameters given pseudodata.

    Ordinal districts contribute their full log mass; continuous districts
    contribute the log copula density (the marginal densities do not depend
    on the copula parameters). Repeated ordinal rows are collapsed.
    """

    def __init__(self, model: McdnModel, pseudo: Pseudodata):
        self.model = model
        self.blocks = []
        start = 0
        for spec in model._specs:
            n_par = len(spec.copula.cliques)
            dims = [len(c) for c in spec.copula.cliques]
            if spec.kind == "mixed":
                raise UnsupportedConfigurationError(f"district {spec.district.members} mixes variable kinds")
            if spec.kind == "ordinal":
                stacked = np.hstack([pseudo.upper[:, spec.cols], pseudo.lower[:, spec.cols]])
                if len(stacked):
                    uniq, counts = np.unique(stacked, axis=0, return_counts=True)
                else:
                    uniq, counts = stacked, np.zeros(0)
                t = len(spec.cols)
                block = (spec, slice(start, start + n_par), dims, uniq[:, :t], uniq[:, t:], counts.astype(float))
            else:
                block = (spec, slice(start, start + n_par), dims, pseudo.upper[:, spec.cols], None, np.ones(pseudo.n))
            self.blocks.append(block)
            start += n_par
        self.n_params = start

    def __call__(self, thetas) -> float:
        total = 0.0
        for spec, sl, dims, upper, lower, counts in self.blocks:
            if not len(counts):
                continue
            cop = spec.copula.with_copulas([FrankCopula(th, d) for th, d in zip(thetas[sl], dims)])
            with np.errstate(all="ignore"):
                if lower is not None:
                    if len(spec.cols) == 1:
                        mass = upper[:, 0] - lower[:, 0]
                    elif spec.edges is not None:
                        mass = tree_sum(cop, upper, lower, spec.edges)
                    else:
                        mass = inclusion_exclusion(cop.cdf, upper, lower)
                    if np.any(mass < -1e-9) or not np.all(np.isfinite(mass)):
                        return -math.inf
                    terms = np.log(np.clip(mass, 0.0, 1.0))
                else:
                    if len(spec.cols) == 1:
                        continue
                    terms = np.log(cop.density(upper))
            val = float(np.dot(counts, terms))
            if not math.isfinite(val):
                return -math.inf
            total += val
        return total


@dataclass
class MhConfig:
    """Settings of the random-walk Metropolis-Hastings sampler.

    ``prior_var`` is a variance. ``prior_scale="sampling"`` puts the Gaussian
    prior on the sampled (possibly log) scale; ``"natural"`` puts it on theta
    itself and adds the log-Jacobian of the transform.
    """

    iterations: int = 2000
    burn_in: int = 500
    thin: int = 1
    proposal_sd: float = 0.5
    prior_mean: float = 0.0
    prior_var: float = 10.0
    seed: Optional[int] = 0
    adapt: bool = True
    adapt_batch: int = 100
    adapt_rounds: int = 10
    prior_scale: str = "sampling"

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.iterations < 0 or (self.iterations and self.iterations <= self.burn_in):
            raise ValueError("iterations must exceed burn_in")
        if not self.proposal_sd > 0:
            raise ValueError("proposal_sd must be positive")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not self.prior_var > 0:
            raise ValueError("prior_var must be positive")
        if self.prior_scale not in ("sampling", "natural"):
            raise ValueError("prior_scale is 'sampling' or 'natural'")


@dataclass
class PosteriorSample:
    theta: np.ndarray   # natural scale
    eta: np.ndarray     # sampling scale
    loglik: float


class Chain(list):
    """Posterior samples plus sampler diagnostics."""

    def __init__(self, samples=(), acceptance_rate=float("nan"), rejected_nonfinite=0, proposal_sd=float("nan")):
        super().__init__(samples)
        self.acceptance_rate = acceptance_rate
        self.rejected_nonfinite = rejected_nonfinite
        self.proposal_sd = proposal_sd

    def thetas(self):
        return np.array([s.theta for s in self]).reshape(len(self), -1)

    def etas(self):
        return np.array([s.eta for s in self]).reshape(len(self), -1)


def _log_scale_mask(model):
    return np.array([len(c) >= 3 for c in model.cliques], dtype=bool)


def to_natural(eta, log_mask):
    return np.where(log_mask, np.exp(eta), eta)


def to_sampling(theta, log_mask):
    theta = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(log_mask, np.log(np.maximum(theta, 1e-300)), theta)


def initial_eta(model):
    """Independence point: theta = 0 for bivariate cliques, a small positive theta otherwise."""
    return np.where(_log_scale_mask(model), LOG_THETA_INIT, 0.0)


def mh_copula(model: McdnModel, pseudo: Pseudodata, cfg: MhConfig, init=None) -> Chain:
    """Random-walk Metropolis-Hastings over the copula parameters.

    Bivariate cliques are sampled on the theta scale, larger cliques on
    log(theta). Proposals whose likelihood is not finite are rejected and
    counted. With ``cfg.adapt`` the proposal scale is halved or doubled in
    batches before burn-in until the acceptance rate is within 0.2-0.5.
    """
    lik = CopulaLikelihood(model, pseudo)
    log_mask = _log_scale_mask(model)
    rng = np.random.default_rng(cfg.seed)
    var = cfg.prior_var

    def log_target(eta):
        ll = lik(to_natural(eta, log_mask))
        if not math.isfinite(ll):
            return -math.inf, ll
        if cfg.prior_scale == "sampling":
            lp = -0.5 * float(np.sum((eta - cfg.prior_mean) ** 2)) / var
        else:
            theta = to_natural(eta, log_mask)
            lp = -0.5 * float(np.sum((theta - cfg.prior_mean) ** 2)) / var + float(np.sum(eta[log_mask]))
        return ll + lp, ll

    eta = initial_eta(model) if init is None else to_sampling(init, log_mask)
    cur, cur_ll = log_target(eta)
    if not math.isfinite(cur):
        raise ValueError("initial copula parameters have zero likelihood")
    k = lik.n_params
    if k == 0 or cfg.iterations == 0:
        return Chain([PosteriorSample(to_natural(eta, log_mask), eta.copy(), cur_ll)], float("nan"), 0, cfg.proposal_sd)

    sd = cfg.proposal_sd
    nonfinite = 0

    def step(eta, cur, cur_ll):
        nonlocal nonfinite
        prop = eta + sd * rng.standard_normal(k)
        new, new_ll = log_target(prop)
        if not math.isfinite(new):
            nonfinite += 1
            return eta, cur, cur_ll, False
        if math.log(rng.random()) < new - cur:
            return prop, new, new_ll, True
        return eta, cur, cur_ll, False

    if cfg.adapt:
        for _ in range(cfg.adapt_rounds):
            acc = 0
            for _ in range(cfg.adapt_batch):
                eta, cur, cur_ll, ok = step(eta, cur, cur_ll)
                acc += ok
            rate = acc / cfg.adapt_batch
            if rate < 0.2:
                sd /= 2.0
            elif rate > 0.5:
                sd *= 2.0
            else:
                break

    samples = []
    accepted = 0
    nonfinite = 0
    for it in range(cfg.iterations):
        eta, cur, cur_ll, ok = step(eta, cur, cur_ll)
        accepted += ok
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            samples.append(PosteriorSample(to_natural(eta, log_mask), eta.copy(), cur_ll))
    return Chain(samples, accepted / cfg.iterations, nonfinite, sd)


def posterior_predictive(samples, model: McdnModel, marginals, test: Dataset) -> float:
    """log2 of the test-set likelihood averaged over posterior samples."""
    if not len(samples):
        raise ValueError("need at least one posterior sample")
    base = model.with_marginals(marginals) if marginals is not None else model
    X = test.aligned(base.graph)
    cache = {}
    lls = []
    for s in samples:
        key = tuple(np.asarray(s.theta, dtype=float).tolist())
        if key not in cache:
            cache[key] = math.fsum(base.with_thetas(s.theta).log_prob(X).tolist())
        lls.append(cache[key])
    lls = np.sort(np.array(lls))
    return float((logsumexp(lls) - math.log(len(lls))) / LOG2)


@dataclass
class EvalReport:
    """Per-fold log2 predictive totals and their millibit differences."""

    model_log2: np.ndarray
    baseline_log2: np.ndarray
    n_per_fold: np.ndarray
    deltas: np.ndarray
    mean: float
    se: float

    @property
    def k(self):
        return len(self.deltas)

    @property
    def model_per_obs(self):
        return self.model_log2 / self.n_per_fold

    @property
    def baseline_per_obs(self):
        return self.baseline_log2 / self.n_per_fold

    def to_csv(self):
        lines = ["fold,n,model_log2,baseline_log2,model_log2_per_obs,baseline_log2_per_obs,delta_millibits"]
        for i in range(self.k):
            lines.append(
                f"{i},{int(self.n_per_fold[i])},{float(self.model_log2[i])!r},{float(self.baseline_log2[i])!r},"
                f"{float(self.model_per_obs[i])!r},{float(self.baseline_per_obs[i])!r},{float(self.deltas[i])!r}"
            )
        return "\n".join(lines) + "\n"

    def to_sections(self):
        from .params import format_sections

        return format_sections([
            ("summary", [("folds", str(self.k)), ("delta_mean", repr(self.mean)), ("delta_se", repr(self.se)),
                         ("positive_folds", str(int(np.sum(self.deltas > 0))))]),
        ] + [
            (f"fold {i}", [("n", str(int(self.n_per_fold[i]))), ("model_log2", repr(float(self.model_log2[i]))),
                           ("baseline_log2", repr(float(self.baseline_log2[i]))), ("delta", repr(float(self.deltas[i])))])
            for i in range(self.k)
        ])


def delta_dag(model_log2, baseline_log2, n_per_fold) -> EvalReport:
    """Millibits per observation by which the model beats the baseline, per fold."""
    m = np.asarray(model_log2, dtype=float)
    b = np.asarray(baseline_log2, dtype=float)
    n = np.asarray(n_per_fold, dtype=float)
    if not (m.shape == b.shape == n.shape) or m.ndim != 1 or not len(m):
        raise ValueError("model, baseline and fold sizes must be equal-length non-empty sequences")
    if np.any(n <= 0):
        raise ValueError("fold sizes must be positive")
    deltas = 1000.0 / n * (m - b)
    mean = float(np.mean(deltas))
    se = float(np.std(deltas, ddof=1) / math.sqrt(len(deltas))) if len(deltas) > 1 else float("nan")
    return EvalReport(m, b, n, deltas, mean, se)


def kfold_indices(n, k, seed=None):
    if k < 2 or k > n:
        raise ValueError(f"need 2 <= K <= n, got K={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def dag_log2(graph, train: Dataset, test: Dataset, alpha=1.0) -> float:
    """Test log2-likelihood of a DAG fitted on ``train``."""
    if graph.bidirected_edges:
        raise ValueError("baseline must be a DAG")
    base = McdnModel(graph, fit_marginals(graph, train, alpha))
    return math.fsum(base.log_prob(test.aligned(graph)).tolist()) / LOG2


@dataclass
class FoldResult:
    model_log2: float
    baseline_log2: float
    n: int
    chain: Chain = field(repr=False)


def evaluate_fold(g, baseline, train, test, cfg: MhConfig, alpha=1.0) -> FoldResult:
    marginals = fit_marginals(g, train, alpha)
    skeleton = McdnModel(g, marginals)
    chain = mh_copula(skeleton, pseudodata(g, marginals, train), cfg)
    model_log2 = posterior_predictive(chain, skeleton, None, test)
    return FoldResult(model_log2, dag_log2(baseline, train, test, alpha), test.n, chain)


def kfold_evaluate(g, baseline, data: Dataset, k, cfg: MhConfig, alpha=1.0, seed=None) -> EvalReport:
    """K-fold comparison of the MCDN on ``g`` with the DAG ``baseline``.

    ``baseline=None`` uses ``g`` with its bi-directed edges removed. Fold
    ``i`` runs its chain with seed ``cfg.seed + i``.
    """
    if baseline is None:
        baseline = g.strip_bidirected()
    folds = kfold_indices(data.n, k, seed)
    results: List[FoldResult] = []
    for i, test_idx in enumerate(folds):
        train_idx = np.concatenate([f for j, f in enumerate(folds) if j != i])
        fold_cfg = replace(cfg, seed=None if cfg.seed is None else cfg.seed + i)
        results.append(evaluate_fold(g, baseline, data.rows(np.sort(train_idx)), data.rows(np.sort(test_idx)), fold_cfg, alpha))
    return delta_dag([r.model_log2 for r in results], [r.baseline_log2 for r in results], [r.n for r in results])


def posterior_mean_model(model: McdnModel, chain: Chain) -> McdnModel:
    """The model with each copula parameter at its posterior mean (natural scale)."""
    return model.with_thetas(chain.thetas().mean(axis=0)) if len(model.cliques) else model
