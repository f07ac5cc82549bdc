import math

import numpy as np
import pytest

from mcdn.data import Dataset
from mcdn.factors import FrankCopula, GaussianMarginal, OrdinalMarginal
from mcdn.gallery import two_districts
from mcdn.graph import Admg, continuous, ordinal
from mcdn.inference import (
    Chain,
    CopulaLikelihood,
    EvalReport,
    MhConfig,
    PosteriorSample,
    delta_dag,
    fit_marginals,
    kfold_evaluate,
    kfold_indices,
    mh_copula,
    posterior_predictive,
    pseudodata,
)
from mcdn.model import McdnModel, loglik, sample_ordinal
from mcdn.moebius import random_binary_model


def _pair_graph(k=2):
    return Admg(["A", "B"], [], [("A", "B")], {"A": ordinal(k), "B": ordinal(k)})


# -- marginals -----------------------------------------------------------------

def test_fit_frequency_examples():
    g = Admg(["A"])
    d = Dataset(["A"], [[1]] * 7 + [[0]] * 3)
    assert fit_marginals(g, d, alpha=0)["A"].row().tolist() == pytest.approx([0.3, 0.7])
    assert fit_marginals(g, d, alpha=1)["A"].row().tolist() == pytest.approx([4 / 12, 8 / 12])


def test_fit_unseen_parent_configuration():
    g = Admg(["P", "C"], [("P", "C")])
    d = Dataset(["P", "C"], [[0, 1], [0, 0], [0, 1]])
    with pytest.warns(RuntimeWarning, match="unseen"):
        m = fit_marginals(g, d, alpha=0)["C"]
    assert m.row([1]).tolist() == [0.5, 0.5]
    assert fit_marginals(g, d, alpha=1)["C"].row([1]).tolist() == [0.5, 0.5]


def test_fit_linear_regression():
    rng = np.random.default_rng(0)
    pa = rng.normal(size=1000)
    x = 2 * pa + rng.normal(size=1000)
    g = Admg(["P", "X"], [("P", "X")], kinds={"P": continuous(), "X": continuous()})
    m = fit_marginals(g, Dataset(["P", "X"], np.column_stack([pa, x])))["X"]
    intercept, slope = m.weights
    assert abs(slope - 2) < 0.1 and abs(intercept) < 0.1
    assert m.variance == pytest.approx(1.0, abs=0.15)


def test_marginal_error_shrinks_with_n():
    wins = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        m = random_binary_model(two_districts(), rng)
        errs = []
        for n in (200, 2000):
            fm = fit_marginals(m.graph, sample_ordinal(m, n, seed=seed + 50))
            errs.append(max(np.abs(fm[v].table - m.marginals[v].table).max() for v in m.vertices))
        wins += errs[1] < errs[0]
    assert wins >= 9


# -- pseudodata ----------------------------------------------------------------

def test_pseudodata_examples():
    g = Admg(["A", "Y"], [], [], {"A": ordinal(3), "Y": continuous()})
    ms = {"A": OrdinalMarginal("A", [], [0.2, 0.5, 0.3]), "Y": GaussianMarginal("Y", [], [1.5], 2.0)}
    p = pseudodata(g, ms, Dataset(["A", "Y"], [[2, 1.5], [0, 3.0]]))
    assert p.upper[0, 0] == 1.0
    assert p.lower[1, 0] == 0.0
    assert p.upper[1, 0] == pytest.approx(0.2)
    assert p.upper[0, 1] == 0.5
    assert np.isnan(p.lower[0, 1])


# -- likelihood ------------------------------------------------------------------

def test_copula_likelihood_matches_model_loglik(rng):
    m = random_binary_model(two_districts(), rng)
    d = sample_ordinal(m, 300, seed=4)
    lik = CopulaLikelihood(m, pseudodata(m.graph, m.marginals, d))
    # the copula likelihood of ordinal districts is the full log-likelihood
    assert lik(m.theta_vector()) == pytest.approx(loglik(m, d), rel=1e-12)


def test_copula_likelihood_continuous_drops_marginal_terms():
    g = Admg(["A", "B"], [], [("A", "B")], {"A": continuous(), "B": continuous()})
    ms = {"A": GaussianMarginal("A", [], [0.0], 1.0), "B": GaussianMarginal("B", [], [0.0], 1.0)}
    m = McdnModel(g, ms, [3.0])
    d = Dataset(["A", "B"], np.random.default_rng(0).normal(size=(20, 2)))
    lik = CopulaLikelihood(m, pseudodata(g, ms, d))
    marg = sum(float(np.sum(ms[v].logpdf(d.column(v), []))) for v in "AB")
    assert lik(np.array([3.0])) + marg == pytest.approx(loglik(m, d), rel=1e-12)


# -- Metropolis-Hastings -------------------------------------------------------

def test_zero_iterations_returns_initialisation(rng):
    m = random_binary_model(two_districts(), rng)
    d = sample_ordinal(m, 100, seed=1)
    chain = mh_copula(McdnModel(m.graph, m.marginals), pseudodata(m.graph, m.marginals, d), MhConfig(iterations=0, burn_in=0))
    assert len(chain) == 1
    assert chain[0].theta.tolist() == [0.0, 0.0]


def test_config_validation():
    with pytest.raises(ValueError):
        MhConfig(iterations=10, burn_in=10)
    with pytest.raises(ValueError):
        MhConfig(proposal_sd=0)
    with pytest.raises(ValueError):
        MhConfig(prior_scale="flat")


def test_flat_likelihood_recovers_prior():
    g = _pair_graph()
    empty = Dataset(["A", "B"], [])
    ms = fit_marginals(g, empty)
    cfg = MhConfig(iterations=20000, burn_in=1000, seed=5)
    chain = mh_copula(McdnModel(g, ms), pseudodata(g, ms, empty), cfg)
    eta = chain.etas()[:, 0]
    # effective sample size from batch means
    batches = eta[: len(eta) // 50 * 50].reshape(50, -1).mean(axis=1)
    n_eff = 50 * eta.var() / batches.var(ddof=1)
    assert abs(eta.mean()) < 3 * math.sqrt(10 / n_eff)
    assert eta.var() == pytest.approx(10, rel=0.3)


def test_log_scale_for_larger_cliques():
    g = Admg(list("ABC"), [], [("A", "B"), ("B", "C"), ("A", "C")])
    ms = {v: OrdinalMarginal(v, [], [0.4, 0.6]) for v in "ABC"}
    truth = McdnModel(g, ms, [5.0])
    d = sample_ordinal(truth, 500, seed=2)
    chain = mh_copula(McdnModel(g, ms), pseudodata(g, ms, d), MhConfig(iterations=600, burn_in=100, seed=1))
    th = chain.thetas()[:, 0]
    assert np.all(th > 0)
    assert np.allclose(np.log(th), chain.etas()[:, 0])


def test_chain_deterministic_under_seed(rng):
    m = random_binary_model(two_districts(), rng)
    d = sample_ordinal(m, 200, seed=1)
    p = pseudodata(m.graph, m.marginals, d)
    a = mh_copula(m, p, MhConfig(iterations=300, burn_in=50, seed=9)).thetas()
    b = mh_copula(m, p, MhConfig(iterations=300, burn_in=50, seed=9)).thetas()
    assert np.array_equal(a, b)


def test_posterior_mean_near_truth():
    # strong dependence in a two-vertex ordinal district
    g = _pair_graph(5)
    ms = {v: OrdinalMarginal(v, [], [0.2] * 5) for v in "AB"}
    d = sample_ordinal(McdnModel(g, ms, [12.0]), 2000, seed=3)
    fm = fit_marginals(g, d)
    chain = mh_copula(McdnModel(g, fm), pseudodata(g, fm, d), MhConfig(seed=3))
    post = chain.thetas()[:, 0]
    assert abs(post.mean() - 12.0) < 3 * post.std() + 0.5
    assert 0.1 < chain.acceptance_rate < 0.7


# -- predictive scoring --------------------------------------------------------

def _scored(rng):
    m = random_binary_model(_pair_graph(), rng)
    test = sample_ordinal(m, 40, seed=7)
    return m, test


def test_predictive_one_sample_is_loglik_in_bits(rng):
    m, test = _scored(rng)
    s = PosteriorSample(m.theta_vector(), m.theta_vector(), 0.0)
    assert posterior_predictive([s], m, None, test) == pytest.approx(loglik(m, test) / math.log(2), rel=1e-13)
    assert posterior_predictive([s] * 5, m, None, test) == pytest.approx(posterior_predictive([s], m, None, test), rel=1e-13)


def test_predictive_is_arithmetic_mean_of_likelihoods(rng):
    m, test = _scored(rng)
    th = [np.array([-2.0]), np.array([3.0])]
    ls = [loglik(m.with_thetas(t), test) for t in th]
    samples = [PosteriorSample(t, t, 0.0) for t in th]
    want = (np.logaddexp(*ls) - math.log(2)) / math.log(2)
    assert posterior_predictive(samples, m, None, test) == pytest.approx(want, rel=1e-12)
    assert posterior_predictive(samples[::-1], m, None, test) == pytest.approx(want, rel=1e-12)
    assert posterior_predictive(samples * 3, m, None, test) == pytest.approx(want, rel=1e-12)


def test_predictive_needs_samples(rng):
    m, test = _scored(rng)
    with pytest.raises(ValueError):
        posterior_predictive([], m, None, test)


# -- millibits -----------------------------------------------------------------

def test_delta_dag_examples():
    r = delta_dag([-5.0, -7.0], [-5.0, -7.0], [3, 3])
    assert r.mean == 0 and r.se == 0
    r = delta_dag([math.log2(0.2)] * 3, [math.log2(0.1)] * 3, [1, 1, 1])
    assert r.mean == pytest.approx(1000.0)
    r = delta_dag([-20.0, -30.0], [-21.0, -31.0], [10, 10])
    assert r.deltas.tolist() == pytest.approx([100.0, 100.0])


def test_delta_dag_antisymmetric_and_se():
    a, b, n = [-10.0, -12.0, -9.0], [-11.0, -11.5, -9.5], [5, 5, 4]
    r = delta_dag(a, b, n)
    assert delta_dag(b, a, n).mean == pytest.approx(-r.mean)
    assert r.se == pytest.approx(np.std(r.deltas, ddof=1) / math.sqrt(3))
    assert r.k == 3


def test_delta_dag_mismatch():
    with pytest.raises(ValueError):
        delta_dag([1.0, 2.0], [1.0], [1, 1])


def test_report_outputs():
    r = delta_dag([-20.0, -30.0], [-21.0, -31.0], [10, 10])
    assert r.to_csv().splitlines()[1] == "0,10,-20.0,-21.0,-2.0,-2.1,100.0"
    assert "positive_folds = 2" in r.to_sections()


# -- cross validation ----------------------------------------------------------

def test_kfold_indices_partition():
    folds = kfold_indices(23, 5, seed=1)
    assert sorted(np.concatenate(folds).tolist()) == list(range(23))
    assert [len(f) for f in folds] == [5, 5, 5, 4, 4]
    assert all(np.array_equal(a, b) for a, b in zip(folds, kfold_indices(23, 5, seed=1)))
    with pytest.raises(ValueError):
        kfold_indices(5, 1)


def test_kfold_dag_data_is_finite():
    rng = np.random.default_rng(2)
    g = Admg(["A", "B", "C"], [("A", "B"), ("B", "C")])
    m = random_binary_model(g, rng)
    d = sample_ordinal(m, 300, seed=3)
    r = kfold_evaluate(g, None, d, 5, MhConfig(iterations=50, burn_in=10), seed=1)
    assert np.all(np.isfinite(r.deltas))
    assert np.allclose(r.deltas, 0)


def test_leave_one_out_runs(rng):
    m = random_binary_model(_pair_graph(), rng)
    d = sample_ordinal(m, 20, seed=1)
    r = kfold_evaluate(m.graph, None, d, 20, MhConfig(iterations=40, burn_in=10), seed=2)
    assert r.k == 20 and np.isfinite(r.mean)


def test_kfold_rejects_non_dag_baseline(rng):
    m = random_binary_model(_pair_graph(), rng)
    d = sample_ordinal(m, 20, seed=1)
    with pytest.raises(ValueError):
        kfold_evaluate(m.graph, m.graph, d, 2, MhConfig(iterations=20, burn_in=5))
