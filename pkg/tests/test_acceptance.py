"""Acceptance criteria 1-10, each at its stated tolerance.

Every test records one PASS/FAIL line; the lines are printed at the end of
the pytest run (see ``conftest.py``) and also when this file is executed
directly.
"""

import itertools
import math
import time

import numpy as np
import pytest

from conftest import random_admg
from mcdn.factors import FrankCopula, OrdinalMarginal, ProductCopula
from mcdn.gallery import single_district
from mcdn.graph import Admg, districts, is_barren, ordinal, transform_artificial
from mcdn.inference import CopulaLikelihood, MhConfig, fit_marginals, kfold_evaluate, mh_copula, pseudodata
from mcdn.model import McdnModel, check_markov, dense_pmf, sample_ordinal, tree_pmf
from mcdn.moebius import cdn_to_moebius, moebius_to_pmf, random_binary_model, verify_worked_identity

RESULTS = {}


def record(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


def fifty_models():
    rng = np.random.default_rng(2024)
    return [random_binary_model(random_admg(rng, 6, 2), rng) for _ in range(50)]


# 1 -----------------------------------------------------------------------------

def test_c01_normalisation():
    start = time.perf_counter()
    worst = max(abs(m.joint_table().sum() - 1.0) for m in fifty_models())
    elapsed = time.perf_counter() - start
    record(1, worst < 1e-9 and elapsed < 30, f"max |sum - 1| = {worst:.2e} over 50 models, {elapsed:.1f} s")


# 2 -----------------------------------------------------------------------------

def test_c02_markov_oracle():
    start = time.perf_counter()
    reports = [check_markov(m, tol=1e-8, n_triples=20, seed=i) for i, m in enumerate(fifty_models())]
    elapsed = time.perf_counter() - start
    worst = max(r.max_violation for r in reports)
    n_checks = sum(r.n_constraints + r.n_triples for r in reports)
    ok = all(r.passed for r in reports) and elapsed < 120
    record(2, ok, f"max violation = {worst:.2e} over {n_checks} statements, {elapsed:.1f} s")


# 3 -----------------------------------------------------------------------------

def test_c03_moebius_bridge():
    rng = np.random.default_rng(3)
    worst = 0.0
    n_graphs = 0
    for n in range(1, 6):
        vs = [f"X{i}" for i in range(1, n + 1)]
        pairs = list(itertools.combinations(vs, 2))
        for mask in range(1 << len(pairs)):
            g = Admg(vs, [], [p for i, p in enumerate(pairs) if mask >> i & 1])
            n_graphs += 1
            for _ in range(5):
                m = random_binary_model(g, rng)
                table = cdn_to_moebius(m)
                joint = m.joint_table()
                for x in itertools.product([0, 1], repeat=n):
                    worst = max(worst, abs(moebius_to_pmf(table, dict(zip(vs, x))) - joint[x]))
    record(3, worst < 1e-10, f"max |Moebius pmf - enumerated pmf| = {worst:.2e} over {n_graphs} graphs x 5 draws")


# 4 -----------------------------------------------------------------------------

def test_c04_worked_binary_identities():
    two = max(verify_worked_identity("two-districts", seed=s) for s in range(100))
    one = max(verify_worked_identity("single-district", seed=s) for s in range(100))
    record(4, two < 1e-12 and one < 1e-12, f"four-term expansion {two:.2e}, two-block factorisation {one:.2e} (100 draws each)")


# 5 -----------------------------------------------------------------------------

def _with_artificial_vertices(m):
    gt, stars = transform_artificial(m.graph)
    back = {s: v for v, s in stars.items()}
    ms = {}
    for v in gt.vertices:
        if v in back:
            k = gt.kind(v).cardinality
            ms[v] = OrdinalMarginal(v, [back[v]], np.eye(k), [k])
        else:
            old = m.marginals[v]
            ms[v] = OrdinalMarginal(v, [stars[p] for p in old.parents], old.table, old.parent_cards)
    return McdnModel(gt, ms, m.theta_vector()), stars


def test_c05_artificial_vertex_reduction():
    rng = np.random.default_rng(5)
    graphs = []
    while len(graphs) < 30:
        g = random_admg(rng, 6, 3, p_dir=0.45, p_bi=0.45)
        if not all(is_barren(d) for d in districts(g)):
            graphs.append(g)
    all_barren = True
    worst = 0.0
    for g in graphs:
        m = random_binary_model(g, rng)
        mt, stars = _with_artificial_vertices(m)
        all_barren &= all(is_barren(d) for d in districts(mt.graph))
        grid, _ = m.configurations()
        # each artificial vertex takes the value of its original
        source = {v: v for v in m.vertices}
        source.update({s: v for v, s in stars.items()})
        ext = grid[:, [m.vertices.index(source[v]) for v in mt.vertices]]
        worst = max(worst, float(np.max(np.abs(mt.prob(ext) - m.prob(grid)))))
    fig4 = len(districts(transform_artificial(single_district())[0]))
    ok = all_barren and fig4 == 4 and worst < 1e-10
    record(5, ok, f"30 graphs barren after transform: {all_barren}; single-district example gives {fig4} districts; "
                  f"max joint change {worst:.2e}")


# 6 -----------------------------------------------------------------------------

def _tree_district(rng, t):
    names = [f"T{i}" for i in range(t)]
    edges = [(names[int(rng.integers(0, i))], names[i]) for i in range(1, t)]
    g = Admg(names, [], edges, {v: ordinal(int(rng.integers(2, 4))) for v in names})
    d = districts(g)[0]
    ms = {v: OrdinalMarginal(v, [], rng.dirichlet(np.ones(g.kind(v).cardinality))) for v in names}
    cop = ProductCopula(d.members, d.cliques, [FrankCopula(rng.uniform(-5, 8)) for _ in d.cliques])
    return g, d, ms, cop


def test_c06_tree_message_passing():
    rng = np.random.default_rng(6)
    worst = 0.0
    for i in range(30):
        g, d, ms, cop = _tree_district(rng, 2 + i % 9)
        for _ in range(10):
            x = {v: int(rng.integers(0, g.kind(v).cardinality)) for v in g.vertices}
            worst = max(worst, abs(tree_pmf(d, ms, cop, x) - dense_pmf(d, ms, cop, x)))
    g, d, ms, cop = _tree_district(rng, 20)
    x = {v: int(rng.integers(0, g.kind(v).cardinality)) for v in g.vertices}
    tree_pmf(d, ms, cop, x)
    reps = 50
    start = time.perf_counter()
    for _ in range(reps):
        tree_pmf(d, ms, cop, x)
    per_eval = (time.perf_counter() - start) / reps
    ok = worst < 1e-10 and per_eval < 0.010
    record(6, ok, f"max |tree - brute force| = {worst:.2e} on 30 trees (2-10 vertices); "
                  f"20-vertex evaluation {per_eval * 1e3:.2f} ms")


# 7 -----------------------------------------------------------------------------

def _volume(cdf, lo, hi):
    t = lo.shape[-1]
    total = np.zeros(lo.shape[0])
    for corner in itertools.product([0, 1], repeat=t):
        pick = np.array(corner, dtype=bool)
        total += (-1) ** (t - sum(corner)) * cdf(np.where(pick, hi, lo))
    return total


def test_c07_copula_axioms():
    rng = np.random.default_rng(7)
    copulas = {
        "Frank t=2 theta=-6": FrankCopula(-6.0, 2),
        "Frank t=2 theta=9": FrankCopula(9.0, 2),
        "Frank t=3 theta=4": FrankCopula(4.0, 3),
        "product chain": ProductCopula(["A", "B", "C"], [("A", "B"), ("B", "C")], [FrankCopula(7.0), FrankCopula(-4.0)]),
        "product triangle+pair": ProductCopula(["A", "B", "C"], [("A", "B", "C"), ("A", "C")],
                                               [FrankCopula(3.0, 3), FrankCopula(5.0)]),
    }
    worst_vol = math.inf
    worst_margin = 0.0
    for name, c in copulas.items():
        t = c.dim if isinstance(c, FrankCopula) else len(c.members)
        a = rng.uniform(size=(1000, t))
        b = rng.uniform(size=(1000, t))
        worst_vol = min(worst_vol, float(_volume(c.cdf, np.minimum(a, b), np.maximum(a, b)).min()))
        u = rng.uniform(size=1000)
        for j in range(t):
            pts = np.ones((1000, t))
            pts[:, j] = u
            worst_margin = max(worst_margin, float(np.max(np.abs(c.cdf(pts) - u))))
    ok = worst_vol >= -1e-12 and worst_margin <= 1e-12
    record(7, ok, f"min rectangle volume {worst_vol:.2e}, max margin error {worst_margin:.2e} "
                  f"({len(copulas)} copulas x 1000 rectangles/points)")


# 8 -----------------------------------------------------------------------------

def test_c08_estimation_consistency():
    k = 10
    g = Admg(["X1", "X2", "X3"], [("X3", "X1")], [("X1", "X2")],
             {"X1": ordinal(k), "X2": ordinal(k), "X3": ordinal(2)})
    start = time.perf_counter()
    hits = 0
    means = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        truth = McdnModel(g, {
            "X1": OrdinalMarginal("X1", ["X3"], rng.dirichlet(np.full(k, 3.0), size=2), [2]),
            "X2": OrdinalMarginal("X2", [], rng.dirichlet(np.full(k, 3.0))),
            "X3": OrdinalMarginal("X3", [], rng.dirichlet(np.full(2, 3.0))),
        }, [4.0])
        data = sample_ordinal(truth, 2000, seed=seed + 100)
        fitted = fit_marginals(g, data)
        err = max(np.abs(fitted[v].table - truth.marginals[v].table).max() for v in g.vertices)
        chain = mh_copula(McdnModel(g, fitted), pseudodata(g, fitted, data), MhConfig(seed=seed))
        mean = float(chain.thetas()[:, 0].mean())
        means.append(mean)
        hits += err <= 0.05 and abs(mean - 4.0) <= 0.5
    elapsed = time.perf_counter() - start
    ok = hits >= 8 and elapsed < 300
    record(8, ok, f"{hits}/10 seeds with marginals within 0.05 and posterior mean within 0.5 of 4 "
                  f"(means {', '.join(f'{m:.2f}' for m in means)}), {elapsed:.0f} s")


# 9 -----------------------------------------------------------------------------

def test_c09_delta_dag_direction():
    vs = [f"X{i}" for i in range(1, 7)]
    g = Admg(vs, [("X1", "X4"), ("X3", "X6")], [("X1", "X2"), ("X2", "X3"), ("X4", "X5"), ("X5", "X6")])
    start = time.perf_counter()
    good = 0
    positives = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        truth = random_binary_model(g, rng, independent=True)
        truth = truth.with_thetas([8.0] * len(truth.cliques))
        data = sample_ordinal(truth, 1000, seed=seed + 1000)
        report = kfold_evaluate(g, None, data, 5, MhConfig(iterations=1000, burn_in=250, seed=seed), seed=seed)
        pos = int(np.sum(report.deltas > 0))
        positives.append(pos)
        good += pos >= 4
    elapsed = time.perf_counter() - start
    ok = good >= 8 and elapsed < 600
    record(9, ok, f"{good}/10 seeds with Delta_DAG > 0 in >= 4 of 5 folds (positive folds {positives}), {elapsed:.0f} s")


# 10 ----------------------------------------------------------------------------

def test_c10_mh_against_quadrature():
    g = Admg(["A", "B"], [], [("A", "B")])
    ms = {"A": OrdinalMarginal("A", [], [0.4, 0.6]), "B": OrdinalMarginal("B", [], [0.3, 0.7])}
    data = sample_ordinal(McdnModel(g, ms, [3.0]), 40, seed=10)
    skeleton = McdnModel(g, ms)
    pseudo = pseudodata(g, ms, data)
    cfg = MhConfig(iterations=100_000, burn_in=1000, seed=10)
    chain = mh_copula(skeleton, pseudo, cfg)
    draws = chain.thetas()[:, 0]

    lik = CopulaLikelihood(skeleton, pseudo)
    edges = np.linspace(-15, 25, 81)
    fine = np.linspace(edges[0], edges[-1], 8001)
    logpost = np.array([lik(np.array([t])) for t in fine]) - 0.5 * fine ** 2 / cfg.prior_var
    dens = np.exp(logpost - logpost.max())
    cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2 * np.diff(fine))])
    cdf /= cdf[-1]
    quad = np.diff(np.interp(edges, fine, cdf))
    hist = np.histogram(draws, bins=edges)[0] / len(draws)
    outside = np.mean((draws < edges[0]) | (draws > edges[-1]))
    tv = 0.5 * (np.abs(hist - quad).sum() + outside)
    record(10, tv < 0.05, f"total variation {tv:.4f} between 1e5-iteration chain and quadrature posterior "
                          f"(acceptance {chain.acceptance_rate:.2f})")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
