"""Command-line interface.

Every subcommand writes stable, line-oriented text to stdout and
diagnostics to stderr. Exit status is 0 on success, 1 on a usage error and
2 when an input fails validation or a check does not pass.
"""

import argparse
import sys
import warnings

from .data import read_csv, write_csv
from .errors import McdnError
from .graph import districts, format_graph, is_barren, read_graph, transform_artificial
from .inference import MhConfig, fit_marginals, kfold_evaluate, mh_copula, posterior_mean_model, pseudodata
from .model import McdnModel, check_markov, loglik, sample_ordinal
from .params import load_params, save_params

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _cmd_validate(args, out):
    g = read_graph(args.graph)
    ds = districts(g)
    out.write(f"vertices: {len(g.vertices)}\n")
    out.write(f"directed edges: {len(g.directed_edges)}\n")
    out.write(f"bidirected edges: {len(g.bidirected_edges)}\n")
    out.write(f"districts: {len(ds)}\n")
    out.write(f"non-barren districts: {sum(not is_barren(d) for d in ds)}\n")
    out.write("status: valid\n")
    return EXIT_OK


def _cmd_districts(args, out):
    g = read_graph(args.graph)
    for i, d in enumerate(districts(g), 1):
        out.write(f"district {i}: {' '.join(d.members)}\n")
        out.write(f"  parents: {' '.join(d.external_parents) or '-'}\n")
        out.write(f"  barren: {'yes' if is_barren(d) else 'no'}\n")
        for c in d.cliques:
            out.write(f"  clique: {' '.join(c)}\n")
    return EXIT_OK


def _cmd_transform(args, out):
    g = read_graph(args.graph)
    gt, stars = transform_artificial(g)
    text = format_graph(gt)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
        out.write(f"artificial vertices: {len(stars)}\n")
        out.write(f"wrote: {args.output}\n")
    else:
        out.write(text)
    return EXIT_OK


def _cmd_check_markov(args, out):
    g = read_graph(args.graph)
    model = load_params(args.params, g)
    report = check_markov(model, tol=args.tol, n_triples=args.triples, seed=args.seed)
    out.write(str(report) + "\n")
    return EXIT_OK if report.passed else EXIT_INVALID


def _cmd_loglik(args, out):
    g = read_graph(args.graph)
    model = load_params(args.params, g)
    data = read_csv(args.data, g)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        value = loglik(model, data, exclude_zero=args.exclude_zero)
    for w in caught:
        sys.stderr.write(f"warning: {w.message}\n")
    out.write(f"rows: {data.n}\n")
    out.write(f"loglik: {value!r}\n")
    return EXIT_OK


def _mh_config(args):
    burn = args.burn_in if args.burn_in is not None else args.mh_iters // 4
    return MhConfig(iterations=args.mh_iters, burn_in=min(burn, max(args.mh_iters - 1, 0)),
                    proposal_sd=args.proposal_sd, seed=args.seed)


def _cmd_fit(args, out):
    g = read_graph(args.graph)
    data = read_csv(args.data, g)
    marginals = fit_marginals(g, data, args.alpha)
    skeleton = McdnModel(g, marginals)
    chain = mh_copula(skeleton, pseudodata(g, marginals, data), _mh_config(args))
    model = posterior_mean_model(skeleton, chain)
    save_params(model, args.output)
    out.write(f"rows: {data.n}\n")
    out.write(f"samples: {len(chain)}\n")
    out.write(f"acceptance rate: {chain.acceptance_rate:.4f}\n")
    for clique, theta in zip(model.cliques, model.theta_vector()):
        out.write(f"theta {' '.join(clique)}: {float(theta)!r}\n")
    out.write(f"wrote: {args.output}\n")
    return EXIT_OK


def _cmd_sample(args, out):
    g = read_graph(args.graph)
    model = load_params(args.params, g)
    data = sample_ordinal(model, args.n, seed=args.seed)
    write_csv(data, args.output)
    out.write(f"rows: {data.n}\n")
    out.write(f"wrote: {args.output}\n")
    return EXIT_OK


def _cmd_evaluate(args, out):
    g = read_graph(args.graph)
    baseline = read_graph(args.baseline) if args.baseline else None
    data = read_csv(args.data, g)
    report = kfold_evaluate(g, baseline, data, args.K, _mh_config(args), alpha=args.alpha, seed=args.seed)
    out.write(report.to_sections())
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(report.to_csv())
    return EXIT_OK


def build_parser():
    p = _Parser(prog="mcdn", description="Copula mixed cumulative distribution networks over ADMGs.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("validate", help="check a graph file and summarise its structure")
    s.add_argument("graph")
    s.set_defaults(run=_cmd_validate)

    s = sub.add_parser("districts", help="list districts with their parents and cliques")
    s.add_argument("graph")
    s.set_defaults(run=_cmd_districts)

    s = sub.add_parser("transform", help="apply the artificial-vertex transform")
    s.add_argument("graph")
    s.add_argument("-o", "--output", help="write the transformed graph here instead of stdout")
    s.set_defaults(run=_cmd_transform)

    s = sub.add_parser("check-markov", help="test a model's joint against the graph's independences")
    s.add_argument("graph")
    s.add_argument("--params", required=True)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--triples", type=int, default=20, help="random m-separation queries to add")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(run=_cmd_check_markov)

    s = sub.add_parser("loglik", help="natural-log likelihood of a data file")
    s.add_argument("--graph", required=True)
    s.add_argument("--params", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--exclude-zero", action="store_true", help="drop zero-probability rows from the sum")
    s.set_defaults(run=_cmd_loglik)

    def mh_flags(s, iters):
        s.add_argument("--mh-iters", type=int, default=iters)
        s.add_argument("--burn-in", type=int, default=None, help="default: a quarter of --mh-iters")
        s.add_argument("--proposal-sd", type=float, default=0.5)
        s.add_argument("--alpha", type=float, default=1.0, help="pseudo-count for ordinal tables")
        s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("fit", help="fit marginals and copula parameters; save the posterior mean")
    s.add_argument("--graph", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("-o", "--output", required=True)
    mh_flags(s, 2000)
    s.set_defaults(run=_cmd_fit)

    s = sub.add_parser("sample", help="draw rows from an all-ordinal model")
    s.add_argument("--graph", required=True)
    s.add_argument("--params", required=True)
    s.add_argument("-n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(run=_cmd_sample)

    s = sub.add_parser("evaluate", help="K-fold millibit comparison against a DAG baseline")
    s.add_argument("--graph", required=True)
    s.add_argument("--baseline", help="DAG file; default: the graph without bi-directed edges")
    s.add_argument("--data", required=True)
    s.add_argument("-K", type=int, default=5)
    s.add_argument("--csv", help="also write per-fold numbers here")
    mh_flags(s, 1000)
    s.set_defaults(run=_cmd_evaluate)
    return p


def run(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"{e}\n")
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return int(e.code or 0)
    try:
        return args.run(args, out)
    except (McdnError, ValueError, OSError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INVALID


def main():
    sys.exit(run())
