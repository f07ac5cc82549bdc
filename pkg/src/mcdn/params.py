"""Key-value text files for model parameters, Moebius tables and reports.

A file is a list of sections; each section header names a kind and its
arguments, and holds ``key = value`` lines::

    # mcdn parameters
    [marginal X2]
    kind = ordinal
    parents = X4
    eta.0 = 0.25 0.75
    eta.1 = 0.6 0.4

    [marginal Y]
    kind = continuous
    parents = X2
    basis = linear
    weights = 0.5 1.25
    variance = 2.0

    [clique X1 X2]
    theta = 4.0

Ordinal tables list one probability vector per parent configuration; the
key suffix gives the parent levels in parent order. Floats are written with
``repr`` so that every value reads back bit for bit.
"""

import itertools

import numpy as np

from .errors import ParameterFileError
from .factors import GaussianMarginal, OrdinalMarginal


class Section:
    def __init__(self, kind, args, line):
        self.kind = kind
        self.args = tuple(args)
        self.line = line
        self.entries = {}

    def get(self, key, default=None):
        return self.entries[key][0] if key in self.entries else default

    def require(self, key):
        if key not in self.entries:
            raise ParameterFileError(f"[{self.kind} {' '.join(self.args)}] lacks '{key}'", self.line)
        return self.entries[key][0]

    def line_of(self, key):
        return self.entries.get(key, (None, self.line))[1]


def parse_sections(text):
    sections = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParameterFileError("unterminated section header", lineno)
            tok = line[1:-1].split()
            if not tok:
                raise ParameterFileError("empty section header", lineno)
            current = Section(tok[0], tok[1:], lineno)
            sections.append(current)
            continue
        if "=" not in line:
            raise ParameterFileError("expected 'key = value'", lineno)
        if current is None:
            raise ParameterFileError("entry before any section header", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key in current.entries:
            raise ParameterFileError(f"duplicate key {key!r}", lineno)
        current.entries[key] = (value, lineno)
    return sections


def format_sections(sections):
    """``sections`` is a list of (header, [(key, value), ...])."""
    out = []
    for header, entries in sections:
        out.append(f"[{header}]")
        out.extend(f"{k} = {v}" for k, v in entries)
        out.append("")
    return "\n".join(out)


def _floats(text, line):
    try:
        return [float(t) for t in text.split()]
    except ValueError:
        raise ParameterFileError(f"expected numbers, got {text!r}", line) from None


def _fmt(values):
    return " ".join(repr(float(v)) for v in values)


def dump_params(model) -> str:
    sections = []
    for v in model.vertices:
        m = model.marginals[v]
        entries = [("parents", " ".join(m.parents) or "-")]
        if isinstance(m, OrdinalMarginal):
            entries.insert(0, ("kind", "ordinal"))
            entries.append(("alpha", repr(m.alpha)))
            flat = m.table.reshape(-1, m.cardinality)
            configs = itertools.product(*[range(c) for c in m.parent_cards])
            for row, conf in zip(flat, configs):
                key = "eta" + "".join(f".{c}" for c in conf)
                entries.append((key, _fmt(row)))
        else:
            entries.insert(0, ("kind", "continuous"))
            entries += [("basis", m.basis), ("weights", _fmt(m.weights)), ("variance", repr(m.variance))]
        sections.append((f"marginal {v}", entries))
    for clique, theta in zip(model.cliques, model.theta_vector()):
        sections.append((f"clique {' '.join(clique)}", [("theta", repr(float(theta)))]))
    return "# mcdn parameters\n" + format_sections(sections)


def parse_params(text, graph):
    """Build an :class:`~mcdn.model.McdnModel` for ``graph`` from parameter text."""
    from .model import McdnModel

    marginals = {}
    thetas = {}
    for sec in parse_sections(text):
        if sec.kind == "marginal":
            if len(sec.args) != 1:
                raise ParameterFileError("expected [marginal <vertex>]", sec.line)
            v = sec.args[0]
            if v not in graph:
                raise ParameterFileError(f"unknown vertex {v!r}", sec.line)
            if v in marginals:
                raise ParameterFileError(f"second marginal for {v!r}", sec.line)
            parents = sec.require("parents").split()
            if parents == ["-"]:
                parents = []
            for p in parents:
                if p not in graph:
                    raise ParameterFileError(f"unknown parent {p!r}", sec.line_of("parents"))
            kind = sec.require("kind")
            try:
                if kind == "ordinal":
                    cards = [graph.kind(p).cardinality for p in parents]
                    if any(c is None for c in cards):
                        raise ParameterFileError(f"ordinal {v!r} has a continuous parent", sec.line_of("parents"))
                    rows = []
                    for conf in itertools.product(*[range(c) for c in cards]):
                        key = "eta" + "".join(f".{c}" for c in conf)
                        rows.append(_floats(sec.require(key), sec.line_of(key)))
                    expected = {"eta" + "".join(f".{c}" for c in conf) for conf in itertools.product(*[range(c) for c in cards])}
                    for key in sec.entries:
                        if key.startswith("eta") and key not in expected:
                            raise ParameterFileError(f"unexpected table row {key!r}", sec.line_of(key))
                    alpha = float(sec.get("alpha", "0"))
                    k = len(rows[0])
                    if any(len(r) != k for r in rows):
                        raise ParameterFileError(f"{v!r}: table rows differ in length", sec.line)
                    marginals[v] = OrdinalMarginal(v, parents, np.array(rows).reshape(tuple(cards) + (k,)), cards, alpha)
                elif kind == "continuous":
                    weights = _floats(sec.require("weights"), sec.line_of("weights"))
                    variance = _floats(sec.require("variance"), sec.line_of("variance"))
                    if len(variance) != 1:
                        raise ParameterFileError("variance takes one number", sec.line_of("variance"))
                    marginals[v] = GaussianMarginal(v, parents, weights, variance[0], sec.get("basis", "linear"))
                else:
                    raise ParameterFileError(f"unknown kind {kind!r}", sec.line_of("kind"))
            except ParameterFileError:
                raise
            except ValueError as e:
                raise ParameterFileError(str(e), sec.line) from None
        elif sec.kind == "clique":
            theta = _floats(sec.require("theta"), sec.line_of("theta"))
            if len(theta) != 1:
                raise ParameterFileError("theta takes one number", sec.line_of("theta"))
            thetas[tuple(sec.args)] = (theta[0], sec.line)
        else:
            raise ParameterFileError(f"unknown section kind {sec.kind!r}", sec.line)
    missing = [v for v in graph.vertices if v not in marginals]
    if missing:
        raise ParameterFileError(f"no marginal for {missing}")
    try:
        model = McdnModel(graph, marginals)
    except ValueError as e:
        raise ParameterFileError(str(e)) from None
    known = {tuple(c) for c in model.cliques}
    for clique, (_, line) in thetas.items():
        if clique not in known:
            raise ParameterFileError(f"{' '.join(clique)} is not a clique of the graph", line)
    values = []
    for c in model.cliques:
        if tuple(c) not in thetas:
            raise ParameterFileError(f"no theta for clique {' '.join(c)}")
        values.append(thetas[tuple(c)][0])
    try:
        return model.with_thetas(values)
    except ValueError as e:
        raise ParameterFileError(str(e)) from None


def save_params(model, path):
    with open(path, "w") as fh:
        fh.write(dump_params(model))


def load_params(path, graph):
    with open(path) as fh:
        return parse_params(fh.read(), graph)


def dump_moebius(table) -> str:
    entries = [("q " + " ".join(a), repr(val)) for a, val in table.items()]
    return "# mcdn moebius table\n" + format_sections([("moebius", entries)])


def parse_moebius(text, graph):
    from .moebius import MoebiusTable

    q = {}
    for sec in parse_sections(text):
        if sec.kind != "moebius":
            raise ParameterFileError(f"unknown section kind {sec.kind!r}", sec.line)
        for key, (value, line) in sec.entries.items():
            tok = key.split()
            if not tok or tok[0] != "q":
                raise ParameterFileError(f"unexpected key {key!r}", line)
            vals = _floats(value, line)
            if len(vals) != 1:
                raise ParameterFileError("one value per set", line)
            q[frozenset(tok[1:])] = vals[0]
    return MoebiusTable(graph, q)
