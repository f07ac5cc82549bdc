"""Small named graphs used by the worked examples, tests and the CLI."""

from .graph import Admg


def two_districts(kinds=None):
    """X1<->X2, X3<->X4 with X4->X2 and X1->X3: two barren districts."""
    return Admg(
        ["X1", "X2", "X3", "X4"],
        [("X4", "X2"), ("X1", "X3")],
        [("X1", "X2"), ("X3", "X4")],
        kinds,
    )


def internal_parents(kinds=None):
    """District {X1, X2, X3} with internal directed edges and external parent X4."""
    return Admg(
        ["X1", "X2", "X3", "X4"],
        [("X1", "X3"), ("X4", "X2")],
        [("X1", "X2"), ("X2", "X3")],
        kinds,
    )


def single_district(kinds=None):
    """Five vertices in one district, with X2->X1, X4->X2 and X5->X3."""
    return Admg(
        ["X1", "X2", "X3", "X4", "X5"],
        [("X2", "X1"), ("X4", "X2"), ("X5", "X3")],
        [("X1", "X3"), ("X2", "X3"), ("X3", "X4"), ("X4", "X5")],
        kinds,
    )


def bidirected_chain(n=3, kinds=None):
    names = [f"X{i}" for i in range(1, n + 1)]
    return Admg(names, (), list(zip(names, names[1:])), kinds)


GRAPHS = {
    "two-districts": two_districts,
    "internal-parents": internal_parents,
    "single-district": single_district,
    "bidirected-chain": bidirected_chain,
}
