"""Copula mixed cumulative distribution networks over acyclic directed mixed graphs."""

from .data import Dataset, read_csv, write_csv
from .errors import (
    CycleError,
    DataError,
    GraphError,
    McdnError,
    NotATreeError,
    NotBarrenError,
    NotDIncreasingError,
    ParameterFileError,
    UnsupportedConfigurationError,
)
from .factors import FrankCopula, GaussianMarginal, OrdinalMarginal, ProductCopula, district_cdf
from .graph import (
    Admg,
    District,
    IndependenceConstraint,
    continuous,
    district_of,
    districts,
    is_barren,
    m_separated,
    markov_blanket,
    maximal_cliques,
    ordered_local_constraints,
    ordinal,
    parse_graph,
    read_graph,
    topological_order,
    transform_artificial,
    write_graph,
)
from .inference import (
    EvalReport,
    MhConfig,
    PosteriorSample,
    delta_dag,
    fit_marginals,
    kfold_evaluate,
    mh_copula,
    posterior_predictive,
    pseudodata,
)
from .model import McdnModel, check_markov, dense_pmf, joint_prob, loglik, sample_ordinal, tree_pmf
from .moebius import MoebiusTable, cdn_to_moebius, moebius_to_pmf, verify_worked_identity
from .params import dump_params, load_params, parse_params, save_params

__version__ = "0.1.0"
