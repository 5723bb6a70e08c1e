"""Inference for the reciprocity parameter of the p1 directed-network model
by the logarithmic cycle-count ratio.

Modules
-------
model        parameters, dyad probabilities and samplers
graph        dyad-state graph storage and edge-list I/O
cycles       cycle-pattern algebra, oracle counts and fast trace counts
inference    estimator, variance estimates, tests, population diagnostics
mle          maximum-likelihood baseline and likelihood-ratio test
experiments  seeded Monte Carlo harness
results      versioned result documents with provenance
"""

from .errors import CapacityError, DomainError, LcrError, ParseError
from .graph import DirectedGraph, from_edge_list, read_edge_list, write_edge_list
from .model import (
    DyadDistribution,
    MisspecParams,
    ModelParams,
    PlrQuantities,
    dyad_distribution,
    omega_entry,
    omega_tilde_entry,
    plr,
    sample,
    sample_misspecified,
)
from .cycles import (
    DEFAULT_PAIR,
    PAIRS_M4,
    CancellationPair,
    CycleMonomial,
    CyclePattern,
    brute_force_count,
    expected_count,
    fast_count,
    fast_count_pair,
    get_pair,
    is_cancellation_pair,
    monomial,
    pair_search,
)
from .inference import (
    LcrResult,
    TestResult,
    TheoryDiagnostics,
    VarianceEstimates,
    estimate,
    rst_hat,
    test,
    theory_diagnostics,
    variance_hat,
)
from .mle import MleFit, existence_check, fit as fit_mle, lrt

__version__ = "0.1.0"
