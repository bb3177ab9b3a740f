"""Sparse generalized eigenvalue estimation by truncated Rayleigh flow.

Public surface: dense symmetric linear algebra (linalg), the Rifle solver
(solver), exact enumeration oracles and perturbation diagnostics (oracle),
FDA/CCA/SIR pencil builders (models), seeded scenario generators (simdata),
and the experiment harness (bench).
"""

__version__ = "0.1.0"

from .errors import (
    AllSupportsSingular,
    DegenerateClass,
    DegenerateDenominator,
    DimMismatch,
    EmptySlice,
    IndexOutOfRange,
    Indivisible,
    NoConvergence,
    NonFiniteIterate,
    NotPositiveDefinite,
    ParseError,
    RifleError,
    TooFewSamples,
    TooLarge,
    TooSmall,
    ZeroGap,
    ZeroMatrix,
    ZeroUpdate,
    ZeroVector,
)
from .linalg import (
    CholeskyFactor,
    EigenDecomposition,
    IndexSet,
    MatrixPair,
    SymMatrix,
    cholesky,
    embed,
    gen_eig,
    identity,
    quadratic_form,
    restrict,
    restrict_pair,
    spectral_norm,
    sym_eig,
)
from .solver import (
    RifleConfig,
    RifleResult,
    WarmStartResult,
    WarmStartSchedule,
    default_schedule,
    default_step_size,
    rayleigh_quotient,
    rifle,
    rifle_step,
    rifle_warm_start,
    truncate_top_k,
)
from .oracle import (
    RestrictedGevec,
    SparseGEPSolution,
    TheoremQuantities,
    chordal_distance,
    cr_inf,
    crawford_number,
    eigengap,
    epsilon_k,
    exhaustive_sparse_gep,
    lemma3_bound,
    restricted_leading_gevec,
    sparse_spectral_norm,
    theorem1_quantities,
)
from .models import (
    GEPProblem,
    LabeledDataset,
    PairedDataset,
    ProblemMeta,
    SlicedDataset,
    SplitDirections,
    cca_build,
    cca_split,
    direction_error,
    fda_build,
    fda_classify,
    sir_build,
)
from .rng import RngState, rng_substream
from .simdata import (
    ScenarioCCA,
    ScenarioFDA,
    block_ar_cov,
    dump_scenario,
    gen_cca,
    gen_fda_binary,
    gen_fda_multiclass,
    gen_planted_gep,
    sample_mvn,
    write_labels_csv,
    write_matrix_csv,
)
from .bench import (
    CVResult,
    ExperimentReport,
    ExperimentSpec,
    cross_validate_k,
    load_pair_csv,
    read_matrix_csv,
    run_experiment,
)
