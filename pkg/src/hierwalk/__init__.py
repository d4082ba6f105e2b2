"""Hierarchical random graphs, quantum walk traversal, classical baselines."""

from .core import (
    INVALID,
    EffectiveHamiltonian,
    EncodedOracle,
    HierarchicalGraph,
    SupergraphSpec,
    assemble_hierarchical,
    effective_hamiltonian,
    make_oracle,
    subspace_invariance_residual,
    validate_balanced,
)
from .ensemble1d import kappa_from_r, sample_factor_line, welded_tree_line
from .lieb import (
    HeightFields,
    LiebLattice,
    RatioAssignment,
    build_lieb,
    build_mountain_spec,
    check_gauge,
    compose_fluctuations,
    heights_to_graph,
    heights_to_ratios,
    mountain_ratios,
    ratios_to_heights,
    sample_bgff,
    sample_dimer_fluctuations,
    sample_square_ice,
)
from .qwalk import (
    choose_tau,
    crosscheck_full_vs_subspace,
    evolve_state,
    exit_probability_time_avg,
    traversal_protocol,
)
from .spectral import (
    SpectralSummary,
    ZeroMode,
    dos_window,
    even_chain_inverse,
    lieb_hamiltonian,
    lyapunov,
    snake_gap_bound,
    spectrum,
    zero_mode_lieb,
    zero_mode_line,
)
from .classical import (
    classical_traversal,
    classify_supervertices,
    estimate_p_reach,
    exploration_walk,
    nonbacktracking_walk,
    traversal_success_rate,
)
from .sparsify import (
    DenseHierarchical,
    bvn_decompose,
    bvn_sparsify,
    dense_from_effective,
    operator_distance,
    poisson_sparsify,
    required_degree,
)
from .experiments import ExperimentRecord, run_experiment

__version__ = "0.1.0"
