"""chainforge: spectral design of symmetric spin-chain extensions.

Builds boundary extensions of a fixed central chain so that chosen
eigenvalues appear in the assembled spectrum, computes encodings that
achieve perfect (or near-perfect) state transfer between the end regions,
and evaluates the associated analytic error bounds.
"""

from .chains import (
    ChainSpec,
    JacobiMatrix,
    RegionPartition,
    SpectralDecomposition,
    build_hamiltonian,
    char_poly_coeffs,
    char_poly_eval,
    eigendecompose,
    fold_symmetric,
    load_chain,
    make_pst_chain,
    mirror_symmetric,
    pst_transfer_time,
    save_chain,
    uniform_chain,
)
from .errors import (
    ChainforgeError,
    DegenerateSystemError,
    EmptyNullSpaceError,
    IllPosedTargetError,
    InfeasibleExtensionError,
    InputError,
    NotMirrorSymmetricError,
    ReducibleChainError,
    VerificationError,
)
from .extensions import (
    ExtensionProblem,
    ExtensionSolution,
    RationalFunction,
    TargetValue,
    fieldfree_lift,
    fieldfree_reduce,
    interpolate_rational,
    load_problem,
    pst_target_spectrum,
    reconstruct_chain,
    solve_extension,
    target_values,
)
from .transfer import (
    EigenvalueClassification,
    EncodingResult,
    EncodingTimeBound,
    SingleExcitationState,
    TransferReport,
    WavepacketStats,
    best_creation_state,
    classify_eigenvalues,
    creation_spectrum,
    encoding_time_bound,
    endtoend_error_bound,
    fidelity_sweep,
    fmin_bound,
    null_space_encoding,
    propagate,
    transfer_fidelity,
    wavepacket_stats,
)

__version__ = "0.1.0"
