"""Coherence of quantum states with respect to general measurements (POVMs)."""

from .errors import CoherenceError, NumericalFailure, ValidationError
from .freeops import (
    KrausSet,
    apply_kraus_selective,
    apply_mpi,
    check_block_incoherent,
    check_strong_monotonicity,
    check_subspace_preserving,
    measurement_map,
    pi_kraus_from_naimark,
    sample_pi_channel,
)
from .measures import (
    MeasureReport,
    c_geo_block,
    c_geo_povm,
    c_l1_block,
    c_l1_povm,
    c_max_povm,
    c_rel_block,
    c_rel_povm,
    c_rob_block,
    c_rob_povm,
    pure_dual_witness,
)
from .naimark import (
    NaimarkExt,
    canonical_extension,
    embed,
    pad_extension,
    lift_kraus,
    prop2_kraus_lift,
    relate_extensions,
    rotate_extension,
    self_extension,
)
from .quantum import DensityMatrix, Povm, edelta, haar_pure, hs_mixed, random_povm, trine, z_basis
from .randomness import cq_post_state, purify, randomness_rate
from .search import OptResult, delta_sweep, extremal_coherence, scatter_experiment

__version__ = "0.1.0"
