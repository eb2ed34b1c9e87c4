"""Multi-boson scattering with partially distinguishable particles."""

__version__ = "0.1.0"

from .analysis import (
    EventDistribution,
    MixtureFit,
    SweepRecord,
    best_mixture,
    bound_check,
    bunching_ratio,
    distribution,
    fourier_scan,
    random_scan,
    sample_events,
    total_variation,
    transition_sweep,
)
from .distinguishability import (
    InternalStateSet,
    MixedEnsemble,
    canonical_family,
    gram_matrix,
    gram_schmidt,
    j_function,
    validate_distinguishability,
    w_id,
)
from .errors import (
    BosonPermError,
    CapacityError,
    DegeneracyError,
    DimensionError,
    NumericalConsistencyError,
    ValidationError,
)
from .permanent import permanent, tensor_probability_bruteforce, tensor_probability_ryser
from .probability import (
    ScatteringInstance,
    prob_dist,
    prob_id,
    prob_mixed,
    prob_partial,
    prob_via_orthonormalization,
)
from .scattering import (
    effective_matrix,
    enumerate_events,
    fourier_unitary,
    haar_random_unitary,
    make_rng,
    mode_assignment,
)
