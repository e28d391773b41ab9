"""Good-Turing estimation of total probabilities in the rare-symbol regime."""

from .errors import (
    ConsistencyError,
    DomainError,
    EmptyFrequencyClass,
    NormalizationError,
    QuadratureError,
    RegimeWarning,
    SchemaError,
    TooLarge,
    Unsupported,
    UnsupportedN,
)
from .estimator import GoodTuringVector, good_turing_per_symbol, good_turing_totals, missing_mass
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    TrialResult,
    brute_force_expectations,
    l1_distance,
    run_experiment,
    run_trial,
)
from .limits import (
    PoissonMixtureVector,
    azuma_bound_xi,
    azuma_bound_zeta,
    expected_xi,
    expected_zeta,
    g_binomial,
    g_poisson,
    poisson_mixture,
    truncation_bound,
)
from .sampling import (
    FrequencyTable,
    SampleString,
    TotalProbabilityVector,
    count_frequencies,
    sample_string,
    true_total_probabilities,
)
from .shadow import (
    DistributionSpec,
    Family,
    MixingDistribution,
    Shadow,
    explicit_family,
    family_dist_at,
    make_distribution,
    quantized_density_family,
    scaled_shadow,
    shadow_of,
    uniform,
    uniform_family,
)

__version__ = "0.1.0"
