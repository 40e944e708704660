"""Secret-key-rate bounds and channel-noise thresholds for DV and CV QKD.

Discrete-variable (BB84, six-state) and continuous-variable (squeezed-state,
GG02) protocols are compared under one channel model: the signal couples to a
thermal reservoir with transmittance T and mean noise photon number mu per
pulse.  The `analysis` module solves the tolerable-noise thresholds and
source-quality requirements; the `qkdnoise` CLI turns them into CSV tables and
figures.
"""

from .analysis import (
    CurveRequest,
    CurveResult,
    ThresholdResult,
    cv_cutoff_transmittance,
    dark_count_bound,
    dark_count_threshold,
    dv_template,
    generalized_template,
    gg02_template,
    infinite_squeezing_template,
    key_rate,
    key_rate_curve,
    log_grid,
    min_p_to_beat_cv,
    min_source_p,
    min_squeezing,
    mu_max,
    mu_max_curve,
    ratio_curve,
    region_map,
    with_channel,
)
from .dv_security import (
    BB84,
    BINARY,
    PNR,
    SIX_STATE,
    DvObservables,
    DvSetup,
    SimulationResult,
    asymptotic_mu_max_dv,
    eve_info_bb84,
    eve_info_sixstate,
    key_rate_dv,
    observables,
    observables_binary,
    observables_pnr,
    qber_threshold,
    secret_fraction,
    simulate_dv,
)
from .gaussian_cv import (
    GENERALIZED,
    GG02,
    SQUEEZED,
    CvRateBreakdown,
    CvSetup,
    DegenerateMeasurementError,
    TwoModeCM,
    UnphysicalStateError,
    asymptotic_mu_max_cv,
    build_cm,
    condition_on_homodyne,
    holevo_bound,
    key_rate_cv,
    mutual_info_cv,
    symplectic_eigenvalues,
)
from .numerics import (
    BracketedFunction,
    ConvergenceError,
    NoSignChangeError,
    SolverConfig,
    binary_entropy,
    bosonic_entropy,
    find_root,
    lambert_w_minus1,
    maximize_scalar,
    six_state_error_entropy,
)
from .photon_stats import (
    POISSON,
    THERMAL,
    ArrivalProbabilities,
    ChannelModel,
    NoiseSource,
    arrival_probabilities,
    arrived_noise_pmf,
    pmf,
    reflected_noise,
    thin,
    truncation_cutoff,
)

__version__ = "0.1.0"
