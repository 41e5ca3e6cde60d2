"""dynrecon: reconstruct dynamical systems from time series and verify
the error laws governing direct and iterative forecasts.

The package covers the full pipeline: reference systems and
measurements (:mod:`dynrecon.systems`), delay/reservoir embeddings
(:mod:`dynrecon.embedding`), feedback-function fits
(:mod:`dynrecon.learning`), forecast error curves and the
autocorrelation bound (:mod:`dynrecon.forecast`), matrix cocycles and
Lyapunov/stability analysis (:mod:`dynrecon.cocycle`), Ulam/Koopman
matrices (:mod:`dynrecon.markov`), and reproducible experiment drivers
(:mod:`dynrecon.experiments`, :mod:`dynrecon.cli`).
"""

__version__ = "0.1.0"

from .systems import (  # noqa: F401
    SystemSpec,
    MeasurementMap,
    Trajectory,
    IntegrationError,
    golden_rotation,
    step_torus,
    step_lorenz63,
    step_l63rot,
    step,
    jacobian,
    variational_step,
    generate_trajectory,
)
from .embedding import (  # noqa: F401
    EmbeddedSeries,
    DelayEmbedder,
    ReservoirEmbedder,
    delay_embed,
    delay_g,
    reservoir_init,
    reservoir_g,
    reservoir_drive,
)
from .learning import (  # noqa: F401
    AffineSpace,
    FourierSpace,
    GaussianKernelSpace,
    FeedbackModel,
    FitError,
    TradeoffScan,
    fit_feedback,
    fit_feedback_multi,
    predict,
    tradeoff_scan,
)
from .forecast import (  # noqa: F401
    ReconstructedMap,
    ErrorCurve,
    AutocorrelationCurve,
    lift,
    iterate_reconstructed,
    error_iterative,
    error_direct,
    autocorrelation,
    direct_bound,
    plateau_after_growth,
    growth_rate,
    unitarity_deviation,
)
from .cocycle import (  # noqa: F401
    CocycleBundle,
    DegenerateCocycleError,
    FluctuationSeries,
    LyapunovEstimate,
    StabilityReport,
    cocycle_product,
    lyapunov_spectrum,
    lyapunov_spectrum_system,
    build_bundle,
    perturbed_iterate,
    fluctuations,
    stability_gap,
    sensitivity_constant,
)
from .markov import (  # noqa: F401
    BoxPartition,
    TransitionMatrix,
    StationaryDistribution,
    build_partition,
    transition_matrix,
    empirical_koopman_matrix,
    koopman_to_markov,
    stationary_distribution,
    simulate_markov,
    reconstruct_law,
    mixing_diagnostic,
    write_coo,
    read_coo,
)
