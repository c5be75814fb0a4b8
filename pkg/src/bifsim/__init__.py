"""Two-channel measurement bifurcation simulator.

Closed-form final-state density matrices for a two-level system coupled to
a chain of random scattering subsystems, plus seeded importance-weighted
Monte Carlo ensembles over the chain's initial configurations, the
return-to-initial-state resummation with its extended three-state matrix,
and a CSV-emitting command line.
"""

__version__ = "0.1.0"

from .ensemble import (
    EnsembleSummary,
    EtaDistribution,
    HistogramDensity,
    SamplingProposal,
    Stat,
    TrialRealization,
    TrialTable,
    record_trajectory,
    resample_final_states,
    run_ensemble,
    run_trial,
    run_trials,
    sample_eta_sequence,
    summarize_trials,
    weighted_histogram,
    weighted_mode_locations,
)
from .errors import (
    BifsimError,
    ConfigurationError,
    DegenerateReductionError,
    EnsembleError,
    SaturationError,
    StepDomainError,
)
from .model import (
    AggregateY,
    BilinearForms,
    ChannelAmplitudes,
    DensityMatrix2,
    Q_density,
    QubitState,
    StepSchedule,
    bilinears_from_Y,
    log_w_hat,
    mean_final_rho,
    q_density,
    rho_final,
    rho_from_bilinears,
    rho_from_log_bilinears,
    rho_peak,
    step_amplitudes,
    step_bilinears,
    w_hat,
    xi_total,
)
from .perturbation import (
    ExtendedDensityMatrix3,
    reduce_strong_coupling,
    rho_bar_3x3,
    scatter_probability,
    stay_probability,
    stay_probability_partial_sum,
)

__all__ = [
    "__version__",
    "AggregateY",
    "BifsimError",
    "BilinearForms",
    "ChannelAmplitudes",
    "ConfigurationError",
    "DegenerateReductionError",
    "DensityMatrix2",
    "EnsembleError",
    "EnsembleSummary",
    "EtaDistribution",
    "ExtendedDensityMatrix3",
    "HistogramDensity",
    "Q_density",
    "QubitState",
    "SamplingProposal",
    "SaturationError",
    "Stat",
    "StepDomainError",
    "StepSchedule",
    "TrialRealization",
    "TrialTable",
    "bilinears_from_Y",
    "log_w_hat",
    "mean_final_rho",
    "q_density",
    "record_trajectory",
    "reduce_strong_coupling",
    "resample_final_states",
    "rho_bar_3x3",
    "rho_final",
    "rho_from_bilinears",
    "rho_from_log_bilinears",
    "rho_peak",
    "run_ensemble",
    "run_trial",
    "run_trials",
    "sample_eta_sequence",
    "scatter_probability",
    "stay_probability",
    "stay_probability_partial_sum",
    "step_amplitudes",
    "step_bilinears",
    "summarize_trials",
    "w_hat",
    "weighted_histogram",
    "weighted_mode_locations",
    "xi_total",
]
