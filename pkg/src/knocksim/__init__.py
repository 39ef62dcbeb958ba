"""Statistical engine-knock simulator.

Learns the conditional density of cycle-to-cycle knock intensity over
engine operating conditions with a mixture density network, generates
cycle sequences from it by accept-reject sampling, and validates the
distributions against held-out data.  Hot numeric kernels run under a JIT
when available, with a pure-vectorized fallback (see ``knocksim._backend``).
"""

from ._backend import BACKEND
from .core import (
    Dataset,
    KnockRecord,
    Normalizer,
    OperatingPoint,
    fit_normalizer,
    split_leave_one_out,
)
from .mdn import LossHistory, MdnModel, TrainingConfig, forward, gradient, nll, predict_cdf, train
from .mixture import (
    AmiseInputs,
    MixtureParams,
    amise,
    amise_optimal_delta,
    cdf,
    density_sup_bound,
    em_fit,
    log_pdf,
    pdf,
    sample_ancestral,
)
from .rng import RandomStream, stream_id_for
from .sampler import (
    Envelope,
    Schedule,
    SimulatedSeries,
    accept_reject,
    build_envelope,
    simulate_steady,
    simulate_transient,
)
from .stats import (
    Ecdf,
    GroupErrorSummary,
    Histogram,
    autocorrelation,
    ecdf,
    fitting_error,
    group_error_summary,
    ks_statistic,
    rel_freq_histogram,
    white_noise_band,
)
from .synth import GridSpec, GroundTruthFamily, default_grid, generate_dataset, true_cdf, true_params
from .validate import (
    ConditionErrors,
    EmSweep,
    TransientReport,
    ValidationReport,
    kernel_sweep_em,
    steady_validate,
    transient_validate,
)

__version__ = "0.1.0"
