"""iqfi-lab: QFI spectra of qubit sensing protocols and their frequency
integrals, with closed-form references and bounds for cross-checking."""

from .signal_core import SignalParams, TimeInterval, theta, theta_vector
from .protocol import (
    Pulse,
    PulseSequence,
    TransverseDrive,
    PiecewiseGenerator,
    ContinuousControl,
    GhzProtocol,
    bloch_state,
    make_ramsey,
    make_pi_train,
    make_pi2_train,
    make_trotterized_gx,
    random_pulse_sequence,
    sequence_from_json,
    sequence_to_json,
    validate,
)
from .evolution import (
    GhzState,
    IntegrationError,
    SensorState,
    evolve_continuous,
    evolve_discrete,
    evolve_ghz,
    qfi,
    qfi_fd_oracle,
    qfi_vs_omega,
)
from .iqfi import (
    HaarResult,
    QfiSpectrum,
    QuadratureConfig,
    QuadratureNonConvergence,
    SweepPoint,
    SweepResult,
    cross_spectral_integral,
    fit_loglog_slope,
    haar_average_iqfi,
    integrate_iqfi,
    integrate_qfi_band,
    sweep_iqfi_vs_T,
)
from .bounds import (
    BoundReport,
    b0_linear_bound,
    ghz_scaling,
    n_pulse_bound,
    pi_train_closed_form,
    pi_train_qfi,
    ramsey_closed_form,
    report_bound,
    report_equality,
    rwa_iqfi_lower_bound,
    rwa_qfi,
    rwa_state,
)

__version__ = "0.1.0"
