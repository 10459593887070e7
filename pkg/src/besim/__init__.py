"""besim: periodic-box pseudo-spectral solver for the coupled
incompressible-flow / Q-tensor system, with the diagnostics needed to
verify its energy balance, cancellation identities, Serrin-norm criteria,
difference-functional behavior, and small-data decay numerically."""

from .checkpoint import CheckpointHeader, read_checkpoint, write_checkpoint
from .config import IcSpec, RunConfig, load_config, parse_config
from .diagnostics import (
    CancellationResiduals,
    EnergyBreakdown,
    SerrinAccumulator,
    SerrinSpec,
    SobolevEnergies,
    TimeSeriesReport,
    cancellation_probe,
    energy_breakdown,
    energy_equality_residual,
    energy_equality_residual_series,
    lp_norm,
    serrin_norm,
    sobolev_energies,
    total_free_energy,
    variational_consistency,
)
from .dynamics import rhs_full
from .errors import (
    BesimError,
    CheckpointFormatError,
    ConfigurationError,
    DimensionError,
    InputError,
    NumericalStateError,
    ObserverError,
    PicardDivergenceError,
    StepRejectedError,
)
from .experiments import (
    DecayReport,
    EqualityStudy,
    GronwallCheck,
    TwinRunReport,
    difference_functional,
    equality_convergence_study,
    gronwall_envelope_check,
    gronwall_integrand,
    largest_clean_amplitude,
    small_data_decay,
    twin_run,
)
from .fields import (
    QTensorField,
    StateSnapshot,
    VelocityField,
    dealias_state,
    project_constraints,
    random_solenoidal_velocity,
    random_traceless_q,
    uniaxial_q,
    zero_state,
)
from .grid import SpectralGrid, make_grid
from .params import ModelParams
from .spectral import (
    SpectralField,
    dealias,
    divergence,
    forward,
    gradient,
    helmholtz_solve,
    inverse,
    laplacian,
    leray_project,
    quad_integral,
)
from .stepping import (
    PicardTrace,
    StepConfig,
    integrate,
    step_imex,
    step_imex_picard,
    step_rk4,
)

__version__ = "0.1.0"
