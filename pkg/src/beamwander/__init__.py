"""Transmission statistics of free-space optical channels with beam wandering.

The package covers the aperture-clipping law of a deflected Gaussian beam,
the induced distribution of the transmission coefficient, its effect on
nonclassical light (moments, Bell tests, squeezing) and Monte Carlo
cross-checks of all of it.
"""

__version__ = "0.1.0"

from .aperture import (
    ApertureBeam,
    ApproxModel,
    approx_error_profile,
    fit_approx_model,
    r_of_t,
    transmission_approx,
    transmission_exact,
    transmission_exact_derivative_at_a,
)
from .bell import (
    PdcBellSetup,
    bell_parameter,
    bell_scan,
    c_coeffs,
    click_probability,
    click_probability_oracle,
    correlation,
)
from .channel import (
    MomentTable,
    coherent_moments,
    displaced_squeezed_fock,
    displaced_squeezed_moments,
    fock_moments,
    propagate_moments,
)
from .errors import (
    BeamWanderError,
    ConvergenceError,
    DegenerateGeometryError,
    DomainError,
    InfeasiblePostSelectionError,
    TruncationError,
    UndefinedCorrelationError,
)
from .mc_verify import McReport, run_suite, verify_exceedance, verify_moment, verify_postselection
from .pdtc import (
    ConstantChannel,
    Pdtc,
    WanderStats,
    combine_sigmas,
    sample_deflection,
    sigma_from_pointing,
    sigma_from_turbulence,
)
from .specfun import QuadratureSpec, integrate, incomplete_weber_q0, incomplete_weber_q0_scaled
from .squeezing import (
    PostSelectedPdtc,
    SqueezingInput,
    canonical_input,
    postselect,
    propagate_squeezing,
    squeezing_vs_exceedance_scan,
    tmin_of_exceedance,
)
