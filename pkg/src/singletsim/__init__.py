"""Spin squeezing of unpolarized atomic ensembles by QND measurement.

Gaussian covariance-matrix simulator for sequential collective-spin
measurements driving an ensemble toward a macroscopic singlet state, with
photon losses, feedback or post-selection, an exact integral model for the
up/down product state, and a small-system brute-force oracle.
"""

__version__ = "1.0.0"

from .ensemble import (
    EnsembleParams,
    GaussianState,
    PulseParams,
    SqueezingReport,
    default_q,
    field_sensitivity,
    fisher_upper_bound,
    make_completely_mixed,
    make_product_updown,
    xi_squared,
)
from .exact import (
    KernelG,
    OracleResult,
    TwoGroupState,
    brute_force_oracle,
    fit_kernel_width,
    gaussian_reference_var,
    map_higher_spin,
    var_jx_exact,
    xi_exact,
)
from .postselect import (
    PostSelectionRule,
    apply_postselection,
    invert_for_q,
    make_rule,
    truncated_integral,
)
from .qnd import (
    LossChannel,
    MeasurementSchedule,
    Segment,
    Trajectory,
    apply_losses,
    approximation_terms,
    eta_from_kappa,
    evolve,
    feedback_reset,
    fresh_light,
    make_schedule,
    measure_sy,
    rotate_to_axis,
    run_sequence,
)

__all__ = [name for name in dir() if not name.startswith("_")]
