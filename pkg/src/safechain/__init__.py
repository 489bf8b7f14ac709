"""Safety filtering for perturbed strict-feedback systems.

The pipeline: transform a strict-feedback system into an integrator chain,
estimate the residual disturbances with finite-time observers, lift the base
barrier through a time-varying cascade to relative degree one, and minimally
correct the nominal input with a closed-form QP so the safe set stays
forward invariant.
"""

from ._kernels import BACKEND as kernel_backend
from .barrier import (
    BarrierCascade,
    CascadeEvaluation,
    cascade_eval,
    initial_gain_bounds,
    select_gains,
    select_initial_gain,
    smooth_bound,
)
from .errors import (
    AssumptionViolation,
    ConfigError,
    GainConditionWarning,
    InfeasibleConstraint,
    NumericError,
    SafechainError,
    SingularInputMatrix,
    UnsafeInitialState,
)
from .gains import (
    GainFunction,
    simpson_power_integral,
    upsilon_eval,
    upsilon_power_derivative,
    upsilon_power_integral,
)
from .observer import ObserverChannel, observer_gain_check, observer_init, observer_step
from .safety_filter import FilterResult, dorcbf_margin, qp_filter, worst_case_margin
from .sim import (
    BarrierParams,
    ObserverParams,
    SimConfig,
    SimulationTrace,
    rk4_step,
    run_closed_loop,
)
from .strict_feedback import (
    DisturbanceSignal,
    StrictFeedbackModel,
    beta_consistency_check,
    from_transformed,
    get_model,
    input_from_virtual,
    nominal_to_virtual,
    original_rhs,
    residual_disturbance,
    to_transformed,
)

__version__ = "0.1.0"
