"""Spline-based extraction of partitioned linear ODE models for aggregate
inverter Volt-Var dynamics, with a Backward-Euler simulator and an ARX
transfer-function baseline."""

from .bspline import BSplineBasis, eval_basis, make_uniform_basis
from .discrete import DiscreteModel, discretize, rk4_oracle, simulate, step
from .metrics import FitReport, gof, nrmse
from .ode_extraction import (
    PartitionedODEModel,
    PartitionSpec,
    TimeSmoothing,
    assign_partitions,
    compute_derivatives,
    extract_model,
    fit_partition_ode,
)
from .smoothing import (
    SmoothFit,
    evaluate,
    fit_least_squares,
    fit_penalized,
    penalty_matrix,
    select_lambda_ocv,
)
from .trace import Trace, read_trace, write_trace

__version__ = "0.1.0"
