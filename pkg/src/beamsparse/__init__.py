"""Band-sparse MIMO-OFDM channel estimation in the delay-beamspace domain."""

from .channels import (
    ArrayGeometry,
    ChannelTensor,
    MeasurementSet,
    OfdmGrid,
    PathSet,
    generate_channel,
    generate_paths,
    sample_measurements,
    synthesize_channel,
)
from .kernels import AxisKernel, DelayBeamGrid, LowRankFactors, ModulationVectors
from .operators import CoefficientState, FastForwardOperator, build_operator
from .solver import (
    DivergenceError,
    RegularizerSpec,
    SolverConfig,
    SupportSet,
    debias,
    descent_step,
    estimate_channel,
    extract_support,
    group_soft_threshold,
    solve_sparse,
)
from .unfolded import UnfoldedParams, dd_estimate, load_params, remajorize, save_params

__version__ = "0.1.0"
