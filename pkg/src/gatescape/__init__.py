"""Control landscapes for two-qubit gate generation under coherent and incoherent control."""

from .gradients import GradOptions, dexp_integral, fd_gradient, fd_hessian, grad_channel, grad_objective
from .landscape import LandscapeConfig, detect_clusters, epsilon_sweep, histogram, run_landscape, sample_initial
from .objectives import ObjectiveKind, evaluate, j_grk_sd, j_grk_sp, j_sd
from .optimize import AnnealParams, GrapeParams, RunRecord, anneal_run, ingrape_run
from .propagator import (
    ControlGrid,
    ControlVector,
    ParamVector,
    matrix_exp,
    ode_oracle,
    reference_guess,
    propagate_channel,
    propagate_state,
)
from .qmodel import (
    SystemKind,
    SystemSpec,
    build_generators,
    cnot,
    cphase,
    cz,
    derealify,
    gate_channel_matrix,
    realify,
    weighted_channel_inner,
    weighted_inner,
)

__version__ = "0.1.0"
