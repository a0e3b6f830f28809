"""The self-avoiding lattice walk: parameters, single-step operations,
simulation and sequential likelihood."""
from .dynamics import (LikelihoodResult, SimulationResult, log_likelihood, replay,
                       simulate)
from .field import (FLOOR, ActivationField, SelectionMap, add_trace_activation,
                    build_potential, decay_activation, ellipse_sites, linear_select,
                    potential_value, selection_map, step, stepping_kernel,
                    truncation_mass)
from .params import A0, FREE_PARAMS, LatticeTrajectory, ModelParams, ModelVariant

__all__ = [
    "A0", "FLOOR", "FREE_PARAMS", "ActivationField", "LatticeTrajectory",
    "LikelihoodResult", "ModelParams", "ModelVariant", "SelectionMap",
    "SimulationResult", "add_trace_activation", "build_potential", "decay_activation",
    "ellipse_sites", "linear_select", "log_likelihood", "potential_value", "replay",
    "selection_map", "simulate", "step", "stepping_kernel", "truncation_mass",
]
