"""Self-avoiding lattice walk model of fixational eye drift.

Subpackages: :mod:`sawdrift.model` (dynamics and likelihood),
:mod:`sawdrift.inference` (priors, DREAM_ZS sampler, diagnostics),
plus :mod:`sawdrift.data_io`, :mod:`sawdrift.microsaccades`,
:mod:`sawdrift.statistics` and the :mod:`sawdrift.cli` pipeline.
"""
__version__ = "0.1.0"

from . import errors  # noqa: E402
from .model import LatticeTrajectory, ModelParams, ModelVariant, log_likelihood, simulate  # noqa: E402

__all__ = ["LatticeTrajectory", "ModelParams", "ModelVariant", "errors", "log_likelihood",
           "simulate", "__version__"]
