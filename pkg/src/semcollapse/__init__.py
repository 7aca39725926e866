"""Anchor alignment on Riemannian manifolds, entropy collapse, and a collapse benchmark for token models."""

from .alignment import (
    Anchor,
    Constant,
    DeterministicDescent,
    NoiseSpec,
    RobbinsMonro,
    SmoothFlow,
    StochasticDescent,
    convergence_report,
    flow_step,
    global_loss,
    lyapunov_value,
    riemannian_gradient,
    run_alignment,
    run_ensemble,
    sgd_step,
)
from .entropy import (
    Ensemble,
    EntropyEstimate,
    discrete_entropy,
    ensemble_conditional_entropy,
    gaussian_differential_entropy,
    mutual_information,
)
from .errors import BackendError, DegenerateFitError, DomainError, InputError, SemCollapseError, UndefinedLogError
from .manifold import Euclidean, Manifold, PoincareBall, Sphere, make_manifold

__version__ = "0.1.0"

__all__ = [
    "Anchor", "BackendError", "Constant", "DegenerateFitError", "DeterministicDescent", "DomainError",
    "Ensemble", "EntropyEstimate", "Euclidean", "InputError", "Manifold", "NoiseSpec", "PoincareBall",
    "RobbinsMonro", "SemCollapseError", "SmoothFlow", "Sphere", "StochasticDescent", "UndefinedLogError",
    "convergence_report", "discrete_entropy", "ensemble_conditional_entropy", "flow_step",
    "gaussian_differential_entropy", "global_loss", "lyapunov_value", "make_manifold", "mutual_information",
    "riemannian_gradient", "run_alignment", "run_ensemble", "sgd_step",
]  # fmt: skip
