"""Walsh-modulated spin-dependent-force gates: closed-form models and a brute-force oracle."""

__version__ = "0.1.0"

from .errors import ConfigError, ConvergenceError, CutoffError, DomainError  # noqa: E402
from .gate_model import (  # noqa: E402
    GateParams,
    alpha_k,
    fidelity_one_ion,
    fidelity_two_ion,
    gaussian_overlap,
    phi_k,
    plan_gate,
    trajectory,
)
from .walsh import build_sequence, rademacher, verify_identity, walsh_value  # noqa: E402

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "CutoffError",
    "DomainError",
    "GateParams",
    "alpha_k",
    "build_sequence",
    "fidelity_one_ion",
    "fidelity_two_ion",
    "gaussian_overlap",
    "phi_k",
    "plan_gate",
    "rademacher",
    "trajectory",
    "verify_identity",
    "walsh_value",
]
