"""Sensitivity of LQ optimal value functions to weak coupling between subsystems."""

from .errors import RicsenseError
from .linalg import BlockPartition, coupling_norm, frobenius_norm, solve_stein, solve_sylvester
from .riccati import RiccatiSolution, SystemLQ, solve, solve_care, solve_dare
from .sensitivity import dp_continuous, dp_discrete, frobenius_bound, sensitivity_report
from .stability import sep, sep_sharp, stability_radius_continuous, stability_radius_discrete

__version__ = "0.1.0"

__all__ = [
    "BlockPartition",
    "RicsenseError",
    "RiccatiSolution",
    "SystemLQ",
    "coupling_norm",
    "dp_continuous",
    "dp_discrete",
    "frobenius_bound",
    "frobenius_norm",
    "sensitivity_report",
    "sep",
    "sep_sharp",
    "solve",
    "solve_care",
    "solve_dare",
    "solve_stein",
    "solve_sylvester",
    "stability_radius_continuous",
    "stability_radius_discrete",
]
