"""Numerical action spectra and symplectic capacities of convex domains.

Computes closed Reeb orbits on boundaries of smooth strongly convex domains
in R^{2n} through the dual variational principle, assembles the
Ekeland-Hofer-Zehnder capacity and the higher spectral capacities from
Morse data of critical circles, and detects Besse/Zoll behavior from
capacity coincidences.
"""

__version__ = "0.1.0"

from .bodies import (
    ConvexBody,
    Ellipsoid,
    QuadraticGauge,
    TransformedBody,
    effective_ellipsoid,
    fenchel_eval,
    fenchel_grad,
    gauge_eval,
    gauge_grad,
    gauge_hess,
    parse_body,
    support_eval,
    transform,
)
from .capacities import (
    CapacityReport,
    besse_check,
    capacities_from_spectrum,
    ellipsoid_oracle,
    zoll_check,
)
from .dual import (
    DualConfig,
    psi_grad_h1,
    psi_ratio_grad,
    psi_ratio_value,
    psi_value,
    reduced_hessian,
    saddle_reduce,
)
from .loops import FourierLoop, circle_distance, plane_circle
from .pipeline import run_capacities
from .profiles import (
    ApproximationProfile,
    build_profile,
    profile_check,
    smoothed_fenchel_grad,
)
from .solver import SolverOptions, deduplicate, find_critical_free, minimize_ratio, multistart
from .spectrum import CriticalCircle, index_of, orbit_residual, reconstruct_orbit

__all__ = [
    "ApproximationProfile",
    "CapacityReport",
    "ConvexBody",
    "CriticalCircle",
    "DualConfig",
    "Ellipsoid",
    "FourierLoop",
    "QuadraticGauge",
    "SolverOptions",
    "TransformedBody",
    "besse_check",
    "build_profile",
    "capacities_from_spectrum",
    "circle_distance",
    "deduplicate",
    "effective_ellipsoid",
    "ellipsoid_oracle",
    "fenchel_eval",
    "fenchel_grad",
    "find_critical_free",
    "gauge_eval",
    "gauge_grad",
    "gauge_hess",
    "index_of",
    "minimize_ratio",
    "multistart",
    "orbit_residual",
    "parse_body",
    "plane_circle",
    "profile_check",
    "psi_grad_h1",
    "psi_ratio_grad",
    "psi_ratio_value",
    "psi_value",
    "reconstruct_orbit",
    "reduced_hessian",
    "run_capacities",
    "saddle_reduce",
    "smoothed_fenchel_grad",
    "support_eval",
    "transform",
    "zoll_check",
]
