"""Critical circles, closed orbit reconstruction, residuals and indices."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dual
from .errors import DegenerateCircle
from .loops import FourierLoop
from .symplect import j0_apply


@dataclass
class CriticalCircle:
    """A deduplicated reparameterization orbit of critical points.

    loop is the normalized representative (action 1 on the ratio route);
    action equals the dual value there.  Index data is attached by
    index_of once the free-route Hessian (or an oracle) has been consulted.
    """

    loop: FourierLoop
    action: float
    residual: float
    transverse_index: Optional[int] = None
    nullity: Optional[int] = None
    degenerate_flag: bool = False
    provenance: str = ""
    multiplicity: int = 1
    converged: bool = True
    free_loop: Optional[FourierLoop] = None
    free_value: Optional[float] = None
    index_method: Optional[str] = None
    boundary_residual: Optional[float] = None
    ode_residual: Optional[float] = None
    warnings: list = field(default_factory=list)

    def as_record(self):
        return {
            "action": self.action,
            "transverse_index": self.transverse_index,
            "nullity": self.nullity,
            "degenerate": self.degenerate_flag,
            "residual": self.residual,
            "boundary_residual": self.boundary_residual,
            "ode_residual": self.ode_residual,
            "multiplicity": self.multiplicity,
            "provenance": self.provenance,
            "converged": self.converged,
            "index_method": self.index_method,
        }


def reconstruct_orbit(body, circle, grid=None):
    """Closed orbit samples from a normalized critical loop.

    beta is the mean of grad H*(-J0 xdot); the orbit is
    y(t) = (psi x(t) + beta) / sqrt(psi) with period T = psi = the action.
    Returns (samples, T, beta).
    """
    loop = circle.loop
    G = grid or max(512, 4 * loop.l_max)
    pos, vel = loop.synthesize(G)
    W = -j0_apply(vel)
    grads = body.conj_grad(W)
    beta = grads.mean(axis=0)
    psi = circle.action
    if psi <= 0:
        raise ValueError("orbit reconstruction needs a positive action")
    y = (psi * pos + beta) / np.sqrt(psi)
    return y, float(psi), beta


def orbit_residual(body, circle, grid=None):
    """(boundary_residual, ode_residual) for the reconstructed orbit.

    The velocity is obtained spectrally from the loop (no grid differences):
    ydot = sqrt(psi) xdot.  The ODE residual is normalized by the period
    times the largest gauge gradient on the orbit.
    """
    loop = circle.loop
    G = grid or max(512, 4 * loop.l_max)
    pos, vel = loop.synthesize(G)
    W = -j0_apply(vel)
    grads = body.conj_grad(W)
    beta = grads.mean(axis=0)
    psi = circle.action
    y = (psi * pos + beta) / np.sqrt(psi)
    ydot = np.sqrt(psi) * vel
    boundary = float(np.max(np.abs(body.gauge(y) - 1.0)))
    gH = body.gauge_grad(y)
    target = psi * j0_apply(gH)
    denom = psi * float(np.max(np.linalg.norm(gH, axis=-1)))
    ode = float(np.max(np.linalg.norm(ydot - target, axis=-1))) / max(denom, 1e-300)
    return boundary, ode


def index_of(cfg, circle, l=None, null_tol=None):
    """Transverse index and nullity of a free-route critical circle.

    Counts eigenvalues of the reduced free Hessian.  At any nontrivial
    critical point the radial ray is a strict maximum direction of the free
    functional, so the full Morse index always carries one extra negative
    direction on top of the transverse index of the constrained circle:
    transverse_index = m_full - 1 (and must come out even).  The circle
    direction is the single null direction; more nullity means the circle
    sits in a degenerate critical manifold and the index must be supplied
    by an oracle instead.
    """
    if circle.free_loop is None:
        raise ValueError("circle carries no free-route representative")
    H, info = dual.reduced_hessian(cfg, circle.free_loop, l=l)
    if null_tol is not None:
        index, nullity, _ = dual.eig_counts(H, null_tol)
    else:
        index, nullity = info["index"], info["nullity"]
    if nullity > 1:
        raise DegenerateCircle(
            f"nullity {nullity} > 1 at action {circle.action:.6g}"
        )
    m_full = index
    transverse = m_full - 1
    if transverse < 0 or transverse % 2 != 0:
        circle.warnings.append(
            f"unexpected index parity: full Morse index {m_full}"
        )
    return transverse, nullity
