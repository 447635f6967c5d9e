"""End-to-end runs: detect spectrum, attach indices, assemble capacities.

The two solver routes are combined here.  The ratio route detects circles
and their actions; the free route (profile mode) supplies Morse data for
the capacity dictionary.  Degenerate circles (nullity above one: balls,
rational ellipsoids at resonant levels) bypass the Hessian: when the body
carries exact ellipsoid data the multiset oracle labels them, otherwise
they are reported without an index.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import dual, solver, spectrum as spec_mod
from .bodies import TransformedBody, effective_ellipsoid
from .capacities import (
    CapacityReport,
    besse_check,
    capacities_from_spectrum,
    ellipsoid_oracle,
    ellipsoid_oracle_labeled,
    zoll_check,
)
from .errors import (
    CollapsedToZero,
    DegenerateCircle,
    EtaInSpectrum,
    InsufficientCapacities,
    MissingIndexData,
    ValueOutOfBand,
)
from .profiles import build_profile


def total_transform(body):
    """Accumulated (M, b, innermost base) over a chain of transformed bodies.

    body = M_k ( ... (M_1 C + b_1) ... ) + b_k composes inside-out.
    Returns None for untransformed bodies.
    """
    if not isinstance(body, TransformedBody):
        return None
    chain = []
    cur = body
    while isinstance(cur, TransformedBody):
        chain.append((cur.M, cur.b))
        cur = cur.base
    M = np.eye(2 * body.n)
    b = np.zeros(2 * body.n)
    for Mk, bk in reversed(chain):
        M = Mk @ M
        b = Mk @ b + bk
    return M, b, cur


def choose_eta(actions, k_max, explicit=None):
    """Slope at infinity: explicit, or 1.05 x the k_max-th detected/oracle
    value, nudged off any detected action value."""
    actions = sorted(a for a in actions if a > 0)
    if explicit is not None:
        eta = float(explicit)
    else:
        if not actions:
            raise ValueError("no positive actions to derive eta from")
        base = actions[min(k_max, len(actions)) - 1]
        eta = 1.05 * base
    for _ in range(100):
        if all(abs(eta - a) > 1e-6 * max(1.0, a) for a in actions):
            break
        eta *= 1.01
    return eta


@dataclass
class PipelineResult:
    report: Optional[CapacityReport]
    circles: List[object]
    eta: Optional[float] = None
    profile: Optional[object] = None
    oracle_values: Optional[list] = None
    oracle_match: Optional[bool] = None
    warnings: List[str] = field(default_factory=list)


def detect_circles(body, k_max, l_max=32, grid=512, opts=None, trace=None):
    """Ratio-route multistart; attaches orbit-certification residuals."""
    opts = opts or solver.SolverOptions()
    cfg = dual.DualConfig(body, None, grid, l_max)
    circles = solver.multistart(cfg, k_max, opts)
    for c in circles:
        c.boundary_residual, c.ode_residual = spec_mod.orbit_residual(body, c)
    if trace:
        for c in circles:
            trace("circle", c.as_record())
    return cfg, circles


def _classify_against_oracle(circle, a_eff, unmap, grid, k_enum):
    """Multiset position of an ellipsoid circle: (value, plane, multiple).

    The loop is pulled back through the accumulated linear map so that axis
    orbits concentrate on a single (mode, plane) coefficient; mixed loops
    (resonant families) return None.
    """
    loop = circle.loop if unmap is None else solver._map_loop(circle.loop, unmap, grid)
    energy = np.abs(loop.coeffs) ** 2
    total = float(energy.sum())
    if total <= 0:
        return None
    flat = int(np.argmax(energy))
    row, plane = divmod(flat, loop.n)
    m = row - loop.l_max
    if m <= 0 or energy[row, plane] / total < 0.98:
        return None
    labeled = ellipsoid_oracle_labeled(a_eff, k_enum)
    for pos, (val, i, mult) in enumerate(labeled, start=1):
        if i == plane and mult == m and abs(val - circle.action) < 1e-4 * max(1.0, val):
            return pos
    return None


def attach_indices(body, circles, k_max, eta=None, l_max=32, grid=512,
                   opts=None, trace=None, force_oracle=False):
    """Free-route polish plus index assignment for every circle below eta.

    Returns (profile, eta, warnings).  Circles above eta keep index None.
    force_oracle skips the Hessians for bodies with exact ellipsoid data
    (used by the convergence study, where only the values are tracked).
    """
    opts = opts or solver.SolverOptions()
    warnings = []
    a_eff = effective_ellipsoid(body)
    actions = [c.action for c in circles if c.converged]
    oracle_vals = ellipsoid_oracle(a_eff, max(k_max, 1)) if a_eff is not None else None
    eta = choose_eta(oracle_vals or actions, k_max, explicit=eta)
    spectrum_values = sorted(set(round(a, 12) for a in actions))
    profile = build_profile(
        eta, spectrum_values, family="FstarLin", numeric_spectrum=(a_eff is None)
    )
    if trace:
        trace("profile", profile.to_dict())
    cfg = dual.DualConfig(body, profile, grid, l_max)
    tot = total_transform(body)
    unmap = np.linalg.inv(tot[0]) if tot is not None else None
    k_enum = 2 * max(k_max, 1) * max(body.n, 1) + 10

    for c in circles:
        if not c.converged or c.action >= eta:
            continue
        if force_oracle and a_eff is not None:
            pos = _classify_against_oracle(c, a_eff, unmap, max(grid, 4 * l_max), k_enum)
            if pos is not None:
                c.transverse_index = 2 * (pos - 1)
                c.index_method = "oracle"
            continue
        try:
            free = solver.find_critical_free(cfg, c.loop, opts)
        except (ValueOutOfBand, CollapsedToZero) as exc:
            c.warnings.append(f"free route failed: {exc}")
            warnings.append(f"action {c.action:.6g}: free route failed: {exc}")
            continue
        c.free_loop = free.free_loop
        c.free_value = free.free_value
        if trace:
            trace("free_critical", {"action": c.action, "free_value": free.free_value})
        try:
            idx, nullity = spec_mod.index_of(cfg, c)
            c.transverse_index = idx
            c.nullity = nullity
            c.index_method = "index_dictionary"
        except DegenerateCircle as exc:
            c.degenerate_flag = True
            c.warnings.append(str(exc))
            if a_eff is not None:
                pos = _classify_against_oracle(
                    c, a_eff, unmap, max(grid, 4 * l_max), k_enum
                )
                if pos is not None:
                    c.transverse_index = 2 * (pos - 1)
                    c.index_method = "oracle"
                else:
                    warnings.append(
                        f"degenerate mixed-mode circle at action {c.action:.6g}: "
                        "no index assigned"
                    )
            else:
                warnings.append(
                    f"degenerate circle at action {c.action:.6g}: index unavailable"
                )
    return cfg, profile, eta, warnings


def run_capacities(body, k_max, l_max=32, grid=512, eta=None, opts=None,
                   besse_tol=1e-6, trace=None, force_oracle=False):
    """Full pipeline: spectrum, indices, capacities, Besse/Zoll verdicts."""
    opts = opts or solver.SolverOptions()
    _, circles = detect_circles(body, k_max, l_max, grid, opts, trace)
    result = PipelineResult(report=None, circles=circles)
    if not circles:
        result.warnings.append("no critical circles detected")
        return result
    cfg, profile, eta_used, warns = attach_indices(
        body, circles, k_max, eta, l_max, grid, opts, trace, force_oracle
    )
    result.eta = eta_used
    result.profile = profile
    result.warnings.extend(warns)
    try:
        report = capacities_from_spectrum(circles, body.n, k_max)
    except MissingIndexData as exc:
        result.warnings.append(str(exc))
        return result
    report.warnings.extend(warns)
    try:
        report.besse = besse_check(report, besse_tol)
    except InsufficientCapacities:
        report.besse = None
        report.warnings.append("besse check skipped: insufficient capacities")
    try:
        report.zoll = zoll_check(report, besse_tol)
    except InsufficientCapacities:
        report.zoll = None
    a_eff = effective_ellipsoid(body)
    if a_eff is not None:
        oracle = ellipsoid_oracle(a_eff, k_max)
        result.oracle_values = oracle
        vals = report.values()
        result.oracle_match = all(
            v is not None and abs(v - o) <= 1e-4 * max(1.0, o)
            for v, o in zip(vals, oracle)
        )
    result.report = report
    return result
