"""Finite-difference verification table used by the gradcheck subcommand.

Each row compares an analytic derivative against an independent central
finite difference (or an exact identity) on seeded random samples and
reports the worst relative error.  The same oracles back the test suite.
"""

import numpy as np

from . import dual
from .loops import FourierLoop
from .profiles import build_profile, solve_k
from .capacities import ellipsoid_oracle
from .bodies import effective_ellipsoid
from .symplect import j0_apply  # noqa: F401


def _rng_points(rng, count, dim, radius=1.5):
    pts = rng.standard_normal((count, dim))
    pts *= (radius / np.linalg.norm(pts, axis=1, keepdims=True)) * (
        0.5 + rng.random((count, 1))
    )
    return pts


def fd_gradient(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_jacobian(f, x, h=1e-6):
    f0 = np.asarray(f(x))
    J = np.zeros((len(f0), len(x)))
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        J[:, i] = (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h)
    return J


def random_loop(rng, n, l_max, modes=4, scale=1.0):
    C = np.zeros((2 * l_max + 1, n), dtype=complex)
    for m in range(1, modes + 1):
        amp = scale * 0.5 ** (m - 1)
        C[l_max + m] = amp * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        C[l_max - m] = 0.2 * amp * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return FourierLoop(n, l_max, C)


def gradient_check_table(body, seed=0, lmax=16, grid=256, samples=20):
    rng = np.random.default_rng(seed)
    dim = 2 * body.n
    rows = []

    def add(check, err, tol):
        rows.append({
            "check": check,
            "max_error": float(err),
            "tolerance": float(tol),
            "passed": bool(err < tol),
        })

    pts = _rng_points(rng, samples, dim)
    err = 0.0
    for x in pts:
        g = body.gauge_grad(x)
        gfd = fd_gradient(lambda v: float(body.gauge(v)), x.copy())
        err = max(err, np.linalg.norm(g - gfd) / max(np.linalg.norm(gfd), 1e-300))
    add("gauge_grad_vs_fd", err, 1e-6)

    err = 0.0
    for x in pts[: samples // 2]:
        H = body.gauge_hess(x)
        Hfd = fd_jacobian(lambda v: body.gauge_grad(v), x.copy(), h=1e-5)
        err = max(err, np.linalg.norm(H - Hfd) / max(np.linalg.norm(Hfd), 1e-300))
    add("gauge_hess_vs_fd", err, 1e-5)

    err = 0.0
    for x in pts:
        w = body.gauge_grad(x)
        back = body.conj_grad(w)
        err = max(err, np.linalg.norm(back - x) / max(np.linalg.norm(x), 1e-300))
    add("conj_grad_inverts_gauge_grad", err, 1e-9)

    ws = _rng_points(rng, samples, dim)
    err = 0.0
    for w in ws:
        err = max(err, abs(0.25 * body.support(w) ** 2 - body.conj(w))
                  / max(abs(body.conj(w)), 1e-300))
    add("support_identity", err, 1e-12)

    cfg = dual.DualConfig(body, None, grid, lmax)
    ms = dual.ModeSpace.band(lmax, body.n, grid)
    err = 0.0
    for _ in range(3):
        loop = random_loop(rng, body.n, lmax)
        xhat = ms.xhat_from_loop(loop)
        xi = ms.xi_of(xhat)
        g = dual.calH_grad_xhat(cfg, ms, xhat)
        gxi = dual._complex_rows_to_xi(ms, g)
        gfd = fd_gradient(lambda v: dual.calH_value(cfg, ms, ms.xhat_of(v)), xi.copy(), h=1e-6)
        err = max(err, np.linalg.norm(gxi - gfd) / max(np.linalg.norm(gfd), 1e-300))
    add("dual_value_grad_vs_fd", err, 1e-6)

    err = 0.0
    for _ in range(3):
        loop = random_loop(rng, body.n, lmax)
        if loop.action() <= 0:
            continue
        xhat = ms.xhat_from_loop(loop)
        xi = ms.xi_of(xhat)
        g = dual.ratio_grad_xi(cfg, ms, xhat)

        def ratio_of(v):
            xh = ms.xhat_of(v)
            return dual.calH_value(cfg, ms, xh) / dual.action_of_xhat(ms, xh)

        gfd = fd_gradient(ratio_of, xi.copy(), h=1e-6)
        err = max(err, np.linalg.norm(g - gfd) / max(np.linalg.norm(gfd), 1e-300))
    add("ratio_grad_vs_fd", err, 1e-6)

    a_eff = effective_ellipsoid(body)
    spectrum = (
        ellipsoid_oracle(a_eff, 6) if a_eff is not None else [1.0, 2.0, 3.0]
    )
    eta = 1.3 * spectrum[0]
    while any(abs(eta - s) < 1e-6 for s in spectrum):
        eta *= 1.01
    profile = build_profile(eta, spectrum, "FstarLin")
    err = 0.0
    for w in ws:
        u = float(body.conj(w))
        k = float(solve_k(profile, u))
        err = max(err, abs(profile.deriv(k * k * u) * k - 1.0))
    add("smoothed_scalar_residual", err, 1e-12)

    return rows
