"""Critical point search for the dual functionals.

The ratio functional is bounded below by the minimal action and its descent
flow converges to critical circles, so the workhorse is Armijo-safeguarded
Barzilai-Borwein descent on the cone (the 1-homogeneous pseudo-gradient
picture: iterates are renormalized to the action-one slice after every
step, which 0-homogeneity makes free).  A pseudo-inverse Newton polish
switches on near criticality; the circle and radial directions sit in the
kernel and are cut by the eigenvalue threshold.

Free-route critical points are saddles (never minima), so they are reached
by rescaling a ratio-route circle radially onto the free criticality shell
and running Newton on the full free gradient from there.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import dual
from .bodies import TransformedBody
from .errors import (
    CollapsedToZero,
    NonpositiveAction,
    SeedNonpositiveAction,
    ValueOutOfBand,
)
from .loops import FourierLoop, circle_distance, plane_circle
from .profiles import smoothed_fenchel_grad
from .spectrum import CriticalCircle
from .symplect import pack, unpack


@dataclass
class SolverOptions:
    max_iter: int = 800
    grad_tol: float = 1e-9
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    seed: int = 0
    newton_polish: bool = True
    polish_trigger: float = 1e-3
    dedup_action_tol: float = 1e-6
    dedup_dist_tol: float = 1e-4
    m_max: int = 0  # 0 = auto
    random_plane_seeds: int = 2
    random_mix_seeds: int = 3


@dataclass
class RatioCritical:
    loop: FourierLoop  # normalized to action 1
    value: float
    residual: float
    converged: bool
    iterations: int


@dataclass
class FreeCritical:
    free_loop: FourierLoop
    free_value: float
    residual: float
    norm_loop: FourierLoop
    norm_value: float
    converged: bool


def _normalize_xhat(ms, xhat):
    a = dual.action_of_xhat(ms, xhat)
    if a <= 0:
        raise NonpositiveAction("iterate left the positive-action cone")
    return xhat / np.sqrt(a)


def minimize_ratio(cfg, seed_loop, opts=None):
    """Descend the ratio functional from a seed of positive action."""
    opts = opts or SolverOptions()
    if seed_loop.action() <= 0:
        raise SeedNonpositiveAction("seed loop must have positive action")
    cfg = dual.gauge_view(cfg)
    ms = dual.ModeSpace.band(cfg.l_max, cfg.body.n, max(cfg.grid_size, 4 * cfg.l_max))
    xhat = _normalize_xhat(ms, ms.xhat_from_loop(seed_loop))

    def value(xh):
        a = dual.action_of_xhat(ms, xh)
        if a <= 0:
            return np.inf
        return dual.calH_value(cfg, ms, xh) / a

    xi = ms.xi_of(xhat)
    f = value(xhat)
    g = dual.ratio_grad_xi(cfg, ms, xhat)
    res = dual.grad_h12_norm(ms, g)
    step = 0.1 * max(np.linalg.norm(xi), 1.0) / max(np.linalg.norm(g), 1e-30)
    prev_xi, prev_g = None, None
    iters = 0
    for iters in range(opts.max_iter):
        if res <= opts.grad_tol:
            break
        if opts.newton_polish and res < opts.polish_trigger:
            xhat, f, g, res, ok = _newton_polish(cfg, ms, xhat, opts)
            if ok:
                break
        gn2 = float(g @ g)
        t = step
        accepted = False
        for _ in range(50):
            xi_new = xi - t * g
            xh_new = ms.xhat_of(xi_new)
            f_new = value(xh_new)
            if f_new <= f - opts.armijo_c * t * gn2:
                accepted = True
                break
            t *= opts.armijo_shrink
        if not accepted:
            break
        xhat = _normalize_xhat(ms, xh_new)
        xi_n = ms.xi_of(xhat)
        g_new = dual.ratio_grad_xi(cfg, ms, xhat)
        if prev_xi is not None:
            s = xi_n - prev_xi
            y = g_new - prev_g
            sy = float(s @ y)
            step = float(s @ s) / sy if sy > 1e-30 else t / opts.armijo_shrink
            step = min(max(step, 1e-12), 1e6)
        prev_xi, prev_g = xi_n, g_new
        xi, g = xi_n, g_new
        f = value(xhat)
        res = dual.grad_h12_norm(ms, g)
    converged = res <= opts.grad_tol
    loop = ms.loop(xhat, cfg.l_max)
    return RatioCritical(loop, float(value(xhat)), float(res), bool(converged), iters)


def _newton_polish(cfg, ms, xhat, opts, max_steps=25):
    """Pseudo-inverse Newton on the ratio gradient near a critical circle."""
    g = dual.ratio_grad_xi(cfg, ms, xhat)
    res = dual.grad_h12_norm(ms, g)
    best = (xhat, res)
    for _ in range(max_steps):
        if res <= opts.grad_tol:
            break
        H = dual.ratio_hessian_xi(cfg, ms, xhat)
        evals, vecs = np.linalg.eigh(H)
        cut = 1e-8 * np.max(np.abs(evals))
        inv = np.where(np.abs(evals) > cut, 1.0 / np.where(evals == 0, 1.0, evals), 0.0)
        xi = ms.xi_of(xhat)
        step = vecs @ (inv * (vecs.T @ g))
        xhat_new = ms.xhat_of(xi - step)
        try:
            xhat_new = _normalize_xhat(ms, xhat_new)
        except NonpositiveAction:
            break
        g_new = dual.ratio_grad_xi(cfg, ms, xhat_new)
        res_new = dual.grad_h12_norm(ms, g_new)
        if not np.isfinite(res_new) or res_new > res:
            break
        xhat, g, res = xhat_new, g_new, res_new
        if res < best[1]:
            best = (xhat, res)
    xhat, res = best
    f = dual.calH_value(cfg, ms, xhat) / dual.action_of_xhat(ms, xhat)
    g = dual.ratio_grad_xi(cfg, ms, xhat)
    return xhat, f, g, res, res <= opts.grad_tol


def seek_circle(cfg, seed_loop, opts=None, max_iter=120):
    """Locate the critical circle nearest to a seed, saddles included.

    Plain descent slides off every non-minimizing circle, so the multistart
    sweep runs a Levenberg-Marquardt iteration on the ratio gradient system
    (Gauss-Newton on |grad|^2 with the exact symmetric Hessian as Jacobian)
    straight from the seed, and only falls back to descent when that stalls.
    The damping keeps steps useful even with the two-dimensional kernel of
    the ratio Hessian (radial and circle directions).
    """
    opts = opts or SolverOptions()
    if seed_loop.action() <= 0:
        raise SeedNonpositiveAction("seed loop must have positive action")
    cfg = dual.gauge_view(cfg)
    ms = dual.ModeSpace.band(cfg.l_max, cfg.body.n, max(cfg.grid_size, 4 * cfg.l_max))
    xhat = _normalize_xhat(ms, ms.xhat_from_loop(seed_loop))
    g = dual.ratio_grad_xi(cfg, ms, xhat)
    res = dual.grad_h12_norm(ms, g)
    lam = 1e-4
    iters = 0
    stalls = 0
    for iters in range(max_iter):
        if res <= opts.grad_tol:
            break
        H = dual.ratio_hessian_xi(cfg, ms, xhat)
        scale = max(np.linalg.norm(H, 2), 1e-300)
        xi = ms.xi_of(xhat)
        improved = False
        for _ in range(25):
            A = H @ H
            A[np.diag_indices_from(A)] += (lam * scale) ** 2
            step = np.linalg.solve(A, H @ g)
            try:
                xh_new = _normalize_xhat(ms, ms.xhat_of(xi - step))
            except NonpositiveAction:
                lam *= 10.0
                continue
            g_new = dual.ratio_grad_xi(cfg, ms, xh_new)
            res_new = dual.grad_h12_norm(ms, g_new)
            if np.isfinite(res_new) and res_new < res:
                improved = True
                lam = max(lam * 0.3, 1e-10)
                break
            lam *= 10.0
        if not improved:
            stalls += 1
            if stalls >= 2:
                break
            continue
        stalls = 0
        xhat, g, res = xh_new, g_new, res_new
    if res <= opts.grad_tol:
        value = dual.calH_value(cfg, ms, xhat) / dual.action_of_xhat(ms, xhat)
        return RatioCritical(ms.loop(xhat, cfg.l_max), float(value), float(res), True, iters)
    return minimize_ratio(cfg, seed_loop, opts)


def _radial_rescale(cfg, ms, xhat_unit):
    """Scaling lambda putting the unit-action loop on the free criticality shell.

    Solves d/dlambda [ -lambda^2 + mean H_eta*(lambda w) ] = 0; the derivative
    is positive near zero and eventually negative, so bisection is safe.
    """
    _, vel = ms.synth(xhat_unit)
    W = unpack(-1j * vel)

    def slope(lam):
        q = smoothed_fenchel_grad(cfg.body, cfg.profile, lam * W)
        return -2.0 * lam + float(np.mean(np.sum(q * W, axis=-1)))

    lo, hi = 1e-8, 1.0
    for _ in range(200):
        if slope(hi) < 0:
            break
        lo = hi
        hi *= 2.0
    else:
        raise ValueOutOfBand("no radial critical scaling below eta")
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_critical_free(cfg, seed_loop, opts=None):
    """Nontrivial critical point of the free smoothed functional near a seed.

    Route: ratio descent to a circle, radial rescale onto the free shell,
    then pseudo-inverse Newton on the full free gradient.  Rejects collapse
    to the trivial critical point and enforces the (eps, eta) value band.
    """
    opts = opts or SolverOptions()
    if cfg.profile is None:
        raise ValueError("find_critical_free requires a profile")
    if seed_loop.l2_norm() < 1e-8:
        raise CollapsedToZero("seed is numerically the zero loop")
    ratio = minimize_ratio(cfg, seed_loop, opts)
    eta = cfg.profile.eta
    eps = cfg.profile.context.eps
    if ratio.value >= eta:
        raise ValueOutOfBand(
            f"normalized critical value {ratio.value:.6g} is not below eta={eta:.6g}"
        )
    ms = dual.ModeSpace.band(cfg.l_max, cfg.body.n, max(cfg.grid_size, 4 * cfg.l_max))
    xhat = ms.xhat_from_loop(ratio.loop)
    lam = _radial_rescale(cfg, ms, xhat)
    xhat = lam * xhat

    g = dual.free_grad_xi(cfg, ms, xhat)
    res = dual.grad_h12_norm(ms, g)
    for _ in range(40):
        if res <= opts.grad_tol:
            break
        H = dual.free_hessian_xi(cfg, ms, xhat)
        evals, vecs = np.linalg.eigh(H)
        cut = 1e-8 * np.max(np.abs(evals))
        inv = np.where(np.abs(evals) > cut, 1.0 / np.where(evals == 0, 1.0, evals), 0.0)
        xi = ms.xi_of(xhat)
        step = vecs @ (inv * (vecs.T @ g))
        t = 1.0
        improved = False
        for _ in range(20):
            xhat_new = ms.xhat_of(xi - t * step)
            g_new = dual.free_grad_xi(cfg, ms, xhat_new)
            res_new = dual.grad_h12_norm(ms, g_new)
            if np.isfinite(res_new) and res_new < res:
                improved = True
                break
            t *= 0.5
        if not improved:
            break
        xhat, g, res = xhat_new, g_new, res_new
        if np.linalg.norm(xhat) < 1e-8:
            raise CollapsedToZero("free iterate collapsed to the trivial point")
    value = dual.free_value(cfg, ms, xhat)
    a = dual.action_of_xhat(ms, xhat)
    if a <= 0:
        raise CollapsedToZero("free iterate left the positive cone")
    if not (eps < value < eta):
        raise ValueOutOfBand(
            f"free critical value {value:.6g} outside ({eps:.6g}, {eta:.6g})"
        )
    norm_xhat = xhat / np.sqrt(a)
    gauge_cfg = dual.DualConfig(cfg.body, None, cfg.grid_size, cfg.l_max)
    norm_value = dual.calH_value(gauge_cfg, ms, norm_xhat)
    return FreeCritical(
        free_loop=ms.loop(xhat, cfg.l_max),
        free_value=float(value),
        residual=float(res),
        norm_loop=ms.loop(norm_xhat, cfg.l_max),
        norm_value=float(norm_value),
        converged=bool(res <= opts.grad_tol),
    )


# -- seed bank and multistart ---------------------------------------------


def _map_loop(loop, M, grid):
    """Apply a linear map pointwise to a loop and refit Fourier modes."""
    pos, _ = loop.synthesize(grid)
    mapped = pos @ M.T
    spec = np.fft.fft(pack(mapped), axis=0) / grid
    C = np.zeros((2 * loop.l_max + 1, loop.n), dtype=complex)
    for k in range(-loop.l_max, loop.l_max + 1):
        if k != 0:
            C[loop.l_max + k] = spec[k % grid]
    return FourierLoop(loop.n, loop.l_max, C)


def seed_bank(cfg, m_max, opts):
    """Deterministic seed list: coordinate-plane circles for each low mode,
    their images under the body's own transform when there is one, random
    symplectic planes, and random low-mode mixtures."""
    n = cfg.body.n
    rng = np.random.default_rng(opts.seed)
    seeds = []
    for m in range(1, m_max + 1):
        r = 1.0 / np.sqrt(np.pi * m)
        for p in range(n):
            seeds.append((f"plane{p}_m{m}", plane_circle(n, cfg.l_max, p, m, r)))
    if isinstance(cfg.body, TransformedBody):
        from .pipeline import total_transform

        M = total_transform(cfg.body)[0]
        grid = max(cfg.grid_size, 4 * cfg.l_max)
        for m in range(1, m_max + 1):
            r = 1.0 / np.sqrt(np.pi * m)
            for p in range(n):
                mapped = _map_loop(plane_circle(n, cfg.l_max, p, m, r), M, grid)
                if mapped.action() > 1e-12:
                    seeds.append((f"mapped_plane{p}_m{m}", mapped))
    for m in range(1, m_max + 1):
        for j in range(opts.random_plane_seeds):
            v = rng.standard_normal(2 * n)
            v /= np.linalg.norm(v)
            seeds.append(
                (f"randplane{j}_m{m}",
                 FourierLoop.from_modes(n, cfg.l_max, {m: v / np.sqrt(np.pi * m)}))
            )
    for j in range(opts.random_mix_seeds):
        modes = {}
        for m in range(1, min(3, cfg.l_max) + 1):
            modes[m] = rng.standard_normal(2 * n) * (0.5 ** (m - 1))
        loop = FourierLoop.from_modes(n, cfg.l_max, modes)
        if loop.action() < 0:
            # time reversal flips the action sign
            loop = FourierLoop(n, cfg.l_max, loop.coeffs[::-1])
        if loop.action() > 1e-12:
            seeds.append((f"mix{j}", loop))
    return seeds


def deduplicate(circles, action_tol=1e-6, dist_tol=1e-4):
    """Merge circles on the same reparameterization orbit.

    Two candidates merge when both the action difference and the orbit
    distance fall under the tolerances; the representative with the lowest
    gradient residual survives and accumulates the multiplicity count.
    """
    kept = []
    for c in sorted(circles, key=lambda c: (c.residual, c.action)):
        merged = False
        for k in kept:
            if abs(c.action - k.action) < action_tol and (
                circle_distance(c.loop, k.loop) < dist_tol
            ):
                k.multiplicity += c.multiplicity
                merged = True
                break
        if not merged:
            kept.append(replace(c))
    kept.sort(key=lambda c: (c.action, c.provenance))
    return kept


def multistart(cfg, k_max, opts=None):
    """Ratio-route sweep over the seed bank; deduplicated, sorted by action."""
    opts = opts or SolverOptions()
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    m_max = opts.m_max if opts.m_max > 0 else k_max + 1
    circles = []
    for name, seed in seed_bank(cfg, m_max, opts):
        try:
            result = seek_circle(cfg, seed, opts)
        except (SeedNonpositiveAction, NonpositiveAction):
            continue
        if not result.converged:
            circles.append(
                CriticalCircle(
                    loop=result.loop,
                    action=result.value,
                    residual=result.residual,
                    provenance=f"{name}:ratio:unconverged",
                    converged=False,
                )
            )
            continue
        circles.append(
            CriticalCircle(
                loop=result.loop,
                action=result.value,
                residual=result.residual,
                provenance=f"{name}:ratio",
                converged=True,
            )
        )
    good = [c for c in circles if c.converged]
    return deduplicate(good, opts.dedup_action_tol, opts.dedup_dist_tol)
