"""Clarke dual functionals on the finite Fourier model.

Three functionals share one evaluation pipeline:

* the constrained dual value  H_frak(x) = int H*(-J0 xdot) dt  (gauge mode),
* its 0-homogeneous ratio     H_frak(x) / A(x) on the positive-action cone,
* the free smoothed dual      -A(x) + int H_eta*(-J0 xdot) dt  (profile mode).

Discretization contract: the integral *is* the uniform grid sum, and every
gradient/Hessian here is the exact derivative of that grid sum with respect
to the mode coefficients (FFT adjoints), so finite-difference checks close
to machine precision while the grid sum itself is spectrally accurate.

Coordinates: for a mode list (k_1, ..., k_m) the working vector stacks, per
mode and symplectic plane, the pair (Re xi, Im xi) with xi = 2 pi |k| xhat.
In these coordinates the H^1_0 inner product is the Euclidean one, so
assembled Hessians are plainly symmetric and eigenvalue counts read off
Morse data directly.

Mode-space identities used without further comment:

    A(x)              = pi sum_k k |xhat(k)|^2
    grad_xi A         = sgn(k) xhat(k)
    grad_xi H_frak    = sgn(k) qhat(k),   q(t) = grad H*(-J0 xdot(t))
    (antiderivative-minus-mean projection == divide mode k by 2 pi k and
     rotate by -J0, which the xi scaling turns into the sgn factors above)
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    AsymmetryTooLarge,
    GridTooCoarse,
    NonpositiveAction,
    NoConvergence,
    NonpositiveAction as _NPA,  # noqa: F401  (back-compat alias)
    ThresholdViolated,
)
from .loops import TWO_PI, FourierLoop
from .profiles import smoothed_conj, smoothed_conj_hess, smoothed_fenchel_grad
from .symplect import pack, unpack

from .bodies import Ellipsoid, QuadraticGauge


@dataclass
class DualConfig:
    """Body + optional profile + discretization sizes.

    profile is None for gauge mode (conjugate of the gauge itself) and an
    ApproximationProfile for the free smoothed functional.
    """

    body: object
    profile: Optional[object] = None
    grid_size: int = 512
    l_max: int = 32

    def __post_init__(self):
        if self.grid_size < 4 * self.l_max:
            raise GridTooCoarse(
                f"grid {self.grid_size} < 4*l_max = {4 * self.l_max}"
            )


# -- mode bookkeeping ---------------------------------------------------------


class ModeSpace:
    """A fixed list of nonzero modes with FFT synthesis on a fixed grid."""

    def __init__(self, modes, n, grid):
        self.modes = np.asarray(modes, dtype=int)
        if np.any(self.modes == 0) or len(np.unique(self.modes)) != len(self.modes):
            raise ValueError("modes must be distinct and nonzero")
        self.n = int(n)
        self.G = int(grid)
        if self.G < 4 * int(np.max(np.abs(self.modes))):
            raise GridTooCoarse("grid too coarse for the mode band")
        self.idx = self.modes % self.G
        self.sgn = np.sign(self.modes).astype(float)
        self.absk = np.abs(self.modes).astype(float)
        self.dim = len(self.modes) * 2 * self.n

    @classmethod
    def band(cls, l_max, n, grid):
        modes = np.concatenate([np.arange(-l_max, 0), np.arange(1, l_max + 1)])
        return cls(modes, n, grid)

    # coefficients <-> xi vector

    def xi_of(self, xhat):
        z = (TWO_PI * self.absk)[:, None] * xhat
        out = np.empty((len(self.modes), self.n, 2))
        out[..., 0] = z.real
        out[..., 1] = z.imag
        return out.reshape(self.dim)

    def xhat_of(self, xi):
        v = np.asarray(xi, dtype=float).reshape(len(self.modes), self.n, 2)
        z = v[..., 0] + 1j * v[..., 1]
        return z / (TWO_PI * self.absk)[:, None]

    # synthesis / adjoint

    def synth(self, xhat):
        """Positions and velocities on the grid, complex packed (G, n)."""
        spec = np.zeros((self.G, self.n), dtype=complex)
        spec[self.idx] = xhat
        pos = np.fft.ifft(spec, axis=0) * self.G
        spec[self.idx] = xhat * (TWO_PI * 1j * self.modes)[:, None]
        vel = np.fft.ifft(spec, axis=0) * self.G
        return pos, vel

    def dft(self, field_c):
        """Modewise DFT coefficients of a packed grid field."""
        return (np.fft.fft(field_c, axis=0) / self.G)[self.idx]

    def loop(self, xhat, l_max=None):
        L = int(np.max(self.absk)) if l_max is None else l_max
        C = np.zeros((2 * L + 1, self.n), dtype=complex)
        for i, k in enumerate(self.modes):
            if abs(k) <= L:
                C[L + k] = xhat[i]
        return FourierLoop(self.n, L, C)

    def xhat_from_loop(self, loop):
        out = np.zeros((len(self.modes), self.n), dtype=complex)
        for i, k in enumerate(self.modes):
            if abs(k) <= loop.l_max:
                out[i] = loop.coeffs[loop.l_max + k]
        return out


def action_of_xhat(ms, xhat):
    return float(np.pi * np.sum(ms.modes[:, None] * np.abs(xhat) ** 2))


# -- pointwise conjugate dispatch ---------------------------------------------


def gauge_view(cfg):
    """The same configuration with the profile stripped.

    The ratio functional is always built from the gauge conjugate; passing a
    profile-carrying config to a ratio routine must not switch it to the
    smoothed conjugate.
    """
    if cfg.profile is None:
        return cfg
    return DualConfig(cfg.body, None, cfg.grid_size, cfg.l_max)


def _conj_value(cfg, W):
    if cfg.profile is None:
        return cfg.body.conj(W)
    return smoothed_conj(cfg.body, cfg.profile, W)


def _conj_grad(cfg, W):
    if cfg.profile is None:
        return cfg.body.conj_grad(W)
    return smoothed_fenchel_grad(cfg.body, cfg.profile, W)


def _conj_hess(cfg, W):
    if cfg.profile is None:
        return cfg.body.conj_hess(W)
    return smoothed_conj_hess(cfg.body, cfg.profile, W)


def _w_field(vel_c):
    """-J0 xdot in the complex packing is just -i times the velocity."""
    return unpack(-1j * vel_c)


# -- values ---------------------------------------------------------------


def calH_value(cfg, ms, xhat):
    _, vel = ms.synth(xhat)
    W = _w_field(vel)
    return float(np.mean(_conj_value(cfg, W)))


def free_value(cfg, ms, xhat):
    return -action_of_xhat(ms, xhat) + calH_value(cfg, ms, xhat)


def psi_value(cfg, loop):
    """Dual value: gauge mode int H*(-J0 xdot); smoothed mode -A + int H_eta*."""
    ms = ModeSpace.band(loop.l_max, loop.n, max(cfg.grid_size, 4 * loop.l_max))
    xhat = ms.xhat_from_loop(loop)
    if cfg.profile is None:
        return calH_value(cfg, ms, xhat)
    return free_value(cfg, ms, xhat)


def psi_ratio_value(cfg, loop):
    cfg = gauge_view(cfg)
    a = loop.action()
    if a <= 0:
        raise NonpositiveAction("ratio functional needs positive action")
    ms = ModeSpace.band(loop.l_max, loop.n, max(cfg.grid_size, 4 * loop.l_max))
    return calH_value(cfg, ms, ms.xhat_from_loop(loop)) / a


# -- gradients -------------------------------------------------------------


def calH_grad_xhat(cfg, ms, xhat):
    """sgn(k) qhat(k) as packed complex rows (the xi-gradient of H_frak)."""
    _, vel = ms.synth(xhat)
    W = _w_field(vel)
    q = _conj_grad(cfg, W)
    qhat = ms.dft(pack(q))
    return ms.sgn[:, None] * qhat


def free_grad_xhat(cfg, ms, xhat):
    return calH_grad_xhat(cfg, ms, xhat) - ms.sgn[:, None] * xhat


def _complex_rows_to_xi(ms, rows):
    out = np.empty((len(ms.modes), ms.n, 2))
    out[..., 0] = rows.real
    out[..., 1] = rows.imag
    return out.reshape(ms.dim)


def free_grad_xi(cfg, ms, xhat):
    return _complex_rows_to_xi(ms, free_grad_xhat(cfg, ms, xhat))


def ratio_grad_xi(cfg, ms, xhat):
    cfg = gauge_view(cfg)
    a = action_of_xhat(ms, xhat)
    if a <= 0:
        raise NonpositiveAction("ratio functional needs positive action")
    h = calH_value(cfg, ms, xhat)
    gH = calH_grad_xhat(cfg, ms, xhat)
    gA = ms.sgn[:, None] * xhat
    rows = (gH - (h / a) * gA) / a
    return _complex_rows_to_xi(ms, rows)


def _grad_loop_from_rows(ms, rows, l_max):
    """H^1 representer loop of a xi-gradient given as complex rows."""
    yhat = rows / (TWO_PI * ms.absk)[:, None]
    return ms.loop(yhat, l_max)


def psi_grad_h1(cfg, loop):
    """H^1_0 gradient loop of the free functional (gauge or smoothed mode).

    Pointwise field -J0 (x - grad H*(-J0 xdot)) followed by the
    antiderivative-minus-mean projection, evaluated exactly in mode space.
    """
    ms = ModeSpace.band(loop.l_max, loop.n, max(cfg.grid_size, 4 * loop.l_max))
    xhat = ms.xhat_from_loop(loop)
    rows = free_grad_xhat(cfg, ms, xhat)
    return _grad_loop_from_rows(ms, rows, loop.l_max)


def psi_ratio_grad(cfg, loop):
    """H^1_0 gradient loop of the ratio functional."""
    cfg = gauge_view(cfg)
    ms = ModeSpace.band(loop.l_max, loop.n, max(cfg.grid_size, 4 * loop.l_max))
    xhat = ms.xhat_from_loop(loop)
    rows = ratio_grad_xi(cfg, ms, xhat)
    rows = rows.reshape(len(ms.modes), ms.n, 2)
    rows = rows[..., 0] + 1j * rows[..., 1]
    return _grad_loop_from_rows(ms, rows, loop.l_max)


def grad_h12_norm(ms, xi):
    """h12 norm of the H^1 representer encoded by a xi-gradient vector."""
    v = np.asarray(xi).reshape(len(ms.modes), ms.n, 2)
    z2 = v[..., 0] ** 2 + v[..., 1] ** 2
    return float(np.sqrt(np.sum(z2 / (TWO_PI * ms.absk)[:, None])))


# -- quadratic forms ----------------------------------------------------------


def field_form_xi(ms, Mfield):
    """xi-coordinate matrix of  u -> (1/G) sum_j <M_j (-J0 udot), (-J0 udot)>.

    M is a (G, 2n, 2n) field of symmetric matrices.  Per symplectic plane
    pair the real 2x2 blocks split into a complex-linear part alpha and an
    antilinear part beta; time averaging against the mode phases turns the
    assembly into two FFTs plus an outer fill over mode pairs.  Exact for
    the grid functional, and symmetric by construction up to roundoff.
    """
    G, n = ms.G, ms.n
    Mxx = Mfield[:, 0::2, 0::2]
    Myy = Mfield[:, 1::2, 1::2]
    Myx = Mfield[:, 1::2, 0::2]
    Mxy = Mfield[:, 0::2, 1::2]
    alpha = 0.5 * ((Mxx + Myy) + 1j * (Myx - Mxy))
    beta = 0.5 * ((Mxx - Myy) + 1j * (Myx + Mxy))
    Ahat = np.fft.ifft(alpha, axis=0)
    Bhat = np.fft.fft(beta, axis=0) / G

    k = ms.modes
    m = len(k)
    kdiff = (k[None, :] - k[:, None]) % G  # rows: output mode k', cols: input k
    ksum = (k[None, :] + k[:, None]) % G
    ss = ms.sgn[:, None] * ms.sgn[None, :]

    Czz = Ahat[kdiff] * ss[:, :, None, None]
    Czzb = Bhat[ksum] * ss[:, :, None, None]

    H = np.empty((m, n, 2, m, n, 2))
    zz_re, zz_im = Czz.real, Czz.imag
    zb_re, zb_im = Czzb.real, Czzb.imag
    # Re[vbar c u] -> [[re, -im], [im, re]];  Re[vbar c ubar] -> [[re, im], [im, -re]]
    H[:, :, 0, :, :, 0] = np.transpose(zz_re + zb_re, (0, 2, 1, 3))
    H[:, :, 0, :, :, 1] = np.transpose(-zz_im + zb_im, (0, 2, 1, 3))
    H[:, :, 1, :, :, 0] = np.transpose(zz_im + zb_im, (0, 2, 1, 3))
    H[:, :, 1, :, :, 1] = np.transpose(zz_re - zb_re, (0, 2, 1, 3))
    return H.reshape(ms.dim, ms.dim)


def _action_diag(ms):
    d = np.repeat(ms.sgn / (TWO_PI * ms.absk), 2 * ms.n)
    return d


def free_hessian_xi(cfg, ms, xhat):
    """Exact Hessian of the free smoothed grid functional in xi coordinates."""
    _, vel = ms.synth(xhat)
    W = _w_field(vel)
    Mfield = _conj_hess(cfg, W)
    H = field_form_xi(ms, Mfield)
    H[np.diag_indices_from(H)] -= _action_diag(ms)
    return H


def ratio_hessian_xi(cfg, ms, xhat):
    """Exact Hessian of the ratio grid functional in xi coordinates.

    Quotient rule on H_frak / A; at critical points the rank-one corrections
    vanish against the Euler identity, leaving D2H - psi D2A.
    """
    cfg = gauge_view(cfg)
    a = action_of_xhat(ms, xhat)
    if a <= 0:
        raise NonpositiveAction("ratio Hessian needs positive action")
    h = calH_value(cfg, ms, xhat)
    psi = h / a
    _, vel = ms.synth(xhat)
    W = _w_field(vel)
    H = field_form_xi(ms, _conj_hess(cfg, W))
    dA = _action_diag(ms)
    H[np.diag_indices_from(H)] -= psi * dA
    gH = _complex_rows_to_xi(ms, calH_grad_xhat(cfg, ms, xhat))
    gA = _complex_rows_to_xi(ms, ms.sgn[:, None] * xhat)
    gpsi = (gH - psi * gA) / a
    H -= np.outer(gpsi, gA) + np.outer(gA, gpsi)
    return H / a


def eig_counts(H, null_tol=None):
    """(index, nullity, eigenvalues) of a symmetric matrix."""
    evals = np.linalg.eigvalsh(0.5 * (H + H.T))
    scale = max(np.max(np.abs(evals)), 1e-300)
    tol = 1e-6 * scale if null_tol is None else null_tol
    index = int(np.sum(evals < -tol))
    nullity = int(np.sum(np.abs(evals) <= tol))
    return index, nullity, evals


# -- saddle point reduction ----------------------------------------------------


def eta_hessian_upper(body, profile, s_samples=2000):
    """Upper bound for the Hessian of phi(gauge) over all of R^{2n}.

    hess = phi'' grad H (x) grad H^T + phi' hess H, and on the level {H = s}
    |grad H|^2 <= B s with B = 2 h_hi exactly for quadratic gauges; for other
    kinds B is the sampled supremum of the 0-homogeneous ratio |grad H|^2 / H
    over the unit sphere, padded by 25%.  A too-small estimate is caught
    downstream: the tail Hessian of the reduction is checked for positive
    definiteness before any factorization is used.
    """
    if isinstance(body, (Ellipsoid, QuadraticGauge)):
        Bcoef = 2.0 * body.h_hi
    else:
        rng = np.random.default_rng(2024)
        pts = rng.standard_normal((512, 2 * body.n))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        ratio = np.sum(body.gauge_grad(pts) ** 2, axis=-1) / body.gauge(pts)
        Bcoef = 1.25 * float(np.max(ratio))
    s = np.linspace(0.0, profile.s_eta * 1.02, s_samples)
    vals = profile.second(s) * Bcoef * s + profile.deriv(s) * body.h_hi
    return 1.02 * float(max(np.max(vals), profile.eta * body.h_hi))


def threshold_l(body, profile):
    """Smallest l with 2 pi (l + 1) > upper Hessian bound of the smoothed gauge."""
    hbar = eta_hessian_upper(body, profile)
    return int(np.ceil(hbar / TWO_PI))


def _tail_modes(l, L_big):
    return np.concatenate([np.arange(-L_big, 0), np.arange(l + 1, L_big + 1)])


def _infer_low_l(loop):
    ks = [k for k in loop.mode_numbers if np.any(loop.coeffs[loop.l_max + k] != 0)]
    if any(k < 0 for k in ks):
        raise ValueError("low-mode loop must be supported on positive modes")
    return max(ks) if ks else 1


class SaddleSolver:
    """Minimizes the free functional over the tail modes at fixed low modes.

    The restriction is strictly convex once 2 pi (l+1) exceeds the smoothed
    Hessian bound, so a safeguarded Newton iteration with the exact tail
    Hessian converges from any start; a cached factorization serves as a
    frozen Jacobian for the tiny steps taken inside finite differences.
    """

    def __init__(self, cfg, l, L_big, grid=None):
        if cfg.profile is None:
            raise ValueError("saddle reduction requires a profile")
        self.cfg = cfg
        self.l = int(l)
        self.L_big = int(L_big)
        if self.L_big < 2 * self.l:
            raise ValueError("L_big must be at least 2 l")
        lt = threshold_l(cfg.body, cfg.profile)
        if self.l < lt:
            raise ThresholdViolated(
                f"l = {self.l} below convexity threshold {lt} "
                f"(2 pi (l+1) must exceed the smoothed Hessian bound)"
            )
        G = max(cfg.grid_size, 4 * self.L_big) if grid is None else grid
        modes = np.concatenate([_tail_modes(self.l, self.L_big), np.arange(1, self.l + 1)])
        order = np.argsort(modes)
        self.ms = ModeSpace(modes[order], cfg.body.n, G)
        self.low_rows = np.where(self.ms.modes > 0, self.ms.modes <= self.l, False)
        self.tail_rows = ~self.low_rows
        nn = 2 * self.ms.n
        self.low_mask = np.repeat(self.low_rows, nn)
        self.tail_mask = np.repeat(self.tail_rows, nn)
        self._chol = None

    # xhat layout helpers

    def full_xhat(self, low_xhat, tail_xhat):
        xhat = np.zeros((len(self.ms.modes), self.ms.n), dtype=complex)
        xhat[self.low_rows] = low_xhat
        xhat[self.tail_rows] = tail_xhat
        return xhat

    def split_loop(self, loop):
        xhat = self.ms.xhat_from_loop(loop)
        return xhat[self.low_rows].copy(), xhat[self.tail_rows].copy()

    def tail_hessian(self, xhat):
        H = free_hessian_xi(self.cfg, self.ms, xhat)
        return H[np.ix_(self.tail_mask, self.tail_mask)]

    def refresh_factorization(self, xhat):
        from scipy.linalg import cho_factor

        Ht = self.tail_hessian(xhat)
        evmin = np.linalg.eigvalsh(Ht).min()
        if evmin <= 0:
            raise ThresholdViolated(
                f"tail Hessian not positive definite (lambda_min = {evmin:.3e})"
            )
        self._chol = cho_factor(Ht)
        return self._chol

    def solve(self, low_xhat, tail_init=None, tol=1e-12, max_iter=60, frozen=True):
        """Return the tail minimizer for the given low modes.

        With frozen=True and a cached factorization, iterates fixed-Jacobian
        Newton steps (adequate for finite-difference probes near the base
        point); falls back to refreshed factorizations when progress stalls.
        """
        from scipy.linalg import cho_solve

        nt = int(np.sum(self.tail_rows))
        tail = np.zeros((nt, self.ms.n), complex) if tail_init is None else tail_init.copy()
        scale = max(1.0, np.linalg.norm(self.ms.xi_of(self.full_xhat(low_xhat, tail))))
        if self._chol is None or not frozen:
            self.refresh_factorization(self.full_xhat(low_xhat, tail))
        last = np.inf
        for it in range(max_iter):
            xhat = self.full_xhat(low_xhat, tail)
            g = free_grad_xi(self.cfg, self.ms, xhat)[self.tail_mask]
            res = np.linalg.norm(g)
            if res <= tol * scale:
                return tail
            if res > 0.7 * last and it > 0:
                self.refresh_factorization(xhat)
            last = res
            step = cho_solve(self._chol, g)
            step_rows = step.reshape(nt, self.ms.n, 2)
            dz = (step_rows[..., 0] + 1j * step_rows[..., 1]) / (
                TWO_PI * self.ms.absk[self.tail_rows]
            )[:, None]
            tail = tail - dz
        raise NoConvergence(f"tail residual {res:.3e} after {max_iter} iterations")


def saddle_reduce(cfg, x_low, L_big, l=None):
    """Tail minimizer loop for low modes x_low (supported on 1..l).

    Returns the minimizing tail y* as a FourierLoop with band L_big; the
    reduced value is free value at x_low + y*.
    """
    l = _infer_low_l(x_low) if l is None else int(l)
    solver = SaddleSolver(cfg, l, L_big)
    low, tail0 = solver.split_loop(x_low)
    tail = solver.solve(low, tail_init=tail0 if np.any(tail0) else None, frozen=False)
    yhat = np.zeros((len(solver.ms.modes), solver.ms.n), dtype=complex)
    yhat[solver.tail_rows] = tail
    return solver.ms.loop(yhat, L_big)


def reduced_hessian(cfg, crit, l=None, fd_step=1e-5, richardson=True, asym_tol=1e-4):
    """Hessian of the l-reduced free functional at the critical point.

    Assembled column by column as symmetric finite differences of the exact
    low-mode gradient of the reduction (inner tail minimization warm-started
    from the critical point's own tail, frozen Jacobian).  Richardson
    extrapolation halves the step once.  Raises AsymmetryTooLarge when the
    pre-symmetrization asymmetry exceeds asym_tol relative to the norm.

    Returns (H, info) with H symmetrized and info carrying eigenvalues,
    index, nullity and the raw asymmetry.
    """
    if cfg.profile is None:
        raise ValueError("reduced Hessian requires a profile")
    lt = threshold_l(cfg.body, cfg.profile)
    l = lt if l is None else int(l)
    if l < lt:
        raise ThresholdViolated(f"l = {l} below convexity threshold {lt}")
    L_big = max(2 * l, cfg.l_max, crit.l_max)
    solver = SaddleSolver(cfg, l, L_big)
    low0, tail0 = solver.split_loop(crit)
    tail0 = solver.solve(low0, tail_init=tail0 if np.any(tail0) else None, frozen=False)
    solver.refresh_factorization(solver.full_xhat(low0, tail0))

    nlow = int(np.sum(solver.low_rows))
    dim = nlow * 2 * solver.ms.n
    absk_low = solver.ms.absk[solver.low_rows]

    def xi_to_low(xi_vec):
        rows = xi_vec.reshape(nlow, solver.ms.n, 2)
        return (rows[..., 0] + 1j * rows[..., 1]) / (TWO_PI * absk_low)[:, None]

    xi0 = solver.ms.xi_of(solver.full_xhat(low0, tail0))[solver.low_mask]

    def F(xi_low):
        low = xi_to_low(xi_low)
        tail = solver.solve(low, tail_init=tail0, frozen=True)
        xhat = solver.full_xhat(low, tail)
        return free_grad_xi(cfg, solver.ms, xhat)[solver.low_mask]

    def jacobian(h):
        J = np.empty((dim, dim))
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = h
            J[:, i] = (F(xi0 + e) - F(xi0 - e)) / (2.0 * h)
        return J

    J = jacobian(fd_step)
    if richardson:
        J = (4.0 * jacobian(fd_step / 2.0) - J) / 3.0
    scale = max(np.linalg.norm(J), 1e-300)
    asym = float(np.linalg.norm(J - J.T) / scale)
    if asym > asym_tol:
        raise AsymmetryTooLarge(f"relative asymmetry {asym:.3e} exceeds {asym_tol}")
    H = 0.5 * (J + J.T)
    index, nullity, evals = eig_counts(H)
    info = {
        "l": l,
        "L_big": L_big,
        "asymmetry": asym,
        "eigenvalues": evals,
        "index": index,
        "nullity": nullity,
    }
    return H, info


def reduced_hessian_schur(cfg, crit, l=None):
    """Independent route to the reduced Hessian: Schur complement of the
    exact full-band Hessian at the critical point.  Used as a cross-check
    oracle for the finite-difference assembly."""
    if cfg.profile is None:
        raise ValueError("requires a profile")
    lt = threshold_l(cfg.body, cfg.profile)
    l = lt if l is None else int(l)
    L_big = max(2 * l, cfg.l_max, crit.l_max)
    solver = SaddleSolver(cfg, l, L_big)
    low0, tail0 = solver.split_loop(crit)
    tail0 = solver.solve(low0, tail_init=tail0 if np.any(tail0) else None, frozen=False)
    xhat = solver.full_xhat(low0, tail0)
    H = free_hessian_xi(cfg, solver.ms, xhat)
    ll = np.ix_(solver.low_mask, solver.low_mask)
    lt_ix = np.ix_(solver.low_mask, solver.tail_mask)
    tt = np.ix_(solver.tail_mask, solver.tail_mask)
    Htt_inv_Htl = np.linalg.solve(H[tt], H[lt_ix].T)
    return H[ll] - H[lt_ix] @ Htt_inv_Htl
