"""Admissible convex smoothings of the gauge and the smoothed conjugate map.

A profile is a C^2 convex function phi on [0, inf):

    phi(s) = delta * s - zeta_eps            on [0, s_eps]
    phi(s) = eta   * s - zeta_eta            on [s_eta, inf)
    strictly convex C^2 bridge in between.

The bridge is built on the derivative: phi'(s) interpolates delta -> eta by a
quintic smoothstep in u = (s - s_eps)/(s_eta - s_eps), which has vanishing
value and curvature of phi'' at both ends (so phi is globally C^2) and
phi'' > 0 strictly inside.  Integrating gives a single degree-6 polynomial
piece; its coefficients are what the JSON interface serializes.

Two validated families are supported.  "FstarLin" carries the Legendre-value
conditions at the slope preimages of the extreme spectrum values below eta;
"FLin" adds the sign conditions at s = 1 and the spectral-gap bound.  The
checker reports every inequality with its numeric margin; the builder tunes
the free knobs over a deterministic ladder until all margins are positive.

The smoothed conjugate gradient is k(w) * conj_grad(w) where k solves the
scalar equation phi'(k^2 H*(w)) k = 1; the solution is unique and lies in
[1/eta, 1/delta], which brackets the safeguarded Newton iteration.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketFailure, EtaInSpectrum, InfeasibleConditions

ETA_SPECTRUM_MARGIN = 1e-9


def _smoothstep(u):
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def _smoothstep_prime(u):
    return 30.0 * u * u * (1.0 - u) ** 2


def _smoothstep_integral(u):
    # int_0^u S = 2.5 u^4 - 3 u^5 + u^6
    return u**4 * (2.5 + u * (-3.0 + u))


def _smoothstep_inverse(y):
    """Inverse of the quintic smoothstep on [0, 1] by bisection."""
    y = np.asarray(y, dtype=float)
    lo = np.zeros_like(y)
    hi = np.ones_like(y)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        below = _smoothstep(mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class SpectrumContext:
    """Validation context: known/detected action values and derived scales."""

    values: tuple
    eps: float
    t_min: float
    t_max: float
    gap: float
    numeric: bool = False

    @classmethod
    def from_values(cls, values, eta, numeric=False):
        vals = tuple(sorted(float(v) for v in values))
        if not vals or vals[0] <= 0:
            raise ValueError("spectrum must contain positive values")
        safety = 0.99 if numeric else 1.0
        eps = 0.5 * vals[0] * safety
        below = [v for v in vals if v < eta]
        t_min = vals[0]
        t_max = max(below) if below else vals[0]
        distinct = sorted(set(vals))
        gap = min(np.diff(distinct)) if len(distinct) > 1 else np.inf
        return cls(vals, eps, t_min, t_max, float(gap), numeric)


@dataclass(frozen=True)
class ApproximationProfile:
    delta: float
    zeta_eps: float
    s_eps: float
    eta: float
    zeta_eta: float
    s_eta: float
    family: str  # "FstarLin" | "FLin"
    context: SpectrumContext = field(repr=False)

    # -- piecewise evaluation -------------------------------------------

    def _u(self, s):
        return (s - self.s_eps) / (self.s_eta - self.s_eps)

    def value(self, s):
        s = np.asarray(s, dtype=float)
        lo = self.delta * s - self.zeta_eps
        hi = self.eta * s - self.zeta_eta
        u = np.clip(self._u(s), 0.0, 1.0)
        width = self.s_eta - self.s_eps
        mid = (
            self._phi_eps()
            + self.delta * (s - self.s_eps)
            + (self.eta - self.delta) * width * _smoothstep_integral(u)
        )
        out = np.where(s <= self.s_eps, lo, np.where(s >= self.s_eta, hi, mid))
        return out if out.ndim else float(out)

    def deriv(self, s):
        s = np.asarray(s, dtype=float)
        u = np.clip(self._u(s), 0.0, 1.0)
        out = self.delta + (self.eta - self.delta) * _smoothstep(u)
        return out if out.ndim else float(out)

    def second(self, s):
        s = np.asarray(s, dtype=float)
        u = self._u(s)
        inside = (u > 0.0) & (u < 1.0)
        width = self.s_eta - self.s_eps
        out = np.where(
            inside,
            (self.eta - self.delta) * _smoothstep_prime(np.clip(u, 0.0, 1.0)) / width,
            0.0,
        )
        return out if out.ndim else float(out)

    def _phi_eps(self):
        return self.delta * self.s_eps - self.zeta_eps

    def slope_preimage(self, T):
        """The unique s in (s_eps, s_eta) with phi'(s) = T (delta < T < eta)."""
        if not (self.delta < T < self.eta):
            raise ValueError("slope outside (delta, eta)")
        frac = (T - self.delta) / (self.eta - self.delta)
        u = float(_smoothstep_inverse(frac))
        return self.s_eps + u * (self.s_eta - self.s_eps)

    def legendre_value(self, s):
        """phi'(s) s - phi(s), the running critical-value function."""
        return self.deriv(s) * s - self.value(s)

    # -- serialization -----------------------------------------------------

    def to_dict(self):
        width = self.s_eta - self.s_eps
        amp = (self.eta - self.delta) * width
        coeffs = [
            self._phi_eps(),
            self.delta * width,
            0.0,
            0.0,
            2.5 * amp,
            -3.0 * amp,
            amp,
        ]
        return {
            "delta": self.delta,
            "zeta_eps": self.zeta_eps,
            "s_eps": self.s_eps,
            "eta": self.eta,
            "zeta_eta": self.zeta_eta,
            "s_eta": self.s_eta,
            "knots": [self.s_eps, self.s_eta],
            "coeffs": coeffs,
            "family": self.family,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _make_profile(delta, zeta_eps, s_eps, s_eta, eta, family, context):
    width = s_eta - s_eps
    phi_eta = (
        delta * s_eps
        - zeta_eps
        + delta * width
        + (eta - delta) * width * _smoothstep_integral(1.0)
    )
    zeta_eta = eta * s_eta - phi_eta
    return ApproximationProfile(
        delta=float(delta),
        zeta_eps=float(zeta_eps),
        s_eps=float(s_eps),
        eta=float(eta),
        zeta_eta=float(zeta_eta),
        s_eta=float(s_eta),
        family=family,
        context=context,
    )


# -- validation ------------------------------------------------------------


@dataclass
class ConditionRecord:
    name: str
    passed: bool
    margin: float
    detail: str = ""


def profile_check(profile, grid_points=10_000):
    """Evaluate every defining inequality of the declared family.

    Returns a list of ConditionRecord with numeric margins (positive means
    the condition holds with that much slack).  Failures are data, not
    exceptions.
    """
    p = profile
    ctx = p.context
    eps = ctx.eps
    records = []

    def rec(name, margin, detail=""):
        records.append(ConditionRecord(name, bool(margin > 0), float(margin), detail))

    rec("zeta_eps_range", min(p.zeta_eps, eps - p.zeta_eps), f"zeta_eps={p.zeta_eps:.6g}")
    rec("delta_range", min(p.delta, eps / 4.0 - p.delta), f"delta={p.delta:.6g}")
    rec("eta_above_min_spectrum", p.eta - ctx.t_min)
    dist = min(abs(p.eta - v) for v in ctx.values)
    rec("eta_not_in_spectrum", dist - ETA_SPECTRUM_MARGIN, f"distance={dist:.3e}")

    s_grid = np.linspace(p.s_eps, p.s_eta, grid_points)
    interior = s_grid[(s_grid > p.s_eps) & (s_grid < p.s_eta)]
    rec("convex_middle", float(np.min(p.second(interior))))
    dgrid = p.deriv(np.linspace(0.0, p.s_eta * 1.5, grid_points))
    rec("slope_monotone", float(np.min(np.diff(dgrid))) + 1e-18)

    s_min = p.slope_preimage(ctx.t_min) if p.delta < ctx.t_min < p.eta else None
    s_max = p.slope_preimage(ctx.t_max) if p.delta < ctx.t_max < p.eta else None
    if s_min is None or s_max is None:
        rec("slope_preimages_exist", -1.0, "T_min or T_max outside (delta, eta)")
        return records
    rec("legendre_at_smin_above_eps", p.legendre_value(s_min) - eps, f"s_min={s_min:.6g}")
    rec("legendre_at_smax_below_eta", p.eta - p.legendre_value(s_max), f"s_max={s_max:.6g}")

    if p.family == "FLin":
        rec("s_eps_below_one", 1.0 - p.s_eps)
        rec("s_eta_above_one", p.s_eta - 1.0)
        rec("phi_at_one_negative", -p.value(1.0))
        rec("slope_at_one_below_Tmin", ctx.t_min - p.deriv(1.0))
        bound = min(1.0 / p.eta, ctx.gap / 3.0)
        g_val = p.deriv(s_max) * (s_max - 1.0) - p.value(s_max)
        rec("gap_condition", bound - g_val, f"g(s_max)={g_val:.6g}, bound={bound:.6g}")
    return records


def _all_pass(records):
    return all(r.passed for r in records)


def build_profile(eta, spectrum, family="FstarLin", numeric_spectrum=False):
    """Construct a validated profile with slope `eta` at infinity.

    spectrum: sorted positive action values (detected or exact).  The knob
    ladder is deterministic, so identical inputs give identical profiles.
    Raises EtaInSpectrum / InfeasibleConditions on failure, the latter with
    the best failing report attached.
    """
    spectrum = sorted(float(v) for v in spectrum)
    if not spectrum:
        raise ValueError("spectrum must be non-empty")
    if eta <= spectrum[0]:
        raise InfeasibleConditions(f"eta={eta} must exceed min spectrum {spectrum[0]}")
    if min(abs(eta - v) for v in spectrum) <= ETA_SPECTRUM_MARGIN:
        raise EtaInSpectrum(f"eta={eta} within {ETA_SPECTRUM_MARGIN} of a spectrum value")
    ctx = SpectrumContext.from_values(spectrum, eta, numeric=numeric_spectrum)
    eps = ctx.eps

    best = None
    best_report = None
    if family == "FstarLin":
        for s_eta in (2.0, 1.6, 1.3, 1.1, 0.95, 0.8, 0.6, 2.5, 3.0):
            for s_eps in (0.25, 0.4, 0.1, 0.55):
                if s_eps >= s_eta - 0.05:
                    continue
                for zeta_eps in (eps / 2, eps / 4, 0.9 * eps, eps / 10):
                    for delta in (eps / 8, eps / 20, eps / 4.5):
                        prof = _make_profile(delta, zeta_eps, s_eps, s_eta, eta, family, ctx)
                        report = profile_check(prof, grid_points=2000)
                        if _all_pass(report):
                            return prof
                        score = sum(min(r.margin, 0.0) for r in report)
                        if best is None or score > best[0]:
                            best = (score, prof)
                            best_report = report
    elif family == "FLin":
        t_max = ctx.t_max
        gamma = min(1.0 / eta, ctx.gap / 3.0)
        for kink in (0.25, 0.12, 0.4, 0.06):
            s_c = 1.0 + kink * gamma / t_max
            for w_frac in (0.5, 0.25, 0.75, 0.1):
                w = min(w_frac * gamma / t_max, 0.5 * (s_c - 0.5))
                s_eps, s_eta = s_c - w, max(s_c + w, 1.0 + 1e-4)
                if not (0 < s_eps < 1.0 < s_eta):
                    continue
                for delta in (eps / 8, eps / 20):
                    for c0_frac in (0.25, 0.1, 0.5):
                        c0 = c0_frac * gamma
                        width = s_eta - s_eps
                        u1 = (1.0 - s_eps) / width
                        int_to_one = delta * (1.0 - s_eps) + (eta - delta) * width * _smoothstep_integral(u1)
                        zeta_eps = delta * s_eps + int_to_one + c0
                        if not (0 < zeta_eps < eps):
                            continue
                        prof = _make_profile(delta, zeta_eps, s_eps, s_eta, eta, family, ctx)
                        report = profile_check(prof, grid_points=2000)
                        if _all_pass(report):
                            return prof
                        score = sum(min(r.margin, 0.0) for r in report)
                        if best is None or score > best[0]:
                            best = (score, prof)
                            best_report = report
    else:
        raise ValueError(f"unknown family {family!r}")

    failing = [r.name for r in best_report if not r.passed] if best_report else []
    raise InfeasibleConditions(
        f"no admissible {family} profile for eta={eta}; failing: {failing}",
        report=best_report,
    )


# -- smoothed conjugate calculus --------------------------------------------


def solve_k(profile, conj_vals, tol=1e-13, max_iter=200):
    """Vectorized solve of phi'(k^2 u) k = 1 for each u = H*(w) >= 0.

    The residual is strictly increasing in k, and the root lies in
    [1/eta, 1/delta]; points already in a linear regime short-circuit to the
    exact endpoint value.
    """
    u = np.atleast_1d(np.asarray(conj_vals, dtype=float))
    if np.any(u < -1e-15):
        raise ValueError("conjugate values must be nonnegative")
    u = np.maximum(u, 0.0)
    k_lo = 1.0 / profile.eta
    k_hi = 1.0 / profile.delta
    k = np.empty_like(u)

    tail = u * k_lo**2 >= profile.s_eta
    head = u * k_hi**2 <= profile.s_eps
    k[tail] = k_lo
    k[head] = k_hi
    todo = ~(tail | head)
    if np.any(todo):
        ut = u[todo]
        lo = np.full(ut.shape, k_lo)
        hi = np.full(ut.shape, k_hi)
        kt = np.sqrt(lo * hi)
        for _ in range(max_iter):
            s = kt * kt * ut
            r = profile.deriv(s) * kt - 1.0
            if np.all(np.abs(r) < tol):
                break
            drdk = profile.second(s) * 2.0 * kt * kt * ut + profile.deriv(s)
            lo = np.where(r < 0, kt, lo)
            hi = np.where(r > 0, kt, hi)
            step = np.where(drdk > 0, r / np.where(drdk > 0, drdk, 1.0), 0.0)
            knew = kt - step
            bad = (knew <= lo) | (knew >= hi) | ~np.isfinite(knew)
            kt = np.where(bad, 0.5 * (lo + hi), knew)
        s = kt * kt * ut
        r = profile.deriv(s) * kt - 1.0
        if np.any(np.abs(r) >= 1e-10):
            raise BracketFailure("scalar equation for k failed to converge")
        k[todo] = kt
    out = np.clip(k, k_lo, k_hi)
    return out if np.asarray(conj_vals).ndim else float(out[0])


def smoothed_fenchel_grad(body, profile, w):
    """Gradient of the conjugate of phi(gauge): k(w) * conj_grad(w)."""
    w = np.asarray(w, dtype=float)
    squeeze = w.ndim == 1
    wb = np.atleast_2d(w)
    u = body.conj(wb)
    k = solve_k(profile, u)
    out = np.asarray(k)[:, None] * body.conj_grad(wb)
    return out[0] if squeeze else out


def smoothed_conj(body, profile, w):
    """Value of the smoothed conjugate: 2 k H*(w) - phi(k^2 H*(w))."""
    w = np.asarray(w, dtype=float)
    squeeze = w.ndim == 1
    u = np.atleast_1d(body.conj(np.atleast_2d(w)))
    k = np.atleast_1d(solve_k(profile, u))
    out = 2.0 * k * u - profile.value(k * k * u)
    return float(out[0]) if squeeze else out


def smoothed_conj_hess(body, profile, w):
    """Hessian of the smoothed conjugate.

    From k grad H* : hess = k hess H* + grad H* (grad k)^T, with
    grad k = -k^3 phi'' / (phi' + 2 k^2 u phi'') * grad H*, all evaluated at
    s = k^2 u.  The rank-one term is symmetric because grad k is parallel to
    grad H*.
    """
    w = np.asarray(w, dtype=float)
    squeeze = w.ndim == 1
    wb = np.atleast_2d(w)
    u = body.conj(wb)
    k = np.asarray(solve_k(profile, u))
    g = body.conj_grad(wb)
    Hc = body.conj_hess(wb)
    s = k * k * u
    d1 = profile.deriv(s)
    d2 = profile.second(s)
    denom = d1 + 2.0 * k * k * u * d2
    coef = -(k**3) * d2 / denom
    H = k[:, None, None] * Hc + coef[:, None, None] * np.einsum("bi,bj->bij", g, g)
    return H[0] if squeeze else H
