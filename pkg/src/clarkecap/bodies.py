"""Strongly convex domains given by positively 2-homogeneous gauges.

Three kinds are supported:

* ``Ellipsoid(a)``      gauge  H(z) = pi * sum |z_i|^2 / a_i, boundary at H = 1;
* ``QuadraticGauge(Q)`` gauge  H(x) = <Q x, x> / 2 with Q symmetric positive
  definite (an ellipsoid in non-diagonal position);
* ``TransformedBody``   the set M C + b.  For b = 0 the gauge composes with
  M^{-1} in closed form.  For b != 0 the naive composition would not be
  2-homogeneous, so we use the genuine Minkowski gauge of the translated set:
  H(x) = mu(x)^2 with mu the gauge scaling factor (a scalar root-solve per
  point), while the Fenchel side stays in closed form through the support
  function identity H*(w) = h(w)^2 / 4 with h_{MC+b}(w) = h_C(M^T w) + <b, w>.

All evaluators are vectorized over a leading batch axis; the loop-space code
calls them on full quadrature grids.
"""

import json

import numpy as np

from .errors import (
    DimensionMismatch,
    NewtonDivergence,
    OriginNotInterior,
    SingularMatrix,
)
from .symplect import conformal_factor, is_symplectic, j0_matrix  # noqa: F401  (J0 lives here conceptually)


def _as_batch(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise DimensionMismatch(f"expected last axis {dim}, got {x.shape}")
    squeeze = x.ndim == 1
    return np.atleast_2d(x), squeeze


def _ret(val, squeeze):
    return val[0] if squeeze else val


class ConvexBody:
    """Base class; subclasses implement the primal and conjugate calculus.

    Interface (all batched over a leading axis):
      gauge(x), gauge_grad(x), gauge_hess(x)
      conj(w),  conj_grad(w),  conj_hess(w)
    plus cached strong-convexity bounds h_lo, h_hi for the gauge Hessian.
    """

    kind = "abstract"

    def __init__(self, n):
        self.n = int(n)
        self.dim = 2 * self.n
        self.h_lo = None
        self.h_hi = None

    # conveniences -----------------------------------------------------

    def support(self, w):
        """Support function h(w) = 2 sqrt(H*(w))."""
        return 2.0 * np.sqrt(self.conj(w))

    def to_dict(self):
        raise NotImplementedError

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def __repr__(self):
        return f"<{type(self).__name__} n={self.n}>"


class Ellipsoid(ConvexBody):
    """E(a_1..a_n): boundary where pi * sum |z_i|^2 / a_i = 1, a nondecreasing."""

    kind = "ellipsoid"

    def __init__(self, a):
        a = np.asarray(a, dtype=float)
        if a.ndim != 1 or np.any(a <= 0):
            raise ValueError("ellipsoid parameters must be positive reals")
        if np.any(np.diff(a) < 0):
            raise ValueError("ellipsoid parameters must be non-decreasing")
        super().__init__(len(a))
        self.a = a
        self._q = np.repeat(2.0 * np.pi / a, 2)  # diagonal of the gauge Hessian
        self.h_lo = float(self._q.min())
        self.h_hi = float(self._q.max())

    def gauge(self, x):
        x, sq = _as_batch(x, self.dim)
        return _ret(0.5 * np.sum(self._q * x * x, axis=-1), sq)

    def gauge_grad(self, x):
        x, sq = _as_batch(x, self.dim)
        return _ret(self._q * x, sq)

    def gauge_hess(self, x):
        x, sq = _as_batch(x, self.dim)
        H = np.broadcast_to(np.diag(self._q), (x.shape[0], self.dim, self.dim)).copy()
        return _ret(H, sq)

    def conj(self, w):
        w, sq = _as_batch(w, self.dim)
        return _ret(0.5 * np.sum((w * w) / self._q, axis=-1), sq)

    def conj_grad(self, w):
        w, sq = _as_batch(w, self.dim)
        return _ret(w / self._q, sq)

    def conj_hess(self, w):
        w, sq = _as_batch(w, self.dim)
        H = np.broadcast_to(np.diag(1.0 / self._q), (w.shape[0], self.dim, self.dim)).copy()
        return _ret(H, sq)

    def to_dict(self):
        return {"type": "ellipsoid", "a": [float(v) for v in self.a]}


class QuadraticGauge(ConvexBody):
    """Gauge H(x) = <Q x, x> / 2 for symmetric positive definite Q."""

    kind = "quadratic"

    def __init__(self, Q):
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] % 2:
            raise ValueError("Q must be a 2n x 2n matrix")
        if not np.allclose(Q, Q.T, atol=1e-10 * max(1.0, np.linalg.norm(Q))):
            raise ValueError("Q must be symmetric")
        super().__init__(Q.shape[0] // 2)
        self.Q = 0.5 * (Q + Q.T)
        evals = np.linalg.eigvalsh(self.Q)
        if evals[0] <= 0:
            raise ValueError("Q must be positive definite")
        self.h_lo = float(evals[0])
        self.h_hi = float(evals[-1])
        self._Qinv = np.linalg.inv(self.Q)
        self._Qinv = 0.5 * (self._Qinv + self._Qinv.T)

    def gauge(self, x):
        x, sq = _as_batch(x, self.dim)
        return _ret(0.5 * np.einsum("bi,ij,bj->b", x, self.Q, x), sq)

    def gauge_grad(self, x):
        x, sq = _as_batch(x, self.dim)
        return _ret(x @ self.Q, sq)

    def gauge_hess(self, x):
        x, sq = _as_batch(x, self.dim)
        H = np.broadcast_to(self.Q, (x.shape[0], self.dim, self.dim)).copy()
        return _ret(H, sq)

    def conj(self, w):
        w, sq = _as_batch(w, self.dim)
        return _ret(0.5 * np.einsum("bi,ij,bj->b", w, self._Qinv, w), sq)

    def conj_grad(self, w):
        w, sq = _as_batch(w, self.dim)
        return _ret(w @ self._Qinv, sq)

    def conj_hess(self, w):
        w, sq = _as_batch(w, self.dim)
        H = np.broadcast_to(self._Qinv, (w.shape[0], self.dim, self.dim)).copy()
        return _ret(H, sq)

    def to_dict(self):
        return {"type": "quadratic", "Q": [[float(v) for v in row] for row in self.Q]}


class TransformedBody(ConvexBody):
    """The set M C + b for a base body C, invertible M, translation b."""

    kind = "transform"

    def __init__(self, base, M, b=None, _skip_checks=False):
        super().__init__(base.n)
        M = np.asarray(M, dtype=float)
        if M.shape != (self.dim, self.dim):
            raise DimensionMismatch("M must be 2n x 2n for the base body")
        b = np.zeros(self.dim) if b is None else np.asarray(b, dtype=float)
        if b.shape != (self.dim,):
            raise DimensionMismatch("b must be a 2n vector")
        if not _skip_checks:
            det = np.linalg.det(M)
            if not np.isfinite(det) or abs(det) < 1e-300 or np.linalg.cond(M) > 1e12:
                raise SingularMatrix("transform matrix is numerically singular")
            if base.gauge(np.linalg.solve(M, -b)) >= 1.0:
                raise OriginNotInterior("origin is not interior to M C + b")
        self.base = base
        self.M = M
        self.b = b
        self.Minv = np.linalg.inv(M)
        self.symplectic = is_symplectic(M)
        self.translated = bool(np.any(b != 0))
        self._set_bounds()

    def _set_bounds(self):
        if not self.translated:
            s = np.linalg.svd(self.Minv, compute_uv=False)
            self.h_lo = self.base.h_lo * float(s[-1] ** 2)
            self.h_hi = self.base.h_hi * float(s[0] ** 2)
        else:
            # No closed rule once translation breaks the linear composition;
            # sample Hessian eigenvalues on a sphere and pad both ways.
            rng = np.random.default_rng(12345)
            pts = rng.standard_normal((256, self.dim))
            pts /= np.linalg.norm(pts, axis=1, keepdims=True)
            H = self.gauge_hess(pts)
            evals = np.linalg.eigvalsh(H)
            self.h_lo = 0.75 * float(evals[:, 0].min())
            self.h_hi = 1.35 * float(evals[:, -1].max())

    # Primal side -------------------------------------------------------

    def gauge(self, x):
        if not self.translated:
            x, sq = _as_batch(x, self.dim)
            return _ret(self.base.gauge(x @ self.Minv.T), sq)
        x, sq = _as_batch(x, self.dim)
        lam = self._minkowski(x)
        return _ret(lam * lam, sq)

    def gauge_grad(self, x):
        if not self.translated:
            x, sq = _as_batch(x, self.dim)
            return _ret(self.base.gauge_grad(x @ self.Minv.T) @ self.Minv, sq)
        # grad H = 2 lam grad F(u) / <grad F(u), u> at u = x / lam,
        # from implicit differentiation of F(x / lam(x)) = 1.
        x, sq = _as_batch(x, self.dim)
        lam = self._minkowski(x)
        u = x / lam[:, None]
        g = self._F_grad(u)
        c = np.sum(g * u, axis=-1)
        return _ret(2.0 * lam[:, None] * g / c[:, None], sq)

    def gauge_hess(self, x):
        if not self.translated:
            x, sq = _as_batch(x, self.dim)
            Hb = self.base.gauge_hess(x @ self.Minv.T)
            return _ret(np.einsum("ji,bjk,kl->bil", self.Minv, Hb, self.Minv), sq)
        # Inverse-function relation: hess H(x) = [hess H*(grad H(x))]^{-1}.
        x, sq = _as_batch(x, self.dim)
        w = self.gauge_grad(x)
        Hc = self.conj_hess(w)
        H = np.linalg.inv(Hc)
        return _ret(0.5 * (H + np.swapaxes(H, -1, -2)), sq)

    # Conjugate side ------------------------------------------------------

    def conj(self, w):
        w, sq = _as_batch(w, self.dim)
        if not self.translated:
            return _ret(self.base.conj(w @ self.M), sq)
        h = 2.0 * np.sqrt(self.base.conj(w @ self.M)) + w @ self.b
        return _ret(0.25 * h * h, sq)

    def conj_grad(self, w):
        w, sq = _as_batch(w, self.dim)
        if not self.translated:
            return _ret(self.base.conj_grad(w @ self.M) @ self.M.T, sq)
        h, dh = self._support_grad(w)
        return _ret(0.5 * h[:, None] * dh, sq)

    def conj_hess(self, w):
        w, sq = _as_batch(w, self.dim)
        if not self.translated:
            Hb = self.base.conj_hess(w @ self.M)
            return _ret(np.einsum("ij,bjk,lk->bil", self.M, Hb, self.M), sq)
        h, dh = self._support_grad(w)
        v = w @ self.M
        cb = self.base.conj(v)
        gb = self.base.conj_grad(v)
        Hb = self.base.conj_hess(v)
        # hess h = M [Hb / sqrt(cb) - gb gb^T / (2 cb^{3/2})] M^T
        inner = Hb / np.sqrt(cb)[:, None, None] - np.einsum(
            "bi,bj->bij", gb, gb
        ) / (2.0 * cb[:, None, None] ** 1.5)
        d2h = np.einsum("ij,bjk,lk->bil", self.M, inner, self.M)
        H = 0.5 * np.einsum("bi,bj->bij", dh, dh) + 0.5 * h[:, None, None] * d2h
        return _ret(H, sq)

    # internals ----------------------------------------------------------

    def _F(self, y):
        """Defining function of the set: F(y) = H_base(M^{-1}(y - b))."""
        return self.base.gauge((y - self.b) @ self.Minv.T)

    def _F_grad(self, y):
        return self.base.gauge_grad((y - self.b) @ self.Minv.T) @ self.Minv

    def _support_grad(self, w):
        v = w @ self.M
        cb = self.base.conj(v)
        h = 2.0 * np.sqrt(cb) + w @ self.b
        dh = (self.base.conj_grad(v) / np.sqrt(cb)[:, None]) @ self.M.T + self.b
        return h, dh

    def _minkowski(self, x):
        """Batched gauge scaling: the lambda > 0 with F(x / lambda) = 1.

        phi(lam) = F(x / lam) decreases through 1 exactly once (the origin is
        interior), so bracketed bisection plus a Newton polish is safe.
        """
        norms = np.linalg.norm(x, axis=-1)
        lam = np.where(norms > 0, np.sqrt(np.maximum(self._F(x), 1e-300)), 1.0)
        lam = np.maximum(lam, 1e-150)
        lo = lam.copy()
        hi = lam.copy()
        # expand to a bracket: phi(lo) >= 1 >= phi(hi)
        for _ in range(200):
            vlo = self._F(x / lo[:, None])
            need = (vlo < 1.0) & (norms > 0)
            if not np.any(need):
                break
            lo[need] *= 0.5
        for _ in range(200):
            vhi = self._F(x / hi[:, None])
            need = (vhi > 1.0) & (norms > 0)
            if not np.any(need):
                break
            hi[need] *= 2.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            v = self._F(x / mid[:, None])
            high = v > 1.0
            lo = np.where(high, mid, lo)
            hi = np.where(high, hi, mid)
        lam = 0.5 * (lo + hi)
        # Newton polish on phi(lam) - 1
        for _ in range(8):
            u = x / lam[:, None]
            g = self._F_grad(u)
            num = self._F(u) - 1.0
            dphi = -np.sum(g * x, axis=-1) / lam**2
            step = np.where(np.abs(dphi) > 0, num / dphi, 0.0)
            lam = np.where(norms > 0, lam - step, lam)
        return np.where(norms > 0, lam, 0.0)

    def to_dict(self):
        return {
            "type": "transform",
            "base": self.base.to_dict(),
            "M": [[float(v) for v in row] for row in self.M],
            "b": [float(v) for v in self.b],
        }


# -- module-level operation wrappers (vectorized, origin-guarded) ---------


def gauge_eval(body, x):
    return body.gauge(x)


def _require_nonzero(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and not np.any(x != 0):
        raise ValueError("gauge derivatives are undefined at the origin")
    return x


def gauge_grad(body, x):
    return body.gauge_grad(_require_nonzero(x))


def gauge_hess(body, x):
    return body.gauge_hess(_require_nonzero(x))


def fenchel_eval(body, w):
    return body.conj(w)


def fenchel_grad(body, w):
    return body.conj_grad(_require_nonzero(w))


def fenchel_hess(body, w):
    return body.conj_hess(_require_nonzero(w))


def support_eval(body, w):
    return body.support(w)


def fenchel_grad_newton(body, w, tol=1e-12, max_iter=50):
    """Generic conjugate gradient map by damped Newton on grad H(y) = w.

    Newton direction from the gauge Hessian, Armijo backtracking on the
    convex objective H(y) - <w, y>; warm start from the quadratic proxy
    y0 = w / h_hi.  Kept as the fallback route for bodies without a closed
    conjugate and as an independent check of the analytic conj_grad.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise ValueError("fenchel_grad_newton expects a single covector")
    scale = np.linalg.norm(w)
    if scale == 0:
        return np.zeros_like(w)
    y = w / body.h_hi

    def obj(y):
        return body.gauge(y) - float(w @ y)

    f = obj(y)
    for _ in range(max_iter):
        g = body.gauge_grad(y) - w
        res = np.linalg.norm(g)
        if res <= tol * max(1.0, scale):
            return y
        H = body.gauge_hess(y)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = g / body.h_hi
        t = 1.0
        for _ in range(40):
            y_new = y - t * step
            f_new = obj(y_new)
            if f_new <= f - 1e-4 * t * float(g @ step):
                break
            t *= 0.5
        y, f = y_new, f_new
    g = body.gauge_grad(y) - w
    if np.linalg.norm(g) <= tol * max(1.0, scale) * 100:
        return y
    raise NewtonDivergence(
        f"residual {np.linalg.norm(g):.3e} after {max_iter} iterations"
    )


def transform(body, M, b=None):
    """Affine image M body + b as a new ConvexBody (records symplecticity)."""
    return TransformedBody(body, M, b)


# -- JSON body specs ---------------------------------------------------------


def parse_body(spec):
    """Build a ConvexBody from the JSON body spec (dict or JSON string)."""
    if isinstance(spec, str):
        spec = json.loads(spec)
    kind = spec.get("type")
    if kind == "ellipsoid":
        return Ellipsoid(spec["a"])
    if kind == "quadratic":
        return QuadraticGauge(np.asarray(spec["Q"], dtype=float))
    if kind == "transform":
        base = parse_body(spec["base"])
        M = np.asarray(spec["M"], dtype=float)
        b = np.asarray(spec.get("b", np.zeros(2 * base.n)), dtype=float)
        return TransformedBody(base, M, b)
    raise ValueError(f"unknown body type {kind!r}")


def effective_ellipsoid(body):
    """Return (a, factor-updated) ellipsoid semiaxes if the body has an exact
    ellipsoid action spectrum, else None.

    Ellipsoids qualify directly; transformed bodies qualify when every layer
    is conformally symplectic (translations are always harmless): a factor c
    in M^T J0 M = c J0 scales all actions, hence semiaxes, by c.
    """
    if isinstance(body, Ellipsoid):
        return body.a.copy()
    if isinstance(body, TransformedBody):
        inner = effective_ellipsoid(body.base)
        if inner is None:
            return None
        c = conformal_factor(body.M)
        if c is None:
            return None
        return np.sort(inner * c)
    return None
