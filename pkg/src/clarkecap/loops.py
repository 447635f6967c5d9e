"""Finite Fourier model of mean-zero loops in R^{2n}.

A loop is x(t) = sum_k exp(2 pi k t J0) xhat(k) with k in [-l_max, l_max],
xhat(0) = 0.  In the per-plane complex packing the mode acts as
exp(2 pi i k t), so synthesis and all adjoints are plain FFTs.  Closed
forms used throughout:

    action        A(x)      = pi  sum_k k   |xhat(k)|^2
    h12 norm^2    |x|_1/2^2 = 2pi sum_k |k| |xhat(k)|^2
    h1 seminorm^2           = (2pi)^2 sum_k k^2 |xhat(k)|^2

The closed form for the action is derived from the half scalar-product of
velocity against J0 x and is verified against grid quadrature in the tests;
it is the canonical implementation.
"""

import json

import numpy as np

from .errors import GridTooCoarse
from .symplect import pack, unpack

TWO_PI = 2.0 * np.pi


class FourierLoop:
    """Immutable mean-zero loop stored by complex-rotation Fourier modes.

    coeffs is a complex array of shape (2*l_max + 1, n); row l_max + k holds
    the packed coefficient of mode k.  The k = 0 row is identically zero.
    """

    __slots__ = ("n", "l_max", "coeffs")

    def __init__(self, n, l_max, coeffs=None):
        if l_max < 1:
            raise ValueError("l_max must be >= 1")
        self.n = int(n)
        self.l_max = int(l_max)
        if coeffs is None:
            coeffs = np.zeros((2 * self.l_max + 1, self.n), dtype=complex)
        else:
            coeffs = np.asarray(coeffs, dtype=complex)
            if coeffs.shape != (2 * self.l_max + 1, self.n):
                raise ValueError("coeffs shape mismatch")
            coeffs = coeffs.copy()
        coeffs[self.l_max] = 0.0  # mean-zero space: no constant mode
        coeffs.setflags(write=False)
        self.coeffs = coeffs

    # -- constructors -------------------------------------------------

    @classmethod
    def from_modes(cls, n, l_max, modes):
        """Build from {k: real 2n-vector} with nonzero integer keys."""
        C = np.zeros((2 * l_max + 1, n), dtype=complex)
        for k, vec in modes.items():
            k = int(k)
            if k == 0 or abs(k) > l_max:
                raise ValueError(f"mode {k} outside [-l_max, l_max] or zero")
            vec = np.asarray(vec, dtype=float)
            if vec.shape != (2 * n,):
                raise ValueError("mode coefficient must be a 2n vector")
            C[l_max + k] = pack(vec)
        return cls(n, l_max, C)

    def with_coeffs(self, coeffs):
        return FourierLoop(self.n, self.l_max, coeffs)

    # -- accessors ----------------------------------------------------

    @property
    def mode_numbers(self):
        return np.arange(-self.l_max, self.l_max + 1)

    def coeff(self, k):
        """Real 2n-vector coefficient of mode k."""
        if abs(k) > self.l_max:
            return np.zeros(2 * self.n)
        return unpack(self.coeffs[self.l_max + k])

    # -- algebra ------------------------------------------------------

    def __add__(self, other):
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, s):
        return self.with_coeffs(self.coeffs * float(s))

    __rmul__ = __mul__

    def _check_compatible(self, other):
        if self.n != other.n or self.l_max != other.l_max:
            raise ValueError("loops have different n or l_max")

    # -- functionals ---------------------------------------------------

    def action(self):
        """Symplectic area pi * sum_k k |xhat(k)|^2 (exact in mode space)."""
        k = self.mode_numbers
        return float(np.pi * np.sum(k[:, None] * np.abs(self.coeffs) ** 2))

    def h12_norm(self):
        k = np.abs(self.mode_numbers)
        return float(np.sqrt(TWO_PI * np.sum(k[:, None] * np.abs(self.coeffs) ** 2)))

    def h1_seminorm(self):
        k = self.mode_numbers
        return float(TWO_PI * np.sqrt(np.sum(k[:, None] ** 2 * np.abs(self.coeffs) ** 2)))

    def l2_norm(self):
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def h12_inner(self, other):
        self._check_compatible(other)
        k = np.abs(self.mode_numbers)
        return float(TWO_PI * np.sum(k[:, None] * np.real(np.conj(self.coeffs) * other.coeffs)))

    # -- synthesis ------------------------------------------------------

    def synthesize(self, grid_size):
        """Sample positions and velocities at t_j = j / grid_size.

        Exact trigonometric synthesis; velocity of mode k carries the factor
        2 pi k J0, i.e. 2 pi i k in the complex packing.
        """
        G = int(grid_size)
        if G < 4 * self.l_max:
            raise GridTooCoarse(f"grid {G} < 4*l_max = {4 * self.l_max}")
        pos_c = self._synth_complex(self.coeffs, G)
        k = self.mode_numbers
        vel_c = self._synth_complex(self.coeffs * (TWO_PI * 1j * k)[:, None], G)
        return unpack(pos_c), unpack(vel_c)

    def _synth_complex(self, C, G):
        spec = np.zeros((G, self.n), dtype=complex)
        for k in range(-self.l_max, self.l_max + 1):
            spec[k % G] += C[self.l_max + k]
        return np.fft.ifft(spec, axis=0) * G

    # -- projections and the circle action -------------------------------

    def project_modes(self, l):
        """Keep modes 1..l only (the positive low-mode subspace)."""
        if l < 1:
            raise ValueError("l must be >= 1")
        C = np.zeros_like(self.coeffs)
        hi = min(l, self.l_max)
        C[self.l_max + 1:self.l_max + hi + 1] = self.coeffs[self.l_max + 1:self.l_max + hi + 1]
        return self.with_coeffs(C)

    def keep_modes(self, modes):
        """Zero every coefficient except the listed mode numbers."""
        C = np.zeros_like(self.coeffs)
        for k in modes:
            if abs(k) <= self.l_max and k != 0:
                C[self.l_max + k] = self.coeffs[self.l_max + k]
        return self.with_coeffs(C)

    def shift(self, theta):
        """Time shift x(. - theta): mode k picks up exp(-2 pi i k theta)."""
        k = self.mode_numbers
        phase = np.exp(-TWO_PI * 1j * k * theta)
        return self.with_coeffs(self.coeffs * phase[:, None])

    # -- serialization ---------------------------------------------------

    def to_dict(self):
        coeffs = {}
        for k in self.mode_numbers:
            if k == 0:
                continue
            row = self.coeffs[self.l_max + k]
            if np.any(row != 0):
                coeffs[str(int(k))] = [float(v) for v in unpack(row)]
        return {"n": self.n, "l_max": self.l_max, "coeffs": coeffs}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        modes = {int(k): np.asarray(v, dtype=float) for k, v in d["coeffs"].items()}
        return cls.from_modes(d["n"], d["l_max"], modes)

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))


def plane_circle(n, l_max, plane, mode=1, radius=1.0, phase=0.0):
    """Mode-`mode` circle of given radius in coordinate symplectic plane `plane`."""
    vec = np.zeros(2 * n)
    vec[2 * plane] = radius * np.cos(phase)
    vec[2 * plane + 1] = radius * np.sin(phase)
    return FourierLoop.from_modes(n, l_max, {mode: vec})


def normalized(loop):
    """Rescale onto the action-one slice (requires positive action)."""
    a = loop.action()
    if a <= 0:
        raise ValueError("cannot normalize a loop of nonpositive action")
    return loop * (1.0 / np.sqrt(a))


def circle_distance(a, b, coarse=720):
    """min over the circle action of |a - b(. - theta)| in the h12 norm.

    The h12 pairing of a with the shifted b is a trigonometric polynomial in
    theta; we scan `coarse` equispaced angles and refine the best one by
    golden-section search.  Zero (up to tolerance) iff a and b lie on the
    same reparameterization orbit.
    """
    a._check_compatible(b)
    k = a.mode_numbers
    wk = TWO_PI * np.abs(k).astype(float)
    cross = np.sum(np.conj(a.coeffs) * b.coeffs * wk[:, None], axis=1)  # per mode
    na2 = TWO_PI * np.sum(np.abs(k)[:, None] * np.abs(a.coeffs) ** 2)
    nb2 = TWO_PI * np.sum(np.abs(k)[:, None] * np.abs(b.coeffs) ** 2)

    def dist2(theta):
        ph = np.exp(-TWO_PI * 1j * k * theta)
        inner = np.real(np.sum(cross * ph))
        return max(na2 + nb2 - 2.0 * inner, 0.0)

    thetas = np.arange(coarse) / coarse
    vals = [dist2(t) for t in thetas]
    i0 = int(np.argmin(vals))
    lo = thetas[i0] - 1.0 / coarse
    hi = thetas[i0] + 1.0 / coarse
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    c = hi - gr * (hi - lo)
    d = lo + gr * (hi - lo)
    fc, fd = dist2(c), dist2(d)
    for _ in range(80):
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - gr * (hi - lo)
            fc = dist2(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + gr * (hi - lo)
            fd = dist2(d)
    return float(np.sqrt(min(fc, fd)))
