"""Linear symplectic utilities for interleaved coordinates.

One global convention is used everywhere: points of R^{2n} are stored as
(x_1, y_1, ..., x_n, y_n), and the standard complex structure acts per pair
as J0 (x, y) = (-y, x).  Under the packing z_p = x_p + i y_p this is
multiplication by i, which is what the Fourier synthesis code relies on.
"""

import numpy as np


def j0_matrix(n):
    """Standard complex structure as a dense 2n x 2n matrix."""
    J = np.zeros((2 * n, 2 * n))
    for p in range(n):
        J[2 * p, 2 * p + 1] = -1.0
        J[2 * p + 1, 2 * p] = 1.0
    return J


def j0_apply(v):
    """Apply J0 to an array of shape (..., 2n) without forming the matrix."""
    out = np.empty_like(v)
    out[..., 0::2] = -v[..., 1::2]
    out[..., 1::2] = v[..., 0::2]
    return out


def pack(v):
    """Real (..., 2n) -> complex (..., n), pairing (x_p, y_p) -> x_p + i y_p."""
    return v[..., 0::2] + 1j * v[..., 1::2]


def unpack(z):
    """Inverse of :func:`pack`."""
    shape = z.shape[:-1] + (2 * z.shape[-1],)
    out = np.empty(shape, dtype=float)
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def symplectic_defect(M):
    """Frobenius norm of M^T J0 M - J0 (zero iff M is symplectic)."""
    n = M.shape[0] // 2
    J = j0_matrix(n)
    return float(np.linalg.norm(M.T @ J @ M - J))


def is_symplectic(M, tol=1e-10):
    return symplectic_defect(M) <= tol * max(1.0, float(np.linalg.norm(M)) ** 2)


def conformal_factor(M, tol=1e-8):
    """Return c > 0 with M^T J0 M = c J0 if M is conformally symplectic, else None.

    Symplectic matrices return 1.0.  Used to propagate exact ellipsoid
    spectra through transforms: a factor c scales every action by c.
    """
    n = M.shape[0] // 2
    J = j0_matrix(n)
    A = M.T @ J @ M
    # candidate factor from the first plane block
    c = A[1, 0]
    if c <= 0:
        return None
    if np.linalg.norm(A - c * J) <= tol * max(1.0, np.linalg.norm(A)):
        return float(c)
    return None


def random_symplectic(n, rng, scale=0.4, factors=3):
    """Random symplectic matrix as a product of exponentials exp(J0 S).

    Each factor is the time-one flow of a random quadratic Hamiltonian,
    hence exactly symplectic up to the accuracy of the matrix exponential.
    `scale` controls conditioning; keep it moderate so downstream strong
    convexity bounds stay usable.
    """
    from scipy.linalg import expm

    J = j0_matrix(n)
    M = np.eye(2 * n)
    for _ in range(factors):
        S = rng.standard_normal((2 * n, 2 * n))
        S = 0.5 * (S + S.T) * (scale / max(1, 2 * n) ** 0.5)
        M = M @ expm(J @ S)
    return M
