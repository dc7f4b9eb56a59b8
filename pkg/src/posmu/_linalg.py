"""Low-level eigen helpers shared across modules."""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericalFailure


def sigma_max(m: np.ndarray) -> float:
    """Largest singular value."""
    m = np.atleast_2d(np.asarray(m))
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def spectral_abscissa(a: np.ndarray) -> float:
    """Largest real part over the eigenvalues."""
    return float(np.max(np.linalg.eigvals(a).real))


def perron_root(a: np.ndarray, tol: float = 1e-12, maxiter: int = 2000) -> float:
    """Spectral radius of an entrywise nonnegative matrix.

    Power iteration from the all-ones vector; the iteration runs on a + I,
    which has the same Perron pair but a strictly dominant eigenvalue even
    for periodic matrices.  Falls back to a dense eigenvalue solve if the
    residual does not converge within the budget.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n = a.shape[0]
    if n == 1:
        return abs(float(a[0, 0]))
    scale = float(np.max(a))
    if scale == 0.0:
        return 0.0
    b = a + scale * np.eye(n)
    x = np.full(n, 1.0 / np.sqrt(n))
    lam = 0.0
    for _ in range(maxiter):
        y = b @ x
        ny = float(np.linalg.norm(y))
        if ny == 0.0:
            return 0.0
        x = y / ny
        lam = float(x @ (b @ x))
        if np.linalg.norm(b @ x - lam * x) <= tol * max(lam, scale):
            return max(lam - scale, 0.0)
    return float(np.max(np.abs(np.linalg.eigvals(a))))


def perron_vector(a: np.ndarray, tol: float = 1e-11, maxiter: int = 20000) -> np.ndarray:
    """Unit nonnegative eigenvector of a nonnegative matrix at its Perron root.

    Shifted power iteration from the all-ones vector (nonnegativity is
    preserved); falls back to an SVD null-space solve at the Perron root when
    the iteration stalls.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n = a.shape[0]
    if n == 1:
        return np.ones(1)
    rho = perron_root(a)
    scale = max(float(np.max(np.abs(a))), 1.0)
    b = a + scale * np.eye(n)
    x = np.full(n, 1.0 / np.sqrt(n))
    target = tol * max(rho, 1.0)
    for _ in range(maxiter):
        y = b @ x
        ny = float(np.linalg.norm(y))
        if ny == 0.0:
            break
        x = y / ny
        if np.linalg.norm(a @ x - rho * x) <= target:
            return _clean_nonneg(x, a, rho)
    # Null space of (rho I - a): smallest right singular vector.
    _, _, vt = np.linalg.svd(rho * np.eye(n) - a)
    v = vt[-1]
    if v.sum() < 0:
        v = -v
    return _clean_nonneg(v, a, rho)


def _clean_nonneg(v: np.ndarray, a: np.ndarray, rho: float) -> np.ndarray:
    floor = -1e-8 * max(1.0, float(np.max(np.abs(v))))
    if np.min(v) < floor:
        raise NumericalFailure(
            "Perron vector has significantly negative entries; eigenvalue may be defective"
        )
    v = np.clip(v, 0.0, None)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        raise NumericalFailure("Perron vector collapsed to zero")
    v = v / nv
    resid = float(np.linalg.norm(a @ v - rho * v))
    if resid > 1e-8 * max(rho, 1.0):
        raise NumericalFailure(f"Perron vector residual {resid:.3e} too large")
    return v


class Ellipsoid:
    """Deep-cut ellipsoid over R^d; cut(g, h) keeps {x : g.(x - c) <= -h}.

    h >= 0 gives a deep cut (the center itself is cut off by margin h);
    h = 0 is the central cut.  cut() returns EMPTY when the halfspace
    misses the ellipsoid entirely, proving the kept set is empty.
    """

    EMPTY = "empty"
    OK = "ok"

    def __init__(self, dim: int, radius: float):
        self.dim = dim
        self.c = np.zeros(dim)
        self.q = np.eye(dim) * radius * radius

    def cut(self, g: np.ndarray, h: float) -> str:
        gqg = float(g @ self.q @ g)
        if gqg <= 0 or not np.isfinite(gqg):
            return self.EMPTY
        alpha = h / math.sqrt(gqg)
        if alpha >= 1.0:
            return self.EMPTY
        alpha = max(alpha, 0.0)
        n = self.dim
        if n == 1:
            # interval update: cut [c - r, c + r] at the halfspace boundary
            r = math.sqrt(self.q[0, 0])
            if g[0] > 0:
                lo, hi = self.c[0] - r, self.c[0] - h / g[0]
            else:
                lo, hi = self.c[0] + h / (-g[0]), self.c[0] + r
            if hi <= lo:
                return self.EMPTY
            self.c[0] = 0.5 * (lo + hi)
            self.q[0, 0] = (0.5 * (hi - lo)) ** 2
            return self.OK
        qg = self.q @ g / math.sqrt(gqg)
        tau = (1.0 + n * alpha) / (n + 1.0)
        sig = 2.0 * (1.0 + n * alpha) / ((n + 1.0) * (1.0 + alpha))
        delta = (n * n / (n * n - 1.0)) * (1.0 - alpha * alpha)
        self.c = self.c - tau * qg
        self.q = delta * (self.q - sig * np.outer(qg, qg))
        self.q = 0.5 * (self.q + self.q.T)
        return self.OK

    @property
    def size2(self) -> float:
        """Upper bound on the squared largest semi-axis (trace bound)."""
        return float(np.trace(self.q))
