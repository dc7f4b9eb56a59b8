"""Shared seeded generators for the test suite."""

from __future__ import annotations

import numpy as np

from posmu import (
    BlockSpec,
    FMProblem,
    StateSpaceSystem,
    mu_nonneg,
    reduce_structure,
    static_loop_matrix,
    validate_structure,
)


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_nonneg(r: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    return scale * r.random((n, n))


def random_blockspecs(
    r: np.random.Generator,
    n: int,
    allow_scalar: bool = True,
    allow_complex: bool = True,
    max_block: int = 3,
) -> list[BlockSpec]:
    """Random block sizes summing to n, in shuffled (non-canonical) order."""
    specs = []
    left = n
    while left > 0:
        size = int(r.integers(1, min(max_block, left) + 1))
        kind = "scalar" if (allow_scalar and r.random() < 0.4) else "full"
        field = "complex" if (allow_complex and r.random() < 0.4) else "real"
        specs.append(BlockSpec(kind=kind, size=size, field=field))
        left -= size
    order = r.permutation(len(specs))
    return [specs[i] for i in order]


def random_structure(r: np.random.Generator, n: int, **kw):
    return validate_structure(random_blockspecs(r, n, **kw))


def random_metzler_system(
    r: np.random.Generator, n: int, margin: float = 0.3, feedthrough: bool = False
) -> StateSpaceSystem:
    """Internally positive system: Metzler Hurwitz A, nonnegative B, C, D."""
    w = random_nonneg(r, n)
    rho = float(np.max(np.abs(np.linalg.eigvals(w))))
    a = w - (rho + margin + r.random()) * np.eye(n)
    b = random_nonneg(r, n)
    c = random_nonneg(r, n)
    d = 0.2 * random_nonneg(r, n) if feedthrough else np.zeros((n, n))
    return StateSpaceSystem(a=a, b=b, c=c, d=d)


def random_fm(
    r: np.random.Generator,
    n: int,
    target_mu: float,
    dim: int | None = None,
    allow_complex: bool = True,
    with_delays: bool = False,
) -> FMProblem:
    """FM network scaled so the robustness margin sits at target_mu.

    The loop matrix is linear in the uncertainty input map, so scaling that
    map rescales mu exactly; a base instance is measured once and rescaled.
    """
    dim = n if dim is None else dim
    h = 0.4 + 0.6 * r.random(n)
    gamma = 0.2 + 0.6 * r.random(n)
    nu = 0.05 + r.random(n)
    k = 0.5 + 1.5 * r.random(n)
    g0 = r.random((n, n))
    np.fill_diagonal(g0, 0.0)
    psi = gamma / h
    rho = float(np.max(np.abs(np.linalg.eigvals(psi[:, None] * g0))))
    if rho > 1e-9:
        g0 *= (0.3 + 0.4 * r.random()) / rho
    top = float(np.max(g0))
    if top > 0.95:  # gains are physical couplings, capped at one
        g0 *= 0.95 / top
    s = random_structure(r, dim, allow_complex=allow_complex)
    e = 0.1 + r.random((n, dim))
    f = 0.1 + r.random((dim, n))
    delays = r.random((dim, dim)) if with_delays else None
    base = FMProblem(h=h, g0=g0, nu=nu, gamma=gamma, k=k, e=e, f=f,
                     structure=s, delays=delays)
    res = mu_nonneg(static_loop_matrix(base), reduce_structure(base.structure),
                    seed=int(r.integers(1 << 31)))
    e = e * (target_mu / res.mu)
    return FMProblem(h=h, g0=g0, nu=nu, gamma=gamma, k=k, e=e, f=f,
                     structure=s, delays=delays)
