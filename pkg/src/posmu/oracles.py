"""Lower bounds and independent cross-checks.

Three routes to certify or refute mu values from below, deliberately disjoint
from the scaling upper bound so the two sides of the sandwich share no code:

* an orthant-feasibility search over fixed vectors q (mu < 1 holds exactly
  when no unit nonnegative q makes every block of ``|E_k M q|^2 - |E_k q|^2``
  nonnegative),
* coordinate ascent over nonnegative rank-one block perturbations, which
  yields the certified lower bound and its witness,
* a brute-force grid over boundary perturbations for small instances, and
* an ellipsoid solver for the semidefinite relaxation of Metzler-constrained
  quadratic programs, whose optimum matches the nonconvex program exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _linalg
from .errors import InfeasibleProblem, InputError, UnboundedProblem
from .structure import (
    ReducedStructure,
    StructuredPerturbation,
    _as_reduced,
    _validate_nonneg_matrix,
)

# ---------------------------------------------------------------------------
# Orthant feasibility oracle


@dataclass(frozen=True)
class FeasibilityInstance:
    """Per-block quadratic forms phi_k(q) = |E_k M q|^2 - |E_k q|^2."""

    m: np.ndarray
    structure: ReducedStructure
    forms: tuple[np.ndarray, ...]

    @classmethod
    def from_matrix(cls, m: np.ndarray, s) -> "FeasibilityInstance":
        s = _as_reduced(s)
        m = _validate_nonneg_matrix(m, dim=s.total_dim)
        forms = []
        for sl in s.slices():
            e = np.zeros((s.total_dim, s.total_dim))
            e[sl, sl] = np.eye(sl.stop - sl.start)
            f = m.T @ e @ m - e
            forms.append(0.5 * (f + f.T))
        for f in forms:
            f.setflags(write=False)
        mm = m.copy()
        mm.setflags(write=False)
        return cls(m=mm, structure=s, forms=tuple(forms))


def phi(inst: FeasibilityInstance, q: np.ndarray) -> np.ndarray:
    """Evaluate the block forms at a unit nonnegative vector q."""
    q = np.asarray(q, dtype=float).ravel()
    s = inst.structure
    if q.size != s.total_dim:
        raise InputError(f"q has length {q.size}, structure dimension is {s.total_dim}")
    nq = float(np.linalg.norm(q))
    if abs(nq - 1.0) > 1e-9:
        raise InputError(f"q must be unit-norm, got |q| = {nq!r}")
    if np.min(q) < -1e-12:
        raise InputError("q must be entrywise nonnegative")
    cb = s.coordinate_blocks()
    mq = inst.m @ q
    nblocks = len(s.sizes)
    return np.bincount(cb, weights=mq * mq, minlength=nblocks) - np.bincount(
        cb, weights=q * q, minlength=nblocks
    )


@dataclass(frozen=True)
class QSearchResult:
    """Outcome of the orthant feasibility search."""

    found: bool
    q: np.ndarray
    value: float
    restarts_used: int


def q_feasibility_search(
    inst: FeasibilityInstance,
    restarts: int = 20,
    iters: int = 300,
    seed: int = 0,
    step0: float = 1.0,
) -> QSearchResult:
    """Search for a unit nonnegative q with every block form nonnegative.

    Projected subgradient ascent on min_k phi_k(q) over the intersection of
    the unit sphere with the nonnegative orthant.  The active block is the
    smallest-index minimizer; steps backtrack until the minimum improves.
    Success (value >= 0) refutes mu < 1; failure reports the best value found,
    which is evidence, not proof, of feasibility.
    """
    if restarts < 1 or iters < 1:
        raise InputError("restarts and iters must be at least 1")
    s = inst.structure
    dim = s.total_dim
    cb = s.coordinate_blocks()
    nblocks = len(s.sizes)

    def min_phi(q):
        mq = inst.m @ q
        vals = np.bincount(cb, weights=mq * mq, minlength=nblocks) - np.bincount(
            cb, weights=q * q, minlength=nblocks
        )
        return float(np.min(vals)), int(np.argmin(vals))

    def project(q):
        q = np.clip(q, 0.0, None)
        n = float(np.linalg.norm(q))
        return None if n == 0.0 else q / n

    best_q = None
    best_val = -math.inf
    for r in range(restarts):
        if r == 0:
            q = np.full(dim, 1.0 / math.sqrt(dim))
        elif r == 1:
            try:
                q = _linalg.perron_vector(inst.m)
            except Exception:
                q = np.full(dim, 1.0 / math.sqrt(dim))
        else:
            rng = np.random.default_rng(seed + 9973 * r)
            q = project(rng.random(dim) + 1e-3)
        val, k = min_phi(q)
        for _ in range(iters):
            if val >= 0.0:
                break
            grad = 2.0 * (inst.forms[k] @ q)
            step = step0
            improved = False
            while step >= 1e-12:
                cand = project(q + step * grad)
                if cand is not None:
                    cval, ck = min_phi(cand)
                    if cval > val + 1e-14:
                        q, val, k = cand, cval, ck
                        improved = True
                        break
                step *= 0.5
            if not improved:
                break
        if val > best_val:
            best_val, best_q = val, q
        if best_val >= 0.0:
            return QSearchResult(found=True, q=best_q, value=best_val, restarts_used=r + 1)
    return QSearchResult(found=False, q=best_q, value=best_val, restarts_used=restarts)


# ---------------------------------------------------------------------------
# Dyad ascent lower bound


def _perron_pair(a: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Spectral radius with left and right dominant vectors, abs-normalized."""
    vals, vecs = np.linalg.eig(a)
    i = int(np.argmax(np.abs(vals)))
    q = np.abs(vecs[:, i])
    valsl, vecsl = np.linalg.eig(a.T)
    j = int(np.argmax(np.abs(valsl)))
    p = np.abs(vecsl[:, j])
    return float(np.abs(vals[i])), p, q


def _unit_or_none(v: np.ndarray) -> np.ndarray | None:
    n = float(np.linalg.norm(v))
    return None if n == 0.0 else v / n


def mu_lower_dyad(
    m: np.ndarray,
    s,
    restarts: int = 20,
    iters: int = 60,
    seed: int = 0,
) -> tuple[float, StructuredPerturbation]:
    """Certified lower bound via ascent over nonnegative rank-one blocks.

    Every block of the perturbation is a unit dyad xi zeta^T.  One sweep
    replaces block k by the dyad aligned with the gradient of rho(M Delta),
    built from the dominant left/right pair of the loop matrix; moves are
    kept only if the exactly re-evaluated spectral radius improves.  The
    returned bound is rho(M Delta) of the best perturbation, recomputed at
    the end, so it is a true lower bound regardless of how the search went.
    """
    red = _as_reduced(s)
    m = _validate_nonneg_matrix(m, dim=red.total_dim)
    if restarts < 1 or iters < 1:
        raise InputError("restarts and iters must be at least 1")
    dim = red.total_dim
    slices = red.slices()
    nblocks = len(red.sizes)

    def assemble(blocks):
        delta = np.zeros((dim, dim))
        for sl, blk in zip(slices, blocks):
            delta[sl, sl] = blk
        return delta

    def rho_of(blocks):
        return float(np.max(np.abs(np.linalg.eigvals(m @ assemble(blocks)))))

    def start_diag():
        blocks = []
        for sl in slices:
            sub = m[sl, sl]
            if np.all(sub == 0):
                k = sl.stop - sl.start
                v = np.full(k, 1.0 / math.sqrt(k))
                blocks.append(np.outer(v, v))
            else:
                u, _, vt = np.linalg.svd(sub)
                xi = _unit_or_none(np.abs(u[:, 0]))
                ze = _unit_or_none(np.abs(vt[0]))
                blocks.append(np.outer(xi, ze))
        return blocks

    def blocks_from_pair(p, q):
        blocks = []
        mp = m.T @ p
        for sl in slices:
            k = sl.stop - sl.start
            xi = _unit_or_none(mp[sl])
            ze = _unit_or_none(q[sl])
            if xi is None or ze is None:
                v = np.full(k, 1.0 / math.sqrt(k))
                xi = ze = v
            blocks.append(np.outer(xi, ze))
        return blocks

    def start_random(rng):
        blocks = []
        for sl in slices:
            k = sl.stop - sl.start
            xi = _unit_or_none(rng.random(k) + 1e-3)
            ze = _unit_or_none(rng.random(k) + 1e-3)
            blocks.append(np.outer(xi, ze))
        return blocks

    best_blocks = None
    best_rho = -1.0
    for r in range(restarts):
        if r == 0:
            blocks = start_diag()
        elif r == 1:
            _, p, q = _perron_pair(m)
            blocks = blocks_from_pair(p, q)
        else:
            rng = np.random.default_rng(seed + 9973 * r)
            blocks = start_random(rng)
        rho = rho_of(blocks)
        for _ in range(iters):
            improved = False
            _, p, q = _perron_pair(m @ assemble(blocks))
            mp = m.T @ p
            for k, sl in enumerate(slices):
                xi = _unit_or_none(mp[sl])
                ze = _unit_or_none(q[sl])
                if xi is None or ze is None:
                    continue
                cand = np.outer(xi, ze)
                if np.allclose(cand, blocks[k], rtol=0.0, atol=1e-14):
                    continue
                old = blocks[k]
                blocks[k] = cand
                rho_new = rho_of(blocks)
                if rho_new > rho + 1e-14 * max(1.0, rho):
                    rho = rho_new
                    improved = True
                else:
                    blocks[k] = old
            if not improved:
                break
        if rho > best_rho:
            best_rho = rho
            best_blocks = [b.copy() for b in blocks]

    d = StructuredPerturbation(structure=red, blocks=tuple(best_blocks))
    lb = _linalg.perron_root(m @ d.assemble().real)
    return float(lb), d


# ---------------------------------------------------------------------------
# Metzler QP relaxation


def _svec_indices(n: int):
    rows, cols = np.triu_indices(n)
    scale = np.where(rows == cols, 1.0, math.sqrt(2.0))
    return rows, cols, scale


def _svec(a: np.ndarray, rows, cols, scale) -> np.ndarray:
    return a[rows, cols] * scale


def _smat(u: np.ndarray, n: int, rows, cols, scale) -> np.ndarray:
    x = np.zeros((n, n))
    vals = u / scale
    x[rows, cols] = vals
    x[cols, rows] = vals
    return x


@dataclass(frozen=True)
class QPInstance:
    """maximize x^T M0 x  s.t.  x^T M_i x >= b_i (+ |x| = 1 when normalized).

    All matrices must be Metzler: off-diagonal entries nonnegative, diagonal
    free.  For such data the semidefinite relaxation in X = x x^T is exact,
    and a near-optimal X yields a feasible x via the square roots of its
    diagonal.
    """

    objective: np.ndarray
    constraints: tuple[np.ndarray, ...]
    bounds: tuple[float, ...]
    trace_normalized: bool = True

    def __post_init__(self):
        obj = self._check_metzler(np.asarray(self.objective, dtype=float), "objective")
        object.__setattr__(self, "objective", obj)
        n = obj.shape[0]
        if n > 8:
            raise InputError(f"relaxation solver is sized for n <= 8, got n = {n}")
        cons = []
        for i, c in enumerate(self.constraints):
            c = self._check_metzler(np.asarray(c, dtype=float), f"constraint {i}")
            if c.shape[0] != n:
                raise InputError(f"constraint {i} has shape {c.shape}, expected ({n}, {n})")
            cons.append(c)
        object.__setattr__(self, "constraints", tuple(cons))
        bnds = tuple(float(b) for b in self.bounds)
        if len(bnds) != len(cons):
            raise InputError(f"{len(cons)} constraints but {len(bnds)} bounds")
        if any(not np.isfinite(b) for b in bnds):
            raise InputError("constraint bounds must be finite")
        object.__setattr__(self, "bounds", bnds)

    @staticmethod
    def _check_metzler(a: np.ndarray, what: str) -> np.ndarray:
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InputError(f"{what} must be a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InputError(f"{what} contains non-finite entries")
        off = a - np.diag(np.diag(a))
        if np.min(off) < -1e-12 * max(1.0, float(np.max(np.abs(a)))):
            i, j = np.unravel_index(np.argmin(off), off.shape)
            raise InputError(
                f"{what} is not Metzler: off-diagonal entry ({i}, {j}) = {a[i, j]!r} is negative"
            )
        sym = 0.5 * (a + a.T)
        sym.setflags(write=False)
        return sym

    @property
    def dim(self) -> int:
        return self.objective.shape[0]


@dataclass(frozen=True)
class QPResult:
    """Relaxation optimum with the extracted nonnegative vector."""

    value: float
    x: np.ndarray
    x_matrix: np.ndarray
    iterations: int


_FREE_RADIUS = 1e5


def positive_qp_relaxation(
    inst: QPInstance, tol: float = 1e-6, max_iter: int | None = None
) -> QPResult:
    """Solve the semidefinite relaxation of a Metzler quadratic program.

    Ellipsoid method on the vectorized matrix variable: separating halfspaces
    come from violated linear constraints, from negative-eigenvalue directions
    of X, and from a sliding objective level.  The trace normalization is
    eliminated affinely, so every iterate satisfies it exactly.  Raises
    InfeasibleProblem when the search localizes without ever meeting the
    constraints, UnboundedProblem when the unnormalized problem escapes the
    search region.
    """
    n = inst.dim
    rows, cols, scale = _svec_indices(n)
    dfull = n * (n + 1) // 2

    c_obj = _svec(inst.objective, rows, cols, scale)
    c_cons = [_svec(c, rows, cols, scale) for c in inst.constraints]
    b = np.asarray(inst.bounds, dtype=float)

    if inst.trace_normalized:
        u0 = _svec(np.eye(n) / n, rows, cols, scale)
        a_tr = _svec(np.eye(n), rows, cols, scale)
        a_tr = a_tr / np.linalg.norm(a_tr)
        # orthonormal basis of the trace-zero slice
        basis = np.linalg.svd(np.eye(dfull) - np.outer(a_tr, a_tr))[0][:, : dfull - 1]
        radius = 2.2
    else:
        u0 = np.zeros(dfull)
        basis = np.eye(dfull)
        radius = _FREE_RADIUS * 1.05
    d = basis.shape[1]

    t_obj = basis.T @ c_obj
    t_cons = [basis.T @ cv for cv in c_cons]
    feas_eps = np.array(
        [1e-9 * (1.0 + abs(bi) + float(np.linalg.norm(ci))) for bi, ci in zip(b, c_cons)]
    )

    if max_iter is None:
        max_iter = int(4 * d * d * math.log(max(radius, 2.0) / 1e-9)) + 3000
    r_stop2 = (max(1e-9, tol * 1e-3)) ** 2

    ell = _linalg.Ellipsoid(d, radius)
    best_val = -math.inf
    best_x = None
    iterations = 0
    for it in range(1, max_iter + 1):
        iterations = it
        t = ell.c
        u = u0 + basis @ t
        x = _smat(u, n, rows, cols, scale)

        slack = np.array([float(cv @ u) for cv in c_cons]) - b if c_cons else np.zeros(0)
        status = None
        if slack.size and float(np.min(slack + feas_eps)) < 0.0:
            i = int(np.argmin(slack + feas_eps))
            status = ell.cut(-t_cons[i], max(0.0, -slack[i]))
        else:
            w_eig, v_eig = np.linalg.eigh(x)
            if w_eig[0] < -1e-11 * max(1.0, float(w_eig[-1])):
                w = v_eig[:, 0]
                g = basis.T @ _svec(np.outer(w, w), rows, cols, scale)
                status = ell.cut(-g, -float(w_eig[0]))
            else:
                val = float(c_obj @ u)
                if val > best_val:
                    best_val = val
                    best_x = x
                status = ell.cut(-t_obj, max(0.0, best_val - val))
        if status == _linalg.Ellipsoid.EMPTY or ell.size2 <= r_stop2:
            break

    if best_x is None:
        raise InfeasibleProblem(
            "no feasible point found: the constraint set is empty or vanishingly thin"
        )
    if not inst.trace_normalized and float(np.linalg.norm(best_x)) >= 0.5 * _FREE_RADIUS:
        raise UnboundedProblem("relaxation escaped the search region; objective is unbounded")

    # polish: clip tiny negative eigenvalues, restore the trace exactly
    w_eig, v_eig = np.linalg.eigh(best_x)
    x_clean = (v_eig * np.clip(w_eig, 0.0, None)) @ v_eig.T
    if inst.trace_normalized:
        tr = float(np.trace(x_clean))
        if tr > 0:
            x_clean = x_clean / tr
    x_clean = 0.5 * (x_clean + x_clean.T)
    value = float(np.sum(inst.objective * x_clean))
    x_vec = np.sqrt(np.clip(np.diag(x_clean), 0.0, None))
    return QPResult(value=value, x=x_vec, x_matrix=x_clean, iterations=iterations)


# ---------------------------------------------------------------------------
# Brute-force grid oracle


def _sector_vector(angles: np.ndarray) -> np.ndarray:
    """Point on the nonnegative unit sphere sector from spherical angles."""
    k = angles.size + 1
    v = np.ones(k)
    sines = 1.0
    for i, a in enumerate(angles):
        v[i] = sines * math.cos(a)
        sines *= math.sin(a)
    v[k - 1] = sines
    return v


def mu_bruteforce(m: np.ndarray, s, density: int = 11) -> float:
    """Grid lower bound: max rho(M Delta) over gridded boundary dyads.

    Scalar blocks range over [0, 1]; larger blocks over unit dyads with
    spherical angles gridded on [0, pi/2].  Converges to mu from below as
    density grows.  Guarded to tiny instances: the grid is exponential in
    the parameter count.
    """
    red = _as_reduced(s)
    m = _validate_nonneg_matrix(m, dim=red.total_dim)
    if density < 2:
        raise InputError("density must be at least 2")
    nparams = sum(1 if k == 1 else 2 * (k - 1) for k in red.sizes)
    if red.total_dim > 4 or nparams > 6:
        raise InputError(
            f"brute force is sized for dimension <= 4 and <= 6 grid parameters, "
            f"got dimension {red.total_dim} with {nparams} parameters"
        )
    total = density**nparams
    if total > 4_000_000:
        raise InputError(f"grid of {total} points is too large; lower the density")

    dim = red.total_dim
    slices = red.slices()
    candidates = []
    for sl in slices:
        k = sl.stop - sl.start
        if k == 1:
            vals = np.linspace(0.0, 1.0, density).reshape(density, 1, 1)
            candidates.append(vals)
        else:
            angles = np.linspace(0.0, 0.5 * math.pi, density)
            grids = np.meshgrid(*([angles] * (k - 1)), indexing="ij")
            flat = np.stack([g.ravel() for g in grids], axis=-1)
            vecs = np.array([_sector_vector(a) for a in flat])
            outer = vecs[:, None, :, None] * vecs[None, :, None, :]
            candidates.append(outer.reshape(-1, k, k))
    counts = [c.shape[0] for c in candidates]
    total = int(np.prod(counts))

    lb = 0.0
    chunk = 20000
    for lo in range(0, total, chunk):
        hi = min(lo + chunk, total)
        idx = np.unravel_index(np.arange(lo, hi), counts)
        batch = np.zeros((hi - lo, dim, dim))
        for bi, (sl, cand) in enumerate(zip(slices, candidates)):
            batch[:, sl, sl] = cand[idx[bi]]
        eigs = np.linalg.eigvals(m[None, :, :] @ batch)
        lb = max(lb, float(np.max(np.abs(eigs))))
    return lb
