"""Structured singular value of nonnegative matrices.

For an entrywise nonnegative interconnection matrix and a reduced (all-real,
all-full) block structure, the similarity-scaling upper bound

    inf over positive block-diagonal Theta of  || Theta^{1/2} M Theta^{-1/2} ||

equals the structured singular value exactly, and a scaling Theta certifies
mu < gamma through the strict matrix inequality M^T Theta M - gamma^2 Theta < 0.
This module computes the bound by bisection over gamma with a cutting-plane
feasibility engine in log-scaling coordinates, and pairs it with the dyad
ascent lower bound to return a certified two-sided answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _linalg, oracles
from .errors import InputError, NumericalFailure
from .structure import (
    ReducedStructure,
    StructuredPerturbation,
    _as_reduced,
    _validate_nonneg_matrix,
    nonnegative_witness,
)

#: scalings are searched inside [1/THETA_BOX, THETA_BOX] per block
THETA_BOX = 1e8
_U_BOX = math.log(THETA_BOX)


@dataclass(frozen=True)
class ScalingVector:
    """Positive per-block scaling weights for a reduced structure."""

    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise InputError("scaling vector must be nonempty")
        for v in self.values:
            if not (np.isfinite(v) and v > 0):
                raise InputError(f"scaling entries must be positive and finite, got {v!r}")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class FeasibilityResult:
    """Outcome of a scaling-feasibility query at a fixed gamma."""

    feasible: bool
    theta: ScalingVector | None
    cuts: tuple[dict, ...]
    iterations: int
    at_box_edge: bool = False


@dataclass
class MuResult:
    """Two-sided structured-singular-value answer with certificates."""

    mu: float
    upper: float
    lower: float
    theta: ScalingVector
    witness: StructuredPerturbation | None
    witness_marginal: StructuredPerturbation | None
    q: np.ndarray | None
    diagnostics: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def spectral_radius(m: np.ndarray, tol: float = 1e-10) -> float:
    """Spectral radius of a square real matrix.

    Nonnegative matrices go through power iteration from the all-ones vector
    (the Perron root); matrices with negative entries use a dense eigenvalue
    solve.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InputError("matrix contains non-finite entries")
    if np.any(m < 0):
        return float(np.max(np.abs(np.linalg.eigvals(m))))
    return _linalg.perron_root(m, tol=min(tol, 1e-11) * 0.1)


def _theta_array(theta, nblocks: int) -> np.ndarray:
    if isinstance(theta, ScalingVector):
        arr = theta.array
    else:
        arr = np.asarray(theta, dtype=float).ravel()
    if arr.size != nblocks:
        raise InputError(f"scaling has {arr.size} entries for {nblocks} blocks")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise InputError("scaling entries must be positive and finite")
    return arr


def scaled_norm(m: np.ndarray, theta, s) -> float:
    """|| Theta^{1/2} M Theta^{-1/2} || for a per-block scaling theta."""
    s = _as_reduced(s)
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape != (s.total_dim, s.total_dim):
        raise InputError(f"matrix shape {m.shape} does not match structure dimension {s.total_dim}")
    th = _theta_array(theta, len(s.sizes))
    dh = np.sqrt(th)[s.coordinate_blocks()]
    return _linalg.sigma_max(m * dh[:, None] / dh[None, :])


def _lam_max(m: np.ndarray, gamma: float, th_coord: np.ndarray) -> float:
    """Top eigenvalue of M^T Theta M - gamma^2 Theta."""
    a = m.T @ (th_coord[:, None] * m) - gamma * gamma * np.diag(th_coord)
    return float(np.linalg.eigvalsh(a)[-1])


def _scaling_feasible(
    m: np.ndarray,
    gamma: float,
    sizes,
    params,
    *,
    eps: float,
    r_stop: float = 1e-9,
    max_iter: int | None = None,
    theta0: np.ndarray | None = None,
    collect_cuts: bool = False,
):
    """Search for a log-box scaling certifying the strict inequality at gamma.

    Ellipsoid method with deep cuts over log-scalings (first parameter pinned
    to one).  Cuts come from the top singular pair of the scaled matrix: the
    scaled norm is convex in log-scaling coordinates, so its subgradient
    halfspaces are valid localizers.
    """
    sizes = np.asarray(sizes, dtype=int)
    params = np.arange(len(sizes)) if params is None else np.asarray(params, dtype=int)
    nparam = int(params.max()) + 1
    cp = np.repeat(params, sizes)
    dim = m.shape[0]
    cuts: list[dict] = []

    def record_cut(z: np.ndarray, dh: np.ndarray):
        if not collect_cuts or len(cuts) >= 512:
            return
        v = z / dh
        v = v / np.linalg.norm(v)
        mv = m @ v
        coeffs = np.bincount(cp, weights=mv * mv, minlength=nparam) - gamma * gamma * np.bincount(
            cp, weights=v * v, minlength=nparam
        )
        cuts.append({"coeffs": coeffs, "vector": v})

    def result(feasible, theta_param=None, iterations=0):
        at_edge = False
        theta = None
        if theta_param is not None:
            at_edge = bool(np.max(np.abs(np.log(theta_param))) >= 0.95 * _U_BOX)
            theta = ScalingVector(tuple(float(t) for t in theta_param))
        return FeasibilityResult(
            feasible=feasible,
            theta=theta,
            cuts=tuple(cuts),
            iterations=iterations,
            at_box_edge=at_edge,
        )

    if theta0 is not None:
        th0 = np.asarray(theta0, dtype=float)
        if th0.size == nparam and np.all(th0 > 0):
            if _lam_max(m, gamma, th0[cp]) <= -eps:
                return result(True, th0)

    if nparam == 1:
        sig2 = _linalg.sigma_max(m) ** 2
        if sig2 - gamma * gamma <= -eps:
            return result(True, np.ones(1))
        if collect_cuts:
            _, _, vt = np.linalg.svd(m)
            cuts.append({"coeffs": np.array([sig2 - gamma * gamma]), "vector": vt[0]})
        return result(False)

    d = nparam - 1
    radius = _U_BOX * math.sqrt(d) * 1.05
    ell = _linalg.Ellipsoid(d, radius)
    if max_iter is None:
        max_iter = 500 * d * d + 1500
    r_stop2 = r_stop * r_stop

    for it in range(1, max_iter + 1):
        v = ell.c
        over = np.abs(v) - _U_BOX
        j = int(np.argmax(over))
        if over[j] > 0:
            g = np.zeros(d)
            g[j] = math.copysign(1.0, v[j])
            if ell.cut(g, over[j]) == _linalg.Ellipsoid.EMPTY:
                return result(False, iterations=it)
            if ell.size2 <= r_stop2:
                return result(False, iterations=it)
            continue

        u = np.concatenate(([0.0], v))
        dh = np.exp(0.5 * u[cp])
        n_mat = m * dh[:, None] / dh[None, :]
        u_svd, svals, vt = np.linalg.svd(n_mat)
        sigma = float(svals[0])
        if sigma < gamma:
            th_coord = dh * dh
            if _lam_max(m, gamma, th_coord) <= -eps:
                return result(True, np.exp(u), iterations=it)
            h = 0.0
        else:
            h = sigma - gamma
        w = u_svd[:, 0]
        z = vt[0]
        record_cut(z, dh)
        w2 = np.bincount(cp, weights=w * w, minlength=nparam)
        z2 = np.bincount(cp, weights=z * z, minlength=nparam)
        g = 0.5 * sigma * (w2 - z2)[1:]
        if float(g @ g) <= 1e-40:
            # flat subgradient at a violated point: global minimum >= gamma
            return result(False, iterations=it)
        if ell.cut(g, h) == _linalg.Ellipsoid.EMPTY:
            return result(False, iterations=it)
        if ell.size2 <= r_stop2:
            return result(False, iterations=it)

    raise NumericalFailure(
        f"scaling feasibility search did not resolve gamma={gamma:.6g} within {max_iter} iterations"
    )


def scaling_upper_bound(
    m: np.ndarray,
    sizes,
    params=None,
    tol: float = 1e-6,
    theta0: np.ndarray | None = None,
    max_steps: int = 200,
):
    """Infimal scaled norm of a square real matrix over tied block scalings.

    Generic engine behind mu_upper: ``params`` may tie several blocks to one
    scaling parameter (used by the complex-frequency lifting).  Returns
    ``(ub, theta_param, info)`` with ub within ``tol * max(1, ub)`` of the
    infimum over the scaling box.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    sizes = tuple(int(s) for s in sizes)
    if m.shape != (sum(sizes), sum(sizes)):
        raise InputError(f"matrix shape {m.shape} does not match block sizes {sizes}")
    params = np.arange(len(sizes)) if params is None else np.asarray(params, dtype=int)
    nparam = int(params.max()) + 1
    tol = max(float(tol), 1e-12)

    info: dict = {"bisection_steps": 0, "warnings": [], "engine_iterations": 0}
    sig = _linalg.sigma_max(m)
    if sig == 0.0:
        return 0.0, np.ones(nparam), info
    if nparam == 1:
        return sig, np.ones(1), info

    rho = spectral_radius(m)
    if sig - rho <= tol * max(1.0, sig):
        return sig, np.ones(nparam), info

    eps = 1e-9 * (1.0 + sig * sig)
    cp = np.repeat(params, sizes)
    lo, hi = rho, sig
    theta_best = np.ones(nparam)
    if theta0 is not None:
        th0 = np.asarray(theta0, dtype=float)
        if th0.size == nparam and np.all(th0 > 0):
            s0 = _linalg.sigma_max(m * np.sqrt(th0)[cp][:, None] / np.sqrt(th0)[cp][None, :])
            if s0 < hi:
                hi, theta_best = s0, th0

    steps = 0
    while hi - lo > tol * max(1.0, hi) and steps < max_steps:
        gamma = 0.5 * (lo + hi)
        steps += 1
        if _lam_max(m, gamma, theta_best[cp]) <= -eps:
            hi = gamma
            continue
        res = _scaling_feasible(
            m, gamma, sizes, params, eps=eps, r_stop=min(1e-9, tol * 1e-3)
        )
        info["engine_iterations"] += res.iterations
        if res.feasible:
            theta_best = res.theta.array
            dh = np.sqrt(theta_best)[cp]
            s_val = _linalg.sigma_max(m * dh[:, None] / dh[None, :])
            hi = min(gamma, s_val)
            if res.at_box_edge and "scaling at search-box edge" not in info["warnings"]:
                info["warnings"].append("scaling at search-box edge")
        else:
            lo = gamma
    info["bisection_steps"] = steps
    if steps >= max_steps and hi - lo > tol * max(1.0, hi):
        raise NumericalFailure(
            f"upper-bound bisection stalled: bracket [{lo:.9g}, {hi:.9g}] after {steps} steps"
        )
    info["bracket"] = (lo, hi)
    return float(hi), theta_best, info


def feasibility_certificate(m: np.ndarray, gamma: float, s, tol: float = 1e-6) -> FeasibilityResult:
    """Decide whether some box scaling certifies mu < gamma.

    Feasible results carry the scaling; infeasible results carry the
    accumulated separating cuts (quadratic forms nonnegative throughout the
    final localization set).
    """
    s = _as_reduced(s)
    m = _validate_nonneg_matrix(m, dim=s.total_dim)
    if not (np.isfinite(gamma) and gamma > 0):
        raise InputError(f"gamma must be positive, got {gamma!r}")
    sig = _linalg.sigma_max(m)
    eps = 1e-9 * (1.0 + sig * sig)
    r_stop = min(1e-9, max(1e-12, float(tol) * 1e-3))
    return _scaling_feasible(
        m, float(gamma), s.sizes, None, eps=eps, r_stop=r_stop, collect_cuts=True
    )


def mu_upper(m: np.ndarray, s, tol: float = 1e-6) -> tuple[float, ScalingVector]:
    """Scaling upper bound by bisection over gamma in [rho(M), sigma_max(M)]."""
    s = _as_reduced(s)
    m = _validate_nonneg_matrix(m, dim=s.total_dim)
    ub, theta, _ = scaling_upper_bound(m, s.sizes, tol=tol)
    return ub, ScalingVector(tuple(float(t) for t in theta))


def mu_nonneg(
    m: np.ndarray,
    s,
    tol: float = 1e-6,
    gap_tol: float = 1e-2,
    restarts: int = 20,
    ascent_iters: int = 60,
    seed: int = 0,
) -> MuResult:
    """Structured singular value of a nonnegative matrix with certificates.

    Computes the scaling upper bound and the dyad-ascent lower bound on the
    reduced structure and checks that they pinch (they must, up to solver
    tolerance: for nonnegative matrices the scaling bound is exact).  A gap
    beyond ``max(gap_tol * max(1, ub), tol * ub)`` raises NumericalFailure
    rather than returning an uncertified value.

    Returns
    -------
    MuResult
        ``mu`` (the certified upper value), both bounds, the optimal scaling,
        a boundary perturbation achieving the lower bound, and, when mu >= 1,
        the marginal nonnegative perturbation with its fixed vector q.
    """
    red = _as_reduced(s)
    m = _validate_nonneg_matrix(m, dim=red.total_dim)

    ub, theta_arr, upinfo = scaling_upper_bound(m, red.sizes, tol=tol)
    lb, d = oracles.mu_lower_dyad(
        m, red, restarts=restarts, iters=ascent_iters, seed=seed
    )

    witness_marginal = None
    q = None
    warnings = list(upinfo.get("warnings", []))
    if lb >= 1.0 - 1e-9:
        try:
            witness_marginal, q = nonnegative_witness(m, d)
        except NumericalFailure as exc:  # pragma: no cover - dyads stay rank-one
            warnings.append(f"marginal witness construction failed: {exc}")

    gap = ub - lb
    allowed = max(gap_tol * max(1.0, ub), tol * ub)
    if gap > allowed:
        raise NumericalFailure(
            f"certified bounds did not pinch: upper {ub:.9g}, lower {lb:.9g}, "
            f"gap {gap:.3g} > allowed {allowed:.3g}"
        )

    diagnostics = {
        "bisection_steps": upinfo.get("bisection_steps", 0),
        "engine_iterations": upinfo.get("engine_iterations", 0),
        "restarts": restarts,
        "seed": seed,
        "warnings": warnings,
    }
    return MuResult(
        mu=float(ub),
        upper=float(ub),
        lower=float(lb),
        theta=ScalingVector(tuple(float(t) for t in theta_arr)),
        witness=d,
        witness_marginal=witness_marginal,
        q=q,
        diagnostics=diagnostics,
    )
