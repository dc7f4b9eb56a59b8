"""Robustness of distributed SINR power control under uncertain coupling.

N transmitter-receiver pairs run the classical first-order power iteration
p' = K(-p + Psi (G p + nu)) with Psi = diag(gamma_i / h_i).  The nominal
interference matrix G0 is certain only up to a structured perturbation,
G = G0 + E Delta F with Delta block-diagonal in the unit ball.  Because the
nominal loop is positive and its gain moduli peak at frequency zero, robust
stability of the whole family reduces to one structured singular value of
the nonnegative static loop matrix F (I - Psi G0)^{-1} Psi E.  This module
builds that reduction, produces destabilizing witnesses, simulates the power
dynamics, and cross-checks by random falsification; coupling delays are
handled by the observation that they drop out of the zero-frequency test.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import _linalg, mu_core
from .errors import InputError, NumericalFailure
from .structure import (
    BlockStructure,
    StructuredPerturbation,
    lift_witness,
    nonnegative_witness,
    reduce_structure,
    sample_boundary,
    validate_structure,
)
from .systems import StateSpaceSystem, freq_response, static_gain


@dataclass(frozen=True)
class FMProblem:
    """A power-control network with structured interference uncertainty.

    ``g0[i, j]`` is the nominal gain from transmitter j into receiver i
    (zero diagonal: self-interference is not a thing).  The uncertainty
    enters as G0 + E Delta F with Delta on ``structure``; the structure is
    stored in canonical (full-first) block order and the columns of E and
    rows of F are permuted to match, so every witness this package returns
    is expressed in canonical coordinates.
    """

    h: np.ndarray
    g0: np.ndarray
    nu: np.ndarray
    gamma: np.ndarray
    k: np.ndarray
    e: np.ndarray
    f: np.ndarray
    structure: BlockStructure
    delays: np.ndarray | None = None

    def __post_init__(self):
        h = self._vec(self.h, "h")
        n = h.size
        if np.any(h <= 0) or np.any(h > 1):
            raise InputError("channel gains h must lie in (0, 1]")
        nu = self._vec(self.nu, "nu", n)
        if np.any(nu <= 0):
            raise InputError("noise powers nu must be positive")
        gamma = self._vec(self.gamma, "gamma", n)
        if np.any(gamma <= 0):
            raise InputError("SINR targets gamma must be positive")
        k = self._vec(self.k, "k", n)
        if np.any(k <= 0):
            raise InputError("update rates k must be positive")

        g0 = np.atleast_2d(np.asarray(self.g0, dtype=float))
        if g0.shape != (n, n):
            raise InputError(f"gain matrix shape {g0.shape}, expected ({n}, {n})")
        if not np.all(np.isfinite(g0)):
            raise InputError("gain matrix contains non-finite entries")
        if np.any(g0 < 0) or np.any(g0 > 1):
            raise InputError("interference gains must lie in [0, 1]")
        if np.any(np.diag(g0) != 0):
            raise InputError("gain matrix must have a zero diagonal")

        s = self.structure
        if not isinstance(s, BlockStructure):
            s = validate_structure(s)
        dim = s.total_dim

        e = np.atleast_2d(np.asarray(self.e, dtype=float))
        f = np.atleast_2d(np.asarray(self.f, dtype=float))
        if e.shape != (n, dim):
            raise InputError(f"input map e has shape {e.shape}, expected ({n}, {dim})")
        if f.shape != (dim, n):
            raise InputError(f"output map f has shape {f.shape}, expected ({dim}, {n})")
        if not (np.all(np.isfinite(e)) and np.all(np.isfinite(f))):
            raise InputError("uncertainty maps contain non-finite entries")

        delays = self.delays
        if delays is not None:
            delays = np.atleast_2d(np.asarray(delays, dtype=float))
            if delays.shape != (dim, dim):
                raise InputError(
                    f"delay matrix shape {delays.shape}, expected ({dim}, {dim})"
                )
            if not np.all(np.isfinite(delays)) or np.any(delays < 0):
                raise InputError("delays must be finite and nonnegative")

        if s.is_permuted:
            perm = np.asarray(s.permutation)
            e = e[:, perm]
            f = f[perm, :]
            if delays is not None:
                delays = delays[np.ix_(perm, perm)]

        for name, arr in (("h", h), ("g0", g0), ("nu", nu), ("gamma", gamma), ("k", k),
                          ("e", e), ("f", f)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if delays is not None:
            delays = delays.copy()
            delays.setflags(write=False)
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "structure", s)

    @staticmethod
    def _vec(v, name, n=None):
        v = np.asarray(v, dtype=float).ravel()
        if n is not None and v.size != n:
            raise InputError(f"{name} has length {v.size}, expected {n}")
        if not np.all(np.isfinite(v)):
            raise InputError(f"{name} contains non-finite entries")
        return v

    @property
    def n(self) -> int:
        return self.h.size

    @property
    def dim(self) -> int:
        return self.structure.total_dim

    @property
    def psi(self) -> np.ndarray:
        return self.gamma / self.h

    @classmethod
    def from_pairs(cls, h, pairs, nu, gamma, k, e, f, structure, delays=None) -> "FMProblem":
        """Build with interference given as (from, to, gain) triples."""
        h = np.asarray(h, dtype=float).ravel()
        n = h.size
        g0 = np.zeros((n, n))
        seen = set()
        for p in pairs:
            if len(p) != 3:
                raise InputError(f"interference pair {p!r} must be (from, to, gain)")
            j, i, g = int(p[0]), int(p[1]), float(p[2])
            if not (0 <= i < n and 0 <= j < n):
                raise InputError(f"pair ({j}, {i}) is out of range for {n} links")
            if i == j:
                raise InputError(f"pair ({j}, {i}) would be self-interference")
            if (j, i) in seen:
                raise InputError(f"duplicate interference pair ({j}, {i})")
            seen.add((j, i))
            g0[i, j] = g
        return cls(h=h, g0=g0, nu=nu, gamma=gamma, k=k, e=e, f=f,
                   structure=structure, delays=delays)

    def to_pairs(self) -> list[tuple[int, int, float]]:
        """Nonzero interference entries as sorted (from, to, gain) triples."""
        out = []
        for i in range(self.n):
            for j in range(self.n):
                if self.g0[i, j] != 0:
                    out.append((j, i, float(self.g0[i, j])))
        return sorted(out)


def build_nominal(prob: FMProblem) -> tuple[StateSpaceSystem, np.ndarray]:
    """State-space loop seen by the uncertainty, plus the constant drive.

    Returns the system (A, B, C, D) = (K(Psi G0 - I), K Psi E, F, 0) whose
    transfer matrix is the loop interconnection M(s), with any coupling
    delays attached, and the drive vector K Psi nu of the power dynamics.
    """
    kpsi = prob.k * prob.psi
    a = prob.k[:, None] * (prob.psi[:, None] * prob.g0 - np.eye(prob.n))
    b = kpsi[:, None] * prob.e
    c = prob.f
    d = np.zeros((prob.dim, prob.dim))
    sys = StateSpaceSystem(a=a, b=b, c=c, d=d, delays=prob.delays)
    return sys, prob.k * prob.psi * prob.nu


@dataclass(frozen=True)
class NominalReport:
    """Feasibility of the unperturbed power-control loop."""

    feasible: bool
    rho: float
    abscissa: float
    p_bar: np.ndarray | None
    notes: tuple[str, ...] = ()


def nominal_feasible(prob: FMProblem) -> NominalReport:
    """Check rho(Psi G0) < 1 and cross-check against the loop eigenvalues.

    The loop matrix K(Psi G0 - I) is Metzler, so it is Hurwitz exactly when
    the weighted interference radius is below one; disagreement between the
    two computations (outside a marginal band) is a numerical failure, not a
    verdict.  When feasible, the fixed point of the power iteration is
    returned.
    """
    psi_g = prob.psi[:, None] * prob.g0
    rho = _linalg.perron_root(psi_g)
    a = prob.k[:, None] * (psi_g - np.eye(prob.n))
    absc = _linalg.spectral_abscissa(a)

    notes: list[str] = []
    feasible = rho < 1.0
    margin = 1e-9 * (1.0 + rho)
    if abs(rho - 1.0) <= margin:
        notes.append("nominal loop is within margin of marginal feasibility")
        feasible = False
    else:
        absc_margin = 1e-9 * (1.0 + _linalg.sigma_max(a))
        if feasible and absc >= absc_margin:
            raise NumericalFailure(
                f"eigenvalue cross-check failed: rho = {rho:.9g} < 1 but abscissa = {absc:.3g}"
            )
        if not feasible and absc <= -absc_margin:
            raise NumericalFailure(
                f"eigenvalue cross-check failed: rho = {rho:.9g} >= 1 but abscissa = {absc:.3g}"
            )

    p_bar = None
    if feasible:
        p_bar = np.linalg.solve(np.eye(prob.n) - psi_g, prob.psi * prob.nu)
        floor = -1e-9 * (1.0 + float(np.max(np.abs(p_bar))))
        if float(np.min(p_bar)) < floor:
            raise NumericalFailure("nominal fixed point has negative entries")
        p_bar = np.clip(p_bar, 0.0, None)
    return NominalReport(feasible=feasible, rho=float(rho), abscissa=float(absc),
                         p_bar=p_bar, notes=tuple(notes))


def static_loop_matrix(prob: FMProblem) -> np.ndarray:
    """F (I - Psi G0)^{-1} Psi E, the zero-frequency loop matrix."""
    psi_g = prob.psi[:, None] * prob.g0
    x = np.linalg.solve(np.eye(prob.n) - psi_g, prob.psi[:, None] * prob.e)
    return prob.f @ x


def _closed_loop(prob: FMProblem, delta: np.ndarray) -> np.ndarray:
    g = prob.g0 + prob.e @ delta @ prob.f
    return prob.k[:, None] * (prob.psi[:, None] * g - np.eye(prob.n))


@dataclass(frozen=True)
class FMRobustReport:
    """Zero-frequency robustness verdict for the uncertain network."""

    verdict: str  # "robust" | "not_robust" | "marginal"
    mu: mu_core.MuResult
    m0: np.ndarray
    nominal: NominalReport
    witness: StructuredPerturbation | None
    witness_abscissa: float | None
    witness_marginal: StructuredPerturbation | None
    marginal_abscissa: float | None
    q: np.ndarray | None
    notes: tuple[str, ...] = ()


def robust_test(
    prob: FMProblem,
    tol: float = 1e-6,
    gap_tol: float = 1e-2,
    restarts: int = 20,
    seed: int = 0,
) -> FMRobustReport:
    """Decide robust feasibility of the whole uncertainty family.

    Computes mu of the nonnegative static loop matrix on the reduced
    structure.  When mu exceeds one, two witnesses on the original structure
    come with the verdict: a boundary perturbation whose closed loop is
    exponentially unstable, and its marginal rescaling whose closed loop
    sits on the stability boundary with fixed vector q.
    """
    nom = nominal_feasible(prob)
    if not nom.feasible:
        raise InputError(
            f"nominal network is not feasible (rho(Psi G0) = {nom.rho:.6g}); "
            "the robustness question is moot"
        )
    m0 = static_loop_matrix(prob)
    scale = 1.0 + float(np.max(np.abs(m0)))
    if float(np.min(m0)) < -1e-12 * scale:
        i, j = np.unravel_index(int(np.argmin(m0)), m0.shape)
        raise InputError(
            f"static loop matrix has negative entry ({i}, {j}) = {m0[i, j]:.3g}; "
            "check the signs of e and f"
        )
    m0 = np.clip(m0, 0.0, None)

    red = reduce_structure(prob.structure)
    res = mu_core.mu_nonneg(m0, red, tol=tol, gap_tol=gap_tol, restarts=restarts, seed=seed)

    notes: list[str] = []
    witness = None
    witness_absc = None
    marginal = None
    marginal_absc = None
    q = None
    if res.lower >= 1.0 - 1e-9:
        witness = lift_witness(prob.structure, res.witness)
        witness_absc = float(
            _linalg.spectral_abscissa(_closed_loop(prob, witness.assemble().real))
        )
        marginal, q = nonnegative_witness(m0, witness)
        marginal_absc = float(
            _linalg.spectral_abscissa(_closed_loop(prob, marginal.assemble().real))
        )

    if res.mu < 1.0 - tol:
        verdict = "robust"
    elif res.lower > 1.0 + tol:
        verdict = "not_robust"
    else:
        verdict = "marginal"
        notes.append("mu within tolerance of one")
    return FMRobustReport(
        verdict=verdict,
        mu=res,
        m0=m0,
        nominal=nom,
        witness=witness,
        witness_abscissa=witness_absc,
        witness_marginal=marginal,
        marginal_abscissa=marginal_absc,
        q=q,
        notes=tuple(notes),
    )


@dataclass(frozen=True)
class Trajectory:
    """Sampled run of the power iteration under a fixed perturbation."""

    t: np.ndarray
    p: np.ndarray
    sinr: np.ndarray
    converged: bool
    diverged: bool
    p_limit: np.ndarray | None
    steps: int
    dt_final: float
    notes: tuple[str, ...] = ()


def simulate(
    prob: FMProblem,
    delta: StructuredPerturbation | np.ndarray | None = None,
    p0: np.ndarray | None = None,
    t_final: float | None = None,
    dt: float | None = None,
    conv_tol: float = 1e-9,
    diverge_factor: float = 1e6,
) -> Trajectory:
    """Integrate p' = K(-p + Psi(G p + nu)) with explicit positivity-safe steps.

    Forward Euler with step halving: whenever a step would push a power
    below -1e-9 (relative), the step is retried at half size; the step is
    re-doubled after a stretch of clean steps.  Step-size underflow raises
    NumericalFailure instead of silently flooring the state.  The run stops
    early on convergence (vanishing derivative) or divergence (powers exceed
    ``diverge_factor`` times the reference scale).
    """
    if delta is None:
        dmat = np.zeros((prob.dim, prob.dim))
    elif isinstance(delta, StructuredPerturbation):
        dmat = delta.assemble()
    else:
        dmat = np.atleast_2d(np.asarray(delta))
        if dmat.shape != (prob.dim, prob.dim):
            raise InputError(
                f"perturbation shape {dmat.shape}, expected ({prob.dim}, {prob.dim})"
            )
    if np.iscomplexobj(dmat):
        if float(np.max(np.abs(dmat.imag))) > 0.0:
            raise InputError("simulation requires a real perturbation")
        dmat = dmat.real
    dmat = dmat.astype(float)

    notes: list[str] = []
    g = prob.g0 + prob.e @ dmat @ prob.f
    if float(np.min(g)) < 0:
        notes.append("perturbed gain matrix has negative entries")
    a_cl = prob.k[:, None] * (prob.psi[:, None] * g - np.eye(prob.n))
    drive = prob.k * prob.psi * prob.nu

    if p0 is None:
        p = np.zeros(prob.n)
    else:
        p = np.asarray(p0, dtype=float).ravel()
        if p.size != prob.n:
            raise InputError(f"p0 has length {p.size}, expected {prob.n}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InputError("p0 must be finite and nonnegative")
        p = p.copy()

    k_max, k_min = float(np.max(prob.k)), float(np.min(prob.k))
    dt0 = 0.01 / k_max if dt is None else float(dt)
    if not (np.isfinite(dt0) and dt0 > 0):
        raise InputError(f"dt must be positive, got {dt0!r}")
    horizon = 80.0 / k_min if t_final is None else float(t_final)
    if not (np.isfinite(horizon) and horizon > 0):
        raise InputError(f"t_final must be positive, got {horizon!r}")

    p_limit = None
    absc = _linalg.spectral_abscissa(a_cl)
    if absc < 0:
        p_limit = np.linalg.solve(
            np.eye(prob.n) - prob.psi[:, None] * g, prob.psi * prob.nu
        )
    ref = 1.0 + float(np.max(p))
    ref += float(np.max(np.abs(p_limit))) if p_limit is not None else float(np.max(drive))
    threshold = diverge_factor * ref

    dt_min = dt0 * 2.0**-40
    sample_dt = horizon / 2000.0
    times = [0.0]
    states = [p.copy()]
    next_sample = sample_dt

    t = 0.0
    dt_cur = dt0
    steps = 0
    clean = 0
    converged = False
    diverged = False
    max_steps = 5_000_000
    while t < horizon:
        dp = a_cl @ p + drive
        if float(np.max(np.abs(dp))) <= conv_tol * (1.0 + float(np.max(np.abs(p)))):
            converged = True
            break
        p_new = p + dt_cur * dp
        floor = -1e-9 * (1.0 + float(np.max(np.abs(p_new))))
        if float(np.min(p_new)) < floor:
            dt_cur *= 0.5
            clean = 0
            if dt_cur < dt_min:
                raise NumericalFailure(
                    f"step size underflow at t = {t:.6g}: positivity cannot be maintained"
                )
            continue
        p = np.clip(p_new, 0.0, None)
        t += dt_cur
        steps += 1
        clean += 1
        if clean >= 256 and dt_cur < dt0:
            dt_cur = min(2.0 * dt_cur, dt0)
            clean = 0
        if t >= next_sample or t >= horizon:
            times.append(t)
            states.append(p.copy())
            next_sample = t + sample_dt
        if float(np.max(p)) > threshold:
            diverged = True
            break
        if steps >= max_steps:
            raise NumericalFailure(f"step budget exhausted after {steps} steps")
    if times[-1] != t:
        times.append(t)
        states.append(p.copy())

    t_arr = np.asarray(times)
    p_arr = np.asarray(states)
    interf = p_arr @ g.T - p_arr * np.diag(g)[None, :]
    sinr = (prob.h * p_arr) / (interf + prob.nu)
    return Trajectory(
        t=t_arr,
        p=p_arr,
        sinr=sinr,
        converged=converged,
        diverged=diverged,
        p_limit=p_limit,
        steps=steps,
        dt_final=dt_cur,
        notes=tuple(notes),
    )


def trajectory_to_csv(traj: Trajectory, path: str) -> str:
    """Write the sampled trajectory as CSV: time, powers, SINRs."""
    n = traj.p.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time"] + [f"p_{i+1}" for i in range(n)] + [f"sinr_{i+1}" for i in range(n)])
        for row_t, row_p, row_s in zip(traj.t, traj.p, traj.sinr):
            w.writerow([f"{row_t:.12g}"] + [f"{v:.12g}" for v in row_p] + [f"{v:.12g}" for v in row_s])
    return path


@dataclass(frozen=True)
class FalsifyResult:
    """First destabilizing boundary sample, if any."""

    found: bool
    delta: StructuredPerturbation | None
    index: int | None
    abscissa: float | None
    checked: int


def falsify(prob: FMProblem, samples: int = 10000, seed: int = 0, chunk: int = 256) -> FalsifyResult:
    """Random search for a destabilizing unit-ball perturbation.

    Draws boundary perturbations of the original structure, alternating
    nonnegative and sign-mixed (complex where allowed) variants, and checks
    the closed-loop spectral abscissa in batches.  Returns the first sample,
    in draw order, whose closed loop is not strictly stable.  Finding one
    refutes robustness outright; finding none is only absence of evidence.
    """
    if samples < 1:
        raise InputError("samples must be at least 1")
    rng = np.random.default_rng(seed)
    eye = np.eye(prob.n)
    checked = 0
    buf: list[StructuredPerturbation] = []

    def scan(buf, base_index):
        mats = np.stack([d.assemble() for d in buf]).astype(complex)
        g = prob.g0[None] + np.einsum("ij,bjk,kl->bil", prob.e, mats, prob.f)
        a_cl = prob.k[:, None] * (prob.psi[:, None] * g - eye[None])
        absc = np.max(np.linalg.eigvals(a_cl).real, axis=1)
        hits = np.nonzero(absc >= 0.0)[0]
        if hits.size:
            i = int(hits[0])
            return base_index + i, buf[i], float(absc[i])
        return None

    for i in range(samples):
        mode = "nonneg" if i % 2 == 0 else "mixed"
        buf.append(sample_boundary(prob.structure, rng, mode=mode))
        if len(buf) == chunk or i == samples - 1:
            hit = scan(buf, checked)
            if hit is not None:
                idx, d, absc = hit
                return FalsifyResult(found=True, delta=d, index=idx,
                                     abscissa=absc, checked=idx + 1)
            checked += len(buf)
            buf = []
    return FalsifyResult(found=False, delta=None, index=None, abscissa=None, checked=checked)


@dataclass(frozen=True)
class DelayReport:
    """Invariance of the zero-frequency test under coupling delays."""

    mu_without: float
    mu_with: float
    verdict_without: str
    verdict_with: str
    static_gain_diff: float
    probe_frequency: float
    probe_diff: float
    equal: bool
    notes: tuple[str, ...] = ()


def delay_invariance(
    prob: FMProblem,
    delays: np.ndarray | None = None,
    tol: float = 1e-6,
    gap_tol: float = 1e-2,
    restarts: int = 20,
    seed: int = 0,
) -> DelayReport:
    """Show that coupling delays leave the zero-frequency verdict untouched.

    Dead times multiply loop transfer entries by unit-modulus phases, which
    are identically one at frequency zero, so the static loop matrix, the mu
    value and the verdict all coincide with the undelayed ones.  A probe
    frequency documents that the delayed response genuinely differs away
    from zero.
    """
    if delays is None:
        delays = prob.delays
    if delays is None:
        raise InputError("no delays given: pass delays= or set them on the problem")
    delays = np.atleast_2d(np.asarray(delays, dtype=float))
    if delays.shape != (prob.dim, prob.dim):
        raise InputError(f"delay matrix shape {delays.shape}, expected ({prob.dim}, {prob.dim})")
    if not np.all(np.isfinite(delays)) or np.any(delays < 0):
        raise InputError("delays must be finite and nonnegative")

    base = FMProblem(h=prob.h, g0=prob.g0, nu=prob.nu, gamma=prob.gamma, k=prob.k,
                     e=prob.e, f=prob.f, structure=prob.structure, delays=None)
    delayed = FMProblem(h=prob.h, g0=prob.g0, nu=prob.nu, gamma=prob.gamma, k=prob.k,
                        e=prob.e, f=prob.f, structure=prob.structure, delays=delays)
    sys0, _ = build_nominal(base)
    sys1, _ = build_nominal(delayed)

    gain_diff = float(np.max(np.abs(static_gain(sys1) - static_gain(sys0))))
    r0 = robust_test(base, tol=tol, gap_tol=gap_tol, restarts=restarts, seed=seed)
    r1 = robust_test(delayed, tol=tol, gap_tol=gap_tol, restarts=restarts, seed=seed)

    tau_max = float(np.max(delays))
    if tau_max > 0:
        w_probe = 0.5 * math.pi / tau_max
        probe_diff = float(np.max(np.abs(freq_response(sys1, w_probe) - freq_response(sys0, w_probe))))
    else:
        w_probe = 0.0
        probe_diff = 0.0

    equal = abs(r1.mu.mu - r0.mu.mu) <= 1e-12 * max(1.0, r0.mu.mu) and r0.verdict == r1.verdict
    notes = []
    if tau_max == 0:
        notes.append("all delays are zero; the comparison is trivial")
    return DelayReport(
        mu_without=r0.mu.mu,
        mu_with=r1.mu.mu,
        verdict_without=r0.verdict,
        verdict_with=r1.verdict,
        static_gain_diff=gain_diff,
        probe_frequency=w_probe,
        probe_diff=probe_diff,
        equal=equal,
        notes=tuple(notes),
    )
