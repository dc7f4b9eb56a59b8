"""Command-line front end.

Problems are JSON files with a ``version`` field and exactly one of three
payloads: ``matrix`` (a nonnegative matrix plus a block structure),
``system`` (state-space data plus a block structure on the loop), or ``fm``
(a power-control network with structured uncertainty).  Unknown keys are
rejected with their JSON path so typos fail loudly instead of being ignored.

Exit codes: 0 for a completed computation with an affirmative or neutral
outcome, 1 for a negative verdict (not robust, dominance refuted, nominal
infeasible, divergence, a falsifier found), 2 for input errors, 3 for
numerical failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time

import numpy as np

from . import fm as fm_mod
from . import mu_core, structure, systems
from .errors import InputError, NumericalFailure, PosmuError

_ALLOWED_OPTIONS = {
    "tol", "gap_tol", "seed", "restarts", "max_iter", "grid", "samples",
    "t_final", "dt", "horizon",
}


def _check_keys(obj, path, required, optional=frozenset()):
    if not isinstance(obj, dict):
        raise InputError(f"expected an object at {path}, got {type(obj).__name__}")
    allowed = set(required) | set(optional)
    for k in obj:
        if k not in allowed:
            raise InputError(f"unknown key {k!r} at {path}")
    for k in required:
        if k not in obj:
            raise InputError(f"missing key {k!r} at {path}")


def _as_array(x, path, ndim):
    try:
        arr = np.asarray(x, dtype=float)
    except (TypeError, ValueError):
        raise InputError(f"value at {path} is not numeric")
    if arr.ndim != ndim:
        raise InputError(f"value at {path} must be {ndim}-dimensional, got shape {arr.shape}")
    return arr


def _load_structure(lst, path) -> structure.BlockStructure:
    if not isinstance(lst, list) or not lst:
        raise InputError(f"{path} must be a nonempty list of blocks")
    specs = []
    for i, entry in enumerate(lst):
        p = f"{path}[{i}]"
        _check_keys(entry, p, required={"kind", "size"}, optional={"field"})
        specs.append(
            structure.BlockSpec(
                kind=entry["kind"],
                size=int(entry["size"]),
                field=entry.get("field", "real"),
            )
        )
    return structure.validate_structure(specs)


def _load_matrix(obj, path):
    _check_keys(obj, path, required={"m", "structure"})
    s = _load_structure(obj["structure"], f"{path}.structure")
    m = _as_array(obj["m"], f"{path}.m", 2)
    if m.shape != (s.total_dim, s.total_dim):
        raise InputError(
            f"matrix at {path}.m has shape {m.shape}, structure dimension is {s.total_dim}"
        )
    return m, s


def _load_system(obj, path):
    _check_keys(obj, path, required={"a", "b", "c", "d", "structure"}, optional={"delays"})
    s = _load_structure(obj["structure"], f"{path}.structure")
    a = _as_array(obj["a"], f"{path}.a", 2)
    b = _as_array(obj["b"], f"{path}.b", 2)
    c = _as_array(obj["c"], f"{path}.c", 2)
    d = _as_array(obj["d"], f"{path}.d", 2)
    delays = None
    if "delays" in obj:
        delays = _as_array(obj["delays"], f"{path}.delays", 2)
    if s.is_permuted:
        perm = np.asarray(s.permutation)
        if b.shape[1] != s.total_dim or c.shape[0] != s.total_dim:
            raise InputError(f"loop size at {path} does not match the structure dimension")
        b = b[:, perm]
        c = c[perm, :]
        d = d[np.ix_(perm, perm)]
        if delays is not None:
            delays = delays[np.ix_(perm, perm)]
    try:
        sys_obj = systems.StateSpaceSystem(a=a, b=b, c=c, d=d, delays=delays)
    except InputError as exc:
        raise InputError(f"at {path}: {exc}")
    return sys_obj, s


def _load_fm(obj, path) -> fm_mod.FMProblem:
    _check_keys(
        obj, path,
        required={"h", "noise", "targets", "control", "uncertainty"},
        optional={"g0", "gains", "delays"},
    )
    if ("g0" in obj) == ("gains" in obj):
        raise InputError(f"exactly one of 'g0' or 'gains' must be present at {path}")
    unc = obj["uncertainty"]
    _check_keys(unc, f"{path}.uncertainty", required={"e", "f", "structure"})
    s = _load_structure(unc["structure"], f"{path}.uncertainty.structure")
    e = _as_array(unc["e"], f"{path}.uncertainty.e", 2)
    f = _as_array(unc["f"], f"{path}.uncertainty.f", 2)
    delays = _as_array(obj["delays"], f"{path}.delays", 2) if "delays" in obj else None
    try:
        if "gains" in obj:
            if not isinstance(obj["gains"], list):
                raise InputError(f"{path}.gains must be a list of (from, to, gain) triples")
            return fm_mod.FMProblem.from_pairs(
                h=obj["h"], pairs=obj["gains"], nu=obj["noise"], gamma=obj["targets"],
                k=obj["control"], e=e, f=f, structure=s, delays=delays,
            )
        g0 = _as_array(obj["g0"], f"{path}.g0", 2)
        return fm_mod.FMProblem(
            h=obj["h"], g0=g0, nu=obj["noise"], gamma=obj["targets"],
            k=obj["control"], e=e, f=f, structure=s, delays=delays,
        )
    except InputError as exc:
        raise InputError(f"at {path}: {exc}")


def _load_problem(file_path):
    try:
        with open(file_path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"problem file not found: {file_path}")
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON in {file_path}: {exc}")
    _check_keys(raw, "$", required={"version"}, optional={"matrix", "system", "fm", "options"})
    if raw["version"] != 1:
        raise InputError(f"unsupported problem version {raw['version']!r} at $.version")
    kinds = [k for k in ("matrix", "system", "fm") if k in raw]
    if len(kinds) != 1:
        raise InputError("exactly one of 'matrix', 'system' or 'fm' must be present at $")
    options = raw.get("options", {})
    _check_keys(options, "$.options", required=set(), optional=_ALLOWED_OPTIONS)
    if "grid" in options:
        _check_keys(options["grid"], "$.options.grid", required={"lo", "hi", "count"})
    digest = hashlib.sha256(
        json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()[:16]
    return raw, kinds[0], options, digest


def _parse_grid(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError(f"grid must be lo:hi:count, got {text!r}")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InputError(f"grid must be lo:hi:count with numeric parts, got {text!r}")


def _resolve_options(args, options):
    """File options overridden by explicit command-line flags."""
    out = {
        "tol": 1e-6, "gap_tol": 1e-2, "seed": 0, "restarts": 20,
    }
    out.update({k: options[k] for k in options})
    if getattr(args, "tol", None) is not None:
        out["tol"] = args.tol
    if getattr(args, "gap_tol", None) is not None:
        out["gap_tol"] = args.gap_tol
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "restarts", None) is not None:
        out["restarts"] = args.restarts
    if getattr(args, "max_iter", None) is not None:
        out["max_iter"] = args.max_iter
    if getattr(args, "grid", None) is not None:
        lo, hi, count = _parse_grid(args.grid)
        out["grid"] = {"lo": lo, "hi": hi, "count": count}
    if getattr(args, "samples", None) is not None:
        out["samples"] = args.samples
    if getattr(args, "t_final", None) is not None:
        out["t_final"] = args.t_final
    if getattr(args, "dt", None) is not None:
        out["dt"] = args.dt
    out["tol"] = float(out["tol"])
    out["gap_tol"] = float(out["gap_tol"])
    out["seed"] = int(out["seed"])
    out["restarts"] = int(out["restarts"])
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        if x.imag == 0:
            return x.real
        return {"real": x.real, "imag": x.imag}
    return x


def _fmt_value(v):
    if isinstance(v, float):
        return f"{v:.9g}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt_value(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {_fmt_value(x)}" for k, x in v.items()) + "}"
    return str(v)


def _render_text(report):
    lines = []

    def walk(obj, prefix):
        for k, v in obj.items():
            if isinstance(v, dict):
                lines.append(f"{prefix}{k}:")
                walk(v, prefix + "  ")
            else:
                lines.append(f"{prefix}{k}: {_fmt_value(v)}")

    walk(report, "")
    return "\n".join(lines) + "\n"


def _emit(report, args):
    report = _jsonable(report)
    if args.format == "json":
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    else:
        text = _render_text(report)
    sys.stdout.write(text)
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)


def _mu_summary(res: mu_core.MuResult):
    out = {
        "mu": res.mu,
        "upper": res.upper,
        "lower": res.lower,
        "gap": res.gap,
        "theta": list(res.theta.values),
        "diagnostics": res.diagnostics,
    }
    if res.witness is not None:
        out["witness_blocks"] = [b for b in res.witness.blocks]
    if res.witness_marginal is not None:
        out["marginal_blocks"] = [b for b in res.witness_marginal.blocks]
        out["q"] = res.q
    return out


def _cmd_mu(args):
    raw, kind, options, digest = _load_problem(args.problem)
    if kind != "matrix":
        raise InputError(f"'posmu mu' needs a matrix problem, got {kind!r}")
    m, s = _load_matrix(raw["matrix"], "$.matrix")
    opts = _resolve_options(args, options)
    m_can = s.permute_matrix(m) if s.is_permuted else m
    res = mu_core.mu_nonneg(
        m_can, structure.reduce_structure(s),
        tol=opts["tol"], gap_tol=opts["gap_tol"],
        restarts=opts["restarts"], seed=opts["seed"],
    )
    result = _mu_summary(res)
    if s.is_permuted:
        result["permutation"] = list(s.permutation)
    return digest, opts, result, 0


def _cmd_reduce(args):
    raw, kind, options, digest = _load_problem(args.problem)
    if kind != "matrix":
        raise InputError(f"'posmu reduce' needs a matrix problem, got {kind!r}")
    _, s = _load_matrix(raw["matrix"], "$.matrix")
    red = structure.reduce_structure(s)
    result = {
        "canonical_blocks": [
            {"kind": b.kind, "size": b.size, "field": b.field} for b in s.blocks
        ],
        "block_order": list(s.block_order),
        "permutation": list(s.permutation),
        "reduced_sizes": list(red.sizes),
        "origin_map": list(red.origin_map),
        "total_dim": s.total_dim,
    }
    return digest, _resolve_options(args, options), result, 0


def _grid_tuple(opts):
    if "grid" in opts:
        g = opts["grid"]
        return float(g["lo"]), float(g["hi"]), int(g["count"])
    return None


def _cmd_dominance(args):
    raw, kind, options, digest = _load_problem(args.problem)
    if kind != "system":
        raise InputError(f"'posmu dominance' needs a system problem, got {kind!r}")
    sys_obj, _ = _load_system(raw["system"], "$.system")
    opts = _resolve_options(args, options)
    rep = systems.check_positive_dominance(sys_obj, grid=_grid_tuple(opts), tol=opts["tol"])
    result = {
        "verdict": rep.verdict,
        "static_gain": rep.static_gain,
        "peaks": rep.peaks,
        "peak_frequencies": rep.peak_frequencies,
        "grid": list(rep.grid),
        "notes": list(rep.notes),
    }
    if rep.refuted_entry is not None:
        result["refuted_entry"] = list(rep.refuted_entry)
        result["refuted_frequency"] = rep.refuted_frequency
    return digest, opts, result, 1 if rep.verdict == "refuted" else 0


def _cmd_robust(args):
    raw, kind, options, digest = _load_problem(args.problem)
    if kind != "system":
        raise InputError(f"'posmu robust' needs a system problem, got {kind!r}")
    sys_obj, s = _load_system(raw["system"], "$.system")
    opts = _resolve_options(args, options)
    rep = systems.robust_stability(
        sys_obj, s, tol=opts["tol"], gap_tol=opts["gap_tol"],
        restarts=opts["restarts"], seed=opts["seed"],
    )
    result = {
        "verdict": rep.verdict,
        "frequency": rep.frequency,
        "static_gain": rep.static_gain,
        "mu": _mu_summary(rep.mu),
        "notes": list(rep.notes),
    }
    if rep.dominance is not None:
        result["dominance"] = rep.dominance.verdict
    return digest, opts, result, 0 if rep.verdict == "robust" else 1


def _cmd_sweep(args):
    raw, kind, options, digest = _load_problem(args.problem)
    if kind != "system":
        raise InputError(f"'posmu sweep' needs a system problem, got {kind!r}")
    sys_obj, s = _load_system(raw["system"], "$.system")
    opts = _resolve_options(args, options)
    grid = _grid_tuple(opts)
    if grid is None:
        alpha = abs(np.max(np.linalg.eigvals(sys_obj.a).real))
        grid = (1e-3 * alpha, 1e3 * alpha, 31)
    lo, hi, count = grid
    if not (0 < lo < hi) or count < 2:
        raise InputError(f"sweep grid must satisfy 0 < lo < hi, count >= 2, got {grid!r}")
    freqs = np.concatenate(([0.0], np.logspace(np.log10(lo), np.log10(hi), count)))
    bounds = systems.frequency_sweep_mu(sys_obj, s, freqs, tol=opts["tol"])
    sup_idx = int(np.argmax(bounds))
    result = {
        "frequencies": freqs,
        "bounds": bounds,
        "value_at_zero": float(bounds[0]),
        "sup": float(bounds[sup_idx]),
        "sup_frequency": float(freqs[sup_idx]),
        "zero_is_sup": bool(bounds[0] >= np.max(bounds) - 1e-6 * (1.0 + np.max(bounds))),
    }
    return digest, opts, result, 0


def _require_fm(raw, kind, command):
    if kind != "fm":
        raise InputError(f"'posmu fm {command}' needs an fm problem, got {kind!r}")
    return _load_fm(raw["fm"], "$.fm")


def _cmd_fm_check(args):
    raw, kind, options, digest = _load_problem(args.problem)
    prob = _require_fm(raw, kind, "check")
    opts = _resolve_options(args, options)
    rep = fm_mod.nominal_feasible(prob)
    result = {
        "feasible": rep.feasible,
        "rho": rep.rho,
        "abscissa": rep.abscissa,
        "notes": list(rep.notes),
    }
    if rep.p_bar is not None:
        result["p_bar"] = rep.p_bar
    return digest, opts, result, 0 if rep.feasible else 1


def _fm_robust_result(rep: fm_mod.FMRobustReport):
    result = {
        "verdict": rep.verdict,
        "mu": _mu_summary(rep.mu),
        "static_loop_matrix": rep.m0,
        "nominal_rho": rep.nominal.rho,
        "notes": list(rep.notes),
    }
    if rep.witness is not None:
        result["witness_blocks"] = [b for b in rep.witness.blocks]
        result["witness_abscissa"] = rep.witness_abscissa
    if rep.witness_marginal is not None:
        result["marginal_blocks"] = [b for b in rep.witness_marginal.blocks]
        result["marginal_abscissa"] = rep.marginal_abscissa
        result["q"] = rep.q
    return result


def _cmd_fm_robust(args):
    raw, kind, options, digest = _load_problem(args.problem)
    prob = _require_fm(raw, kind, "robust")
    opts = _resolve_options(args, options)
    rep = fm_mod.robust_test(
        prob, tol=opts["tol"], gap_tol=opts["gap_tol"],
        restarts=opts["restarts"], seed=opts["seed"],
    )
    return digest, opts, _fm_robust_result(rep), 0 if rep.verdict == "robust" else 1


def _cmd_fm_simulate(args):
    raw, kind, options, digest = _load_problem(args.problem)
    prob = _require_fm(raw, kind, "simulate")
    opts = _resolve_options(args, options)
    delta = None
    if args.delta != "none":
        rep = fm_mod.robust_test(
            prob, tol=opts["tol"], gap_tol=opts["gap_tol"],
            restarts=opts["restarts"], seed=opts["seed"],
        )
        if rep.witness is None:
            raise InputError(
                f"no destabilizing witness exists: mu = {rep.mu.mu:.6g} < 1"
            )
        delta = rep.witness if args.delta == "witness" else rep.witness_marginal
    traj = fm_mod.simulate(
        prob, delta=delta,
        t_final=opts.get("t_final"), dt=opts.get("dt"),
    )
    result = {
        "perturbation": args.delta,
        "converged": traj.converged,
        "diverged": traj.diverged,
        "steps": traj.steps,
        "t_end": float(traj.t[-1]),
        "p_final": traj.p[-1],
        "sinr_final": traj.sinr[-1],
        "notes": list(traj.notes),
    }
    if traj.p_limit is not None:
        result["p_limit"] = traj.p_limit
    if not traj.converged and not traj.diverged:
        result["notes"] = result["notes"] + ["run ended without converging or diverging"]
    if args.csv:
        fm_mod.trajectory_to_csv(traj, args.csv)
        result["csv"] = args.csv
    return digest, opts, result, 1 if traj.diverged else 0


def _cmd_fm_falsify(args):
    raw, kind, options, digest = _load_problem(args.problem)
    prob = _require_fm(raw, kind, "falsify")
    opts = _resolve_options(args, options)
    samples = int(opts.get("samples", 10000))
    rep = fm_mod.falsify(prob, samples=samples, seed=opts["seed"])
    result = {"found": rep.found, "checked": rep.checked}
    if rep.found:
        result["index"] = rep.index
        result["abscissa"] = rep.abscissa
        result["delta_blocks"] = [b for b in rep.delta.blocks]
    return digest, opts, result, 1 if rep.found else 0


def _cmd_fm_delays(args):
    raw, kind, options, digest = _load_problem(args.problem)
    prob = _require_fm(raw, kind, "delays")
    opts = _resolve_options(args, options)
    rep = fm_mod.delay_invariance(
        prob, tol=opts["tol"], gap_tol=opts["gap_tol"],
        restarts=opts["restarts"], seed=opts["seed"],
    )
    result = {
        "equal": rep.equal,
        "mu_without": rep.mu_without,
        "mu_with": rep.mu_with,
        "verdict_without": rep.verdict_without,
        "verdict_with": rep.verdict_with,
        "static_gain_diff": rep.static_gain_diff,
        "probe_frequency": rep.probe_frequency,
        "probe_diff": rep.probe_diff,
        "notes": list(rep.notes),
    }
    if not rep.equal:
        raise NumericalFailure("delay invariance violated; see report")
    return digest, opts, result, 0


def _add_common(parser):
    parser.add_argument("problem", help="path to a JSON problem file")
    parser.add_argument("--tol", type=float, default=None, help="solver tolerance")
    parser.add_argument("--gap-tol", dest="gap_tol", type=float, default=None,
                        help="allowed upper/lower bound gap")
    parser.add_argument("--seed", type=int, default=None, help="random seed")
    parser.add_argument("--restarts", type=int, default=None, help="search restarts")
    parser.add_argument("--max-iter", dest="max_iter", type=int, default=None,
                        help="iteration budget override")
    parser.add_argument("--format", choices=("text", "json"), default="text",
                        help="report format")
    parser.add_argument("--out", default=None, help="also write the report to this file")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="posmu",
        description="Structured singular values of nonnegative matrices, "
        "zero-frequency robustness of positive systems, and power-control analysis.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("mu", help="structured singular value of a nonnegative matrix")
    _add_common(sp)
    sp.set_defaults(func=_cmd_mu)

    sp = sub.add_parser("reduce", help="canonicalize and reduce a block structure")
    _add_common(sp)
    sp.set_defaults(func=_cmd_reduce)

    sp = sub.add_parser("dominance", help="check that gain moduli peak at frequency zero")
    _add_common(sp)
    sp.add_argument("--grid", default=None, help="frequency grid lo:hi:count")
    sp.set_defaults(func=_cmd_dominance)

    sp = sub.add_parser("robust", help="zero-frequency robust stability of a system")
    _add_common(sp)
    sp.set_defaults(func=_cmd_robust)

    sp = sub.add_parser("sweep", help="frequency sweep of scaling upper bounds")
    _add_common(sp)
    sp.add_argument("--grid", default=None, help="frequency grid lo:hi:count")
    sp.set_defaults(func=_cmd_sweep)

    fmp = sub.add_parser("fm", help="power-control network analysis")
    fm_sub = fmp.add_subparsers(dest="fm_command", required=True)

    sp = fm_sub.add_parser("check", help="nominal feasibility")
    _add_common(sp)
    sp.set_defaults(func=_cmd_fm_check)

    sp = fm_sub.add_parser("robust", help="robustness against structured uncertainty")
    _add_common(sp)
    sp.set_defaults(func=_cmd_fm_robust)

    sp = fm_sub.add_parser("simulate", help="integrate the power dynamics")
    _add_common(sp)
    sp.add_argument("--delta", choices=("none", "witness", "marginal"), default="none",
                    help="perturbation to apply")
    sp.add_argument("--t-final", dest="t_final", type=float, default=None)
    sp.add_argument("--dt", type=float, default=None)
    sp.add_argument("--csv", default=None, help="write the trajectory to this CSV file")
    sp.set_defaults(func=_cmd_fm_simulate)

    sp = fm_sub.add_parser("falsify", help="random search for a destabilizer")
    _add_common(sp)
    sp.add_argument("--samples", type=int, default=None)
    sp.set_defaults(func=_cmd_fm_falsify)

    sp = fm_sub.add_parser("delays", help="delay invariance of the zero-frequency test")
    _add_common(sp)
    sp.set_defaults(func=_cmd_fm_delays)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        digest, opts, result, code = args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except PosmuError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    command = args.command if args.command != "fm" else f"fm {args.fm_command}"
    report = {
        "command": command,
        "problem_digest": digest,
        "options": {k: opts[k] for k in sorted(opts)},
        "result": result,
        "wall_time": round(time.perf_counter() - t0, 6),
    }
    _emit(report, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
