"""Command-line driver: solve, sweep, converge, verify.

Configuration is a single JSON document; scalar flags override its
fields.  Every command writes result.json plus a command-specific CSV
into the output directory and communicates through exit codes:

    0  success
    1  verification failure
    2  invalid input
    3  solver non-convergence (partial results are still written)
    4  analysis precondition failure (non-monotone sweep predicate,
       no asymptotic mesh regime)

Numbers are serialized with 17 significant digits, enough to round-trip
IEEE doubles, so reruns with the same config are byte-identical except
for the recorded wall time.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (AnalysisError, ConvergenceInfo, extrapolate,
                       run_classified, solve_lowest, sweep_critical_sigma)
from .assembly import assemble
from .domain import DomainSpec, build_grid
from .eigen import EigenConfig, solve_dense
from .sigma import SigmaProfile, ground_energy_bounds, profile_from_config
from .verify import CHECK_NAMES, format_report, run_all

ORACLE_DIM_LIMIT = 2000


# ---------------------------------------------------------------------------
# serialization with fixed float width

def _plain(obj):
    """Normalize numpy containers/scalars to plain Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _scalar17(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isfinite(v):
            return format(v, ".17g")
        return '"inf"' if v > 0 else ('"-inf"' if v < 0 else '"nan"')
    return json.dumps(v)


def _emit(obj, out: list, indent: int) -> None:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for pos, (key, val) in enumerate(obj.items()):
            out.append(f'{pad}  {json.dumps(key)}: ')
            _emit(val, out, indent + 1)
            out.append(",\n" if pos < len(obj) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list)) for v in obj):
            out.append("[" + ", ".join(_scalar17(v) for v in obj) + "]")
            return
        out.append("[\n")
        for pos, val in enumerate(obj):
            out.append(pad + "  ")
            _emit(val, out, indent + 1)
            out.append(",\n" if pos < len(obj) - 1 else "\n")
        out.append(pad + "]")
    else:
        out.append(_scalar17(obj))


def dumps17(obj) -> str:
    """JSON text with floats at 17 significant digits."""
    out: list = []
    _emit(_plain(obj), out, 0)
    return "".join(out) + "\n"


def _write_csv(path: Path, header: list, rows: list) -> None:
    def cell(v) -> str:
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return format(v, ".17g") if math.isfinite(v) else str(v)
        return str(v)

    lines = [",".join(header)]
    lines.extend(",".join(cell(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# config parsing

def _parse_d(raw) -> float:
    if isinstance(raw, str) and raw.strip().lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ValueError(f"cannot parse separation bound {raw!r}") from None


def load_config(args) -> dict:
    cfg: dict = {}
    if args.config is not None:
        with open(args.config) as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"malformed config {args.config}: {exc}") \
                    from exc
        if not isinstance(cfg, dict):
            raise ValueError("config root must be a JSON object")
    domain = dict(cfg.get("domain", {}))
    if args.d is not None:
        domain["d"] = args.d
    if args.L is not None:
        domain["L"] = args.L
    if args.k is not None:
        domain["k"] = args.k
    if args.h is not None:
        domain["h"] = args.h
    cfg["domain"] = domain
    if args.sigma_const is not None:
        cfg["profile"] = {"kind": "constant", "value": args.sigma_const}
    if args.seed is not None:
        eig = dict(cfg.get("eigen", {}))
        eig["seed"] = args.seed
        cfg["eigen"] = eig
    return cfg


def spec_from_config(cfg: dict) -> DomainSpec:
    dom = cfg.get("domain")
    if not isinstance(dom, dict) or not dom:
        raise ValueError("config needs a 'domain' object with d and L")
    unknown = set(dom) - {"d", "L", "k", "h"}
    if unknown:
        raise ValueError(f"unknown domain fields: {sorted(unknown)}")
    if "d" not in dom or "L" not in dom:
        raise ValueError("domain config requires 'd' and 'L'")
    d = _parse_d(dom["d"])
    L = float(dom["L"])
    if math.isinf(d):
        if "h" not in dom:
            raise ValueError("domain with d = inf requires a mesh width 'h'")
        return DomainSpec.infinite(float(dom["h"]), L)
    if "k" not in dom:
        raise ValueError("domain with finite d requires a subdivision "
                         "count 'k'")
    return DomainSpec.finite(d, int(dom["k"]), L)


def profile_from(cfg: dict) -> SigmaProfile:
    return profile_from_config(cfg.get("profile",
                                       {"kind": "constant", "value": 0.0}))


def eigen_from_config(cfg: dict) -> EigenConfig:
    eig = cfg.get("eigen", {})
    if not isinstance(eig, dict):
        raise ValueError("'eigen' must be an object")
    unknown = set(eig) - {"nev", "block_extra", "tol", "max_iter", "seed"}
    if unknown:
        raise ValueError(f"unknown eigen fields: {sorted(unknown)}")
    return EigenConfig(nev=int(eig.get("nev", 1)),
                       block_extra=int(eig.get("block_extra", 5)),
                       tol=float(eig.get("tol", 1e-9)),
                       max_iter=int(eig.get("max_iter", 2000)),
                       seed=int(eig.get("seed", 42)))


def _section(cfg: dict, name: str, allowed: set) -> dict:
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise ValueError(f"'{name}' must be an object")
    unknown = set(sec) - allowed
    if unknown:
        raise ValueError(f"unknown {name} fields: {sorted(unknown)}")
    return sec


def _echo(spec: DomainSpec, cfg: dict, eig: EigenConfig,
          extra: dict | None = None) -> dict:
    domain = {"d": "inf" if spec.is_infinite else spec.d, "L": spec.L}
    if spec.is_infinite:
        domain["h"] = spec.h
    else:
        domain["k"] = spec.k
    echo = {"domain": domain,
            "profile": cfg.get("profile",
                               {"kind": "constant", "value": 0.0}),
            "eigen": {"nev": eig.nev, "block_extra": eig.block_extra,
                      "tol": eig.tol, "max_iter": eig.max_iter,
                      "seed": eig.seed}}
    if extra:
        echo.update(extra)
    return echo


def _metadata(command: str, eig: EigenConfig | None, threads: int,
              started: float) -> dict:
    return {"package": "halfmol", "version": __version__,
            "command": command,
            "seed": eig.seed if eig is not None else None,
            "threads": threads,
            "wall_time_s": time.perf_counter() - started}


def _outdir(args) -> Path:
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# commands

def cmd_solve(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args)
    spec = spec_from_config(cfg)
    prof = profile_from(cfg)
    eig = eigen_from_config(cfg)
    sol = _section(cfg, "solve", {"doublings", "method"})
    doublings = int(sol.get("doublings", 1))
    method = str(sol.get("method", "iterative"))
    if method not in ("iterative", "dense", "auto"):
        raise ValueError(f"solve method must be iterative, dense or auto, "
                         f"got {method!r}")

    result, runs = run_classified(spec, prof, eig, method=method,
                                  doublings=doublings, threads=args.threads)

    oracle = None
    if args.oracle:
        op = assemble(build_grid(spec), prof)
        if op.dim > ORACLE_DIM_LIMIT:
            raise ValueError(f"--oracle compares against the dense solver "
                             f"and needs <= {ORACLE_DIM_LIMIT} unknowns; "
                             f"this grid has {op.dim}")
        dense = solve_dense(op)
        m = min(len(runs[0].values), len(dense.values))
        dv = np.asarray(dense.values[:m])
        iv = np.asarray(runs[0].values[:m])
        rel = float(np.max(np.abs(dv - iv) / np.maximum(np.abs(dv), 1e-12)))
        oracle = {"dense_values": list(dv),
                  "solver_values": list(iv),
                  "max_rel_disagreement": rel}

    bounds = None
    if spec.is_infinite:
        try:
            lo, hi = ground_energy_bounds(prof)
            bounds = {"lower": lo, "upper": hi}
        except ValueError:
            bounds = None

    doc = {"config": _echo(spec, cfg, eig,
                           {"solve": {"doublings": doublings,
                                      "method": method}}),
           "threshold": spec.threshold,
           "eigenvalues": [{"value": v, "residual": r, "converged": c}
                           for v, r, c in zip(result.values, result.residuals,
                                              result.converged)],
           "discrete": [d.as_dict() for d in result.discrete],
           "continuum_artifacts": [a.as_dict() for a in result.artifacts],
           "unstable": list(result.unstable),
           "refused": list(result.refused),
           "ground_energy": result.ground_energy}
    if bounds is not None:
        doc["bounds"] = bounds
    if oracle is not None:
        doc["oracle"] = oracle
    doc["metadata"] = _metadata("solve", eig, args.threads, started)

    out = _outdir(args)
    (out / "result.json").write_text(dumps17(doc))
    rows = []
    for level, pairs in enumerate(runs):
        L = spec.L * (2 ** level)
        for idx in range(len(pairs.values)):
            rows.append((L, idx, float(pairs.values[idx]),
                         float(pairs.residuals[idx]),
                         bool(pairs.converged[idx])))
    _write_csv(out / "eigenvalues.csv",
               ["L", "index", "value", "residual", "converged"], rows)

    if result.refused or not all(result.converged):
        print("solver did not converge on all requested pairs; partial "
              "results written", file=sys.stderr)
        return 3
    return 0


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args)
    spec = spec_from_config(cfg)
    eig = eigen_from_config(cfg)
    sw = _section(cfg, "sweep", {"bracket", "tol_sigma", "method"})
    bracket = sw.get("bracket", [-10.0, 0.0])
    if not (isinstance(bracket, (list, tuple)) and len(bracket) == 2):
        raise ValueError(f"sweep bracket must be a pair, got {bracket!r}")
    tol_sigma = float(sw.get("tol_sigma", 0.01))
    method = str(sw.get("method", "auto"))

    res = sweep_critical_sigma(spec, (float(bracket[0]), float(bracket[1])),
                               tol_sigma, cfg=eig, method=method,
                               threads=args.threads)

    doc = {"config": _echo(spec, cfg, eig,
                           {"sweep": {"bracket": [float(bracket[0]),
                                                  float(bracket[1])],
                                      "tol_sigma": tol_sigma,
                                      "method": method}}),
           "threshold": spec.threshold,
           "critical_sigma": res.critical_sigma,
           "bracket": [res.bracket_lo, res.bracket_hi],
           "tol_achieved": res.tol_achieved,
           "history": [s.as_dict() for s in res.history],
           "metadata": _metadata("sweep", eig, args.threads, started)}
    out = _outdir(args)
    (out / "result.json").write_text(dumps17(doc))
    _write_csv(out / "trace.csv",
               ["iteration", "s_lo", "s_hi", "lambda_min", "threshold"],
               [(s.iteration, s.s_lo, s.s_hi, s.lambda_min, s.threshold)
                for s in res.history])
    return 0


def cmd_converge(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args)
    spec = spec_from_config(cfg)
    prof = profile_from(cfg)
    eig = eigen_from_config(cfg)
    cv = _section(cfg, "converge", {"h_values", "k_values", "method"})
    method = str(cv.get("method", "iterative"))

    if spec.is_infinite:
        if "h_values" not in cv:
            raise ValueError("converge on the quadrant needs 'h_values'")
        hs = sorted((float(h) for h in cv["h_values"]), reverse=True)
        specs = [DomainSpec.infinite(h, spec.L) for h in hs]
    else:
        if "k_values" not in cv:
            raise ValueError("converge on the strip needs 'k_values'")
        ks = sorted((int(k) for k in cv["k_values"]))
        specs = [DomainSpec.finite(spec.d, k, spec.L) for k in ks]
        hs = [s.h for s in specs]

    lam = []
    for sp in specs:
        pairs = solve_lowest(sp, prof, eig, method=method)[1]
        if not pairs.converged[0]:
            raise RuntimeError(f"eigensolve did not converge at h = {sp.h}")
        lam.append(float(pairs.values[0]))

    limit, order = extrapolate(zip(hs, lam))
    conv = ConvergenceInfo(h_values=tuple(hs), lambda_values=tuple(lam),
                           extrapolated=limit, observed_order=order,
                           error_estimate=abs(limit - lam[-1]))

    doc = {"config": _echo(spec, cfg, eig, {"converge": {
               "h_values" if spec.is_infinite else "k_values":
               cv.get("h_values", cv.get("k_values")),
               "method": method}}),
           "threshold": spec.threshold,
           "convergence": conv.as_dict(),
           "metadata": _metadata("converge", eig, args.threads, started)}
    out = _outdir(args)
    (out / "result.json").write_text(dumps17(doc))

    rows = []
    for pos, (h, v) in enumerate(zip(hs, lam)):
        if pos >= 2:
            _, p_local = extrapolate(list(zip(hs, lam))[pos - 2:pos + 1])
            p_cell = p_local
        else:
            p_cell = ""
        rows.append((h, spec.L, v, p_cell))
    _write_csv(out / "convergence.csv",
               ["h", "L", "lambda_min", "observed_order"], rows)
    return 0


def cmd_verify(args) -> int:
    started = time.perf_counter()
    results = run_all(args.fidelity, threads=args.threads,
                      names=args.checks)
    report = format_report(results)
    print(report)
    out = _outdir(args)
    doc = {"fidelity": args.fidelity,
           "all_passed": all(r.passed for r in results),
           "checks": [r.as_dict() for r in results],
           "metadata": _metadata("verify", None, args.threads, started)}
    (out / "result.json").write_text(dumps17(doc))
    (out / "report.txt").write_text(report + "\n")
    return 0 if all(r.passed for r in results) else 1


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="halfmol",
        description="Spectral solver for a hard-bound pair of particles on "
                    "the half-line with contact boundary coupling.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", default=".",
                        help="output directory (default: current)")
    common.add_argument("--threads", type=int, default=1,
                        help="parallel solve degree (results do not depend "
                             "on it)")
    common.add_argument("--seed", type=int, help="override the solver seed")
    common.add_argument("--d", help="separation bound, a number or 'inf'")
    common.add_argument("--L", type=float, help="truncation length")
    common.add_argument("--k", type=int,
                        help="subdivisions of d (finite d only)")
    common.add_argument("--h", type=float, help="mesh width (d = inf only)")
    common.add_argument("--sigma-const", type=float, dest="sigma_const",
                        help="use a constant boundary coupling")

    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", parents=[common],
                             help="solve one configuration and classify "
                                  "its spectrum")
    p_solve.add_argument("--oracle", action="store_true",
                         help="also run the dense solver (small grids) and "
                              "record the disagreement")
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", parents=[common],
                             help="bisect the critical constant coupling")
    p_sweep.set_defaults(func=cmd_sweep)

    p_conv = sub.add_parser("converge", parents=[common],
                            help="mesh-refinement study with Richardson "
                                 "extrapolation")
    p_conv.set_defaults(func=cmd_converge)

    p_verify = sub.add_parser("verify", parents=[common],
                              help="run the acceptance checks")
    p_verify.add_argument("--fidelity", choices=("quick", "full"),
                          default="quick")
    p_verify.add_argument("--check", action="append", dest="checks",
                          choices=CHECK_NAMES,
                          help="run only the named check (repeatable)")
    p_verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except AnalysisError as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return 4
    except (ValueError, KeyError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
