"""End-to-end acceptance checks for the spectral claims of the solver.

Each check drives the public pipeline (grid, assembly, eigensolve,
classification) on a configuration whose answer is pinned by a closed
form or by an independent oracle, and reports pass or fail together
with the measured numbers.  The checks cover: the essential-spectrum
threshold formula, the constant-coupling ground energy on the quadrant,
the two-sided ground-energy bound for decaying coupling, existence of a
geometry-induced bound state at zero coupling, monotone persistence
under attraction, destruction of the discrete spectrum under strong
repulsion, dense-versus-iterative solver agreement, structural matrix
invariants, and mesh-convergence order.

Two fidelities share the same logic: "quick" keeps every run at laptop
scale, "full" runs the meshes the stated tolerances refer to.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .analysis import (ConvergenceInfo, _map_jobs,
                       check_ground_energy_sandwich, extrapolate,
                       prolong_solution, run_classified, solve_lowest,
                       sweep_critical_sigma)
from .assembly import assemble
from .domain import DomainSpec, build_grid, count_unknowns, threshold
from .eigen import EigenConfig, solve_dense, solve_halfline_1d, solve_iterative
from .sigma import ConstantProfile, ExponentialProfile, ground_energy_bounds


@dataclass(frozen=True)
class CheckResult:
    """One acceptance check: verdict plus the numbers behind it."""

    name: str
    claim: str
    passed: bool
    seconds: float
    details: str

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"[{tag}] {self.name} ({self.seconds:.1f}s) "
                f"{self.claim} :: {self.details}")

    def as_dict(self) -> dict:
        return {"name": self.name, "claim": self.claim,
                "passed": self.passed, "seconds": self.seconds,
                "details": self.details}


def agrees_to_digits(a: float, b: float, digits: int) -> bool:
    """Whether a and b agree to the first `digits` significant digits.

    Measured as |a - b| <= half a unit in the last kept decimal place
    of the larger magnitude.
    """
    scale = max(abs(a), abs(b))
    if scale == 0.0:
        return True
    exponent = math.floor(math.log10(scale))
    return abs(a - b) <= 0.5 * 10.0 ** (exponent - digits + 1)


def _all_converged(runs) -> bool:
    return all(r.all_converged for r in runs)


# per-check parameters at the two fidelities; same logic either way.
# L ladders for the box-artifact drift start at 12: the artifact sees an
# effective box shortened by the corner region, which pushes the L=6
# drift ratio outside the asymptotic window.  Classification runs use
# base L = 12 for the same reason: the L = 6 truncation error exceeds
# the stability gate at tol 1e-9.
PARAMS = {
    "quick": {
        "threshold-formula": dict(k=12, L_seq=(12.0, 24.0, 48.0), nev=3),
        "constant-coupling-ground-energy": dict(
            L=30.0, h_values=(0.4, 0.2, 0.1), tols=(1e-9, 1e-8, 1e-7)),
        "decaying-coupling-sandwich": dict(
            h_stab=0.25, L_stab=12.0, L_ext=16.0,
            h_values=(0.4, 0.2, 0.1), tols=(1e-9, 1e-8, 1e-7)),
        "geometry-bound-state": dict(
            ladder_k=(8, 16, 32, 64), ladder_L=6.0, classify_k=16,
            classify_L=12.0),
        "attraction-persistence": dict(k=12, L=12.0),
        "repulsion-destruction": dict(k=8, tol_sigma=0.02, spot_L=16.0,
                                      spot_k=16),
        "solver-cross-agreement": dict(n_configs=10, seed=20260822),
        "structural-invariants": dict(),
        "convergence-order": dict(
            smooth_L=20.0, smooth_h=(0.4, 0.2, 0.1),
            smooth_tols=(1e-9, 1e-8, 1e-7),
            corner_k=(8, 16, 32), corner_L=6.0, order_min_smooth=1.85),
    },
    "full": {
        "threshold-formula": dict(k=16, L_seq=(12.0, 24.0, 48.0), nev=3),
        "constant-coupling-ground-energy": dict(
            L=40.0, h_values=(0.2, 0.1, 0.05), tols=(1e-9, 1e-7, 1e-6)),
        "decaying-coupling-sandwich": dict(
            h_stab=0.125, L_stab=12.0, L_ext=24.0,
            h_values=(0.2, 0.1, 0.05), tols=(1e-9, 1e-7, 1e-6)),
        "geometry-bound-state": dict(
            ladder_k=(8, 16, 32, 64), ladder_L=6.0, classify_k=32,
            classify_L=12.0),
        "attraction-persistence": dict(k=16, L=12.0),
        "repulsion-destruction": dict(k=16, tol_sigma=0.01, spot_L=16.0,
                                      spot_k=16),
        "solver-cross-agreement": dict(n_configs=10, seed=20260822),
        "structural-invariants": dict(),
        "convergence-order": dict(
            smooth_L=20.0, smooth_h=(0.2, 0.1, 0.05),
            smooth_tols=(1e-9, 1e-7, 1e-6),
            corner_k=(16, 32, 64), corner_L=6.0, order_min_smooth=1.9),
    },
}


def _ladder_runs(specs, prof, tols, max_iter=4000):
    """Solve a nested refinement sequence of specs in order.

    Each level is seeded with the prolongated solution of the previous
    one, which cuts the iteration count where the grids are largest.
    Inherently sequential, so thread fan-out does not apply here.
    """
    runs = []
    geo_prev = x0 = None
    for spec, tol in zip(specs, tols):
        geo = build_grid(spec)
        op = assemble(geo, prof)
        guess = (prolong_solution(x0, geo_prev, geo)
                 if x0 is not None else None)
        cfg = EigenConfig(nev=1, block_extra=2, tol=tol, max_iter=max_iter)
        pairs = solve_iterative(op, cfg, x0=guess)
        runs.append(pairs)
        x0 = pairs.vectors[:, :1]
        geo_prev = geo
    return runs


def _check_threshold_formula(par: dict, threads: int) -> tuple[bool, str]:
    for d in (0.5, 1.0, 2.0, math.pi):
        if threshold(d) * (2.0 * d * d) / math.pi ** 2 != 1.0:
            return False, f"threshold identity not exact at d = {d}"
    if threshold(math.inf) != 0.0:
        return False, "threshold at d = inf is not zero"

    # zero coupling on the d = 1 strip: everything above pi^2/2 is a
    # box artifact whose distance to the threshold shrinks like 1/L^2,
    # so consecutive L-doubling drifts should shrink by about 4
    zero = ConstantProfile(value=0.0)
    cfg = EigenConfig(nev=par["nev"], tol=1e-9)
    jobs = [lambda L=L: solve_lowest(DomainSpec.finite(1.0, par["k"], L),
                                     zero, cfg)[1]
            for L in par["L_seq"]]
    runs = _map_jobs(jobs, threads)
    if not _all_converged(runs):
        return False, "eigensolves did not converge"
    thr = threshold(1.0)
    above = [float(r.values[1]) for r in runs]
    if min(above) < thr:
        return False, (f"second eigenvalue dipped below the threshold: "
                       f"{above} vs {thr:.6f}")
    ratio = (above[0] - above[1]) / (above[1] - above[2])
    ok = 3.0 <= ratio <= 5.0
    return ok, (f"exact for d in {{0.5, 1, 2, pi}}; artifact drift ratio "
                f"{ratio:.3f} under L doubling (required within [3, 5])")


def _check_constant_quadrant(par: dict, threads: int) -> tuple[bool, str]:
    prof = ConstantProfile(value=1.0)
    L, hs = par["L"], par["h_values"]
    runs = _ladder_runs([DomainSpec.infinite(h, L) for h in hs], prof,
                        par["tols"])
    if not _all_converged(runs):
        return False, "eigensolves did not converge"
    lam = [float(r.values[0]) for r in runs]

    # the quadrant problem with constant coupling separates; per mesh it
    # must reproduce twice the half-line value up to solver tolerance
    oracle = [2.0 * solve_halfline_1d(1.0, L, round(L / h)) for h in hs]
    offset = max(abs(a - b) / abs(b) for a, b in zip(lam, oracle))

    limit, order = extrapolate(zip(hs, lam))
    rel_err = abs(limit - (-2.0)) / 2.0
    ok = rel_err <= 0.01 and offset <= 0.005
    return ok, (f"extrapolated ground energy {limit:.8f} vs -2 "
                f"(rel err {rel_err:.2e}, allowed 1e-2); order {order:.3f}; "
                f"offset from twice the half-line oracle {offset:.2e} "
                f"(allowed 5e-3)")


def _check_sandwich(par: dict, threads: int) -> tuple[bool, str]:
    prof = ExponentialProfile(amplitude=1.0, rate=1.0)
    lower, upper = ground_energy_bounds(prof)
    # unit-exponential coupling: bounds land at -2 and -2/3 exactly
    if abs(lower + 2.0) > 1e-12 or abs(upper + 2.0 / 3.0) > 1e-12:
        return False, f"closed-form bounds off: ({lower}, {upper})"

    cfg = EigenConfig(nev=1, tol=1e-9, max_iter=3000)
    stab = DomainSpec.infinite(par["h_stab"], par["L_stab"])
    result, _ = run_classified(stab, prof, cfg, method="iterative",
                               threads=threads)
    if not result.discrete:
        return False, "no L-stable eigenvalue found on the quadrant"

    L, hs = par["L_ext"], par["h_values"]
    runs = _ladder_runs([DomainSpec.infinite(h, L) for h in hs], prof,
                        par["tols"])
    if not _all_converged(runs):
        return False, "eigensolves did not converge"
    lam = [float(r.values[0]) for r in runs]
    limit, order = extrapolate(zip(hs, lam))
    conv = ConvergenceInfo(h_values=tuple(hs), lambda_values=tuple(lam),
                           extrapolated=limit, observed_order=order,
                           error_estimate=abs(limit - lam[-1]))
    report = check_ground_energy_sandwich(prof, result.with_convergence(conv))
    if report.failure is not None:
        return False, report.failure
    ok = (report.hypothesis_holds and report.negative_eigenvalue_found
          and bool(report.within_bounds))
    return ok, (f"integral {report.integral_value:.6f} > 0; ground energy "
                f"{report.ground_energy:.6f} inside [{lower:.6f}, "
                f"{upper:.6f}] with eps {report.error_estimate:.2e}; "
                f"order {order:.2f}")


def _check_geometry_bound_state(par: dict, threads: int) -> tuple[bool, str]:
    zero = ConstantProfile(value=0.0)
    cfg = EigenConfig(nev=1, tol=1e-9)

    # the eigenvalue sits below threshold but converges only at the
    # corner-limited rate ~ h^(4/3), so the raw value moves in the 4th
    # digit under a single h halving; mesh stability is judged on the
    # extrapolated limits of two overlapping refinement triples instead
    ks, Lk = par["ladder_k"], par["ladder_L"]
    runs = _ladder_runs([DomainSpec.finite(1.0, k, Lk) for k in ks], zero,
                        (1e-9,) * len(ks))
    if not _all_converged(runs):
        return False, "mesh-ladder eigensolves did not converge"
    lam_k = [float(r.values[0]) for r in runs]
    lim_lo, _ = extrapolate([(1.0 / k, v) for k, v in zip(ks[:-1], lam_k[:-1])])
    lim_hi, _ = extrapolate([(1.0 / k, v) for k, v in zip(ks[1:], lam_k[1:])])
    if not agrees_to_digits(lim_lo, lim_hi, 4):
        return False, (f"not 4-digit stable in h: extrapolated "
                       f"{lim_lo:.8f} from k {ks[:-1]} vs {lim_hi:.8f} "
                       f"from k {ks[1:]}")

    kc, Lc = par["classify_k"], par["classify_L"]
    spec = DomainSpec.finite(1.0, kc, Lc)
    result, _ = run_classified(spec, zero, cfg, method="iterative",
                               threads=threads)
    if not result.discrete:
        return False, "no discrete eigenvalue below the threshold"
    d0 = min(result.discrete, key=lambda e: e.value)
    thr = threshold(1.0)
    if not 0.0 <= d0.value < thr:
        return False, f"bound state {d0.value:.7f} outside [0, {thr:.7f})"

    short = solve_lowest(DomainSpec.finite(1.0, kc, Lk), zero, cfg,
                         method="iterative")[1]
    if not short.converged[0]:
        return False, "short-box eigensolve did not converge"
    v_short = float(short.values[0])
    if not agrees_to_digits(v_short, d0.value_coarse, 4):
        return False, (f"not 4-digit stable in L: {v_short:.8f} at L={Lk:g} "
                       f"vs {d0.value_coarse:.8f} at L={Lc:g}")
    return True, (f"bound state {d0.value:.7f} in [0, {thr:.7f}), 4-digit "
                  f"stable (L {Lk:g} -> {Lc:g}: {v_short:.7f} -> "
                  f"{d0.value_coarse:.7f}; extrapolated in h: {lim_lo:.7f} "
                  f"-> {lim_hi:.7f})")


def _check_attraction(par: dict, threads: int) -> tuple[bool, str]:
    cfg = EigenConfig(nev=1, tol=1e-9)
    spec = DomainSpec.finite(1.0, par["k"], par["L"])
    strengths = (0.0, 0.5, 1.0, 2.0)
    jobs = [lambda s=s: run_classified(spec, ConstantProfile(value=s),
                                       cfg, method="auto")[0]
            for s in strengths]
    results = _map_jobs(jobs, threads)
    grounds = []
    for s, res in zip(strengths, results):
        if not res.discrete:
            return False, f"empty discrete spectrum at coupling {s}"
        grounds.append(res.ground_energy)
    pairs = list(zip(grounds, grounds[1:]))
    ok = all(b < a for a, b in pairs)
    listing = ", ".join(f"sigma={s:g}: {g:.6f}"
                        for s, g in zip(strengths, grounds))
    verdict = "strictly decreasing" if ok else "NOT strictly decreasing"
    return ok, f"{listing} ({verdict})"


def _check_repulsion(par: dict, threads: int) -> tuple[bool, str]:
    cfg = EigenConfig(nev=1, tol=1e-9)
    base = DomainSpec.finite(1.0, par["k"], 6.0)
    sweep = sweep_critical_sigma(base, (-10.0, 0.0), par["tol_sigma"],
                                 cfg=cfg, threads=threads)
    s_star = sweep.critical_sigma
    if not -10.0 < s_star < 0.0:
        return False, f"critical coupling {s_star} outside (-10, 0)"

    fine = base.refined()
    sweep_fine = sweep_critical_sigma(fine, (-10.0, 0.0), par["tol_sigma"],
                                      cfg=cfg, threads=threads)
    if not agrees_to_digits(s_star, sweep_fine.critical_sigma, 2):
        return False, (f"critical coupling not 2-digit stable under h "
                       f"halving: {s_star:.4f} vs "
                       f"{sweep_fine.critical_sigma:.4f}")

    # existence spot checks run on a longer box so that the L-drift of a
    # genuinely bound state clears the classification stability gate
    spot = DomainSpec.finite(base.d, par["spot_k"], par["spot_L"])
    below, _ = run_classified(spot, ConstantProfile(value=s_star - 1.0),
                              cfg, method="auto", threads=threads)
    above, _ = run_classified(spot, ConstantProfile(value=0.5 * s_star),
                              cfg, method="auto", threads=threads)
    if below.discrete:
        return False, (f"discrete spectrum not empty at coupling "
                       f"{s_star - 1.0:.4f}")
    if not above.discrete:
        return False, f"discrete spectrum empty at coupling {0.5 * s_star:.4f}"
    return True, (f"critical coupling {s_star:.4f} (h halved: "
                  f"{sweep_fine.critical_sigma:.4f}); spectrum empty at "
                  f"{s_star - 1.0:.3f}, nonempty at {0.5 * s_star:.3f}")


def _check_cross_agreement(par: dict, threads: int) -> tuple[bool, str]:
    rng = np.random.default_rng(par["seed"])
    configs = []
    while len(configs) < par["n_configs"]:
        if len(configs) % 5 == 4:
            # sprinkle in truncated-quadrant grids
            n_side = int(rng.integers(20, 44))
            h = float(rng.choice((0.125, 0.25, 0.5)))
            spec = DomainSpec.infinite(h, n_side * h)
        else:
            d = float(rng.uniform(0.6, 2.2))
            k = int(rng.integers(5, 13))
            mult = int(rng.integers(2, 6))
            spec = DomainSpec.finite(d, k, mult * d)
        s0 = float(rng.uniform(-3.0, 3.0))
        if count_unknowns(spec) > 2000:
            continue
        configs.append((spec, s0))

    def compare(spec: DomainSpec, s0: float) -> tuple[float, float]:
        op = assemble(build_grid(spec), ConstantProfile(value=s0))
        dense = solve_dense(op)
        it = solve_iterative(op, EigenConfig(nev=5, block_extra=5, tol=1e-10,
                                             max_iter=5000, seed=271828))
        if not it.all_converged:
            raise RuntimeError(f"iterative solve stalled on {spec.describe()}"
                               f" with coupling {s0:.3f}")
        dv, iv = dense.values[:5], it.values[:5]
        scale = float(np.min(np.abs(dv)))
        rel = float(np.max(np.abs(dv - iv) / np.abs(dv)))
        return rel, scale

    outcomes = _map_jobs([lambda c=c: compare(*c) for c in configs], threads)
    worst = max(r for r, _ in outcomes)
    smallest = min(s for _, s in outcomes)
    ok = worst <= 1e-8
    return ok, (f"10 random configurations, worst relative disagreement "
                f"{worst:.2e} on the lowest 5 (allowed 1e-8); smallest "
                f"eigenvalue magnitude {smallest:.3f}")


def _check_structural(par: dict, threads: int) -> tuple[bool, str]:
    cases = [
        (DomainSpec.finite(1.0, 8, 4.0), ConstantProfile(value=0.75)),
        (DomainSpec.finite(0.7, 9, 3.5),
         ExponentialProfile(amplitude=-0.8, rate=1.3)),
        (DomainSpec.infinite(0.25, 6.0),
         ExponentialProfile(amplitude=1.2, rate=0.9)),
    ]
    for spec, prof in cases:
        op = assemble(build_grid(spec), prof)
        asym = (op.A - op.A.T).tocoo()
        if asym.nnz and np.max(np.abs(asym.data)) != 0.0:
            return False, f"A not exactly symmetric on {spec.describe()}"
        perm = op.geometry.mirror_permutation()
        swapped = op.A[perm][:, perm]
        diff = (swapped - op.A).tocoo()
        if diff.nnz and np.max(np.abs(diff.data)) != 0.0:
            return False, (f"A not exactly swap invariant on "
                           f"{spec.describe()}")
        if not np.array_equal(op.B[perm], op.B):
            return False, f"B not swap invariant on {spec.describe()}"

    op0 = assemble(build_grid(DomainSpec.finite(1.0, 10, 4.0)),
                   ConstantProfile(value=0.0))
    dense0 = solve_dense(op0)
    lam_min = float(dense0.values[0])
    if lam_min < -1e-12:
        return False, f"zero-coupling operator has lambda_min = {lam_min}"
    ground = dense0.vectors[:, 0]
    floor = float(np.min(ground)) / float(np.max(np.abs(ground)))
    if floor < -1e-11:
        return False, f"ground vector changes sign (min/max = {floor:.2e})"

    op1 = assemble(build_grid(DomainSpec.finite(1.0, 16, 6.0)),
                   ConstantProfile(value=0.5))
    tol = 1e-9
    seeds = (42, 20260822)
    sols = _map_jobs([lambda s=s: solve_iterative(
        op1, EigenConfig(nev=3, tol=tol, seed=s)) for s in seeds], threads)
    if not _all_converged(sols):
        return False, "seed-invariance eigensolves did not converge"
    dv = np.abs(sols[0].values - sols[1].values)
    gate = 10.0 * tol * np.maximum(1.0, np.abs(sols[0].values))
    if np.any(dv > gate):
        return False, f"seed dependence {np.max(dv):.2e} beyond 10*tol"
    return True, (f"exact symmetry and swap invariance on 3 grids; "
                  f"zero-coupling lambda_min {lam_min:.2e} >= -1e-12; "
                  f"single-signed ground vector (dip {floor:.1e}); "
                  f"seed drift {np.max(dv):.1e} within 10*tol")


def _check_convergence_order(par: dict, threads: int) -> tuple[bool, str]:
    prof = ConstantProfile(value=1.0)
    L, hs = par["smooth_L"], par["smooth_h"]
    runs = _ladder_runs([DomainSpec.infinite(h, L) for h in hs], prof,
                        par["smooth_tols"])
    if not _all_converged(runs):
        return False, "smooth-case eigensolves did not converge"
    _, p_smooth = extrapolate(zip(hs, (float(r.values[0]) for r in runs)))

    zero = ConstantProfile(value=0.0)
    ks, Lc = par["corner_k"], par["corner_L"]
    runs = _ladder_runs([DomainSpec.finite(1.0, k, Lc) for k in ks], zero,
                        (1e-9,) * len(ks))
    if not _all_converged(runs):
        return False, "corner-case eigensolves did not converge"
    pts = [(1.0 / k, float(r.values[0])) for k, r in zip(ks, runs)]
    _, p_corner = extrapolate(pts)

    p_min = par["order_min_smooth"]
    ok = p_smooth >= p_min and p_corner >= 1.0
    return ok, (f"smooth constant-coupling order {p_smooth:.3f} "
                f"(required >= {p_min}); corner-singular order "
                f"{p_corner:.3f} (required >= 1.0)")


_CHECKS = (
    ("threshold-formula",
     "essential spectrum starts at pi^2/(2 d^2); box artifacts drift "
     "like 1/L^2",
     _check_threshold_formula),
    ("constant-coupling-ground-energy",
     "constant coupling 1 on the quadrant gives ground energy -2, twice "
     "the half-line value",
     _check_constant_quadrant),
    ("decaying-coupling-sandwich",
     "integrable positive coupling binds, with the ground energy inside "
     "the two-sided closed-form bound",
     _check_sandwich),
    ("geometry-bound-state",
     "the finite strip binds at least one state below threshold even at "
     "zero coupling",
     _check_geometry_bound_state),
    ("attraction-persistence",
     "attractive coupling keeps the bound state and lowers the ground "
     "energy monotonically",
     _check_attraction),
    ("repulsion-destruction",
     "strong repulsion empties the discrete spectrum beyond a finite "
     "critical coupling",
     _check_repulsion),
    ("solver-cross-agreement",
     "iterative and dense eigensolvers agree on small grids",
     _check_cross_agreement),
    ("structural-invariants",
     "assembled operators are exactly symmetric, swap invariant, "
     "positive at zero coupling, with sign-definite ground vector and "
     "seed-independent solves",
     _check_structural),
    ("convergence-order",
     "mesh convergence is second order for smooth cases and at least "
     "first order at the re-entrant corner",
     _check_convergence_order),
)

CHECK_NAMES = tuple(name for name, _, _ in _CHECKS)


def run_all(fidelity: str = "full", *, threads: int = 1,
            names=None) -> list[CheckResult]:
    """Run the acceptance checks and return one result per check.

    ``names`` restricts the run to a subset (order preserved); a crash
    inside a check is reported as a failure of that check, never raised.
    """
    if fidelity not in PARAMS:
        raise ValueError(f"fidelity must be one of {sorted(PARAMS)}, "
                         f"got {fidelity!r}")
    if names is not None:
        unknown = set(names) - set(CHECK_NAMES)
        if unknown:
            raise ValueError(f"unknown check names: {sorted(unknown)}")
    table = PARAMS[fidelity]
    results = []
    for name, claim, fn in _CHECKS:
        if names is not None and name not in names:
            continue
        start = time.perf_counter()
        try:
            passed, details = fn(table[name], threads)
        except Exception as exc:
            passed, details = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name=name, claim=claim, passed=passed,
                                   seconds=time.perf_counter() - start,
                                   details=details))
    return results


def format_report(results) -> str:
    lines = [r.line() for r in results]
    n_pass = sum(r.passed for r in results)
    lines.append(f"{n_pass}/{len(results)} checks passed")
    if n_pass != len(results):
        failed = ", ".join(r.name for r in results if not r.passed)
        lines.append(f"failed: {failed}")
    return "\n".join(lines)
