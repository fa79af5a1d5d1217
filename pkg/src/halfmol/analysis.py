"""Spectral analysis on top of the raw eigensolves.

The truncated grid sees two kinds of low eigenvalues: genuine discrete
states of the unbounded problem, which stop moving once the Dirichlet
cut at x + y = L is far enough out, and artifacts of the truncation,
which keep sliding down like 1/L^2 as L grows.  Classification solves
at L and 2L (same mesh width) and accepts an eigenvalue as discrete
only if it lies below the essential-spectrum threshold and its relative
change under the doubling stays below max(1e-6, 10 * solver tol).

The same drift supplies the safety margin for the critical-coupling
sweep, and a three-point Richardson fit in h provides mesh-limit
estimates of the surviving eigenvalues.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from dataclasses import dataclass, field

from .assembly import DiscreteOperator, assemble
from .domain import DomainSpec, build_grid
from .eigen import EigenConfig, EigenPairs, solve_dense, solve_iterative
from .sigma import ConstantProfile, SigmaProfile, ground_energy_bounds

REL_DRIFT_FLOOR = 1e-6
AUTO_DENSE_LIMIT = 1200


class AnalysisError(RuntimeError):
    """An analysis step found its numerical preconditions unmet."""


def stability_gate(tol: float) -> float:
    """Relative drift below which an eigenvalue counts as L-stable."""
    return max(REL_DRIFT_FLOOR, 10.0 * tol)


@dataclass(frozen=True)
class DiscreteEigenvalue:
    """A sub-threshold eigenvalue that survived the L-doubling test."""

    value: float            # at the largest L solved
    value_coarse: float     # at the base L
    drift_rel: float        # worst relative change between consecutive L

    def as_dict(self) -> dict:
        return {"value": self.value, "value_coarse": self.value_coarse,
                "stability_drift": self.drift_rel}


@dataclass(frozen=True)
class ContinuumArtifact:
    """An at-or-above-threshold eigenvalue, expected to drift like 1/L^2."""

    value: float
    drift: float            # value(L) - value(2L), positive when sliding down

    def as_dict(self) -> dict:
        return {"value": self.value, "drift": self.drift}


@dataclass(frozen=True)
class ConvergenceInfo:
    """Richardson summary over a geometric h-sequence."""

    h_values: tuple[float, ...]
    lambda_values: tuple[float, ...]
    extrapolated: float
    observed_order: float
    error_estimate: float

    def __post_init__(self):
        # the fit must land inside the window spanned by the two finest
        # values widened by their difference
        v2, v3 = self.lambda_values[-2], self.lambda_values[-1]
        width = abs(v2 - v3)
        lo = min(v2, v3) - width
        hi = max(v2, v3) + width
        slack = 1e-12 * max(1.0, abs(v3))
        if not (lo - slack <= self.extrapolated <= hi + slack):
            raise AnalysisError(
                f"extrapolated value {self.extrapolated} escapes the bracket "
                f"[{lo}, {hi}] of the two finest mesh values")

    def as_dict(self) -> dict:
        return {"h_values": list(self.h_values),
                "lambda_values": list(self.lambda_values),
                "extrapolated": self.extrapolated,
                "observed_order": self.observed_order,
                "error_estimate": self.error_estimate}


@dataclass(frozen=True)
class SpectralResult:
    """Classified spectrum of one physical configuration."""

    spec: DomainSpec
    profile: str
    threshold: float
    values: tuple[float, ...]
    residuals: tuple[float, ...]
    converged: tuple[bool, ...]
    discrete: tuple[DiscreteEigenvalue, ...]
    artifacts: tuple[ContinuumArtifact, ...]
    unstable: tuple[float, ...]     # below threshold but failed the L test
    refused: tuple[int, ...]        # indices with unconverged input pairs
    ground_energy: float | None
    convergence: ConvergenceInfo | None = None

    def __post_init__(self):
        for dv in self.discrete:
            if not dv.value < self.threshold:
                raise AnalysisError(
                    f"classified discrete eigenvalue {dv.value} is not below "
                    f"the threshold {self.threshold}")

    def with_convergence(self, conv: ConvergenceInfo) -> "SpectralResult":
        return SpectralResult(
            spec=self.spec, profile=self.profile, threshold=self.threshold,
            values=self.values, residuals=self.residuals,
            converged=self.converged, discrete=self.discrete,
            artifacts=self.artifacts, unstable=self.unstable,
            refused=self.refused, ground_energy=self.ground_energy,
            convergence=conv)


def classify(pairs: EigenPairs, spec: DomainSpec,
             stability: list[EigenPairs], *, profile: str = "",
             tol: float = 1e-9) -> SpectralResult:
    """Split computed eigenvalues into discrete states and artifacts.

    ``pairs`` is the solve on ``spec``; ``stability`` holds solves of
    the same mesh at successively doubled truncation lengths (at least
    one).  Indices whose pairs did not converge in any run are refused.
    """
    if not stability:
        raise ValueError("classification needs at least one stability run "
                         "at a doubled truncation length")
    runs = [pairs] + list(stability)
    thr = spec.threshold
    gate = stability_gate(tol)
    n_cmp = min(len(r.values) for r in runs)

    discrete: list[DiscreteEigenvalue] = []
    artifacts: list[ContinuumArtifact] = []
    unstable: list[float] = []
    refused: list[int] = []
    for idx in range(n_cmp):
        if not all(bool(r.converged[idx]) for r in runs):
            refused.append(idx)
            continue
        vals = [float(r.values[idx]) for r in runs]
        drifts = [abs(b - a) / max(abs(a), 1e-12)
                  for a, b in zip(vals, vals[1:])]
        v0, v_fine = vals[0], vals[-1]
        if v0 >= thr:
            artifacts.append(ContinuumArtifact(value=v0,
                                               drift=vals[0] - vals[1]))
        elif max(drifts) < gate:
            discrete.append(DiscreteEigenvalue(value=v_fine,
                                               value_coarse=v0,
                                               drift_rel=max(drifts)))
        else:
            unstable.append(v0)

    ground = min((d.value for d in discrete), default=None)
    return SpectralResult(
        spec=spec, profile=profile, threshold=thr,
        values=tuple(float(v) for v in pairs.values),
        residuals=tuple(float(r) for r in pairs.residuals),
        converged=tuple(bool(c) for c in pairs.converged),
        discrete=tuple(discrete), artifacts=tuple(artifacts),
        unstable=tuple(unstable), refused=tuple(refused),
        ground_energy=ground)


def extrapolate(points) -> tuple[float, float]:
    """Richardson limit and observed order from a geometric h-sequence.

    ``points`` is a sequence of (h, value); the fit lambda(h) =
    lambda0 + C h^p goes through the three finest meshes.  Returns
    (lambda0, p); p = math.inf signals values already constant at the
    plateau.  Raises AnalysisError when the differences do not contract
    monotonically (no asymptotic regime).
    """
    pts = sorted(((float(h), float(v)) for h, v in points),
                 key=lambda t: -t[0])
    if len(pts) < 3:
        raise ValueError(f"need at least 3 mesh sizes, got {len(pts)}")
    (h1, v1), (h2, v2), (h3, v3) = pts[-3:]
    if h1 <= h2 or h2 <= h3 or h3 <= 0.0:
        raise ValueError("mesh sizes must be distinct and positive")
    r1, r2 = h1 / h2, h2 / h3
    if abs(r1 - r2) > 1e-9 * r1:
        raise ValueError(f"mesh sizes are not in geometric ratio: "
                         f"{h1}:{h2}:{h3}")
    f1 = v2 - v1
    f2 = v3 - v2
    if f2 == 0.0:
        # already flat at the finest pair: converged to working precision
        return v3, math.inf
    if f1 == 0.0 or (f1 > 0.0) != (f2 > 0.0) or abs(f2) >= abs(f1):
        raise AnalysisError(
            "no asymptotic regime: mesh differences do not contract "
            f"monotonically ({f1:.3e} then {f2:.3e})")
    q = f2 / f1
    p = -math.log(q) / math.log(r1)
    limit = v3 + f2 * q / (1.0 - q)
    return limit, p


@dataclass(frozen=True)
class SandwichReport:
    """Outcome of the ground-energy sandwich test on the quadrant."""

    profile: str
    integral_value: float
    hypothesis_holds: bool
    lower: float | None
    upper: float | None
    ground_energy: float | None
    error_estimate: float
    negative_eigenvalue_found: bool
    within_bounds: bool | None
    failure: str | None

    @property
    def ok(self) -> bool:
        return self.failure is None

    def as_dict(self) -> dict:
        return {"profile": self.profile,
                "integral": self.integral_value,
                "hypothesis_holds": self.hypothesis_holds,
                "lower": self.lower, "upper": self.upper,
                "ground_energy": self.ground_energy,
                "error_estimate": self.error_estimate,
                "negative_eigenvalue_found": self.negative_eigenvalue_found,
                "within_bounds": self.within_bounds,
                "failure": self.failure}


def check_ground_energy_sandwich(profile: SigmaProfile,
                                 result: SpectralResult) -> SandwichReport:
    """Test the computed quadrant ground energy against its sandwich.

    For an integrable profile with positive half-line integral, a
    negative stable eigenvalue must exist and lie inside the two-sided
    bound, up to the numerical error estimate carried by the result.
    """
    if not result.spec.is_infinite:
        raise ValueError("the sandwich test applies to the quadrant "
                         "(d = inf) only")
    integral = profile.integral()
    hypothesis = integral > 0.0
    s = profile.sup_norm()
    lower = upper = None
    if s > 0.0:
        lower, upper = ground_energy_bounds(profile)

    E = result.ground_energy
    if result.convergence is not None:
        E = result.convergence.extrapolated
        eps = result.convergence.error_estimate
    elif result.discrete:
        d0 = min(result.discrete, key=lambda d: d.value)
        eps = abs(d0.value) * max(d0.drift_rel, 1e-8)
    else:
        eps = 0.0
    eps = max(eps, 1e-8)

    found = E is not None and E < 0.0
    within = None
    failure = None
    if hypothesis:
        if not found:
            failure = ("hypothesis integral > 0 holds but no stable "
                       "negative eigenvalue was found")
        else:
            within = (lower - eps <= E <= upper + eps)
            if not within:
                failure = (f"ground energy {E} escapes the sandwich "
                           f"[{lower}, {upper}] by more than eps = {eps}")
    return SandwichReport(
        profile=profile.describe(), integral_value=integral,
        hypothesis_holds=hypothesis, lower=lower, upper=upper,
        ground_energy=E, error_estimate=eps,
        negative_eigenvalue_found=found, within_bounds=within,
        failure=failure)


def _map_jobs(jobs, threads: int) -> list:
    """Run thunks in order, optionally on a thread pool.

    Results are identical for any pool size: every job is independent
    and the output order is fixed by the input order.
    """
    if threads <= 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]


def prolong_solution(u, coarse, fine):
    """Bilinear transfer of a solution vector to the half-width grid.

    fine must come from the same domain with the mesh width halved, so
    even fine nodes coincide with coarse nodes and odd ones sit midway.
    Padding with zeros beyond the coarse index range matches the
    Dirichlet data on the truncation and separation boundaries.  The
    result is only an initial guess for the refined solve; it carries
    no accuracy claim of its own.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 2:
        cols = [prolong_solution(u[:, c], coarse, fine)
                for c in range(u.shape[1])]
        return np.stack(cols, axis=1)
    pad = int(coarse.nodes.max()) + 2
    U = np.zeros((pad, pad))
    U[coarse.nodes[:, 0], coarse.nodes[:, 1]] = u
    fi = fine.nodes[:, 0]
    fj = fine.nodes[:, 1]
    if fi.max() > 2 * (pad - 2) + 1:
        raise ValueError("fine grid is not the twofold refinement of "
                         "the coarse grid")
    i_lo, i_hi = fi // 2, (fi + 1) // 2
    j_lo, j_hi = fj // 2, (fj + 1) // 2
    return 0.25 * (U[i_lo, j_lo] + U[i_lo, j_hi]
                   + U[i_hi, j_lo] + U[i_hi, j_hi])


def solve_lowest(spec: DomainSpec, profile: SigmaProfile, cfg: EigenConfig,
                 method: str = "auto") -> tuple[DiscreteOperator, EigenPairs]:
    """Assemble and solve one configuration; auto picks dense when small."""
    op = assemble(build_grid(spec), profile)
    if method == "auto":
        method = "dense" if op.dim <= AUTO_DENSE_LIMIT else "iterative"
    if method == "dense":
        pairs = solve_dense(op)
        keep = min(cfg.nev, len(pairs.values))
        pairs = EigenPairs(values=pairs.values[:keep],
                           vectors=pairs.vectors[:, :keep],
                           residuals=pairs.residuals[:keep],
                           converged=pairs.converged[:keep],
                           iterations=pairs.iterations)
    elif method == "iterative":
        pairs = solve_iterative(op, cfg)
    else:
        raise ValueError(f"unknown solve method {method!r}")
    return op, pairs


def run_classified(spec: DomainSpec, profile: SigmaProfile, cfg: EigenConfig,
                   *, method: str = "iterative", doublings: int = 1,
                   threads: int = 1) -> tuple[SpectralResult, list[EigenPairs]]:
    """Solve at L, 2L, ... and classify; the standard solve pipeline."""
    if doublings < 1:
        raise ValueError("classification needs at least one L doubling")
    jobs = []
    for level in range(doublings + 1):
        s = spec.with_L(spec.L * (2 ** level))
        jobs.append(lambda s=s: solve_lowest(s, profile, cfg, method=method)[1])
    runs = _map_jobs(jobs, threads)
    result = classify(runs[0], spec, runs[1:], profile=profile.describe(),
                      tol=cfg.tol)
    return result, runs


@dataclass(frozen=True)
class BisectionStep:
    iteration: int
    s_lo: float
    s_hi: float
    s_eval: float
    lambda_min: float
    threshold: float
    margin: float
    bound_state: bool

    def as_dict(self) -> dict:
        return {"iteration": self.iteration, "s_lo": self.s_lo,
                "s_hi": self.s_hi, "s_eval": self.s_eval,
                "lambda_min": self.lambda_min, "threshold": self.threshold,
                "margin": self.margin, "bound_state": self.bound_state}


@dataclass(frozen=True)
class SweepResult:
    """Bisection record for the critical boundary coupling."""

    spec: DomainSpec
    critical_sigma: float
    bracket_lo: float
    bracket_hi: float
    tol_achieved: float
    history: tuple[BisectionStep, ...]

    def as_dict(self) -> dict:
        return {"critical_sigma": self.critical_sigma,
                "bracket": [self.bracket_lo, self.bracket_hi],
                "tol_achieved": self.tol_achieved,
                "history": [s.as_dict() for s in self.history]}


def sweep_critical_sigma(spec: DomainSpec, bracket: tuple[float, float],
                         tol_sigma: float, *,
                         cfg: EigenConfig | None = None,
                         method: str = "auto", threads: int = 1) -> SweepResult:
    """Bisect the constant coupling at which the bound state disappears.

    The predicate "a bound state exists at strength s" is evaluated as
    lambda_min(2L) < threshold - margin with margin inflated by the
    L-drift of lambda_min, so truncation artifacts cannot masquerade as
    bound states.  The boundary form is monotone in s, hence so is the
    predicate; the bracket must straddle the transition.
    """
    if not math.isfinite(spec.d):
        raise ValueError("the critical-coupling sweep runs on the finite "
                         "strip, not the quadrant")
    s_lo, s_hi = float(bracket[0]), float(bracket[1])
    if not s_lo < s_hi:
        raise ValueError(f"bracket must satisfy lo < hi, got {bracket}")
    if not tol_sigma > 0.0:
        raise ValueError(f"tol_sigma must be positive, got {tol_sigma}")
    cfg = cfg or EigenConfig(nev=1)
    thr = spec.threshold
    history: list[BisectionStep] = []
    step_no = 0

    def bound_state_at(s: float) -> bool:
        nonlocal step_no
        jobs = [lambda L=L: solve_lowest(spec.with_L(L),
                                         ConstantProfile(value=s),
                                         cfg, method=method)[1]
                for L in (spec.L, 2.0 * spec.L)]
        lam = []
        for pairs in _map_jobs(jobs, threads):
            if not pairs.converged[0]:
                raise RuntimeError(
                    f"eigensolve did not converge during the sweep at s={s}")
            lam.append(float(pairs.values[0]))
        margin = max(stability_gate(cfg.tol), abs(lam[0] - lam[1]))
        below = lam[1] < thr - margin
        step_no += 1
        history.append(BisectionStep(
            iteration=step_no, s_lo=s_lo, s_hi=s_hi, s_eval=s,
            lambda_min=lam[1], threshold=thr, margin=margin,
            bound_state=below))
        return below

    if bound_state_at(s_lo):
        raise AnalysisError(
            f"predicate not monotone on the bracket: a bound state already "
            f"exists at the repulsive end s = {s_lo}")
    if not bound_state_at(s_hi):
        raise AnalysisError(
            f"predicate not monotone on the bracket: no bound state at the "
            f"attractive end s = {s_hi}")

    max_steps = int(math.ceil(math.log2((s_hi - s_lo) / tol_sigma))) + 4
    for _ in range(max_steps):
        if s_hi - s_lo <= tol_sigma:
            break
        mid = 0.5 * (s_lo + s_hi)
        if bound_state_at(mid):
            s_hi = mid
        else:
            s_lo = mid

    return SweepResult(spec=spec,
                       critical_sigma=0.5 * (s_lo + s_hi),
                       bracket_lo=s_lo, bracket_hi=s_hi,
                       tol_achieved=s_hi - s_lo,
                       history=tuple(history))
