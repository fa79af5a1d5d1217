"""Boundary interaction profiles.

A profile sigma(y) describes the strength of the contact interaction a
particle feels at the moment it touches the wall, as a function of the
other particle's position y.  Positive values are attractive, negative
values repulsive.  Profiles enter the discrete operator only through
point evaluation on the boundary lattice, and enter the analysis layer
through their sup norm, their integral over [0, inf), and the weighted
integral behind the ground-state energy sandwich

    -2*s**2  <=  E  <=  -2*s**2 + 8*s**2 * I,
    I = integral_0^inf (s - sigma(y)) * exp(-2*s*y) dy,   s = sup|sigma|.

Closed forms are used wherever the kind admits them; adaptive Simpson
quadrature (absolute tolerance 1e-10) is the general fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

QUAD_ABS_TOL = 1e-10
# exp(-2*s*y) tail beyond y = 40/s is below 4e-18 of the total mass
TAIL_DECADES = 40.0


def _adaptive_simpson(f, a: float, b: float, tol: float = QUAD_ABS_TOL,
                      max_intervals: int = 1_000_000) -> float:
    """Adaptive Simpson rule with absolute tolerance on [a, b]."""
    if b <= a:
        return 0.0

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = simpson(a, b, fa, fm, fb)
    # stack of (a, m, b, fa, fm, fb, S, tol)
    stack = [(a, m, b, fa, fm, fb, whole, tol)]
    total = 0.0
    used = 1
    while stack:
        x0, x1, x2, f0, f1, f2, s, t = stack.pop()
        lm = 0.5 * (x0 + x1)
        rm = 0.5 * (x1 + x2)
        flm, frm = f(lm), f(rm)
        left = simpson(x0, x1, f0, flm, f1)
        right = simpson(x1, x2, f1, frm, f2)
        err = left + right - s
        if abs(err) <= 15.0 * t or used >= max_intervals:
            total += left + right + err / 15.0
            continue
        used += 2
        stack.append((x0, lm, x1, f0, flm, f1, left, 0.5 * t))
        stack.append((x1, rm, x2, f1, frm, f2, right, 0.5 * t))
    return total


@dataclass(frozen=True)
class SigmaProfile:
    """Common interface for boundary profiles.

    Subclasses fix the functional form; ``support_limit`` is the right
    end of the domain of definition (``math.inf`` for the half-line).
    """

    support_limit: float = math.inf

    kind = "abstract"

    def _check_y(self, y) -> np.ndarray:
        arr = np.asarray(y, dtype=float)
        if np.any(arr < 0.0) or np.any(arr >= self.support_limit):
            raise ValueError(
                f"evaluation point outside [0, {self.support_limit}): "
                f"y range [{arr.min()}, {arr.max()}]")
        return arr

    def evaluate(self, y: float) -> float:
        return float(self.evaluate_array(np.asarray([y]))[0])

    def evaluate_array(self, y) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, y: float) -> float:
        return self.evaluate(y)

    def sup_norm(self) -> float:
        raise NotImplementedError

    def integral(self) -> float:
        """Integral over [0, inf); only defined for integrable profiles."""
        raise ValueError(f"profile kind {self.kind!r} is not integrable "
                         "over the half-line")

    def scaled(self, t: float) -> "SigmaProfile":
        raise NotImplementedError

    def describe(self) -> str:
        return self.kind


@dataclass(frozen=True)
class ConstantProfile(SigmaProfile):
    """sigma(y) = value on the whole support."""

    value: float = 0.0

    kind = "constant"

    def evaluate_array(self, y) -> np.ndarray:
        arr = self._check_y(y)
        return np.full_like(arr, self.value)

    def sup_norm(self) -> float:
        return abs(self.value)

    def scaled(self, t: float) -> "ConstantProfile":
        return ConstantProfile(value=t * self.value,
                               support_limit=self.support_limit)

    def describe(self) -> str:
        return f"constant({self.value:g})"


@dataclass(frozen=True)
class ExponentialProfile(SigmaProfile):
    """sigma(y) = amplitude * exp(-rate * y).

    On infinite support the rate must be positive, so that the profile
    is bounded and integrable.
    """

    amplitude: float = 1.0
    rate: float = 1.0

    kind = "exponential"

    def __post_init__(self):
        if math.isinf(self.support_limit) and self.rate <= 0.0:
            raise ValueError("exponential profile on [0, inf) requires "
                             f"rate > 0, got {self.rate}")

    def evaluate_array(self, y) -> np.ndarray:
        arr = self._check_y(y)
        return self.amplitude * np.exp(-self.rate * arr)

    def sup_norm(self) -> float:
        a = abs(self.amplitude)
        if self.rate >= 0.0:
            return a
        return a * math.exp(-self.rate * self.support_limit)

    def integral(self) -> float:
        if not math.isinf(self.support_limit):
            raise ValueError("integral is defined for profiles on [0, inf)")
        return self.amplitude / self.rate

    def scaled(self, t: float) -> "ExponentialProfile":
        return ExponentialProfile(amplitude=t * self.amplitude,
                                  rate=self.rate,
                                  support_limit=self.support_limit)

    def describe(self) -> str:
        return f"exponential(a={self.amplitude:g}, rate={self.rate:g})"


@dataclass(frozen=True)
class PiecewiseConstantProfile(SigmaProfile):
    """Right-continuous step function.

    ``values[m]`` holds on [breakpoints[m-1], breakpoints[m]); the last
    value extends to the support limit.  A breakpoint y belongs to the
    piece on its right.
    """

    breakpoints: tuple[float, ...] = ()
    values: tuple[float, ...] = (0.0,)

    kind = "piecewise_constant"

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if len(vals) != len(bp) + 1:
            raise ValueError("need exactly one more value than breakpoints: "
                             f"{len(vals)} values, {len(bp)} breakpoints")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if bp and (bp[0] <= 0.0 or bp[-1] >= self.support_limit):
            raise ValueError("breakpoints must lie strictly inside "
                             f"(0, {self.support_limit})")

    def evaluate_array(self, y) -> np.ndarray:
        arr = self._check_y(y)
        idx = np.searchsorted(np.asarray(self.breakpoints), arr, side="right")
        return np.asarray(self.values, dtype=float)[idx]

    def sup_norm(self) -> float:
        return max(abs(v) for v in self.values)

    def integral(self) -> float:
        if not math.isinf(self.support_limit):
            raise ValueError("integral is defined for profiles on [0, inf)")
        if self.values[-1] != 0.0:
            raise ValueError("piecewise profile is integrable only when the "
                             f"final value is 0, got {self.values[-1]}")
        edges = (0.0,) + self.breakpoints
        return sum(v * (b - a)
                   for v, a, b in zip(self.values, edges, edges[1:]))

    def scaled(self, t: float) -> "PiecewiseConstantProfile":
        return PiecewiseConstantProfile(
            breakpoints=self.breakpoints,
            values=tuple(t * v for v in self.values),
            support_limit=self.support_limit)

    def describe(self) -> str:
        return (f"piecewise_constant({len(self.values)} pieces, "
                f"sup={self.sup_norm():g})")


@dataclass(frozen=True)
class TabulatedProfile(SigmaProfile):
    """Samples on a uniform grid over [0, span], linear interpolation.

    The support limit is the tabulation span; the sup norm is taken over
    the samples and is therefore approximate for data that oscillates
    between nodes.
    """

    samples: tuple[float, ...] = (0.0, 0.0)
    span: float = 1.0

    kind = "tabulated"

    def __post_init__(self):
        vals = tuple(float(v) for v in self.samples)
        object.__setattr__(self, "samples", vals)
        if len(vals) < 2:
            raise ValueError("tabulated profile needs at least 2 samples")
        if not (self.span > 0.0 and math.isfinite(self.span)):
            raise ValueError(f"span must be positive and finite: {self.span}")
        object.__setattr__(self, "support_limit", float(self.span))

    def evaluate_array(self, y) -> np.ndarray:
        arr = self._check_y(y)
        grid = np.linspace(0.0, self.span, len(self.samples))
        return np.interp(arr, grid, np.asarray(self.samples))

    def sup_norm(self) -> float:
        return max(abs(v) for v in self.samples)

    def scaled(self, t: float) -> "TabulatedProfile":
        return TabulatedProfile(samples=tuple(t * v for v in self.samples),
                                span=self.span)

    def describe(self) -> str:
        return f"tabulated({len(self.samples)} samples on [0, {self.span:g}])"


def integral_by_quadrature(profile: SigmaProfile) -> float:
    """Half-line integral of an integrable profile by adaptive Simpson.

    Cross-checks the closed forms; truncates exponential tails where
    they are below the quadrature tolerance.
    """
    if not math.isinf(profile.support_limit):
        raise ValueError("integral is defined for profiles on [0, inf)")
    if isinstance(profile, ExponentialProfile):
        y_max = TAIL_DECADES / profile.rate
        return _adaptive_simpson(lambda y: profile.evaluate(y), 0.0, y_max)
    if isinstance(profile, PiecewiseConstantProfile):
        if profile.values[-1] != 0.0:
            raise ValueError("piecewise profile is integrable only when the "
                             "final value is 0")
        edges = (0.0,) + profile.breakpoints
        total = 0.0
        for a, b in zip(edges, edges[1:]):
            total += _adaptive_simpson(lambda y: profile.evaluate(y), a, b)
        return total
    raise ValueError(f"no quadrature route for kind {profile.kind!r}")


def _sandwich_integral(profile: SigmaProfile, s: float) -> float:
    """integral_0^inf (s - sigma(y)) exp(-2 s y) dy, s = sup norm."""
    if isinstance(profile, ConstantProfile):
        # sigma == s everywhere when the value is positive; in general
        # (s - c) * 1/(2 s)
        return (s - profile.value) / (2.0 * s)
    if isinstance(profile, ExponentialProfile):
        # s/(2s) - a/(2s + rate)
        return 0.5 - profile.amplitude / (2.0 * s + profile.rate)
    if isinstance(profile, PiecewiseConstantProfile):
        edges = (0.0,) + profile.breakpoints + (math.inf,)
        total = 0.0
        for v, a, b in zip(profile.values, edges, edges[1:]):
            ea = math.exp(-2.0 * s * a)
            eb = 0.0 if math.isinf(b) else math.exp(-2.0 * s * b)
            total += (s - v) * (ea - eb) / (2.0 * s)
        return total
    return sandwich_integral_by_quadrature(profile, s)


def sandwich_integral_by_quadrature(profile: SigmaProfile, s: float) -> float:
    y_max = TAIL_DECADES / s
    if not math.isinf(profile.support_limit):
        raise ValueError("sandwich integral requires support on [0, inf)")

    def g(y):
        return (s - profile.evaluate(y)) * math.exp(-2.0 * s * y)

    if isinstance(profile, PiecewiseConstantProfile):
        # integrate cell by cell so the jumps fall on panel boundaries
        edges = [0.0] + [b for b in profile.breakpoints if b < y_max] + [y_max]
        return sum(_adaptive_simpson(g, a, b)
                   for a, b in zip(edges, edges[1:]))
    return _adaptive_simpson(g, 0.0, y_max)


def ground_energy_bounds(profile: SigmaProfile) -> tuple[float, float]:
    """Two-sided bounds on the ground-state energy for the quarter-plane.

    Requires a profile defined on [0, inf) with positive sup norm. The
    lower bound is -2*s**2; the upper bound adds 8*s**2 times the
    weighted deficit integral, so the two coincide exactly for constant
    attractive profiles.
    """
    if not math.isinf(profile.support_limit):
        raise ValueError("bounds require a profile defined on [0, inf)")
    s = profile.sup_norm()
    if s <= 0.0:
        raise ValueError("bounds require a nonzero profile")
    lower = -2.0 * s * s
    upper = lower + 8.0 * s * s * _sandwich_integral(profile, s)
    return lower, upper


def profile_from_config(cfg: dict, support_limit: float = math.inf) -> SigmaProfile:
    """Build a profile from a tagged JSON object, e.g.

        {"kind": "constant", "value": -1.5}
        {"kind": "exponential", "amplitude": 1.0, "rate": 1.0}
    """
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ValueError("profile config must be an object with a 'kind' tag")
    kind = cfg["kind"]
    rest = {k: v for k, v in cfg.items() if k != "kind"}
    try:
        if kind == "constant":
            return ConstantProfile(value=float(rest.pop("value")),
                                   support_limit=rest.pop("support_limit",
                                                          support_limit),
                                   **rest)
        if kind == "exponential":
            return ExponentialProfile(amplitude=float(rest.pop("amplitude")),
                                      rate=float(rest.pop("rate")),
                                      support_limit=rest.pop("support_limit",
                                                             support_limit),
                                      **rest)
        if kind == "piecewise_constant":
            return PiecewiseConstantProfile(
                breakpoints=tuple(rest.pop("breakpoints")),
                values=tuple(rest.pop("values")),
                support_limit=rest.pop("support_limit", support_limit),
                **rest)
        if kind == "tabulated":
            return TabulatedProfile(samples=tuple(rest.pop("samples")),
                                    span=float(rest.pop("span")),
                                    **rest)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"bad profile config for kind {kind!r}: {exc}") from exc
    raise ValueError(f"unknown profile kind {kind!r}")
