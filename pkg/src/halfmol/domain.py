"""Computational domain and lattice for the half-line pair problem.

The configuration space of two ordered particles on the half-line, with
their separation confined to [0, d], is the diagonal strip

    Omega = {(x, y) : x >= 0, y >= 0, |x - y| <= d}.

The wavefunction vanishes on the separation walls |x - y| = d (hard
binding) and satisfies a Robin condition with coefficient sigma on the
two axes (contact interaction).  For d = inf the strip opens up into
the whole quadrant.

The lattice places nodes at (i*h, j*h) with h = d/k for finite d, so
the separation walls pass exactly through lattice nodes, and truncates
the strip with a Dirichlet cut at x + y = L.  Unknowns are the nodes
strictly inside the Dirichlet walls; nodes on the Robin axes are
unknowns.  For d = inf the mesh width h is given directly and the
quadrant is truncated to the square [0, L)^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np


def threshold(d: float) -> float:
    """Bottom of the essential spectrum: pi^2 / (2 d^2), or 0 for d = inf."""
    if d <= 0.0:
        raise ValueError(f"separation bound must be positive, got {d}")
    if math.isinf(d):
        return 0.0
    return math.pi ** 2 / (2.0 * d * d)


class NodeClass(IntEnum):
    INTERIOR = 0
    ROBIN_X = 1       # on the x = 0 axis
    ROBIN_Y = 2       # on the y = 0 axis
    ROBIN_CORNER = 3  # the origin, on both axes


@dataclass(frozen=True)
class DomainSpec:
    """Physical domain plus discretization parameters.

    Finite d: pass ``k`` subdivisions of the separation bound (h = d/k).
    Infinite d: pass the mesh width ``h`` directly.  The truncation
    length L must be an integer multiple of h in both cases.
    """

    d: float
    L: float
    k: int | None = None
    h_given: float | None = None

    def __post_init__(self):
        if not self.d > 0.0:
            raise ValueError(f"separation bound must be positive, got {self.d}")
        if not (self.L > 0.0 and math.isfinite(self.L)):
            raise ValueError(f"truncation length must be positive and finite, "
                             f"got {self.L}")
        if math.isinf(self.d):
            if self.h_given is None or self.k is not None:
                raise ValueError("infinite separation bound takes a mesh "
                                 "width h and no subdivision count k")
            if not self.h_given > 0.0:
                raise ValueError(f"mesh width must be positive, got {self.h_given}")
            n = self.L / self.h_given
            if abs(n - round(n)) > 1e-9 * max(1.0, n):
                raise ValueError(f"L = {self.L} is not an integer multiple of "
                                 f"h = {self.h_given}")
            if round(n) < 2:
                raise ValueError("grid needs at least 2 nodes per side")
        else:
            if self.k is None or self.h_given is not None:
                raise ValueError("finite separation bound takes a subdivision "
                                 "count k and no direct mesh width")
            if self.k < 1:
                raise ValueError(f"subdivision count must be >= 1, got {self.k}")
            m = self.L / (self.d / self.k)
            if abs(m - round(m)) > 1e-9 * max(1.0, m):
                raise ValueError(f"L = {self.L} is not an integer multiple of "
                                 f"h = d/k = {self.d / self.k}")
            if round(m) <= self.k:
                raise ValueError(
                    f"truncation inside corner region: L/h = {round(m)} must "
                    f"exceed k = {self.k}")

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.d)

    @property
    def h(self) -> float:
        if self.is_infinite:
            return float(self.h_given)
        return self.d / self.k

    @property
    def M(self) -> int:
        """Truncation index: Dirichlet on i + j = M (finite d only)."""
        if self.is_infinite:
            raise ValueError("M is defined for finite separation bounds")
        return round(self.L / self.h)

    @property
    def n_side(self) -> int:
        """Nodes per side: Dirichlet at i = N or j = N (d = inf only)."""
        if not self.is_infinite:
            raise ValueError("n_side is defined for d = inf")
        return round(self.L / self.h)

    @property
    def threshold(self) -> float:
        return threshold(self.d)

    def with_L(self, L: float) -> "DomainSpec":
        return DomainSpec(d=self.d, L=L, k=self.k, h_given=self.h_given)

    def refined(self, factor: int = 2) -> "DomainSpec":
        """Same physical domain with the mesh width divided by factor."""
        if self.is_infinite:
            return DomainSpec(d=self.d, L=self.L, h_given=self.h_given / factor)
        return DomainSpec(d=self.d, L=self.L, k=self.k * factor)

    @staticmethod
    def finite(d: float, k: int, L: float) -> "DomainSpec":
        return DomainSpec(d=d, L=L, k=k)

    @staticmethod
    def infinite(h: float, L: float) -> "DomainSpec":
        return DomainSpec(d=math.inf, L=L, h_given=h)

    def describe(self) -> str:
        if self.is_infinite:
            return f"quadrant(L={self.L:g}, h={self.h:g})"
        return f"strip(d={self.d:g}, L={self.L:g}, k={self.k}, h={self.h:g})"


def count_unknowns(spec: DomainSpec) -> int:
    """Closed-form unknown count; Theta(k*M) for the strip, N^2 else."""
    if spec.is_infinite:
        return spec.n_side ** 2
    k, M = spec.k, spec.M
    # anti-diagonals s = i + j < M hold min(s + 1, k or k - 1) nodes:
    # s + 1 when s < k, else k - 1 when s - k is even, k when odd
    base = min(k, M)
    total = base * (base + 1) // 2
    if M > k:
        n = M - k
        total += n * k - (n + 1) // 2
    return total


@dataclass(frozen=True, eq=False)
class GridGeometry:
    """Enumerated unknowns of a discretized domain.

    ``nodes`` is an (n, 2) int array of lattice coordinates (i, j) in
    lexicographic order, ``node_class`` the per-node boundary class,
    and ``index_of`` maps lattice coordinates back to contiguous row
    numbers (-1 outside the unknown set).
    """

    spec: DomainSpec
    nodes: np.ndarray
    node_class: np.ndarray
    _lookup: np.ndarray

    @property
    def n_unknowns(self) -> int:
        return self.nodes.shape[0]

    def index_of(self, i: int, j: int) -> int:
        if 0 <= i < self._lookup.shape[0] and 0 <= j < self._lookup.shape[1]:
            idx = int(self._lookup[i, j])
            if idx >= 0:
                return idx
        raise KeyError(f"({i}, {j}) is not an unknown of this grid")

    def mirror_permutation(self) -> np.ndarray:
        """Row permutation implementing the swap (i, j) -> (j, i)."""
        perm = self._lookup[self.nodes[:, 1], self.nodes[:, 0]]
        if np.any(perm < 0):
            raise RuntimeError("grid is not symmetric under the swap")
        return perm.astype(np.int64)


def build_grid(spec: DomainSpec) -> GridGeometry:
    """Enumerate the unknowns of the lattice in lexicographic (i, j) order."""
    if spec.is_infinite:
        N = spec.n_side
        ii, jj = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
        keep = np.ones_like(ii, dtype=bool)
        side = N
    else:
        M, k = spec.M, spec.k
        side = M
        ii, jj = np.meshgrid(np.arange(M), np.arange(M), indexing="ij")
        keep = (np.abs(ii - jj) < k) & (ii + jj < M)
    i_flat = ii[keep]
    j_flat = jj[keep]
    # meshgrid with ij-indexing flattens in lexicographic (i, j) order
    nodes = np.column_stack([i_flat, j_flat]).astype(np.int64)

    cls = np.full(nodes.shape[0], NodeClass.INTERIOR, dtype=np.int8)
    cls[nodes[:, 0] == 0] = NodeClass.ROBIN_X
    cls[nodes[:, 1] == 0] = NodeClass.ROBIN_Y
    cls[(nodes[:, 0] == 0) & (nodes[:, 1] == 0)] = NodeClass.ROBIN_CORNER

    lookup = np.full((side, side), -1, dtype=np.int64)
    lookup[nodes[:, 0], nodes[:, 1]] = np.arange(nodes.shape[0])

    geom = GridGeometry(spec=spec, nodes=nodes, node_class=cls, _lookup=lookup)
    assert geom.n_unknowns == count_unknowns(spec)
    return geom
