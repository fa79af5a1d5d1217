"""Finite-volume assembly of the generalized eigenproblem A u = lambda B u.

A discretizes the Dirichlet/Robin Laplacian on the strip lattice, B the
diagonal matrix of control-volume areas (h^2 for interior nodes, h^2/2
on a Robin axis, h^2/4 at the corner).  Entries of A are kept in the
natural edge scaling: an interior lattice edge contributes the
symmetric pair +1/-1, an edge running along a Robin axis contributes
+1/2 / -1/2 because its dual face is cut in half by the boundary, and
an edge into a Dirichlet wall contributes only its diagonal part.  Each
Robin axis adds -h*sigma(t) to the diagonal of its nodes, with weight
1/2 at the corner per axis (so the corner receives -h*sigma(0) total).

This is exactly the scheme obtained by eliminating the ghost nodes of
the central difference Robin condition and rescaling the boundary rows
by their cell fraction, which is what restores matrix symmetry.  The
quadratic form u' A u then discretizes

    integral |grad u|^2  -  boundary integral sigma |u|^2

with trapezoidal boundary quadrature, and convergence of smooth
eigenvalues is second order in h.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO

import numpy as np
import scipy.sparse as sp

from .domain import DomainSpec, GridGeometry
from .sigma import SigmaProfile


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Assembled pair (A, B) with B stored as its diagonal."""

    A: sp.csr_matrix
    B: np.ndarray
    geometry: GridGeometry
    h: float
    robin_diag: np.ndarray

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def apply(self, u: np.ndarray) -> np.ndarray:
        if u.shape[0] != self.dim:
            raise ValueError(f"vector length {u.shape[0]} does not match "
                             f"operator dimension {self.dim}")
        return self.A @ u

    def quadratic_form(self, u: np.ndarray) -> float:
        return float(u @ self.apply(u))

    def form_parts(self, u: np.ndarray) -> tuple[float, float]:
        """(gradient energy, boundary term); they sum to the full form."""
        boundary = float(self.robin_diag @ (u * u))
        return self.quadratic_form(u) - boundary, boundary

    def rayleigh_quotient(self, u: np.ndarray) -> float:
        denom = float(u @ (self.B * u))
        if denom <= 0.0:
            raise ValueError("Rayleigh quotient of a zero vector")
        return self.quadratic_form(u) / denom


def _robin_terms(geom: GridGeometry, profile: SigmaProfile,
                 h: float) -> np.ndarray:
    """Per-node Robin diagonal contribution, -h * weight * sigma."""
    nodes = geom.nodes
    i, j = nodes[:, 0], nodes[:, 1]
    robin = np.zeros(nodes.shape[0])
    on_x = i == 0
    if np.any(on_x):
        wt = np.where(j[on_x] == 0, 0.5, 1.0)
        robin[on_x] += -h * wt * profile.evaluate_array(j[on_x] * h)
    on_y = j == 0
    if np.any(on_y):
        wt = np.where(i[on_y] == 0, 0.5, 1.0)
        robin[on_y] += -h * wt * profile.evaluate_array(i[on_y] * h)
    return robin


def assemble(geom: GridGeometry, profile: SigmaProfile,
             h: float | None = None) -> DiscreteOperator:
    """Assemble (A, B) for a grid and a boundary profile.

    The profile must cover the boundary range actually sampled: [0, d]
    for a finite strip, [0, L] for the truncated quadrant.
    """
    spec = geom.spec
    if h is None:
        h = spec.h
    elif abs(h - spec.h) > 1e-12 * spec.h:
        raise ValueError(f"mesh width {h} does not match the grid's {spec.h}")

    reach = spec.L if spec.is_infinite else spec.d
    if profile.support_limit < reach:
        raise ValueError(
            f"profile domain [0, {profile.support_limit}) does not cover the "
            f"boundary range [0, {reach}] of {spec.describe()}")

    nodes = geom.nodes
    n = nodes.shape[0]
    i, j = nodes[:, 0], nodes[:, 1]
    lookup = geom._lookup
    side = lookup.shape[0]
    me = np.arange(n, dtype=np.int64)

    # Off-diagonal entries: one entry per ordered neighbor pair, so no
    # duplicate summation happens and mirrored entries are bit-identical.
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    for di, dj in ((1, 0), (0, 1)):
        ni, nj = i + di, j + dj
        inside = (ni < side) & (nj < side)
        nbr = np.full(n, -1, dtype=np.int64)
        nbr[inside] = lookup[ni[inside], nj[inside]]
        # an edge along a Robin axis has only half a dual face
        along_axis = (j == 0) if dj == 0 else (i == 0)
        w = np.where(along_axis, 0.5, 1.0)
        live = nbr >= 0
        p, q, wv = me[live], nbr[live], w[live]
        rows.extend((p, q))
        cols.extend((q, p))
        vals.extend((-wv, -wv))

    # Diagonal by closed formula: every lattice neighbor with nonnegative
    # coordinates is an unknown or a Dirichlet wall node and contributes
    # its edge weight; neighbors across a Robin axis do not exist.  The
    # expression is symmetric under the particle swap (i, j) -> (j, i).
    wx = np.where(j == 0, 0.5, 1.0)           # weight of +-x edges at (i, j)
    wy = np.where(i == 0, 0.5, 1.0)
    deg = (1.0 + (i >= 1)) * wx + (1.0 + (j >= 1)) * wy

    robin = _robin_terms(geom, profile, h)
    diag = deg + robin

    rows.append(me)
    cols.append(me)
    vals.append(diag)

    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()

    asym = (A - A.T).tocoo()
    if asym.nnz and np.max(np.abs(asym.data)) != 0.0:
        raise AssertionError("assembled operator is not exactly symmetric")

    cell = np.ones(n)
    cell[i == 0] *= 0.5
    cell[j == 0] *= 0.5
    B = h * h * cell

    return DiscreteOperator(A=A, B=B, geometry=geom, h=h, robin_diag=robin)


def write_coordinate_format(matrix, stream: IO[str]) -> None:
    """Write a matrix as 'row col value' lines, 17 significant digits."""
    if sp.issparse(matrix):
        coo = matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        triples = zip(coo.row[order], coo.col[order], coo.data[order])
    else:
        arr = np.atleast_2d(np.asarray(matrix))
        triples = ((r, c, arr[r, c])
                   for r in range(arr.shape[0]) for c in range(arr.shape[1]))
    for r, c, v in triples:
        stream.write(f"{int(r)} {int(c)} {v:.17g}\n")


def export_operator(op: DiscreteOperator, a_path: str,
                    b_path: str | None = None) -> None:
    """Dump A (and optionally diagonal B) in coordinate text format."""
    with open(a_path, "w") as f:
        write_coordinate_format(op.A, f)
    if b_path is not None:
        with open(b_path, "w") as f:
            diag = sp.coo_matrix((op.B, (np.arange(op.dim), np.arange(op.dim))))
            write_coordinate_format(diag, f)
