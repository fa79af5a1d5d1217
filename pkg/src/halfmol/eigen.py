"""Eigensolvers for the symmetric pencil (A, B) with diagonal positive B.

Three routes, kept deliberately independent of each other:

* ``solve_dense``: full spectrum of B^{-1/2} A B^{-1/2} by LAPACK, the
  reference oracle for small problems (dimension capped at 4000).
* ``solve_iterative``: a blocked LOBPCG with Jacobi preconditioning,
  blockwise B-orthonormalization of the trial basis every iteration,
  and hard locking of converged pairs.  Deterministic for a fixed seed.
* ``solve_halfline_1d``: the lowest eigenvalue of the one-dimensional
  half-line operator -f'' with f'(0) = -sigma0 f(0), discretized with
  the same finite-volume convention.  Serves as a separability oracle:
  on the quadrant with constant sigma the two-dimensional ground
  energy is exactly twice this value on matching grids.

Eigenvalues are returned ascending; eigenvectors are B-orthonormal and
sign-fixed so that the entry of largest magnitude is positive.
Residuals are reported as ||A u - lambda B u|| / ||B u||.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .assembly import DiscreteOperator

DENSE_DIM_LIMIT = 4000


@dataclass(frozen=True)
class EigenConfig:
    """Iterative solver knobs; defaults favor reproducibility."""

    nev: int = 1
    block_extra: int = 5
    tol: float = 1e-9
    max_iter: int = 2000
    seed: int = 42

    def __post_init__(self):
        if self.nev < 1:
            raise ValueError(f"nev must be >= 1, got {self.nev}")
        if self.block_extra < 0:
            raise ValueError(f"block_extra must be >= 0, got {self.block_extra}")
        if not self.tol > 0.0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(eq=False)
class EigenPairs:
    """Computed pairs, values ascending, vectors B-orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    converged: np.ndarray
    iterations: int

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


def _column_norms(M: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->j", M, M))


def _sign_fix(V: np.ndarray) -> np.ndarray:
    if V.size == 0:
        return V
    lead = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[lead, np.arange(V.shape[1])])
    signs[signs == 0.0] = 1.0
    return V * signs[None, :]


def _residual_norms(A, b: np.ndarray, vals: np.ndarray,
                    vecs: np.ndarray) -> np.ndarray:
    BV = b[:, None] * vecs
    R = A @ vecs - BV * vals[None, :]
    denom = _column_norms(BV)
    denom[denom == 0.0] = 1.0
    return _column_norms(R) / denom


def _finalize(A, b: np.ndarray, vals: np.ndarray, vecs: np.ndarray,
              tol: float, iterations: int) -> EigenPairs:
    """B-normalize, order ascending, sign-fix, recompute residuals."""
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    bnorm = np.sqrt(np.einsum("ij,ij->j", vecs, b[:, None] * vecs))
    bnorm[bnorm == 0.0] = 1.0
    vecs = vecs / bnorm[None, :]
    vecs = _sign_fix(vecs)
    res = _residual_norms(A, b, vals, vecs)
    return EigenPairs(values=vals, vectors=vecs, residuals=res,
                      converged=res <= tol, iterations=iterations)


def solve_dense(op: DiscreteOperator) -> EigenPairs:
    """Full spectrum by dense symmetric diagonalization.

    Refuses dimensions above 4000: the dense route is an oracle for
    cross-checking the iterative solver, not a production path.
    """
    n = op.dim
    if n > DENSE_DIM_LIMIT:
        raise ValueError(
            f"dense solve refused: dimension {n} exceeds the oracle limit "
            f"{DENSE_DIM_LIMIT}; use solve_iterative")
    s = 1.0 / np.sqrt(op.B)
    C = op.A.toarray() * s[:, None] * s[None, :]
    C = 0.5 * (C + C.T)
    w, V = scipy.linalg.eigh(C)
    U = V * s[:, None]
    # scaling back keeps B-orthonormality: U' B U = V' V = I
    return _finalize(op.A, op.B, w, U, tol=np.inf, iterations=0)


def _b_column_norms(V: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,i,ij->j", V, b, V))


def _b_orthonormalize(V: np.ndarray, AV: np.ndarray, sqrt_b: np.ndarray,
                      b: np.ndarray, q=(), aq=(),
                      drop_tol: float = 1e-11):
    """B-orthonormalize columns of V, transforming A V in lockstep.

    q/aq are matching sequences of mutually B-orthonormal blocks whose
    span is projected out first (two passes).  V and AV may be mutated.
    Near-dependent columns are dropped; returns (V, AV, n_dropped).
    """
    dropped = 0
    if any(qi.shape[1] for qi in q):
        for _ in range(2):
            BV = b[:, None] * V
            for qi, aqi in zip(q, aq):
                if qi.shape[1] == 0:
                    continue
                coef = qi.T @ BV
                V -= qi @ coef
                AV -= aqi @ coef
    # drop exact zero columns before scaling
    norms = _b_column_norms(V, b)
    alive = norms > 0.0
    if not np.all(alive):
        dropped += int(np.sum(~alive))
        V, AV, norms = V[:, alive], AV[:, alive], norms[alive]
    if V.shape[1] == 0:
        return V, AV, dropped
    V /= norms[None, :]
    AV /= norms[None, :]
    # Fast path: Gram + Cholesky + triangular solve gives
    # B-orthonormality at GEMM cost; LAPACK QR on the tall block is an
    # order of magnitude slower at production sizes.  A second round
    # runs only when the first factorization looks ill-conditioned.
    clean = False
    for _ in range(2):
        G = V.T @ (b[:, None] * V)
        G = 0.5 * (G + G.T)
        try:
            Cf = np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            clean = False
            break
        d = np.diag(Cf)
        delta = d.min() / d.max()
        if delta <= drop_tol:
            clean = False
            break
        T = scipy.linalg.solve_triangular(Cf, np.eye(Cf.shape[0]),
                                          lower=True).T
        V = V @ T
        AV = AV @ T
        clean = True
        if delta > 1e-3:
            break
    if clean:
        return V, AV, dropped
    # near-dependent basis: rank-revealing QR with column dropping
    while True:
        W = V * sqrt_b[:, None]
        Q, R = np.linalg.qr(W)
        d = np.abs(np.diag(R))
        if d.size == 0 or d.max() == 0.0:
            return V[:, :0], AV[:, :0], dropped + V.shape[1]
        keep = d > drop_tol * d.max()
        if np.all(keep):
            T = scipy.linalg.solve_triangular(R, np.eye(R.shape[0]))
            return Q / sqrt_b[:, None], AV @ T, dropped
        dropped += int(np.sum(~keep))
        V, AV = V[:, keep], AV[:, keep]


def solve_iterative(op: DiscreteOperator, cfg: EigenConfig,
                    x0: np.ndarray | None = None) -> EigenPairs:
    """Blocked LOBPCG for the lowest nev pairs of (A, B).

    The search block holds nev + block_extra vectors seeded with uniform
    [-1, 1] entries from the configured seed; columns of an optional x0
    replace the leading seed columns, which lets a solve on a refined
    grid start from a prolongated coarse solution.  Each iteration
    expands the space with Jacobi-preconditioned residuals and the
    previous update directions, B-orthonormalizes the new blocks, and
    solves the small Rayleigh-Ritz problem.  Pairs whose scaled
    residual drops below tol are locked and removed from the active
    block.  If max_iter is exhausted the best available pairs are
    returned with their converged flags set honestly.
    """
    A, b = op.A, op.B
    n = op.dim
    if cfg.nev > n:
        raise ValueError(f"nev = {cfg.nev} exceeds operator dimension {n}")
    m = min(cfg.nev + cfg.block_extra, n)
    sqrt_b = np.sqrt(b)

    dj = A.diagonal()
    floor = 1e-3 * max(np.median(np.abs(dj)), 1e-300)
    prec = 1.0 / np.maximum(np.abs(dj), floor)

    rng = np.random.default_rng(cfg.seed)
    X = rng.uniform(-1.0, 1.0, size=(n, m))
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if x0.ndim == 1:
            x0 = x0[:, None]
        if x0.shape[0] != n:
            raise ValueError(f"x0 has {x0.shape[0]} rows, operator "
                             f"dimension is {n}")
        keep = min(x0.shape[1], m)
        X[:, :keep] = x0[:, :keep]
    AX = A @ X
    X, AX, dropped = _b_orthonormalize(X, AX, sqrt_b, b)
    if X.shape[1] < m:
        raise RuntimeError("B-orthonormalization breakdown in the initial "
                           f"block: kept {X.shape[1]} of {m} columns")
    H = X.T @ AX
    H = 0.5 * (H + H.T)
    theta, C = scipy.linalg.eigh(H)
    X, AX = X @ C, AX @ C

    locked_V = np.empty((n, 0))
    locked_AV = np.empty((n, 0))
    locked_vals: list[float] = []
    P = AP = None
    iterations = 0
    refresh_every = 40

    for it in range(1, cfg.max_iter + 1):
        iterations = it
        if it % refresh_every == 0:
            AX = A @ X
            if P is not None and P.shape[1]:
                AP = A @ P

        BX = b[:, None] * X
        R = AX - BX * theta[None, :]
        denom = _column_norms(BX)
        denom[denom == 0.0] = 1.0
        rnorm = _column_norms(R) / denom

        nconv = 0
        while nconv < X.shape[1] and rnorm[nconv] <= cfg.tol:
            nconv += 1
        still_needed = cfg.nev - len(locked_vals)
        if nconv >= still_needed:
            break
        if nconv > 0:
            # hard locking: freeze the leading converged pairs
            locked_V = np.hstack([locked_V, X[:, :nconv]])
            locked_AV = np.hstack([locked_AV, AX[:, :nconv]])
            locked_vals.extend(theta[:nconv].tolist())
            X, AX, theta = X[:, nconv:], AX[:, nconv:], theta[nconv:]
            R = R[:, nconv:]
            if P is not None:
                P, AP = P[:, nconv:], AP[:, nconv:]

        np.multiply(R, prec[:, None], out=R)
        W = R
        AW = A @ W
        # X stays B-orthonormal through the Ritz updates, so only the
        # narrow W and P blocks need orthonormalizing; the joint basis
        # never sees a tall QR
        qs = [locked_V, X]
        aqs = [locked_AV, AX]
        W, AW, _ = _b_orthonormalize(W, AW, sqrt_b, b, q=qs, aq=aqs)
        have_p = P is not None and P.shape[1]
        if have_p:
            P, AP, _ = _b_orthonormalize(P, AP, sqrt_b, b,
                                         q=qs + [W], aq=aqs + [AW])
            have_p = P.shape[1]
        if W.shape[1] == 0 and not have_p:
            # residuals lie inside the current span: no progress possible
            break
        parts = [X, W] if not have_p else [X, W, P]
        aparts = [AX, AW] if not have_p else [AX, AW, AP]
        S = np.hstack(parts)
        AS = np.hstack(aparts)
        m_act = X.shape[1]
        G = S.T @ AS
        G = 0.5 * (G + G.T)
        w, Cfull = scipy.linalg.eigh(G)
        C = Cfull[:, :m_act]
        theta = w[:m_act]
        Xn = S @ C
        AXn = AS @ C
        P = S[:, m_act:] @ C[m_act:, :]
        AP = AS[:, m_act:] @ C[m_act:, :]
        X, AX = Xn, AXn

    vals = np.concatenate([np.asarray(locked_vals), theta])
    vecs = np.hstack([locked_V, X])
    pairs = _finalize(A, b, vals, vecs, tol=cfg.tol, iterations=iterations)
    return EigenPairs(values=pairs.values[:cfg.nev],
                      vectors=pairs.vectors[:, :cfg.nev],
                      residuals=pairs.residuals[:cfg.nev],
                      converged=pairs.converged[:cfg.nev],
                      iterations=iterations)


def solve_halfline_1d(sigma0: float, L: float, n: int) -> float:
    """Lowest eigenvalue of -f'' on [0, L], f'(0) = -sigma0 f(0), f(L) = 0.

    Finite-volume discretization on n cells (h = L/n) with the same
    conventions as the two-dimensional assembly; tends to -sigma0^2 as
    h -> 0, L -> inf for attractive sigma0.
    """
    if n < 2:
        raise ValueError(f"need at least 2 cells, got {n}")
    if not L > 0.0:
        raise ValueError(f"interval length must be positive, got {L}")
    h = L / n
    main = np.full(n, 2.0)
    main[0] = 1.0 - h * sigma0
    off = np.full(n - 1, -1.0)
    bdiag = h * h * np.ones(n)
    bdiag[0] *= 0.5
    s = 1.0 / np.sqrt(bdiag)
    main_s = main * s * s
    off_s = off * s[:-1] * s[1:]
    w = scipy.linalg.eigvalsh_tridiagonal(main_s, off_s, select="i",
                                          select_range=(0, 0))
    return float(w[0])
