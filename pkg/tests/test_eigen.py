"""Eigensolvers: closed-form 1d oracle, dense/iterative agreement."""

import numpy as np
import pytest
import scipy.linalg

from halfmol import (ConstantProfile, DomainSpec, EigenConfig,
                     ExponentialProfile, assemble, build_grid, solve_dense,
                     solve_halfline_1d, solve_iterative)


def dispersion_ground(sigma0, h):
    # exact lowest eigenvalue of the semi-infinite discrete half line:
    # sinh(kappa h) = h sigma0 gives lambda = -(2/h^2)(sqrt(1+h^2 s^2)-1)
    return -(2.0 / h ** 2) * (np.sqrt(1.0 + (h * sigma0) ** 2) - 1.0)


@pytest.mark.parametrize("sigma0,h", [
    (1.0, 0.1), (1.0, 0.02), (0.5, 0.1), (2.0, 0.05),
])
def test_halfline_matches_lattice_dispersion(sigma0, h):
    # L large enough that the Dirichlet truncation error ~ exp(-2 s L)
    # is far below the comparison tolerance
    L = round(48.0 / sigma0 / h) * h
    lam = solve_halfline_1d(sigma0, L, int(round(L / h)))
    assert lam == pytest.approx(dispersion_ground(sigma0, h), rel=1e-12)


def test_halfline_second_order_in_h():
    errs = [abs(solve_halfline_1d(1.0, 50.0, int(50.0 / h)) + 1.0)
            for h in (0.1, 0.05)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_halfline_guards():
    with pytest.raises(ValueError):
        solve_halfline_1d(1.0, 10.0, 1)
    with pytest.raises(ValueError):
        solve_halfline_1d(1.0, 0.0, 10)


def halfline_spectrum(sigma0, L, n):
    """All eigenvalues of the 1d discretization, test-local oracle."""
    h = L / n
    main = np.full(n, 2.0)
    main[0] = 1.0 - h * sigma0
    off = np.full(n - 1, -1.0)
    bdiag = h * h * np.ones(n)
    bdiag[0] *= 0.5
    s = 1.0 / np.sqrt(bdiag)
    return scipy.linalg.eigvalsh_tridiagonal(main * s * s, off * s[:-1] * s[1:])


def test_quadrant_spectrum_is_tensor_sum():
    # constant coupling on the quadrant separates; the discrete scheme
    # separates too, so every 2d eigenvalue is a sum of two 1d ones
    h, L = 0.25, 4.0
    n = int(L / h)
    op = assemble(build_grid(DomainSpec.infinite(h, L)),
                  ConstantProfile(value=1.0))
    pairs = solve_dense(op)
    mu = halfline_spectrum(1.0, L, n)
    sums = np.sort(np.add.outer(mu, mu).ravel())
    np.testing.assert_allclose(pairs.values[:6], sums[:6],
                               rtol=1e-12, atol=1e-12)
    assert pairs.values[0] == pytest.approx(
        2.0 * solve_halfline_1d(1.0, L, n), rel=1e-13)


def test_dense_iterative_agree_on_strip():
    op = assemble(build_grid(DomainSpec.finite(1.0, 6, 5.0)),
                  ExponentialProfile(amplitude=1.2, rate=0.8))
    dense = solve_dense(op)
    cfg = EigenConfig(nev=4, tol=1e-10, max_iter=600)
    it = solve_iterative(op, cfg)
    assert it.all_converged
    np.testing.assert_allclose(it.values, dense.values[:4],
                               rtol=1e-9, atol=1e-11)
    gram = it.vectors.T @ (op.B[:, None] * it.vectors)
    np.testing.assert_allclose(gram, np.eye(4), atol=1e-10)


def test_iterative_handles_degenerate_levels():
    # quadrant with constant coupling has an exactly degenerate pair
    op = assemble(build_grid(DomainSpec.infinite(0.25, 4.0)),
                  ConstantProfile(value=1.0))
    dense = solve_dense(op)
    it = solve_iterative(op, EigenConfig(nev=3, tol=1e-9, max_iter=800))
    assert it.all_converged
    assert dense.values[1] == pytest.approx(dense.values[2], rel=1e-12)
    np.testing.assert_allclose(it.values, dense.values[:3], rtol=1e-8)


def test_block_wider_than_operator():
    # block defaults exceed a 6-unknown problem; solver must clamp
    op = assemble(build_grid(DomainSpec.finite(1.0, 2, 2.0)),
                  ConstantProfile(value=0.5))
    dense = solve_dense(op)
    it = solve_iterative(op, EigenConfig(nev=2, tol=1e-11, max_iter=300))
    np.testing.assert_allclose(it.values, dense.values[:2], rtol=1e-10)


def test_seed_reproducibility():
    op = assemble(build_grid(DomainSpec.finite(1.0, 4, 4.0)),
                  ConstantProfile(value=0.9))
    cfg = EigenConfig(nev=2, tol=1e-10, max_iter=500, seed=7)
    a = solve_iterative(op, cfg)
    b = solve_iterative(op, cfg)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.vectors, b.vectors)
    c = solve_iterative(op, EigenConfig(nev=2, tol=1e-10, max_iter=500,
                                        seed=8))
    np.testing.assert_allclose(a.values, c.values, rtol=1e-8)


def test_warm_start_restarts_from_solution():
    op = assemble(build_grid(DomainSpec.finite(1.0, 5, 5.0)),
                  ConstantProfile(value=1.1))
    cfg = EigenConfig(nev=2, tol=1e-9, max_iter=500)
    cold = solve_iterative(op, cfg)
    warm = solve_iterative(op, cfg, x0=cold.vectors)
    assert warm.iterations <= 3
    np.testing.assert_allclose(warm.values, cold.values, rtol=1e-11)
    # a single ground-state column also works
    one = solve_iterative(op, EigenConfig(nev=1, tol=1e-9, max_iter=500),
                          x0=cold.vectors[:, 0])
    assert one.values[0] == pytest.approx(cold.values[0], rel=1e-10)


def test_warm_start_dimension_checked():
    op = assemble(build_grid(DomainSpec.finite(1.0, 2, 1.5)),
                  ConstantProfile(value=0.0))
    with pytest.raises(ValueError):
        solve_iterative(op, EigenConfig(nev=1), x0=np.ones(7))


def test_dimension_guards():
    op = assemble(build_grid(DomainSpec.finite(1.0, 2, 1.5)),
                  ConstantProfile(value=0.0))
    with pytest.raises(ValueError):
        solve_iterative(op, EigenConfig(nev=5))
    big = assemble(build_grid(DomainSpec.infinite(0.05, 3.2)),
                   ConstantProfile(value=0.0))
    assert big.dim > 4000
    with pytest.raises(ValueError):
        solve_dense(big)


def test_unconverged_reported_honestly():
    op = assemble(build_grid(DomainSpec.infinite(0.25, 6.0)),
                  ConstantProfile(value=1.0))
    pairs = solve_iterative(op, EigenConfig(nev=2, tol=1e-14, max_iter=2))
    assert not pairs.all_converged
    assert pairs.iterations == 2
    assert np.all(np.diff(pairs.values) >= -1e-12)


def test_sign_convention_fixed():
    op = assemble(build_grid(DomainSpec.finite(1.0, 4, 4.0)),
                  ConstantProfile(value=0.6))
    for pairs in (solve_dense(op),
                  solve_iterative(op, EigenConfig(nev=3, max_iter=500))):
        V = pairs.vectors[:, :3]
        lead = np.argmax(np.abs(V), axis=0)
        assert np.all(V[lead, np.arange(3)] > 0.0)
        # ground vector of the connected stencil graph is single signed
        g = pairs.vectors[:, 0]
        assert g.min() >= -1e-11 * np.abs(g).max()


def test_config_validation():
    with pytest.raises(ValueError):
        EigenConfig(nev=0)
    with pytest.raises(ValueError):
        EigenConfig(tol=0.0)
    with pytest.raises(ValueError):
        EigenConfig(max_iter=0)
    with pytest.raises(ValueError):
        EigenConfig(block_extra=-1)


def test_one_unknown_dense_closed_form():
    # k=1, L=2d keeps only the corner node: lambda = (1 - h sigma)/(h^2/4)
    op = assemble(build_grid(DomainSpec.finite(1.0, 1, 2.0)),
                  ConstantProfile(value=0.8))
    assert op.dim == 1
    pairs = solve_dense(op)
    assert pairs.values[0] == pytest.approx((1.0 - 0.8) / 0.25, rel=1e-14)


def test_identity_problem_converges_immediately():
    from scipy.sparse import identity

    from halfmol.assembly import DiscreteOperator
    geo = build_grid(DomainSpec.finite(1.0, 2, 1.5))
    op = DiscreteOperator(A=identity(4, format="csr"), B=np.ones(4),
                          geometry=geo, h=geo.spec.h,
                          robin_diag=np.zeros(4))
    pairs = solve_iterative(op, EigenConfig(nev=2, tol=1e-12, max_iter=50))
    np.testing.assert_allclose(pairs.values, [1.0, 1.0], rtol=1e-12)
    assert pairs.iterations <= 2
