"""Domain specs, lattice enumeration, and the threshold formula."""

import math

import numpy as np
import pytest

from halfmol import (DomainSpec, NodeClass, build_grid, count_unknowns,
                     threshold)


def test_threshold_closed_form_is_float_exact():
    for d in (0.5, 1.0, 2.0, math.pi):
        assert threshold(d) * (2.0 * d * d) / math.pi ** 2 == 1.0
    assert threshold(math.inf) == 0.0


def test_threshold_rejects_nonpositive():
    with pytest.raises(ValueError):
        threshold(0.0)
    with pytest.raises(ValueError):
        threshold(-1.0)


def test_finite_spec_properties():
    spec = DomainSpec.finite(1.0, 4, 3.0)
    assert spec.h == 0.25
    assert spec.M == 12
    assert not spec.is_infinite
    assert spec.threshold == threshold(1.0)
    assert "strip" in spec.describe() or "d=1" in spec.describe()
    with pytest.raises(ValueError):
        spec.n_side


def test_infinite_spec_properties():
    spec = DomainSpec.infinite(0.25, 8.0)
    assert spec.is_infinite
    assert spec.n_side == 32
    assert spec.h == 0.25
    assert spec.threshold == 0.0
    with pytest.raises(ValueError):
        spec.M


def test_spec_validation():
    with pytest.raises(ValueError):
        DomainSpec.finite(1.0, 4, 3.1)        # L not a multiple of h
    with pytest.raises(ValueError):
        DomainSpec.finite(1.0, 0, 3.0)        # k < 1
    with pytest.raises(ValueError):
        DomainSpec.finite(1.0, 4, 1.0)        # truncation inside the corner
    with pytest.raises(ValueError):
        DomainSpec.finite(-1.0, 4, 3.0)
    with pytest.raises(ValueError):
        DomainSpec.infinite(0.3, 1.0)         # L/h not an integer
    with pytest.raises(ValueError):
        DomainSpec.infinite(-0.25, 8.0)
    with pytest.raises(ValueError):
        DomainSpec(d=math.inf, L=8.0, k=4)    # wrong knob for d = inf
    with pytest.raises(ValueError):
        DomainSpec(d=1.0, L=8.0, h_given=0.5)  # wrong knob for finite d
    with pytest.raises(ValueError):
        DomainSpec(d=1.0, L=math.inf, k=4)


def test_with_L_and_refined():
    spec = DomainSpec.finite(1.0, 4, 3.0)
    assert spec.with_L(6.0).M == 24
    assert spec.refined().k == 8
    assert spec.refined().h == spec.h / 2
    q = DomainSpec.infinite(0.5, 8.0)
    assert q.refined().h == 0.25
    assert q.with_L(16.0).n_side == 32


def enumerate_unknowns(spec):
    """Direct lattice walk used as the counting oracle."""
    found = []
    if spec.is_infinite:
        n = round(spec.L / spec.h)
        for i in range(n):
            for j in range(n):
                found.append((i, j))
        return found
    M, k = spec.M, spec.k
    for i in range(M):
        for j in range(M):
            if abs(i - j) < k and i + j < M:
                found.append((i, j))
    return found


@pytest.mark.parametrize("spec", [
    DomainSpec.finite(1.0, 2, 1.5),
    DomainSpec.finite(1.0, 2, 2.0),
    DomainSpec.finite(1.0, 3, 4.0),
    DomainSpec.finite(0.5, 4, 2.5),
    DomainSpec.finite(2.0, 5, 8.0),
    DomainSpec.finite(1.0, 7, 11.0),
    DomainSpec.infinite(0.5, 2.0),
    DomainSpec.infinite(0.25, 3.0),
])
def test_count_matches_enumeration(spec):
    assert count_unknowns(spec) == len(enumerate_unknowns(spec))


def test_frozen_counts():
    # tiny strips pinned by hand: M=3/k=2 gives 1+2+1, M=4/k=2 adds 2
    assert count_unknowns(DomainSpec.finite(1.0, 2, 1.5)) == 4
    assert count_unknowns(DomainSpec.finite(1.0, 2, 2.0)) == 6
    assert count_unknowns(DomainSpec.infinite(0.5, 2.0)) == 16


def test_build_grid_order_and_classes():
    spec = DomainSpec.finite(1.0, 2, 2.0)
    geo = build_grid(spec)
    assert geo.n_unknowns == 6
    # lexicographic (i, j)
    assert [tuple(n) for n in geo.nodes] == [(0, 0), (0, 1), (1, 0),
                                             (1, 1), (1, 2), (2, 1)]
    cls = list(geo.node_class)
    assert cls[0] == NodeClass.ROBIN_CORNER
    assert cls[1] == NodeClass.ROBIN_X
    assert cls[2] == NodeClass.ROBIN_Y
    assert cls[3] == NodeClass.INTERIOR


def test_index_of_round_trip():
    geo = build_grid(DomainSpec.finite(1.0, 3, 4.0))
    for row, (i, j) in enumerate(geo.nodes):
        assert geo.index_of(int(i), int(j)) == row
    with pytest.raises(KeyError):
        geo.index_of(0, 5)   # outside the strip
    with pytest.raises(KeyError):
        geo.index_of(-1, 0)


def test_mirror_permutation_is_involution():
    for spec in (DomainSpec.finite(1.0, 3, 4.0), DomainSpec.infinite(0.5, 3.0)):
        geo = build_grid(spec)
        perm = geo.mirror_permutation()
        assert np.array_equal(perm[perm], np.arange(geo.n_unknowns))
        swapped = geo.nodes[perm]
        assert np.array_equal(swapped[:, 0], geo.nodes[:, 1])
        assert np.array_equal(swapped[:, 1], geo.nodes[:, 0])
