"""Classification, extrapolation, sandwich and sweep logic."""

import math

import numpy as np
import pytest

from halfmol import (AnalysisError, ConstantProfile, ContinuumArtifact,
                     ConvergenceInfo, DiscreteEigenvalue, DomainSpec,
                     EigenConfig, EigenPairs, ExponentialProfile,
                     SpectralResult, build_grid, check_ground_energy_sandwich,
                     classify, extrapolate, prolong_solution, run_classified,
                     solve_lowest, stability_gate, sweep_critical_sigma)
from halfmol.analysis import _map_jobs


# --- extrapolation ---------------------------------------------------------

def test_extrapolate_recovers_exact_power_law():
    pts = [(h, 3.0 + 2.0 * h ** 2) for h in (0.4, 0.2, 0.1)]
    limit, p = extrapolate(pts)
    assert limit == pytest.approx(3.0, abs=1e-12)
    assert p == pytest.approx(2.0, abs=1e-10)


def test_extrapolate_first_order():
    pts = [(h, -1.0 + 0.3 * h) for h in (0.2, 0.1, 0.05)]
    limit, p = extrapolate(pts)
    assert limit == pytest.approx(-1.0, abs=1e-12)
    assert p == pytest.approx(1.0, abs=1e-10)


def test_extrapolate_uses_three_finest():
    pts = [(0.8, 99.0)] + [(h, 3.0 + 2.0 * h ** 2) for h in (0.4, 0.2, 0.1)]
    limit, p = extrapolate(pts)
    assert limit == pytest.approx(3.0, abs=1e-12)


def test_extrapolate_flat_plateau():
    limit, p = extrapolate([(0.4, 5.1), (0.2, 5.0), (0.1, 5.0)])
    assert limit == 5.0 and p == math.inf


def test_extrapolate_rejects_non_contracting():
    with pytest.raises(AnalysisError):
        extrapolate([(0.4, 1.0), (0.2, 1.1), (0.1, 1.25)])
    with pytest.raises(AnalysisError):
        # sign flip in the differences
        extrapolate([(0.4, 1.0), (0.2, 1.2), (0.1, 1.1)])


def test_extrapolate_input_validation():
    with pytest.raises(ValueError):
        extrapolate([(0.2, 1.0), (0.1, 1.1)])
    with pytest.raises(ValueError):
        extrapolate([(0.4, 1.0), (0.2, 1.1), (0.13, 1.12)])


def test_stability_gate_floor():
    assert stability_gate(1e-9) == 1e-6
    assert stability_gate(1e-4) == 1e-3


# --- classification --------------------------------------------------------

def fake_pairs(values, converged=None):
    values = np.asarray(values, dtype=float)
    n = len(values)
    conv = np.ones(n, dtype=bool) if converged is None else np.asarray(converged)
    return EigenPairs(values=values, vectors=np.zeros((1, n)),
                      residuals=np.zeros(n), converged=conv, iterations=5)


def test_classify_buckets():
    spec = DomainSpec.finite(1.0, 2, 1.5)
    thr = spec.threshold
    base = fake_pairs([-1.0, -0.5, thr + 0.3, -0.2])
    stab = fake_pairs([-1.0 * (1.0 + 2e-9), -0.5 * 1.01, thr + 0.25, -0.2],
                      converged=[True, True, True, False])
    res = classify(base, spec, [stab], profile="test", tol=1e-9)
    assert [d.value_coarse for d in res.discrete] == [-1.0]
    assert res.discrete[0].drift_rel == pytest.approx(2e-9, rel=1e-6)
    assert res.unstable == (-0.5,)
    assert [a.value for a in res.artifacts] == [thr + 0.3]
    assert res.artifacts[0].drift == pytest.approx(0.05)
    assert res.refused == (3,)
    assert res.ground_energy == pytest.approx(-1.0 * (1.0 + 2e-9))


def test_classify_needs_stability_run():
    spec = DomainSpec.finite(1.0, 2, 1.5)
    with pytest.raises(ValueError):
        classify(fake_pairs([-1.0]), spec, [])


def test_spectral_result_rejects_bad_discrete():
    spec = DomainSpec.finite(1.0, 2, 1.5)
    bad = DiscreteEigenvalue(value=spec.threshold + 1.0,
                             value_coarse=spec.threshold + 1.0,
                             drift_rel=0.0)
    with pytest.raises(AnalysisError):
        SpectralResult(spec=spec, profile="", threshold=spec.threshold,
                       values=(), residuals=(), converged=(),
                       discrete=(bad,), artifacts=(), unstable=(),
                       refused=(), ground_energy=bad.value)


def test_convergence_info_bracket_guard():
    ConvergenceInfo(h_values=(0.4, 0.2, 0.1),
                    lambda_values=(-1.9, -1.97, -1.99),
                    extrapolated=-2.0, observed_order=2.0,
                    error_estimate=0.01)
    with pytest.raises(AnalysisError):
        ConvergenceInfo(h_values=(0.4, 0.2, 0.1),
                        lambda_values=(-1.9, -1.97, -1.99),
                        extrapolated=-2.5, observed_order=2.0,
                        error_estimate=0.01)


# --- prolongation ----------------------------------------------------------

def test_prolongation_reproduces_linears_away_from_walls():
    coarse = build_grid(DomainSpec.infinite(0.5, 4.0))
    fine = build_grid(DomainSpec.infinite(0.25, 4.0))
    a, b = 0.7, -0.3
    u = a * coarse.nodes[:, 0] * 0.5 + b * coarse.nodes[:, 1] * 0.5
    v = prolong_solution(u, coarse, fine)
    cmax = coarse.nodes.max()
    inside = ((fine.nodes[:, 0] + 1) // 2 <= cmax) & \
             ((fine.nodes[:, 1] + 1) // 2 <= cmax)
    expect = a * fine.nodes[:, 0] * 0.25 + b * fine.nodes[:, 1] * 0.25
    np.testing.assert_allclose(v[inside], expect[inside], atol=1e-13)


def test_prolongation_multicolumn():
    coarse = build_grid(DomainSpec.finite(1.0, 4, 4.0))
    fine = build_grid(DomainSpec.finite(1.0, 8, 4.0))
    rng = np.random.default_rng(3)
    U = rng.standard_normal((coarse.n_unknowns, 2))
    V = prolong_solution(U, coarse, fine)
    assert V.shape == (fine.n_unknowns, 2)
    np.testing.assert_array_equal(V[:, 0],
                                  prolong_solution(U[:, 0], coarse, fine))


def test_prolongation_checks_refinement_factor():
    coarse = build_grid(DomainSpec.infinite(0.5, 2.0))
    too_fine = build_grid(DomainSpec.infinite(0.125, 2.0))
    with pytest.raises(ValueError):
        prolong_solution(np.ones(coarse.n_unknowns), coarse, too_fine)


# --- solve pipeline --------------------------------------------------------

def test_solve_lowest_auto_routes_by_size():
    cfg = EigenConfig(nev=1, tol=1e-8, max_iter=600)
    small = DomainSpec.finite(1.0, 4, 4.0)
    op, pairs = solve_lowest(small, ConstantProfile(value=1.0), cfg)
    assert pairs.iterations == 0          # dense path marker
    assert len(pairs.values) == 1
    big = DomainSpec.infinite(0.25, 10.0)
    op2, pairs2 = solve_lowest(big, ConstantProfile(value=1.0), cfg)
    assert op2.dim > 1200 and pairs2.iterations > 0
    with pytest.raises(ValueError):
        solve_lowest(small, ConstantProfile(value=1.0), cfg, method="magic")


def test_run_classified_strip_finds_bound_state():
    cfg = EigenConfig(nev=4, tol=1e-9)
    spec = DomainSpec.finite(1.0, 4, 12.0)
    res, runs = run_classified(spec, ConstantProfile(value=1.0), cfg,
                               method="auto")
    assert len(runs) == 2
    assert res.discrete and res.ground_energy < 0.0
    assert res.discrete[0].drift_rel < stability_gate(cfg.tol)
    assert all(a.value >= res.threshold for a in res.artifacts)
    # thread pool must not change anything
    res2, _ = run_classified(spec, ConstantProfile(value=1.0), cfg,
                             method="auto", threads=2)
    assert res2.values == res.values
    with pytest.raises(ValueError):
        run_classified(spec, ConstantProfile(value=1.0), cfg, doublings=0)


def test_run_classified_refuses_unconverged():
    cfg = EigenConfig(nev=2, tol=1e-13, max_iter=2)
    spec = DomainSpec.finite(1.0, 4, 6.0)
    res, _ = run_classified(spec, ConstantProfile(value=1.0), cfg)
    assert res.refused and not res.discrete


# --- ground-energy sandwich ------------------------------------------------

def test_sandwich_on_decaying_profile():
    prof = ExponentialProfile(amplitude=1.0, rate=1.0)
    cfg = EigenConfig(nev=1, tol=1e-9)
    res, _ = run_classified(DomainSpec.infinite(0.5, 12.0), prof, cfg,
                            method="auto")
    rep = check_ground_energy_sandwich(prof, res)
    assert rep.ok and rep.hypothesis_holds and rep.within_bounds
    assert rep.lower == pytest.approx(-2.0)
    assert rep.upper == pytest.approx(-2.0 / 3.0)
    assert rep.lower <= rep.ground_energy <= rep.upper


def test_sandwich_hypothesis_not_met():
    prof = ExponentialProfile(amplitude=-1.0, rate=1.0)
    cfg = EigenConfig(nev=1, tol=1e-9)
    res, _ = run_classified(DomainSpec.infinite(0.5, 8.0), prof, cfg,
                            method="auto")
    rep = check_ground_energy_sandwich(prof, res)
    assert rep.ok and not rep.hypothesis_holds
    assert rep.within_bounds is None


def synthetic_quadrant_result(ground):
    spec = DomainSpec.infinite(0.5, 8.0)
    if ground is None:
        discrete = ()
    else:
        discrete = (DiscreteEigenvalue(value=ground, value_coarse=ground,
                                       drift_rel=1e-9),)
    return SpectralResult(spec=spec, profile="synthetic", threshold=0.0,
                          values=(), residuals=(), converged=(),
                          discrete=discrete, artifacts=(), unstable=(),
                          refused=(), ground_energy=ground)


def test_sandwich_reports_missing_state():
    prof = ExponentialProfile(amplitude=1.0, rate=1.0)
    rep = check_ground_energy_sandwich(prof, synthetic_quadrant_result(None))
    assert not rep.ok and "no stable negative eigenvalue" in rep.failure


def test_sandwich_reports_escape():
    prof = ExponentialProfile(amplitude=1.0, rate=1.0)
    rep = check_ground_energy_sandwich(prof, synthetic_quadrant_result(-5.0))
    assert not rep.ok and rep.within_bounds is False


def test_sandwich_requires_quadrant():
    prof = ExponentialProfile(amplitude=1.0, rate=1.0)
    spec = DomainSpec.finite(1.0, 2, 1.5)
    res = SpectralResult(spec=spec, profile="", threshold=spec.threshold,
                         values=(), residuals=(), converged=(),
                         discrete=(), artifacts=(), unstable=(),
                         refused=(), ground_energy=None)
    with pytest.raises(ValueError):
        check_ground_energy_sandwich(prof, res)


# --- critical-coupling sweep -----------------------------------------------

def test_sweep_brackets_transition():
    spec = DomainSpec.finite(1.0, 4, 6.0)
    sw = sweep_critical_sigma(spec, (-10.0, 0.0), 0.5,
                              cfg=EigenConfig(nev=1, tol=1e-9))
    assert -3.0 < sw.critical_sigma < -0.3
    assert sw.tol_achieved <= 0.5
    assert sw.bracket_lo <= sw.critical_sigma <= sw.bracket_hi
    assert not sw.history[0].bound_state     # repulsive end
    assert sw.history[1].bound_state         # attractive end
    widths = [s.s_hi - s.s_lo for s in sw.history[2:]]
    assert all(b <= a for a, b in zip(widths, widths[1:]))


def test_sweep_rejects_bad_bracket():
    spec = DomainSpec.finite(1.0, 4, 6.0)
    with pytest.raises(ValueError):
        sweep_critical_sigma(spec, (0.0, -1.0), 0.5)
    with pytest.raises(ValueError):
        sweep_critical_sigma(spec, (-1.0, 0.0), 0.0)
    with pytest.raises(ValueError):
        sweep_critical_sigma(DomainSpec.infinite(0.5, 4.0), (-1.0, 0.0), 0.5)


def test_sweep_detects_non_straddling_bracket():
    spec = DomainSpec.finite(1.0, 4, 6.0)
    with pytest.raises(AnalysisError):
        # bound state exists on the whole bracket
        sweep_critical_sigma(spec, (-0.2, 0.0), 0.1,
                             cfg=EigenConfig(nev=1, tol=1e-9))


# --- job mapping -----------------------------------------------------------

def test_map_jobs_order_stable():
    jobs = [lambda i=i: i * i for i in range(7)]
    assert _map_jobs(jobs, 1) == _map_jobs(jobs, 4) == [i * i for i in range(7)]


def test_strong_repulsion_reports_empty_discrete_list():
    res, _ = run_classified(DomainSpec.finite(1.0, 4, 8.0),
                            ConstantProfile(value=-10.0),
                            EigenConfig(nev=3, max_iter=3000))
    assert res.discrete == ()
    assert res.ground_energy is None
    assert res.artifacts  # everything sits at or above the threshold


def test_sweep_tolerance_halving_nests_bracket():
    spec = DomainSpec.finite(1.0, 3, 6.0)
    cfg = EigenConfig(nev=2, max_iter=2000)
    coarse = sweep_critical_sigma(spec, (-4.0, 0.0), 0.5, cfg=cfg)
    fine = sweep_critical_sigma(spec, (-4.0, 0.0), 0.25, cfg=cfg)
    assert coarse.bracket_lo <= fine.bracket_lo
    assert fine.bracket_hi <= coarse.bracket_hi
    assert fine.bracket_hi - fine.bracket_lo <= 0.25
