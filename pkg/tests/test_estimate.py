from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ancillaqpd import scenario
from ancillaqpd.estimate import (
    QpdTable,
    classical_lgi_bound_holds,
    correlation_from_qpd,
    derive_seed,
    estimate_correlation,
    estimate_qpd,
    exact_correlation,
    exact_qpd,
    lgi_k,
    marginal,
    populations,
    sweep,
    trajectory_terms,
)
from ancillaqpd.povm import builtin_set
from ancillaqpd.protocol import Protocol, Step, TrajectorySet, sample
from ancillaqpd.qmodel import (
    Channel,
    DensityMatrix,
    basis_projectors,
    named_observable,
    random_density_matrix,
    random_unitary,
    rotation_gate,
)
from ancillaqpd.weights import WeightVector, weights_for

Z = named_observable("Z")
PLUS = DensityMatrix.named("plus")


def test_single_time_correlation():
    assert abs(exact_correlation(PLUS, [Z], [])) < 1e-15


@pytest.mark.parametrize("theta", [0.0, 0.3 * np.pi, 2.0])
def test_two_time_closed_form(theta):
    c = exact_correlation(PLUS, [Z, Z], [rotation_gate(theta, 0.0)])
    assert abs(c - np.exp(-1j * theta)) < 1e-12


def test_length_mismatch():
    with pytest.raises(ValueError):
        exact_correlation(PLUS, [Z, Z], [])


def test_qpd_same_time_is_diagonal(rng):
    rho = random_density_matrix(3, rng)
    q = exact_qpd(rho, [basis_projectors(3)] * 2, [Channel.identity(3)])
    assert np.allclose(q.values, np.diag(np.diag(rho.mat)), atol=1e-14)


def test_qpd_closed_form_entry():
    th = 1.1
    q = exact_qpd(PLUS, [basis_projectors(2)] * 2, [rotation_gate(th, 0.0)])
    assert abs(q.values[0, 0] - np.cos(th / 2) * np.exp(-0.5j * th) / 2) < 1e-14


@given(st.integers(0, 2**32 - 1), st.integers(2, 3), st.integers(2, 4))
def test_qpd_and_correlation_consistent(seed, n_times, d):
    g = np.random.default_rng(seed)
    rho = random_density_matrix(d, g)
    chans = [Channel.from_unitary(random_unitary(d, g)) for _ in range(n_times - 1)]
    evs = [g.normal(size=d) for _ in range(n_times)]
    from ancillaqpd.qmodel import Observable

    obs = [Observable.diagonal(e) for e in evs]
    q = exact_qpd(rho, [basis_projectors(d)] * n_times, chans)
    assert abs(correlation_from_qpd(q, evs) - exact_correlation(rho, obs, chans)) < 1e-12
    assert abs(q.values.sum() - 1) < 1e-12
    for t in range(n_times):
        m = marginal(q, t, tol=1e-12)
        assert np.max(np.abs(m.probs - populations(rho, basis_projectors(d), chans[:t]))) < 1e-12


def test_correlation_from_qpd_trivial_cases():
    q = QpdTable(np.diag([0.3, 0.7]).astype(complex))
    assert correlation_from_qpd(q, [[1, 1], [1, 1]]) == pytest.approx(1)
    assert correlation_from_qpd(q, [[1, -1], [1, -1]]) == pytest.approx(1)
    with pytest.raises(ValueError):
        correlation_from_qpd(q, [[1, -1, 0], [1, -1]])


def test_unit_weights_give_exact_one():
    ms = builtin_set("zy")
    ones = WeightVector(np.ones(4), named_observable("I"), named_observable("I"), ms)
    recs = TrajectorySet(np.random.default_rng(0).integers(0, 4, size=(50, 2)), (4, 4))
    est = estimate_correlation(recs, [ones, ones])
    assert est.value == 1
    assert est.sem_re == 0 and est.sem_im == 0


def test_weight_record_mismatch():
    recs = TrajectorySet(np.zeros((5, 2), dtype=int), (4, 2))
    with pytest.raises(ValueError):
        estimate_correlation(recs, scenario.correlation_weights(3))


def test_correlation_at_large_n():
    th = 0.3 * np.pi
    est = scenario.sampled_correlation(th, 2, 10**5, seed=1)
    assert est.within(scenario.correlation_exact(th, 2))


def test_paper_budget_error_bars():
    est = scenario.sampled_correlation(0.3 * np.pi, 2, 100, seed=4)
    # terms are bounded by gamma_max products (2 for the zy step), so the SEM is ~ 2/sqrt(100)
    assert 0.02 < est.sem_re < 0.25 and 0.02 < est.sem_im < 0.25


def test_qpd_estimate_large_n():
    th = 0.3 * np.pi
    q = scenario.sampled_qpd(th, 2, 10**5, seed=2)
    exact = scenario.qpd_exact(th, 2)
    sem_re, sem_im = q.sem()
    assert np.all(np.abs(q.values.real - exact.values.real) <= 4 * sem_re)
    assert np.all(np.abs(q.values.imag - exact.values.imag) <= 4 * sem_im)
    assert q.total().within(1.0)


def test_fluctuation_bound_per_record():
    p = scenario.protocol(0.74 * np.pi, 3, "correlation")
    w = scenario.correlation_weights(3)
    terms = trajectory_terms(sample(p, 5000, seed=3), w)
    bound = np.prod([v.gamma_max for v in w])
    assert np.all(np.abs(terms) <= bound + 1e-12)


def test_estimator_unbiased_over_seeds():
    th = 0.3 * np.pi
    exact = scenario.correlation_exact(th, 2)
    ests = [scenario.sampled_correlation(th, 2, 1000, derive_seed(99, k)) for k in range(200)]
    mean = np.mean([e.value for e in ests])
    sem = np.mean([e.sem_re for e in ests]), np.mean([e.sem_im for e in ests])
    assert abs(mean.real - exact.real) < 5 * sem[0] / np.sqrt(200)
    assert abs(mean.imag - exact.imag) < 5 * sem[1] / np.sqrt(200)


def test_lgi_at_zero():
    r = scenario.lgi_exact(0.0)
    assert r.k == pytest.approx(-1, abs=1e-12)
    assert r.k == r.terms[0] + r.terms[1] - r.terms[2]


def test_lgi_at_highlight():
    r = scenario.lgi_exact(scenario.THETA_STAR_3)
    assert r.k == pytest.approx(scenario.lgi_closed_form(scenario.THETA_STAR_3), abs=1e-12)
    assert r.violates


def test_lgi_needs_binary_three_time():
    with pytest.raises(ValueError):
        lgi_k(QpdTable(np.ones((2, 2)) / 4))


@given(st.lists(st.floats(0, 1), min_size=2, max_size=2), st.floats(0, 1), st.floats(0, 1))
def test_classical_ceiling(diag, f1, f2):
    # diagonal state, z measurements, classical bit-flip channels in between
    p0 = np.array(diag) + 1e-3
    p0 /= p0.sum()
    flips = [np.array([[1 - f, f], [f, 1 - f]]) for f in (f1, f2)]
    joint = np.einsum("i,ji,kj->ijk", p0, flips[0], flips[1])
    assert classical_lgi_bound_holds(joint)


def test_sweep_rows():
    grid = scenario.default_grid()
    rows = sweep(grid, lambda th: scenario.correlation_exact(th, 2))
    assert len(rows) == 41
    assert max(abs(r.exact.real - np.cos(r.theta)) for r in rows) < 1e-12
    assert len(sweep([0.4], lambda th: 1.0)) == 1
    with pytest.raises(ValueError):
        sweep([], lambda th: 1.0)


def test_sampled_sweep_within_sem():
    grid = np.linspace(0, np.pi, 11)
    rows = sweep(grid, lambda th: scenario.correlation_exact(th, 2),
                 lambda k, th: scenario.sampled_correlation(th, 2, 10**4, scenario.grid_seed(1, k)))
    assert np.mean([r.estimate.within(r.exact) for r in rows]) >= 0.95


def test_estimate_qpd_uses_one_ensemble():
    ms = builtin_set("zyx")
    p = Protocol(PLUS, (Step(ms), Step(ms, rotation_gate(0.4, 0.0))), final_projective=True)
    recs = sample(p, 2000, seed=1)
    w = [[weights_for(ms, f"P{i}") for i in range(2)],
         [weights_for(builtin_set("z"), f"P{i}", mode="final") for i in range(2)]]
    q = estimate_qpd(recs, w)
    assert q.terms.shape == (2000, 2, 2)
    with pytest.raises(ValueError):
        estimate_qpd(recs, w[:1])
