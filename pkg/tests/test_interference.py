import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bunching.circuits import BeamSplitter, beam_splitter_unitary, family_circuit, haar_random_unitary, random_states
from bunching.interference import (
    BunchingInstance,
    OutcomeSpec,
    UndefinedConditionalError,
    all_outcomes,
    bunching_probability,
    conditional_bunched_distribution,
    distinct_assignments,
    event_probability,
    event_probability_double_sum,
    fermionic_bunching_probability,
    first_order_perturbation_predictor,
    fock_oracle_distribution,
    fock_oracle_event_probability,
    h_matrix,
    phase_direction,
    single_mode_bunching,
    stability_direction_check,
    two_mode_event_probabilities,
)
from bunching.permanent import permanent
from bunching.states import InternalStateSet, gram_from_states, violation_family_states

from conftest import random_complex, random_psd

BS50 = beam_splitter_unitary(2, BeamSplitter(0, 1, 0.5))


def hom_instance(overlap):
    S = np.array([[1, overlap], [np.conj(overlap), 1]], dtype=complex)
    return BunchingInstance(BS50, (0, 1), S)


@pytest.mark.parametrize("overlap", [1.0, 0.0, 0.6, 0.5j, np.exp(0.3j) / 2])
def test_hom_coincidence(overlap):
    inst = hom_instance(overlap)
    p11 = event_probability(inst, OutcomeSpec((1, 1)))
    # distinguishable photons: |U00 U11|^2 + |U01 U10|^2 = 1/2; interference term scales with |overlap|^2
    assert p11 == pytest.approx((1 - abs(overlap) ** 2) / 2, abs=1e-14)
    p20 = event_probability(inst, OutcomeSpec((2, 0)))
    assert p20 == pytest.approx((1 + abs(overlap) ** 2) / 4, abs=1e-14)


def test_hom_bunching_in_one_port():
    inst = BunchingInstance(BS50, (0,), np.ones((2, 2)))
    assert bunching_probability(inst) == pytest.approx(0.5)
    assert single_mode_bunching(inst) == pytest.approx(0.5)


def test_full_subset_is_certain(rng):
    U = haar_random_unitary(5, rng)
    S = gram_from_states(random_states(4, 2, rng))
    inst = BunchingInstance(U, tuple(range(5)), S)
    assert bunching_probability(inst) == pytest.approx(1.0, abs=1e-12)


def test_distinguishable_bunching_is_product(rng):
    U = haar_random_unitary(6, rng)
    inst = BunchingInstance(U, (1, 4), np.eye(4))
    classical = np.prod([np.sum(np.abs(U[[1, 4], j]) ** 2) for j in range(4)])
    assert bunching_probability(inst) == pytest.approx(classical, rel=1e-12)


@given(n=st.integers(1, 5), seed=st.integers(0, 2**32 - 1))
def test_single_mode_factorisation(n, seed):
    rng = np.random.default_rng(seed)
    U = haar_random_unitary(n + 1, rng)
    S = gram_from_states(random_states(n, min(n, 2), rng))
    inst = BunchingInstance(U, (n,), S)
    assert single_mode_bunching(inst) == pytest.approx(bunching_probability(inst), rel=1e-10, abs=1e-15)


def test_single_mode_needs_one_mode():
    with pytest.raises(ValueError):
        single_mode_bunching(hom_instance(1.0))


def test_fermions_obey_exclusion(rng):
    # identical fermions cannot put 3 particles into 2 modes
    U = haar_random_unitary(5, rng)
    inst = BunchingInstance(U, (0, 3), np.ones((3, 3)))
    assert abs(fermionic_bunching_probability(inst)) < 1e-14
    dist = BunchingInstance(U, (0, 3), np.eye(3))
    assert fermionic_bunching_probability(dist) == pytest.approx(bunching_probability(dist), rel=1e-12)


def test_fermionic_two_photon_antibunching():
    inst = BunchingInstance(BS50, (0,), np.ones((2, 2)))
    assert fermionic_bunching_probability(inst) == pytest.approx(0.0, abs=1e-15)


@given(n=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
def test_fermionic_probability_above_indistinguishable(n, seed):
    rng = np.random.default_rng(seed)
    U = haar_random_unitary(n + 2, rng)
    k = int(rng.integers(1, n + 3))
    inst = BunchingInstance.from_states(U, tuple(range(k)), random_states(n, int(rng.integers(1, n + 1)), rng))
    det_h = fermionic_bunching_probability(inst.with_gram(np.ones((n, n))))
    assert fermionic_bunching_probability(inst) >= det_h - 1e-10


@given(n=st.integers(2, 6), seed=st.integers(0, 2**32 - 1))
def test_bunching_probability_is_phase_gauge_invariant(n, seed):
    rng = np.random.default_rng(seed)
    U = haar_random_unitary(n + 1, rng)
    states = random_states(n, 2, rng)
    rotated = InternalStateSet(states.vectors * np.exp(2j * np.pi * rng.random(n))[:, None])
    a = bunching_probability(BunchingInstance.from_states(U, (0, n), states))
    b = bunching_probability(BunchingInstance.from_states(U, (0, n), rotated))
    assert b == pytest.approx(a, abs=1e-10)


def test_instance_validation():
    with pytest.raises(ValueError):
        BunchingInstance(np.eye(2), (0,), np.eye(3))
    with pytest.raises(ValueError):
        BunchingInstance(np.eye(3), (2, 1), np.eye(2))
    with pytest.raises(ValueError):
        BunchingInstance(np.eye(3), (3,), np.eye(2))
    with pytest.raises(ValueError):
        BunchingInstance(np.ones((2, 2)), (0,), np.eye(2))


def test_outcome_spec():
    o = OutcomeSpec.from_assignment([2, 0, 2], 4)
    assert o.s == (1, 0, 2, 0)
    assert o.d == (0, 2, 2)
    assert o.n == 3 and o.mu == 2
    with pytest.raises(ValueError):
        OutcomeSpec((1, -1))
    assert len(list(all_outcomes(3, 4))) == math.comb(6, 3)


def test_distinct_assignments_count():
    s = (2, 0, 1, 3)
    a = distinct_assignments(s)
    assert len(a) == math.factorial(6) // (2 * 1 * 6)
    assert len({tuple(r) for r in a}) == len(a)
    assert all(np.bincount(r, minlength=4).tolist() == list(s) for r in a)


def test_event_probability_rejects_mismatched_outcome():
    inst = hom_instance(0.5)
    with pytest.raises(ValueError):
        event_probability(inst, OutcomeSpec((1, 1, 0)))
    with pytest.raises(ValueError):
        event_probability(inst, OutcomeSpec((1, 0)))


@settings(max_examples=25)
@given(n=st.integers(1, 4), extra=st.integers(0, 2), r=st.integers(1, 3), seed=st.integers(0, 2**32 - 1))
def test_event_probability_matches_oracles(n, extra, r, seed):
    rng = np.random.default_rng(seed)
    m = n + extra
    U = haar_random_unitary(m, rng)
    states = random_states(n, min(r, n), rng)
    inst = BunchingInstance.from_states(U, (0,), states)
    fock = fock_oracle_distribution(U, states)
    total = 0.0
    for outcome in all_outcomes(n, m):
        p = event_probability(inst, outcome)
        assert p == pytest.approx(fock.get(outcome.s, 0.0), abs=1e-12)
        assert p == pytest.approx(event_probability_double_sum(inst, outcome), abs=1e-12)
        total += p
    assert total == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25)
@given(n=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_bunching_probability_equals_summed_events(n, seed):
    rng = np.random.default_rng(seed)
    m = n + 2
    U = haar_random_unitary(m, rng)
    states = random_states(n, min(2, n), rng)
    K = (0, m - 1)
    inst = BunchingInstance.from_states(U, K, states)
    inside = sum(
        fock_oracle_event_probability(U, states, o) for o in all_outcomes(n, m) if sum(o.s[k] for k in K) == n
    )
    p = bunching_probability(inst)
    assert p == pytest.approx(inside, abs=1e-12)
    assert -1e-12 <= p <= 1 + 1e-12


def test_double_sum_oracle_limit():
    inst = BunchingInstance(np.eye(6), (0,), np.eye(6))
    with pytest.raises(ValueError):
        event_probability_double_sum(inst, OutcomeSpec((1,) * 6))


def test_fock_oracle_limits():
    with pytest.raises(ValueError):
        fock_oracle_distribution(np.eye(8), random_states(2, 1, np.random.default_rng(0)))


def family_instance(n, states=None, eta=None):
    c = family_circuit(n, eta)
    states = violation_family_states(n) if states is None else states
    return BunchingInstance.from_states(c.U, c.subset, states)


def test_family_bunching_matches_event_sum():
    inst = family_instance(7)
    events = two_mode_event_probabilities(inst)
    assert sum(p for _, p in events) == pytest.approx(bunching_probability(inst), rel=1e-11)


def test_family_against_fock_oracle_n5():
    c = family_circuit(5)
    states = violation_family_states(5)
    inst = BunchingInstance.from_states(c.U, c.subset, states)
    for j, p in two_mode_event_probabilities(inst):
        s = [0] * 5
        s[3], s[4] = j, 5 - j
        assert p == pytest.approx(fock_oracle_event_probability(c.U, states, OutcomeSpec(tuple(s))), abs=1e-13)


def test_conditional_distribution_bosonic_input():
    inst = family_instance(7).with_gram(np.ones((7, 7)))
    dist = dict(conditional_bunched_distribution(inst))
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)
    assert dist[1] == pytest.approx(0.5, abs=1e-12)
    assert dist[6] == pytest.approx(0.5, abs=1e-12)


def test_conditional_distribution_star_input_is_symmetric():
    dist = [p for _, p in conditional_bunched_distribution(family_instance(7))]
    assert sum(dist) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(dist, dist[::-1], atol=1e-12)
    assert abs(dist[0]) < 1e-14 and abs(dist[7]) < 1e-14


def test_conditional_distribution_guards():
    with pytest.raises(UndefinedConditionalError):
        conditional_bunched_distribution(BunchingInstance(np.eye(3), (1, 2), np.eye(2)))
    with pytest.raises(ValueError):
        conditional_bunched_distribution(BunchingInstance(np.eye(3), (1,), np.eye(2)))


@pytest.mark.parametrize("n", [4, 6])
def test_first_order_predictor_error_is_quadratic(n):
    rng = np.random.default_rng(n)
    A, D = random_complex(rng, n), random_complex(rng, n)
    err = [abs(permanent(A + d * D) - first_order_perturbation_predictor(A, D, d)) for d in (1e-3, 5e-4)]
    assert err[0] / err[1] == pytest.approx(4.0, rel=0.01)


def test_first_order_predictor_shape_check():
    with pytest.raises(ValueError):
        first_order_perturbation_predictor(np.eye(2), np.eye(3), 0.1)


def test_phase_direction_is_hermitian():
    dS = phase_direction([0.3, -1.0, 2.0])
    np.testing.assert_allclose(dS, dS.conj().T)
    assert np.all(np.diag(dS) == 0)


@given(n=st.integers(2, 7), seed=st.integers(0, 2**32 - 1))
def test_hermitian_permanent_is_stationary_along_phase_directions(n, seed):
    rng = np.random.default_rng(seed)
    A = random_psd(rng, n)
    x = rng.normal(size=n)
    scale = abs(permanent(A))
    assert abs(stability_direction_check(A, x)) <= 1e-7 * max(scale, 1.0)


def test_stability_check_matches_analytic_derivative():
    # real symmetric but indefinite: derivative still vanishes for any Hermitian A
    rng = np.random.default_rng(2)
    B = rng.normal(size=(5, 5))
    A = B + B.T
    x = rng.normal(size=5)
    Delta = A * phase_direction(x).T
    analytic = first_order_perturbation_predictor(A, Delta, 1.0) - permanent(A)
    assert abs(analytic) < 1e-10 * abs(permanent(A))
    assert abs(stability_direction_check(A, x)) < 1e-7 * abs(permanent(A))


def test_stability_derivative_vanishes_for_any_matrix():
    # to first order the perturbation is the diagonal similarity D A D^*, D = diag(exp(i delta x))
    rng = np.random.default_rng(4)
    A = random_complex(rng, 5)
    x = rng.normal(size=5)
    D = np.diag(np.exp(1e-3j * x))
    assert permanent(D @ A @ D.conj()) == pytest.approx(permanent(A), rel=1e-12)
    analytic = first_order_perturbation_predictor(A, A * phase_direction(x).T, 1.0) - permanent(A)
    assert abs(analytic) < 1e-10 * abs(permanent(A))
    P = random_psd(rng, 5)
    assert abs(stability_direction_check(P, x)) < 1e-9 * abs(permanent(P))


def test_stability_check_edge_cases():
    assert stability_direction_check(np.eye(3), np.ones(3)) == 0.0
    with pytest.raises(ValueError):
        stability_direction_check(np.eye(3), np.ones(2))
