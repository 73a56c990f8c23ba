import itertools

import numpy as np
import pytest

from demerlab.qcore import (
    DensityMatrix,
    RegisterLayout,
    StateVector,
    TwoOutcomeMeasurement,
    random_density,
    random_effect,
)
from demerlab.qlemmas import (
    agrees_within_sigma,
    good_as_new_check,
    induced_effects,
    monte_carlo_any_outcome1,
    or_bound_run,
    projector_or_instance,
    random_or_instance,
    random_union_instance,
    union_bound_run,
)

Q1 = RegisterLayout.of(("q", 1))


def plus():
    return StateVector(np.array([1, 1], dtype=complex) / np.sqrt(2), Q1)


# ---------------------------------------------------------------------------
# gentle measurement


def test_good_as_new_zero_effect(rng):
    rho = random_density(Q1, rng)
    r = good_as_new_check(rho, TwoOutcomeMeasurement(np.zeros((2, 2), dtype=complex)))
    assert r.epsilon == pytest.approx(0.0, abs=1e-12)
    assert r.damage == pytest.approx(0.0, abs=1e-9)
    assert r.passed


def test_good_as_new_uniform_effect(rng):
    rho = random_density(Q1, rng)
    r = good_as_new_check(rho, TwoOutcomeMeasurement(np.eye(2, dtype=complex) / 2))
    assert r.epsilon == pytest.approx(0.5, abs=1e-12)
    assert r.damage == pytest.approx(0.0, abs=1e-9)
    assert r.bound == pytest.approx(np.sqrt(0.5), abs=1e-12)


def test_good_as_new_equality_case():
    # projector |1><1| on |+>: damage hits the bound sqrt(1/2) exactly
    r = good_as_new_check(plus(), TwoOutcomeMeasurement(np.diag([0.0, 1.0]).astype(complex)))
    assert r.epsilon == pytest.approx(0.5, abs=1e-9)
    assert r.damage == pytest.approx(1 / np.sqrt(2), abs=1e-9)
    assert r.bound == pytest.approx(1 / np.sqrt(2), abs=1e-9)
    assert r.passed


def test_good_as_new_rejects_certain_outcome():
    with pytest.raises(ValueError, match="probability zero"):
        good_as_new_check(plus().density(), TwoOutcomeMeasurement(np.eye(2, dtype=complex)))


def test_good_as_new_random_sweep(rng):
    for _ in range(50):
        rho, seq = random_union_instance(rng, max_qubits=2, max_steps=1)
        assert good_as_new_check(rho, seq[0]).passed


# ---------------------------------------------------------------------------
# union bound


def test_union_all_zero_effects(rng):
    rho = random_density(Q1, rng)
    seq = [TwoOutcomeMeasurement(np.zeros((2, 2), dtype=complex)) for _ in range(4)]
    r = union_bound_run(rho, seq)
    assert r.p_any_one == pytest.approx(0.0, abs=1e-12)
    assert r.passed


def test_union_single_step_equals_epsilon(rng):
    rho = random_density(Q1, rng)
    m = random_effect(Q1, rng, scale=0.4)
    r = union_bound_run(rho, [m])
    assert r.p_any_one == pytest.approx(m.outcome1_probability(rho), abs=1e-12)
    assert r.p_any_one <= np.sqrt(r.p_any_one) + 1e-12


def test_union_exact_matches_branch_enumeration(rng):
    # enumerate all 2^T outcome branches explicitly and add up every branch
    # that contains at least one outcome 1
    layout = RegisterLayout.of(("q", 2))
    rho = random_density(layout, rng)
    seq = [random_effect(layout, rng, scale=0.3) for _ in range(4)]
    r = union_bound_run(rho, seq)
    total = 0.0
    for outcomes in itertools.product((0, 1), repeat=4):
        if not any(outcomes):
            continue
        branch = rho.matrix
        for m, b in zip(seq, outcomes):
            k = m.m1 if b else m.m0
            branch = k @ branch @ k.conj().T
        total += float(np.trace(branch).real)
    assert r.p_any_one == pytest.approx(total, abs=1e-10)


def test_union_four_steps_at_four_percent(rng):
    # four effects rescaled to trigger at exactly 0.04 on the initial state:
    # the exact any-outcome-1 probability must stay at or below 4 * 0.2 = 0.8
    layout = RegisterLayout.of(("q", 2))
    rho = random_density(layout, rng)
    seq = []
    for _ in range(4):
        raw = random_effect(layout, rng, scale=1.0)
        eps = raw.outcome1_probability(rho)
        seq.append(TwoOutcomeMeasurement(raw.effect * (0.04 / eps)))
    r = union_bound_run(rho, seq, epsilon=0.04)
    assert r.bound == pytest.approx(0.8, abs=1e-12)
    assert r.p_any_one <= 0.8
    # and the exact value still matches the branch-enumeration oracle
    total = 0.0
    for outcomes in itertools.product((0, 1), repeat=4):
        if not any(outcomes):
            continue
        branch = rho.matrix
        for m, b in zip(seq, outcomes):
            k = m.m1 if b else m.m0
            branch = k @ branch @ k.conj().T
        total += float(np.trace(branch).real)
    assert r.p_any_one == pytest.approx(total, abs=1e-10)


def test_union_declared_epsilon_audited(rng):
    rho = random_density(Q1, rng)
    m = TwoOutcomeMeasurement(np.eye(2, dtype=complex) * 0.5)
    with pytest.raises(ValueError, match="epsilon"):
        union_bound_run(rho, [m], epsilon=0.1)


def test_union_bound_thousand_random_instances():
    # exact p_any_one <= T * sqrt(max per-step eps) on a large seeded sweep
    seeds = np.random.SeedSequence(7).spawn(1000)
    for ss in seeds:
        rng = np.random.default_rng(ss)
        rho, seq = random_union_instance(rng)
        r = union_bound_run(rho, seq)
        assert r.passed, f"bound violated: {r}"
        assert r.averaged_state_drift <= r.bound + 1e-9


# ---------------------------------------------------------------------------
# OR bound


def test_or_bound_certain_acceptance(rng):
    layout_a, layout_b = RegisterLayout.of(("a", 1)), RegisterLayout.of(("b", 1))
    rho = random_density(layout_a, rng)
    sigma = random_density(layout_b, rng)
    joint = TwoOutcomeMeasurement(np.eye(4, dtype=complex))
    r = or_bound_run(rho, sigma, joint, t_steps=18)
    assert r.p_any_one == pytest.approx(1.0, abs=1e-12)
    assert r.passed


def test_or_bound_pinned_arithmetic():
    # eta = 2/3, N = 2^W, T = 9 * 2^W: the floor is (2/3 - 1/3)^2 = 1/9
    for w in (1, 2):
        rho, sigma, joint, t = projector_or_instance(w)
        assert t == 9 * 2 ** w
        r = or_bound_run(rho, sigma, joint, t)
        assert r.params["eta"] == pytest.approx(2 / 3, abs=1e-12)
        assert r.bound == pytest.approx(1 / 9, abs=1e-9)
        assert r.p_any_one >= 1 / 9 - 1e-9
        assert r.passed


def test_or_bound_matched_projector_instance(rng):
    # 1-qubit witness, joint projector onto |psi>_A |+>_B, eta = 1/2, T = 18
    psi = np.array([0.6, 0.8], dtype=complex)
    plus_b = np.array([1, 1], dtype=complex) / np.sqrt(2)
    joint = TwoOutcomeMeasurement(np.kron(np.outer(psi, psi.conj()),
                                          np.outer(plus_b, plus_b.conj())))
    rho = DensityMatrix(np.outer(psi, psi.conj()), RegisterLayout.of(("a", 1)))
    sigma = DensityMatrix(np.diag([1.0, 0.0]).astype(complex), RegisterLayout.of(("b", 1)))
    r = or_bound_run(rho, sigma, joint, t_steps=18)
    assert r.params["eta"] == pytest.approx(0.5, abs=1e-12)
    assert r.p_any_one >= (0.5 - np.sqrt(2 / 18)) ** 2 - 1e-9
    # cross-check the averaged-channel value by Monte Carlo
    effects = induced_effects(joint, 2, 2)
    est, _ = monte_carlo_any_outcome1(rho, [m.m0 for m in effects], 18, 100_000,
                                      np.random.default_rng(5))
    assert agrees_within_sigma(est, r.p_any_one, 100_000)


def test_or_bound_precondition_enforced(rng):
    rho, sigma, joint, _ = projector_or_instance(1)
    with pytest.raises(ValueError, match="N/eta"):
        or_bound_run(rho, sigma, joint, t_steps=2)


def test_or_bound_custom_basis(rng):
    # the lemma quantifies over any orthonormal basis of the witness factor
    from conftest import random_unitary

    rho, sigma, joint, t = projector_or_instance(1)
    basis = random_unitary(2, rng)
    r = or_bound_run(rho, sigma, joint, t, basis=basis)
    assert r.passed


def test_or_bound_random_sweep():
    seeds = np.random.SeedSequence(11).spawn(200)
    for i, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        w = 1 if i % 2 == 0 else 2
        rho, sigma, joint, t = random_or_instance(rng, w)
        r = or_bound_run(rho, sigma, joint, t)
        assert r.passed, f"instance {i} violated the bound: {r}"


def test_or_bound_no_damage_geometric_oracle(rng):
    # with rho an eigenstate of every induced effect the rounds are i.i.d.,
    # so Pr[some accept] = 1 - (1 - mean_j q_j)^T exactly
    rho, sigma, joint, t = projector_or_instance(2)
    effects = induced_effects(joint, rho.dim, sigma.dim)
    qs = [m.outcome1_probability(rho) for m in effects]
    expected = 1.0 - (1.0 - np.mean(qs)) ** t
    r = or_bound_run(rho, sigma, joint, t)
    assert r.p_any_one == pytest.approx(expected, abs=1e-10)


def test_monte_carlo_agrees_on_mixed_state(rng):
    rho, sigma, joint, t = random_or_instance(rng, 1)
    r = or_bound_run(rho, sigma, joint, t)
    effects = induced_effects(joint, rho.dim, sigma.dim)
    est, _ = monte_carlo_any_outcome1(rho, [m.m0 for m in effects], t, 100_000,
                                      np.random.default_rng(18))
    assert agrees_within_sigma(est, r.p_any_one, 100_000)


def test_report_serialization(rng):
    rho, seq = random_union_instance(rng)
    d = union_bound_run(rho, seq).to_json_dict()
    assert set(d) == {"lemma", "params", "exact", "bound", "drift", "pass"}
