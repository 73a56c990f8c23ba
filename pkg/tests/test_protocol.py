import numpy as np
import pytest

from demerlab.protocol import (
    CommunicationFunction,
    OneWayQmaProtocol,
    audit_protocol,
    induced_witness_operator,
    optimal_witness,
    protocol_from_json,
    protocol_layout,
    protocol_to_json,
    rest_projector,
    sliced_verifier,
)
from demerlab.qcore import (
    Gate,
    RegisterLayout,
    UnitaryCircuit,
    basis_state,
    random_density,
    random_state,
    ry_gate,
)
from demerlab.toys import (
    coin_protocol,
    perturbed_rac_protocol,
    rac_claim_protocol,
    rac_plain_protocol,
)
from conftest import random_unitary


def direct_acceptance(p: OneWayQmaProtocol, x: str, y: str, witness: np.ndarray) -> float:
    """Independent oracle: simulate the full input vector and read the accept bit."""
    psi = p.advice_state(x).amplitudes
    bob = np.zeros(2 ** p.bob_bits, dtype=complex)
    bob[int(y, 2) if y else 0] = 1.0
    anc = np.zeros(2 ** p.ancilla_qubits, dtype=complex)
    anc[0] = 1.0
    vec = np.kron(np.kron(np.kron(bob, psi), witness), anc)
    out = p.verifier.apply(vec)
    n = p.verifier.n_qubits
    idx = np.arange(2 ** n)
    mask = ((idx >> (n - 1 - p.accept_qubit)) & 1) == 1
    return float(np.sum(np.abs(out[mask]) ** 2))


# ---------------------------------------------------------------------------
# communication functions


def test_function_validation():
    with pytest.raises(ValueError, match="nonempty"):
        CommunicationFunction(1, 1, {})
    with pytest.raises(ValueError, match="widths"):
        CommunicationFunction(1, 1, {("00", "0"): 1})
    with pytest.raises(ValueError, match="not a bit"):
        CommunicationFunction(1, 1, {("0", "0"): 2})


def test_partial_function_pairs_skip_undefined():
    f = CommunicationFunction(1, 1, {("0", "0"): 1})
    assert f.value("0", "1") is None
    assert f.pairs() == [(("0", "0"), 1)]


# ---------------------------------------------------------------------------
# induced witness operator


def test_witness_independent_verifier(rng):
    # verifier that rotates its accept ancilla regardless of the witness
    layout = protocol_layout(0, 1, 1, 1)
    accept = layout.offset("ancilla")
    circ = UnitaryCircuit(3, (ry_gate(accept, 2 * np.arcsin(np.sqrt(0.4))),), layout)
    p = OneWayQmaProtocol(
        bob_bits=0, alice_qubits=1, witness_qubits=1, ancilla_qubits=1,
        verifier=circ, accept_qubit=accept,
        alice_encode=lambda x: basis_state(RegisterLayout.of(("advice", 1)), "0"))
    w = induced_witness_operator(p, "0", "")
    assert np.allclose(w, 0.4 * np.eye(2), atol=1e-9)
    lam, _ = optimal_witness(p, "0", "")
    assert lam == pytest.approx(0.4, abs=1e-9)


def test_accept_on_one_witness():
    p, _ = rac_claim_protocol(2)
    w = induced_witness_operator(p, "11", "0")
    assert np.allclose(w, np.diag([0.0, 1.0]), atol=1e-12)
    lam, wit = optimal_witness(p, "11", "0")
    assert lam == pytest.approx(1.0, abs=1e-12)
    assert abs(wit.amplitudes[1]) == pytest.approx(1.0, abs=1e-9)


def test_induced_operator_matches_direct_simulation(rng):
    # random 1-qubit-witness verifier: <phi|W|phi> equals direct simulation
    layout = protocol_layout(1, 1, 1, 1)
    gates = []
    for q in (1, 2, 3):
        gates.append(ry_gate(q, float(rng.uniform(0, np.pi))))
    gates.append(Gate("u", (3,), random_unitary(2, rng), controls=(2,), control_values=(1,)))
    gates.append(Gate("v", (1,), random_unitary(2, rng), controls=(0, 3), control_values=(1, 1)))
    circ = UnitaryCircuit(4, tuple(gates), layout)
    p = OneWayQmaProtocol(
        bob_bits=1, alice_qubits=1, witness_qubits=1, ancilla_qubits=1,
        verifier=circ, accept_qubit=3,
        alice_encode=lambda x: basis_state(RegisterLayout.of(("advice", 1)), "0"))
    w = induced_witness_operator(p, "0", "1")
    for _ in range(50):
        phi = random_state(RegisterLayout.of(("w", 1)), rng).amplitudes
        expected = direct_acceptance(p, "0", "1", phi)
        assert np.real(phi.conj() @ w @ phi) == pytest.approx(expected, abs=1e-9)


def test_optimal_witness_beats_random_search(rng):
    p, _ = coin_protocol(witness_angle=0.9)
    lam, _ = optimal_witness(p, "0", "1")
    best = 0.0
    for _ in range(10_000):
        phi = random_state(RegisterLayout.of(("w", 1)), rng).amplitudes
        best = max(best, direct_acceptance(p, "0", "1", phi))
    assert best <= lam + 1e-9
    assert lam - best <= 1e-3  # the random search certifies lambda from below


def test_mixed_witness_dominance(rng):
    p, _ = coin_protocol(witness_angle=0.5)
    w = induced_witness_operator(p, "0", "1")
    lam, _ = optimal_witness(p, "0", "1")
    for _ in range(100):
        sigma = random_density(RegisterLayout.of(("w", 1)), rng)
        assert float(np.real(np.trace(w @ sigma.matrix))) <= lam + 1e-9


def test_lambda_invariant_under_witness_unitary(rng):
    p, _ = coin_protocol(witness_angle=0.3)
    lam, _ = optimal_witness(p, "0", "1")
    u = random_unitary(2, rng)
    witness_q = p.layout.offset("witness")
    pre = Gate("u", (witness_q,), u)
    circ = UnitaryCircuit(p.verifier.n_qubits, (pre,) + p.verifier.gates, p.layout)
    rotated = OneWayQmaProtocol(
        bob_bits=p.bob_bits, alice_qubits=p.alice_qubits,
        witness_qubits=p.witness_qubits, ancilla_qubits=p.ancilla_qubits,
        verifier=circ, accept_qubit=p.accept_qubit, alice_encode=p.alice_encode)
    lam_rot, _ = optimal_witness(rotated, "0", "1")
    assert lam_rot == pytest.approx(lam, abs=1e-9)


# ---------------------------------------------------------------------------
# audits


def test_audit_always_reject_trivial():
    layout = protocol_layout(1, 1, 1, 1)
    circ = UnitaryCircuit(4, (), layout)  # empty verifier never flips the accept bit
    p = OneWayQmaProtocol(
        bob_bits=1, alice_qubits=1, witness_qubits=1, ancilla_qubits=1,
        verifier=circ, accept_qubit=3,
        alice_encode=lambda x: basis_state(RegisterLayout.of(("advice", 1)), "0"))
    f = CommunicationFunction(1, 1, {("0", "0"): 0, ("0", "1"): 0})
    assert audit_protocol(p, f).passed


def test_audit_rac_instance_exhaustive():
    p, f = rac_claim_protocol(2)
    audit = audit_protocol(p, f)
    assert audit.passed
    assert all(r.lam in (pytest.approx(0.0, abs=1e-9), pytest.approx(1.0, abs=1e-9))
               for r in audit.records)


def test_audit_plain_protocol_without_witness():
    # w = 0 reduces to the plain one-way success condition
    p, f = rac_plain_protocol(2)
    audit = audit_protocol(p, f)
    assert audit.passed
    w = induced_witness_operator(p, "10", "0")
    assert w.shape == (1, 1)
    assert w[0, 0].real == pytest.approx(1.0, abs=1e-12)


def test_audit_reports_exact_violation_set():
    p, f = perturbed_rac_protocol(2, bad_index=1, leak=0.4)
    audit = audit_protocol(p, f)
    assert not audit.passed
    violated = {(r.x, r.y) for r in audit.violations()}
    expected = {(x, "1") for x in ("00", "01", "10", "11") if x[1] == "0"}
    assert violated == expected


def test_audit_missing_encoding():
    p, f = rac_claim_protocol(2)
    broken = OneWayQmaProtocol(
        bob_bits=p.bob_bits, alice_qubits=p.alice_qubits,
        witness_qubits=p.witness_qubits, ancilla_qubits=p.ancilla_qubits,
        verifier=p.verifier, accept_qubit=p.accept_qubit,
        alice_encode=lambda x: (_ for _ in ()).throw(ValueError(f"missing encoding for {x!r}")))
    with pytest.raises(ValueError, match="missing encoding"):
        audit_protocol(broken, f)


# ---------------------------------------------------------------------------
# slicing helpers


def test_sliced_verifier_blocks_are_unitary():
    p, _ = rac_claim_protocol(2)
    for y in ("0", "1"):
        block = sliced_verifier(p, y)
        assert np.allclose(block @ block.conj().T, np.eye(block.shape[0]), atol=1e-9)


def test_rest_projector_is_projector():
    p, _ = coin_protocol()
    pr = rest_projector(p, "1", outcome=0)
    assert np.allclose(pr @ pr, pr, atol=1e-9)
    assert np.allclose(pr, pr.conj().T, atol=1e-9)
    # outcome projectors resolve the identity
    pa = rest_projector(p, "1", outcome=1)
    assert np.allclose(pr + pa, np.eye(pr.shape[0]), atol=1e-9)


def test_sliced_verifier_rejects_non_block_diagonal():
    layout = protocol_layout(1, 1, 0, 0)
    circ = UnitaryCircuit(2, (ry_gate(0, 0.4),), layout)  # rotates Bob's register
    p = OneWayQmaProtocol(
        bob_bits=1, alice_qubits=1, witness_qubits=0, ancilla_qubits=0,
        verifier=circ, accept_qubit=1,
        alice_encode=lambda x: basis_state(RegisterLayout.of(("advice", 1)), "0"))
    with pytest.raises(ValueError, match="block diagonal"):
        sliced_verifier(p, "0")


# ---------------------------------------------------------------------------
# JSON round-trip


def test_protocol_json_roundtrip():
    p, f = rac_claim_protocol(2)
    text = protocol_to_json(p, f.alice_inputs())
    q = protocol_from_json(text)
    for (x, y), _ in f.pairs():
        lam_p, _ = optimal_witness(p, x, y)
        lam_q, _ = optimal_witness(q, x, y)
        assert lam_q == pytest.approx(lam_p, abs=1e-12)
    assert audit_protocol(q, f).passed
