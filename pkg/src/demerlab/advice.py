"""Fixing randomized advice by counting, and training quantum advice by
postselection, at exhaustively checkable scale.

Three procedures:

* ma_fix_advice: majority-boost a verifier that uses randomized advice until
  each constrained (input, witness) pair errs with probability below
  2^-n * 2^-w, then sample advice tuples until one decides every pair
  correctly; the tuple ships with an exhaustive certificate.
* qma_fix_advice: same counting trick with a quantum witness. Yes-instances
  are certified through the optimal witness; no-instances only need checking
  on computational basis witnesses, because the maximally mixed state bounds
  the optimal acceptance by 2^w times the best basis acceptance.
* qcma_train: start from the maximally mixed advice state, repeatedly run an
  amplified verifier on training pairs, postselect the output onto the known
  label, and keep extending while each step multiplies the survival
  probability by at most 2/3. At the greedy fixpoint the surviving state
  decides every input by thresholding witness acceptances at 2/3 and 1/3.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .amplify import binom_tail, build_inner, float_binom_tail, majority_threshold, min_majority_reps
from .protocol import OneWayQmaProtocol, rest_projector
from .qcore import ATOL, StateVector, hermitize, top_eigenpair

__all__ = [
    "PromiseViolationError",
    "RandomizedAdvice",
    "MaToyVerifier",
    "QmaToyVerifier",
    "QuantumAdviceVerifier",
    "FixedMaAdvice",
    "FixedQmaAdvice",
    "TrainingSet",
    "TrainedDecider",
    "DecisionRecord",
    "ma_fix_advice",
    "qma_fix_advice",
    "qcma_train",
    "j_fold_decision",
    "float_binom_tail",
]


class PromiseViolationError(RuntimeError):
    """The verifier broke its completeness/soundness promise."""


@dataclass(frozen=True)
class RandomizedAdvice:
    """Explicit finite advice distribution; probabilities are exact rationals."""

    values: tuple
    probs: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.values) != len(self.probs):
            raise ValueError("values and probs must align")
        if sum(self.probs, Fraction(0)) != 1:
            raise ValueError("advice probabilities must sum to 1")

    def sample_tuple(self, rng: np.random.Generator, reps: int) -> tuple:
        weights = np.array([float(p) for p in self.probs])
        picks = rng.choice(len(self.values), size=reps, p=weights / weights.sum())
        return tuple(self.values[i] for i in picks)


@dataclass(frozen=True)
class MaToyVerifier:
    """Deterministic verifier with randomized advice and a classical witness."""

    n_bits: int
    witness_bits: int
    language: dict[str, int]
    advice: RandomizedAdvice
    accept: Callable[[str, object, str], int]

    def inputs(self) -> list[str]:
        return sorted(self.language)

    def witnesses(self) -> list[str]:
        return [format(z, f"0{self.witness_bits}b") for z in range(2 ** self.witness_bits)]

    def accept_probability(self, x: str, z: str) -> Fraction:
        total = Fraction(0)
        for r, p in zip(self.advice.values, self.advice.probs):
            a = self.accept(x, r, z)
            if a not in (0, 1):
                raise ValueError("verifier must be deterministic (accept in {0, 1})")
            total += p * a
        return total


@dataclass(frozen=True)
class FixedMaAdvice:
    reps: int
    advice_tuple: tuple
    per_pair_error_target: float
    draws_used: int
    certificate: dict[str, int]  # input -> chosen witness index, -1 for reject-all

    def to_json_dict(self) -> dict:
        return {"reps": self.reps, "draws_used": self.draws_used,
                "advice_tuple": [str(r) for r in self.advice_tuple],
                "per_pair_error_target": self.per_pair_error_target,
                "certificate": dict(sorted(self.certificate.items()))}


def _boosted_accept(v: MaToyVerifier, advice_tuple: tuple, x: str, z: str) -> int:
    votes = sum(v.accept(x, r, z) for r in advice_tuple)
    return 1 if votes >= majority_threshold(len(advice_tuple)) else 0


def ma_fix_advice(v: MaToyVerifier, seed: int = 7, max_draws: int = 10_000) -> FixedMaAdvice:
    """Find a fixed advice tuple deciding every input of a toy verifier.

    Boosting: the smallest odd tuple length whose exact majority-vote error on
    every constrained pair drops below 2^-n * 2^-w. Constrained pairs are the
    best witness of each yes-instance and every witness of each no-instance;
    other pairs carry no promise. The tuple itself is found by seeded
    sampling, whose success probability the union bound keeps positive, and
    is re-verified exhaustively before being returned.
    """
    target = Fraction(1, 2 ** v.n_bits * 2 ** v.witness_bits)
    constrained: list[tuple[Fraction, int]] = []  # (base accept prob, desired outcome)
    for x in v.inputs():
        probs = {z: v.accept_probability(x, z) for z in v.witnesses()}
        if v.language[x] == 1:
            best = max(probs.values())
            if best < Fraction(2, 3):
                raise PromiseViolationError(f"yes-instance {x!r} has no witness at 2/3")
            constrained.append((best, 1))
        else:
            for z, p in probs.items():
                if p > Fraction(1, 3):
                    raise PromiseViolationError(f"no-instance {x!r} accepts witness {z!r}")
                constrained.append((p, 0))
    reps = 1
    while True:
        ok = True
        for p, want in constrained:
            maj = majority_threshold(reps)
            err = 1 - binom_tail(reps, p, maj) if want == 1 else binom_tail(reps, p, maj)
            if err >= target:
                ok = False
                break
        if ok:
            break
        reps += 2
        if reps > 501:
            raise PromiseViolationError("boosting does not converge; promise too weak")
    rng = np.random.default_rng(seed)
    for draw in range(1, max_draws + 1):
        advice_tuple = v.advice.sample_tuple(rng, reps)
        cert: dict[str, int] = {}
        good = True
        for x in v.inputs():
            accepted = [z for z in v.witnesses() if _boosted_accept(v, advice_tuple, x, z)]
            if v.language[x] == 1:
                if accepted:
                    cert[x] = int(accepted[0], 2)
                else:
                    good = False
                    break
            else:
                if accepted:
                    good = False
                    break
                cert[x] = -1
        if good:
            return FixedMaAdvice(reps=reps, advice_tuple=advice_tuple,
                                 per_pair_error_target=float(target),
                                 draws_used=draw, certificate=cert)
    raise PromiseViolationError(f"no qualifying advice tuple within {max_draws} draws")


# ---------------------------------------------------------------------------
# quantum witness variant


@dataclass(frozen=True)
class QmaToyVerifier:
    """Verifier with randomized advice and a quantum witness register.

    `witness_operator(x, r)` returns the Hermitian acceptance operator on the
    witness space for one advice draw.
    """

    n_bits: int
    witness_qubits: int
    language: dict[str, int]
    advice: RandomizedAdvice
    witness_operator: Callable[[str, object], np.ndarray]

    def inputs(self) -> list[str]:
        return sorted(self.language)


@dataclass(frozen=True)
class FixedQmaAdvice:
    reps: int
    advice_tuple: tuple
    boosted_witness_qubits: int
    yes_threshold: float
    basis_threshold: float
    draws_used: int
    mixed_state_certificates: dict[str, float]  # no-instance -> optimal acceptance

    def to_json_dict(self) -> dict:
        return {"reps": self.reps, "draws_used": self.draws_used,
                "advice_tuple": [str(r) for r in self.advice_tuple],
                "boosted_witness_qubits": self.boosted_witness_qubits,
                "yes_threshold": self.yes_threshold,
                "basis_threshold": self.basis_threshold,
                "mixed_state_certificates": dict(sorted(self.mixed_state_certificates.items()))}


def _majority_operator(ops: Sequence[np.ndarray]) -> np.ndarray:
    """Acceptance operator of a majority vote over commuting tensor factors.

    DP over copies: track the operator-valued distribution of the accept
    count, then sum the tail at the majority threshold.
    """
    table: list[np.ndarray] = [np.eye(1, dtype=complex)]
    for op in ops:
        dim = op.shape[0]
        miss = np.eye(dim, dtype=complex) - op
        new_table = []
        for c in range(len(table) + 1):
            acc = None
            if c < len(table):
                acc = np.kron(table[c], miss)
            if c > 0:
                hit = np.kron(table[c - 1], op)
                acc = hit if acc is None else acc + hit
            new_table.append(acc)
        table = new_table
    need = majority_threshold(len(ops))
    return hermitize(sum(table[need:]))


def qma_fix_advice(v: QmaToyVerifier, seed: int = 7,
                   max_draws: int = 10_000) -> FixedQmaAdvice:
    """Fixed advice tuple for a quantum-witness toy verifier.

    Parallel repetition replaces in-place amplification, so the boosted
    witness has reps * w qubits. A tuple qualifies when every yes-instance
    clears 1 - 2^-3w' through its optimal witness and every no-instance stays
    at or below 2^-2w' on every computational basis witness; the maximally
    mixed state then caps the optimal no-instance witness at 2^w' times the
    basis maximum, which is checked numerically and must land at or below 1/3.
    """
    w = v.witness_qubits
    reps = 3 if w == 1 else 1
    rng = np.random.default_rng(seed)
    while True:
        w_boost = reps * w
        if w_boost > 10:
            raise PromiseViolationError("boosted witness register exceeds desk scale")
        yes_threshold = 1.0 - 2.0 ** (-3 * w_boost)
        basis_threshold = 2.0 ** (-2 * w_boost)
        for draw in range(1, max_draws + 1):
            advice_tuple = v.advice.sample_tuple(rng, reps)
            certificates: dict[str, float] = {}
            good = True
            for x in v.inputs():
                ops = [np.asarray(v.witness_operator(x, r), dtype=complex)
                       for r in advice_tuple]
                boosted = _majority_operator(ops)
                if v.language[x] == 1:
                    lam, _ = top_eigenpair(boosted)
                    if lam < yes_threshold - ATOL:
                        good = False
                        break
                else:
                    diag_max = float(np.max(boosted.diagonal().real))
                    if diag_max > basis_threshold + ATOL:
                        good = False
                        break
                    lam, _ = top_eigenpair(boosted)
                    if lam > 2 ** w_boost * diag_max + ATOL or lam > 1.0 / 3.0 + ATOL:
                        good = False
                        break
                    certificates[x] = lam
            if good:
                return FixedQmaAdvice(
                    reps=reps, advice_tuple=advice_tuple,
                    boosted_witness_qubits=w_boost,
                    yes_threshold=yes_threshold, basis_threshold=basis_threshold,
                    draws_used=draw, mixed_state_certificates=certificates)
        reps += 2


# ---------------------------------------------------------------------------
# quantum advice with classical witnesses: postselection training


@dataclass(frozen=True)
class QuantumAdviceVerifier:
    """Verifier taking quantum advice and a classical witness.

    The protocol's bob_input register carries the problem input x; the advice
    register holds the advice state (the honest one is `true_advice`).
    """

    protocol: OneWayQmaProtocol
    language: dict[str, int]
    true_advice: StateVector

    def __post_init__(self):
        for x in self.language:
            if len(x) != self.protocol.bob_bits:
                raise ValueError(f"language input {x!r} does not fit the input register")

    def inputs(self) -> list[str]:
        return sorted(self.language)

    def witnesses(self) -> list[str]:
        w = self.protocol.witness_qubits
        return [format(z, f"0{w}b") for z in range(2 ** w)]


@dataclass(frozen=True)
class TrainingSet:
    """Greedy postselection history with survival probabilities p_0 = 1 >= ..."""

    triples: tuple[tuple[str, str, int], ...]
    survivals: tuple[float, ...]
    maximal: bool

    def __post_init__(self):
        if not self.survivals or abs(self.survivals[0] - 1.0) > ATOL:
            raise ValueError("survival sequence must start at p_0 = 1")
        if len(self.survivals) != len(self.triples) + 1:
            raise ValueError("need one survival value per step plus p_0")
        for t in range(len(self.triples)):
            if self.survivals[t + 1] > (2.0 / 3.0) * self.survivals[t] + ATOL:
                raise ValueError(f"step {t + 1} shrinks survival by less than 2/3")

    @property
    def size(self) -> int:
        return len(self.triples)

    def to_json_dict(self) -> dict:
        return {"triples": [list(t) for t in self.triples],
                "survivals": list(self.survivals), "maximal": self.maximal}


@dataclass(frozen=True)
class DecisionRecord:
    x: str
    verdict: int
    lambdas: dict[str, float]


@dataclass(frozen=True)
class TrainedDecider:
    verifier: QuantumAdviceVerifier
    amplified: OneWayQmaProtocol
    ell: int
    advice_matrix: np.ndarray  # trained state on the amplified advice register
    error_rate: float          # certified per-run error of the amplified verifier

    def witness_acceptance(self, x: str, z: str) -> float:
        effect = _witness_effect(self.amplified, x, z)
        val = float(np.real(np.trace(effect @ self.advice_matrix)))
        return min(max(val, 0.0), 1.0)

    def lambdas(self, x: str) -> dict[str, float]:
        w = self.amplified.witness_qubits
        return {format(z, f"0{w}b"): self.witness_acceptance(x, format(z, f"0{w}b"))
                for z in range(2 ** w)}

    def decide(self, x: str) -> DecisionRecord:
        lams = self.lambdas(x)
        best = max(lams.values())
        if best >= 2.0 / 3.0 - ATOL:
            verdict = 1
        elif best <= 1.0 / 3.0 + ATOL:
            verdict = 0
        else:
            raise PromiseViolationError(
                f"input {x!r}: best witness acceptance {best:.4f} falls in (1/3, 2/3)")
        return DecisionRecord(x=x, verdict=verdict, lambdas=lams)


def _rest_dims(p: OneWayQmaProtocol) -> tuple[int, int]:
    dim_a = 2 ** p.alice_qubits
    dim_env = 2 ** (p.witness_qubits + p.ancilla_qubits)
    return dim_a, dim_env


def _env_index(p: OneWayQmaProtocol, z: str) -> int:
    return (int(z, 2) if z else 0) << p.ancilla_qubits


def _branch_kraus(p: OneWayQmaProtocol, x: str, z: str, keep_outcome: int) -> list[np.ndarray]:
    """Kraus operators on the advice register for one postselected run.

    Run the verifier with witness |z> and zeroed ancillas, record the accept
    bit, uncompute; keeping outcome b applies the projector V' Pi_b V on the
    joint space. Tracing the witness and ancilla registers afterwards leaves
    the advice-register map sum_m K_m rho K_m'.
    """
    proj = rest_projector(p, x, outcome=keep_outcome)
    dim_a, dim_env = _rest_dims(p)
    t = proj.reshape(dim_a, dim_env, dim_a, dim_env)
    col = _env_index(p, z)
    return [np.ascontiguousarray(t[:, m, :, col]) for m in range(dim_env)]


def _witness_effect(p: OneWayQmaProtocol, x: str, z: str) -> np.ndarray:
    """Acceptance effect on the advice register for a fixed classical witness."""
    proj = rest_projector(p, x, outcome=1)
    dim_a, dim_env = _rest_dims(p)
    t = proj.reshape(dim_a, dim_env, dim_a, dim_env)
    col = _env_index(p, z)
    return hermitize(t[:, col, :, col])


def _amplify_for_training(v: QuantumAdviceVerifier) -> tuple[OneWayQmaProtocol, int, float]:
    """Inner-repetition count with error 1/A^4 at the fixpoint A = a * ell."""
    base = v.protocol
    base_err = Fraction(0)
    for x in v.inputs():
        label = v.language[x]
        for z in v.witnesses():
            eff = _witness_effect(base, x, z)
            acc = Fraction(float(np.real(
                v.true_advice.amplitudes.conj() @ eff @ v.true_advice.amplitudes
            ))).limit_denominator(10 ** 9)
            if label == 1:
                continue  # completeness is only promised for some witness, checked below
            base_err = max(base_err, acc)
    for x in v.inputs():
        if v.language[x] != 1:
            continue
        best = max(Fraction(float(np.real(
            v.true_advice.amplitudes.conj() @ _witness_effect(base, x, z)
            @ v.true_advice.amplitudes))).limit_denominator(10 ** 9)
            for z in v.witnesses())
        base_err = max(base_err, 1 - best)
    if base_err > Fraction(1, 3):
        raise PromiseViolationError(f"base verifier error {float(base_err):.3f} exceeds 1/3")
    ell = 1
    for _ in range(10):
        a_total = base.alice_qubits * ell
        target = Fraction(1, a_total ** 4) if a_total > 1 else Fraction(1, 3)
        need = min_majority_reps(base_err, target) if base_err > 0 else 1
        if need <= ell:
            err = float(binom_tail(ell, base_err, majority_threshold(ell)))
            return (build_inner(base, ell) if ell > 1 else base), ell, err
        ell = need
    raise PromiseViolationError("amplification fixpoint did not converge")


def qcma_train(v: QuantumAdviceVerifier) -> tuple[TrainingSet, TrainedDecider]:
    """Greedy maximal postselection training from the maximally mixed state.

    Candidates are (input, witness) pairs; rule (b) restricts yes-instances
    to witnesses the true advice accepts with probability >= 1 - error.
    Greedy picks the surviving-probability-minimizing pair (lexicographic
    tie-break) while the ratio stays at or below 2/3, then records
    maximality. Postselection is exact projection plus renormalization;
    zero-probability branches are errors, not skips.
    """
    amplified, ell, err = _amplify_for_training(v)
    dim_a = 2 ** amplified.alice_qubits
    rho = np.eye(dim_a, dtype=complex) / dim_a
    true_amp = _true_advice_amplified(v, ell)
    w = amplified.witness_qubits

    cand: list[tuple[str, str]] = []
    for x in v.inputs():
        for z in _amp_witnesses(v, ell):
            if v.language[x] == 1:
                eff = _witness_effect(amplified, x, z)
                acc = float(np.real(true_amp.conj() @ eff @ true_amp))
                if acc < 1.0 - err - ATOL:
                    continue  # rule (b): yes-instances train only on valid witnesses
            cand.append((x, z))
    triples: list[tuple[str, str, int]] = []
    survivals = [1.0]
    while True:
        best_pair = None
        best_ratio = None
        for x, z in cand:
            label = v.language[x]
            kraus = _branch_kraus(amplified, x, z, keep_outcome=label)
            branch = sum(k @ rho @ k.conj().T for k in kraus)
            ratio = float(np.trace(branch).real)
            if ratio <= 1e-12:
                continue  # degenerate pair: nothing to postselect on
            if ratio <= 2.0 / 3.0 + ATOL and (best_ratio is None or ratio < best_ratio - 1e-12):
                best_ratio = ratio
                best_pair = (x, z, branch)
        if best_pair is None:
            break
        x, z, branch = best_pair
        p_step = float(np.trace(branch).real)
        rho = hermitize(branch) / p_step
        survivals.append(survivals[-1] * p_step)
        triples.append((x, z, v.language[x]))
        if len(triples) > 16 * dim_a:
            raise PromiseViolationError("training set grew past the survival floor")
    training = TrainingSet(triples=tuple(triples), survivals=tuple(survivals), maximal=True)
    decider = TrainedDecider(verifier=v, amplified=amplified, ell=ell,
                             advice_matrix=rho, error_rate=err)
    return training, decider


def _amp_witnesses(v: QuantumAdviceVerifier, ell: int) -> list[str]:
    w = v.protocol.witness_qubits * ell
    return [format(z, f"0{w}b") for z in range(2 ** w)]


def _true_advice_amplified(v: QuantumAdviceVerifier, ell: int) -> np.ndarray:
    amps = v.true_advice.amplitudes
    out = amps
    for _ in range(ell - 1):
        out = np.kron(out, amps)
    return out


def true_advice_wrong_probability(v: QuantumAdviceVerifier, training: TrainingSet,
                                  decider: TrainedDecider) -> float:
    """Exact probability that the true advice errs somewhere along the history."""
    psi = _true_advice_amplified(v, decider.ell)
    rho = np.outer(psi, psi.conj())
    for x, z, label in training.triples:
        kraus = _branch_kraus(decider.amplified, x, z, keep_outcome=label)
        rho = sum(k @ rho @ k.conj().T for k in kraus)
    return min(max(1.0 - float(np.trace(rho).real), 0.0), 1.0)


# ---------------------------------------------------------------------------
# decision amplification over independent trained registers


@dataclass(frozen=True)
class JFoldDecision:
    x: str
    verdict: int
    j_copies: int
    mean_acceptance: float
    boosted_lambdas: dict[str, float]


def j_fold_decision(decider: TrainedDecider, x: str,
                    j_copies: int | None = None) -> JFoldDecision:
    """Majority vote over J independent trained advice registers per witness.

    Boosting separates acceptances into >= 1 - 2^-2w versus <= 2^-2w, so the
    witness-averaged mean S splits at 2^-(w+1) versus 2^-2w and a threshold
    on S decides. A mean inside the forbidden band raises.
    """
    w = decider.amplified.witness_qubits
    if j_copies is None:
        j_copies = min_majority_reps(Fraction(1, 3), Fraction(1, 2 ** (2 * w)))
    maj = majority_threshold(j_copies)
    lams = decider.lambdas(x)
    boosted = {z: float_binom_tail(j_copies, lam, maj) for z, lam in lams.items()}
    s = sum(boosted.values()) / len(boosted)
    accept_floor = 2.0 ** (-(w + 1))
    reject_ceiling = 2.0 ** (-2 * w)
    if s >= accept_floor - ATOL:
        verdict = 1
    elif s <= reject_ceiling + ATOL:
        verdict = 0
    else:
        raise PromiseViolationError(
            f"input {x!r}: mean boosted acceptance {s:.5f} in the forbidden band")
    return JFoldDecision(x=x, verdict=verdict, j_copies=j_copies,
                         mean_acceptance=s, boosted_lambdas=boosted)
