"""Two-layer error amplification for one-way protocols with a witness.

Inner layer: run the verifier ell times in parallel on fresh advice and
witness copies, output the majority. Outer layer: run the inner verifier u
times on fresh advice blocks while reusing one shared witness register,
count accepts in a reversible tally, uncompute each invocation, and output
the tally majority. The outer layer keeps the witness short while pushing the
certified soundness below 5^-W for W total witness qubits.

All planning arithmetic is exact rational binomial-tail computation; no
asymptotic constants are trusted.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil, comb, exp, isqrt, lgamma, log, log2, log10, sqrt

import numpy as np

from .protocol import (
    ADVICE_REGISTER,
    ANCILLA_REGISTER,
    BOB_REGISTER,
    WITNESS_REGISTER,
    OneWayQmaProtocol,
    protocol_layout,
)
from .qcore import (
    Gate,
    RegisterLayout,
    StateVector,
    UnitaryCircuit,
    counter_threshold_gate,
    increment_gate,
    majority_gate,
)

__all__ = [
    "AmplificationPlan",
    "PlanInfeasibleError",
    "binom_tail",
    "float_binom_tail",
    "majority_threshold",
    "min_majority_reps",
    "plan_amplification",
    "desk_plan",
    "identity_plan",
    "build_inner",
    "build_outer",
]

WIDTH_CAP = 16  # composed protocols must stay statevector-simulable


class PlanInfeasibleError(ValueError):
    """No repetition counts satisfy the requested certificates."""


def majority_threshold(n: int) -> int:
    """Votes needed for a strict majority of n outcomes (n odd avoids ties)."""
    return n // 2 + 1


def binom_tail(n: int, p: Fraction, k: int) -> Fraction:
    """Exact Pr[Binomial(n, p) >= k]."""
    p = Fraction(p)
    if k <= 0:
        return Fraction(1)
    if k > n:
        return Fraction(0)
    q = 1 - p
    return sum(comb(n, j) * p ** j * q ** (n - j) for j in range(k, n + 1))


def _log_binom_tail(n: int, p: float, k: int) -> float:
    """Float log of the binomial tail, used only to bracket exact searches."""
    if p <= 0.0:
        return float("-inf") if k > 0 else 0.0
    if k <= 0:
        return 0.0
    terms = [lgamma(n + 1) - lgamma(j + 1) - lgamma(n - j + 1)
             + j * log(p) + (n - j) * log(1.0 - p) for j in range(k, n + 1)]
    m = max(terms)
    return m + log(sum(exp(t - m) for t in terms))


def float_binom_tail(n: int, p: float, k: int) -> float:
    """Float Pr[Binomial(n, p) >= k] for small n, exact enough at desk scale."""
    if k <= 0:
        return 1.0
    if k > n:
        return 0.0
    return float(sum(comb(n, j) * p ** j * (1.0 - p) ** (n - j) for j in range(k, n + 1)))


def min_majority_reps(base_error: Fraction, target: Fraction, cap: int = 2001) -> int:
    """Smallest odd n whose exact majority-vote error is at most `target`."""
    base_error = Fraction(base_error)
    target = Fraction(target)
    n = 1
    while n <= cap:
        if binom_tail(n, base_error, majority_threshold(n)) <= target:
            return n
        n += 2
    raise PlanInfeasibleError(f"no odd repetition count up to {cap} reaches {float(target):.3e}")


@dataclass(frozen=True)
class AmplificationPlan:
    """Repetition counts plus the exact certificates they earn.

    ell: inner parallel repetitions (odd); u: outer invocations (odd);
    alice_qubits_total = a * ell * u; witness_qubits_total = w * ell.
    `soundness_cert_log10` is the exact conditional-domination certificate
    log10 Pr[tally majority | each invocation accepts w.p. <= inner_error];
    `completeness_union_bound` is u * sqrt(inner_error), the damage-union
    guarantee for a reused honest witness (it may exceed 1/3 for desk plans,
    whose completeness is audited exactly on the built circuit instead).
    """

    base_alice_qubits: int
    base_witness_qubits: int
    ell: int
    u: int
    alice_qubits_total: int
    witness_qubits_total: int
    inner_error: float
    target_inner_error: float
    soundness_cert_log10: float
    soundness_target_log10: float
    completeness_union_bound: float

    def __post_init__(self):
        if self.ell < 1 or self.u < 1:
            raise ValueError("repetition counts must be at least 1")
        if self.alice_qubits_total != self.base_alice_qubits * self.ell * self.u:
            raise ValueError("alice_qubits_total must equal a * ell * u")
        if self.witness_qubits_total != self.base_witness_qubits * self.ell:
            raise ValueError("witness_qubits_total must equal w * ell")

    @property
    def soundness_target(self) -> float:
        return 5.0 ** (-self.witness_qubits_total)

    def to_json_dict(self) -> dict:
        return {
            "ell": self.ell,
            "u": self.u,
            "alice_qubits_total": self.alice_qubits_total,
            "witness_qubits_total": self.witness_qubits_total,
            "inner_error": self.inner_error,
            "target_inner_error": self.target_inner_error,
            "soundness_cert_log10": self.soundness_cert_log10,
            "soundness_target_log10": self.soundness_target_log10,
            "completeness_union_bound": self.completeness_union_bound,
        }


def _make_plan(a: int, w: int, ell: int, u: int, eps: Fraction,
               target_eps: Fraction, cert: Fraction) -> AmplificationPlan:
    w_total = w * ell
    if cert > 0:
        cert_log10 = (log10(cert.numerator) - log10(cert.denominator))
    else:
        cert_log10 = float("-inf")
    return AmplificationPlan(
        base_alice_qubits=a,
        base_witness_qubits=w,
        ell=ell,
        u=u,
        alice_qubits_total=a * ell * u,
        witness_qubits_total=w_total,
        inner_error=float(eps),
        target_inner_error=float(target_eps),
        soundness_cert_log10=cert_log10,
        soundness_target_log10=-w_total * log10(5.0),
        completeness_union_bound=float(u) * sqrt(float(eps)),
    )


def _forced_odd(x: int) -> int:
    return x if x % 2 == 1 else x + 1


def _find_u(eps: Fraction, w_total: int, u_cap: int) -> tuple[int, Fraction] | None:
    """Smallest odd u <= u_cap with exact Pr[Bin(u, eps) >= maj] <= 5^-w_total."""
    target = Fraction(1, 5 ** w_total)
    log_target = -w_total * log(5.0)
    start = None
    for u in range(1, u_cap + 1, 2):
        if _log_binom_tail(u, float(eps), majority_threshold(u)) <= log_target + 2.0:
            start = u
            break
    if start is None:
        return None
    for u in range(start, u_cap + 1, 2):
        cert = binom_tail(u, eps, majority_threshold(u))
        if cert <= target:
            return u, cert
    return None


def plan_amplification(a: int, w: int, c_ell: float | None = None,
                       c_u: float | None = None, base_error: Fraction = Fraction(1, 3),
                       max_ell: int = 2001) -> AmplificationPlan:
    """Smallest (ell, u) meeting the inner-error target and both outer certificates.

    The inner target is 1/(1000 w^3); u must satisfy the completeness union
    bound u * sqrt(eps) < 1/3 and the exact soundness certificate
    Pr[Bin(u, eps) >= maj] <= 5^-(w*ell). The smallest ell certifying the
    inner target alone admits no valid u at small w, so the search raises ell
    until the window between the two u-constraints opens. Passing c_ell or
    c_u pins ell = ceil(c_ell * log2(w)) or u = ceil(c_u * W) instead (forced
    odd); infeasible pins raise PlanInfeasibleError.
    """
    if w < 2:
        raise ValueError("amplification planning requires witness width w >= 2")
    target_eps = Fraction(1, 1000 * w ** 3)
    base_error = Fraction(base_error)

    if c_ell is not None:
        ell_candidates = [_forced_odd(max(1, ceil(c_ell * log2(max(w, 2)))))]
    else:
        ell0 = min_majority_reps(base_error, target_eps, cap=max_ell)
        ell_candidates = range(ell0, max_ell + 1, 2)

    for ell in ell_candidates:
        eps = binom_tail(ell, base_error, majority_threshold(ell))
        if eps > target_eps:
            raise PlanInfeasibleError(
                f"pinned ell={ell} does not certify inner error {float(target_eps):.3e}")
        w_total = w * ell
        # completeness cap: u * sqrt(eps) < 1/3, kept rational as u^2 * eps < 1/9
        u_cap = isqrt(int(Fraction(1, 9) / eps)) + 1
        while u_cap >= 1 and u_cap * u_cap * eps >= Fraction(1, 9):
            u_cap -= 1
        if u_cap % 2 == 0:
            u_cap -= 1
        if u_cap < 1:
            continue
        if c_u is not None:
            u = _forced_odd(max(1, ceil(c_u * w_total)))
            cert = binom_tail(u, eps, majority_threshold(u))
            if u <= u_cap and cert <= Fraction(1, 5 ** w_total):
                return _make_plan(a, w, ell, u, eps, target_eps, cert)
            raise PlanInfeasibleError(f"pinned u={u} fails a certificate at ell={ell}")
        found = _find_u(eps, w_total, u_cap)
        if found is not None:
            u, cert = found
            return _make_plan(a, w, ell, u, eps, target_eps, cert)
    raise PlanInfeasibleError("no feasible (ell, u) within the search cap")


def identity_plan(a: int, w: int, base_error: Fraction = Fraction(1, 3)) -> AmplificationPlan:
    """Trivial (ell=1, u=1) plan for protocols that already meet their targets.

    Used when a toy's native soundness is at or below 5^-w, which the
    witness-enumeration loop audits independently.
    """
    eps = Fraction(base_error)
    return _make_plan(a, w, 1, 1, eps, eps, eps)


def desk_plan(a: int, w: int, base_error: Fraction = Fraction(1, 3),
              max_reps: int = 99) -> AmplificationPlan:
    """Smallest (ell, u) whose exact certificates reach soundness 5^-(w*ell).

    Desk-scale variant: drops the 1/(1000 w^3) inner target and the union
    completeness constraint (completeness is audited exactly on the built
    protocol instead), so the resulting widths stay simulable. Works for
    w >= 1.
    """
    if w < 1:
        raise ValueError("witness width must be at least 1")
    base_error = Fraction(base_error)
    for ell in range(1, max_reps + 1, 2):
        eps = binom_tail(ell, base_error, majority_threshold(ell))
        target = Fraction(1, 5 ** (w * ell))
        for u in range(1, max_reps + 1, 2):
            cert = binom_tail(u, eps, majority_threshold(u))
            if cert <= target:
                return _make_plan(a, w, ell, u, eps, Fraction(1, 1000 * w ** 3), cert)
    raise PlanInfeasibleError("no desk-scale plan within the repetition cap")


# ---------------------------------------------------------------------------
# circuit construction


def _register_map(src: OneWayQmaProtocol, dst_layout: RegisterLayout,
                  advice_block: int, witness_block: int,
                  ancilla_block: int) -> dict[int, int]:
    """Map a base-protocol qubit index into a composed layout."""
    mapping: dict[int, int] = {}
    src_layout = src.layout
    for name, _ in src_layout.registers:
        src_qubits = src_layout.qubits(name)
        if name == BOB_REGISTER:
            dst = dst_layout.qubits(BOB_REGISTER)[:len(src_qubits)]
        elif name == ADVICE_REGISTER:
            off = dst_layout.offset(ADVICE_REGISTER) + advice_block
            dst = range(off, off + len(src_qubits))
        elif name == WITNESS_REGISTER:
            off = dst_layout.offset(WITNESS_REGISTER) + witness_block
            dst = range(off, off + len(src_qubits))
        else:
            off = dst_layout.offset(ANCILLA_REGISTER) + ancilla_block
            dst = range(off, off + len(src_qubits))
        mapping.update(dict(zip(src_qubits, dst)))
    return mapping


def _tensor_power_encoder(base_encode, base_qubits: int, copies: int):
    def encode(x: str) -> StateVector:
        amps = base_encode(x).amplitudes
        out = amps
        for _ in range(copies - 1):
            out = np.kron(out, amps)
        return StateVector(out, RegisterLayout.of((ADVICE_REGISTER, base_qubits * copies)))
    return encode


def build_inner(p: OneWayQmaProtocol, ell: int) -> OneWayQmaProtocol:
    """Parallel ell-fold repetition with a reversible majority vote.

    Advice and witness registers become ell-fold copies; each copy keeps its
    own ancilla block, and one fresh ancilla qubit collects the majority of
    the per-copy accept qubits.
    """
    if ell < 1:
        raise ValueError("ell must be at least 1")
    a, w, k = p.alice_qubits, p.witness_qubits, p.ancilla_qubits
    layout = protocol_layout(p.bob_bits, a * ell, w * ell, k * ell + 1)
    if layout.n_qubits > WIDTH_CAP:
        raise ValueError(f"inner protocol needs {layout.n_qubits} qubits, cap is {WIDTH_CAP}")
    gates: list[Gate] = []
    accepts: list[int] = []
    for i in range(ell):
        m = _register_map(p, layout, advice_block=i * a, witness_block=i * w,
                          ancilla_block=i * k)
        gates.extend(g.remapped(m) for g in p.verifier.gates)
        accepts.append(m[p.accept_qubit])
    out_qubit = layout.offset(ANCILLA_REGISTER) + k * ell
    gates.append(majority_gate(accepts, out_qubit))
    circuit = UnitaryCircuit(layout.n_qubits, tuple(gates), layout)
    return OneWayQmaProtocol(
        bob_bits=p.bob_bits,
        alice_qubits=a * ell,
        witness_qubits=w * ell,
        ancilla_qubits=k * ell + 1,
        verifier=circuit,
        accept_qubit=out_qubit,
        alice_encode=_tensor_power_encoder(p.advice_state, a, ell),
    )


def build_outer(inner: OneWayQmaProtocol, u: int) -> OneWayQmaProtocol:
    """u sequential invocations sharing one witness register and ancilla block.

    Each invocation consumes a fresh advice copy, adds its accept bit to a
    log2(u+1)-bit tally via a controlled reversible increment, and is then
    uncomputed gate-by-gate; the final accept qubit holds the tally majority.
    """
    if u < 1:
        raise ValueError("u must be at least 1")
    a_in, w_in, k_in = inner.alice_qubits, inner.witness_qubits, inner.ancilla_qubits
    tally_bits = u.bit_length()  # holds counts 0..u
    anc_total = k_in + tally_bits + 1
    layout = protocol_layout(inner.bob_bits, a_in * u, w_in, anc_total)
    if layout.n_qubits > WIDTH_CAP:
        raise ValueError(f"outer protocol needs {layout.n_qubits} qubits, cap is {WIDTH_CAP}")
    anc_off = layout.offset(ANCILLA_REGISTER)
    tally = tuple(range(anc_off + k_in, anc_off + k_in + tally_bits))
    out_qubit = anc_off + k_in + tally_bits
    gates: list[Gate] = []
    for t in range(u):
        m = _register_map(inner, layout, advice_block=t * a_in, witness_block=0,
                          ancilla_block=0)
        block = [g.remapped(m) for g in inner.verifier.gates]
        gates.extend(block)
        gates.append(increment_gate(tally, controls=(m[inner.accept_qubit],)))
        gates.extend(g.inverse() for g in reversed(block))
    gates.append(counter_threshold_gate(tally, out_qubit, majority_threshold(u)))
    circuit = UnitaryCircuit(layout.n_qubits, tuple(gates), layout)
    return OneWayQmaProtocol(
        bob_bits=inner.bob_bits,
        alice_qubits=a_in * u,
        witness_qubits=w_in,
        ancilla_qubits=anc_total,
        verifier=circuit,
        accept_qubit=out_qubit,
        alice_encode=_tensor_power_encoder(inner.advice_state, a_in, u),
    )
