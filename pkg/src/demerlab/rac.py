"""Classical Merlin-aided random-access-code protocols over linear codes.

Alice splits her N-bit string into a substrings of w bits, encodes each with
a random linear code g over GF(2), and sends one uniformly chosen codeword
position k plus the k-th bit of every encoded substring. Merlin claims the
substring containing the queried bit; Bob cross-checks g(claim) against
Alice's bit at position k and outputs the claimed bit only when the check
passes. A cheat at codeword distance e from the truth is caught with
probability exactly e/W per round, so fresh-k repetition drives the
soundness error below any target at rate (1 - d/W) per round.

Also here: the amplify-and-enumerate reduction that removes Merlin from any
such protocol by majority-boosting Alice's message and looping over all 2^w
claims, and a pairwise-independent modular fingerprint for authenticating
long strings with short random advice.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .amplify import binom_tail, majority_threshold, min_majority_reps

__all__ = [
    "LinearCode",
    "RacTranscript",
    "DetectionProfile",
    "MerlinRacProtocol",
    "ReducedRacProtocol",
    "ReducedAuditRecord",
    "FingerprintScheme",
    "build_code",
    "repetition_code",
    "rac_round",
    "honest_merlin",
    "cheat_detection_profile",
    "rounds_for_soundness",
    "wrapped_code_protocol",
    "tight_reduction",
    "audit_reduced",
    "fingerprint",
    "check_fingerprint",
    "draw_scheme",
    "exact_collision_probability",
    "DEFAULT_MODULUS",
]


def _bits_to_array(bits: str) -> np.ndarray:
    return np.array([int(b) for b in bits], dtype=np.uint8)


def _gf2_rank(m: np.ndarray) -> int:
    m = m.copy() % 2
    rows, cols = m.shape
    rank = 0
    for c in range(cols):
        pivot = None
        for r in range(rank, rows):
            if m[r, c]:
                pivot = r
                break
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(rows):
            if r != rank and m[r, c]:
                m[r] ^= m[rank]
        rank += 1
    return rank


@dataclass(frozen=True)
class LinearCode:
    """Generator matrix over GF(2) with an exhaustively verified minimum distance."""

    generator: np.ndarray  # shape (W, w), carries w-bit messages to W-bit words
    verified_min_distance: int
    seed: int | None = None

    def __post_init__(self):
        g = np.asarray(self.generator, dtype=np.uint8) % 2
        object.__setattr__(self, "generator", g)
        w = g.shape[1]
        if w > 16:
            raise ValueError("exhaustive distance verification is capped at w = 16")
        if _gf2_rank(g) != w:
            raise ValueError("generator must have full column rank")
        true_d = _exhaustive_min_distance(g)
        if true_d != self.verified_min_distance:
            raise ValueError(
                f"declared distance {self.verified_min_distance} != true distance {true_d}")

    @property
    def block_length(self) -> int:
        return int(self.generator.shape[0])

    @property
    def message_bits(self) -> int:
        return int(self.generator.shape[1])

    @property
    def distance_ratio(self) -> Fraction:
        return Fraction(self.verified_min_distance, self.block_length)

    def encode(self, message: str | np.ndarray) -> np.ndarray:
        if isinstance(message, str):
            message = _bits_to_array(message)
        return (self.generator @ message) % 2


def _exhaustive_min_distance(g: np.ndarray) -> int:
    w = g.shape[1]
    best = g.shape[0] + 1
    for m in range(1, 2 ** w):
        msg = np.array([(m >> (w - 1 - i)) & 1 for i in range(w)], dtype=np.uint8)
        weight = int(((g @ msg) % 2).sum())
        best = min(best, weight)
    return best


def build_code(w: int, rate_factor: int = 4, seed: int = 0,
               target_ratio: Fraction = Fraction(1, 8), max_tries: int = 500) -> LinearCode:
    """Seeded random linear code with min distance at least target_ratio * W.

    Resamples generators until the exhaustively computed distance clears the
    target; the shipped defaults make that quick for w <= 8.
    """
    if w < 1:
        raise ValueError("message width must be positive")
    big_w = rate_factor * w
    target = -(-big_w * target_ratio.numerator // target_ratio.denominator)  # ceil
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        g = rng.integers(0, 2, size=(big_w, w), dtype=np.uint8)
        if _gf2_rank(g) != w:
            continue
        d = _exhaustive_min_distance(g)
        if d >= max(target, 1):
            return LinearCode(generator=g, verified_min_distance=d, seed=seed)
    raise RuntimeError(f"no code with distance >= {target} found in {max_tries} tries")


def repetition_code(copies: int) -> LinearCode:
    return LinearCode(generator=np.ones((copies, 1), dtype=np.uint8),
                      verified_min_distance=copies)


# ---------------------------------------------------------------------------
# single-round protocol


@dataclass(frozen=True)
class RacTranscript:
    k: int
    alice_bits: tuple[int, ...]
    merlin_message: str
    accepted: bool
    output: int | None


def _substring_index(i: int, w: int) -> tuple[int, int]:
    """Which substring holds bit i, and the bit's offset inside it."""
    return i // w, i % w


def _split(x: str, w: int) -> list[str]:
    if len(x) % w:
        x = x + "0" * (w - len(x) % w)  # zero-pad; queries to pad positions are rejected upstream
    return [x[j:j + w] for j in range(0, len(x), w)]


def honest_merlin(x: str, i: int, code: LinearCode) -> str:
    j, _ = _substring_index(i, code.message_bits)
    return _split(x, code.message_bits)[j]


def rac_round(x: str, i: int, code: LinearCode,
              merlin: Callable[[str, int], str] | None = None,
              rng: np.random.Generator | None = None,
              seed: int = 0) -> RacTranscript:
    """One round: Alice sends (k, k-th bit of each encoded substring), Merlin
    claims a substring, Bob checks the claim's codeword at position k and
    outputs the claimed bit on accept, abstaining on reject."""
    if not 0 <= i < len(x):
        raise ValueError(f"index {i} out of range for {len(x)} bits")
    w = code.message_bits
    rng = rng or np.random.default_rng(seed)
    substrings = _split(x, w)
    words = [code.encode(s) for s in substrings]
    k = int(rng.integers(0, code.block_length))
    alice_bits = tuple(int(word[k]) for word in words)
    claim = merlin(x, i) if merlin is not None else honest_merlin(x, i, code)
    if len(claim) != w:
        raise ValueError(f"Merlin message must have {w} bits")
    j, pos = _substring_index(i, w)
    accepted = int(code.encode(claim)[k]) == alice_bits[j]
    output = int(claim[pos]) if accepted else None
    return RacTranscript(k=k, alice_bits=alice_bits, merlin_message=claim,
                         accepted=accepted, output=output)


@dataclass(frozen=True)
class DetectionProfile:
    x: str
    i: int
    per_message: dict[str, Fraction]
    min_flipping: Fraction

    def to_json_dict(self) -> dict:
        return {"x": self.x, "i": self.i,
                "min_flipping_detection": float(self.min_flipping),
                "messages": {m: float(p) for m, p in sorted(self.per_message.items())}}


def cheat_detection_profile(x: str, i: int, code: LinearCode) -> DetectionProfile:
    """Exact detection probability e/W for every dishonest claim.

    A claim at codeword distance e from the true substring is caught exactly
    when Alice's uniform k lands on a disagreeing position. The reported
    minimum ranges over answer-flipping claims only, the ones that would make
    Bob output the wrong bit.
    """
    w = code.message_bits
    big_w = code.block_length
    truth = honest_merlin(x, i, code)
    true_word = code.encode(truth)
    _, pos = _substring_index(i, w)
    per_message: dict[str, Fraction] = {}
    min_flip = Fraction(1)
    for m in range(2 ** w):
        claim = format(m, f"0{w}b")
        if claim == truth:
            continue
        e = int((code.encode(claim) != true_word).sum())
        detection = Fraction(e, big_w)
        per_message[claim] = detection
        if claim[pos] != truth[pos]:
            min_flip = min(min_flip, detection)
    return DetectionProfile(x=x, i=i, per_message=per_message, min_flipping=min_flip)


def rounds_for_soundness(code: LinearCode, target: Fraction = Fraction(1, 3)) -> int:
    """Fresh-k repetitions needed for worst-case cheat survival <= target."""
    delta = code.distance_ratio
    if delta <= 0:
        raise ValueError("code has zero distance")
    survive = Fraction(1) - delta
    r, acc = 1, survive
    while acc > target:
        r += 1
        acc *= survive
    return r


# ---------------------------------------------------------------------------
# amplify-and-enumerate reduction


@dataclass(frozen=True)
class MerlinRacProtocol:
    """Randomized (a, w) protocol with Merlin, given as an exact acceptance map.

    `accept_prob(x, i, z)` is the probability (over Alice's randomness) that
    Bob accepts claim z as a proof that x_i = 1. Accepting conventionally
    requires the claimed bit to be 1.
    """

    n_bits: int
    substring_bits: int
    n_substrings: int
    accept_prob: Callable[[str, int, str], Fraction]


def wrapped_code_protocol(code: LinearCode, n_bits: int,
                          rounds: int | None = None) -> MerlinRacProtocol:
    """The code-checked round wrapped with fresh-k repetition to 1/3 soundness.

    Acceptance requires all `rounds` checks to pass and the claimed bit to be
    1, so a flipping cheat at codeword distance e survives with probability
    exactly (1 - e/W)^rounds.
    """
    w = code.message_bits
    if n_bits % w:
        raise ValueError("n_bits must be a multiple of the substring width")
    r = rounds if rounds is not None else rounds_for_soundness(code)

    def accept_prob(x: str, i: int, z: str) -> Fraction:
        j, pos = _substring_index(i, w)
        if z[pos] != "1":
            return Fraction(0)
        truth = _split(x, w)[j]
        e = int((code.encode(z) != code.encode(truth)).sum())
        return (Fraction(code.block_length - e, code.block_length)) ** r

    return MerlinRacProtocol(n_bits=n_bits, substring_bits=w,
                             n_substrings=n_bits // w, accept_prob=accept_prob)


@dataclass(frozen=True)
class ReducedRacProtocol:
    """Merlin-free protocol: majority-vote copies, then loop over all claims."""

    base: MerlinRacProtocol
    copies: int
    per_claim_error: float

    def claim_accept_prob(self, x: str, i: int, z: str) -> float:
        p = self.base.accept_prob(x, i, z)
        return float(binom_tail(self.copies, p, majority_threshold(self.copies)))


@dataclass(frozen=True)
class ReducedAuditRecord:
    x: str
    i: int
    value: int
    error_bound: float


def tight_reduction(base: MerlinRacProtocol) -> ReducedRacProtocol:
    """Send enough independent copies that any fixed claim errs with
    probability at most 2^-2(w+1), then have Bob enumerate all 2^w claims and
    output 1 iff some claim's majority vote accepts. With w = 0 there is
    nothing to enumerate and the protocol is returned as a single copy."""
    w = base.substring_bits
    if w == 0:
        return ReducedRacProtocol(base=base, copies=1, per_claim_error=0.0)
    target = Fraction(1, 2 ** (2 * (w + 1)))
    copies = min_majority_reps(Fraction(1, 3), target)
    return ReducedRacProtocol(base=base, copies=copies, per_claim_error=float(target))


def audit_reduced(reduced: ReducedRacProtocol, bit_of: Callable[[str, int], int],
                  inputs: list[str]) -> list[ReducedAuditRecord]:
    """Exhaustive one-sided error certificates for the reduced protocol.

    For x_i = 1 the error is at most the honest claim's majority-miss
    probability; for x_i = 0 it is at most the union over claims asserting 1
    of their majority-accept probabilities. Both are exact binomial tails;
    the union may overcount but never undercounts, so a certificate <= 1/3
    is sound.
    """
    base = reduced.base
    w = base.substring_bits
    maj = majority_threshold(reduced.copies)
    records = []
    tail_cache: dict[Fraction, float] = {}

    def tail(p: Fraction) -> float:
        if p not in tail_cache:
            tail_cache[p] = float(binom_tail(reduced.copies, p, maj))
        return tail_cache[p]

    for x in inputs:
        for i in range(base.n_bits):
            value = bit_of(x, i)
            if value == 1:
                honest = honest_claim(base, x, i)
                p = base.accept_prob(x, i, honest)
                err = 1.0 - tail(p)
            else:
                err = 0.0
                for m in range(2 ** w):
                    z = format(m, f"0{w}b")
                    p = base.accept_prob(x, i, z)
                    if p > 0:
                        err += tail(p)
                err = min(err, 1.0)
            records.append(ReducedAuditRecord(x=x, i=i, value=value, error_bound=err))
    return records


def honest_claim(base: MerlinRacProtocol, x: str, i: int) -> str:
    w = base.substring_bits
    j, _ = _substring_index(i, w)
    return _split(x, w)[j]


# ---------------------------------------------------------------------------
# pairwise-independent fingerprinting

DEFAULT_MODULUS = (1 << 89) - 1  # Mersenne prime, 89-bit capacity


@dataclass(frozen=True)
class FingerprintScheme:
    """One draw of (alpha, beta) for the hash data -> ((alpha*data + beta) mod p) mod 2^m."""

    modulus: int
    output_bits: int
    alpha: int
    beta: int

    def __post_init__(self):
        if not (0 <= self.alpha < self.modulus and 0 <= self.beta < self.modulus):
            raise ValueError("coefficients must lie in [0, modulus)")
        if 2 ** self.output_bits > self.modulus:
            raise ValueError("output range must not exceed the modulus")

    @property
    def capacity_bits(self) -> int:
        return self.modulus.bit_length() - 1


def draw_scheme(rng: np.random.Generator, modulus: int = DEFAULT_MODULUS,
                output_bits: int = 32) -> FingerprintScheme:
    def draw() -> int:
        raw = int(rng.integers(0, 2 ** 63)) << 63 | int(rng.integers(0, 2 ** 63))
        return raw % modulus

    return FingerprintScheme(modulus=modulus, output_bits=output_bits,
                             alpha=draw(), beta=draw())


def _data_to_int(data: str, scheme: FingerprintScheme) -> int:
    if len(data) > scheme.capacity_bits:
        raise ValueError(f"data length {len(data)} exceeds capacity {scheme.capacity_bits}")
    return int(data, 2) if data else 0


def fingerprint(data: str, scheme: FingerprintScheme) -> int:
    value = _data_to_int(data, scheme)
    return ((scheme.alpha * value + scheme.beta) % scheme.modulus) % 2 ** scheme.output_bits


def check_fingerprint(data: str, tag: int, scheme: FingerprintScheme) -> bool:
    return fingerprint(data, scheme) == tag


def exact_collision_probability(modulus: int, output_bits: int,
                                x: int, y: int) -> Fraction:
    """Collision probability over all (alpha, beta) draws, by full enumeration.

    Only sensible for small moduli; used to certify the 2^(1-m) bound and the
    pair-independence of the collision rate at desk scale.
    """
    if x == y:
        raise ValueError("inputs must differ")
    hits = 0
    mask = 2 ** output_bits
    for alpha in range(modulus):
        hx_base = (alpha * x) % modulus
        hy_base = (alpha * y) % modulus
        for beta in range(modulus):
            if ((hx_base + beta) % modulus) % mask == ((hy_base + beta) % modulus) % mask:
                hits += 1
    return Fraction(hits, modulus * modulus)
