from fractions import Fraction
from math import ceil, log

import numpy as np
import pytest

from demerlab.rac import (
    DEFAULT_MODULUS,
    LinearCode,
    audit_reduced,
    build_code,
    cheat_detection_profile,
    check_fingerprint,
    draw_scheme,
    exact_collision_probability,
    fingerprint,
    honest_merlin,
    rac_round,
    repetition_code,
    rounds_for_soundness,
    tight_reduction,
    wrapped_code_protocol,
)


def oracle_min_distance(generator: np.ndarray) -> int:
    """Independent distance oracle: XOR generator columns per message bit."""
    big_w, w = generator.shape
    cols = [generator[:, j].astype(int) for j in range(w)]
    best = big_w + 1
    for m in range(1, 2 ** w):
        word = np.zeros(big_w, dtype=int)
        for j in range(w):
            if (m >> j) & 1:
                word ^= cols[j]
        best = min(best, int(word.sum()))
    return best


# ---------------------------------------------------------------------------
# codes


def test_repetition_code_distance():
    assert repetition_code(3).verified_min_distance == 3


def test_code_distance_matches_oracle():
    code = build_code(4, rate_factor=4, seed=0)
    assert code.verified_min_distance == oracle_min_distance(code.generator)
    assert code.verified_min_distance >= 2  # ceil(16/8)


def test_default_w8_code_distance():
    code = build_code(8, rate_factor=4, seed=0)
    assert code.block_length == 32
    assert code.verified_min_distance == oracle_min_distance(code.generator)
    assert code.verified_min_distance >= 4


def test_code_rejects_declared_distance_mismatch():
    with pytest.raises(ValueError, match="distance"):
        LinearCode(generator=np.ones((3, 1), dtype=np.uint8), verified_min_distance=2)


def test_code_rejects_rank_deficiency():
    g = np.zeros((4, 2), dtype=np.uint8)
    g[:, 0] = 1
    g[:, 1] = 1
    with pytest.raises(ValueError, match="rank"):
        LinearCode(generator=g, verified_min_distance=4)


# ---------------------------------------------------------------------------
# single round


def test_honest_round_exhaustive_n8():
    code = build_code(4, seed=0)
    rng = np.random.default_rng(0)
    for xv in range(256):
        x = format(xv, "08b")
        for i in range(8):
            t = rac_round(x, i, code, rng=rng)
            assert t.accepted
            assert t.output == int(x[i])
            assert len(t.alice_bits) == 2


def test_honest_substring_indistinguishable():
    code = build_code(4, seed=0)
    t = rac_round("10110100", 2, code,
                  merlin=lambda x, i: honest_merlin(x, i, code),
                  rng=np.random.default_rng(1))
    assert t.accepted


def test_index_out_of_range():
    code = build_code(2, seed=0)
    with pytest.raises(ValueError, match="out of range"):
        rac_round("1010", 4, code)


def test_detection_probability_is_distance_ratio():
    # detection for a cheat at codeword distance e is exactly e / W
    code = build_code(4, seed=0)
    x, i = "10110100", 5
    truth = honest_merlin(x, i, code)
    true_word = code.encode(truth)
    profile = cheat_detection_profile(x, i, code)
    for claim, detection in profile.per_message.items():
        e = int((code.encode(claim) != true_word).sum())
        assert detection == Fraction(e, code.block_length)
    assert profile.min_flipping >= code.distance_ratio


def test_detection_repetition_code_is_certain():
    profile = cheat_detection_profile("1", 0, repetition_code(3))
    assert profile.min_flipping == 1


def test_cheat_detection_frequency_matches_exact():
    # empirical detection frequency over every k equals the exact ratio
    code = build_code(2, seed=1)
    x, i = "1001", 1
    truth = honest_merlin(x, i, code)
    cheat = "".join("1" if c == "0" else "0" for c in truth)
    hits = 0
    for k in range(code.block_length):
        class FixedK:
            def __init__(self, k):
                self.k = k

            def integers(self, lo, hi):
                return self.k
        t = rac_round(x, i, code, merlin=lambda *_: cheat, rng=FixedK(k))
        hits += 0 if t.accepted else 1
    exact = cheat_detection_profile(x, i, code).per_message[cheat]
    assert Fraction(hits, code.block_length) == exact


def test_rounds_for_soundness_formula():
    code = build_code(4, seed=0)
    r = rounds_for_soundness(code)
    delta = code.distance_ratio
    survive = Fraction(1) - delta
    assert survive ** r <= Fraction(1, 3)
    assert survive ** (r - 1) > Fraction(1, 3)
    formula = ceil(log(3) / -log(1 - float(delta)))
    assert r == formula


# ---------------------------------------------------------------------------
# amplify-and-enumerate reduction


def test_reduction_identity_without_witness():
    base = wrapped_code_protocol(build_code(1, rate_factor=3, seed=0), 2)
    base0 = base.__class__(n_bits=base.n_bits, substring_bits=0, n_substrings=base.n_bits,
                           accept_prob=base.accept_prob)
    reduced = tight_reduction(base0)
    assert reduced.copies == 1
    assert reduced.per_claim_error == 0.0


def test_reduction_per_claim_error_target():
    code = build_code(1, rate_factor=3, seed=0)
    base = wrapped_code_protocol(code, 4)
    reduced = tight_reduction(base)
    assert reduced.per_claim_error <= 2.0 ** (-2 * (base.substring_bits + 1))


def test_reduced_protocol_passes_exhaustive_audit_n4():
    code = repetition_code(3)
    base = wrapped_code_protocol(code, 4)
    reduced = tight_reduction(base)
    inputs = [format(v, "04b") for v in range(16)]
    records = audit_reduced(reduced, lambda x, i: int(x[i]), inputs)
    assert max(r.error_bound for r in records) <= 1.0 / 3.0


def test_reduced_protocol_w4_certificates():
    code = build_code(4, seed=0)
    base = wrapped_code_protocol(code, 8)
    reduced = tight_reduction(base)
    inputs = [format(v, "08b") for v in range(256)]
    records = audit_reduced(reduced, lambda x, i: int(x[i]), inputs)
    worst = max(r.error_bound for r in records)
    assert worst <= 1.0 / 3.0
    # soundness certificates stay below the claim-union target
    assert worst <= 2.0 ** (-base.substring_bits - 2) + 1e-12


def test_wrapped_protocol_acceptance_values():
    code = build_code(4, seed=0)
    r = rounds_for_soundness(code)
    base = wrapped_code_protocol(code, 8)
    x, i = "10110100", 5
    honest = honest_merlin(x, i, code)
    if x[i] == "1":
        assert base.accept_prob(x, i, honest) == 1
    cheat_profile = cheat_detection_profile(x, i, code)
    for claim, detection in cheat_profile.per_message.items():
        if claim[i % 4] == "1":
            expected = (Fraction(1) - detection) ** r
            assert base.accept_prob(x, i, claim) == expected


# ---------------------------------------------------------------------------
# fingerprints


def test_fingerprint_self_check(rng):
    scheme = draw_scheme(rng, output_bits=16)
    data = "1011001110001111"
    assert check_fingerprint(data, fingerprint(data, scheme), scheme)


def test_fingerprint_capacity_enforced(rng):
    scheme = draw_scheme(rng, modulus=97, output_bits=3)
    with pytest.raises(ValueError, match="capacity"):
        fingerprint("1" * 64, scheme)


def test_exact_collision_bound_small_modulus():
    # exhaustive over all (alpha, beta): bound 2^(1-m) and pair-independence
    p, m = 13, 2
    base = exact_collision_probability(p, m, 3, 7)
    assert base <= Fraction(2, 2 ** m)
    for x, y in ((0, 1), (5, 12), (2, 9)):
        assert exact_collision_probability(p, m, x, y) == base


def test_single_bit_flip_collision_equals_random_pair():
    # pairwise independence: a one-bit flip collides exactly as often as any
    # other distinct pair
    p, m = 17, 2
    flip = exact_collision_probability(p, m, 0b1010, 0b1011)
    other = exact_collision_probability(p, m, 3, 14)
    assert flip == other


def test_empirical_collision_rate_8bit(rng):
    # all-pairs sampling at m = 6: rate <= 2^-5 plus 3 standard errors
    trials = 10_000
    collisions = 0
    for _ in range(trials):
        scheme = draw_scheme(rng, output_bits=6)
        x = int(rng.integers(0, 256))
        y = int(rng.integers(0, 256))
        while y == x:
            y = int(rng.integers(0, 256))
        xs, ys = format(x, "08b"), format(y, "08b")
        if fingerprint(xs, scheme) == fingerprint(ys, scheme):
            collisions += 1
    bound = 2.0 ** (-5)
    sigma = (bound * (1 - bound) / trials) ** 0.5
    assert collisions / trials <= bound + 3 * sigma


def test_counting_floor_no_short_deterministic_encoding():
    """Falsification of sub-logarithmic messages at N = 8, w = 0.

    A deterministic Merlin-free protocol is a decoder mapping each of the 2^a
    messages to the N-bit string it answers queries by; correctness on every
    (X, i) forces every X to equal some decoder row. Exhausting every decoder
    with a < log2(N) - 1 message bits shows none covers {0,1}^N, so no
    deterministic Alice encoding passes the audit.
    """
    import itertools

    n = 8
    for a in (0, 1):
        best_coverage = 0
        for decoder in itertools.product(range(2 ** n), repeat=2 ** a):
            best_coverage = max(best_coverage, len(set(decoder)))
        assert best_coverage == 2 ** a
        assert best_coverage < 2 ** n  # some X is never decodable


def test_default_modulus_is_prime():
    # deterministic Miller-Rabin witnesses suffice below 3.3 * 10^24; for the
    # 89-bit Mersenne default use sympy as an independent oracle
    import sympy

    assert sympy.isprime(DEFAULT_MODULUS)
