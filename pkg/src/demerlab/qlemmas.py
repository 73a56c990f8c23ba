"""Executable damage lemmas for sequences of two-outcome measurements.

Each runner computes the exact probability in question plus the matching
analytic guarantee, so bound audits carry no sampling noise:

* gentle-measurement check: damage to the outcome-0 state is at most
  sqrt(outcome-1 probability);
* union bound: running T measurements in sequence triggers outcome 1 with
  probability at most T * sqrt(eps) when each triggers with probability at
  most eps on the initial state;
* OR bound: if a joint effect accepts some product state rho (x) sigma with
  probability eta, then measuring the effects induced by uniformly random
  basis states of the sigma register accepts rho with probability at least
  (eta - sqrt(N/T))^2 after T >= N/eta^2 rounds.

Exactness strategy: sequential randomized measurement branches exponentially
in T, but for i.i.d. uniform round choices linearity gives
Pr[all outcomes 0] = trace(Phi0^T(rho)) where Phi0 averages the outcome-0
Kraus updates, which is polynomial in T.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .qcore import (
    ATOL,
    DensityMatrix,
    RegisterLayout,
    StateVector,
    TwoOutcomeMeasurement,
    hermitize,
    random_density,
    random_effect,
    tensor_product,
    trace_distance,
)

__all__ = [
    "GoodAsNewReport",
    "MeasurementSequenceReport",
    "good_as_new_check",
    "union_bound_run",
    "or_bound_run",
    "induced_effects",
    "agrees_within_sigma",
    "monte_carlo_any_outcome1",
    "random_union_instance",
    "random_or_instance",
    "projector_or_instance",
]


@dataclass(frozen=True)
class GoodAsNewReport:
    epsilon: float
    damage: float
    bound: float
    passed: bool

    def to_json_dict(self) -> dict:
        return {"lemma": "good-as-new", "params": {},
                "exact": {"epsilon": self.epsilon, "damage": self.damage},
                "bound": self.bound, "pass": self.passed}


@dataclass(frozen=True)
class MeasurementSequenceReport:
    lemma: str
    t_steps: int
    p_any_one: float
    bound: float
    averaged_state_drift: float
    params: dict = field(default_factory=dict)
    passed: bool = True

    def to_json_dict(self) -> dict:
        return {"lemma": self.lemma, "params": dict(self.params),
                "exact": self.p_any_one, "bound": self.bound,
                "drift": self.averaged_state_drift, "pass": self.passed}


def good_as_new_check(rho, m: TwoOutcomeMeasurement) -> GoodAsNewReport:
    """Measure once, keep outcome 0, and compare damage against sqrt(eps)."""
    if isinstance(rho, StateVector):
        rho = rho.density()
    p1 = m.outcome1_probability(rho)
    if 1.0 - p1 <= 1e-15:
        raise ValueError("outcome 0 has probability zero; post-state undefined")
    branch = m.m0 @ rho.matrix @ m.m0.conj().T
    post0 = DensityMatrix(hermitize(branch) / np.trace(branch).real, rho.layout)
    damage = trace_distance(rho, post0)
    bound = sqrt(max(p1, 0.0))
    return GoodAsNewReport(epsilon=p1, damage=damage, bound=bound,
                           passed=damage <= bound + ATOL)


def union_bound_run(rho, seq: list[TwoOutcomeMeasurement],
                    epsilon: float | None = None) -> MeasurementSequenceReport:
    """Exact probability that a measurement sequence ever yields outcome 1.

    Composes the outcome-0 square-root updates, so
    Pr[all 0] = trace(M0_T ... M0_1 rho M0_1' ... M0_T'). If `epsilon` is
    given, every measurement must trigger with probability at most epsilon on
    the initial state; otherwise the maximum measured value is used.
    """
    if isinstance(rho, StateVector):
        rho = rho.density()
    per_step = [m.outcome1_probability(rho) for m in seq]
    measured = max(per_step, default=0.0)
    if epsilon is None:
        epsilon = measured
    elif measured > epsilon + ATOL:
        raise ValueError(
            f"declared epsilon {epsilon} exceeded: a measurement triggers with "
            f"probability {measured} on the initial state")
    survivor = rho.matrix
    unconditioned = rho.matrix
    for m in seq:
        survivor = m.m0 @ survivor @ m.m0.conj().T
        unconditioned = (m.m0 @ unconditioned @ m.m0.conj().T
                         + m.m1 @ unconditioned @ m.m1.conj().T)
    p_any = 1.0 - float(np.trace(survivor).real)
    p_any = min(max(p_any, 0.0), 1.0)
    t = len(seq)
    bound = t * sqrt(max(epsilon, 0.0))
    drift = trace_distance(
        rho, DensityMatrix(hermitize(unconditioned), rho.layout))
    return MeasurementSequenceReport(
        lemma="union-bound", t_steps=t, p_any_one=p_any, bound=bound,
        averaged_state_drift=drift,
        params={"epsilon": float(epsilon), "dim": rho.dim},
        passed=(p_any <= bound + ATOL) and (drift <= bound + ATOL))


def induced_effects(joint: TwoOutcomeMeasurement, dim_a: int, dim_b: int,
                    basis: np.ndarray | None = None) -> list[TwoOutcomeMeasurement]:
    """Effects on the first factor induced by fixing basis states of the second.

    `basis` columns give an orthonormal basis of the second factor; the
    computational basis is the default.
    """
    e = joint.effect
    if e.shape[0] != dim_a * dim_b:
        raise ValueError(f"joint effect dim {e.shape[0]} != {dim_a}*{dim_b}")
    if basis is None:
        basis = np.eye(dim_b, dtype=complex)
    elif np.max(np.abs(basis.conj().T @ basis - np.eye(dim_b))) > 1e-8:
        raise ValueError("supplied basis is not orthonormal")
    t = e.reshape(dim_a, dim_b, dim_a, dim_b)
    out = []
    for j in range(dim_b):
        b = basis[:, j]
        ej = np.einsum("ambk,m,k->ab", t, b.conj(), b)
        out.append(TwoOutcomeMeasurement(hermitize(ej)))
    return out


def or_bound_run(rho, sigma, joint: TwoOutcomeMeasurement, t_steps: int,
                 basis: np.ndarray | None = None) -> MeasurementSequenceReport:
    """Exact accept probability of T induced measurements at random basis states.

    eta is measured from the supplied instance rather than declared, so the
    precondition T >= N/eta^2 can never go stale.
    """
    if isinstance(rho, StateVector):
        rho = rho.density()
    if isinstance(sigma, StateVector):
        sigma = sigma.density()
    joint_state = tensor_product(rho, sigma)
    eta = joint.outcome1_probability(joint_state)
    n_b = sigma.dim
    if eta <= 0.0:
        raise ValueError("joint effect never accepts the product state (eta = 0)")
    if t_steps < n_b / eta ** 2:
        raise ValueError(
            f"need T >= N/eta^2 = {n_b / eta ** 2:.3f}, got T = {t_steps}")
    effects = induced_effects(joint, rho.dim, n_b, basis=basis)
    state = rho.matrix
    for _ in range(t_steps):
        nxt = np.zeros_like(state)
        for m in effects:
            nxt += m.m0 @ state @ m.m0.conj().T
        state = nxt / n_b
    p_any = 1.0 - float(np.trace(state).real)
    p_any = min(max(p_any, 0.0), 1.0)
    bound = (eta - sqrt(n_b / t_steps)) ** 2
    tr = float(np.trace(state).real)
    if tr > 1e-15:
        survivor = DensityMatrix(hermitize(state) / tr, rho.layout)
        drift = trace_distance(rho, survivor)
    else:
        drift = 1.0
    return MeasurementSequenceReport(
        lemma="or-bound", t_steps=t_steps, p_any_one=p_any, bound=bound,
        averaged_state_drift=drift,
        params={"eta": float(eta), "n_witness_states": n_b},
        passed=p_any >= bound - ATOL)


# ---------------------------------------------------------------------------
# Monte-Carlo cross-check and instance generators


def agrees_within_sigma(estimate: float, exact: float, shots: int,
                        z: float = 3.0) -> bool:
    """Binomial z-test of a Monte-Carlo estimate against an exact probability.

    The standard error comes from the exact value, so a degenerate estimate
    (all shots identical) is judged against the true spread rather than a
    vanishing empirical one.
    """
    sigma = sqrt(max(exact * (1.0 - exact), 0.0) / shots)
    return abs(estimate - exact) <= z * sigma + 1e-12


def monte_carlo_any_outcome1(rho, kraus0: list[np.ndarray], t_steps: int,
                             shots: int, rng: np.random.Generator) -> tuple[float, float]:
    """Sample the sequential process and estimate Pr[some outcome is 1].

    Each shot draws a pure state from rho's eigenmixture, then walks T rounds
    picking a uniformly random outcome-0 Kraus operator; the accept chance per
    round is 1 - ||K psi||^2. Returns (estimate, standard error).
    """
    if isinstance(rho, StateVector):
        states = np.tile(rho.amplitudes, (shots, 1))
    else:
        w, v = np.linalg.eigh(hermitize(rho.matrix))
        w = np.clip(w, 0.0, None)
        w /= w.sum()
        picks = rng.choice(len(w), size=shots, p=w)
        states = v.T[picks].copy()
    n_choices = len(kraus0)
    accepted = np.zeros(shots, dtype=bool)
    alive = np.arange(shots)
    for _ in range(t_steps):
        if alive.size == 0:
            break
        choices = rng.integers(0, n_choices, size=alive.size)
        new_states = np.empty_like(states[alive])
        for j in range(n_choices):
            mask = choices == j
            if mask.any():
                new_states[mask] = states[alive[mask]] @ kraus0[j].T
        norms2 = np.einsum("ij,ij->i", new_states, new_states.conj()).real
        norms2 = np.clip(norms2, 0.0, 1.0)
        hits = rng.random(alive.size) > norms2
        accepted[alive[hits]] = True
        keep = ~hits
        survivors = alive[keep]
        states[survivors] = new_states[keep] / np.sqrt(norms2[keep])[:, None]
        alive = survivors
    p_hat = accepted.mean()
    stderr = sqrt(max(p_hat * (1.0 - p_hat), 1e-12) / shots)
    return float(p_hat), float(stderr)


def random_union_instance(rng: np.random.Generator, max_qubits: int = 4,
                          max_steps: int = 8) -> tuple[DensityMatrix, list[TwoOutcomeMeasurement]]:
    """Seeded random (state, measurement sequence) pair for union-bound audits."""
    n = int(rng.integers(1, max_qubits + 1))
    layout = RegisterLayout.of(("r", n))
    rho = random_density(layout, rng)
    t = int(rng.integers(1, max_steps + 1))
    scale_exp = rng.uniform(-4.0, 0.0)
    seq = [random_effect(layout, rng, scale=float(10.0 ** scale_exp * rng.uniform(0.2, 1.0)))
           for _ in range(t)]
    return rho, seq


def random_or_instance(rng: np.random.Generator, witness_qubits: int,
                       alice_qubits: int = 1, min_eta: float = 0.34,
                       ) -> tuple[DensityMatrix, DensityMatrix, TwoOutcomeMeasurement, int]:
    """Random OR-bound instance with measured eta large enough for T = 9N."""
    la = RegisterLayout.of(("a", alice_qubits))
    lb = RegisterLayout.of(("b", witness_qubits))
    n_b = lb.dim
    t_steps = 9 * n_b
    for _ in range(1000):
        rho = random_density(la, rng)
        sigma = random_density(lb, rng)
        joint = random_effect(la.concat(lb), rng, scale=float(rng.uniform(0.5, 1.0)))
        eta = joint.outcome1_probability(tensor_product(rho, sigma))
        if eta >= min_eta:
            return rho, sigma, joint, t_steps
    raise RuntimeError("could not draw an instance with eta above the floor")


def projector_or_instance(witness_qubits: int, eta: float = 2.0 / 3.0,
                          ) -> tuple[DensityMatrix, DensityMatrix, TwoOutcomeMeasurement, int]:
    """Rank-one instance whose measured acceptance equals eta exactly.

    The joint effect projects onto |0> (x) |phi> where |phi> overlaps the
    supplied sigma with probability eta, so eta is hit by construction.
    """
    la = RegisterLayout.of(("a", 1))
    lb = RegisterLayout.of(("b", witness_qubits))
    n_b = lb.dim
    s = np.zeros(n_b, dtype=complex)
    s[0] = 1.0
    phi = np.zeros(n_b, dtype=complex)
    phi[0] = sqrt(eta)
    phi[1] = sqrt(1.0 - eta)
    rho = StateVector(np.array([1.0, 0.0], dtype=complex), la).density()
    sigma = StateVector(s, lb).density()
    proj_a = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    joint = TwoOutcomeMeasurement(np.kron(proj_a, np.outer(phi, phi.conj())),
                                  la.concat(lb))
    return rho, sigma, joint, 9 * n_b
