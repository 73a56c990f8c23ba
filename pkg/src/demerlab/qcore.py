"""Dense linear algebra over explicitly laid-out qubit registers.

States, density matrices, two-outcome measurements, and gate-list unitary
circuits, all as small immutable values backed by numpy arrays. Every
operation is a pure function, so callers may fan out over independent
instances freely. Qubit 0 is the most significant bit of the basis index,
i.e. ``basis_state(layout, "011")`` puts amplitude 1 at index 3.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

ATOL = 1e-9              # construction / identity tolerance
EIG_ATOL = 1e-8          # eigenpair residual tolerance
MAX_QUBITS = 16          # statevector paths are capped at 2**16 amplitudes
DENSITY_MAX_QUBITS = 12  # dense density matrices are capped at 2**12 x 2**12

__all__ = [
    "ATOL",
    "EIG_ATOL",
    "MAX_QUBITS",
    "DENSITY_MAX_QUBITS",
    "RegisterLayout",
    "StateVector",
    "DensityMatrix",
    "TwoOutcomeMeasurement",
    "MeasurementResult",
    "Gate",
    "UnitaryCircuit",
    "basis_state",
    "zero_state",
    "maximally_mixed",
    "random_state",
    "random_density",
    "random_effect",
    "tensor_product",
    "partial_trace",
    "fidelity",
    "trace_distance",
    "measure_two_outcome",
    "top_eigenpair",
    "psd_sqrt",
    "trace_norm",
    "hermitize",
    "gate",
    "x_gate",
    "h_gate",
    "ry_gate",
    "rz_gate",
    "cnot",
    "swap_gate",
    "mcx",
    "increment_gate",
    "counter_threshold_gate",
    "majority_gate",
    "matrix_to_json",
    "matrix_from_json",
]


# ---------------------------------------------------------------------------
# register layouts


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered named registers; concatenation order defines qubit indices."""

    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [n for n, _ in self.registers]
        if len(set(names)) != len(names):
            raise ValueError(f"register-name collision in {names}")
        for name, width in self.registers:
            if not isinstance(width, int) or width <= 0:
                raise ValueError(f"register {name!r} must have positive width, got {width}")
        if self.n_qubits > MAX_QUBITS:
            raise ValueError(f"layout needs {self.n_qubits} qubits, cap is {MAX_QUBITS}")

    @classmethod
    def of(cls, *registers: tuple[str, int]) -> "RegisterLayout":
        return cls(tuple((str(n), int(w)) for n, w in registers))

    @property
    def n_qubits(self) -> int:
        return sum(w for _, w in self.registers)

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.registers)

    def width(self, name: str) -> int:
        for n, w in self.registers:
            if n == name:
                return w
        raise ValueError(f"unknown register name {name!r}")

    def offset(self, name: str) -> int:
        off = 0
        for n, w in self.registers:
            if n == name:
                return off
            off += w
        raise ValueError(f"unknown register name {name!r}")

    def qubits(self, name: str) -> tuple[int, ...]:
        off = self.offset(name)
        return tuple(range(off, off + self.width(name)))

    def concat(self, other: "RegisterLayout") -> "RegisterLayout":
        return RegisterLayout(self.registers + other.registers)

    def keep_drop(self, keep: Iterable[str]) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Global qubit indices split into (kept, dropped) by register name."""
        keep = set(keep)
        unknown = keep - set(self.names)
        if unknown:
            raise ValueError(f"unknown register name {sorted(unknown)}")
        kept, dropped = [], []
        for name in self.names:
            (kept if name in keep else dropped).extend(self.qubits(name))
        return tuple(kept), tuple(dropped)

    def to_json(self) -> list[list]:
        return [[n, w] for n, w in self.registers]


def _layout(regs) -> RegisterLayout:
    if isinstance(regs, RegisterLayout):
        return regs
    return RegisterLayout.of(*regs)


# ---------------------------------------------------------------------------
# numeric helpers


def hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2.0


def _check_hermitian(m: np.ndarray, what: str, atol: float = ATOL):
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} must be square, got {m.shape}")
    if np.max(np.abs(m - m.conj().T)) > atol:
        raise ValueError(f"non-Hermitian input for {what}")


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Principal square root of a PSD Hermitian matrix via eigendecomposition."""
    w, v = np.linalg.eigh(hermitize(m))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def trace_norm(m: np.ndarray) -> float:
    """Trace norm of a Hermitian matrix: sum of absolute eigenvalues."""
    return float(np.sum(np.abs(np.linalg.eigvalsh(hermitize(m)))))


def top_eigenpair(h: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and a unit eigenvector of a Hermitian matrix."""
    h = np.asarray(h, dtype=complex)
    _check_hermitian(h, "top_eigenpair")
    w, v = np.linalg.eigh(hermitize(h))
    lam, vec = float(w[-1]), v[:, -1]
    resid = float(np.linalg.norm(h @ vec - lam * vec))
    if resid > EIG_ATOL:
        raise ArithmeticError(f"eigenpair residual {resid:.3e} exceeds {EIG_ATOL}")
    return lam, vec


def matrix_to_json(m: np.ndarray) -> list:
    """Debug serialization: nested lists of [re, im] pairs."""
    m = np.asarray(m, dtype=complex)
    if m.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in m]
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(data: list) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class StateVector:
    """Pure state with unit L2 norm on an explicit register layout."""

    amplitudes: np.ndarray
    layout: RegisterLayout

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape[0] != self.layout.dim:
            raise ValueError(
                f"amplitude length {amps.shape[0]} does not match layout dim {self.layout.dim}")
        if abs(np.linalg.norm(amps) - 1.0) > ATOL:
            raise ValueError(f"state norm {np.linalg.norm(amps)} is not 1 within {ATOL}")

    @property
    def dim(self) -> int:
        return self.layout.dim

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.layout)

    def tensor(self, other: "StateVector") -> "StateVector":
        return StateVector(np.kron(self.amplitudes, other.amplitudes),
                           self.layout.concat(other.layout))

    def tensor_power(self, n: int, rename: Callable[[str, int], str] | None = None) -> "StateVector":
        """n-fold tensor power; register copies renamed to stay collision-free."""
        rename = rename or (lambda name, i: f"{name}_{i}")
        out = None
        for i in range(n):
            regs = RegisterLayout.of(*[(rename(nm, i), w) for nm, w in self.layout.registers])
            piece = StateVector(self.amplitudes, regs)
            out = piece if out is None else out.tensor(piece)
        if out is None:
            raise ValueError("tensor power needs n >= 1")
        return out

    def to_json_dict(self) -> dict:
        return {"layout": self.layout.to_json(), "amplitudes": matrix_to_json(self.amplitudes)}


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, PSD matrix on an explicit register layout."""

    matrix: np.ndarray
    layout: RegisterLayout

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if self.layout.n_qubits > DENSITY_MAX_QUBITS:
            raise ValueError(f"dense density matrices are capped at {DENSITY_MAX_QUBITS} qubits")
        d = self.layout.dim
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} does not match layout dim {d}")
        if np.max(np.abs(m - m.conj().T)) > ATOL:
            raise ValueError("density matrix is not Hermitian within tolerance")
        if abs(np.trace(m).real - 1.0) > ATOL or abs(np.trace(m).imag) > ATOL:
            raise ValueError(f"density matrix trace {np.trace(m)} is not 1 within {ATOL}")
        if np.min(np.linalg.eigvalsh(hermitize(m))) < -ATOL:
            raise ValueError("density matrix has eigenvalue below -1e-9")

    @property
    def dim(self) -> int:
        return self.layout.dim

    def to_json_dict(self) -> dict:
        return {"layout": self.layout.to_json(), "matrix": matrix_to_json(self.matrix)}


def _as_density(state) -> DensityMatrix:
    if isinstance(state, DensityMatrix):
        return state
    if isinstance(state, StateVector):
        return state.density()
    raise TypeError(f"expected StateVector or DensityMatrix, got {type(state).__name__}")


def basis_state(layout, bits: str | int) -> StateVector:
    layout = _layout(layout)
    if isinstance(bits, str):
        if len(bits) != layout.n_qubits:
            raise ValueError(f"bit string length {len(bits)} != {layout.n_qubits} qubits")
        index = int(bits, 2) if bits else 0
    else:
        index = int(bits)
    amps = np.zeros(layout.dim, dtype=complex)
    amps[index] = 1.0
    return StateVector(amps, layout)


def zero_state(layout) -> StateVector:
    layout = _layout(layout)
    return basis_state(layout, 0)


def maximally_mixed(layout) -> DensityMatrix:
    layout = _layout(layout)
    return DensityMatrix(np.eye(layout.dim, dtype=complex) / layout.dim, layout)


def random_state(layout, rng: np.random.Generator) -> StateVector:
    layout = _layout(layout)
    z = rng.normal(size=layout.dim) + 1j * rng.normal(size=layout.dim)
    return StateVector(z / np.linalg.norm(z), layout)


def random_density(layout, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    layout = _layout(layout)
    rank = rank or layout.dim
    g = rng.normal(size=(layout.dim, rank)) + 1j * rng.normal(size=(layout.dim, rank))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real, layout)


def random_effect(layout, rng: np.random.Generator, scale: float | None = None) -> "TwoOutcomeMeasurement":
    """Random effect operator 0 <= E <= scale * I (scale defaults to uniform)."""
    layout = _layout(layout)
    g = rng.normal(size=(layout.dim, layout.dim)) + 1j * rng.normal(size=(layout.dim, layout.dim))
    m = g @ g.conj().T
    m /= np.max(np.linalg.eigvalsh(m))
    if scale is None:
        scale = float(rng.uniform(0.0, 1.0))
    return TwoOutcomeMeasurement(m * scale, layout)


# ---------------------------------------------------------------------------
# operations on states


def tensor_product(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    """Kronecker product; layouts concatenate and must not share names."""
    a, b = _as_density(a), _as_density(b)
    return DensityMatrix(np.kron(a.matrix, b.matrix), a.layout.concat(b.layout))


def partial_trace(rho: DensityMatrix, keep: Iterable[str]) -> DensityMatrix:
    """Trace out every register not named in `keep`."""
    rho = _as_density(rho)
    kept, dropped = rho.layout.keep_drop(keep)
    n = rho.layout.n_qubits
    t = rho.matrix.reshape([2] * (2 * n))
    # pair each dropped row axis with its column axis, keep the rest open
    row_labels = list(range(n))
    col_labels = [i + n if i in kept else i for i in range(n)]
    out_labels = [i for i in kept] + [i + n for i in kept]
    reduced = np.einsum(t, row_labels + col_labels, out_labels)
    new_regs = tuple((nm, w) for nm, w in rho.layout.registers if nm in set(keep))
    d = 2 ** len(kept)
    return DensityMatrix(hermitize(reduced.reshape(d, d)), RegisterLayout(new_regs))


def fidelity(rho, sigma) -> float:
    """Fidelity as the trace norm of sqrt(rho) sqrt(sigma).

    Equals |<psi|phi>| on pure states, 1 iff the states coincide.
    """
    rho, sigma = _as_density(rho), _as_density(sigma)
    if rho.dim != sigma.dim:
        raise ValueError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
    s = psd_sqrt(rho.matrix) @ psd_sqrt(sigma.matrix)
    f = float(np.sum(np.linalg.svd(s, compute_uv=False)))
    return min(max(f, 0.0), 1.0)


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of rho - sigma."""
    rho, sigma = _as_density(rho), _as_density(sigma)
    if rho.dim != sigma.dim:
        raise ValueError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
    return 0.5 * trace_norm(rho.matrix - sigma.matrix)


# ---------------------------------------------------------------------------
# two-outcome measurements


@dataclass(frozen=True)
class TwoOutcomeMeasurement:
    """Effect operator E with 0 <= E <= I and its square-root update pair.

    The Kraus pair M1 = sqrt(E), M0 = sqrt(I - E) is computed in E's
    eigenbasis once at construction, so M0'M0 + M1'M1 = I to machine
    precision. The square-root update is the minimally disturbing one; it
    attains the gentle-measurement damage bound with equality on projectors.
    """

    effect: np.ndarray
    layout: RegisterLayout | None = None
    m0: np.ndarray = field(init=False, repr=False)
    m1: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        e = np.asarray(self.effect, dtype=complex)
        _check_hermitian(e, "effect operator")
        w, v = np.linalg.eigh(hermitize(e))
        if np.min(w) < -ATOL or np.max(w) > 1.0 + ATOL:
            raise ValueError(f"effect spectrum [{w.min():.3e}, {w.max():.3e}] outside [0, 1]")
        w = np.clip(w, 0.0, 1.0)
        object.__setattr__(self, "effect", e)
        object.__setattr__(self, "m1", (v * np.sqrt(w)) @ v.conj().T)
        object.__setattr__(self, "m0", (v * np.sqrt(1.0 - w)) @ v.conj().T)
        if self.layout is not None and self.layout.dim != e.shape[0]:
            raise ValueError("effect dimension does not match layout")

    @property
    def dim(self) -> int:
        return self.effect.shape[0]

    def outcome1_probability(self, rho) -> float:
        rho = _as_density(rho)
        if rho.dim != self.dim:
            raise ValueError(f"dimension mismatch: {rho.dim} vs {self.dim}")
        return float(np.real(np.trace(self.effect @ rho.matrix)))


@dataclass(frozen=True)
class MeasurementResult:
    p1: float
    post0: DensityMatrix | None
    post1: DensityMatrix | None

    @property
    def p0(self) -> float:
        return 1.0 - self.p1


def measure_two_outcome(rho, m: TwoOutcomeMeasurement) -> MeasurementResult:
    """Apply the square-root update; a zero-probability branch comes back None."""
    rho = _as_density(rho)
    if rho.dim != m.dim:
        raise ValueError(f"dimension mismatch: {rho.dim} vs {m.dim}")
    p1 = m.outcome1_probability(rho)
    p1 = min(max(p1, 0.0), 1.0)
    posts: list[DensityMatrix | None] = []
    for kraus, p in ((m.m0, 1.0 - p1), (m.m1, p1)):
        if p <= 1e-15:
            posts.append(None)
            continue
        branch = kraus @ rho.matrix @ kraus.conj().T
        posts.append(DensityMatrix(hermitize(branch) / np.trace(branch).real, rho.layout))
    return MeasurementResult(p1=p1, post0=posts[0], post1=posts[1])


# ---------------------------------------------------------------------------
# gate-list circuits


def _apply_operator(amps: np.ndarray, op: np.ndarray, positions: Sequence[int], n: int) -> np.ndarray:
    """Apply a 2^k x 2^k operator to the given qubit axes.

    `amps` is a flat vector of length 2^n, or a (2^n, B) batch whose axis 0
    is the state index.
    """
    k = len(positions)
    batched = amps.ndim == 2
    shape = [2] * n + ([amps.shape[1]] if batched else [])
    t = amps.reshape(shape)
    t = np.moveaxis(t, list(positions), list(range(k)))
    rest = t.shape[k:]
    t = op @ t.reshape(2 ** k, -1)
    t = np.moveaxis(t.reshape([2] * k + list(rest)), list(range(k)), list(positions))
    return t.reshape(amps.shape)


@dataclass(frozen=True)
class Gate:
    """A unitary on named target qubits, optionally with classical-pattern controls."""

    name: str
    targets: tuple[int, ...]
    matrix: np.ndarray
    controls: tuple[int, ...] = ()
    control_values: tuple[int, ...] = ()

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "controls", tuple(int(c) for c in self.controls))
        vals = self.control_values or tuple(1 for _ in self.controls)
        object.__setattr__(self, "control_values", tuple(int(v) for v in vals))
        k = len(self.targets)
        if m.shape != (2 ** k, 2 ** k):
            raise ValueError(f"gate {self.name!r}: matrix shape {m.shape} for {k} targets")
        if len(self.control_values) != len(self.controls):
            raise ValueError(f"gate {self.name!r}: control/value length mismatch")
        qubits = self.controls + self.targets
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"gate {self.name!r}: repeated qubit in {qubits}")
        if np.max(np.abs(m @ m.conj().T - np.eye(2 ** k))) > ATOL:
            raise ValueError(f"gate {self.name!r} is not unitary within {ATOL}")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.controls + self.targets

    def full_operator(self) -> np.ndarray:
        """Matrix over (controls + targets), controls as the high-order bits."""
        if not self.controls:
            return self.matrix
        c, k = len(self.controls), len(self.targets)
        op = np.eye(2 ** (c + k), dtype=complex)
        pat = int("".join(str(v) for v in self.control_values), 2)
        lo, hi = pat * 2 ** k, (pat + 1) * 2 ** k
        op[lo:hi, lo:hi] = self.matrix
        return op

    def inverse(self) -> "Gate":
        return Gate(self.name + "^-1", self.targets, self.matrix.conj().T,
                    self.controls, self.control_values)

    def remapped(self, index_map: dict[int, int]) -> "Gate":
        return Gate(self.name,
                    tuple(index_map[t] for t in self.targets),
                    self.matrix,
                    tuple(index_map[c] for c in self.controls),
                    self.control_values)

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "targets": list(self.targets),
            "controls": list(self.controls),
            "control_values": list(self.control_values),
            "matrix": matrix_to_json(self.matrix),
        }


@dataclass(frozen=True)
class UnitaryCircuit:
    """Ordered gate list over a fixed qubit count, optionally register-laid-out."""

    n_qubits: int
    gates: tuple[Gate, ...]
    layout: RegisterLayout | None = None

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.layout is not None and self.layout.n_qubits != self.n_qubits:
            raise ValueError("layout width does not match circuit qubit count")
        for g in self.gates:
            if any(q >= self.n_qubits or q < 0 for q in g.qubits):
                raise ValueError(f"gate {g.name!r} targets qubit outside 0..{self.n_qubits - 1}")

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    def apply(self, amps: np.ndarray) -> np.ndarray:
        """Run the circuit on a flat statevector (or a batch of columns)."""
        out = np.asarray(amps, dtype=complex)
        for g in self.gates:
            out = _apply_operator(out, g.full_operator(), g.qubits, self.n_qubits)
        return out

    def apply_to_state(self, state: StateVector) -> StateVector:
        return StateVector(self.apply(state.amplitudes), state.layout)

    def inverse(self) -> "UnitaryCircuit":
        return UnitaryCircuit(self.n_qubits, tuple(g.inverse() for g in reversed(self.gates)),
                              self.layout)

    def to_matrix(self) -> np.ndarray:
        if self.n_qubits > DENSITY_MAX_QUBITS:
            raise ValueError(f"full matrix capped at {DENSITY_MAX_QUBITS} qubits")
        return self.apply(np.eye(self.dim, dtype=complex))

    def remapped(self, index_map: dict[int, int], n_qubits: int,
                 layout: RegisterLayout | None = None) -> "UnitaryCircuit":
        return UnitaryCircuit(n_qubits, tuple(g.remapped(index_map) for g in self.gates), layout)

    def to_json_dict(self) -> dict:
        d = {"n_qubits": self.n_qubits, "gates": [g.to_json_dict() for g in self.gates]}
        if self.layout is not None:
            d["registers"] = self.layout.to_json()
        return d


# ---------------------------------------------------------------------------
# gate vocabulary

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0)


def gate(name: str, matrix: np.ndarray, targets: Sequence[int],
         controls: Sequence[int] = (), control_values: Sequence[int] | None = None) -> Gate:
    return Gate(name, tuple(targets), np.asarray(matrix, dtype=complex),
                tuple(controls), tuple(control_values or ()))


def x_gate(q: int) -> Gate:
    return Gate("x", (q,), _X)


def h_gate(q: int) -> Gate:
    return Gate("h", (q,), _H)


def ry_gate(q: int, theta: float, controls: Sequence[int] = (),
            control_values: Sequence[int] | None = None) -> Gate:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    m = np.array([[c, -s], [s, c]], dtype=complex)
    return Gate("ry", (q,), m, tuple(controls), tuple(control_values or ()))


def rz_gate(q: int, theta: float) -> Gate:
    m = np.diag([np.exp(-1j * theta / 2.0), np.exp(1j * theta / 2.0)])
    return Gate("rz", (q,), m)


def cnot(control: int, target: int) -> Gate:
    return Gate("cx", (target,), _X, (control,), (1,))


def swap_gate(a: int, b: int) -> Gate:
    m = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
    return Gate("swap", (a, b), m)


def mcx(controls: Sequence[int], target: int,
        control_values: Sequence[int] | None = None) -> Gate:
    return Gate("mcx", (target,), _X, tuple(controls), tuple(control_values or ()))


def _basis_permutation(name: str, targets: Sequence[int], perm: Callable[[int], int]) -> Gate:
    k = len(targets)
    m = np.zeros((2 ** k, 2 ** k), dtype=complex)
    for v in range(2 ** k):
        m[perm(v), v] = 1.0
    return Gate(name, tuple(targets), m)


def increment_gate(targets: Sequence[int], controls: Sequence[int] = ()) -> Gate:
    """Reversible +1 mod 2^k on a counter register (big-endian)."""
    k = len(targets)
    g = _basis_permutation("inc", targets, lambda v: (v + 1) % 2 ** k)
    if controls:
        return Gate("inc", g.targets, g.matrix, tuple(controls), tuple(1 for _ in controls))
    return g


def counter_threshold_gate(counter: Sequence[int], target: int, threshold: int) -> Gate:
    """Flip target iff the counter register holds a value >= threshold."""
    k = len(counter)

    def perm(v: int) -> int:
        count, bit = v >> 1, v & 1
        return (count << 1) | (bit ^ (1 if count >= threshold else 0))

    return _basis_permutation(f"ge{threshold}", tuple(counter) + (target,), perm)


def majority_gate(inputs: Sequence[int], target: int) -> Gate:
    """Flip target iff at least ceil((m+1)/2) of the m input qubits are 1."""
    m = len(inputs)
    need = m // 2 + 1

    def perm(v: int) -> int:
        bits, out = v >> 1, v & 1
        return (bits << 1) | (out ^ (1 if bin(bits).count("1") >= need else 0))

    return _basis_permutation("maj", tuple(inputs) + (target,), perm)
