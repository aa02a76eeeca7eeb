"""Dense density-matrix simulation with gate, thermal and readout noise.

Each operation is applied as a superoperator on the affected qubits' row and
column axes of the density tensor. Thermal relaxation acts on qubits that
sit idle during a layer of the as-soon-as-possible schedule.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from .circuit import Circuit, Gate, Pauli
from .errors import QubitLimitError
from .noise import Channel, NoiseModel, depolarizing_1q, thermal_channel, two_qubit_error
from .rng import as_generator

DEFAULT_MAX_QUBITS = 10
_SNAP = 1e-13


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    n_qubits: int
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def zero_state(cls, n_qubits: int) -> DensityMatrix:
        m = np.zeros((2 ** n_qubits, 2 ** n_qubits), dtype=complex)
        m[0, 0] = 1.0
        return cls(n_qubits, m)

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> DensityMatrix:
        d = 2 ** n_qubits
        return cls(n_qubits, np.eye(d, dtype=complex) / d)

    def is_valid(self, tol: float = 1e-9) -> bool:
        m = self.matrix
        herm = np.max(np.abs(m - m.conj().T)) < 1e-10
        trace = abs(np.trace(m) - 1) < 1e-10
        return bool(herm and trace and np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min() > -tol)


@dataclass(frozen=True)
class ShotRecord:
    """One measured shot: observed bits and the readout-twirl flip mask, per measured qubit."""

    bits: tuple[int, ...]
    twirl_mask: tuple[int, ...]


def _popcount_parity(x: np.ndarray) -> np.ndarray:
    parity = np.zeros_like(x)
    while np.any(x):
        parity ^= x & 1
        x = x >> 1
    return parity


@dataclass(frozen=True, eq=False)
class Counts:
    """Aggregated shots: ``table[mask, pattern]`` counts twirl masks against observed patterns.

    Patterns and masks are integers whose most significant bit is the first
    (lowest-index) measured qubit.
    """

    table: np.ndarray

    @property
    def n_measured(self) -> int:
        return int(round(np.log2(self.table.shape[0])))

    @property
    def shots(self) -> int:
        return int(self.table.sum())

    def signs(self, s: int | None = None) -> np.ndarray:
        """gamma_{s,q} * (-1)^<s,x> for every (mask, pattern) cell."""
        size = self.table.shape[0]
        s = size - 1 if s is None else s
        idx = np.arange(size)
        parity = _popcount_parity(idx[:, None] & s) ^ _popcount_parity(idx[None, :] & s)
        return 1 - 2 * parity

    def signed_sum(self, s: int | None = None) -> int:
        return int(np.sum(self.signs(s) * self.table))

    def signed_mean(self, s: int | None = None) -> float:
        """TREX-style f(D, s): the twirl-corrected mean of the Z-parity over ``s``."""
        return self.signed_sum(s) / self.shots

    def __add__(self, other: Counts) -> Counts:
        return Counts(self.table + other.table)

    def records(self) -> Iterator[ShotRecord]:
        k = self.n_measured
        for mask, pattern in zip(*np.nonzero(self.table)):
            rec = ShotRecord(_bits(int(pattern), k), _bits(int(mask), k))
            for _ in range(int(self.table[mask, pattern])):
                yield rec

    @classmethod
    def from_records(cls, records: Iterable[ShotRecord], n_measured: int) -> Counts:
        table = np.zeros((2 ** n_measured, 2 ** n_measured), dtype=np.int64)
        for rec in records:
            table[_int(rec.twirl_mask), _int(rec.bits)] += 1
        return cls(table)


def _bits(value: int, k: int) -> tuple[int, ...]:
    return tuple((value >> (k - 1 - j)) & 1 for j in range(k))


def _int(bits: Sequence[int]) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


# ---------------------------------------------------------------- evolution


def apply_superop(rho: np.ndarray, superop: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Apply a k-qubit superoperator to a density tensor of shape (2,) * 2n."""
    k = len(qubits)
    axes = list(qubits) + [n + q for q in qubits]
    front = list(range(2 * k))
    moved = np.moveaxis(rho, axes, front)
    shape = moved.shape
    out = (superop @ moved.reshape(4 ** k, -1)).reshape(shape)
    return np.moveaxis(out, front, axes)


def unitary_superop(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())


@dataclass(frozen=True)
class Layer:
    duration: float
    ops: tuple[Gate, ...]
    idle: tuple[int, ...]


def schedule(c: Circuit, m: NoiseModel) -> list[Layer]:
    """Greedy ASAP layering of all gates (basis change included).

    Injected over-rotations take no time and join the layer of the gate they
    follow. A layer lasts as long as its slowest gate.
    """
    n = c.n_qubits
    free = [0] * n
    placed: list[list[Gate]] = []
    busy: list[set[int]] = []
    for g in c.all_gates:
        if g.injected:
            layer = max(max(free[q] for q in g.qubits) - 1, 0)
        else:
            layer = max(free[q] for q in g.qubits)
            for q in g.qubits:
                free[q] = layer + 1
        while len(placed) <= layer:
            placed.append([])
            busy.append(set())
        placed[layer].append(g)
        if not g.injected:
            busy[layer].update(g.qubits)
    layers = []
    for ops, used in zip(placed, busy):
        real = [g for g in ops if not g.injected]
        if not real:
            duration = 0.0
        else:
            duration = max(m.dur_2q_us if g.arity == 2 else m.dur_1q_us for g in real)
        idle = tuple(q for q in range(n) if q not in used)
        layers.append(Layer(duration, tuple(ops), idle))
    return layers


class _NoiseCache:
    """Per-model superoperators, reused across gates and circuits."""

    def __init__(self, m: NoiseModel):
        self.m = m
        self.err_1q = depolarizing_1q(m.p_1q).superop if m.p_1q > 0 else None
        self.err_2q = two_qubit_error(m.p_2q, m.joint_2q_depol).superop if m.p_2q > 0 else None
        self._thermal: dict[float, np.ndarray | None] = {}

    def thermal(self, duration: float) -> np.ndarray | None:
        if not self.m.thermal or duration <= 0:
            return None
        if duration not in self._thermal:
            self._thermal[duration] = thermal_channel(self.m.t1_us, self.m.t2_us, duration).superop
        return self._thermal[duration]

    def gate(self, g: Gate) -> np.ndarray:
        sup = unitary_superop(g.matrix())
        if g.injected:
            return sup
        if g.arity == 2:
            err = self.err_2q
        elif g.kind == "RZ" and not self.m.rz_error:
            err = None
        else:
            err = self.err_1q
        return sup if err is None else err @ sup


@lru_cache(maxsize=32)
def _noise_cache(m: NoiseModel) -> _NoiseCache:
    return _NoiseCache(m)


def run_density(c: Circuit, m: NoiseModel, *, max_qubits: int = DEFAULT_MAX_QUBITS) -> DensityMatrix:
    """Evolve |0...0><0...0| through ``c`` under ``m``; returns the pre-measurement state."""
    n = c.n_qubits
    if n > max_qubits:
        raise QubitLimitError(f"{n} qubits exceeds the dense-simulation cap of {max_qubits}")
    cache = _noise_cache(m)
    rho = DensityMatrix.zero_state(n).matrix.reshape((2,) * (2 * n))
    for layer in schedule(c, m):
        for g in layer.ops:
            rho = apply_superop(rho, cache.gate(g), g.qubits, n)
        idle_op = cache.thermal(layer.duration)
        if idle_op is not None:
            for q in layer.idle:
                rho = apply_superop(rho, idle_op, (q,), n)
    return DensityMatrix(n, rho.reshape(2 ** n, 2 ** n))


def probabilities(d: DensityMatrix, measured_qubits: Sequence[int]) -> np.ndarray:
    """Marginal distribution over measured-bit patterns (first measured qubit = MSB).

    Rounding noise below 1e-13 is snapped to zero so that numerically exact
    deterministic outcomes sample identically across circuits.
    """
    n = d.n_qubits
    measured = list(measured_qubits)
    diag = np.real(np.diag(d.matrix)).reshape((2,) * n)
    others = tuple(q for q in range(n) if q not in measured)
    marginal = diag.sum(axis=others) if others else diag
    order = sorted(range(len(measured)), key=lambda j: measured[j])
    # axes of `marginal` follow increasing qubit index; put them in `measured` order
    marginal = np.transpose(marginal, np.argsort(order)) if len(measured) > 1 else marginal
    p = np.array(marginal, dtype=float).reshape(-1)
    p[p < _SNAP] = 0.0
    return p / p.sum()


def readout_distribution(p: np.ndarray, p_readout: float) -> np.ndarray:
    """Apply independent symmetric bit flips to every bit of a pattern distribution."""
    k = int(round(np.log2(p.size)))
    if p_readout == 0 or k == 0:
        return p.copy()
    flip = np.array([[1 - p_readout, p_readout], [p_readout, 1 - p_readout]])
    t = p.reshape((2,) * k)
    for axis in range(k):
        t = np.moveaxis(np.tensordot(flip, t, axes=([1], [axis])), 0, axis)
    return t.reshape(-1)


def shot_distribution(p: np.ndarray, p_readout: float, twirl_readout: bool) -> np.ndarray:
    """Joint distribution of (twirl mask, observed pattern) as a (2^k, 2^k) table.

    The twirl X gates act before the (symmetric) readout flips, so a shot with
    mask q and ideal pattern x is read as x ^ q ^ e.
    """
    size = p.size
    if not twirl_readout:
        joint = np.zeros((size, size))
        joint[0] = readout_distribution(p, p_readout)
        return joint
    idx = np.arange(size)
    joint = np.empty((size, size))
    for mask in range(size):
        joint[mask] = readout_distribution(p[idx ^ mask], p_readout) / size
    return joint


def sample(p: np.ndarray, shots: int, p_readout: float = 0.0, twirl_readout: bool = True,
           seed: int | np.random.Generator = 0) -> Counts:
    """Draw ``shots`` measurements; deterministic for a given seed."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = as_generator(seed, "sample")
    joint = shot_distribution(np.asarray(p, dtype=float), p_readout, twirl_readout)
    flat = joint.reshape(-1)
    flat = flat / flat.sum()
    counts = rng.multinomial(shots, flat)
    return Counts(counts.reshape(joint.shape).astype(np.int64))


def measured_expectation(p: np.ndarray, p_readout: float = 0.0, s: int | None = None) -> float:
    """Infinite-shot <Z...Z> over the bits in ``s`` (default: all measured bits)."""
    size = p.size
    s = size - 1 if s is None else s
    signs = 1 - 2 * _popcount_parity(np.arange(size) & s)
    return float(np.dot(signs, readout_distribution(p, p_readout)))


# ---------------------------------------------------------------- noiseless statevector


def apply_unitary(psi: np.ndarray, u: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    k = len(qubits)
    front = list(range(k))
    moved = np.moveaxis(psi, list(qubits), front)
    shape = moved.shape
    out = (u @ moved.reshape(2 ** k, -1)).reshape(shape)
    return np.moveaxis(out, front, list(qubits))


def statevector(c: Circuit, include_basis_change: bool = False) -> np.ndarray:
    """Noiseless final state of the gates (injected over-rotations are skipped)."""
    n = c.n_qubits
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    gates = c.all_gates if include_basis_change else c.gates
    for g in gates:
        if not g.injected:
            psi = apply_unitary(psi, g.matrix(), g.qubits)
    return psi.reshape(-1)


_PAULI_MATS = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
}


def pauli_expectation(psi: np.ndarray, n: int, pauli: Pauli) -> float:
    t = psi.reshape((2,) * n)
    op_t = apply_unitary(t, _PAULI_MATS[pauli.label], (pauli.qubit,))
    return float(np.real(np.vdot(t, op_t)))


def exact_expectation(c: Circuit, pauli: Pauli | str) -> float:
    """Noiseless <pauli> after the circuit's gates, without sampling."""
    if isinstance(pauli, str):
        pauli = Pauli.parse(pauli)
    return pauli_expectation(statevector(c), c.n_qubits, pauli)
