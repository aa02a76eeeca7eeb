"""Circuit IR over the hardware basis gate set.

Gates are RX, RZ, RZZ, SX, SXdg, X and CZ. A :class:`Circuit` is an immutable
gate tuple plus the measured qubits and an optional pre-measurement basis
change that rotates a Pauli observable into the Z basis.

Qubit 0 is the most significant tensor axis everywhere in the package.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateCircuitError
from .rng import as_generator

ONE_QUBIT_KINDS = frozenset({"RX", "RZ", "SX", "SXdg", "X"})
TWO_QUBIT_KINDS = frozenset({"CZ", "RZZ"})
ANGLED_KINDS = frozenset({"RX", "RZ", "RZZ"})
KINDS = ONE_QUBIT_KINDS | TWO_QUBIT_KINDS

_SX = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
_FIXED = {
    "SX": _SX,
    "SXdg": _SX.conj().T,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
}
_ANGLE_TOL = 1e-12


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None
    # coherent over-rotations added by the noise model: no gate error, no duration
    injected: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        qubits = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qubits)
        arity = 2 if self.kind in TWO_QUBIT_KINDS else 1
        if len(qubits) != arity or len(set(qubits)) != arity:
            raise ValueError(f"{self.kind} needs {arity} distinct qubits, got {qubits}")
        if min(qubits) < 0:
            raise ValueError("qubit indices must be nonnegative")
        if self.kind in ANGLED_KINDS:
            if self.angle is None or not math.isfinite(self.angle):
                raise ValueError(f"{self.kind} needs a finite angle")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise ValueError(f"{self.kind} takes no angle")

    @property
    def arity(self) -> int:
        return len(self.qubits)

    def inverse(self) -> Gate:
        if self.kind in ANGLED_KINDS:
            return Gate(self.kind, self.qubits, -self.angle, self.injected)
        if self.kind == "SX":
            return Gate("SXdg", self.qubits, None, self.injected)
        if self.kind == "SXdg":
            return Gate("SX", self.qubits, None, self.injected)
        return self

    def matrix(self) -> np.ndarray:
        return gate_matrix(self.kind, self.angle)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "qubits": list(self.qubits)}
        if self.angle is not None:
            d["angle"] = self.angle
        if self.injected:
            d["injected"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Gate:
        return cls(d["kind"], tuple(d["qubits"]), d.get("angle"), bool(d.get("injected", False)))


def gate_matrix(kind: str, angle: float | None = None) -> np.ndarray:
    """Unitary of a basis gate; two-qubit matrices order the first qubit as MSB."""
    if kind in _FIXED:
        return _FIXED[kind].copy()
    half = 0.5 * angle
    c, s = math.cos(half), math.sin(half)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RZ":
        return np.diag([complex(c, -s), complex(c, s)])
    if kind == "RZZ":
        m, p = complex(c, -s), complex(c, s)
        return np.diag([m, p, p, m])
    raise ValueError(f"unknown gate kind {kind!r}")


@dataclass(frozen=True)
class Pauli:
    """Weight-1 Pauli observable, e.g. ``Pauli("X", 2)``."""

    label: str
    qubit: int

    def __post_init__(self):
        if self.label not in ("X", "Y", "Z"):
            raise ValueError(f"weight-1 Pauli label must be X, Y or Z, got {self.label!r}")

    @classmethod
    def parse(cls, text: str) -> Pauli:
        return cls(text[0].upper(), int(text[1:]))

    def __str__(self) -> str:
        return f"{self.label}{self.qubit}"


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...]
    measured: tuple[int, ...]
    basis_change: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "basis_change", tuple(self.basis_change))
        object.__setattr__(self, "measured", tuple(sorted({int(q) for q in self.measured})))
        if self.n_qubits < 1:
            raise ValueError("a circuit needs at least one qubit")
        if not self.measured:
            raise ValueError("measured qubit set must be nonempty")
        for g in self.gates + self.basis_change:
            if max(g.qubits) >= self.n_qubits:
                raise ValueError(f"gate {g} addresses a qubit outside 0..{self.n_qubits - 1}")
        if max(self.measured) >= self.n_qubits:
            raise ValueError("measured qubit out of range")

    @property
    def all_gates(self) -> tuple[Gate, ...]:
        return self.gates + self.basis_change

    @property
    def h1(self) -> int:
        return sum(1 for g in self.gates if g.arity == 1 and not g.injected)

    @property
    def h2(self) -> int:
        return sum(1 for g in self.gates if g.arity == 2 and not g.injected)

    def with_gates(self, gates: Iterable[Gate]) -> Circuit:
        return Circuit(self.n_qubits, tuple(gates), self.measured, self.basis_change)

    def structure(self) -> tuple:
        """Angle-free signature; circuits sharing it form one estimation class."""
        sig = tuple((g.kind, g.qubits) for g in self.gates if not g.injected)
        basis = tuple((g.kind, g.qubits, g.angle) for g in self.basis_change)
        return (self.n_qubits, sig, self.measured, basis)

    def fingerprint(self) -> int:
        digest = hashlib.sha256(self.to_json().encode()).digest()
        return int.from_bytes(digest[:8], "little")

    def to_dict(self) -> dict:
        d = {
            "n_qubits": self.n_qubits,
            "measured": list(self.measured),
            "gates": [g.to_dict() for g in self.gates],
        }
        if self.basis_change:
            d["basis_change"] = [g.to_dict() for g in self.basis_change]
        return d

    def to_json(self, **kwargs) -> str:
        # float repr is the shortest string that round-trips bit-exactly
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> Circuit:
        return cls(
            int(d["n_qubits"]),
            tuple(Gate.from_dict(g) for g in d["gates"]),
            tuple(d["measured"]),
            tuple(Gate.from_dict(g) for g in d.get("basis_change", ())),
        )

    @classmethod
    def from_json(cls, text: str) -> Circuit:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class GateClassification:
    pool_1q: tuple[int, ...]
    pool_2q: tuple[int, ...]
    excluded: tuple[int, ...]
    companion: tuple[int, ...] = field(default=())


# ---------------------------------------------------------------- decomposition


def _wrap(angle: float) -> float:
    """Map to (-pi, pi]."""
    a = math.remainder(angle, 2 * math.pi)
    return math.pi if a <= -math.pi else a


def _rz_or_nothing(angle: float, qubit: int) -> list[Gate]:
    a = _wrap(angle)
    if abs(a) < _ANGLE_TOL:
        return []
    return [Gate("RZ", (qubit,), a)]


def zyz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """(phi, theta, lam) with u = e^{i alpha} RZ(phi) RY(theta) RZ(lam)."""
    su = u / np.sqrt(np.linalg.det(u))
    a, b = su[0, 0], su[1, 0]
    theta = 2.0 * math.atan2(abs(b), abs(a))
    if abs(b) < 1e-14:
        return -2.0 * np.angle(a), 0.0, 0.0
    if abs(a) < 1e-14:
        return 2.0 * np.angle(b), theta, 0.0
    plus = -2.0 * np.angle(a)
    minus = 2.0 * np.angle(b)
    return 0.5 * (plus + minus), theta, 0.5 * (plus - minus)


def decompose_one_qubit(u: np.ndarray, qubit: int = 0) -> list[Gate]:
    """Express a 2x2 unitary as at most RZ SX RZ SX RZ (time order), up to phase.

    Zero-angle RZ gates are dropped, so the identity decomposes to ``[]`` and
    diagonal unitaries to a single RZ.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    if np.max(np.abs(u.conj().T @ u - np.eye(2))) > 1e-10:
        raise ValueError("matrix is not unitary")
    phi, theta, lam = zyz_angles(u)
    if abs(theta) < _ANGLE_TOL:
        return _rz_or_nothing(phi + lam, qubit)
    # RZ(phi) RY(theta) RZ(lam) = RZ(phi + pi) SX RZ(theta + pi) SX RZ(lam) up to phase
    return (
        _rz_or_nothing(lam, qubit)
        + [Gate("SX", (qubit,))]
        + _rz_or_nothing(theta + math.pi, qubit)
        + [Gate("SX", (qubit,))]
        + _rz_or_nothing(phi + math.pi, qubit)
    )


def ry_gates(theta: float, qubit: int) -> list[Gate]:
    """RY(theta) as SX, RZ(theta), SXdg; the gate pattern does not depend on theta."""
    return [Gate("SX", (qubit,)), Gate("RZ", (qubit,), theta), Gate("SXdg", (qubit,))]


_PAULI_TO_Z = {
    "Z": np.eye(2, dtype=complex),
    "X": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),  # H
    "Y": np.array([[1, -1j], [1, 1j]], dtype=complex) / math.sqrt(2),  # H S^dagger
}


def pauli_basis_change(pauli: str, qubit: int) -> list[Gate]:
    """Gates g with g P g^dagger = Z, so measuring Z afterwards measures ``pauli``."""
    if pauli not in _PAULI_TO_Z:
        raise ValueError(f"basis change needs X, Y or Z, got {pauli!r}")
    return decompose_one_qubit(_PAULI_TO_Z[pauli], qubit)


# ---------------------------------------------------------------- constructions


def build_efficient_su2(n_qubits: int, layers: int, params: Sequence[float],
                        measured: Sequence[int] = (0,),
                        basis_change: Sequence[Gate] = ()) -> Circuit:
    """EfficientSU2 ansatz: per layer RY then RZ on every qubit, then a CZ chain.

    ``params`` holds ``2 * n_qubits * (layers + 1)`` angles ordered layer by
    layer, RY angles for all qubits before RZ angles.
    """
    if n_qubits < 1 or layers < 0:
        raise ValueError("need n_qubits >= 1 and layers >= 0")
    expected = 2 * n_qubits * (layers + 1)
    if len(params) != expected:
        raise ValueError(f"expected {expected} parameters, got {len(params)}")
    gates: list[Gate] = []
    k = 0
    for layer in range(layers + 1):
        for q in range(n_qubits):
            gates += ry_gates(params[k + q], q)
        k += n_qubits
        for q in range(n_qubits):
            gates.append(Gate("RZ", (q,), params[k + q]))
        k += n_qubits
        if layer < layers:
            gates += [Gate("CZ", (q, q + 1)) for q in range(n_qubits - 1)]
    return Circuit(n_qubits, tuple(gates), tuple(measured), tuple(basis_change))


def observable_circuit(body: Circuit, pauli: Pauli) -> Circuit:
    """Attach the measurement of a weight-1 Pauli to a circuit's gates."""
    return Circuit(body.n_qubits, body.gates, (pauli.qubit,),
                   tuple(pauli_basis_change(pauli.label, pauli.qubit)))


def invert_gates(gates: Sequence[Gate]) -> list[Gate]:
    return [g.inverse() for g in reversed(gates)]


def invert(c: Circuit) -> Circuit:
    """Reverse the gate list and invert each gate."""
    return c.with_gates(invert_gates(c.gates))


def fold(c: Circuit, factor: int) -> Circuit:
    """Global unitary folding: c, then (c^-1 c) repeated (factor - 1) / 2 times."""
    if factor < 1 or factor % 2 == 0:
        raise ValueError(f"fold factor must be a positive odd integer, got {factor}")
    inverse = invert_gates(c.gates)
    gates = list(c.gates)
    for _ in range((factor - 1) // 2):
        gates += inverse
        gates += c.gates
    return c.with_gates(gates)


def classify_gates(c: Circuit) -> GateClassification:
    """Backward light-cone sweep from the measured qubits.

    A two-qubit gate that first connects a qubit to the cone (walking backwards)
    is a terminal/nonterminal gate and goes to the companion list. Gates outside
    the cone are excluded; everything else is poolable. Injected gates are
    ignored.
    """
    cone = set(c.measured)
    pool_1q, pool_2q, excluded, companion = [], [], [], []
    for idx in range(len(c.gates) - 1, -1, -1):
        g = c.gates[idx]
        if g.injected:
            continue
        inside = [q in cone for q in g.qubits]
        if g.arity == 1:
            (pool_1q if inside[0] else excluded).append(idx)
        elif all(inside):
            pool_2q.append(idx)
        elif any(inside):
            companion.append(idx)
            cone.update(g.qubits)
        else:
            excluded.append(idx)
    return GateClassification(
        tuple(sorted(pool_1q)), tuple(sorted(pool_2q)),
        tuple(sorted(excluded)), tuple(sorted(companion)),
    )


def _companion_gate(g: Gate) -> Gate:
    # the terminal qubit is |0> when the companion runs, so only a controlled
    # gate leaves the state alone; CZ is one and RZZ is not
    return g if g.kind == "CZ" else Gate("CZ", g.qubits)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def random_angle_copy(g: Gate, rng: np.random.Generator) -> Gate:
    if g.kind not in ANGLED_KINDS:
        return g
    return Gate(g.kind, g.qubits, float(rng.uniform(0.0, 2 * math.pi)), g.injected)


def rida_generate(c: Circuit, seed: int | np.random.Generator = 0, *,
                  randomize_angles: bool = False) -> Circuit:
    """Build one random-inverse estimation circuit for ``c``.

    Exactly half (rounded half up) of the poolable one- and two-qubit gates
    are drawn without replacement, kept in their original order and followed
    by their inverse; companion gates are appended. The basis change is kept
    and its inverse prepended, so the error-free measured value is 1.
    """
    rng = as_generator(seed, "rida-generate")
    cls = classify_gates(c)
    if not cls.pool_1q and not cls.pool_2q:
        raise DegenerateCircuitError("no gate of the circuit can affect the measured qubits")
    g1 = round_half_up(len(cls.pool_1q) / 2)
    g2 = round_half_up(len(cls.pool_2q) / 2)
    chosen = []
    if g1:
        chosen += list(rng.choice(cls.pool_1q, size=g1, replace=False))
    if g2:
        chosen += list(rng.choice(cls.pool_2q, size=g2, replace=False))
    selected = [c.gates[i] for i in sorted(int(i) for i in chosen)]
    if randomize_angles:
        selected = [random_angle_copy(g, rng) for g in selected]
    gates = (
        invert_gates(c.basis_change)
        + selected
        + invert_gates(selected)
        + [_companion_gate(c.gates[i]) for i in cls.companion]
    )
    return c.with_gates(gates)


def random_circuit(n_qubits: int, n_gates: int, seed: int | np.random.Generator = 0,
                   kinds: Sequence[str] = tuple(sorted(KINDS)),
                   measured: Sequence[int] | None = None) -> Circuit:
    """Uniformly random basis-gate circuit, for tests and benchmarks."""
    rng = as_generator(seed, "random-circuit")
    kinds = [k for k in kinds if n_qubits > 1 or k not in TWO_QUBIT_KINDS]
    gates = []
    for _ in range(n_gates):
        kind = kinds[rng.integers(len(kinds))]
        arity = 2 if kind in TWO_QUBIT_KINDS else 1
        qubits = tuple(int(q) for q in rng.choice(n_qubits, size=arity, replace=False))
        angle = float(rng.uniform(-math.pi, math.pi)) if kind in ANGLED_KINDS else None
        gates.append(Gate(kind, qubits, angle))
    if measured is None:
        measured = (int(rng.integers(n_qubits)),)
    return Circuit(n_qubits, tuple(gates), tuple(measured))
