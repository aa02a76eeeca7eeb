"""Error model: parameters, channel constructors and coherent-error injection.

Depolarizing strength ``p`` is the probability of full replacement by the
maximally mixed state, rho -> (1 - p) rho + p I/2.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, fields, replace
from functools import cached_property

import numpy as np

from .circuit import Circuit, Gate

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1, -1]).astype(complex)
PAULIS = {"I": _I, "X": _X, "Y": _Y, "Z": _Z}


@dataclass(frozen=True)
class NoiseModel:
    """Incoherent gate, readout and thermal error rates plus an optional coherent over-rotation.

    Times are in microseconds. ``t1_us = inf`` switches thermal relaxation off.
    ``multiplier`` records the total scaling applied by :func:`scale` and
    ``clamped`` is set when scaling pushed a probability past 1.
    """

    p_2q: float = 0.0
    p_1q: float = 0.0
    p_readout: float = 0.0
    t1_us: float = math.inf
    t2_us: float = math.inf
    dur_2q_us: float = 6.8e-2
    dur_1q_us: float = 6.8e-3
    multiplier: float = 1.0
    coherent_angle_rad: float = 0.0
    rz_error: bool = True
    joint_2q_depol: bool = False
    clamped: bool = False

    def __post_init__(self):
        for name in ("p_2q", "p_1q", "p_readout"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} is not a probability")
        if self.t1_us <= 0 or self.t2_us <= 0:
            raise ValueError("T1 and T2 must be positive")
        if self.t2_us > 2 * self.t1_us:
            raise ValueError(f"unphysical T2={self.t2_us} > 2*T1={2 * self.t1_us}")
        if self.dur_1q_us <= 0 or self.dur_2q_us <= 0:
            raise ValueError("gate durations must be positive")
        if self.multiplier < 0:
            raise ValueError("multiplier must be nonnegative")

    @property
    def thermal(self) -> bool:
        return math.isfinite(self.t1_us)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("t1_us", "t2_us"):
            if math.isinf(d[key]):
                d[key] = None
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> NoiseModel:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown noise-model fields: {sorted(unknown)}")
        d = dict(d)
        for key in ("t1_us", "t2_us"):
            if key in d and d[key] is None:
                d[key] = math.inf
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> NoiseModel:
        return cls.from_dict(json.loads(text))


def kingston_default() -> NoiseModel:
    """Median IBM Kingston error rates; one-qubit time is a tenth of the two-qubit time."""
    return NoiseModel(
        p_2q=2.07e-3,
        p_1q=2.25e-4,
        p_readout=7.32e-3,
        t1_us=270.0,
        t2_us=143.0,
        dur_2q_us=6.8e-2,
        dur_1q_us=6.8e-3,
    )


def noiseless() -> NoiseModel:
    return NoiseModel()


def scale(m: NoiseModel, k: float) -> NoiseModel:
    """Multiply every error rate by ``k``; T1 and T2 are divided by ``k``."""
    if k < 0:
        raise ValueError("noise multiplier must be nonnegative")
    clamped = m.clamped
    probs = {}
    for name in ("p_2q", "p_1q", "p_readout"):
        value = getattr(m, name) * k
        if value > 1.0:
            value, clamped = 1.0, True
        probs[name] = value
    if clamped and not m.clamped:
        warnings.warn(f"noise multiplier {k} clamped an error probability to 1", stacklevel=2)
    if k == 0:
        t1 = t2 = math.inf
    else:
        t1, t2 = m.t1_us / k, m.t2_us / k
    return replace(m, **probs, t1_us=t1, t2_us=t2, multiplier=m.multiplier * k, clamped=clamped)


# ---------------------------------------------------------------- channels


@dataclass(frozen=True, eq=False)
class Channel:
    """Completely positive map given by Kraus operators on ``n_qubits`` qubits."""

    kraus: tuple[np.ndarray, ...]

    @property
    def n_qubits(self) -> int:
        return int(round(math.log2(self.kraus[0].shape[0])))

    @cached_property
    def superop(self) -> np.ndarray:
        """Matrix acting on row-major vec(rho): vec(K rho K^+) = (K kron K*) vec(rho)."""
        return sum(np.kron(k, k.conj()) for k in self.kraus)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    def tensor(self, other: Channel) -> Channel:
        return Channel(tuple(np.kron(a, b) for a in self.kraus for b in other.kraus))

    def then(self, other: Channel) -> Channel:
        """Apply ``self`` first, then ``other``."""
        return Channel(tuple(b @ a for a in self.kraus for b in other.kraus))


def identity_channel(n_qubits: int = 1) -> Channel:
    return Channel((np.eye(2 ** n_qubits, dtype=complex),))


def _check_probability(p: float, name: str = "p") -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name}={p} is not a probability")


def depolarizing_1q(p: float) -> Channel:
    _check_probability(p)
    return Channel((
        math.sqrt(1 - 0.75 * p) * _I,
        math.sqrt(p / 4) * _X,
        math.sqrt(p / 4) * _Y,
        math.sqrt(p / 4) * _Z,
    ))


def local_depolarizing_rate(p_2q: float) -> float:
    """Per-qubit rate whose two independent copies leave no error with probability 1 - p_2q."""
    return 1.0 - math.sqrt(1.0 - p_2q)


def two_qubit_error(p_2q: float, joint: bool = False) -> Channel:
    """Gate error after a two-qubit gate.

    By default two independent local depolarizers; ``joint=True`` gives the
    15-Pauli two-qubit depolarizer of the same strength instead.
    """
    _check_probability(p_2q, "p_2q")
    if joint:
        ops = []
        for a in "IXYZ":
            for b in "IXYZ":
                w = 1 - 15 * p_2q / 16 if a == b == "I" else p_2q / 16
                ops.append(math.sqrt(w) * np.kron(PAULIS[a], PAULIS[b]))
        return Channel(tuple(ops))
    local = depolarizing_1q(local_depolarizing_rate(p_2q))
    return local.tensor(local)


def thermal_channel(t1: float, t2: float, duration: float) -> Channel:
    """Amplitude damping toward |0> followed by the extra pure dephasing that makes T2."""
    if t1 <= 0 or t2 <= 0:
        raise ValueError("T1 and T2 must be positive")
    if t2 > 2 * t1:
        raise ValueError(f"unphysical T2={t2} > 2*T1={2 * t1}")
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    if duration == 0 or math.isinf(t1):
        return identity_channel()
    gamma = -math.expm1(-duration / t1)
    damping = Channel((
        np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex),
    ))
    rate_phi = 1.0 / t2 - 0.5 / t1
    # coherence factor from dephasing is sqrt(1 - lam) = exp(-duration * rate_phi)
    lam = -math.expm1(-2.0 * duration * rate_phi)
    if lam <= 0:
        return damping
    dephasing = Channel((
        np.diag([1, math.sqrt(1 - lam)]).astype(complex),
        np.diag([0, math.sqrt(lam)]).astype(complex),
    ))
    return damping.then(dephasing)


def readout_flip(p_ro: float, bit: int, rng: np.random.Generator) -> int:
    """Symmetric classical bit flip with probability ``p_ro``."""
    _check_probability(p_ro, "p_ro")
    return bit ^ int(rng.random() < p_ro)


def readout_attenuation(p_ro: float) -> float:
    """Factor multiplying <Z> under symmetric readout error."""
    return 1.0 - 2.0 * p_ro


def inject_coherent(c: Circuit, angle: float) -> Circuit:
    """Insert an RX(angle) over-rotation on both qubits after every two-qubit gate."""
    if angle == 0:
        return c
    gates = []
    for g in c.gates:
        gates.append(g)
        if g.arity == 2 and not g.injected:
            gates += [Gate("RX", (q,), angle, injected=True) for q in g.qubits]
    return c.with_gates(gates)
