"""Pauli twirling of two-qubit gates and readout-twirl sign bookkeeping."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .circuit import Circuit, Gate, gate_matrix
from .noise import PAULIS, NoiseModel
from .rng import as_generator

DEFAULT_TWIRLS = 250
PauliPair = tuple[str, str]


@dataclass(frozen=True)
class TwirlFrame:
    """Paulis applied before (``pre``) and after (``post``) one two-qubit gate."""

    pre: PauliPair
    post: PauliPair

    def holds_for(self, u: np.ndarray, tol: float = 1e-12) -> bool:
        """Check (a'⊗b') U (a⊗b) = U up to global phase."""
        framed = _pair(self.post) @ u @ _pair(self.pre)
        overlap = np.vdot(u, framed)
        if abs(overlap) < tol:
            return False
        phase = overlap / abs(overlap)
        return float(np.linalg.norm(framed - phase * u)) < tol


def _pair(p: PauliPair) -> np.ndarray:
    return np.kron(PAULIS[p[0]], PAULIS[p[1]])


@lru_cache(maxsize=None)
def twirl_table(gate_kind: str) -> dict[PauliPair, PauliPair]:
    """Map each pre-gate Pauli pair to the post-gate pair that undoes it.

    Derived from U P U^+ by matching against all 16 Pauli pairs, so it works
    for any Clifford two-qubit gate; only CZ is in the basis set.
    """
    if gate_kind != "CZ":
        raise ValueError(f"no Pauli twirl for gate kind {gate_kind!r}; only CZ is Clifford")
    u = gate_matrix(gate_kind)
    pairs = list(itertools.product("IXYZ", repeat=2))
    table = {}
    for pre in pairs:
        conj = u @ _pair(pre) @ u.conj().T
        for post in pairs:
            # Paulis are Hermitian and self-inverse, so post must equal conj up to phase
            if abs(abs(np.vdot(_pair(post), conj)) - 4.0) < 1e-9:
                table[pre] = post
                break
        else:  # pragma: no cover - impossible for a Clifford gate
            raise ValueError(f"{gate_kind} maps {pre} outside the Pauli group")
    return table


def pauli_gates(label: str, qubit: int) -> list[Gate]:
    """A single-qubit Pauli in the basis set; Y is Z then X (XZ = -iY)."""
    if label == "I":
        return []
    if label == "X":
        return [Gate("X", (qubit,))]
    if label == "Z":
        return [Gate("RZ", (qubit,), math.pi)]
    if label == "Y":
        return [Gate("RZ", (qubit,), math.pi), Gate("X", (qubit,))]
    raise ValueError(f"unknown Pauli label {label!r}")


def random_frame(gate_kind: str, rng: np.random.Generator) -> TwirlFrame:
    table = twirl_table(gate_kind)
    keys = sorted(table)
    pre = keys[int(rng.integers(len(keys)))]
    return TwirlFrame(pre, table[pre])


def twirl_circuit(c: Circuit, seed: int | np.random.Generator = 0) -> Circuit:
    """Wrap every two-qubit gate, together with its injected over-rotations, in a random frame."""
    rng = as_generator(seed, "twirl")
    gates = list(c.gates)
    out: list[Gate] = []
    i = 0
    while i < len(gates):
        g = gates[i]
        i += 1
        if g.arity != 2 or g.injected:
            out.append(g)
            continue
        tail = []
        while i < len(gates) and gates[i].injected:
            tail.append(gates[i])
            i += 1
        frame = random_frame(g.kind, rng)
        a, b = g.qubits
        out += pauli_gates(frame.pre[0], a) + pauli_gates(frame.pre[1], b)
        out.append(g)
        out += tail
        out += pauli_gates(frame.post[0], a) + pauli_gates(frame.post[1], b)
    return c.with_gates(out)


def readout_sign(s_mask: int, twirl_mask: int) -> int:
    """gamma_{s,q} = (-1)^<s,q> for the measured-bit masks ``s`` and ``q``."""
    return -1 if bin(s_mask & twirl_mask).count("1") % 2 else 1


def twirl_ensemble_estimate(c: Circuit, m: NoiseModel, n_twirls: int = DEFAULT_TWIRLS,
                            shots: int = 2 ** 17, seed: int = 0,
                            twirl_readout: bool = True) -> float:
    """Shot-weighted signed mean over ``n_twirls`` twirled instances of ``c``."""
    from .execution import Executor

    if n_twirls < 1:
        raise ValueError("n_twirls must be >= 1")
    ex = Executor(m, twirls=n_twirls, twirl_readout=twirl_readout, twirl_seed=seed)
    return ex.run(c, shots, seed, "twirl-ensemble").signed_mean()
