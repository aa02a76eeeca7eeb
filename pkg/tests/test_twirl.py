import itertools
import math

import numpy as np
import pytest

from depofold.circuit import Circuit, Gate, gate_matrix, random_circuit
from depofold.noise import NoiseModel, PAULIS, noiseless
from depofold.simulator import exact_expectation
from depofold.twirl import (TwirlFrame, pauli_gates, random_frame, readout_sign, twirl_circuit,
                            twirl_ensemble_estimate, twirl_table)
from depofold.execution import Executor

from oracles import circuit_unitary, phase_distance, sequence_unitary

CZ = gate_matrix("CZ")


def test_table_covers_all_pairs():
    table = twirl_table("CZ")
    assert len(table) == 16
    assert sorted(table.values()) == sorted(table)


@pytest.mark.parametrize("pre", list(itertools.product("IXYZ", repeat=2)))
def test_table_entries_hold(pre):
    frame = TwirlFrame(pre, twirl_table("CZ")[pre])
    assert frame.holds_for(CZ)


@pytest.mark.parametrize("pre,post", [
    (("I", "I"), ("I", "I")),
    (("X", "I"), ("X", "Z")),
    (("I", "X"), ("Z", "X")),
    (("Z", "Z"), ("Z", "Z")),
    (("X", "X"), ("Y", "Y")),
])
def test_table_known_values(pre, post):
    assert twirl_table("CZ")[pre] == post


def test_wrong_frame_fails():
    assert not TwirlFrame(("X", "I"), ("X", "I")).holds_for(CZ)


@pytest.mark.parametrize("kind", ["RZZ", "SX"])
def test_non_clifford_rejected(kind):
    with pytest.raises(ValueError):
        twirl_table(kind)


@pytest.mark.parametrize("label", "IXYZ")
def test_pauli_gates_match_matrices(label):
    u = sequence_unitary(pauli_gates(label, 0))
    assert phase_distance(u, PAULIS[label]) < 1e-12


def test_random_frame_uniform():
    rng = np.random.default_rng(0)
    counts = {}
    n = 32000
    for _ in range(n):
        f = random_frame("CZ", rng)
        counts[f.pre] = counts.get(f.pre, 0) + 1
    assert len(counts) == 16
    sd = math.sqrt(n * (1 / 16) * (15 / 16))
    assert all(abs(v - n / 16) < 5 * sd for v in counts.values())


@pytest.mark.parametrize("seed", range(10))
def test_twirled_circuit_same_unitary(seed):
    c = random_circuit(3, 30, seed, kinds=("CZ", "SX", "RZ", "X"))
    t = twirl_circuit(c, seed)
    assert phase_distance(circuit_unitary(t.gates, 3), circuit_unitary(c.gates, 3)) < 1e-10


def test_twirl_keeps_injected_inside_frame():
    gates = (Gate("CZ", (0, 1)), Gate("RX", (0,), 0.2, injected=True),
             Gate("RX", (1,), 0.2, injected=True))
    t = twirl_circuit(Circuit(2, gates, (0,)), 3)
    kinds = [g for g in t.gates if g.injected or g.kind == "CZ"]
    # CZ and its over-rotations stay contiguous among the non-Pauli gates
    i = t.gates.index(gates[0])
    assert t.gates[i + 1:i + 3] == gates[1:]
    assert len(kinds) == 3


def test_twirl_reproducible():
    c = random_circuit(3, 20, 1, kinds=("CZ", "SX"))
    assert twirl_circuit(c, 5) == twirl_circuit(c, 5)


def test_readout_sign():
    assert readout_sign(0b11, 0b01) == -1
    assert readout_sign(0b11, 0b11) == 1
    assert readout_sign(0b10, 0b01) == 1


def test_twirl_noiseless_expectation_unchanged():
    c = random_circuit(3, 25, 4, kinds=("CZ", "SX", "RZ"), measured=(1,))
    value = twirl_ensemble_estimate(c, noiseless(), n_twirls=20, shots=2 ** 14, seed=0)
    # noiseless: shots are exact up to sampling of the ideal distribution
    truth = exact_expectation(c, "Z1")
    assert abs(value - truth) < 5 * math.sqrt((1 - truth ** 2) / 2 ** 14) + 1e-12


def _frame_average(gates, frames):
    """Exact <Z0> averaged over explicit frames around the single CZ in ``gates``."""
    from depofold.simulator import probabilities, run_density

    values = []
    for pre in frames:
        post = twirl_table("CZ")[pre]
        out = []
        for g in gates:
            if g.kind == "CZ":
                out += pauli_gates(pre[0], 0) + pauli_gates(pre[1], 1) + [g]
            elif g.injected and g.qubits == (1,):
                out += [g] + pauli_gates(post[0], 0) + pauli_gates(post[1], 1)
            else:
                out.append(g)
        p = probabilities(run_density(Circuit(2, tuple(out), (0,)), noiseless()), [0])
        values.append(p[0] - p[1])
    return float(np.mean(values))


def test_full_twirl_equals_pauli_channel():
    theta = 0.3
    # q0 carries a <Y> component into the over-rotation, where coherent and Pauli errors differ
    gates = (Gate("SX", (0,)), Gate("RZ", (0,), 0.9), Gate("SX", (1,)), Gate("RZ", (1,), 2.0),
             Gate("SX", (1,)), Gate("CZ", (0, 1)), Gate("RX", (0,), theta, injected=True),
             Gate("RX", (1,), theta, injected=True), Gate("RZ", (0,), 0.4))
    twirled = _frame_average(gates, sorted(twirl_table("CZ")))
    # oracle: the error E = RX(t) x RX(t) reduced to its Pauli-diagonal part
    rx = gate_matrix("RX", theta)
    err = np.kron(rx, rx)
    n = 2
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1
    u = circuit_unitary(gates[:6], n)
    rho = u @ rho @ u.conj().T
    out = np.zeros_like(rho)
    for a, b in itertools.product("IXYZ", repeat=2):
        p = np.kron(PAULIS[a], PAULIS[b])
        weight = abs(np.trace(p @ err) / 4) ** 2
        out += weight * p @ rho @ p
    v = circuit_unitary(gates[8:], n)
    out = v @ out @ v.conj().T
    z0 = np.kron(np.diag([1, -1]), np.eye(2))
    expected = float(np.real(np.trace(z0 @ out)))
    assert twirled == pytest.approx(expected, abs=1e-12)
    untwirled = _frame_average(gates, [("I", "I")])
    assert abs(untwirled - expected) > 1e-3


def test_executor_twirl_converges_to_pauli_channel():
    theta = 0.3
    gates = (Gate("SX", (0,)), Gate("RZ", (0,), 0.9), Gate("SX", (0,)), Gate("SX", (1,)),
             Gate("CZ", (0, 1)), Gate("SX", (0,)), Gate("RZ", (0,), 0.4), Gate("SX", (0,)))
    c = Circuit(2, gates, (0,))
    injected = gates[:5] + (Gate("RX", (0,), theta, injected=True),
                            Gate("RX", (1,), theta, injected=True)) + gates[5:]
    full = _frame_average(injected, sorted(twirl_table("CZ")))
    ex = Executor(NoiseModel(coherent_angle_rad=theta), twirls=4000, twirl_seed=1)
    # 4000 uniform frames: the mean over frames has small spread around the full average
    per_frame = [_frame_average(injected, [pre]) for pre in sorted(twirl_table("CZ"))]
    sd = float(np.std(per_frame)) / math.sqrt(4000)
    assert abs(ex.exact_mean(c) - full) < 5 * sd + 1e-12


def test_ensemble_rejects_zero():
    with pytest.raises(ValueError):
        twirl_ensemble_estimate(random_circuit(2, 5, 0), noiseless(), n_twirls=0)
