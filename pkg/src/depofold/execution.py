"""Run circuits on the noisy simulator and return sampled counts.

An :class:`Executor` bundles a noise model with the twirling settings, caches
exact output distributions, and draws shots from seed-keyed streams so that
any two calls with the same key see the same randomness.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .circuit import Circuit
from .noise import NoiseModel, inject_coherent, scale
from .rng import derive_seed, rng_for
from .simulator import (DEFAULT_MAX_QUBITS, Counts, measured_expectation, probabilities,
                        run_density, sample)
from .twirl import twirl_circuit


def split_shots(total: int, parts: int = 3) -> tuple[int, ...]:
    """As even a split as possible, with the remainder going to the first parts."""
    if parts < 1:
        raise ValueError("parts must be >= 1")
    if total < parts:
        raise ValueError(f"cannot split {total} shots into {parts} nonempty parts")
    base, extra = divmod(total, parts)
    return tuple(base + (1 if i < extra else 0) for i in range(parts))


class Executor:
    """Noisy sampler for circuits under a fixed model and twirl policy.

    With ``twirls > 0`` each circuit is replaced by that many Pauli-twirled
    instances (frames seeded from ``twirl_seed`` and the circuit content) and
    shots are split across them.
    """

    def __init__(self, model: NoiseModel, twirls: int = 0, twirl_readout: bool = True,
                 twirl_seed: int = 0, max_qubits: int = DEFAULT_MAX_QUBITS):
        if twirls < 0:
            raise ValueError("twirls must be >= 0")
        self.model = model
        self.twirls = twirls
        self.twirl_readout = twirl_readout
        self.twirl_seed = twirl_seed
        self.max_qubits = max_qubits
        self._cache: dict[str, list[np.ndarray]] = {}

    def instances(self, c: Circuit) -> list[Circuit]:
        noisy = inject_coherent(c, self.model.coherent_angle_rad)
        if self.twirls == 0:
            return [noisy]
        key = c.fingerprint()
        return [twirl_circuit(noisy, derive_seed(self.twirl_seed, "twirl-frame", key, i))
                for i in range(self.twirls)]

    def distributions(self, c: Circuit) -> list[np.ndarray]:
        """Exact measured-pattern distribution of each instance."""
        key = c.to_json()
        if key not in self._cache:
            self._cache[key] = [
                probabilities(run_density(inst, self.model, max_qubits=self.max_qubits), c.measured)
                for inst in self.instances(c)
            ]
        return self._cache[key]

    def scaled(self, k: float) -> Executor:
        """Same policy with every error rate multiplied by ``k``."""
        return Executor(scale(self.model, k), self.twirls, self.twirl_readout,
                        self.twirl_seed, self.max_qubits)

    def exact_mean(self, c: Circuit) -> float:
        """Infinite-shot noisy <Z...Z> over the measured qubits, readout error included."""
        dists = self.distributions(c)
        return float(np.mean([measured_expectation(p, self.model.p_readout) for p in dists]))

    def run(self, c: Circuit, shots: int, seed: int, tag: str, *indices: int) -> Counts:
        """Sample ``shots`` shots from the stream keyed by (seed, tag, indices)."""
        dists = self.distributions(c)
        if len(dists) > 1:
            # fewer shots than instances: only the first `shots` instances run
            dists = dists[:min(len(dists), shots)]
        parts = split_shots(shots, len(dists))
        total = None
        for j, (p, n) in enumerate(zip(dists, parts)):
            rng = rng_for(seed, tag, *indices) if self.twirls == 0 else rng_for(seed, tag, *indices, j)
            counts = sample(p, n, self.model.p_readout, self.twirl_readout, rng)
            total = counts if total is None else total + counts
        return total

    def run_many(self, circuits: Sequence[Circuit], shots: Sequence[int], seed: int,
                 tag: str) -> list[Counts]:
        return [self.run(c, s, seed, tag, i) for i, (c, s) in enumerate(zip(circuits, shots))]
