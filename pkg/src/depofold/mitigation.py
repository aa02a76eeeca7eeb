"""Error-mitigation estimators and the pipelines that run them on the simulator.

Conventions: every sampled mean is the readout-twirl corrected parity mean
over the measured qubits (:meth:`Counts.signed_mean`). Mitigated values are
never clipped to [-1, 1].
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import unitary_group

from .circuit import (Circuit, Gate, decompose_one_qubit, fold, invert_gates, rida_generate)
from .errors import SingularityError
from .execution import Executor, split_shots
from .rng import derive_seed, rng_for
from .simulator import Counts, ShotRecord, _int

__all__ = [
    "DepolarizationEstimate", "MitigatedValue", "ZnePoints", "rida_generate", "estimate_p",
    "depolarizing_invert", "estimation_circuits", "measure_depolarization", "rida_pipeline",
    "raw_pipeline", "cnot_only_estimation", "split_shots", "quadratic_zne", "exponential_zne",
    "trex_calibration", "trex_estimate", "trex_pipeline", "cnot_qzne_pipeline",
    "ezne_trex_pipeline", "NOISE_FACTORS",
]

NOISE_FACTORS = (1, 3, 5)
SINGULAR_MARGIN = 1e-9


@dataclass(frozen=True)
class DepolarizationEstimate:
    p_hat: float
    per_circuit: tuple[tuple[float, int], ...]
    total_shots: int

    @property
    def negative(self) -> bool:
        return self.p_hat < 0

    def stderr(self) -> float:
        """Shot-noise standard error of p_hat from the per-circuit binomial variances."""
        var = sum(n * (1 - mu * mu) for mu, n in self.per_circuit) / self.total_shots ** 2
        return math.sqrt(max(var, 0.0))


@dataclass(frozen=True)
class MitigatedValue:
    value: float
    method: str
    raw: float
    shots_used: int
    predicted_variance: float | None = None
    p_hat: float | None = None
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["flags"] = list(self.flags)
        return d


@dataclass(frozen=True)
class ZnePoints:
    x1: float
    x3: float
    x5: float
    shots: tuple[int, int, int] | None = None

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x1, self.x3, self.x5)


def estimate_p(results: Sequence[tuple[float, int]]) -> DepolarizationEstimate:
    """p_hat = 1 - shot-weighted mean of the estimation circuits' measured means."""
    results = tuple((float(mu), int(n)) for mu, n in results)
    if not results:
        raise ValueError("need at least one estimation result")
    if any(n <= 0 for _, n in results):
        raise ValueError("shots must be positive")
    total = sum(n for _, n in results)
    mean = sum(mu * n for mu, n in results) / total
    return DepolarizationEstimate(1.0 - mean, results, total)


def depolarizing_invert(raw: float, p_hat: float) -> MitigatedValue:
    """Undo global depolarization: raw / (1 - p_hat)."""
    if p_hat >= 1.0 - SINGULAR_MARGIN:
        raise SingularityError(f"p_hat={p_hat} leaves nothing to rescale")
    return MitigatedValue(raw / (1.0 - p_hat), "rida", raw, 0, p_hat=p_hat)


# ---------------------------------------------------------------- RIDA


def estimation_circuits(target: Circuit, n: int, seed: int,
                        randomize_angles: bool = True) -> list[Circuit]:
    """``n`` RIDA estimation circuits; they depend only on the target's structure and ``seed``."""
    return [rida_generate(target, derive_seed(seed, "rida-circuit", i),
                          randomize_angles=randomize_angles) for i in range(n)]


def measure_depolarization(circuits: Sequence[Circuit], executor: Executor, shots_total: int,
                           seed: int, tag: str = "estimation") -> DepolarizationEstimate:
    """Sample each circuit on its own stream (seed, tag, i) and combine into p_hat."""
    parts = split_shots(shots_total, len(circuits))
    results = []
    for i, (c, s) in enumerate(zip(circuits, parts)):
        results.append((executor.run(c, s, seed, tag, i).signed_mean(), s))
    return estimate_p(results)


def raw_pipeline(target: Circuit, executor: Executor, target_shots: int, seed: int) -> MitigatedValue:
    raw = executor.run(target, target_shots, seed, "target", 1).signed_mean()
    return MitigatedValue(raw, "raw", raw, target_shots, predicted_variance=(1 - raw * raw) / target_shots)


def rida_pipeline(target: Circuit, m=None, n_est_circuits: int = 50, est_shots_total: int = 10 ** 7,
                  target_shots: int = 2 ** 17, seed: int = 0, *, executor: Executor | None = None,
                  estimate: DepolarizationEstimate | None = None,
                  randomize_angles: bool = True) -> MitigatedValue:
    """Estimate p from random-inverse circuits, sample the target, and rescale.

    Pass a precomputed ``estimate`` to reuse it across targets of one structure
    class. A singular p_hat falls back to the raw value with a flag.
    """
    if executor is None:
        executor = Executor(m)
    flags = []
    if estimate is None:
        circuits = estimation_circuits(target, n_est_circuits, seed, randomize_angles)
        estimate = measure_depolarization(circuits, executor, est_shots_total, seed)
    if estimate.negative:
        flags.append("negative-p-hat")
    raw = executor.run(target, target_shots, seed, "target", 1).signed_mean()
    shots_used = target_shots + estimate.total_shots
    try:
        value = depolarizing_invert(raw, estimate.p_hat).value
        var = (1 - raw * raw) / (target_shots * (1 - estimate.p_hat) ** 2)
    except SingularityError:
        value, var = raw, None
        flags.append("singular-fallback")
    return MitigatedValue(value, "rida", raw, shots_used, var, estimate.p_hat, tuple(flags))


# ---------------------------------------------------------------- CNOT-only


def cnot_only_estimation(c: Circuit, with_rotations: bool = False, seed: int = 0,
                         rotation_layer: Sequence[np.ndarray] | None = None) -> Circuit:
    """Keep only the two-qubit gates of ``c``.

    With rotations, a one-qubit unitary layer (random Haar unless given) is
    prepended and its inverse appended. That variant does not in general
    return to the all-zero state, which is why it is a flagged option.
    """
    body = [g for g in c.gates if g.arity == 2 and not g.injected]
    pre: list[Gate] = []
    if with_rotations:
        if rotation_layer is None:
            rng = rng_for(seed, "rotation-layer")
            rotation_layer = [unitary_group.rvs(2, random_state=rng) for _ in range(c.n_qubits)]
        if len(rotation_layer) != c.n_qubits:
            raise ValueError("rotation layer needs one unitary per qubit")
        for q, u in enumerate(rotation_layer):
            pre += decompose_one_qubit(np.asarray(u, dtype=complex), q)
    gates = invert_gates(c.basis_change) + pre + body + invert_gates(pre)
    return c.with_gates(gates)


# ---------------------------------------------------------------- ZNE


def quadratic_zne(pts: ZnePoints) -> float:
    """Value at zero of the parabola through (1, x1), (3, x3), (5, x5)."""
    return (3 * pts.x5 - 10 * pts.x3 + 15 * pts.x1) / 8


def _strictly_between(a: float, lo: float, hi: float) -> bool:
    return min(lo, hi) < a < max(lo, hi)


def exponential_zne(pts: ZnePoints) -> float:
    """Zero-noise value of a + b*exp(c*lambda) through the three points, with fallbacks.

    Strictly monotone data use the exact exponential. Otherwise: x1 between
    x3 and x5 gives (x1+x3)/2; x5 between x1 and x3 gives the linear value
    (3*x1-x3)/2; x1 = x5 gives x1; equal points give x1. Two equal neighbours
    with the third different fall back to the matching neighbouring rule.
    """
    x1, x3, x5 = pts.as_tuple()
    d13, d35 = x1 - x3, x3 - x5
    if d13 != 0 and d35 != 0 and (d13 > 0) == (d35 > 0):
        u = d35 / d13
        return x1 + d13 / (u + math.sqrt(u))
    if x1 == x3 == x5:
        return x1
    if x1 == x5:
        return x1
    if _strictly_between(x1, x3, x5):
        return (x1 + x3) / 2
    if _strictly_between(x5, x1, x3):
        return (3 * x1 - x3) / 2
    if x1 == x3:
        # flat start then a step: no decay to extrapolate, average the flat pair
        return (x1 + x3) / 2
    # x3 == x5 != x1: decay has saturated, extrapolate linearly from the first pair
    return (3 * x1 - x3) / 2


def _scaled_target(target: Circuit, executor: Executor, factor: int,
                   scale_noise_model: bool) -> tuple[Circuit, Executor]:
    if scale_noise_model:
        return target, executor.scaled(factor)
    return fold(target, factor), executor


def _quadratic_weights() -> tuple[float, float, float]:
    return (15 / 8, -10 / 8, 3 / 8)


def cnot_qzne_pipeline(target: Circuit, m=None, shots_total: int = 2 ** 17, seed: int = 0, *,
                       est_shots_total: int = 10 ** 6, with_rotations: bool = False,
                       executor: Executor | None = None,
                       scale_noise_model: bool = False) -> MitigatedValue:
    """Per noise factor: rescale by a CNOT-only depolarization estimate, then fit a parabola."""
    if executor is None:
        executor = Executor(m)
    shots = split_shots(shots_total, 3)
    est_shots = split_shots(est_shots_total, 3)
    points, raws, p_hats, flags, var = [], [], [], [], 0.0
    for j, (factor, s, se) in enumerate(zip(NOISE_FACTORS, shots, est_shots)):
        circuit, ex = _scaled_target(target, executor, factor, scale_noise_model)
        est_circuit = cnot_only_estimation(circuit, with_rotations, derive_seed(seed, "cnot-rot", factor))
        est = estimate_p([(ex.run(est_circuit, se, seed, "cnot-estimation", factor).signed_mean(), se)])
        raw = ex.run(circuit, s, seed, "target", factor).signed_mean()
        p_hats.append(est.p_hat)
        raws.append(raw)
        try:
            points.append(depolarizing_invert(raw, est.p_hat).value)
            var += _quadratic_weights()[j] ** 2 * (1 - raw * raw) / (s * (1 - est.p_hat) ** 2)
        except SingularityError:
            points.append(raw)
            flags.append(f"singular-fallback-{factor}")
    if with_rotations:
        flags.append("rotation-layer")
    value = quadratic_zne(ZnePoints(*points, shots=shots))
    method = "cnot_qzne_rot" if with_rotations else "cnot_qzne"
    return MitigatedValue(value, method, raws[0], shots_total + est_shots_total,
                          var if not any(f.startswith("singular") for f in flags) else None,
                          p_hats[0], tuple(flags))


# ---------------------------------------------------------------- TREX


def trex_calibration(target: Circuit) -> Circuit:
    """Measurement-only circuit on the target's measured qubits."""
    return Circuit(target.n_qubits, (), target.measured)


def _as_counts(data: Counts | Iterable[ShotRecord], n_measured: int | None) -> Counts:
    if isinstance(data, Counts):
        return data
    records = list(data)
    if not records:
        raise ValueError("empty shot data")
    k = len(records[0].bits) if n_measured is None else n_measured
    return Counts.from_records(records, k)


def trex_estimate(raw_shots: Counts | Iterable[ShotRecord], calib_shots: Counts | Iterable[ShotRecord],
                  s: int | Sequence[int] | None = None) -> float:
    """f(D1) / f(D0) with f the readout-twirl signed mean over the bits in ``s``.

    ``s`` is a bit mask over measured positions (MSB = first measured qubit)
    or a 0/1 sequence; the default is all measured bits.
    """
    d1 = _as_counts(raw_shots, None)
    d0 = _as_counts(calib_shots, d1.n_measured)
    if s is not None and not isinstance(s, (int, np.integer)):
        s = _int(s)
    f0 = d0.signed_mean(s)
    if f0 == 0:
        raise SingularityError("calibration parity mean is zero")
    return d1.signed_mean(s) / f0


def trex_pipeline(target: Circuit, executor: Executor, target_shots: int, calib_shots_total: int,
                  n_blocks: int, seed: int) -> MitigatedValue:
    """TREX with the calibration drawn on the same (seed, block) streams as RIDA's estimation circuits."""
    calib = trex_calibration(target)
    parts = split_shots(calib_shots_total, n_blocks)
    d0 = None
    for i, s in enumerate(parts):
        counts = executor.run(calib, s, seed, "estimation", i)
        d0 = counts if d0 is None else d0 + counts
    d1 = executor.run(target, target_shots, seed, "target", 1)
    value = trex_estimate(d1, d0)
    return MitigatedValue(value, "trex", d1.signed_mean(), target_shots + calib_shots_total,
                          p_hat=1.0 - d0.signed_mean())


def ezne_trex_pipeline(target: Circuit, m=None, shots_total: int = 2 ** 17, seed: int = 0, *,
                       calib_shots: int = 10 ** 6, executor: Executor | None = None,
                       scale_noise_model: bool = False) -> MitigatedValue:
    """TREX-corrected points at noise factors 1, 3, 5 and an exponential extrapolation.

    One measurement-only calibration is shared by the three points. When
    the noise model itself is scaled the readout error changes too, so each
    factor then gets its own calibration.
    """
    if executor is None:
        executor = Executor(m)
    calib = trex_calibration(target)
    d0 = executor.run(calib, calib_shots, seed, "trex-calibration")
    shots = split_shots(shots_total, 3)
    points, flags = [], []
    for factor, s in zip(NOISE_FACTORS, shots):
        circuit, ex = _scaled_target(target, executor, factor, scale_noise_model)
        d1 = ex.run(circuit, s, seed, "target", factor)
        d0_factor = ex.run(calib, calib_shots, seed, "trex-calibration", factor) if scale_noise_model and factor != 1 else d0
        points.append(trex_estimate(d1, d0_factor))
    pts = ZnePoints(*points, shots=shots)
    value = exponential_zne(pts)
    d13, d35 = pts.x1 - pts.x3, pts.x3 - pts.x5
    if not (d13 != 0 and d35 != 0 and (d13 > 0) == (d35 > 0)):
        flags.append("non-monotone")
    return MitigatedValue(value, "trex_ezne", points[0], shots_total + calib_shots,
                          p_hat=1.0 - d0.signed_mean(), flags=tuple(flags))
