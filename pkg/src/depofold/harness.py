"""Target generation, RMSE sweeps and result tables."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from .circuit import Circuit, Gate, Pauli, build_efficient_su2, gate_matrix, observable_circuit
from .errors import SingularityError
from .execution import Executor
from .mitigation import (DepolarizationEstimate, MitigatedValue, cnot_qzne_pipeline,
                         estimation_circuits, ezne_trex_pipeline, measure_depolarization,
                         raw_pipeline, rida_pipeline)
from .noise import NoiseModel, kingston_default, scale
from .rng import derive_seed, rng_for
from .simulator import _PAULI_MATS, apply_unitary, exact_expectation

log = logging.getLogger(__name__)

METHODS = ("raw", "rida", "trex_ezne", "cnot_qzne", "cnot_qzne_rot")
RESIDUAL_TOL = 1e-5
CSV_COLUMNS = ("n_qubits", "multiplier", "shots", "method", "rmse", "mean_p_hat", "n_cases", "n_fallback")


@dataclass
class ExperimentConfig:
    n_qubits: list[int] = field(default_factory=lambda: [4])
    layers: int = 12
    multipliers: list[float] = field(default_factory=lambda: [1.0])
    shots: list[int] = field(default_factory=lambda: [2 ** 17])
    n_strings: int = 100
    methods: list[str] = field(default_factory=lambda: list(METHODS))
    coherent: bool = False
    coherent_angle: float = 0.15
    twirls: int = 250
    twirl_readout: bool = True
    n_est_circuits: int = 10
    est_shots: int = 10 ** 6
    master_seed: int = 0
    noise: dict = field(default_factory=lambda: kingston_default().to_dict())
    scale_noise_model: bool = False
    workers: int = 1
    max_qubits: int = 10
    optimizer_passes: int = 200
    max_retries: int = 5

    def __post_init__(self):
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        if self.n_strings < 1 or self.layers < 0:
            raise ValueError("n_strings must be >= 1 and layers >= 0")
        if any(s < 3 for s in self.shots):
            raise ValueError("shot counts must be >= 3 so they split over three noise factors")
        if any(k < 0 for k in self.multipliers):
            raise ValueError("multipliers must be nonnegative")

    @classmethod
    def full_scale(cls, **overrides) -> ExperimentConfig:
        base = dict(n_qubits=[4, 5, 6, 7], multipliers=[1.0, 4.0],
                    shots=[2 ** k for k in range(10, 21)], n_strings=500,
                    n_est_circuits=50, est_shots=10 ** 7)
        base.update(overrides)
        return cls(**base)

    def base_model(self) -> NoiseModel:
        return NoiseModel.from_dict(self.noise)

    def model(self, multiplier: float) -> NoiseModel:
        m = scale(self.base_model(), multiplier)
        if self.coherent:
            m = replace(m, coherent_angle_rad=self.coherent_angle)
        return m

    def executor(self, multiplier: float) -> Executor:
        twirls = self.twirls if self.coherent else 0
        return Executor(self.model(multiplier), twirls=twirls, twirl_readout=self.twirl_readout,
                        twirl_seed=derive_seed(self.master_seed, "twirl"), max_qubits=self.max_qubits)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str) -> ExperimentConfig:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class TargetCase:
    index: int
    n_qubits: int
    layers: int
    params: tuple[float, ...]
    pauli: Pauli
    target: float
    truth: float
    residual: float

    def circuit(self) -> Circuit:
        body = build_efficient_su2(self.n_qubits, self.layers, self.params)
        return observable_circuit(body, self.pauli)

    def to_dict(self) -> dict:
        return {"index": self.index, "n_qubits": self.n_qubits, "layers": self.layers,
                "params": list(self.params), "pauli": str(self.pauli), "target": self.target,
                "truth": self.truth, "residual": self.residual}

    @classmethod
    def from_dict(cls, d: dict) -> TargetCase:
        return cls(int(d["index"]), int(d["n_qubits"]), int(d["layers"]), tuple(d["params"]),
                   Pauli.parse(d["pauli"]), float(d["target"]), float(d["truth"]), float(d["residual"]))


# ---------------------------------------------------------------- targets


def _pauli_operator(n: int, pauli: Pauli) -> np.ndarray:
    """The observable as a (2,) * 2n tensor (row axes first)."""
    eye = np.eye(2 ** n, dtype=complex).reshape((2,) * (2 * n))
    return apply_unitary(eye, _PAULI_MATS[pauli.label], (pauli.qubit,))


def _sweep(gates: list[Gate], n: int, pauli: Pauli, target: float, tol: float) -> float:
    """One last-to-first pass over the RZ angles; returns the expectation afterwards.

    Keeps the states before every gate and the observable conjugated by all
    later gates, so each angle costs three tiny expectation evaluations. With
    the other angles fixed the expectation is A + R cos(theta - phi); the angle
    is set to the solution nearest its current value, or to the closest
    extreme when the target is out of reach.
    """
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    before = []
    for g in gates:
        before.append(psi)
        psi = apply_unitary(psi, g.matrix(), g.qubits)
    d = 2 ** n
    obs = _pauli_operator(n, pauli)
    value = float(np.real(np.vdot(psi.reshape(-1), obs.reshape(d, d) @ psi.reshape(-1))))
    for i in range(len(gates) - 1, -1, -1):
        g = gates[i]
        if g.kind == "RZ" and abs(value - target) > tol:
            theta = g.angle
            o = obs.reshape(d, d)
            f = []
            for shift in (0.0, math.pi / 2, math.pi):
                phi_state = apply_unitary(before[i], gate_matrix("RZ", theta + shift), g.qubits).reshape(-1)
                f.append(float(np.real(np.vdot(phi_state, o @ phi_state))))
            a = (f[0] + f[2]) / 2
            b = (f[0] - f[2]) / 2
            c = f[1] - a
            r = math.hypot(b, c)
            if r > 1e-12:
                phase = theta + math.atan2(c, b)
                x = (target - a) / r
                if abs(x) <= 1:
                    delta = math.acos(x)
                    new = min((phase + delta, phase - delta),
                              key=lambda t: abs(math.remainder(t - theta, 2 * math.pi)))
                else:
                    new = phase if x > 0 else phase + math.pi
                new = math.remainder(new, 2 * math.pi)
                g = gates[i] = Gate("RZ", g.qubits, new)
                state = apply_unitary(before[i], g.matrix(), g.qubits).reshape(-1)
                value = float(np.real(np.vdot(state, o @ state)))
        u = g.matrix()
        obs = apply_unitary(obs, u.conj().T, g.qubits)
        obs = apply_unitary(obs, u.T, [n + q for q in g.qubits])
    return value


def fit_parameters(n: int, layers: int, params: np.ndarray, pauli: Pauli, target: float,
                   passes: int = 200, tol: float = RESIDUAL_TOL) -> tuple[np.ndarray, float, float]:
    """Coordinate-wise exact solve of <pauli> = target over the ansatz angles.

    Every angle enters through an RZ gate, so a sweep over the RZ gates of
    the built circuit updates all parameters; they are read back in order.
    """
    gates = list(build_efficient_su2(n, layers, params).gates)
    value = math.nan
    for _ in range(passes):
        value = _sweep(gates, n, pauli, target, tol)
        if abs(value - target) <= tol:
            break
    fitted = np.array([g.angle for g in gates if g.kind == "RZ"])
    return fitted, value, abs(value - target)


def stratified_uniform(count: int, rng: np.random.Generator) -> np.ndarray:
    """One uniform draw from each of ``count`` equal strata of [-1, 1], in random order."""
    strata = rng.permutation(count)
    return -1.0 + 2.0 * (strata + rng.random(count)) / count


def generate_targets(n_qubits: int, layers: int, count: int, seed: int, *,
                     pauli: Pauli | str | None = None, passes: int = 200,
                     max_retries: int = 5) -> list[TargetCase]:
    """Ansatz instances whose error-free expectation hits uniformly spread targets.

    A case that misses the residual bound after ``passes`` sweeps is retried
    with fresh parameters; persistent failures are skipped with a warning.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if isinstance(pauli, str):
        pauli = Pauli.parse(pauli)
    rng = rng_for(seed, "targets")
    targets = stratified_uniform(count, rng)
    n_params = 2 * n_qubits * (layers + 1)
    cases = []
    for i, t in enumerate(targets):
        case_rng = rng_for(seed, "target-case", i)
        for attempt in range(max_retries + 1):
            p = pauli or Pauli("XYZ"[int(case_rng.integers(3))], int(case_rng.integers(n_qubits)))
            x0 = case_rng.uniform(0.0, 2 * math.pi, n_params)
            params, _, _ = fit_parameters(n_qubits, layers, x0, p, float(t), passes)
            circuit = build_efficient_su2(n_qubits, layers, params)
            truth = exact_expectation(circuit, p)
            residual = abs(truth - float(t))
            if residual <= RESIDUAL_TOL:
                cases.append(TargetCase(i, n_qubits, layers, tuple(float(v) for v in params), p,
                                        float(t), truth, residual))
                break
            log.info("target %d attempt %d missed by %.3g", i, attempt, residual)
        else:
            warnings.warn(f"target {i} (value {t:.6f}) not reached after {max_retries + 1} attempts; skipped")
    return cases


# ---------------------------------------------------------------- metrics


def rmse(estimates: Sequence[float], truths: Sequence[float]) -> float:
    e = np.asarray(estimates, dtype=float)
    t = np.asarray(truths, dtype=float)
    if e.shape != t.shape or e.size == 0:
        raise ValueError("estimates and truths must be nonempty and of equal length")
    return float(np.sqrt(np.mean((e - t) ** 2)))


def optimal_p(noisy: Sequence[float], truths: Sequence[float]) -> float:
    """The p whose rescaling x / (1 - p) best fits the truths in least squares."""
    x = np.asarray(noisy, dtype=float)
    t = np.asarray(truths, dtype=float)
    k = float(np.dot(x, t) / np.dot(x, x))
    return 1.0 - 1.0 / k


def convergence_study(pool: Sequence[float], subset_sizes: Sequence[int], p_opt: float,
                      resamples: int = 5000, seed: int = 0) -> list[dict]:
    """RMS distance of subset-averaged p' from ``p_opt`` for each subset size."""
    pool = np.asarray(pool, dtype=float)
    if pool.size == 0:
        raise ValueError("pool must be nonempty")
    rows = []
    for k in subset_sizes:
        if not 1 <= k <= pool.size:
            raise ValueError(f"subset size {k} outside 1..{pool.size}")
        if k == pool.size:
            err = abs(float(pool.mean()) - p_opt)
        else:
            rng = rng_for(seed, "convergence", k)
            means = np.array([pool[rng.choice(pool.size, k, replace=False)].mean()
                              for _ in range(resamples)])
            err = float(np.sqrt(np.mean((means - p_opt) ** 2)))
        rows.append({"subset_size": int(k), "rmse": err,
                     "relative": err / abs(p_opt) if p_opt else math.inf})
    return rows


def convergence_experiment(cfg: ExperimentConfig, n_pool: int, subset_sizes: Sequence[int],
                           pauli: str = "Z0", resamples: int = 5000) -> dict:
    """Pool of exact p' values from estimation circuits for one class of targets."""
    n = cfg.n_qubits[0]
    mult = cfg.multipliers[0]
    seed = derive_seed(cfg.master_seed, "convergence", n)
    cases = generate_targets(n, cfg.layers, cfg.n_strings, seed, pauli=pauli,
                             passes=cfg.optimizer_passes, max_retries=cfg.max_retries)
    ex = cfg.executor(mult)
    noisy = [ex.exact_mean(c.circuit()) for c in cases]
    p_opt = optimal_p(noisy, [c.truth for c in cases])
    circuits = estimation_circuits(cases[0].circuit(), n_pool, seed)
    pool = [1.0 - ex.exact_mean(c) for c in circuits]
    rows = convergence_study(pool, subset_sizes, p_opt, resamples, seed)
    return {"n_qubits": n, "multiplier": mult, "optimal_p": p_opt, "pool": pool, "rows": rows}


# ---------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class ResultRow:
    n_qubits: int
    multiplier: float
    shots: int
    method: str
    rmse: float
    mean_p_hat: float
    n_cases: int
    n_fallback: int
    wall_time: float = 0.0


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[ResultRow]
    cases: dict = field(default_factory=dict)

    def to_csv(self, timing: bool = False) -> str:
        return rows_to_csv(self.rows, timing)

    def to_json(self) -> str:
        return json.dumps({"config": self.config.to_dict(),
                           "rows": [asdict(r) for r in self.rows],
                           "cases": self.cases}, indent=2)


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def rows_to_csv(rows: Sequence[ResultRow], timing: bool = False) -> str:
    columns = CSV_COLUMNS + (("wall_time",) if timing else ())
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(getattr(r, c)) for c in columns])
    return buf.getvalue()


def _class_key(c: Circuit) -> str:
    return json.dumps(c.structure())


def _run_method(method: str, circuit: Circuit, ex: Executor, cfg: ExperimentConfig, shots: int,
                seed: int, estimate: DepolarizationEstimate | None) -> MitigatedValue:
    if method == "raw":
        return raw_pipeline(circuit, ex, shots, seed)
    if method == "rida":
        return rida_pipeline(circuit, executor=ex, estimate=estimate, target_shots=shots, seed=seed)
    if method == "trex_ezne":
        try:
            return ezne_trex_pipeline(circuit, shots_total=shots, seed=seed, calib_shots=cfg.est_shots,
                                      executor=ex, scale_noise_model=cfg.scale_noise_model)
        except SingularityError:
            raw = ex.run(circuit, shots, seed, "target", 1).signed_mean()
            return MitigatedValue(raw, "trex_ezne", raw, shots, flags=("singular-fallback",))
    rot = method == "cnot_qzne_rot"
    return cnot_qzne_pipeline(circuit, shots_total=shots, seed=seed, est_shots_total=cfg.est_shots,
                              with_rotations=rot, executor=ex, scale_noise_model=cfg.scale_noise_model)


def evaluate_case(case: TargetCase, cfg: ExperimentConfig, mult_index: int,
                  estimates: dict[str, DepolarizationEstimate]) -> dict[int, dict[str, MitigatedValue]]:
    """All methods at all shot counts for one target; pure in its arguments."""
    ex = cfg.executor(cfg.multipliers[mult_index])
    circuit = case.circuit()
    estimate = estimates.get(_class_key(circuit))
    out = {}
    for shots in cfg.shots:
        seed = derive_seed(cfg.master_seed, "case", case.n_qubits, mult_index, shots, case.index)
        out[shots] = {m: _run_method(m, circuit, ex, cfg, shots, seed, estimate) for m in cfg.methods}
    return out


def _evaluate_star(args):
    return evaluate_case(*args)


def class_estimates(cases: Sequence[TargetCase], cfg: ExperimentConfig,
                    mult_index: int) -> dict[str, DepolarizationEstimate]:
    """One RIDA depolarization estimate per structure class, shared by its targets."""
    ex = cfg.executor(cfg.multipliers[mult_index])
    estimates: dict[str, DepolarizationEstimate] = {}
    for case in cases:
        circuit = case.circuit()
        key = _class_key(circuit)
        if key in estimates:
            continue
        seed = derive_seed(cfg.master_seed, "rida-class", case.n_qubits, mult_index, len(estimates))
        circuits = estimation_circuits(circuit, cfg.n_est_circuits, seed)
        estimates[key] = measure_depolarization(circuits, ex, cfg.est_shots, seed)
    return estimates


def run_experiment(cfg: ExperimentConfig, cases_by_n: dict[int, list[TargetCase]] | None = None
                   ) -> ExperimentResult:
    """RMSE of every method at every (qubits, multiplier, shots) grid point."""
    rows: list[ResultRow] = []
    per_case: dict = {}
    for n in cfg.n_qubits:
        if cases_by_n and n in cases_by_n:
            cases = cases_by_n[n]
        else:
            cases = generate_targets(n, cfg.layers, cfg.n_strings,
                                     derive_seed(cfg.master_seed, "targets", n),
                                     passes=cfg.optimizer_passes, max_retries=cfg.max_retries)
        truths = [c.truth for c in cases]
        for mi, mult in enumerate(cfg.multipliers):
            start = time.perf_counter()
            estimates = class_estimates(cases, cfg, mi) if "rida" in cfg.methods else {}
            jobs = [(c, cfg, mi, estimates) for c in cases]
            if cfg.workers > 1:
                with ProcessPoolExecutor(cfg.workers) as pool:
                    results = list(pool.map(_evaluate_star, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))
            else:
                results = [evaluate_case(*job) for job in jobs]
            elapsed = time.perf_counter() - start
            for shots in cfg.shots:
                for method in cfg.methods:
                    values = [r[shots][method] for r in results]
                    p_hats = [v.p_hat for v in values if v.p_hat is not None]
                    rows.append(ResultRow(
                        n, float(mult), int(shots), method,
                        rmse([v.value for v in values], truths),
                        float(np.mean(p_hats)) if p_hats else math.nan,
                        len(values),
                        sum(any("singular" in f for f in v.flags) for v in values),
                        elapsed / (len(cfg.shots) * len(cfg.methods)),
                    ))
                    per_case[f"{n}/{mult}/{shots}/{method}"] = [v.value for v in values]
        per_case[f"{n}/truths"] = truths
    return ExperimentResult(cfg, rows, per_case)
