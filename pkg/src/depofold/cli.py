"""Command-line entry point: ``depofold <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .analytics import predictions
from .circuit import Circuit
from .execution import Executor
from .harness import ExperimentConfig, convergence_experiment, generate_targets, run_experiment
from .mitigation import (cnot_qzne_pipeline, estimation_circuits, ezne_trex_pipeline,
                         measure_depolarization, raw_pipeline, rida_pipeline)
from .noise import NoiseModel, kingston_default, scale
from .simulator import probabilities, run_density


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _noise_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("noise")
    g.add_argument("--noise-model", help="NoiseModel JSON file (default: Kingston medians)")
    g.add_argument("--noiseless", action="store_true", help="switch every error source off")
    g.add_argument("--noise-multiplier", type=float, default=1.0)
    g.add_argument("--coherent-angle", type=float, default=None, help="RX over-rotation after 2q gates (rad)")
    g.add_argument("--no-rz-error", action="store_true", help="RZ gates carry no gate error")
    g.add_argument("--joint-2q-depol", action="store_true", help="15-Pauli two-qubit depolarizer")
    g.add_argument("--twirls", type=int, default=0, help="Pauli-twirled instances per circuit")
    g.add_argument("--twirl-readout", type=_on_off, default=True, metavar="on|off")
    g.add_argument("--max-qubits", type=int, default=10)


def _model(args) -> NoiseModel:
    if args.noiseless:
        m = NoiseModel()
    elif args.noise_model:
        with open(args.noise_model) as fh:
            m = NoiseModel.from_json(fh.read())
    else:
        m = kingston_default()
    m = scale(m, args.noise_multiplier)
    changes = {}
    if args.coherent_angle is not None:
        changes["coherent_angle_rad"] = args.coherent_angle
    if args.no_rz_error:
        changes["rz_error"] = False
    if args.joint_2q_depol:
        changes["joint_2q_depol"] = True
    return replace(m, **changes)


def _executor(args) -> Executor:
    return Executor(_model(args), twirls=args.twirls, twirl_readout=args.twirl_readout,
                    twirl_seed=args.seed, max_qubits=args.max_qubits)


def _load_circuit(path: str) -> Circuit:
    with open(path) as fh:
        return Circuit.from_json(fh.read())


def _emit(payload, out: str | None) -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for name in ("n_qubits", "multipliers", "shots", "methods"):
        value = getattr(args, name, None)
        if value:
            overrides[name] = value
    for name in ("layers", "n_strings", "n_est_circuits", "est_shots", "master_seed", "workers", "twirls"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "coherent", False):
        overrides["coherent"] = True
    if getattr(args, "scale_noise_model", False):
        overrides["scale_noise_model"] = True
    return ExperimentConfig.from_dict({**cfg.to_dict(), **overrides})


def cmd_targets(args) -> int:
    cases = generate_targets(args.qubits, args.layers, args.count, args.seed, pauli=args.pauli)
    _emit([c.to_dict() for c in cases], args.out)
    return 0


def cmd_simulate(args) -> int:
    c = _load_circuit(args.circuit)
    ex = _executor(args)
    dists = ex.distributions(c)
    k = len(c.measured)
    mean = sum(dists) / len(dists)
    table = {format(i, f"0{k}b"): float(v) for i, v in enumerate(mean)}
    _emit({"measured": list(c.measured), "probabilities": table,
           "mean_parity": ex.exact_mean(c)}, args.out)
    return 0


def cmd_estimate_p(args) -> int:
    c = _load_circuit(args.circuit)
    ex = _executor(args)
    est = measure_depolarization(estimation_circuits(c, args.est_circuits, args.seed), ex,
                                 args.est_shots, args.seed)
    _emit({"p_hat": est.p_hat, "stderr": est.stderr(), "total_shots": est.total_shots,
           "per_circuit": [list(x) for x in est.per_circuit]}, args.out)
    return 0


def cmd_mitigate(args) -> int:
    c = _load_circuit(args.circuit)
    ex = _executor(args)
    if args.method == "raw":
        mv = raw_pipeline(c, ex, args.shots, args.seed)
    elif args.method == "rida":
        mv = rida_pipeline(c, n_est_circuits=args.est_circuits, est_shots_total=args.est_shots,
                           target_shots=args.shots, seed=args.seed, executor=ex)
    elif args.method == "trex-ezne":
        mv = ezne_trex_pipeline(c, shots_total=args.shots, seed=args.seed, calib_shots=args.est_shots,
                                executor=ex, scale_noise_model=args.scale_noise_model)
    else:
        mv = cnot_qzne_pipeline(c, shots_total=args.shots, seed=args.seed, est_shots_total=args.est_shots,
                                with_rotations=args.rotations, executor=ex,
                                scale_noise_model=args.scale_noise_model)
    _emit(mv.to_dict(), args.out)
    if args.strict and any("singular" in f for f in mv.flags):
        return 2
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    result = run_experiment(cfg)
    _emit(result.to_csv(timing=args.timing), args.out)
    if args.json:
        _emit(result.to_json(), args.json)
    if args.strict and any(r.n_fallback for r in result.rows):
        return 2
    return 0


def cmd_predict(args) -> int:
    _emit(predictions(args.gamma, args.layers, args.sigma2, args.p, args.shots, args.weights), args.out)
    return 0


def cmd_convergence(args) -> int:
    cfg = _config(args)
    _emit(convergence_experiment(cfg, args.pool, args.sizes, args.pauli, args.resamples), args.out)
    return 0


def _sweep_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="ExperimentConfig JSON; flags below override it")
    p.add_argument("--n-qubits", dest="n_qubits", type=int, nargs="+")
    p.add_argument("--layers", type=int)
    p.add_argument("--multipliers", type=float, nargs="+")
    p.add_argument("--shots", type=int, nargs="+")
    p.add_argument("--n-strings", dest="n_strings", type=int)
    p.add_argument("--methods", nargs="+")
    p.add_argument("--est-circuits", dest="n_est_circuits", type=int)
    p.add_argument("--est-shots", dest="est_shots", type=int)
    p.add_argument("--seed", dest="master_seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--twirls", type=int)
    p.add_argument("--coherent", action="store_true", help="0.15 rad over-rotation plus twirling")
    p.add_argument("--scale-noise-model", action="store_true")
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="depofold", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("targets", help="ansatz targets with uniform error-free expectations")
    p.add_argument("--qubits", type=int, default=4)
    p.add_argument("--layers", type=int, default=12)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--pauli", help="fix the observable, e.g. Z0")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_targets)

    for name, func, helptext in (
        ("simulate", cmd_simulate, "exact measured distribution of a circuit JSON"),
        ("estimate-p", cmd_estimate_p, "depolarization estimate from random-inverse circuits"),
        ("mitigate", cmd_mitigate, "one mitigated expectation value"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("circuit", help="circuit JSON file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--shots", type=int, default=2 ** 17)
        p.add_argument("--est-circuits", type=int, default=50)
        p.add_argument("--est-shots", type=int, default=10 ** 7)
        p.add_argument("--out")
        _noise_args(p)
        if name == "mitigate":
            p.add_argument("--method", choices=("rida", "trex-ezne", "cnot-qzne", "raw"), default="rida")
            p.add_argument("--rotations", action="store_true", help="cnot-qzne with a random rotation layer")
            p.add_argument("--scale-noise-model", action="store_true",
                           help="amplify noise by scaling rates instead of folding")
            p.add_argument("--strict", action="store_true", help="exit 2 on a singular fallback")
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="RMSE table over the config grid (CSV)")
    _sweep_args(p)
    p.add_argument("--json", help="also write rows, config and per-case values as JSON")
    p.add_argument("--timing", action="store_true", help="add a wall_time column")
    p.add_argument("--strict", action="store_true", help="exit 2 if any case fell back to raw")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("predict", help="closed-form shot overheads and errors (JSON)")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--layers", type=float, required=True)
    p.add_argument("--sigma2", type=float, default=1e-4)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--shots", type=float, default=2 ** 17)
    p.add_argument("--weights", type=float, nargs="+", default=[1.0])
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("convergence", help="p' error versus number of estimation circuits")
    _sweep_args(p)
    p.add_argument("--pool", type=int, default=50)
    p.add_argument("--sizes", type=int, nargs="+", default=[1, 5, 10, 25, 50])
    p.add_argument("--pauli", default="Z0")
    p.add_argument("--resamples", type=int, default=5000)
    p.set_defaults(func=cmd_convergence)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
