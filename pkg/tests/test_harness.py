import json
import math

import numpy as np
import pytest

from depofold.circuit import Pauli
from depofold.harness import (CSV_COLUMNS, ExperimentConfig, ResultRow, TargetCase,
                              convergence_study, fit_parameters, generate_targets, optimal_p, rmse,
                              rows_to_csv, run_experiment, stratified_uniform)
from depofold.noise import kingston_default
from depofold.rng import rng_for
from depofold.simulator import exact_expectation


def small_config(**kw):
    base = dict(n_qubits=[3], layers=2, shots=[3000], n_strings=6, methods=["raw", "rida"],
                n_est_circuits=3, est_shots=3000, master_seed=7)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_defaults():
    cfg = ExperimentConfig()
    assert cfg.n_qubits == [4] and cfg.layers == 12 and cfg.shots == [2 ** 17]
    assert cfg.n_strings == 100 and cfg.twirls == 250 and cfg.coherent_angle == 0.15
    assert cfg.base_model() == kingston_default()


def test_full_scale():
    cfg = ExperimentConfig.full_scale()
    assert cfg.n_qubits == [4, 5, 6, 7] and cfg.n_strings == 500
    assert cfg.shots[0] == 2 ** 10 and cfg.shots[-1] == 2 ** 20 and len(cfg.shots) == 11
    assert cfg.n_est_circuits == 50 and cfg.est_shots == 10 ** 7


@pytest.mark.parametrize("kw", [dict(methods=["pec"]), dict(shots=[2]), dict(multipliers=[-1.0]),
                                dict(n_strings=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ExperimentConfig(**kw)


def test_config_round_trip(tmp_path):
    cfg = small_config(coherent=True)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_json(str(path)) == cfg
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"bogus": 1})


def test_coherent_executor_twirls():
    cfg = small_config(coherent=True, twirls=8)
    ex = cfg.executor(1.0)
    assert ex.twirls == 8 and ex.model.coherent_angle_rad == 0.15
    assert small_config().executor(1.0).twirls == 0


def test_stratified_uniform():
    x = stratified_uniform(100, np.random.default_rng(0))
    assert np.all((x >= -1) & (x < 1))
    assert sorted(np.floor((x + 1) * 50).astype(int)) == list(range(100))


@pytest.mark.parametrize("target", [-0.9, 0.0, 0.37, 0.999])
def test_fit_parameters_hits_target(target):
    rng = np.random.default_rng(1)
    n, layers = 3, 3
    x0 = rng.uniform(0, 2 * math.pi, 2 * n * (layers + 1))
    params, value, residual = fit_parameters(n, layers, x0, Pauli("Z", 1), target)
    assert residual <= 1e-5
    from depofold.circuit import build_efficient_su2

    assert exact_expectation(build_efficient_su2(n, layers, params), "Z1") == pytest.approx(value, abs=1e-12)


def test_generate_targets():
    cases = generate_targets(3, 3, 12, seed=4)
    assert len(cases) == 12
    assert max(c.residual for c in cases) <= 1e-5
    for c in cases:
        assert exact_expectation(c.circuit(), c.pauli) == pytest.approx(c.truth, abs=1e-12)
    assert generate_targets(3, 3, 12, seed=4) == cases


def test_generate_targets_fixed_pauli():
    cases = generate_targets(2, 1, 4, seed=0, pauli="X1")
    assert all(c.pauli == Pauli("X", 1) for c in cases)


def test_target_case_round_trip():
    case = generate_targets(2, 1, 1, seed=2)[0]
    assert TargetCase.from_dict(json.loads(json.dumps(case.to_dict()))) == case


def test_rmse():
    assert rmse([1, 2], [1, 2]) == 0
    assert rmse([0, 0], [3, 4]) == pytest.approx(math.sqrt(12.5))
    with pytest.raises(ValueError):
        rmse([], [])


def test_optimal_p():
    truths = np.array([0.5, -0.2, 0.9])
    assert optimal_p(0.8 * truths, truths) == pytest.approx(0.2)


def test_convergence_full_pool():
    pool = [0.1, 0.2, 0.3]
    rows = convergence_study(pool, [3], 0.25)
    assert rows[0]["rmse"] == pytest.approx(0.05, abs=1e-15)


def test_convergence_decreases():
    pool = rng_for(0, "pool").normal(0.1, 0.02, 50)
    rows = convergence_study(pool, [1, 5, 25], float(np.mean(pool)), resamples=2000)
    errs = [r["rmse"] for r in rows]
    assert errs[0] > errs[1] > errs[2]


def test_convergence_rejects_bad_size():
    with pytest.raises(ValueError):
        convergence_study([0.1], [2], 0.1)


def test_rows_to_csv():
    row = ResultRow(4, 1.0, 1024, "rida", 0.1, 0.05, 10, 0, 3.2)
    text = rows_to_csv([row])
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert text.splitlines()[1] == "4,1,1024,rida,0.10000000000000001,0.050000000000000003,10,0"
    assert rows_to_csv([row], timing=True).splitlines()[0].endswith(",wall_time")


def test_run_experiment_shapes_and_determinism():
    cfg = small_config(multipliers=[1.0, 3.0])
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    assert len(a.rows) == 4
    assert a.to_csv() == b.to_csv()
    rida = [r for r in a.rows if r.method == "rida"]
    assert rida[1].mean_p_hat > rida[0].mean_p_hat > 0
    assert json.loads(a.to_json())["config"]["master_seed"] == 7


def test_run_experiment_workers_identical():
    cfg = small_config(methods=["raw", "rida", "trex_ezne"])
    serial = run_experiment(cfg).to_csv()
    parallel = run_experiment(small_config(methods=["raw", "rida", "trex_ezne"], workers=2)).to_csv()
    assert serial == parallel


def test_zero_noise_rmse_is_shot_error():
    cfg = small_config(noise={**kingston_default().to_dict(), "p_2q": 0.0, "p_1q": 0.0,
                              "p_readout": 0.0, "t1_us": math.inf, "t2_us": math.inf},
                       n_strings=20, shots=[4096])
    res = run_experiment(cfg)
    truths = np.array(res.cases["3/truths"])
    expected = math.sqrt(np.mean((1 - truths ** 2) / 4096))
    for r in res.rows:
        assert r.mean_p_hat == 0.0 or r.method == "raw"
        assert r.rmse == pytest.approx(expected, rel=0.5)
