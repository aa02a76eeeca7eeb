import json

import pytest

from depofold.cli import main
from depofold.harness import generate_targets


@pytest.fixture
def circuit_file(tmp_path):
    case = generate_targets(2, 2, 1, seed=3, pauli="Z0")[0]
    path = tmp_path / "c.json"
    path.write_text(case.circuit().to_json())
    return str(path), case.truth


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr().out


def test_targets(capsys):
    code, out = run(["targets", "--qubits", "2", "--layers", "1", "--count", "3"], capsys)
    data = json.loads(out)
    assert code == 0 and len(data) == 3
    assert all(d["residual"] <= 1e-5 for d in data)


def test_simulate_noiseless(circuit_file, capsys):
    path, truth = circuit_file
    code, out = run(["simulate", path, "--noiseless"], capsys)
    data = json.loads(out)
    assert code == 0
    assert data["mean_parity"] == pytest.approx(truth, abs=1e-12)
    assert sum(data["probabilities"].values()) == pytest.approx(1.0)


def test_estimate_p(circuit_file, capsys):
    path, _ = circuit_file
    code, out = run(["estimate-p", path, "--est-circuits", "3", "--est-shots", "30000"], capsys)
    data = json.loads(out)
    assert code == 0 and 0 < data["p_hat"] < 0.1 and data["total_shots"] == 30000


@pytest.mark.parametrize("method", ["raw", "rida", "trex-ezne", "cnot-qzne"])
def test_mitigate_methods(circuit_file, capsys, method):
    path, _ = circuit_file
    code, out = run(["mitigate", path, "--method", method, "--shots", "3000", "--est-circuits", "3",
                     "--est-shots", "3000"], capsys)
    data = json.loads(out)
    assert code == 0 and set(data) >= {"value", "raw", "method", "flags", "shots_used"}


def test_mitigate_rotations_flag(circuit_file, capsys):
    path, _ = circuit_file
    _, out = run(["mitigate", path, "--method", "cnot-qzne", "--rotations", "--shots", "300",
                  "--est-shots", "300"], capsys)
    assert "rotation-layer" in json.loads(out)["flags"]


def test_mitigate_noise_flags(circuit_file, capsys):
    path, _ = circuit_file
    code, out = run(["mitigate", path, "--method", "raw", "--shots", "3000", "--noise-multiplier", "2",
                     "--coherent-angle", "0.1", "--twirls", "4", "--twirl-readout", "off",
                     "--no-rz-error", "--joint-2q-depol"], capsys)
    assert code == 0 and json.loads(out)["method"] == "raw"


def test_mitigate_strict_exit(tmp_path, circuit_file, capsys):
    path, _ = circuit_file
    model = tmp_path / "m.json"
    model.write_text(json.dumps({"p_readout": 0.5}))
    # p_ro = 1/2 and one shot per estimation circuit: seed 1 draws opposite parities, so p_hat = 1
    argv = ["mitigate", path, "--method", "rida", "--noise-model", str(model), "--shots", "10",
            "--est-circuits", "2", "--est-shots", "2", "--seed", "1"]
    code, out = run(argv + ["--strict"], capsys)
    assert code == 2 and "singular-fallback" in json.loads(out)["flags"]
    assert run(argv, capsys)[0] == 0


def test_sweep_csv_and_json(tmp_path, capsys):
    out_json = tmp_path / "r.json"
    code, out = run(["sweep", "--n-qubits", "2", "--layers", "1", "--shots", "900", "--n-strings", "3",
                     "--methods", "raw", "rida", "--est-circuits", "2", "--est-shots", "900",
                     "--json", str(out_json)], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0].startswith("n_qubits,multiplier,shots,method,rmse")
    assert len(lines) == 3
    assert len(json.loads(out_json.read_text())["rows"]) == 2


def test_sweep_deterministic(capsys):
    argv = ["sweep", "--n-qubits", "2", "--layers", "1", "--shots", "900", "--n-strings", "2",
            "--methods", "raw", "--seed", "5"]
    assert run(argv, capsys)[1] == run(argv, capsys)[1]


def test_predict(capsys):
    code, out = run(["predict", "--gamma", "1.0", "--layers", "3", "--sigma2", "0.01"], capsys)
    data = json.loads(out)
    assert data["overhead_shots"]["rida"] == pytest.approx(100.0)
    assert data["overhead_shots"]["cnot_qzne_exact"] == pytest.approx(100 * 501 / 32)


def test_convergence(capsys):
    code, out = run(["convergence", "--n-qubits", "2", "--layers", "1", "--n-strings", "4", "--pool", "6",
                     "--sizes", "1", "6", "--resamples", "50"], capsys)
    data = json.loads(out)
    assert code == 0 and len(data["pool"]) == 6 and len(data["rows"]) == 2


def test_bad_subcommand():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
