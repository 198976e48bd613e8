import json

import pytest

from qga.cli import EXIT_OK, EXIT_RESUME, EXIT_USAGE, main
from qga.hamiltonian import computational_hamiltonian, random_problem_hamiltonian
from qga.settings import ExperimentConfig
from qga.states import RngStream

@pytest.fixture(autouse=True)
def data_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("QGA_DATA_DIR", str(tmp_path / "data"))

def test_run_writes_trajectory(tmp_path, capsys):
    out = tmp_path / "run.jsonl"
    code = main(["run", "--c", "1", "--cloner", "uqcm", "--generations", "10", "--seed", "7", "--out", str(out)])
    assert code == EXIT_OK
    [line] = out.read_text(encoding="utf-8").splitlines()
    data = json.loads(line)
    assert len(data["fidelity_series"]) == 11
    assert data["variant"] == "uqcm/off"
    assert "F_QGA" in capsys.readouterr().out

def test_run_is_byte_identical(tmp_path):
    outputs = []
    for name in ("a.jsonl", "b.jsonl"):
        out = tmp_path / name
        args = ["run", "--c", "1", "--cloner", "bcqo", "--mutation", "sampled", "--pm", "0.041666666666666664", "--generations", "4", "--out", str(out)]
        assert main(args) == EXIT_OK
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]

def test_run_rejects_probability_without_mutation():
    with pytest.raises(SystemExit) as e:
        main(["run", "--c", "1", "--cloner", "uqcm", "--pm", "0.1"])
    assert e.value.code == EXIT_USAGE

def test_run_requires_register_size():
    with pytest.raises(SystemExit) as e:
        main(["run", "--cloner", "uqcm"])
    assert e.value.code == EXIT_USAGE

def test_run_with_invalid_layout():
    assert main(["run", "--n", "6", "--c", "1", "--cloner", "bcqo"]) == EXIT_USAGE

def test_spectral_report(tmp_path):
    ham = tmp_path / "h.ham"
    random_problem_hamiltonian(2, RngStream(80)).save(str(ham))
    out = tmp_path / "report.json"
    code = main(["spectral", "--ham", str(ham), "--cloner", "uqcm", "--out", str(out)])
    data = json.loads(out.read_text(encoding="utf-8"))
    assert code == EXIT_OK
    assert data["m"] == 1
    assert not data["degenerate"] and not data["oscillating"]
    assert len(data["eigenvalues"]) == 6
    top = data["eigenvalues"][0]
    assert (top["re"] ** 2 + top["im"] ** 2) ** 0.5 == pytest.approx(1.0, abs=1e-8)

def test_spectral_dense_over_cap(tmp_path):
    ham = tmp_path / "h.ham"
    random_problem_hamiltonian(2, RngStream(80)).save(str(ham))
    assert main(["spectral", "--ham", str(ham), "--cloner", "bcqo", "--method", "dense"]) == EXIT_USAGE

@pytest.mark.parametrize("flags", [["--c", "0"], ["--c", "1", "--n", "0"], ["--c", "1", "--generations", "0"]])
def test_run_rejects_non_positive_sizes(flags):
    with pytest.raises(SystemExit) as e:
        main(["run", "--cloner", "uqcm", *flags])
    assert e.value.code == EXIT_USAGE

def test_spectral_computational_bcqo(tmp_path):
    ham = tmp_path / "h.ham"
    computational_hamiltonian(1).save(str(ham))
    out = tmp_path / "report.json"
    main(["spectral", "--ham", str(ham), "--cloner", "bcqo", "--topk", "4", "--out", str(out)])
    data = json.loads(out.read_text(encoding="utf-8"))
    assert len(data["eigenvalues"]) == 4
    assert abs(complex(data["eigenvalues"][0]["re"], data["eigenvalues"][0]["im"])) == pytest.approx(1.0, abs=1e-8)

def test_spectral_malformed_file(tmp_path):
    ham = tmp_path / "h.ham"
    ham.write_text("garbage", encoding="utf-8")
    assert main(["spectral", "--ham", str(ham), "--cloner", "bcqo"]) == EXIT_USAGE

def test_spectral_rejects_sampled_mutation(tmp_path):
    ham = tmp_path / "h.ham"
    computational_hamiltonian(1).save(str(ham))
    with pytest.raises(SystemExit) as e:
        main(["spectral", "--ham", str(ham), "--cloner", "bcqo", "--mutation", "sampled"])
    assert e.value.code == EXIT_USAGE

def write_config(tmp_path, **changes):
    config = ExperimentConfig()
    config.c = 1
    config.num_hamiltonians = 1
    config.num_initial_states = 2
    config.generations = 6
    config.burn_in = 2
    config.variants = ["bcqo/off", "uqcm/off"]
    config.topk = 4
    config.output_dir = str(tmp_path / "bench")
    for key, value in changes.items():
        setattr(config, key, value)
    path = tmp_path / "config.json"
    config.save(str(path))
    return str(path), config.output_dir

def test_bench_and_resume(tmp_path):
    config_path, output_dir = write_config(tmp_path)
    assert main(["bench", "--config", config_path, "--workers", "1"]) == EXIT_OK
    records = tmp_path / "bench" / "records.jsonl"
    before = records.read_bytes()
    assert main(["bench", "--config", config_path, "--resume", "--workers", "1"]) == EXIT_OK
    assert records.read_bytes() == before

def test_bench_resume_conflict(tmp_path):
    config_path, _ = write_config(tmp_path)
    assert main(["bench", "--config", config_path, "--workers", "1"]) == EXIT_OK
    config_path, _ = write_config(tmp_path, seed=5)
    assert main(["bench", "--config", config_path, "--resume", "--workers", "1"]) == EXIT_RESUME

def test_compare(tmp_path, capsys):
    config_path, output_dir = write_config(tmp_path)
    assert main(["bench", "--config", config_path, "--workers", "1"]) == EXIT_OK
    capsys.readouterr()
    compare_dir = tmp_path / "compare"
    code = main([
        "compare",
        "--records", str(tmp_path / "bench" / "records.jsonl"),
        "--spectral", str(tmp_path / "bench" / "spectral.jsonl"),
        "--out", str(compare_dir)
    ])
    assert code == EXIT_OK
    assert (compare_dir / "scatter.csv").read_text(encoding="utf-8").startswith("ham_hash,variant")
    assert set(json.loads(capsys.readouterr().out)) == {"bcqo/off", "uqcm/off"}
