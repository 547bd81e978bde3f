import json
import subprocess
import sys

import pytest

from beliefbank.cli import main
from beliefbank.datagen import load_dir
from beliefbank.oracle import SyntheticOracle, SyntheticOracleConfig
from beliefbank.stubserver import StubServer

SMALL = ["--n-concepts", "6", "--n-entities", "4", "--n-dev-entities", "2", "--properties-per-concept", "3"]


@pytest.fixture
def data_dir(tmp_path):
    assert main(["datagen", "--out", str(tmp_path / "data"), "--seed", "1", *SMALL]) == 0
    return tmp_path / "data"


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    top = capsys.readouterr().out
    for sub in ("datagen", "calibrate", "run", "solve", "export-wcnf", "inspect", "correct", "report"):
        assert sub in top
        with pytest.raises(SystemExit) as exc:
            main([sub, "--help"])
        assert exc.value.code == 0


def test_run_help_documents_flags(capsys):
    with pytest.raises(SystemExit):
        main(["run", "--help"])
    out = capsys.readouterr().out
    for flag in ("--data", "--config", "--seed", "--manifest", "--oracle-url", "--lam", "--out"):
        assert flag in out


def test_unknown_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_run_without_data_names_the_flag(capsys):
    assert main(["run", "--config", "raw"]) == 1
    err = capsys.readouterr().err
    assert "--data" in err and len(err.strip().splitlines()) == 1


def test_run_with_missing_directory(tmp_path, capsys):
    assert main(["run", "--data", str(tmp_path / "nope")]) == 1
    assert "--data" in capsys.readouterr().err


def test_unknown_configuration(data_dir, capsys):
    assert main(["run", "--data", str(data_dir), "--config", "bogus", "--no-calibrate"]) == 1
    assert "bogus" in capsys.readouterr().err


def test_config_file_validation(tmp_path, capsys):
    bad = tmp_path / "c.json"
    bad.write_text(json.dumps({"solver": {"lambda": 1}}))
    assert main(["--config-file", str(bad), "datagen", "--out", str(tmp_path / "d")]) == 1
    assert "solver.lambda" in capsys.readouterr().err
    bad.write_text("{")
    assert main(["--config-file", str(bad), "datagen", "--out", str(tmp_path / "d")]) == 1


def test_pipeline_and_manifest_replay(tmp_path, data_dir, capsys):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"experiment": {"n_batches": 4}, "grid": {"lam": [0.5, 1.0]}}))
    cal = tmp_path / "cal.json"
    assert main(["--config-file", str(conf), "calibrate", "--data", str(data_dir), "--out", str(cal)]) == 0
    assert json.loads(cal.read_text())["lam"] in (0.5, 1.0)
    out = tmp_path / "rep" / "run"
    args = ["--config-file", str(conf), "run", "--data", str(data_dir), "--config", "raw",
            "--config", "feedback_relevant_plus_constraints", "--seed", "3", "--calibration", str(cal),
            "--out", str(out), "--save-banks", str(tmp_path / "banks")]
    assert main(args) == 0
    csv = out.with_suffix(".csv")
    assert len(csv.read_text().splitlines()) == 1 + 2 * 4
    manifest = json.loads(out.with_suffix(".manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["experiment"]["n_batches"] == 4
    assert set(manifest["dataset_sha256"]) == {"templates.jsonl", "constraints.jsonl", "facts.jsonl",
                                               "dev_facts.jsonl"}
    again = tmp_path / "rep2" / "run"
    assert main(["run", "--manifest", str(out.with_suffix(".manifest.json")), "--out", str(again)]) == 0
    assert again.with_suffix(".csv").read_bytes() == csv.read_bytes()

    assert main(["report", str(csv), "--out", str(tmp_path / "merged")]) == 0
    assert "after batch ->" in capsys.readouterr().out

    # tampered data is refused
    (data_dir / "facts.jsonl").write_text((data_dir / "facts.jsonl").read_text() + "\n")
    assert main(["run", "--manifest", str(out.with_suffix(".manifest.json")), "--out", str(again)]) == 1
    assert "facts.jsonl" in capsys.readouterr().err


def test_bank_commands(tmp_path, data_dir, capsys):
    banks = tmp_path / "banks"
    assert main(["run", "--data", str(data_dir), "--config", "raw", "--no-calibrate",
                 "--out", str(tmp_path / "r"), "--save-banks", str(banks)]) == 0
    bank = banks / "raw.jsonl"
    entity = load_dir(data_dir).entities[0]
    capsys.readouterr()

    assert main(["inspect", entity, "--bank", str(bank), "--data", str(data_dir)]) == 0
    out = capsys.readouterr().out
    assert "consistency" in out and entity in out
    assert main(["inspect", "nobody", "--bank", str(bank)]) == 1

    assert main(["solve", "--bank", str(bank), "--data", str(data_dir), "--lam", "0.5",
                 "--out", str(tmp_path / "solved.jsonl")]) == 0
    assert "flips" in capsys.readouterr().out

    wcnf = tmp_path / "e.wcnf"
    assert main(["export-wcnf", "--bank", str(bank), "--data", str(data_dir), "--entity", entity,
                 "--out", str(wcnf)]) == 0
    assert wcnf.read_text().startswith("c ")

    script = tmp_path / "s.txt"
    tid = load_dir(data_dir).templates.__iter__().__next__().template_id
    script.write_text(f"show {entity}\nset {entity} {tid} T\ndone\n")
    transcript = tmp_path / "t.txt"
    assert main(["correct", "--bank", str(bank), "--data", str(data_dir), "--script", str(script),
                 "--transcript", str(transcript), "--out", str(tmp_path / "c.jsonl")]) == 0
    assert f"{entity} {tid} := T (human)" in transcript.read_text()
    assert main(["solve", "--bank", str(tmp_path / "missing.jsonl"), "--data", str(data_dir)]) == 1


def test_remote_oracle_from_env(tmp_path, data_dir, monkeypatch):
    data = load_dir(data_dir)
    oracle = SyntheticOracle(data.gold, data.templates, data.grounds(data.entities + data.dev_entities),
                             SyntheticOracleConfig(seed=0))
    with StubServer(oracle, data.templates, data.entities + data.dev_entities) as stub:
        monkeypatch.setenv("BELIEFBANK_ORACLE_URL", stub.url)
        assert main(["run", "--data", str(data_dir), "--oracle", "remote", "--config", "raw",
                     "--no-calibrate", "--out", str(tmp_path / "remote")]) == 0
    assert main(["run", "--data", str(data_dir), "--config", "raw", "--no-calibrate",
                 "--out", str(tmp_path / "local")]) == 0
    assert (tmp_path / "remote.csv").read_bytes() == (tmp_path / "local.csv").read_bytes()


def test_remote_abort_flushes_partial_reports(tmp_path, data_dir, monkeypatch, capsys):
    data = load_dir(data_dir)
    oracle = SyntheticOracle(data.gold, data.templates, data.grounds(), SyntheticOracleConfig())
    with StubServer(oracle, data.templates, data.entities, always_fail=True) as stub:
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"oracle": {"backoff": 0.001}}))
        rc = main(["--config-file", str(conf), "run", "--data", str(data_dir), "--oracle", "remote",
                   "--oracle-url", stub.url, "--config", "raw", "--no-calibrate", "--out", str(tmp_path / "r")])
    assert rc == 1
    assert "gave up after 3 retries" in capsys.readouterr().err
    assert (tmp_path / "r.csv").read_text().splitlines() == ["config,batch,f1,consistency,consistency_fwd_mutex,flips,beliefs"]


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "beliefbank.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "0.1.0" in proc.stdout
