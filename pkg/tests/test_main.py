import json
from pathlib import Path

import pytest

import widthlab.main as cli
from widthlab.exceptions import InvariantViolation
from widthlab.main import EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK, main

SMALL = {
    "name": "small",
    "seed": 5,
    "family": {"kind": "smooth_mother", "mother_id": "logistic_ridge", "d": 1, "k": 2},
    "dictionary": {"mode": "grid", "resolution": 4},
    "norm": {"p": 2.0, "domain_size": 100},
    "sweep": {"n_values": [1, 2, 4, 8]},
    "solver": {"trials": 2, "members_per_target": 8},
    "verify": {"instances": 20, "max_dimension": 8, "max_atoms": 6},
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(SMALL))
    return path


def test_sweep_writes_csv(config_path, tmp_path):
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(config_path), "--out", str(out)]) == EXIT_OK
    lines = (out / "small_sweep.csv").read_text().splitlines()
    assert lines[0] == "n,epsilon_used,measured_error,bound_error,cover_size,wall_time_s"
    assert [int(line.split(",")[0]) for line in lines[1:]] == [1, 2, 4, 8]


def test_sweep_output_is_reproducible(config_path, tmp_path):
    outputs = []
    for name, jobs in (("a", "1"), ("b", "1"), ("c", "2")):
        out = tmp_path / name
        main(["sweep", "--config", str(config_path), "--out", str(out), "--jobs", jobs])
        outputs.append((out / "small_sweep.csv").read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_seed_flag_changes_targets(config_path, tmp_path):
    main(["sweep", "--config", str(config_path), "--out", str(tmp_path / "a")])
    main(["sweep", "--config", str(config_path), "--out", str(tmp_path / "b"), "--seed", "6"])
    assert (tmp_path / "a" / "small_sweep.csv").read_text() != (tmp_path / "b" / "small_sweep.csv").read_text()


def test_json_and_svg(config_path, tmp_path):
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(config_path), "--out", str(out), "--format", "json", "--svg"]) == EXIT_OK
    data = json.loads((out / "small_sweep.json").read_text())
    assert len(data["records"]) == 4
    assert (out / "small_sweep.svg").exists()


def test_timing_fills_wall_time(config_path, tmp_path):
    out = tmp_path / "out"
    main(["sweep", "--config", str(config_path), "--out", str(out), "--timing"])
    for line in (out / "small_sweep.csv").read_text().splitlines()[1:]:
        assert float(line.rsplit(",", 1)[1]) >= 0


def test_bad_config_exits_1(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({**SMALL, "sweep": {"n_values": [4, 2]}}))
    assert main(["sweep", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["sweep", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_bad_jobs_exits_1(config_path, tmp_path):
    assert main(["sweep", "--config", str(config_path), "--out", str(tmp_path), "--jobs", "0"]) == EXIT_CONFIG


def test_missing_sobolev_section_exits_1(config_path, tmp_path):
    assert main(["sobolev", "--config", str(config_path), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_invariant_violation_exits_2(config_path, tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise InvariantViolation("error grew with n")

    monkeypatch.setattr("widthlab.handlers.sweep.run_sweep", broken)
    assert main(["sweep", "--config", str(config_path), "--out", str(tmp_path)]) == EXIT_INVARIANT


def test_cover_and_approx(config_path, tmp_path):
    path = tmp_path / "cover.json"
    path.write_text(json.dumps({**SMALL, "sweep": {"n_values": [2, 4], "epsilons": [0.1, 0.5]}}))
    out = tmp_path / "out"
    assert main(["cover", "--config", str(path), "--out", str(out)]) == EXIT_OK
    assert main(["approx", "--config", str(path), "--out", str(out)]) == EXIT_OK
    assert (out / "small_cover.csv").read_text().startswith("epsilon,cover_size,certified")
    assert (out / "small_approx.csv").exists()


def test_verify_writes_json(config_path, tmp_path):
    out = tmp_path / "out"
    assert main(["verify", "--config", str(config_path), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "small_verify.json").read_text())
    assert report["instances"] == 20
    assert report["part1_passes"] == report["part2_passes"] == 20


def test_failed_verify_exits_2(config_path, tmp_path, monkeypatch):
    from widthlab.services.harness import Theorem1Report

    monkeypatch.setattr("widthlab.handlers.verify.verify_theorem1", lambda config: Theorem1Report(instances=1))
    assert main(["verify", "--config", str(config_path), "--out", str(tmp_path)]) == EXIT_INVARIANT
    assert (tmp_path / "small_verify.json").exists()


def test_sobolev_table(tmp_path):
    path = tmp_path / "sobolev.json"
    path.write_text(json.dumps({
        "name": "sob", "seed": 0, "sobolev": {"r": 1, "random_targets": 1},
        "norm": {"domain_size": 512}, "sweep": {"n_values": [1, 2, 3, 4]},
    }))
    out = tmp_path / "out"
    assert main(["sobolev", "--config", str(path), "--out", str(out)]) == EXIT_OK
    text = (out / "sob_sobolev.csv").read_text()
    assert text.startswith("n,r,dimension,analytic")
    assert "# extremal_l1_mass," in text


@pytest.mark.slow
def test_sweep_identical_across_many_jobs(tmp_path):
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps({**SMALL, "dictionary": {"mode": "grid", "resolution": 12},
                                "sweep": {"n_values": [2, 4, 8, 16, 32, 64]},
                                "solver": {"trials": 16}}))
    texts = []
    for jobs in ("1", "8"):
        out = tmp_path / jobs
        main(["sweep", "--config", str(path), "--out", str(out), "--jobs", jobs])
        texts.append((out / "small_sweep.csv").read_bytes())
    assert texts[0] == texts[1]


def test_console_script_points_at_main():
    tomllib = pytest.importorskip("tomllib")
    manifest = tomllib.loads((Path(__file__).parent.parent / "pyproject.toml").read_text())
    target = manifest["project"]["scripts"]["widthlab"]
    module, _, attribute = target.partition(":")
    assert module == "widthlab.main"
    assert getattr(cli, attribute) is main
