"""Command-line interface: exit codes, file outputs, round trips."""

import json

from waasim.cli import main
from waasim.workflow import parse_workload


def write_config(tmp_path, **overrides):
    doc = {
        "templates": [
            {"name": "vina01", "shape": "vina", "ligand_count": 3,
             "budgets": [0.002, 0.005, 0.008, 0.012],
             "runtimes": [20.0, 12.0, 10.0]},
        ],
        "workflow_count": 4,
        "arrival_rates": [2.0],
        "schedulers": ["ebpsm"],
        "repetitions": 1,
        "seed_base": 3,
    }
    doc.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


def test_run_command(tmp_path, capsys):
    config = write_config(tmp_path)
    out = tmp_path / "results"
    assert main(["run", "--config", str(config), "--out", str(out)]) == 0
    assert (out / "summary.csv").exists()
    assert "wrote 1 runs" in capsys.readouterr().out


def test_run_command_bad_config(tmp_path, capsys):
    config = write_config(tmp_path, schedulers=["bogus"])
    assert main(["run", "--config", str(config)]) == 2
    assert "error" in capsys.readouterr().err


def test_run_command_missing_file(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2


def test_validate_command(tmp_path, capsys):
    doc = {"id": "w", "budget": 0.5, "tasks": [
        {"id": "A", "kind": "a", "runtime": 5, "parents": []},
        {"id": "B", "kind": "b", "runtime": 5, "parents": ["A"]},
    ]}
    path = tmp_path / "wf.json"
    path.write_text(json.dumps(doc))
    assert main(["validate", "--workflow", str(path)]) == 0
    assert "2 tasks" in capsys.readouterr().out

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"id": "w", "budget": 0.5, "tasks": [
        {"id": "A", "kind": "a", "runtime": 5, "parents": ["Z"]},
    ]}))
    assert main(["validate", "--workflow", str(bad)]) == 2


def test_gen_workload_roundtrip(tmp_path, capsys):
    out = tmp_path / "wl.json"
    args = ["gen-workload", "--template", "chr22", "--template", "vina01",
            "--count", "6", "--rate", "0.5", "--seed", "11", "--out", str(out)]
    assert main(args) == 0
    workload = parse_workload(out.read_text())
    assert len(workload.workflows) == 6
    assert workload.arrival_rate == 0.5

    again = tmp_path / "wl2.json"
    assert main(args[:-1] + [str(again)]) == 0
    assert out.read_text() == again.read_text()


def test_gen_workload_stdout_and_budget_level(capsys):
    assert main(["gen-workload", "--template", "vina02", "--count", "2",
                 "--rate", "6", "--seed", "1", "--budget-level", "2"]) == 0
    workload = parse_workload(capsys.readouterr().out)
    assert {w.budget for w in workload.workflows} == {0.04}


def test_compare_command(tmp_path, capsys):
    config = write_config(
        tmp_path,
        schedulers=["ebpsm-homogeneous", "fcfs"],
        cloud={"catalog": [{"name": "t2.micro", "vcpus": 1, "memory_mb": 1024,
                            "price_per_second": 0.0000041, "speed_factor": 1.0}]},
    )
    out = tmp_path / "results"
    assert main(["run", "--config", str(config), "--out", str(out)]) == 0
    a = out / "runs" / "ebpsm-homogeneous_rate2_rep0.report.json"
    b = out / "runs" / "fcfs_rate2_rep0.report.json"
    capsys.readouterr()
    assert main(["compare", str(a), str(b)]) == 0
    text = capsys.readouterr().out
    assert "speedup_a_vs_b" in text

    other = write_config(tmp_path, seed_base=99)
    out2 = tmp_path / "results2"
    assert main(["run", "--config", str(other), "--out", str(out2)]) == 0
    c = out2 / "runs" / "ebpsm_rate2_rep0.report.json"
    assert main(["compare", str(a), str(c)]) == 2
