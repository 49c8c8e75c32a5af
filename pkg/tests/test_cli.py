from __future__ import annotations

import json
from pathlib import Path

import pytest

import sbdc
from sbdc.app import main
from sbdc.benchmark import BENCHMARK_CELLS, benchmark_scenario_dict
from sbdc.scenario import load_scenario
from sbdc.scenario_handler import EXIT_ERROR, EXIT_FAILED, EXIT_OK, ScenarioHandler

SCHEMAS = Path(sbdc.__file__).parent / "schemas"


def schema_required(name):
    return json.loads((SCHEMAS / name).read_text())


def write_cell(directory, name, **changes):
    doc = benchmark_scenario_dict(next(c for c in BENCHMARK_CELLS if c.name == name))
    for key, value in changes.items():
        if value is None:
            doc.pop(key, None)
        else:
            doc[key] = value
    path = Path(directory) / f"{doc['name']}.json"
    path.write_text(json.dumps(doc))
    return path


def short_run(directory, name="short", **changes):
    """k2_e2 scenario with a short horizon and no declared x0."""
    doc = benchmark_scenario_dict(next(c for c in BENCHMARK_CELLS if c.name == "k2_e2_ct"))
    doc["name"] = name
    doc["simulation"] = {"mode": "ct", "horizon": 5.0, "dt": 0.01}
    doc.pop("expected")
    doc.update(changes)
    path = Path(directory) / f"{name}.json"
    path.write_text(json.dumps(doc))
    return path


def test_analyze_passing_scenario(tmp_path, out_env, capsys) -> None:
    path = write_cell(tmp_path, "k2_e2_ct")
    assert main(["analyze", str(path)]) == EXIT_OK

    record = json.loads((out_env / "k2_e2_ct.report.json").read_text())
    schema = schema_required("report.schema.json")
    assert set(schema["required"]) <= set(record)
    assert set(schema["properties"]["report"]["required"]) <= set(record["report"])
    assert record["report"]["rho_ct"] == pytest.approx(0.5)
    assert record["report"]["gap"] == 0.0
    assert record["report"]["epsilon_star"] == pytest.approx(0.125)
    assert record["verdicts"] == {"ct_codeword": True, "weight_perturbation": True}
    assert "rho_ct       0.5" in capsys.readouterr().out


def test_analyze_failing_scenario(tmp_path, out_env) -> None:
    path = write_cell(tmp_path, "k1_e2_ct")
    assert main(["analyze", str(path)]) == EXIT_FAILED
    record = json.loads((out_env / "k1_e2_ct.report.json").read_text())
    assert record["verdicts"]["ct_codeword"] is False
    assert record["report"]["rho_ct"] == pytest.approx(1 / 6)


def test_analyze_discrete_scenario(tmp_path, out_env) -> None:
    path = write_cell(tmp_path, "k2_e2_dt")
    assert main(["analyze", str(path)]) == EXIT_OK
    record = json.loads((out_env / "k2_e2_dt.report.json").read_text())
    assert record["report"]["phi"]["phi"] == pytest.approx(7.5)
    assert record["report"]["rho_dt"] == pytest.approx(0.5)
    assert set(record["verdicts"]) == {"ct_codeword", "weight_perturbation", "dt_phi", "dt_codeword"}


def test_certify_writes_verdicts_only(tmp_path) -> None:
    path = write_cell(tmp_path, "k1_e1_dt")
    out = tmp_path / "flag-out"
    assert main(["--out-dir", str(out), "certify", str(path)]) == EXIT_OK
    record = json.loads((out / "k1_e1_dt.verdicts.json").read_text())
    assert record["report"] is None
    assert all(record["verdicts"].values())


def test_requested_certificates_only(tmp_path, out_env) -> None:
    path = write_cell(tmp_path, "k1_e2_ct", certificates=["weight_perturbation"])
    assert main(["analyze", str(path)]) == EXIT_FAILED
    record = json.loads((out_env / "k1_e2_ct.report.json").read_text())
    assert list(record["verdicts"]) == ["weight_perturbation"]


def test_step_certificate_on_ct_scenario_is_an_error(tmp_path, out_env) -> None:
    path = write_cell(tmp_path, "k2_e2_ct", certificates=["dt_phi"])
    assert main(["analyze", str(path)]) == EXIT_ERROR
    assert not (out_env / "k2_e2_ct.report.json").exists()


def test_unevaluated_certificate_counts_as_failed(tmp_path) -> None:
    scenario = load_scenario(write_cell(tmp_path, "k2_e2_dt"))
    handler = ScenarioHandler()
    report = handler.build_report(scenario)
    del report.verdicts["dt_phi"]
    verdicts = handler.requested_verdicts(scenario, report)
    assert verdicts["dt_phi"] is False
    assert list(verdicts) == list(scenario.certificates)


def test_scenario_output_dir_is_used(tmp_path, monkeypatch) -> None:
    monkeypatch.delenv("SBDC_OUT_DIR", raising=False)
    target = tmp_path / "from-scenario"
    path = write_cell(tmp_path, "k2_e2_ct", output={"dir": str(target)})
    assert main(["analyze", str(path)]) == EXIT_OK
    assert (target / "k2_e2_ct.report.json").exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["analyze"],
        ["frobnicate"],
        ["reproduce", "--epsilon", "-1"],
        ["reproduce", "--jobs", "0"],
        ["--verbose", "--quiet", "analyze", "x.json"],
    ],
)
def test_usage_errors(argv, out_env) -> None:
    assert main(argv) == EXIT_ERROR


def test_malformed_and_missing_files(tmp_path, out_env, capsys) -> None:
    broken = tmp_path / "broken.json"
    broken.write_text('{"name": "x", "graph": }')
    assert main(["analyze", str(broken)]) == EXIT_ERROR
    assert "line 1" in capsys.readouterr().err

    assert main(["analyze", str(tmp_path / "absent.json")]) == EXIT_ERROR

    no_attack = write_cell(tmp_path, "k2_e2_ct", attack=None)
    assert main(["analyze", str(no_attack)]) == EXIT_ERROR


@pytest.mark.parametrize(
    "changes",
    [
        {"attack": {"variant": 1, "rho": -1.0}},
        {"coding": {"uniform": {"family": "concave", "gain": "steep"}}},
        {"coding": {"edges": "all"}},
        {"output": ["dir"]},
    ],
)
def test_invalid_fields_exit_cleanly(tmp_path, out_env, capsys, changes) -> None:
    path = write_cell(tmp_path, "k2_e2_ct", **changes)
    assert main(["analyze", str(path)]) == EXIT_ERROR
    assert "error: " in capsys.readouterr().err


def test_version(capsys) -> None:
    assert main(["--version"]) == EXIT_OK
    assert sbdc.__version__ in capsys.readouterr().out


def test_simulate_is_reproducible(tmp_path) -> None:
    path = short_run(tmp_path)
    texts = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["--out-dir", str(out), "simulate", str(path), "--seed", "7"]) == EXIT_OK
        texts.append((out / "short.csv").read_bytes())
    assert texts[0] == texts[1]

    out = tmp_path / "c"
    main(["--out-dir", str(out), "simulate", str(path), "--seed", "8"])
    assert (out / "short.csv").read_bytes() != texts[0]


def test_simulate_outputs(tmp_path, out_env) -> None:
    path = write_cell(tmp_path, "k2_e2_dt")
    assert main(["simulate", str(path), "--plot"]) == EXIT_OK

    sidecar = json.loads((out_env / "k2_e2_dt.verdict.json").read_text())
    assert set(schema_required("verdict.schema.json")["required"]) <= set(sidecar)
    assert sidecar["verdict"] == "Converged"
    assert sidecar["mode"] == "san-dt"
    assert sidecar["limit"] == pytest.approx(-0.5, abs=1e-3)

    header = (out_env / "k2_e2_dt.csv").read_text().split("\n", 1)[0]
    assert header == "t,x_1,x_2,x_3,x_4,x_5,x_6"
    assert (out_env / "k2_e2_dt.svg").read_text().lstrip().startswith("<?xml")


def test_simulate_expected_mismatch(tmp_path, out_env) -> None:
    # five time units are far too short to settle below the tolerance
    path = short_run(tmp_path, expected="Converged")
    assert main(["simulate", str(path)]) == EXIT_FAILED


def test_simulate_needs_simulation_block(tmp_path, out_env) -> None:
    path = write_cell(tmp_path, "k2_e2_ct", simulation=None)
    assert main(["simulate", str(path)]) == EXIT_ERROR


def test_reproduce_benchmark(out_env, capsys) -> None:
    assert main(["reproduce"]) == EXIT_OK
    table = capsys.readouterr().out
    assert "NO " not in table

    summary = json.loads((out_env / "reproduce" / "summary.json").read_text())
    assert summary["all_match"]
    assert [r["cell"] for r in summary["rows"]] == [c.name for c in BENCHMARK_CELLS]
    for row in summary["rows"]:
        assert row["verdict"] == row["expected"]
        assert not row["epsilon_above_guidance"]
        assert (out_env / "reproduce" / f"{row['cell']}.csv").exists()
        if row["verdict"] == "Converged":
            assert row["limit"] == pytest.approx(-0.5, abs=1e-3)


def test_reproduce_json_parallel_and_emit(tmp_path, out_env, capsys) -> None:
    emit = tmp_path / "emitted"
    assert main(["reproduce", "--json", "--jobs", "2", "--emit-scenarios", str(emit)]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert len(summary["rows"]) == 6
    assert summary["all_match"]
    assert sorted(p.name for p in emit.glob("*.json")) == sorted(f"{c.name}.json" for c in BENCHMARK_CELLS)

    # emitted scenarios are valid inputs
    assert main(["analyze", str(emit / "k2_e2_dt.json")]) == EXIT_OK


def test_reproduce_flags_large_step(out_env, capsys) -> None:
    code = main(["reproduce", "--json", "--epsilon", "0.2"])
    assert code in (EXIT_OK, EXIT_FAILED)
    rows = json.loads(capsys.readouterr().out)["rows"]
    for row in rows:
        if row["mode"] == "dt":
            assert row["epsilon"] == 0.2
            assert row["epsilon_above_guidance"]
        else:
            assert row["epsilon"] is None


def test_handler_callbacks_and_unknown_command(tmp_path, out_env) -> None:
    handler = ScenarioHandler()
    written = []
    handler.on_report_written = written.append
    assert handler.execute("analyze", scenario_path=write_cell(tmp_path, "k2_e2_ct")) == EXIT_OK
    assert written == [out_env / "k2_e2_ct.report.json"]
    assert handler.execute("launch") == EXIT_ERROR
