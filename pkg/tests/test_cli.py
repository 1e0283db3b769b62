import dataclasses

import pytest
from click.testing import CliRunner

from branchstat.cli import main
from branchstat.grid_model import BranchKind, ParameterKind
from branchstat.ingest import parse_branch_csv, parse_matpower_subset, write_branch_csv
from branchstat.per_unit import scale_parameter
from branchstat.reference import PLACEHOLDER_FIELDS, ReferenceStats, bundled_reference
from branchstat.toy import toy_case_path
from branchstat.validate import load_bundle, write_reference

from test_ingest import case as matpower_case


@pytest.fixture
def run(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("BRANCHSTAT_SEED", raising=False)
    runner = CliRunner()

    def invoke(*args):
        return runner.invoke(main, [str(a) for a in args], catch_exceptions=False)

    return invoke


@pytest.fixture
def toy_csv(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text(toy_case_path().read_text(encoding="utf-8"), encoding="utf-8")
    return path


@pytest.fixture
def perturbed(tmp_path, toy):
    path = tmp_path / "perturbed.csv"
    path.write_text(write_branch_csv(scale_parameter(toy, ParameterKind.XFMR_CAPACITY_MVA, 10)), encoding="utf-8")
    return path


def test_analyze_toy_case(run, toy_csv, tmp_path):
    result = run("analyze", toy_csv, "--out", tmp_path / "b.json", "--plots", tmp_path / "plots")
    assert result.exit_code == 0
    assert "seed 42" in result.output
    bundle = load_bundle(tmp_path / "b.json")
    assert len(bundle["parameters"]) == 7
    assert (tmp_path / "plots" / "LineLengthKm_power_curve.csv").exists()


def test_analyze_lines_only(run, toy, tmp_path):
    path = tmp_path / "lines.csv"
    path.write_text(write_branch_csv([r for r in toy if r.kind is BranchKind.LINE]), encoding="utf-8")
    result = run("analyze", path, "--out", tmp_path / "l.json")
    assert result.exit_code == 0
    status = {s["parameter"]: s["status"] for s in load_bundle(tmp_path / "l.json")["parameters"]}
    assert status["XfmrCapacityMva"] == "NoData" and status["LineCapacityMva"] == "ok"


def test_analyze_missing_file(run):
    assert run("analyze", "nope.csv").exit_code == 2


def test_analyze_parse_error_names_line(run, tmp_path):
    path = tmp_path / "bad.m"
    path.write_text(matpower_case(to=99), encoding="utf-8")
    result = run("analyze", path)
    assert result.exit_code == 2 and "bad.m:11" in result.output


def test_analyze_without_data(run, tmp_path):
    path = tmp_path / "tiny.m"
    path.write_text(matpower_case(), encoding="utf-8")
    assert run("analyze", path, "--out", tmp_path / "t.json").exit_code == 3


def test_bad_settings_are_input_errors(run, toy_csv):
    assert run("analyze", toy_csv, "--ratio-lo", "1.5").exit_code == 2
    assert run("validate", toy_csv, "--bins", "1").exit_code == 2


def test_validate_exit_codes(run, toy_csv, perturbed, tmp_path):
    ok = run("validate", toy_csv, "--reference", "toy", "--out", tmp_path / "r.md")
    assert ok.exit_code == 0 and "TR" not in ok.output
    assert (tmp_path / "r.md").read_text(encoding="utf-8").count("nats") >= 1
    bad = run("validate", perturbed, "--reference", "toy")
    assert bad.exit_code == 1
    assert "| Transformer Capacity (MVA) | TR |" in bad.output
    assert bad.output.count("| TR |") == 1


def test_validate_against_placeholder_reference(run, toy_csv, tmp_path):
    ref = bundled_reference()
    blank = ReferenceStats("blank", {
        p: dataclasses.replace(e, placeholders=frozenset(PLACEHOLDER_FIELDS)) for p, e in ref.entries.items()
    })
    write_reference(blank, tmp_path / "blank.json")
    result = run("validate", toy_csv, "--reference", tmp_path / "blank.json")
    assert result.exit_code == 0
    assert result.output.count("n.d.") == 7 and "warning" in result.output


def test_validate_against_analyze_bundle(run, toy_csv, tmp_path):
    run("analyze", toy_csv, "--out", tmp_path / "b.json")
    assert run("validate", toy_csv, "--reference", tmp_path / "b.json").exit_code == 0


def test_validate_bad_reference_file(run, toy_csv, tmp_path):
    (tmp_path / "junk.json").write_text("{not json", encoding="utf-8")
    assert run("validate", toy_csv, "--reference", tmp_path / "junk.json").exit_code == 2


def test_tune_then_validate(run, perturbed, tmp_path):
    result = run("tune", perturbed, "--reference", "toy")
    assert result.exit_code == 0
    tuned = tmp_path / "perturbed_tuned.csv"
    plan = (tmp_path / "perturbed_plan.csv").read_text(encoding="utf-8").splitlines()
    assert plan[0] == "branch_id,parameter,old,new,class_kv" and len(plan) == 361
    assert all(line.split(",")[1] == "XfmrCapacityMva" for line in plan[1:])
    assert run("validate", tuned, "--reference", "toy").exit_code == 0


def test_tune_changes_only_planned_fields(run, perturbed, tmp_path):
    run("tune", perturbed, "--reference", "toy")
    before, _ = parse_branch_csv(perturbed.read_text(encoding="utf-8"))
    after, _ = parse_branch_csv((tmp_path / "perturbed_tuned.csv").read_text(encoding="utf-8"))
    changed = {b.id for b, a in zip(before, after) if a != b}
    assert changed == {r.id for r in before if r.kind is BranchKind.TRANSFORMER}
    assert all(a == b for a, b in zip(before, after) if b.kind is BranchKind.LINE)


def test_tune_nothing_to_do(run, toy_csv, tmp_path):
    result = run("tune", toy_csv, "--reference", "toy")
    assert result.exit_code == 0 and "nothing to tune" in result.output
    assert not (tmp_path / "toy_tuned.csv").exists()


def test_tune_forced_parameter(run, toy_csv, tmp_path):
    result = run("tune", toy_csv, "--reference", "toy", "--param", "LineLengthKm@230")
    assert result.exit_code == 0
    plan = (tmp_path / "toy_plan.csv").read_text(encoding="utf-8").splitlines()
    assert len(plan) == 121 and all(line.endswith(",230") for line in plan[1:])


def test_tune_with_placeholder_reference(run, perturbed):
    # the bundled reference has the capacity curve but no class distributions
    assert run("tune", perturbed).exit_code == 4


def test_tune_bad_param(run, toy_csv):
    assert run("tune", toy_csv, "--reference", "toy", "--param", "Voltage").exit_code == 2


def test_tune_matpower_round_trip(run, tmp_path):
    path = tmp_path / "c.m"
    path.write_text(matpower_case(), encoding="utf-8")
    result = run("tune", path, "--reference", "toy", "--param", "LineCapacityMva@230", "--min-count", "1")
    assert result.exit_code == 0
    text = (tmp_path / "c_tuned.m").read_text(encoding="utf-8")
    assert text.splitlines()[:10] == matpower_case().splitlines()[:10]
    (rec,), _ = parse_matpower_subset(text)
    assert rec.rating_mva != 300 and (rec.x_pu, rec.r_pu) == (0.05, 0.01)


def test_fit_command(run, toy_csv, tmp_path):
    result = run("fit", toy_csv, "-p", "XfmrCapacityMva", "--out", tmp_path / "f.csv")
    assert result.exit_code == 0 and "230 kV" in result.output
    rows = (tmp_path / "f.csv").read_text(encoding="utf-8").splitlines()
    assert rows[0].startswith("class_kv,rank,family") and len(rows) == 1 + 3 * 3
    assert run("fit", toy_csv, "-p", "XfmrCapacityMva", "--families", "weibull").exit_code == 2


def test_report_command(run, toy_csv, tmp_path):
    run("analyze", toy_csv, "--out", tmp_path / "b.json")
    result = run("report", tmp_path / "b.json")
    assert result.exit_code == 0 and result.output.startswith("# Branch statistics: toy")


def test_synth_matches_shipped_case(run, tmp_path):
    assert run("synth", "--out", tmp_path / "s.csv").exit_code == 0
    assert (tmp_path / "s.csv").read_text(encoding="utf-8") == toy_case_path().read_text(encoding="utf-8")


def test_seed_from_environment(run, toy_csv, monkeypatch):
    monkeypatch.setenv("BRANCHSTAT_SEED", "7")
    assert "seed 7" in run("validate", toy_csv, "--reference", "toy").output
    assert "seed 9" in run("validate", toy_csv, "--reference", "toy", "--seed", "9").output


def test_analyze_is_deterministic(run, toy_csv, tmp_path):
    run("analyze", toy_csv, "--out", tmp_path / "a.json")
    run("analyze", toy_csv, "--out", tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
