import json

import pytest
from click.testing import CliRunner

from cgtkit.cli import (
    EXIT_CONFIG,
    EXIT_INVALID,
    EXIT_IO,
    EXIT_OK,
    compute_stats,
    format_stats,
    main,
)
from cgtkit.model import cgt_to_dict, load_cgt, save_cgt
from conftest import make_dyspnea

DEPT_COUNTS = [
    ("Department of Internal medicine", 167, 36),
    ("Department of surgery", 59, 6),
    ("Department of pediatrics", 5, 52),
    ("Department of Obstetrics and gynecology", 7, 131),
    ("Emergency Department", 72, 12),
    ("Department of psychiatry", 2, 18),
    ("Department of Anesthesiology", 28, 221),
    ("Department of Dermatology", 2, 1),
    ("Department of Five Senses", 79, 119),
    ("Department of Oncology", 10, 110),
    ("Department of Infectious Diseases", 7, 30),
    ("Preventive Care Division", 5, 23),
]


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def dyspnea_file(tmp_path):
    path = tmp_path / "dyspnea.cgt.json"
    save_cgt(make_dyspnea(), path)
    return path


# --- validate ----------------------------------------------------------------

def test_validate_ok(runner, dyspnea_file):
    r = runner.invoke(main, ["validate", str(dyspnea_file)])
    assert r.exit_code == EXIT_OK
    assert "dyspnea: ok (4 nodes)" in r.output


def test_validate_invalid_tree(runner, tmp_path):
    data = cgt_to_dict(make_dyspnea())
    data["nodes"][1]["parent_id"] = 99
    p = tmp_path / "broken.cgt.json"
    p.write_text(json.dumps(data))
    r = runner.invoke(main, ["validate", str(p)])
    assert r.exit_code == EXIT_INVALID
    assert "DANGLING_PARENT" in r.output


def test_validate_unreadable_file(runner, tmp_path):
    p = tmp_path / "junk.json"
    p.write_text("{not json")
    r = runner.invoke(main, ["validate", str(p)])
    assert r.exit_code == EXIT_IO


# --- export-ieet / import-ieet -----------------------------------------------

def test_export_import_round_trip(runner, dyspnea_file, tmp_path):
    r = runner.invoke(main, ["export-ieet", str(dyspnea_file)])
    assert r.exit_code == EXIT_OK
    assert r.output.startswith("TREE: dyspnea\n")

    out = tmp_path / "back.cgt.json"
    r2 = runner.invoke(main, ["import-ieet", "-", "--id", "dyspnea",
                              "-o", str(out)], input=r.output)
    assert r2.exit_code == EXIT_OK
    back = load_cgt(out)
    assert [(n.kind, n.text, n.edge_label) for n in back.nodes] == \
        [(n.kind, n.text, n.edge_label) for n in make_dyspnea().nodes]


def test_import_ieet_parse_error(runner, tmp_path):
    p = tmp_path / "bad.ieet"
    p.write_text("ACTION: floating\n")
    r = runner.invoke(main, ["import-ieet", str(p)])
    assert r.exit_code == EXIT_IO
    assert "parse error" in r.output


# --- gen-synthetic / reconstruct / transform pipeline -------------------------

def test_gen_synthetic_writes_files(runner, tmp_path):
    out = tmp_path / "cases"
    r = runner.invoke(main, ["gen-synthetic", "--seed", "7", "--count", "3",
                             "-o", str(out)])
    assert r.exit_code == EXIT_OK
    names = sorted(p.name for p in out.iterdir())
    assert names == [
        "case-00007.detection.json", "case-00007.truth.json",
        "case-00008.detection.json", "case-00008.truth.json",
        "case-00009.detection.json", "case-00009.truth.json",
    ]


def test_full_pipeline_synthetic_to_valid_tree(runner, tmp_path):
    out = tmp_path / "cases"
    assert runner.invoke(main, ["gen-synthetic", "--seed", "21",
                                "-o", str(out)]).exit_code == EXIT_OK
    det = out / "case-00021.detection.json"
    fg = tmp_path / "case.flowgraph.json"
    r = runner.invoke(main, ["reconstruct", str(det), "-o", str(fg)])
    assert r.exit_code == EXIT_OK

    tree_path = tmp_path / "case.cgt.json"
    r = runner.invoke(main, ["transform", str(fg), "--id", "case",
                             "--title", "synthetic case", "-o", str(tree_path)])
    assert r.exit_code == EXIT_OK
    assert "labels_collapsed=" in r.output

    r = runner.invoke(main, ["validate", str(tree_path)])
    assert r.exit_code == EXIT_OK


def test_reconstruct_bad_input(runner, tmp_path):
    p = tmp_path / "nope.json"
    p.write_text("[]")
    r = runner.invoke(main, ["reconstruct", str(p)])
    assert r.exit_code == EXIT_IO


# --- consult ------------------------------------------------------------------

def test_consult_scripted(runner, tmp_path, dyspnea_file):
    script = tmp_path / "script.json"
    script.write_text(json.dumps({"Have any fever symptom?": "yes"}))
    r = runner.invoke(
        main,
        ["consult", str(tmp_path), "--tree", "dyspnea",
         "--judge", f"scripted:{script}"],
        input="short of breath\n")
    assert r.exit_code == EXIT_OK
    assert "Outcome: flu workup" in r.output


def test_consult_unknown_judge_spec(runner, tmp_path, dyspnea_file):
    r = runner.invoke(main, ["consult", str(tmp_path), "--judge", "psychic"],
                      input="hi\n")
    assert r.exit_code == EXIT_CONFIG


# --- serve config validation ----------------------------------------------------

def test_serve_rejects_bad_config(runner, tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"judge": "llm"}))
    r = runner.invoke(main, ["serve", "--config", str(p)])
    assert r.exit_code == EXIT_CONFIG


# --- stats --------------------------------------------------------------------

def _write_manifest(kb_dir):
    entries = []
    i = 0
    for dept, n_diff, n_treat in DEPT_COUNTS:
        for _ in range(n_diff):
            entries.append({"id": f"t{i}", "kind": "differential_diagnosis",
                            "department": dept})
            i += 1
        for _ in range(n_treat):
            entries.append({"id": f"t{i}", "kind": "treatment_suggestion",
                            "department": dept})
            i += 1
    (kb_dir / "manifest.json").write_text(json.dumps({"trees": entries}))


def test_stats_from_manifest_catalog(runner, tmp_path):
    _write_manifest(tmp_path)
    table = compute_stats(tmp_path)
    assert table.total_diff == 443
    assert table.total_treat == 759
    assert table.total == 1202
    by_dept = {r.department: r for r in table.rows}
    assert len(by_dept) == 12
    for dept, n_diff, n_treat in DEPT_COUNTS:
        assert (by_dept[dept].diff_count, by_dept[dept].treat_count) == \
            (n_diff, n_treat)
    # Percentages are relative to the per-kind totals.
    row = by_dept["Department of Internal medicine"]
    assert row.diff_pct == pytest.approx(round(100 * 167 / 443, 1))
    assert row.treat_pct == pytest.approx(round(100 * 36 / 759, 1))

    r = runner.invoke(main, ["stats", str(tmp_path)])
    assert r.exit_code == EXIT_OK
    total_line = next(l for l in r.output.splitlines() if l.startswith("Total"))
    assert "443" in total_line and "759" in total_line
    assert "Overall: 1202 trees" in r.output


def test_stats_rows_sorted_by_diff_count(tmp_path):
    _write_manifest(tmp_path)
    table = compute_stats(tmp_path)
    counts = [r.diff_count for r in table.rows]
    assert counts == sorted(counts, reverse=True)
    assert table.rows[0].department == "Department of Internal medicine"


def test_stats_from_tree_files(runner, tmp_path, dyspnea_file):
    r = runner.invoke(main, ["stats", str(tmp_path)])
    assert r.exit_code == EXIT_OK
    assert "Overall: 1 trees" in r.output


def test_stats_empty_dir(runner, tmp_path):
    r = runner.invoke(main, ["stats", str(tmp_path)])
    assert r.exit_code == EXIT_IO


def test_format_stats_layout(tmp_path):
    _write_manifest(tmp_path)
    text = format_stats(compute_stats(tmp_path))
    lines = text.splitlines()
    assert lines[0].startswith("Department")
    assert len(lines) == 1 + 12 + 1 + 1  # header, rows, total, overall
