import json
import math
from pathlib import Path

import pytest

from lscert.cli import main, main_imft_certify, main_ls_certify

REPO = Path(__file__).resolve().parent.parent
CONFIGS = REPO / "configs"
GOLDEN = Path(__file__).resolve().parent / "golden"

NON_META_KEYS = ("decomposition", "quantities", "region", "frontier")


def non_meta_text(doc: dict) -> str:
    """Canonical serialization of everything a golden comparison may pin."""
    assert set(doc) == {"meta", *NON_META_KEYS}
    return json.dumps({k: doc[k] for k in NON_META_KEYS}, indent=2) + "\n"


def write_config(tmp_path: Path, name: str, payload: dict) -> str:
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


# --- ls-certify ----------------------------------------------------------------


def test_ls_certify_stdout_report(capsys):
    code = main(["ls-certify", "--config", str(CONFIGS / "tanh2_certify_analytic.json")])
    captured = capsys.readouterr()
    assert code == 0
    doc = json.loads(captured.out)
    assert set(doc) == {"meta", *NON_META_KEYS}
    assert doc["meta"]["command"] == "ls-certify"
    assert doc["meta"]["estimator_mode"] == "analytic"
    assert doc["meta"]["rigorous"] is True
    assert doc["quantities"]["M_par"] == 0.0
    assert doc["quantities"]["M_perp"] == pytest.approx(0.5, abs=1e-12)
    for row in doc["region"]:
        assert row["certified"] == (row["r_par"] < 2.0)
    for front in doc["frontier"]:
        # grid pass/fail bracket is (1.75, 2.0); one bisection level lands 1.875
        assert front["r_par_max"] == pytest.approx(1.875)
    assert doc["decomposition"]["q"] == 1
    assert doc["decomposition"]["n"] == 2


def test_ls_certify_summary_line_and_exit(tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main(["ls-certify", "--config", str(CONFIGS / "tanh2_certify_analytic.json"),
                 "--out", str(out)])
    captured = capsys.readouterr()
    assert code == 0
    assert "certified 21 of 27 radius pairs" in captured.out
    assert "max certified r_par = 1.875" in captured.out
    assert "rigorous = true" in captured.out
    assert json.loads(out.read_text(encoding="utf-8"))["meta"]["command"] == "ls-certify"


def test_reports_are_deterministic_and_match_golden(tmp_path):
    texts = []
    for i in range(2):
        out = tmp_path / f"run{i}.json"
        code = main(["ls-certify", "--config",
                     str(CONFIGS / "tanh2_certify_analytic.json"), "--out", str(out)])
        assert code == 0
        texts.append(non_meta_text(json.loads(out.read_text(encoding="utf-8"))))
    assert texts[0] == texts[1]
    golden = (GOLDEN / "tanh2_analytic_nonmeta.json").read_text(encoding="utf-8")
    assert texts[0] == golden


def test_builtin_and_expression_models_agree_bitwise(tmp_path):
    # the expression evaluator mirrors the builtin arithmetic operation for
    # operation, so even sampled deviation estimates match bit for bit
    expr_cfg = write_config(tmp_path, "expr.json", {
        "model": {"kind": "expr", "n": 2, "m": 1,
                  "source": "-x1 + tanh(l1*x2); -x2 + tanh(l1*x1)"},
        "base_point": {"x0": [0.0, 0.0], "lambda0": [1.0]},
        "estimator": {"mode": "sampled", "samples_per_dim": 9},
        "certify": {"r_par_grid": [0.5, 1.0, 1.5], "r_perp_grid": [0.5, 2.0]},
    })
    out_expr = tmp_path / "expr_out.json"
    out_builtin = tmp_path / "builtin_out.json"
    assert main(["ls-certify", "--config", expr_cfg, "--out", str(out_expr)]) == 0
    assert main(["ls-certify", "--config", str(CONFIGS / "tanh2_certify_sampled.json"),
                 "--out", str(out_builtin)]) == 0
    expr_doc = json.loads(out_expr.read_text(encoding="utf-8"))
    builtin_doc = json.loads(out_builtin.read_text(encoding="utf-8"))
    assert non_meta_text(expr_doc) == non_meta_text(builtin_doc)


def test_nothing_certified_exits_two(tmp_path, capsys):
    cfg = write_config(tmp_path, "fail.json", {
        "model": {"kind": "builtin", "name": "tanh2"},
        "base_point": {"x0": [0.0, 0.0], "lambda0": [1.0]},
        "estimator": {"mode": "analytic", "L_par": "0",
                      "L_perp": "1 - min(0, 1 - rpar)"},
        "certify": {"r_par_grid": [2.0, 2.5], "r_perp_grid": [1.0]},
    })
    code = main(["ls-certify", "--config", cfg])
    captured = capsys.readouterr()
    assert code == 2
    doc = json.loads(captured.out)
    assert all(not row["certified"] for row in doc["region"])
    assert doc["frontier"][0]["r_par_max"] is None


def test_region_csv_export(tmp_path, capsys):
    out = tmp_path / "report.json"
    csv_path = tmp_path / "region.csv"
    code = main(["ls-certify", "--config", str(CONFIGS / "tanh2_certify_analytic.json"),
                 "--out", str(out), "--csv", str(csv_path)])
    capsys.readouterr()
    assert code == 0
    text = csv_path.open(encoding="utf-8", newline="").read()
    lines = text.split("\r\n")
    assert lines[0] == "r_par,r_perp,certified,margin_domain,margin_contraction"
    assert len(lines) == 1 + 27 + 1  # header + rows + trailing CRLF
    first = lines[1].split(",")
    assert first[0] == "0.25" and first[1] == "0.5" and first[2] == "true"
    # CSV cells are the %.17g rendering of exactly the JSON report values
    doc = json.loads(out.read_text(encoding="utf-8"))
    row = doc["region"][0]
    assert row["r_par"] == 0.25 and row["r_perp"] == 0.5
    assert first[3] == format(row["margin_domain"], ".17g")
    assert first[4] == format(row["margin_contraction"], ".17g")


# --- imft-certify ----------------------------------------------------------------


def test_imft_certify_parabola(capsys):
    code = main(["imft-certify", "--config", str(CONFIGS / "parabola_imft.json")])
    captured = capsys.readouterr()
    assert code == 0
    doc = json.loads(captured.out)
    assert doc["decomposition"] is None
    assert doc["quantities"]["M_x"] == 0.0
    assert doc["quantities"]["M_y"] == 1.0
    got = {(row["r_x"], row["r_y"]) for row in doc["region"] if row["certified"]}
    want = {(rx, ry) for rx in (0.1, 0.2, 0.3) for ry in (0.1, 0.3)
            if 2.0 * rx * rx < ry}
    assert got == want
    assert all("r_x_max" in front for front in doc["frontier"])


def test_imft_requires_partition(tmp_path, capsys):
    overlapping = write_config(tmp_path, "overlap.json", {
        "model": {"kind": "expr", "source": "x2 - x1^2", "n": 2, "m": 0},
        "base_point": {"x0": [0.0], "y0": [0.0]},
        "imft": {"x_indices": [0], "y_indices": [0],
                 "r_x_grid": [0.1], "r_y_grid": [0.1]},
    })
    code = main(["imft-certify", "--config", overlapping])
    captured = capsys.readouterr()
    assert code == 1
    assert "also appear in x_indices" in captured.err
    incomplete = write_config(tmp_path, "incomplete.json", {
        "model": {"kind": "expr", "source": "x2 - x1^2", "n": 2, "m": 1},
        "base_point": {"x0": [0.0], "y0": [0.0]},
        "imft": {"x_indices": [0], "y_indices": [1],
                 "r_x_grid": [0.1], "r_y_grid": [0.1]},
    })
    code = main(["imft-certify", "--config", incomplete])
    captured = capsys.readouterr()
    assert code == 1
    assert "partition" in captured.err


# --- error handling ----------------------------------------------------------------


def test_unknown_config_key_is_an_error(tmp_path, capsys):
    cfg = write_config(tmp_path, "unknown.json", {
        "model": {"kind": "builtin", "name": "tanh2"},
        "base_point": {"x0": [0.0, 0.0], "lambda0": [1.0]},
        "certify": {"r_par_grid": [0.5], "r_perp_grid": [0.5]},
        "bogus": 1,
    })
    code = main(["ls-certify", "--config", cfg])
    captured = capsys.readouterr()
    assert code == 1
    assert "bogus" in captured.err


def test_wrong_type_reports_dotted_path(tmp_path, capsys):
    cfg = write_config(tmp_path, "badtype.json", {
        "model": {"kind": "builtin", "name": 7},
        "base_point": {"x0": [0.0, 0.0], "lambda0": [1.0]},
        "certify": {"r_par_grid": [0.5], "r_perp_grid": [0.5]},
    })
    code = main(["ls-certify", "--config", cfg])
    captured = capsys.readouterr()
    assert code == 1
    assert "model.name" in captured.err


def test_missing_section_for_command(tmp_path, capsys):
    cfg = write_config(tmp_path, "nosection.json", {
        "model": {"kind": "builtin", "name": "tanh2"},
        "base_point": {"x0": [0.0, 0.0], "lambda0": [1.0]},
    })
    code = main(["trace", "--config", cfg])
    captured = capsys.readouterr()
    assert code == 1
    assert "trace" in captured.err


def test_missing_config_file(capsys):
    code = main(["ls-certify", "--config", "/nonexistent/nowhere.json"])
    captured = capsys.readouterr()
    assert code == 1
    assert captured.err.startswith("error:")


def test_non_equilibrium_base_point(tmp_path, capsys):
    cfg = write_config(tmp_path, "noneq.json", {
        "model": {"kind": "builtin", "name": "tanh2"},
        "base_point": {"x0": [0.4, 0.1], "lambda0": [1.0]},
        "certify": {"r_par_grid": [0.5], "r_perp_grid": [0.5]},
    })
    code = main(["ls-certify", "--config", cfg])
    captured = capsys.readouterr()
    assert code == 1
    assert "refine" in captured.err


# --- reduce and trace ----------------------------------------------------------------


def test_reduce_writes_table_and_series(tmp_path, capsys):
    out = tmp_path / "reduce.csv"
    code = main(["reduce", "--config", str(CONFIGS / "tanh2_reduce.json"),
                 "--out", str(out)])
    captured = capsys.readouterr()
    assert code == 0
    assert "reduced map series at base point:" in captured.out
    assert "classification: pitchfork_supercritical" in captured.out
    assert "wrote 52 rows" in captured.out
    text = out.open(encoding="utf-8", newline="").read()
    lines = text.split("\r\n")
    assert lines[0] == "alpha_1,lambda_1,g_1,phi_1,warning"
    rows = [l for l in lines[1:] if l]
    assert len(rows) == 13 * 4
    assert all(row.endswith(",") for row in rows)  # all points inside the region


def test_reduce_warns_outside_certified_region(tmp_path, capsys):
    cfg = write_config(tmp_path, "reduce_wide.json", {
        "model": {"kind": "builtin", "name": "tanh2"},
        "base_point": {"x0": [0.0, 0.0], "lambda0": [1.0]},
        "estimator": {"mode": "analytic", "L_par": "0",
                      "L_perp": "1 - min(0, 1 - rpar)"},
        "certify": {"r_par_grid": [0.25, 0.5], "r_perp_grid": [0.5]},
        "reduce": {"alpha_min": -1.5, "alpha_max": 1.5, "alpha_samples": 3,
                   "lambda_values": [1.0]},
    })
    out = tmp_path / "reduce.csv"
    assert main(["reduce", "--config", cfg, "--out", str(out)]) == 0
    capsys.readouterr()
    rows = [l for l in out.open(encoding="utf-8", newline="").read().split("\r\n")[1:] if l]
    # alpha = +-1.5 exceeds the certified frontier, alpha = 0 does not
    warned = ["outside the certified region" in row for row in rows]
    assert warned == [True, False, True]


def test_trace_cli_branches_and_csv(tmp_path, capsys):
    out = tmp_path / "trace.csv"
    code = main(["trace", "--config", str(CONFIGS / "tanh2_trace.json"),
                 "--out", str(out)])
    captured = capsys.readouterr()
    assert code == 0
    assert "traced 3 branch(es) over 31 parameter value(s)" in captured.out
    text = out.open(encoding="utf-8", newline="").read()
    lines = text.split("\r\n")
    assert lines[0] == "branch_id,lambda,alpha,x_1,x_2,residual_full"
    rows = [l for l in lines[1:] if l]
    # trunk on all 31 parameter values, outer pair on the 20 with lambda > 1
    assert len(rows) == 31 + 2 * 20


# --- console entry points --------------------------------------------------------


def test_dedicated_entry_points(tmp_path, capsys):
    assert main_ls_certify(["--config", str(CONFIGS / "tanh2_certify_analytic.json"),
                            "--out", str(tmp_path / "a.json")]) == 0
    assert main_imft_certify(["--config", str(CONFIGS / "parabola_imft.json"),
                              "--out", str(tmp_path / "b.json")]) == 0
    capsys.readouterr()
