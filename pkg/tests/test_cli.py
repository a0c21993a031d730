import json

import jsonschema
import pytest

from sc_rateless import __version__
from sc_rateless.cli import main


def run(tmp_path, *argv):
    out = tmp_path / "out.txt"
    code = main(list(argv) + ["--out", str(out)])
    return code, out.read_text(encoding="utf-8") if out.exists() else ""


def parse_csv(text):
    header = {}
    rows = []
    columns = None
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            header[key] = value
        elif columns is None:
            columns = line.split(",")
        else:
            rows.append(dict(zip(columns, line.split(","))))
    return header, columns, rows


ROW_SCHEMA = {
    "bounds": {
        "type": "object",
        "required": [
            "L", "spectral_radius", "rayleigh_lower", "norm_upper",
            "lower_bound_beta", "lower_bound_alpha", "limit_beta",
            "limit_alpha", "capacity_condition_holds", "stability_applies",
        ],
        "properties": {
            "L": {"type": "integer"},
            "spectral_radius": {"type": "number"},
            "capacity_condition_holds": {"type": "boolean"},
        },
    },
    "simulate": {
        "type": "object",
        "required": [
            "alpha", "n_symbols", "dimension", "success_rate", "wilson_low",
            "wilson_high", "mean_residual", "trials", "trial_errors",
        ],
        "properties": {
            "alpha": {"type": "number"},
            "trials": {"type": "integer"},
        },
    },
}

DOC_SCHEMA = {
    "type": "object",
    "required": ["spec", "rows"],
    "properties": {
        "spec": {"type": "object", "required": ["command", "version", "seed"]},
        "rows": {"type": "array"},
    },
}


class TestValidation:
    def test_invalid_dl_exits_2_with_message(self, tmp_path, capsys):
        code = main(["threshold", "--dl", "1", "--dg", "3", "--L", "8"])
        assert code == 2
        assert "dl" in capsys.readouterr().err

    def test_invalid_eps_exits_2(self, tmp_path):
        code, _ = run(tmp_path, "bounds", "--dg", "3", "--eps", "1.5", "--L", "8")
        assert code == 2

    def test_dg1_without_override_exits_2(self, tmp_path):
        code, _ = run(
            tmp_path, "simulate", "--dg", "1", "--L", "4", "--M", "6",
            "--trials", "1", "--alpha", "0.5", "--zero-codeword",
        )
        assert code == 2

    def test_bad_M_divisibility_exits_2(self, tmp_path):
        code, _ = run(
            tmp_path, "simulate", "--dg", "3", "--L", "4", "--M", "7",
            "--trials", "1", "--alpha", "0.5",
        )
        assert code == 2

    def test_unknown_flag_exits_2(self):
        assert main(["threshold", "--bogus"]) == 2

    def test_computation_error_exits_3(self, tmp_path):
        # w = 1 never decodes from full erasure: bracket expansion exhausts.
        code, _ = run(
            tmp_path, "threshold", "--dg", "2", "--w", "1", "--L", "4",
            "--max-iter", "200",
        )
        assert code == 3


class TestBounds:
    def test_row_content(self, tmp_path):
        code, text = run(tmp_path, "bounds", "--dg", "2", "--L", "64")
        assert code == 0
        header, columns, rows = parse_csv(text)
        assert header["version"] == __version__
        assert header["command"] == "bounds"
        assert len(rows) == 1
        row = rows[0]
        assert float(row["limit_alpha"]) == pytest.approx(0.0397207, abs=1e-6)
        assert float(row["limit_beta"]) == pytest.approx(1.3862944, abs=1e-6)
        assert row["capacity_condition_holds"] == "false"

    def test_json_matches_csv_values(self, tmp_path):
        code, csv_text = run(tmp_path, "bounds", "--dg", "3", "--L", "32")
        assert code == 0
        code, json_text = run(
            tmp_path, "bounds", "--dg", "3", "--L", "32", "--format", "json"
        )
        assert code == 0
        _, _, csv_rows = parse_csv(csv_text)
        doc = json.loads(json_text)
        jsonschema.validate(doc, DOC_SCHEMA)
        jsonschema.validate(doc["rows"][0], ROW_SCHEMA["bounds"])
        for key, value in doc["rows"][0].items():
            if isinstance(value, bool):
                assert csv_rows[0][key] == str(value).lower()
            elif isinstance(value, float):
                assert float(csv_rows[0][key]) == value
            else:
                assert csv_rows[0][key] == str(value)


class TestThreshold:
    def test_threshold_row(self, tmp_path):
        code, text = run(
            tmp_path, "threshold", "--dg", "3", "--L", "8", "--bisect-tol", "0.002"
        )
        assert code == 0
        header, columns, rows = parse_csv(text)
        assert columns == [
            "L", "alpha_star", "beta_star", "lower_bound_alpha",
            "lower_bound_beta", "iterations",
        ]
        row = rows[0]
        assert float(row["alpha_star"]) >= float(row["lower_bound_alpha"])
        assert float(row["beta_star"]) >= float(row["lower_bound_beta"])
        assert int(row["iterations"]) > 0
        assert header["bisection_tol"] == "0.002"


class TestSweep:
    def test_sweep_rows_and_error_column(self, tmp_path):
        code, text = run(
            tmp_path, "sweep", "--dg", "3", "--w", "5",
            "--L-grid", "8,1", "--bisect-tol", "0.005",
        )
        assert code == 0
        _, columns, rows = parse_csv(text)
        assert [int(r["L"]) for r in rows] == [1, 8]
        assert "rate" in rows[0]["error"]
        assert rows[1]["error"] == ""

    def test_dr_grid_parallel_matches_serial(self, tmp_path):
        argv = [
            "sweep", "--dg", "3", "--L-grid", "4,8",
            "--dr-grid", "3,4", "--bisect-tol", "0.005",
        ]
        code, serial = run(tmp_path, *argv)
        assert code == 0
        code, parallel = run(tmp_path, *argv, "--workers", "2")
        assert code == 0
        assert serial == parallel
        _, _, rows = parse_csv(serial)
        assert [(int(r["dr"]), int(r["L"])) for r in rows] == [
            (3, 4), (3, 8), (4, 4), (4, 8),
        ]


class TestSimulate:
    ARGS = [
        "simulate", "--dg", "3", "--L", "8", "--M", "12", "--trials", "5",
        "--alpha-grid", "0.3,0.6", "--seed", "42", "--zero-codeword",
    ]

    def test_deterministic_output(self, tmp_path):
        code, first = run(tmp_path, *self.ARGS)
        assert code == 0
        code, second = run(tmp_path, *self.ARGS)
        assert first == second

    def test_header_records_spec_and_seed(self, tmp_path):
        code, text = run(tmp_path, *self.ARGS)
        header, _, rows = parse_csv(text)
        assert header["seed"] == "42"
        assert header["M"] == "12"
        assert header["version"] == __version__
        assert len(rows) == 2

    def test_wilson_interval_brackets_rate(self, tmp_path):
        code, text = run(tmp_path, *self.ARGS, "--format", "json")
        doc = json.loads(text)
        jsonschema.validate(doc, DOC_SCHEMA)
        for row in doc["rows"]:
            jsonschema.validate(row, ROW_SCHEMA["simulate"])
            assert row["wilson_low"] <= row["success_rate"] <= row["wilson_high"]
            assert 0.0 <= row["wilson_low"] <= row["wilson_high"] <= 1.0

    def test_stdout_when_no_out(self, capsys):
        code = main(["bounds", "--dg", "3", "--L", "8"])
        assert code == 0
        assert "lower_bound_beta" in capsys.readouterr().out
