import csv
import io
import json
import subprocess
import sys

import pytest

from rftlattice.cli import build_parser, parse_range, run
from rftlattice.comparator import bonferroni_threshold, fmt6, voxel_count
from rftlattice.fieldsim import SIM_REPORT_HEADER
from rftlattice.rft import FieldSpec, LatticeSpec, resel_count_simplified, rft_threshold
from rftlattice.survey import load_synthetic_survey, write_survey_csv


def invoke(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


class TestRangeGrammar:
    @pytest.mark.parametrize(
        "text, expected",
        [
            ("10:13", [10, 11, 12, 13]),
            ("1:2:0.25", [1, 1.25, 1.5, 1.75, 2]),
            ("1,2,3", [1, 2, 3]),
            ("5", [5]),
        ],
    )
    def test_parse(self, text, expected):
        assert parse_range(text) == expected

    def test_full_grids(self):
        assert len(parse_range("10:100")) == 91
        ratios = parse_range("1:6:0.1")
        assert len(ratios) == 51 and ratios[-1] == 6.0 and ratios[13] == 2.3


class TestThreshold:
    def test_matches_modules(self, capsys):
        code, out, _ = invoke(capsys, "threshold", "--voxel", "3", "--fwhm", "10.5", "--df", "100")
        assert code == 0
        header, row = rows(out)
        assert header == ["voxel_mm", "fwhm_mm", "df", "n_voxels", "resels", "t_rft", "t_bonferroni", "rft_valid"]
        f = FieldSpec.student_t(100)
        t_rft = rft_threshold(0.05, resel_count_simplified(LatticeSpec.isotropic(3, 10.5)), f)
        t_bonf = bonferroni_threshold(0.05, voxel_count(1.4e6, (3, 3, 3)), f)
        assert row[5] == fmt6(t_rft) and row[6] == fmt6(t_bonf)
        assert row[7] == ("true" if t_rft <= t_bonf else "false")
        assert row[3] == "51851"

    def test_gaussian_and_json(self, capsys, tmp_path):
        side = tmp_path / "r.json"
        code, out, _ = invoke(capsys, "threshold", "--voxel", "2,2,3", "--fwhm", "8", "--gaussian", "--json", str(side))
        assert code == 0
        data = json.loads(side.read_text())
        assert rows(out)[1][2] == "inf"
        assert fmt6(data["t_rft"]) == rows(out)[1][5]
        assert data["voxel_mm"] == [2.0, 2.0, 3.0]

    def test_output_file(self, capsys, tmp_path):
        dest = tmp_path / "t.csv"
        code, out, _ = invoke(capsys, "threshold", "--voxel", "3", "--fwhm", "9", "--df", "30", "-o", str(dest))
        assert code == 0 and out == ""
        assert dest.read_text().startswith("voxel_mm,")

    def test_unattainable_exit(self, capsys):
        code, _, err = invoke(capsys, "threshold", "--voxel", "3", "--fwhm", "30", "--df", "20", "--volume", "100")
        assert code == 2 and "rftlattice:" in err


class TestCrossover:
    def test_rows_and_sentinel(self, capsys):
        code, out, _ = invoke(capsys, "crossover", "--voxels", "3,1", "--df", "10,100")
        assert code == 0
        table = rows(out)
        assert table[0] == ["voxel_mm", "df", "crossover_ratio"]
        assert [r[:2] for r in table[1:]] == [["1", "10"], ["1", "100"], ["3", "10"], ["3", "100"]]
        assert table[1][2] == "above_range"
        assert 3.0 <= float(table[4][2]) <= 4.0


class TestSweep:
    @pytest.mark.slow
    def test_full_grid_row_count(self, capsys):
        code, out, _ = invoke(capsys, "sweep", "--voxels", "1,2,3", "--df", "10:100", "--ratio", "1:6:0.1", "--workers", "2")
        assert code == 0
        lines = out.splitlines()
        assert len(lines) == 1 + 3 * 91 * 51

    def test_small_grid(self, capsys):
        code, out, _ = invoke(capsys, "sweep", "--voxels", "2", "--df", "20:22", "--ratio", "1:2:0.5")
        assert code == 0
        table = rows(out)
        assert len(table) == 1 + 3 * 3
        assert table[0] == ["voxel_mm", "df", "smoothness_ratio", "t_rft", "t_bonferroni", "rft_valid"]


class TestSurvey:
    def test_synthetic_text(self, capsys):
        code, out, _ = invoke(capsys, "survey", "--synthetic", "--critical", "3.5")
        assert code == 0
        assert "P(ratio > 3.5)" in out

    def test_csv_probability(self, capsys, tmp_path):
        path = tmp_path / "studies.csv"
        with open(path, "w", newline="") as fh:
            write_survey_csv(load_synthetic_survey().records, fh)
        code, out, _ = invoke(capsys, "survey", "--input", str(path), "--critical", "3.5", "--format", "csv")
        assert code == 0
        values = dict(rows(out)[1:])
        assert float(values["prob_meets_assumption"]) == pytest.approx(0.009, abs=1e-3)

    def test_rejects_reported(self, capsys, tmp_path):
        path = tmp_path / "studies.csv"
        buf = io.StringIO()
        write_survey_csv(load_synthetic_survey().records, buf)
        path.write_text(buf.getvalue() + "bad,3,3,3,-8,SPM,fdr,false\n")
        code, _, err = invoke(capsys, "survey", "--input", str(path))
        assert code == 0 and "rejected line 139" in err

    def test_malformed_header(self, capsys, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        code, _, _ = invoke(capsys, "survey", "--input", str(path))
        assert code == 1

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = invoke(capsys, "survey", "--input", str(tmp_path / "nope.csv"))
        assert code == 1


class TestSimulate:
    def test_header_and_seed(self, capsys):
        argv = ["simulate", "--dims", "12", "--fwhm", "2", "--df", "12", "--realizations", "10", "--seed", "3", "--threshold", "rft"]
        code, out, _ = invoke(capsys, *argv)
        assert code == 0
        table = rows(out)
        assert tuple(table[0]) == tuple(SIM_REPORT_HEADER)
        assert table[1][0] == "10"

    def test_numeric_threshold(self, capsys):
        code, out, _ = invoke(capsys, "simulate", "--dims", "8", "--gaussian", "--realizations", "5", "--threshold", "-50")
        assert code == 0 and rows(out)[1][1] == "5"

    def test_bad_threshold(self, capsys):
        code, _, _ = invoke(capsys, "simulate", "--dims", "8", "--gaussian", "--realizations", "2", "--threshold", "lots")
        assert code == 1


class TestErrors:
    @pytest.mark.parametrize(
        "argv",
        [
            ["threshold", "--voxel", "3", "--fwhm", "9", "--df", "30", "--bogus"],
            ["threshold", "--voxel", "x", "--fwhm", "9", "--df", "30"],
            ["threshold", "--voxel", "3", "--fwhm", "9"],
            ["threshold", "--voxel", "3", "--fwhm", "9", "--df", "0.5"],
            ["threshold", "--voxel", "3", "--fwhm", "9", "--df", "30", "--alpha", "2"],
            ["sweep", "--voxels", "3", "--df", "10:5", "--ratio", "1:2"],
            ["frobnicate"],
            [],
        ],
    )
    def test_input_errors_exit_1(self, capsys, argv):
        assert invoke(capsys, *argv)[0] == 1


class TestDeterminism:
    @pytest.mark.parametrize(
        "argv",
        [
            ["threshold", "--voxel", "2", "--fwhm", "7", "--df", "25"],
            ["crossover", "--voxels", "2,3", "--df", "20:22"],
            ["survey", "--synthetic", "--format", "csv"],
            ["simulate", "--dims", "8", "--fwhm", "1.5", "--df", "3", "--realizations", "4", "--seed", "9"],
        ],
    )
    def test_byte_identical(self, capsys, argv):
        assert invoke(capsys, *argv)[1] == invoke(capsys, *argv)[1]


SUBCOMMANDS = ["threshold", "crossover", "sweep", "survey", "simulate"]


@pytest.mark.parametrize("name", SUBCOMMANDS)
def test_help_documents_flags(name):
    sub = build_parser()._subparsers._group_actions[0].choices[name]
    text = sub.format_help()
    for action in sub._actions:
        for opt in action.option_strings:
            assert opt in text
        if action.option_strings and action.help and action.default not in (None, False, "==SUPPRESS=="):
            assert "default" in action.help
    assert "Columns" in text or "columns" in text


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "rftlattice", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert all(name in proc.stdout for name in SUBCOMMANDS)
