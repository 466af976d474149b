import shlex
import subprocess
import sys

import pytest

from latticesis import csvio
from latticesis.cli import EXIT_IO, EXIT_RUNTIME, EXIT_USAGE, main, parse_args, parse_grid


def run(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_happy_path():
    cfg = parse_args("simulate --size 128 --density 1 --p 0.5 --q 0.05 --seed 42".split())
    assert cfg.subcommand == "simulate"
    f = cfg.flags
    assert (f["size"], f["density"], f["p"], f["q"], f["seed"]) == (128, 1.0, 0.5, 0.05, 42)
    assert f["f0"] == 0.2 and f["out"] is None


def test_parse_defaults():
    f = parse_args(["threshold"]).flags
    assert f["size"] == 128 and f["f0"] == 0.2 and f["replicates"] == 16
    assert f["steps"] == 50 * 128 * 128 and f["resolution"] == 1 / 256


def test_parse_rejects_out_of_range(capsys):
    code, out, err = run(["simulate", "--p", "1.5"], capsys)
    assert code == EXIT_USAGE and out == ""
    assert "--p" in err and "[0, 1]" in err


def test_parse_unknown_flag(capsys):
    code, _, err = run(["simulate", "--frobnicate", "3"], capsys)
    assert code == EXIT_USAGE and "unrecognized" in err


def test_density_grid():
    f = parse_args(["sweep", "--density", "0.1:1:0.1,2,5,10"]).flags
    assert f["density"] == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 2.0, 5.0, 10.0]


@pytest.mark.parametrize("text,expected", [
    ("0.5", [0.5]),
    ("0.1,0.2", [0.1, 0.2]),
    ("0:1:0.25", [0.0, 0.25, 0.5, 0.75, 1.0]),
    ("0:0.9:0.25", [0.0, 0.25, 0.5, 0.75]),
])
def test_parse_grid(text, expected):
    assert parse_grid(text) == expected


@pytest.mark.parametrize("bad", ["", "1:2", "a", "1:2:0", "0.1,,0.2"])
def test_parse_grid_rejects(bad):
    with pytest.raises(Exception):
        parse_grid(bad)


def test_meanfield_row(capsys):
    code, out, _ = run(["meanfield", "--p", "0.5", "--q", "0.2", "--density", "1"], capsys)
    assert code == 0
    header, columns, rows = csvio.read_csv(out)
    assert columns == list(csvio.SOLVER_COLUMNS)
    assert len(rows) == 1
    row = dict(zip(columns, rows[0]))
    assert row["regime"] == "epidemic"
    assert float(row["q0"]) == pytest.approx(0.409, abs=5e-4)


def test_meanfield_threshold_curve(capsys):
    code, out, _ = run(["meanfield", "--p", "0.1:0.9:0.1", "--density", "0.3,1"], capsys)
    assert code == 0
    _, columns, rows = csvio.read_csv(out)
    assert columns == ["p", "d", "q0"] and len(rows) == 18


def test_stdout_is_pure_csv(capsys):
    code, out, err = run(["simulate", "--size", "8", "--steps", "120", "--seed", "1"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert all(line.startswith("#") for line in lines[:lines.index("tick,infected_fraction")])
    body = lines[lines.index("tick,infected_fraction") + 1:]
    assert len(body) == 120 and all(len(line.split(",")) == 2 for line in body)
    assert "simulate" in err


def test_simulate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["simulate", "--size", "16", "--steps", "300", "--seed", "5", "--quiet"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_header_command_reproduces_output(tmp_path, capsys):
    out = tmp_path / "run.csv"
    assert main(["simulate", "--size", "12", "--steps", "150", "--seed", "3", "--thin", "2",
                 "--quiet", "--out", str(out)]) == 0
    header, _, _ = csvio.read_csv(out.read_text())
    command = shlex.split(header["command"])
    assert command[0] == "latticesis"
    capsys.readouterr()
    assert main(command[1:] + ["--quiet"]) == 0
    assert capsys.readouterr().out == out.read_text()


def test_acor_roundtrip(tmp_path, capsys):
    traj = tmp_path / "traj.csv"
    assert main(["simulate", "--size", "16", "--steps", "2000", "--seed", "2", "--quiet",
                 "--out", str(traj)]) == 0
    code, out, _ = run(["acor", str(traj), "--quiet"], capsys)
    assert code == 0
    header, columns, rows = csvio.read_csv(out)
    assert columns == list(csvio.ANALYSIS_COLUMNS)
    row = dict(zip(columns, rows[0]))
    assert row["L"] == "16" and row["seed"] == "2" and row["extinct"] == "false"
    assert 0 < float(row["f_inf"]) < 1 and float(row["tau"]) > 0


def test_acor_constant_series_is_runtime_error(tmp_path, capsys):
    path = tmp_path / "flat.csv"
    path.write_text("tick,infected_fraction\n" + "".join(f"{t},0.25\n" for t in range(500)))
    code, out, err = run(["acor", str(path)], capsys)
    assert code == EXIT_RUNTIME
    assert "constant" in err and out == ""


def test_acor_missing_input(tmp_path, capsys):
    code, _, err = run(["acor", str(tmp_path / "nope.csv")], capsys)
    assert code == EXIT_IO and "nope.csv" in err


def test_unwritable_output(tmp_path, capsys):
    target = tmp_path / "missing_dir" / "out.csv"
    code, _, err = run(["meanfield", "--out", str(target)], capsys)
    assert code == EXIT_IO and str(target) in err


def test_threshold_output(capsys):
    code, out, _ = run(["threshold", "--size", "12", "--steps", "300", "--replicates", "2",
                        "--resolution", "0.125", "--p", "0.5", "--seed", "4", "--quiet"], capsys)
    assert code == 0
    header, columns, rows = csvio.read_csv(out)
    assert header["master_seed"] == "4"
    row = dict(zip(columns, rows[0]))
    assert float(row["bracket_high"]) - float(row["bracket_low"]) <= 0.125
    assert len(row["probes"].split(";")) == 3


def test_sweep_jobs_do_not_change_output(tmp_path):
    args = ["sweep", "--size", "12", "--steps", "300", "--replicates", "3", "--p", "0.3,0.6",
            "--q", "0.05,0.4", "--density", "1", "--seed", "8", "--quiet"]
    one, many = tmp_path / "j1.csv", tmp_path / "j8.csv"
    assert main(args + ["--jobs", "1", "--out", str(one)]) == 0
    assert main(args + ["--jobs", "8", "--out", str(many)]) == 0
    assert one.read_bytes() == many.read_bytes()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "latticesis", "meanfield", "--q", "0.1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "p,q,d,f_mf,regime,residual,q0" in proc.stdout
