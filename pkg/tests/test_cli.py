import csv
import subprocess
import sys

import numpy as np
import pytest

from slinverse.cli import (EXIT_BOUND, EXIT_CONFIG, EXIT_IO, EXIT_OK, RunConfig, main, read_config,
                           ConfigError)
from slinverse.geometry import PI

from conftest import reference


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_forward_classical_rows(tmp_path):
    out = tmp_path / "spec.csv"
    assert main(["forward", "--a", "2", "--alpha", "1", "--modes", "3", "--in", "zero",
                 "--out", str(out)]) == EXIT_OK
    header, data = read_csv(out)
    assert header == ["n", "lambda", "alpha", "char_residual"]
    assert np.array_equal(data[:, 0], [1, 2, 3])
    assert np.allclose(data[:, 1], [0.5, 1.5, 2.5], atol=1e-10)
    assert np.allclose(data[:, 2], PI / 2, atol=1e-8)
    assert round(data[0, 2], 4) == 1.5708


def test_forward_layered_matches_reference(tmp_path):
    out = tmp_path / "spec.csv"
    assert main(["forward", "--a", "2", "--alpha", "0.5", "--modes", "5", "--out", str(out)]) == EXIT_OK
    _, data = read_csv(out)
    ref = reference(2.0, 0.5, 5)
    assert np.allclose(data[:, 1], ref.lambda0, atol=1e-8)
    assert np.allclose(data[:, 2], ref.alpha0, rtol=1e-8)


def test_floats_have_seventeen_digits(tmp_path):
    out = tmp_path / "spec.csv"
    main(["forward", "--a", "2", "--alpha", "1", "--modes", "2", "--in", "cos", "--out", str(out)])
    line = out.read_text().splitlines()[1].split(",")
    assert float(line[1]) == float(format(float(line[1]), ".17g"))
    assert len(line[1].replace(".", "").lstrip("0")) >= 15


def test_missing_input_names_path(tmp_path, capsys):
    missing = tmp_path / "nowhere.csv"
    code = main(["forward", "--a", "2", "--alpha", "0.5", "--modes", "3", "--in", str(missing)])
    assert code == EXIT_IO
    assert str(missing) in capsys.readouterr().err


def test_malformed_csv_reports_line(tmp_path, capsys):
    bad = tmp_path / "spec.csv"
    bad.write_text("n,lambda,alpha\n1,0.5,1.57\n2,oops,1.57\n")
    code = main(["inverse", "--a", "2", "--alpha", "1", "--modes", "2", "--in", str(bad)])
    assert code == EXIT_IO
    assert f"{bad}:3" in capsys.readouterr().err


def test_spectral_file_with_gap_is_rejected(tmp_path):
    bad = tmp_path / "spec.csv"
    bad.write_text("n,lambda,alpha\n1,0.5,1.57\n3,2.5,1.57\n")
    assert main(["inverse", "--a", "2", "--alpha", "1", "--modes", "2", "--in", str(bad)]) == EXIT_IO


def test_invalid_profile_is_rejected_before_work(capsys):
    assert main(["forward", "--a", "1", "--alpha", "0.5", "--modes", "3"]) == EXIT_CONFIG
    assert "a(1+alpha)" in capsys.readouterr().err
    assert main(["example-verify", "--a", "1", "--alpha", "0.5"]) == EXIT_CONFIG


@pytest.mark.parametrize("argv", [
    ["forward", "--a", "2", "--alpha", "0.5", "--modes", "0"],
    ["forward", "--a", "2"],
    ["inverse", "--a", "2", "--alpha", "0.5", "--t-grid", "4"],
    ["forward", "--a", "2", "--alpha", "0.5", "--in", "const:x"],
])
def test_config_validation(argv):
    assert main(argv) == EXIT_CONFIG


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# layered run\na = 2\nalpha = 0.5\nmode = forward\nmodes = 4\n"
                   "in = const:0.5\nout = " + str(tmp_path / "s.csv") + "\ntol_root = 1e-11\n")
    values = read_config(cfg)
    assert values["a"] == 2.0 and values["modes"] == 4 and values["input"] == "const:0.5"
    assert values["tol_root"] == 1e-11
    assert main(["--config", str(cfg), "--modes", "3"]) == EXIT_OK
    _, data = read_csv(tmp_path / "s.csv")
    assert len(data) == 3


@pytest.mark.parametrize("text", ["a 2\n", "colour = red\n", "modes = many\n"])
def test_config_file_errors(tmp_path, text):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(text)
    with pytest.raises(ConfigError, match=":1:"):
        read_config(cfg)


def test_run_config_defaults():
    cfg = RunConfig(a=2.0, alpha=0.5, mode="inverse").validated()
    assert cfg.n_trunc == 64
    assert cfg.inversion().t_grid == 128
    with pytest.raises(ConfigError):
        RunConfig(a=2.0, alpha=0.5, mode="inverse", tol_solve=0.0).validated()


def test_roundtrip_zero(capsys):
    code = main(["roundtrip", "--a", "2", "--alpha", "0.5", "--modes", "32", "--x-grid", "41",
                 "--t-grid", "64", "--in", "zero"])
    assert code == EXIT_OK
    assert "PASS" in capsys.readouterr().out


def test_roundtrip_reports_missed_bound(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("bound_l2 = 1e-9\n")
    code = main(["roundtrip", "--config", str(cfg), "--a", "2", "--alpha", "1", "--modes", "16",
                 "--x-grid", "21", "--t-grid", "32", "--in", "cos"])
    assert code == EXIT_BOUND


def test_inverse_writes_potential_and_trace(tmp_path):
    spec = tmp_path / "spec.csv"
    out = tmp_path / "q.csv"
    main(["forward", "--a", "2", "--alpha", "0.5", "--modes", "16", "--in", "zero", "--out", str(spec)])
    assert main(["inverse", "--a", "2", "--alpha", "0.5", "--modes", "16", "--x-grid", "21",
                 "--t-grid", "32", "--in", str(spec), "--out", str(out)]) == EXIT_OK
    header, q = read_csv(out)
    assert header == ["x", "q"] and len(q) == 21
    header, tr = read_csv(tmp_path / "q_trace.csv")
    assert header == ["x", "A_diag"] and len(tr) == 21
    assert np.max(np.abs(q[:, 1])) < 0.5


def test_inverse_needs_enough_modes(tmp_path):
    spec = tmp_path / "spec.csv"
    main(["forward", "--a", "2", "--alpha", "1", "--modes", "4", "--out", str(spec)])
    assert main(["inverse", "--a", "2", "--alpha", "1", "--modes", "4", "--trunc", "8",
                 "--in", str(spec)]) == EXIT_CONFIG


def test_example_verify(capsys):
    assert main(["example-verify", "--a", "2", "--alpha", "0.5"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") == 3
    assert main(["example-verify", "--a", "2", "--alpha", "1"]) == EXIT_OK


def test_parseval_exit_codes(capsys):
    assert main(["parseval", "--a", "2", "--alpha", "0.5", "--modes", "64", "--in", "parabola"]) == EXIT_OK
    table = dict(ln.split(",") for ln in capsys.readouterr().out.splitlines()[1:] if "," in ln)
    assert float(table["64"]) < float(table["16"])
    assert main(["parseval", "--a", "2", "--alpha", "0.5", "--modes", "64", "--in", "one"]) == EXIT_OK
    assert "not checked" in capsys.readouterr().out
    assert main(["parseval", "--a", "2", "--alpha", "0.5", "--in", "sine"]) == EXIT_CONFIG


def test_parseval_single_term_exact(capsys):
    main(["parseval", "--a", "2", "--alpha", "1", "--modes", "1"])
    rows = [ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("1,")]
    assert abs(float(rows[0].split(",")[1])) < 1e-12


def test_outputs_are_byte_identical(tmp_path):
    spec = tmp_path / "spec.csv"
    main(["forward", "--a", "2", "--alpha", "0.5", "--modes", "16", "--in", "cos", "--out", str(spec)])
    outs = []
    for k in range(2):
        out = tmp_path / f"q{k}.csv"
        main(["inverse", "--a", "2", "--alpha", "0.5", "--modes", "16", "--x-grid", "21",
              "--t-grid", "32", "--in", str(spec), "--out", str(out)])
        outs.append((out.read_bytes(), (tmp_path / f"q{k}_trace.csv").read_bytes()))
    assert outs[0] == outs[1]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "slinverse", "forward", "--a", "2", "--alpha", "1",
                           "--modes", "2"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "n,lambda,alpha,char_residual"
