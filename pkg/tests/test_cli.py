"""Command-line interface: config resolution, exit codes and JSON output."""

from __future__ import annotations

import io
import json
import shutil
import subprocess
import sys

import pytest

from nlop.cli import ConfigError, main, resolve_config


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_kernels_list():
    code, out, _ = run(["kernels", "list"])
    assert code == 0
    names = [k["name"] for k in json.loads(out)["result"]["kernels"]]
    assert "morse" in names and "frac_lap" in names


def test_kernels_validate_exit_codes():
    code, out, _ = run(["kernels", "validate", "--kernel", "frac_lap", "--s", "0.5", "--theta", "1.5"])
    assert code == 0 and json.loads(out)["result"]["report"]["status"] == "PASS"
    code, out, _ = run(["kernels", "validate", "--kernel", "frac_lap", "--s", "0.5", "--theta", "0.5"])
    assert code == 1 and json.loads(out)["result"]["report"]["status"] == "FAIL"


def test_eval_with_check():
    code, out, _ = run(["eval", "--kernel", "gauss", "--func", "bump", "--x=-0.5,0,0.5", "--tau", "smooth:8,2",
                        "--m", "1", "--check"])
    assert code == 0
    res = json.loads(out)["result"]
    assert max(res["reconstruction_gap"]) <= 10 * max(res["decomposition"]["err_est"]) + 1e-12


def test_counterexample_command():
    code, out, _ = run(["counterexample", "--k", "10", "--R", "100"])
    assert code == 0
    res = json.loads(out)["result"]
    assert res["max_rel_error"] < 1e-7 and len(res["rows"]) == 3


def test_converge_nonconvergence_exit_code(tmp_path):
    csv_path = tmp_path / "fr.csv"
    code, out, _ = run(["converge", "--kernel", "frac_lap", "--s", "0.5", "--func", "counterexample_uk(k=10)",
                        "--m", "1", "--R-schedule", "16,32,64", "--grid", "5", "--csv", str(csv_path)])
    assert code == 2
    assert json.loads(out)["result"]["limit"]["converged"] is False
    assert csv_path.read_text().startswith("x1,R=16")


def test_converge_success():
    code, out, _ = run(["converge", "--kernel", "frac_lap", "--s", "0.5", "--func", "bump", "--R-schedule", "4,8,16",
                        "--grid", "5"])
    assert code == 0


def test_divergent_limit_exit_code():
    # at a fixed cut-off the decomposition exists; the limit does not
    code, _, _ = run(["eval", "--kernel", "frac_lap", "--s", "0.25", "--func", "x^3", "--m", "0"])
    assert code == 0
    code, out, _ = run(["converge", "--kernel", "frac_lap", "--s", "0.25", "--func", "x^3", "--m", "0",
                        "--R-schedule", "4,8,16,32", "--grid", "5"])
    assert code == 2
    assert any("limit tail" in d for d in json.loads(out)["result"]["limit"]["diagnostics"])


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as info:
        main(["eval", "--bogus"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 1


@pytest.mark.parametrize("argv", [
    ["eval", "--kernel", "gauss"],
    ["eval", "--kernel", "gauss", "--func", "x +* 1"],
    ["eval", "--kernel", "frac_lap", "--func", "bump"],
    ["eval", "--kernel", "gauss", "--func", "bump", "--x", "2"],
    ["counterexample", "--k", "10", "--R", "5"],
    ["viscosity", "check", "--kernel", "morse", "--func", "getoor(s=0.5)", "--f", "1"],
])
def test_invalid_inputs_exit_one(argv):
    code, _, err = run(argv)
    assert code == 1 and err.startswith("nlop: error:")


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('func = "bump"\nx = [0.25]\n[kernel]\nname = "frac_lap"\ns = 0.75\n'
                   '[eval]\ntau = "sharp:16"\nm = 1\n')
    code, out, _ = run(["eval", "--config", str(cfg), "--m", "2"])
    assert code == 0
    conf = json.loads(out)["config"]
    assert conf["kernel"] == "frac_lap" and conf["s"] == 0.75
    assert conf["tau"] == "sharp:16" and conf["m"] == 2 and conf["x"] == [0.25]


def test_config_unknown_keys(tmp_path):
    with pytest.raises(ConfigError):
        resolve_config("eval", {"nonsense": 1}, {})
    with pytest.raises(ConfigError):
        resolve_config("eval", {"dirichlet": {"N": 3}}, {})
    bad = tmp_path / "bad.toml"
    bad.write_text("func = \n")
    code, _, err = run(["eval", "--config", str(bad)])
    assert code == 1 and "config file" in err
    code, _, _ = run(["eval", "--config", str(tmp_path / "missing.toml")])
    assert code == 1


def test_out_file_and_nonfinite_values(tmp_path):
    target = tmp_path / "report.json"
    code, out, _ = run(["kernels", "list", "--out", str(target)])
    assert code == 0 and out == ""
    text = target.read_text()
    assert '"inf"' in text and "Infinity" not in text
    json.loads(text)


def test_dirichlet_commands(tmp_path):
    code, out, _ = run(["dirichlet", "family", "--kernel", "frac_lap", "--s", "0.5", "--normalized", "--m", "2",
                        "--N", "20", "--csv", str(tmp_path / "fam.csv")])
    res = json.loads(out)["result"]
    assert code == 0 and res["family_size"] == 2 and res["gram_det"] > 1e-8
    assert (tmp_path / "fam.csv").read_text().startswith("node,family_0,family_1")
    code, out, _ = run(["dirichlet", "solve", "--kernel", "frac_lap", "--s", "0.5", "--normalized", "--N", "20",
                        "--backend", "python"])
    assert code == 0 and json.loads(out)["result"]["solution"]["backend"] == "python"


def test_viscosity_command():
    code, out, _ = run(["viscosity", "check", "--kernel", "frac_lap", "--s", "0.5", "--normalized",
                        "--func", "getoor(s=0.5)", "--f", "1", "--x0", "0", "--curvatures", "-3"])
    assert code == 0 and json.loads(out)["result"]["viscosity"]["status"] == "PASS"


def test_output_is_deterministic():
    argv = ["eval", "--kernel", "abel", "--func", "x^2 * indicator(0, 20)", "--x", "0.1,0.6", "--m", "2"]
    assert run(argv)[1] == run(argv)[1]


@pytest.mark.skipif(shutil.which("nlop") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["nlop", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("nlop ")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nlop.cli", "kernels", "list"], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["version"]
