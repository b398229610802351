import json
import subprocess
import sys

import pytest

from fraclab.cli import EXIT_CERT, EXIT_CONFIG, EXIT_NONCONV, EXIT_OK, main
from fraclab.core import GridFunction
from fraclab.schema import validate

SIDE = {"solution.json", "upper.json", "lower.json"}


def _validate_dir(out):
    seen = []
    for path in sorted(out.glob("*.json")):
        doc = json.loads(path.read_text())
        if path.name in SIDE:
            validate(doc, "grid_function")
        else:
            validate(doc)
        seen.append(path.name)
    assert (out / "run.log").is_file()
    return seen


def _run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


SOLVE = ["--set", "m=33", "--set", "g=hat", "--set", "g.c=1", "--set", "g.w=1", "--set", "s=0.6"]


def test_constants_prints_pi_over_two(tmp_path, capsys):
    code, out = _run(tmp_path, "constants", "--name", "C", "--beta", "0.25", "--s", "0.5")
    assert code == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed["value"] == pytest.approx(1.5707963267948966, abs=1e-12)
    assert _validate_dir(out) == ["constants.json"]


@pytest.mark.parametrize("name, extra", [("N", ["--n", "3"]), ("delta_ring", ["--beta", "0.25"]),
                                         ("c_p", ["--p", "3"])])
def test_other_constants(tmp_path, name, extra):
    code, out = _run(tmp_path, "constants", "--name", name, "--s", "0.5", *extra)
    assert code == EXIT_OK
    _validate_dir(out)


def test_barrier_check_exit_codes(tmp_path):
    code, out = _run(tmp_path, "barrier-check", "--family", "cone", "--beta", "0.25", name="a")
    assert code == EXIT_OK and _validate_dir(out) == ["certificate.json"]
    assert (out / "certificate.csv").read_text().startswith("point,value,error,slack,ok")
    code, _ = _run(tmp_path, "barrier-check", "--family", "cone", "--beta", "0.6", name="b")
    assert code == EXIT_CONFIG
    code, _ = _run(tmp_path, "barrier-check", "--family", "triangle", name="c")
    assert code == EXIT_CONFIG


def test_eval_writes_table(tmp_path):
    code, out = _run(tmp_path, "eval", "--profile", "gaussian", "--x", "0.0", "--x", "0.5",
                     "--s", "0.5")
    assert code == EXIT_OK and _validate_dir(out) == ["eval.json"]
    assert len((out / "eval.csv").read_text().splitlines()) == 3


def test_solve_outputs_and_round_trip(tmp_path):
    code, out = _run(tmp_path, "solve", *SOLVE)
    assert code == EXIT_OK
    assert _validate_dir(out) == ["solution.json", "solve_report.json"]
    u = GridFunction.from_csv(out / "solution.csv")
    assert u.grid.m == 33 and u.values.max() <= 1.0
    report = json.loads((out / "solve_report.json").read_text())
    assert report["report"]["status"] == "converged"


def test_solve_is_deterministic(tmp_path):
    _, a = _run(tmp_path, "solve", *SOLVE, name="a")
    _, b = _run(tmp_path, "solve", *SOLVE, name="b")
    for name in ("solution.csv", "solution.json", "solve_report.json", "config.txt", "run.log"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_solve_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("m = 17\ng = 2.5\n")
    code, out = _run(tmp_path, "solve", "--config", str(cfg), "--set", "m=21", "--quad", "coarse")
    assert code == EXIT_OK
    text = (out / "config.txt").read_text()
    assert "m = 21" in text and "quad = coarse" in text


def test_non_convergence_exit(tmp_path):
    code, out = _run(tmp_path, "solve", *SOLVE, "--set", "max_iter=1")
    assert code == EXIT_NONCONV
    assert "exit = 3" in (out / "run.log").read_text()
    _validate_dir(out)


@pytest.mark.parametrize("override", ["bogus=1", "s=1.5", "m=abc", "g=wiggle"])
def test_config_errors_exit_two(tmp_path, capsys, override):
    code, _ = _run(tmp_path, "solve", "--set", override)
    assert code == EXIT_CONFIG
    key = override.split("=")[0]
    assert f"error: {key}" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    code, _ = _run(tmp_path, "solve", "--config", str(tmp_path / "nope.cfg"))
    assert code == EXIT_CONFIG


def test_env_out_directory(tmp_path, monkeypatch):
    monkeypatch.setenv("NONLOCAL_OUT", str(tmp_path / "env"))
    assert main(["solve", "--set", "g=1"]) == EXIT_OK
    assert (tmp_path / "env" / "solve_report.json").is_file()
    # an explicit --out wins over the environment
    code, out = _run(tmp_path, "solve", "--set", "g=1", name="explicit")
    assert code == EXIT_OK and (out / "solve_report.json").is_file()


def test_perron(tmp_path):
    code, out = _run(tmp_path, "perron", *SOLVE)
    assert code == EXIT_OK
    assert _validate_dir(out) == ["lower.json", "perron_report.json", "upper.json"]
    assert json.loads((out / "perron_report.json").read_text())["verdict"] == "pass"


LADDER = ["--set", "ladder=33,65,129"]


def test_probe_puncture(tmp_path):
    code, out = _run(tmp_path, "probe", "--experiment", "puncture", "--set", "s=0.75", *LADDER)
    assert code == EXIT_OK and _validate_dir(out) == ["regularity_report.json"]
    doc = json.loads((out / "regularity_report.json").read_text())
    assert doc["reports"][0]["verdict"] == "attaining"
    assert len((out / "ladder.csv").read_text().splitlines()) == 4


def test_probe_rhs_independence(tmp_path):
    code, out = _run(tmp_path, "probe", "--experiment", "rhs-independence", "--set", "s=0.75",
                     "--set", "ladder=65,129,257")
    assert code == EXIT_OK
    _validate_dir(out)


def test_probe_barrier_and_exterior(tmp_path):
    code, out = _run(tmp_path, "probe", "--experiment", "barrier", "--set", "m=129", name="b")
    assert code == EXIT_OK and _validate_dir(out) == ["certificate.json"]
    code, out = _run(tmp_path, "probe", "--experiment", "exterior", *LADDER, "--set", "g=hat",
                     "--set", "g.c=1.5", "--set", "g.w=0.5", name="e")
    assert code == EXIT_OK and _validate_dir(out) == ["certificate.json"]


def test_probe_rejects_even_ladder(tmp_path):
    code, _ = _run(tmp_path, "probe", "--experiment", "puncture", "--set", "ladder=32,64")
    assert code == EXIT_CONFIG


def test_threads_option(tmp_path):
    code, _ = _run(tmp_path, "solve", "--set", "g=1", "--threads", "1", name="a")
    assert code == EXIT_OK
    code, _ = _run(tmp_path, "solve", "--set", "g=1", "--threads", "0", name="b")
    assert code == EXIT_CONFIG


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fraclab.cli", "constants", "--name", "C",
                           "--beta", "0.25", "--s", "0.5", "--out", str(tmp_path)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and '"value"' in proc.stdout
