import csv
import json
import subprocess
import sys

import pytest

from interpstab.cli import COMMANDS, main

LOG_TRIPLE = {"phi": {"kind": "power_log", "theta": 0.5},
              "phi0": {"kind": "power_log", "theta": 0.5},
              "phi1": {"kind": "power_log", "theta": 0.5, "a": 1}}
KF = {"couple": {"q": 2, "v": [1, 1, 1], "w": [1, 0.25, 0.0625]}, "vector": [1, -2, 0.5]}


def run(tmp_path, *args, config=None, name="run"):
    out = tmp_path / name
    argv = list(args) + ["--out", str(out)]
    if config is not None:
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(config))
        argv += ["--config", str(path)]
    code = main(argv)
    return code, out


def report(out, cmd):
    return json.loads((out / f"{cmd.replace('-', '_')}.json").read_text())


def test_discretize_powers_of_four(tmp_path):
    code, out = run(tmp_path, "discretize", "--window", f"{4.0 ** -10}:{4.0 ** 10}", "--rho", "2",
                    config={"function": {"kind": "power_log", "theta": 0.5}})
    assert code == 0
    with (out / "discretize.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 21
    for row in rows:
        assert float(row["t_k"]) == pytest.approx(4.0 ** int(row["k"]), rel=1e-11)
    assert {r["zone"] for r in rows[:-1]} == {"Z1"}


def test_condition_v_power_triple(tmp_path):
    code, out = run(tmp_path, "condition-v")
    r = report(out, "condition-v")
    assert code == 0
    assert r["max_cardinality"] == 4 and r["bounded"] is True


def test_condition_v_log_triple_unbounded(tmp_path):
    code, out = run(tmp_path, "condition-v", "--window", "1e-6:1e6", config={"triple": LOG_TRIPLE})
    assert code == 1 and report(out, "condition-v")["bounded"] is False


def test_verify_fn_non_quasi_concave_table(tmp_path):
    pts = [[2.0 ** k, 2.0 ** (1.5 * k)] for k in range(-10, 11)]
    code, out = run(tmp_path, "verify-fn", config={"function": {"kind": "table", "points": pts}})
    r = report(out, "verify-fn")
    assert code == 1 and r["violations"]


def test_verify_fn_rejected_power_log(tmp_path):
    code, out = run(tmp_path, "verify-fn", config={"function": {"kind": "power_log", "theta": 1.5}})
    assert code == 1 and report(out, "verify-fn")["violations"][0]["kind"] == "invalid_parameter"


def test_verify_fn_pass(tmp_path):
    code, out = run(tmp_path, "verify-fn", "--window", "1e-12:1e12")
    assert code == 0 and report(out, "verify-fn")["passed"]


def test_kfunc_profile(tmp_path):
    code, out = run(tmp_path, "kfunc", config=KF)
    assert code == 0
    with (out / "kfunc.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "K"] and len(rows) == 33


def test_kfunc_step_function(tmp_path):
    code, out = run(tmp_path, "kfunc", config={"step": [[1, 2], [2, 1]]})
    assert code == 0


def test_norm(tmp_path):
    cfg = {"couple": {"q": 1, "v": [1.0], "w": [1.0]}, "vector": [1.0], "p": 1}
    code, out = run(tmp_path, "norm", config=cfg)
    r = report(out, "norm")
    assert code == 0
    assert r["janson"]["value"] == pytest.approx(3.0, rel=1e-8)
    assert r["gilbert_rhs"] == pytest.approx(1.0)


@pytest.mark.parametrize("cmd", ["gilbert-check", "sum-sup", "stability"])
def test_experiments_pass_on_power_triple(tmp_path, cmd):
    code, out = run(tmp_path, cmd, "--samples", "30", "--p", "2")
    assert code == 0
    assert report(out, cmd)["status"] == 0


def test_falsify_log_triple(tmp_path):
    code, out = run(tmp_path, "falsify", "--window", "1e-6:1e6", "--p", "1",
                    config={"triple": LOG_TRIPLE})
    r = report(out, "falsify")
    assert code == 0 and r["diverges"] and r["condition_v_fails"]
    with (out / "falsify.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["window", "worst_ratio", "max_cardinality"] and len(rows) == 4


def test_falsify_power_triple_control(tmp_path):
    code, out = run(tmp_path, "falsify", "--window", "1e-6:1e6")
    r = report(out, "falsify")
    assert code == 0 and not r["diverges"] and not r["condition_v_fails"]


def test_config_embedded(tmp_path):
    cfg = {"triple": LOG_TRIPLE, "window": [1e-6, 1e6], "seed": 4}
    _, out = run(tmp_path, "condition-v", config=cfg)
    r = report(out, "condition-v")
    assert r["config"]["triple"] == LOG_TRIPLE
    assert r["config"]["seed"] == 4 and r["config"]["window"] == [1e-6, 1e6]


@pytest.mark.parametrize("cmd", list(COMMANDS))
def test_byte_identical_reruns(tmp_path, cmd):
    cfg = {"samples": 20, "seed": 9}
    if cmd in ("kfunc", "norm"):
        cfg.update(KF)
    a = run(tmp_path, cmd, config=cfg, name="a")[1]
    b = run(tmp_path, cmd, config=cfg, name="b")[1]
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()


@pytest.mark.parametrize("text,field", [
    ('{"window": [1e-3, 1e3]', "--config"),
    ('{"window": [2, 3]}', "window"),
    ('{"p": 0.5}', "p"),
    ('{"rho": 1}', "rho"),
    ('{"samples": 0}', "samples"),
    ('{"triple": {"phi": {"kind": "power_log"}}}', "triple.phi"),
    ('[1, 2]', "<root>"),
])
def test_malformed_config_exit_2(tmp_path, capsys, text, field):
    path = tmp_path / "bad.json"
    path.write_text(text)
    assert main(["stability", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert f"'{field}'" in capsys.readouterr().err


def test_bad_json_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "window": [1e-3, 1e3],\n  "p": \n}')
    assert main(["condition-v", "--config", str(path)]) == 2
    assert "line 4" in capsys.readouterr().err


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "interpstab.cli", "condition-v", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "pass" in res.stdout
