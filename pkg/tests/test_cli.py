import hashlib
import json

import pytest

from cnls_stability import __version__
from cnls_stability.cli import main, parse_complex, parse_range


def _run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main(["--out", str(out), *argv])
    return code, out


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_parse_helpers():
    assert parse_range("1:2") == (1.0, 2.0)
    assert parse_range("-1:1:5", with_count=True) == (-1.0, 1.0, 5)
    assert parse_complex("0.1-2.5i") == complex(0.1, -2.5)
    assert parse_complex("3i") == 3j


def test_melnikov_supercritical(tmp_path):
    code, out = _run(tmp_path, "melnikov", "--s", "4", "--ell", "0", "--beta2", "2")
    assert code == 0
    res = json.loads((out / "melnikov.json").read_text())
    assert res["verdict"] == "supercritical"
    assert res["a2"] < 0 and res["b2"] > 0
    assert (out / "profiles.csv").exists()


def test_manifest_hashes(tmp_path):
    code, out = _run(tmp_path, "specfun-selftest")
    assert code == 0
    m = _manifest(out)
    assert m["status"] == "ok" and m["exit_code"] == 0 and m["version"] == __version__
    assert m["outputs"]
    for entry in m["outputs"]:
        data = (out / entry["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]
        assert len(data) == entry["bytes"]
    assert all(c["pass"] for c in json.loads((out / "selftest.json").read_text())["checks"])


def test_deterministic_outputs(tmp_path):
    argv = ["evans", "--s", "4", "--beta2", "2", "--beta1", "10", "--re", "0.1:0.5:3", "--im=-2:2:3"]
    code1, a = _run(tmp_path, *argv, name="a")
    code2, b = _run(tmp_path, *argv, name="b")
    assert code1 == code2 == 0
    for f in ("evans.csv", "evans.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    ha = {e["path"]: e["sha256"] for e in _manifest(a)["outputs"]}
    hb = {e["path"]: e["sha256"] for e in _manifest(b)["outputs"]}
    assert ha == hb


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# pitchfork search\ns = 4\nbeta2 = 2\nbeta1 = 2:12\nintervals = 200\n")
    code, out = _run(tmp_path, "--config", str(cfg), "continue", "--beta1", "2:7")
    assert code == 0
    forks = json.loads((out / "pitchforks.json").read_text())
    assert forks["beta1_range"] == [2.0, 7.0]
    assert forks["pitchforks"] == pytest.approx([3.0, 6.0], abs=1e-6)


@pytest.mark.parametrize("argv", [
    ["melnikov", "--s", "-1", "--ell", "0", "--beta2", "2"],
    ["melnikov", "--s", "4", "--ell", "0"],
    ["evans", "--s", "4", "--beta2", "2", "--point", "1"],
    ["continue", "--s", "4", "--beta2", "2", "--beta1", "abc"],
    ["bogus"],
])
def test_config_errors_exit_one(tmp_path, argv):
    code, _ = _run(tmp_path, *argv)
    assert code == 1


def test_missing_config_file(tmp_path):
    code, _ = _run(tmp_path, "--config", str(tmp_path / "nope.cfg"), "specfun-selftest")
    assert code == 1


def test_numerical_failure_exit_two(tmp_path):
    # a point on a branch cut of the Evans function
    code, out = _run(tmp_path, "evans", "--s", "4", "--beta2", "2", "--beta1", "10", "--point=-0.5+1i")
    assert code == 2
    err = json.loads((out / "error.json").read_text())
    assert err["kind"] == "numerical"
    m = _manifest(out)
    assert m["status"] == "numerical_failure" and m["exit_code"] == 2


def test_threads_recorded(tmp_path, monkeypatch):
    monkeypatch.delenv("CNLS_THREADS", raising=False)
    code, out = _run(tmp_path, "--threads", "2", "specfun-selftest")
    assert code == 0 and _manifest(out)["threads"] == "2"
