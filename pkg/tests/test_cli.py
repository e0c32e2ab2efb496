import io
import json
import math
import subprocess
import sys

import pytest

from convexflow import __version__
from convexflow.cli import main, run
from convexflow.config import ConfigError, RunConfig
from convexflow.fieldio import write_field
from convexflow.spectral import set_threads

from conftest import random_field

SMALL = {"kernels": {"fejer_r": [2, 4], "dirichlet_N": [4, 8]},
         "geometry": {"samples": 50, "estimate_samples": 100}}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "small.json"
    p.write_text(json.dumps(SMALL))
    return str(p)


@pytest.fixture(autouse=True)
def _reset_threads(monkeypatch):
    monkeypatch.delenv("CI_THREADS", raising=False)
    yield
    set_threads(1)


def _run(*argv):
    buf = io.StringIO()
    code, report = run(list(argv), buf)
    return code, report, buf.getvalue()


class TestConfig:
    def test_defaults(self):
        cfg = RunConfig()
        assert cfg["threads"] == 1 and cfg["tol"] == 1e-7
        assert cfg.param_set().lam == 40

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key 'params.lamda'"):
            RunConfig({"params": {"lamda": 3}})

    def test_type_checked(self):
        with pytest.raises(ConfigError):
            RunConfig({"threads": "2"})
        with pytest.raises(ConfigError):
            RunConfig({"times": [0.0, 0.0]})

    def test_hash_ignores_execution_keys(self):
        assert RunConfig({"threads": 8, "out": "/x"}).hash() == RunConfig().hash()
        assert RunConfig({"tol": 1e-6}).hash() != RunConfig().hash()


class TestCommands:
    def test_params(self, cfg_path):
        code, rep, _ = _run("params", "--beta", "15", "--config", cfg_path)
        assert code == 0
        feas = rep["results"]["feasibility"]
        assert feas["feasible"]
        assert rep["version"] == __version__ and len(rep["config_hash"]) == 16

    def test_params_infeasible_beta(self, cfg_path):
        code, rep, _ = _run("params", "--beta", "14.5", "--config", cfg_path)
        assert not rep["results"]["feasibility"]["feasible"]
        assert rep["results"]["plans"] == []

    def test_geometry(self, cfg_path):
        code, rep, _ = _run("geometry", "--config", cfg_path)
        assert code == 0
        g = [r["gamma_identity"] for r in rep["results"]["gamma_identity"]]
        assert max(abs(x - math.sqrt(0.5)) for x in g) < 1e-12

    def test_kernels(self, cfg_path):
        code, rep, _ = _run("kernels", "--config", cfg_path)
        assert code == 0
        assert all(rep["checks"].values())
        assert "dirichlet_log_exponent" in rep["results"]["trends"]

    def test_build_flow(self, cfg_path):
        code, rep, _ = _run("build-flow", "--config", cfg_path)
        assert code == 0
        assert rep["results"]["product_support"]
        # reported only: the flow itself is not divergence free
        assert "div_flow" not in rep["checks"]
        assert rep["results"]["max_div_flow"] > 0

    def test_residual_zero(self, cfg_path):
        code, rep, _ = _run("residual", "--zero", "--config", cfg_path)
        assert code == 0
        assert rep["results"]["max_l2"] == 0.0

    def test_norms(self, cfg_path, rng, tmp_path):
        f = random_field(rng, 3, nmodes=6)
        path = tmp_path / "f.cifld"
        write_field(path, f, time=0.0)
        code, rep, _ = _run("norms", "--field", str(path), "--config", cfg_path)
        assert code == 0
        vals = {r["norm"]: r["value"] for r in rep["results"]["norms"]}
        assert vals["L^2.0"] == pytest.approx(vals["L^2 (Parseval)"], rel=1e-10)
        assert vals["L^1.0"] <= vals["L^2.0"] * (2 * math.pi) ** 1.5 + 1e-9


class TestErrors:
    def test_unknown_config_key(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"nope": 1}')
        assert _run("params", "--config", str(p))[0] == 1

    def test_missing_config(self, tmp_path):
        assert _run("params", "--config", str(tmp_path / "missing.json"))[0] == 1

    def test_norms_needs_field(self):
        assert _run("norms")[0] == 1

    def test_bad_field_file(self, tmp_path):
        p = tmp_path / "x.cifld"
        p.write_bytes(b"garbage")
        assert _run("norms", "--field", str(p))[0] == 1

    def test_bad_subcommand(self):
        assert _run("frobnicate")[0] == 1

    def test_help(self):
        assert _run("--help")[0] == 0

    def test_bad_threads(self, monkeypatch):
        assert _run("params", "--threads", "0")[0] == 1
        monkeypatch.setenv("CI_THREADS", "many")
        assert _run("params")[0] == 1


class TestOutput:
    def test_files_and_columns(self, cfg_path, tmp_path):
        out = tmp_path / "out"
        code, rep, text = _run("geometry", "--config", cfg_path, "--out", str(out))
        assert code == 0
        assert json.loads((out / "geometry.json").read_text()) == json.loads(text)
        lines = (out / "geometry.csv").read_text().splitlines()
        assert lines[0].endswith("config_hash,version")
        assert lines[1].endswith(f"{rep['config_hash']},{__version__}")
        assert len(lines) == 13

    @pytest.mark.parametrize("cmd", ["kernels", "geometry", "build-flow"])
    def test_thread_count_does_not_change_bytes(self, cfg_path, tmp_path, cmd):
        texts = []
        for t in ("1", "8"):
            out = tmp_path / t
            _run(cmd, "--config", cfg_path, "--threads", t, "--out", str(out))
            texts.append(((out / f"{cmd}.json").read_bytes(), (out / f"{cmd}.csv").read_bytes()))
        assert texts[0] == texts[1]

    def test_ci_threads(self, cfg_path, monkeypatch):
        import convexflow.spectral as spectral
        monkeypatch.setenv("CI_THREADS", "3")
        _run("params", "--config", cfg_path)
        assert spectral._state["workers"] == 3

    def test_repeat_runs_identical(self, cfg_path):
        assert _run("geometry", "--config", cfg_path)[2] == _run("geometry", "--config",
                                                                 cfg_path)[2]


def test_module_entry_point(cfg_path):
    out = subprocess.run([sys.executable, "-m", "convexflow", "params", "--config", cfg_path],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["command"] == "params"


def test_main_returns_code(cfg_path, capsys):
    assert main(["params", "--config", cfg_path]) == 0
