import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml
from numpy.testing import assert_allclose

from logbandits.core import link_mu_dot
from logbandits.design import DesignObjective, ObjectiveKind, eval_objective, minimize_design
from logbandits.env import RewardEnv
from logbandits.errors import InvalidConfig
from logbandits.harness import ExperimentConfig, ExperimentKind, run_experiment
from logbandits.harness.cli import main
from logbandits.harness.generators import (gaussian_rescale, gen_example1, gen_example2,
                                           gen_fig1_benchmark, gen_gaussian_burnin, gen_pairwise)
from logbandits.harness.runner import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, SUMMARY_COLUMNS
from logbandits.pure_explore import RageOptions, rage_glm

REPO = Path(__file__).resolve().parents[1]


# --- generators ---------------------------------------------------------------------------

def test_fig1_geometry():
    inst = gen_fig1_benchmark(10)
    assert inst.decision_arms.shape == (11, 10)
    assert inst.best_arm == 0
    gaps = np.sort(inst.gaps)
    assert_allclose(gaps[1], 1 - math.cos(0.1), rtol=1e-12)
    assert abs(gaps[1] - 0.0049958) < 1e-7
    with pytest.raises(InvalidConfig):
        gen_fig1_benchmark(1)


def test_example_instances():
    r, eps = 3.0, 0.1
    e1 = gen_example1(r, eps)
    assert 1 / e1.kappa0 <= 4 * math.exp(r)
    assert_allclose(e1.kappa0, link_mu_dot(r), rtol=1e-12)
    e2 = gen_example2(r, eps)
    assert_allclose(e2.measurement_arms[2] @ e2.theta_star, eps, rtol=1e-12)
    np.testing.assert_array_equal(e2.decision_arms, np.eye(2))


def test_example2_design_value():
    # min over designs of ||e1 - e2||^2 in the inverse Fisher metric: point mass on e1 - e2
    r, eps = 3.0, 0.1
    e2 = gen_example2(r, eps)
    obj = DesignObjective(ObjectiveKind.MAX_DIRECTION_H, e2.measurement_arms,
                          directions=np.array([[1.0, -1.0]]), theta=e2.theta_star)
    lam = minimize_design(obj)
    assert_allclose(eval_objective(lam, obj), 1 / link_mu_dot(eps), rtol=1e-3)
    assert lam.weights[2] >= 0.99


def test_pairwise_provenance_and_cap():
    inst, pairs = gen_pairwise(12, 4, seed=3, return_pairs=True)
    Z, X = inst.decision_arms, inst.measurement_arms
    assert X.shape[0] == 66
    assert_allclose(X, Z[pairs[:, 0]] - Z[pairs[:, 1]], atol=0)
    capped, cp = gen_pairwise(30, 4, seed=3, cap=100, return_pairs=True)
    assert capped.measurement_arms.shape[0] == 100
    assert len({tuple(p) for p in cp}) == 100
    assert_allclose(np.linalg.norm(inst.theta_star), 1.0)
    again = gen_pairwise(12, 4, seed=3)
    np.testing.assert_array_equal(again.measurement_arms, X)


@pytest.mark.slow
def test_pairwise_rage_glm_correct():
    # a looser design solve (totals move by ~0.2%) keeps 190-direction designs fast
    opts = RageOptions(design_tol=1e-3, design_max_iters=500)
    correct = 0
    for s in range(10):
        inst = gen_pairwise(20, 5, seed=s, theta_norm=1.0)
        res = rage_glm(inst, 0.1, 0.5, inst.kappa0, RewardEnv(inst.theta_star, s), opts)
        correct += res.recommended == inst.best_arm
    assert correct >= 9


def test_gaussian_burnin_checkpoints_decrease():
    d, t = 16, 8000
    good = 0
    for s in range(10):
        series = gen_gaussian_burnin(d, 3.0, t, s)["xi_sq_series"]
        good += series[t // 4] >= series[t // 2] >= series[t]
    assert good >= 9


@pytest.mark.slow
def test_gaussian_burnin_polynomial_in_norm():
    d, t = 16, 40000
    hits = {}
    for S in (1.5, 3.0):
        hits[S] = [gen_gaussian_burnin(d, S, t, s)["satisfied_at"] for s in range(10)]
        assert None not in hits[S]
    ratio = np.mean(hits[3.0]) / np.mean(hits[1.5])
    assert ratio <= math.exp(3) / 2


def test_gaussian_burnin_preconditions():
    with pytest.raises(InvalidConfig):
        gen_gaussian_burnin(4, 3.0, 100, 0)
    with pytest.raises(InvalidConfig):
        gen_gaussian_burnin(16, 1.0, 8, 0)
    assert 0 < gaussian_rescale(16) < 1


# --- config -----------------------------------------------------------------------------

def _raw(kind, **kw):
    base = {
        "pure-explore": {"instance": {"generator": "example2", "r": 1.0, "eps": 0.5},
                         "algorithms": ["rage-glm-r", "passive"], "seeds": [0, 1]},
        "lower-bound": {"instance": {"generator": "example1", "r": 1.0, "eps": 0.5, "d": 16,
                                     "n_cap": 16},
                        "algorithms": ["transportation", "moderate-floor"], "seeds": [0]},
        "contextual": {"instance": {"d": 3, "K": 4, "T": 200},
                       "algorithms": ["sup-logistic", "uniform"], "seeds": [0, 1]},
        "gaussian-burnin": {"instance": {"d": 9, "s_norm": 2.0, "t": 400},
                            "algorithms": ["gaussian-burnin"], "seeds": [0, 1]},
    }[kind]
    base = {"kind": kind, **base}
    base.update(kw)
    return base


def test_config_validation():
    with pytest.raises(InvalidConfig):
        ExperimentConfig.from_dict(_raw("pure-explore", algorithms=[]))
    with pytest.raises(InvalidConfig):
        ExperimentConfig.from_dict(_raw("pure-explore", seeds=[]))
    with pytest.raises(InvalidConfig):
        ExperimentConfig.from_dict(_raw("pure-explore", delta=0.5))
    with pytest.raises(InvalidConfig):
        ExperimentConfig.from_dict(_raw("pure-explore", algorithms=["sup-logistic"]))
    with pytest.raises(InvalidConfig):
        ExperimentConfig.from_dict(_raw("pure-explore", colour="red"))
    with pytest.raises(InvalidConfig):
        ExperimentConfig.from_dict(_raw("pure-explore"), kind="coverage")
    cfg = ExperimentConfig.from_dict(_raw("pure-explore"))
    assert cfg.kind is ExperimentKind.PURE_EXPLORE
    assert cfg.with_overrides(out="elsewhere").config_hash() == cfg.config_hash()
    assert cfg.with_overrides(seed_offset=1).config_hash() != cfg.config_hash()


def test_shipped_configs_parse():
    for path in sorted((REPO / "configs").glob("*.yaml")):
        raw = yaml.safe_load(path.read_text())
        cfg = ExperimentConfig.from_dict(raw)
        assert cfg.kind.value == raw["kind"]


# --- runs --------------------------------------------------------------------------------

def _outputs(prefix):
    prefix = Path(prefix)
    files = [Path(f"{prefix}.summary.csv"), Path(f"{prefix}.manifest.json")]
    files += sorted(Path(f"{prefix}.runs").glob("*.json"))
    return {f.name.split(".", 1)[1] if f.parent != Path(f"{prefix}.runs") else f.name: f.read_bytes()
            for f in files}


@pytest.mark.parametrize("kind", ["pure-explore", "lower-bound", "contextual", "gaussian-burnin"])
def test_rerun_is_byte_identical(tmp_path, kind):
    a = ExperimentConfig.from_dict(_raw(kind, out=str(tmp_path / "a")))
    b = a.with_overrides(out=str(tmp_path / "b"))
    assert run_experiment(a) == EXIT_OK
    assert run_experiment(b, jobs=2) == EXIT_OK
    out_a, out_b = _outputs(tmp_path / "a"), _outputs(tmp_path / "b")
    assert out_a == out_b
    rows = list(csv.DictReader(open(tmp_path / "a.summary.csv")))
    assert tuple(rows[0]) == SUMMARY_COLUMNS[a.kind] + ("error",)
    assert len(rows) == len(a.algorithms) * len(a.seeds)
    assert [r["algorithm"] for r in rows] == [x for x in a.algorithms for _ in a.seeds]
    manifest = json.loads(out_a["manifest.json"])
    assert manifest["config_hash"] == a.config_hash()
    assert manifest["seeds"] == list(a.seeds)
    assert str(tmp_path) not in out_a["manifest.json"].decode()


def test_runtime_failure_flushes_error_rows(tmp_path):
    # T below d: SupLogistic rejects the horizon at run time, uniform still runs
    cfg = ExperimentConfig.from_dict(_raw("contextual", instance={"d": 3, "K": 4, "T": 2},
                                          out=str(tmp_path / "x")))
    assert run_experiment(cfg) == EXIT_RUNTIME
    rows = list(csv.DictReader(open(tmp_path / "x.summary.csv")))
    assert [bool(r["error"]) for r in rows] == [True, True, False, False]
    assert rows[0]["error"].startswith("InvalidConfig")
    assert json.loads((tmp_path / "x.manifest.json").read_text())["failed"] == 2


def test_budget_overrun_is_reported_not_failed(tmp_path):
    cfg = ExperimentConfig.from_dict(_raw("pure-explore", budget=10, out=str(tmp_path / "y")))
    assert run_experiment(cfg) == EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "y.summary.csv")))
    assert {r["terminated"] for r in rows} == {"BudgetExceeded"}


@pytest.mark.slow
def test_coverage_row(tmp_path):
    raw = yaml.safe_load((REPO / "configs" / "coverage.yaml").read_text())
    raw["out"] = str(tmp_path / "cov")
    assert run_experiment(ExperimentConfig.from_dict(raw)) == EXIT_OK
    (row,) = csv.DictReader(open(tmp_path / "cov.summary.csv"))
    assert int(row["reps"]) == 2000
    assert float(row["failure_rate_true"]) <= 0.1


# --- CLI --------------------------------------------------------------------------------

def test_cli_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.yaml"
    good.write_text(yaml.safe_dump(_raw("gaussian-burnin", out=str(tmp_path / "g"))))
    assert main(["gaussian-burnin", "--config", str(good)]) == EXIT_OK
    assert main(["gaussian-burnin", "--config", str(good), "--seed-offset", "5",
                 "--out", str(tmp_path / "h")]) == EXIT_OK
    names = sorted(p.name for p in (tmp_path / "h.runs").iterdir())
    assert names == ["gaussian-burnin-5.json", "gaussian-burnin-6.json"]
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump(_raw("gaussian-burnin", algorithms=[])))
    assert main(["gaussian-burnin", "--config", str(bad)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert main(["contextual", "--config", str(good)]) == EXIT_CONFIG
    assert main(["gaussian-burnin", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    fail = tmp_path / "fail.yaml"
    fail.write_text(yaml.safe_dump(_raw("gaussian-burnin", instance={"d": 4, "s_norm": 3.0, "t": 100},
                                        out=str(tmp_path / "f"))))
    assert main(["gaussian-burnin", "--config", str(fail)]) in (EXIT_CONFIG, EXIT_RUNTIME)


def test_console_script_module_entry(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump(_raw("gaussian-burnin", out=str(tmp_path / "m"))))
    proc = subprocess.run([sys.executable, "-m", "logbandits.harness.cli", "gaussian-burnin",
                           "--config", str(cfg)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "m.summary.csv").exists()
