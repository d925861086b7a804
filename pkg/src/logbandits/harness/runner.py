"""Seeded experiment orchestration and CSV/JSON result emission."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .. import __version__
from ..confidence import coverage_monte_carlo
from ..contextual import ContextModel, SupLogisticOptions, sup_logistic, uniform_policy
from ..env import RewardEnv
from ..errors import InvalidConfig, LogBanditsError
from ..lower_bounds import (build_hard_instance, inner_product_brackets, moderate_confidence_floor,
                            transportation_lower_bound)
from ..pure_explore import (RageOptions, passive_baseline, rage_glm, rage_glm_2, rage_glm_r)
from .config import ExperimentConfig, ExperimentKind
from .generators import (gen_coverage_instance, gen_example1, gen_example2, gen_fig1_benchmark,
                         gen_gaussian_burnin, gen_pairwise)

SUMMARY_COLUMNS = {
    ExperimentKind.COVERAGE: ("algorithm", "seed", "instance_id", "t", "delta", "reps",
                              "failure_rate_true", "failure_rate_empirical", "var_event_rate"),
    ExperimentKind.PURE_EXPLORE: ("algorithm", "seed", "instance_id", "correct", "total_samples",
                                  "burn_in_samples", "rounds", "terminated"),
    ExperimentKind.CONTEXTUAL: ("algorithm", "seed", "T", "final_regret", "average_regret"),
    ExperimentKind.LOWER_BOUND: ("algorithm", "seed", "value", "converged"),
    ExperimentKind.GAUSSIAN_BURNIN: ("algorithm", "seed", "satisfied_at", "xi_sq_final"),
}

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

_TRANSDUCTIVE = {
    "fig1": lambda p: gen_fig1_benchmark(int(p["d"])),
    "example1": lambda p: gen_example1(float(p["r"]), float(p["eps"])),
    "example2": lambda p: gen_example2(float(p["r"]), float(p["eps"])),
    "pairwise": lambda p: gen_pairwise(int(p["n_items"]), int(p["d"]), int(p.get("instance_seed", 0)),
                                       cap=int(p.get("cap", 5000)),
                                       theta_norm=float(p.get("theta_norm", 1.0))),
}


def build_transductive(spec):
    """Transductive instance from a ``{generator: ..., **params}`` mapping."""
    gen = spec.get("generator")
    if gen not in _TRANSDUCTIVE:
        raise InvalidConfig(f"unknown generator {gen!r}")
    try:
        return _TRANSDUCTIVE[gen](spec)
    except KeyError as exc:
        raise InvalidConfig(f"instance spec is missing {exc}") from None


def _context_model(spec):
    d, K = int(spec["d"]), int(spec["K"])
    theta = spec.get("theta")
    if theta is None:
        theta = np.full(d, float(spec.get("theta_norm", 1.0)) / math.sqrt(d))
    return ContextModel(d, K, np.asarray(theta, dtype=float))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# per-run workers
# ---------------------------------------------------------------------------

def _pure_explore(cfg, algo, seed):
    inst = build_transductive(cfg.instance)
    o = cfg.options
    opts = RageOptions(
        elimination_rule=o.get("elimination_rule", "Appendix"),
        budget=cfg.budget,
        r_variant=o.get("r_variant", "appendix"),
        design_tol=float(o.get("design_tol", 1e-4)),
        max_rounds=int(o.get("max_rounds", 60)),
    )
    kappa0 = float(o.get("kappa0", inst.kappa0))
    env = RewardEnv(inst.theta_star, seed)
    if algo == "rage-glm-2":
        s_star = float(o.get("s_star", np.linalg.norm(inst.theta_star)))
        res = rage_glm_2(inst, cfg.delta, cfg.epsilon, kappa0, s_star, env, opts)
    else:
        fn = {"rage-glm": rage_glm, "rage-glm-r": rage_glm_r, "passive": passive_baseline}[algo]
        res = fn(inst, cfg.delta, cfg.epsilon, kappa0, env, opts)
    row = res.csv_row()
    row.update(burn_in_samples=res.burn_in_samples, terminated=res.terminated.value)
    row["algorithm"] = algo
    return row, res.to_dict()


def _coverage(cfg, algo, seed):
    s = cfg.instance
    inst = gen_coverage_instance(int(s["d"]), int(s["t"]), float(s.get("theta_norm", 1.0)),
                                 s.get("n_arms"), int(s.get("instance_seed", 0)), cfg.epsilon)
    reps = int(cfg.options.get("reps", 2000))
    res = coverage_monte_carlo(inst, cfg.delta, reps, seed)
    row = dict(res.csv_row(), algorithm=algo)
    payload = dict(row, burnin_satisfied=res.burnin_satisfied, counts=inst.counts,
                   theta_star=inst.theta_star, direction=inst.direction)
    return row, payload


def _contextual(cfg, algo, seed):
    model = _context_model(cfg.instance)
    T = int(cfg.instance["T"])
    if algo == "uniform":
        trace = uniform_policy(model, T, seed)
    else:
        o = cfg.options
        trace = sup_logistic(model, T, cfg.delta, seed,
                             SupLogisticOptions(alpha=o.get("alpha"), tau=o.get("tau")))
    cum = trace.cumulative
    checkpoints = {n: float(cum[n - 1]) for n in (2**k for k in range(int(math.log2(T)) + 1))}
    checkpoints[T] = float(cum[-1])
    row = {"algorithm": algo, "seed": seed, "T": T, "final_regret": trace.final_regret,
           "average_regret": trace.final_regret / T}
    payload = dict(trace.summary(), algorithm=algo, seed=seed, cumulative_regret=checkpoints)
    return row, payload


def _lower_bound(cfg, algo, seed):
    s = cfg.instance
    if algo == "transportation":
        inst = build_transductive(s)
        res = transportation_lower_bound(inst, cfg.delta)
        row = {"algorithm": algo, "seed": seed, "value": res.value, "converged": res.all_converged}
        return row, dict(res.to_dict(inst), algorithm=algo, seed=seed)
    hard = build_hard_instance(int(s["d"]), float(s.get("epsilon", cfg.epsilon)),
                               n_cap=int(s.get("n_cap", 512)), packing_seed=seed)
    floor = moderate_confidence_floor(hard)
    diag, off = inner_product_brackets(hard)
    payload = dict(floor, algorithm=algo, seed=seed, s_norm=hard.s_norm, delta2=hard.delta2,
                   diagonal=[float(diag.min()), float(diag.max())],
                   off_diagonal=[float(off.min()), float(off.max())] if off.size else None)
    row = {"algorithm": algo, "seed": seed, "value": floor["floor"],
           "converged": floor["kappa0_bound_holds"]}
    return row, payload


def _gaussian_burnin(cfg, algo, seed):
    s = cfg.instance
    out = gen_gaussian_burnin(int(s["d"]), float(s["s_norm"]), int(s["t"]), seed, delta=cfg.delta)
    series = out["xi_sq_series"]
    row = {"algorithm": algo, "seed": seed, "satisfied_at": out["satisfied_at"],
           "xi_sq_final": series[max(series)]}
    return row, dict(row, xi_sq_series=series, theta_star=out["theta_star"])


_WORKERS = {
    ExperimentKind.PURE_EXPLORE: _pure_explore,
    ExperimentKind.COVERAGE: _coverage,
    ExperimentKind.CONTEXTUAL: _contextual,
    ExperimentKind.LOWER_BOUND: _lower_bound,
    ExperimentKind.GAUSSIAN_BURNIN: _gaussian_burnin,
}


def _run_task(raw_cfg, algo, seed):
    cfg = ExperimentConfig.from_dict(raw_cfg)
    try:
        row, payload = _WORKERS[cfg.kind](cfg, algo, seed)
        row["error"] = ""
    except (LogBanditsError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        row = {"algorithm": algo, "seed": seed, "error": f"{type(exc).__name__}: {exc}"}
        payload = dict(row)
    return row, _jsonable(payload)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def _validate(cfg):
    """Fail fast on instance specs that cannot be built."""
    s = cfg.instance
    try:
        if cfg.kind == ExperimentKind.PURE_EXPLORE:
            build_transductive(s)
        elif cfg.kind == ExperimentKind.CONTEXTUAL:
            _context_model(s)
            if int(s["T"]) < 1:
                raise InvalidConfig("T must be positive")
        elif cfg.kind == ExperimentKind.LOWER_BOUND:
            if "transportation" in cfg.algorithms:
                build_transductive(s)
            if "moderate-floor" in cfg.algorithms:
                int(s["d"])
        elif cfg.kind == ExperimentKind.COVERAGE:
            int(s["d"]), int(s["t"])
        elif cfg.kind == ExperimentKind.GAUSSIAN_BURNIN:
            d, s_norm = int(s["d"]), float(s["s_norm"])
            int(s["t"])
            if d < s_norm**2:
                raise InvalidConfig("need d >= s_norm^2")
    except KeyError as exc:
        raise InvalidConfig(f"instance spec is missing {exc}") from None
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(str(exc)) from None


def run_experiment(cfg, jobs=1):
    """Run every (algorithm, seed) pair and write the summary CSV, per-run
    JSON files and the manifest under ``cfg.out``.

    Rows are ordered by (algorithm order in the config, seed) whatever the
    completion order. Returns the exit status: 0 when every run succeeded,
    3 when at least one run failed (its row carries the error).
    """
    _validate(cfg)
    prefix = cfg.out
    runs_dir = prefix + ".runs"
    try:
        os.makedirs(os.path.dirname(os.path.abspath(prefix)), exist_ok=True)
        os.makedirs(runs_dir, exist_ok=True)
    except OSError as exc:
        raise InvalidConfig(f"output prefix not writable: {exc}") from None
    if not os.access(runs_dir, os.W_OK):
        raise InvalidConfig("output prefix not writable")

    raw = cfg.to_dict()
    tasks = [(algo, seed) for algo in cfg.algorithms for seed in cfg.seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_task, raw, a, s) for a, s in tasks]
            results = [f.result() for f in futures]
    else:
        results = [_run_task(raw, a, s) for a, s in tasks]

    columns = SUMMARY_COLUMNS[cfg.kind] + ("error",)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    files = []
    for (algo, seed), (row, payload) in zip(tasks, results):
        writer.writerow({c: _fmt(row.get(c)) for c in columns})
        name = f"{algo}-{seed}.json"
        with open(os.path.join(runs_dir, name), "w") as fh:
            fh.write(json.dumps(payload, sort_keys=True, indent=1) + "\n")
        files.append(name)
    with open(prefix + ".summary.csv", "w", newline="") as fh:
        fh.write(buf.getvalue())
    manifest = {
        "kind": cfg.kind.value,
        "config_hash": cfg.config_hash(),
        "config": {k: v for k, v in raw.items() if k != "out"},
        "version": __version__,
        "seeds": list(cfg.seeds),
        "algorithms": list(cfg.algorithms),
        "runs": files,
        "failed": sum(1 for row, _ in results if row["error"]),
    }
    with open(prefix + ".manifest.json", "w") as fh:
        fh.write(json.dumps(_jsonable(manifest), sort_keys=True, indent=1) + "\n")
    return EXIT_RUNTIME if manifest["failed"] else EXIT_OK
