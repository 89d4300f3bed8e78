"""Experiment front-end: seeded runs, sweeps, CSV/JSON artifacts.

Config files are YAML (key/value with nested sections); every key is
validated and unknown keys are rejected rather than silently defaulted.
Exit codes: 0 success, 1 config error, 2 runtime contract violation,
3 verification failure.
"""

import argparse
import concurrent.futures
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import baselines, diagnostics, engine, learners, problems

OPTIMIZERS = ("odog-const", "odog-adaptive", "gd", "sgd", "o2nc-ogd")

SUMMARY_COLUMNS = [
    "problem", "optimizer", "M", "sigma", "seed", "D", "T", "K",
    "eta_or_gamma", "avg_grad_norm_wbar", "grad_norm_output",
    "total_regret", "wall_time_s",
]

EPISODE_COLUMNS = [
    "k", "regret", "u_norm", "grad_norm_wbar", "f_end",
    "eta_first", "eta_last", "eta_min", "eta_max",
]


class ConfigError(ValueError):
    """Invalid experiment configuration."""


_OPTIMIZER_KEYS = {"kind", "auto", "D", "T", "eta", "gamma", "alpha", "L1_hat"}
_TOP_KEYS = {"problem", "optimizer", "budget", "sigma", "noise_mode",
             "seeds", "out", "verify", "trace", "workers"}
_PROBLEM_KEYS = {"name", "params"}


@dataclass
class ExperimentConfig:
    problem_name: str = "cosine_quadratic"
    problem_params: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=lambda: {"kind": "odog-const", "auto": True})
    budget: int = 1024
    sigma: float = 0.0
    noise_mode: str = "shared-seed"
    seeds: list = field(default_factory=lambda: [1])
    out: str = None
    verify: bool = False
    trace: object = "auto"
    workers: int = 1

    def validate(self):
        if self.problem_name not in problems.REGISTRY:
            raise ConfigError(f"unknown problem {self.problem_name!r}")
        kind = self.optimizer.get("kind")
        if kind not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {kind!r}; choose from {OPTIMIZERS}")
        extra = set(self.optimizer) - _OPTIMIZER_KEYS
        if extra:
            raise ConfigError(f"unknown optimizer keys: {sorted(extra)}")
        if self.budget < 1:
            raise ConfigError("budget must be a positive integer")
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")
        if self.noise_mode not in ("shared-seed", "fresh"):
            raise ConfigError(f"unknown noise mode {self.noise_mode!r}")
        if not self.seeds:
            raise ConfigError("seed list must be nonempty")
        if self.trace not in ("auto", "full") and not (
                isinstance(self.trace, int) and self.trace > 0):
            raise ConfigError("trace must be 'auto', 'full' or a positive integer")
        if self.workers < 1:
            raise ConfigError("workers must be a positive integer")
        return self

    @property
    def trace_limit(self):
        if self.trace == "auto":
            return engine.FULL_TRACE_LIMIT
        if self.trace == "full":
            return 2 ** 62
        return int(self.trace)


def config_from_dict(raw):
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    extra = set(raw) - _TOP_KEYS
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    cfg = ExperimentConfig()
    prob = raw.get("problem", {})
    if isinstance(prob, str):
        cfg.problem_name = prob
    elif isinstance(prob, dict):
        bad = set(prob) - _PROBLEM_KEYS
        if bad:
            raise ConfigError(f"unknown problem keys: {sorted(bad)}")
        cfg.problem_name = prob.get("name", cfg.problem_name)
        params = prob.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("problem.params must be a mapping")
        cfg.problem_params = dict(params)
    else:
        raise ConfigError("problem must be a name or a mapping")
    if "optimizer" in raw:
        opt = raw["optimizer"]
        if isinstance(opt, str):
            cfg.optimizer = {"kind": opt, "auto": True}
        elif isinstance(opt, dict):
            cfg.optimizer = {"auto": True, **opt}
        else:
            raise ConfigError("optimizer must be a name or a mapping")
    for key in ("budget", "sigma", "noise_mode", "out", "verify", "trace", "workers"):
        if key in raw:
            setattr(cfg, key, raw[key])
    if "seeds" in raw:
        seeds = raw["seeds"]
        if isinstance(seeds, int):
            seeds = [seeds]
        if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
            raise ConfigError("seeds must be an integer or a list of integers")
        cfg.seeds = list(seeds)
    cfg.budget = int(cfg.budget)
    cfg.sigma = float(cfg.sigma)
    return cfg.validate()


def load_config(path):
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config file {path}: {exc}")
    return config_from_dict(raw or {})


# ---------------------------------------------------------------------------
# parameter resolution and single runs


def _resolved_params(cfg, problem):
    """Engine/step parameters for the configured optimizer on this problem."""
    opt = cfg.optimizer
    kind = opt["kind"]
    auto = bool(opt.get("auto", True))
    sigma, M = cfg.sigma, cfg.budget
    out = {"kind": kind}
    if kind in ("gd", "sgd"):
        if "eta" in opt:
            out["eta"] = float(opt["eta"])
        elif kind == "gd":
            out["eta"] = baselines.default_gd_eta(problem)
        else:
            out["eta"] = baselines.default_sgd_eta(problem, sigma, M)
        return out

    f_gap = problem.f(problem.x0) - problem.f_star
    if auto:
        if kind == "odog-adaptive":
            l1_hat = float(opt.get("L1_hat", problem.L1))
            hp = learners.theorem2_hyperparams(
                l1_hat, problem.L2, sigma, f_gap, M,
                gamma=float(opt.get("gamma", learners.DEFAULT_GAMMA)),
                alpha=opt.get("alpha"))
            out.update(D=hp.D, T=hp.T, gamma=hp.gamma, alpha=hp.alpha)
        else:
            hp = learners.theorem1_hyperparams(problem.L1, problem.L2, sigma, f_gap, M)
            out.update(D=hp.D, T=hp.T, eta=hp.eta)
    else:
        if "D" not in opt or "T" not in opt:
            raise ConfigError(f"{kind} without auto needs explicit D and T")
        out.update(D=float(opt["D"]), T=int(opt["T"]))
        if kind == "odog-adaptive":
            out["gamma"] = float(opt.get("gamma", learners.DEFAULT_GAMMA))
            out["alpha"] = float(opt.get("alpha",
                                         learners.default_alpha(problem.L1, out["D"])))
        elif "eta" in opt:
            out["eta"] = float(opt["eta"])
        elif kind == "odog-const":
            raise ConfigError("odog-const without auto needs an explicit eta")
    if kind == "o2nc-ogd" and "eta" not in out:
        out["eta"] = None  # depends on the per-seed noise model; filled later
    return out


def _make_learner(params, problem, noise):
    kind = params["kind"]
    if kind == "odog-const":
        return learners.OdogLearner(learners.ConstantStep(params["eta"]))
    if kind == "odog-adaptive":
        return learners.OdogLearner(
            learners.AdaptiveStep(gamma=params["gamma"], alpha=params["alpha"]))
    eta = params.get("eta")
    if eta is None:
        eta = baselines.default_ogd_eta(problem, noise, params["D"], params["T"])
    return baselines.OgdLearner(eta)


def run_single(cfg, seed, problem=None, params=None):
    """One seeded run of the configured experiment."""
    problem = problem or problems.make_problem(cfg.problem_name, **cfg.problem_params)
    params = params or _resolved_params(cfg, problem)
    noise = problems.NoiseModel(sigma=cfg.sigma, mode=cfg.noise_mode, rng_seed=seed)
    if params["kind"] in ("gd", "sgd"):
        return baselines.run_descent(problem, noise, params["eta"], cfg.budget,
                                     kind=params["kind"],
                                     trace_limit=cfg.trace_limit)
    mode = "deterministic" if cfg.sigma == 0.0 else "stochastic"
    eng_cfg = engine.EngineConfig(M=cfg.budget, T=params["T"], D=params["D"], mode=mode)
    learner = _make_learner(params, problem, noise)
    return engine.run(problem, noise, eng_cfg, learner, trace_limit=cfg.trace_limit)


# ---------------------------------------------------------------------------
# persistence


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def summary_row(result):
    """Fixed-order summary values for one run (engine or descent)."""
    cfg = result.config
    if isinstance(result, engine.RunResult):
        lrn = result.learner
        eta_or_gamma = lrn.get("eta", lrn.get("gamma"))
        row = [result.problem["name"], lrn["kind"], cfg["M"], result.noise["sigma"],
               result.seed, cfg["D"], cfg["T"], cfg["K"], eta_or_gamma,
               result.avg_grad_norm_wbar, result.grad_norm_output,
               result.total_regret, result.wall_time_s]
    else:
        row = [result.problem["name"], cfg["kind"], cfg["M"], result.noise["sigma"],
               result.seed, None, None, None, cfg["eta"], None,
               result.grad_norm_output, None, result.wall_time_s]
    return [_fmt(v) for v in row]


def _run_dir_name(result):
    cfg = result.config
    opt = result.learner["kind"] if isinstance(result, engine.RunResult) else cfg["kind"]
    return (f"{result.problem['name']}-{opt}-M{cfg['M']}"
            f"-sigma{result.noise['sigma']}-seed{result.seed}")


def persist_run(result, out_dir):
    rdir = os.path.join(out_dir, _run_dir_name(result))
    os.makedirs(rdir, exist_ok=True)
    with open(os.path.join(rdir, "result.json"), "w") as fh:
        json.dump(result.to_dict(), fh)
    if isinstance(result, engine.RunResult):
        with open(os.path.join(rdir, "episodes.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(EPISODE_COLUMNS)
            for e in result.episodes:
                writer.writerow([_fmt(v) for v in (
                    e.k, e.regret, float(np.linalg.norm(e.comparator)),
                    e.grad_norm_at_wbar, e.f_end, e.eta_first, e.eta_last,
                    e.eta_min, e.eta_max)])
    return rdir


def persist_reports(reports, rdir):
    with open(os.path.join(rdir, "reports.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "lhs", "rhs", "satisfied", "slack", "context"])
        for r in reports:
            writer.writerow([r.name, _fmt(r.lhs), _fmt(r.rhs), r.satisfied,
                             _fmt(r.slack), json.dumps(r.context, sort_keys=True)])


def write_summary(rows, out_dir):
    path = os.path.join(out_dir, "summary.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        writer.writerows(rows)
    return path


# ---------------------------------------------------------------------------
# experiment drivers


def run_experiment(cfg):
    """All seeds of one configuration; returns (results, reports, any_violation)."""
    problem = problems.make_problem(cfg.problem_name, **cfg.problem_params)
    params = _resolved_params(cfg, problem)

    def job(seed):
        return run_single(cfg, seed, problem=problem, params=params)

    if cfg.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(job, cfg.seeds))
    else:
        results = [job(s) for s in cfg.seeds]

    all_reports = {}
    failed = False
    if cfg.verify:
        for seed, res in zip(cfg.seeds, results):
            if isinstance(res, engine.RunResult):
                reps = diagnostics.run_all_checks(res, problem)
                all_reports[seed] = reps
                failed = failed or any(not r.satisfied for r in reps)

    if cfg.out:
        os.makedirs(cfg.out, exist_ok=True)
        rows = []
        for seed, res in zip(cfg.seeds, results):
            rdir = persist_run(res, cfg.out)
            if seed in all_reports:
                persist_reports(all_reports[seed], rdir)
            rows.append(summary_row(res))
        write_summary(rows, cfg.out)
    return results, all_reports, failed


def _metric_for_rates(result):
    if isinstance(result, engine.RunResult):
        if result.noise["sigma"] == 0.0:
            return result.avg_grad_norm_wbar
        return result.grad_norm_output
    return result.grad_norm_output


def sweep(base_cfg, axis, values):
    """Cartesian sweep over one axis; aggregates seed means and SEs.

    For an M-axis sweep the aggregate gains a final row holding the
    log-log slope of the mean rate metric against M.
    """
    if axis not in ("sigma", "M", "optimizer"):
        raise ConfigError(f"unknown sweep axis {axis!r}")
    if not values:
        raise ConfigError("sweep values must be nonempty")
    agg_rows = []
    slope_points = []
    all_rows = []
    any_failed = False
    for value in values:
        cfg = ExperimentConfig(**{**base_cfg.__dict__})
        cfg.problem_params = dict(base_cfg.problem_params)
        cfg.optimizer = dict(base_cfg.optimizer)
        if axis == "sigma":
            cfg.sigma = float(value)
        elif axis == "M":
            cfg.budget = int(value)
        else:
            cfg.optimizer["kind"] = str(value)
        cfg.validate()
        sub_out = cfg.out
        if sub_out:
            cfg.out = os.path.join(sub_out, f"{axis}={value}")
        results, _, failed = run_experiment(cfg)
        any_failed = any_failed or failed
        all_rows.extend(summary_row(r) for r in results)

        metrics = {
            "avg_grad_norm_wbar": [r.avg_grad_norm_wbar for r in results
                                   if isinstance(r, engine.RunResult)],
            "grad_norm_output": [r.grad_norm_output for r in results],
            "total_regret": [r.total_regret for r in results
                             if isinstance(r, engine.RunResult)],
        }
        row = {"axis": axis, "value": value, "n_seeds": len(results)}
        for name, vals in metrics.items():
            if vals:
                arr = np.asarray(vals)
                row[f"mean_{name}"] = float(arr.mean())
                row[f"se_{name}"] = (float(arr.std(ddof=1) / math.sqrt(len(arr)))
                                     if len(arr) > 1 else 0.0)
            else:
                row[f"mean_{name}"] = None
                row[f"se_{name}"] = None
        agg_rows.append(row)
        if axis == "M":
            rate = (row["mean_avg_grad_norm_wbar"]
                    if row["mean_avg_grad_norm_wbar"] is not None
                    else row["mean_grad_norm_output"])
            slope_points.append((float(value), rate))

    slope = None
    if axis == "M" and len(slope_points) >= 3 and all(v > 0 for _, v in slope_points):
        slope = diagnostics.loglog_slope(slope_points)
        agg_rows.append({"axis": axis, "value": "loglog_slope", "n_seeds": "",
                         "mean_avg_grad_norm_wbar": slope})

    if base_cfg.out:
        os.makedirs(base_cfg.out, exist_ok=True)
        cols = ["axis", "value", "n_seeds",
                "mean_avg_grad_norm_wbar", "se_avg_grad_norm_wbar",
                "mean_grad_norm_output", "se_grad_norm_output",
                "mean_total_regret", "se_total_regret"]
        with open(os.path.join(base_cfg.out, "aggregate.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for row in agg_rows:
                writer.writerow([_fmt(row.get(c)) for c in cols])
        write_summary(all_rows, base_cfg.out)
    return agg_rows, slope, any_failed


# ---------------------------------------------------------------------------
# argument parsing


def _apply_flags(cfg, args):
    if args.problem:
        cfg.problem_name = args.problem
    if args.optimizer:
        cfg.optimizer["kind"] = args.optimizer
    if args.auto_params:
        cfg.optimizer["auto"] = True
    if args.sigma is not None:
        cfg.sigma = args.sigma
    if args.budget is not None:
        cfg.budget = args.budget
    if args.seeds:
        try:
            cfg.seeds = [int(s) for s in args.seeds.split(",") if s]
        except ValueError:
            raise ConfigError(f"bad seed list: {args.seeds!r}")
    if args.out:
        cfg.out = args.out
    if args.verify:
        cfg.verify = True
    if args.workers is not None:
        cfg.workers = args.workers
    return cfg.validate()


def _common_flags(p):
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--problem", help="registered problem name")
    p.add_argument("--optimizer", choices=OPTIMIZERS)
    p.add_argument("--sigma", type=float)
    p.add_argument("--budget", type=int, help="iteration budget M")
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--auto-params", action="store_true",
                   help="derive D, T and the step size from the problem constants")
    p.add_argument("--verify", action="store_true",
                   help="run all applicable bound checks after each run")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="odog",
        description="Doubly optimistic online-to-nonconvex optimization harness")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run one experiment configuration")
    _common_flags(run_p)
    sweep_p = sub.add_parser("sweep", help="sweep one axis of a configuration")
    _common_flags(sweep_p)
    sweep_p.add_argument("--axis", required=True, choices=("sigma", "M", "optimizer"))
    sweep_p.add_argument("--values", required=True,
                         help="comma-separated axis values")
    return parser


def _print_reports(reports_by_seed):
    for seed, reps in sorted(reports_by_seed.items()):
        print(f"bound reports (seed {seed}):")
        for r in reps:
            status = "ok " if r.satisfied else "FAIL"
            print(f"  [{status}] {r.name:28s} lhs={r.lhs: .6e} rhs={r.rhs: .6e}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = _apply_flags(cfg, args)
        if args.command == "sweep":
            raw_values = [v for v in args.values.split(",") if v]
            if args.axis == "M":
                values = [int(v) for v in raw_values]
            elif args.axis == "sigma":
                values = [float(v) for v in raw_values]
            else:
                values = raw_values
            if not values:
                raise ConfigError("sweep values must be nonempty")
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "run":
            results, reports, failed = run_experiment(cfg)
            for res in results:
                print(",".join(summary_row(res)))
            if reports:
                _print_reports(reports)
        else:
            agg_rows, slope, failed = sweep(cfg, args.axis, values)
            for row in agg_rows:
                print(row)
            if slope is not None:
                print(f"loglog slope: {slope:.4f}")
    except engine.ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        if cfg.out:
            os.makedirs(cfg.out, exist_ok=True)
            with open(os.path.join(cfg.out, "error.json"), "w") as fh:
                json.dump({"error": "contract_violation", "message": str(exc)}, fh)
        return 2
    if failed:
        print("verification failed: at least one bound report is unsatisfied",
              file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
