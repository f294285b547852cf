"""Command-line entry point: parse config, dispatch experiments, emit data files.

Exit codes: 0 success with all audited bounds holding, 2 when an audited
bound is violated beyond slack, 1 on usage or I/O errors.  Every output file
is written atomically (temp file plus rename).  Diagnostics go to stderr,
gated by the OBD_LOG environment variable (off | info | debug).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, fields
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .algorithms import (
    DualConfig, DualOBD, Greedy, OGD, OMD, PrimalConfig, PrimalOBD,
    SetProjectionResponder, StaticPlay, choose_beta, choose_eta,
)
from .costs import InstanceSpec, generate_instance
from .geometry import euclidean_map
from .harness import (
    ResultTable, atomic_write_text, experiment_cr_vs_dim, experiment_lower_bound,
    experiment_regret_sweep, mirror_grad_bound, run, run_theorem1_case,
    theorem1_suite,
)

log = logging.getLogger("obd")

EXPERIMENTS = ("cr_vs_dim", "regret_sweep", "lower_bound", "audit_suite", "single_run")
ALGORITHMS = ("primal_obd", "dual_obd", "ogd", "omd", "greedy", "static_play",
              "projection")


@dataclass
class Config:
    """Validated experiment configuration; unknown JSON keys are rejected."""

    experiment: str = "cr_vs_dim"
    family: str = "quadratic"
    dims: tuple = (2, 4, 8, 16)
    d: int = 2
    T: int = 50
    trials: int = 10
    seed: int = 0
    cond: float = 10.0
    diameter: float = 10.0
    tracking_norm: str = "l2"
    tracking_scale: float = 1.0
    switching_norm: str = "l2"
    feasible_kind: str = "whole"
    feasible_radius: float = 0.0
    algo: str = "primal_obd"
    beta: Optional[float] = None
    alpha: Optional[float] = None
    eta: Optional[float] = None
    level_tol: Optional[float] = None
    out: str = "obd_results"
    format: str = "csv"
    jobs: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"field 'experiment' must be one of {EXPERIMENTS}, "
                             f"got {self.experiment!r}")
        if self.algo not in ALGORITHMS:
            raise ValueError(f"field 'algo' must be one of {ALGORITHMS}, "
                             f"got {self.algo!r}")
        if self.format not in ("csv", "json"):
            raise ValueError(f"field 'format' must be csv or json, got {self.format!r}")
        if self.trials < 1:
            raise ValueError("field 'trials' must be >= 1")
        if self.jobs < 1:
            raise ValueError("field 'jobs' must be >= 1")
        self.dims = tuple(int(v) for v in self.dims)
        if any(v < 1 for v in self.dims):
            raise ValueError("field 'dims' must contain positive integers")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["dims"] = list(self.dims)
        return out

    @staticmethod
    def from_dict(data: dict) -> "Config":
        known = {f.name for f in fields(Config)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if "dims" in data:
            data["dims"] = tuple(data["dims"])
        return Config(**data)


def _setup_logging() -> None:
    level = os.environ.get("OBD_LOG", "off").lower()
    if level in ("info", "debug"):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("obd %(levelname)s: %(message)s"))
        log.addHandler(handler)
        log.setLevel(logging.INFO if level == "info" else logging.DEBUG)
    else:
        log.addHandler(logging.NullHandler())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="obd",
        description="Balanced-descent benchmarks for online optimization "
                    "with switching costs.")
    p.add_argument("--version", action="version", version=f"obd {__version__}")
    p.add_argument("--config", help="JSON config file (flags override its fields)")
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--family", choices=("quadratic", "norm_tracking", "composite",
                                        "hyperplane_chase"))
    p.add_argument("--dims", help="comma-separated dimensions, e.g. 2,4,8,16")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--T", type=int, dest="T")
    p.add_argument("--d", type=int)
    p.add_argument("--algo", choices=ALGORITHMS)
    p.add_argument("--beta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--cond", type=float)
    p.add_argument("--diameter", type=float)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--jobs", type=int)
    return p


def _merge_config(args: argparse.Namespace) -> Config:
    data: dict = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError("field 'config' must hold a JSON object")
    cfg = Config.from_dict(data)
    for name in ("experiment", "family", "trials", "seed", "T", "d", "algo",
                 "beta", "alpha", "eta", "cond", "diameter", "out", "format",
                 "jobs"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if args.dims is not None:
        cfg.dims = tuple(int(v) for v in args.dims.split(","))
    cfg.__post_init__()
    return cfg


def _write_table(cfg: Config, table: ResultTable) -> None:
    path = os.path.join(cfg.out, "results.csv")
    if cfg.format == "csv":
        table.write_csv(path)
    else:
        payload = json.dumps(table.sorted().rows, indent=1, sort_keys=True)
        atomic_write_text(os.path.join(cfg.out, "results.json"), payload)
        table.write_csv(path)
    log.info("wrote %s", path)


def _write_dat(cfg: Config, name: str, header: str, rows) -> None:
    lines = [f"# {header}"]
    for row in rows:
        lines.append(" ".join(repr(float(v)) for v in row))
    atomic_write_text(os.path.join(cfg.out, f"plot_{name}.dat"), "\n".join(lines) + "\n")


def _write_trajectory(cfg: Config, report) -> None:
    _write_report_dict(cfg, report.to_dict())


def _write_report_dict(cfg: Config, payload_dict: dict) -> None:
    import hashlib
    payload = json.dumps(payload_dict, indent=1, sort_keys=True)
    digest = hashlib.sha256(payload.encode()).hexdigest()[:12]
    atomic_write_text(os.path.join(cfg.out, f"run_{digest}.json"), payload)


def _cr_vs_dim(cfg: Config) -> int:
    beta = cfg.beta if cfg.beta is not None else 0.5
    table, reports = experiment_cr_vs_dim(
        cfg.family, cfg.dims, cfg.trials, cfg.seed, beta=beta, T=cfg.T,
        cond=cfg.cond, diameter=cfg.diameter,
        tracking_scale=cfg.tracking_scale, jobs=cfg.jobs, return_reports=True)
    for rep in reports:
        _write_report_dict(cfg, rep)
    _write_table(cfg, table)
    stats = []
    for d in sorted(set(int(r["d"]) for r in table.rows)):
        crs = [float(r["cr"]) for r in table.rows if int(r["d"]) == d and r["cr"] != ""]
        stats.append((d, float(np.mean(crs)), min(crs), max(crs)))
    _write_dat(cfg, "cr_vs_dim", "d mean_cr min_cr max_cr", stats)
    worst = max((float(r["audit_worst_residual"]) for r in table.rows
                 if r["audit_worst_residual"] != ""), default=-math.inf)
    return 2 if worst > 1e-3 else 0


def _lower_bound(cfg: Config) -> int:
    table, dat = experiment_lower_bound(cfg.dims)
    _write_table(cfg, table)
    _write_dat(cfg, "lower_bound", "d online_cost offline_cost ratio", dat)
    worst = max(abs(float(r["audit_worst_residual"])) for r in table.rows)
    return 2 if worst > 1e-9 else 0


def _regret_sweep(cfg: Config) -> int:
    table, reports = experiment_regret_sweep(cfg.dims, cfg.trials, cfg.seed,
                                             T=cfg.T, diameter=cfg.diameter,
                                             jobs=cfg.jobs, return_reports=True)
    for rep in reports:
        _write_report_dict(cfg, rep)
    _write_table(cfg, table)
    stats = []
    for d in sorted(set(int(r["d"]) for r in table.rows)):
        rs = [float(r["regret_L"]) for r in table.rows if int(r["d"]) == d]
        bs = [float(r["bound"]) for r in table.rows if int(r["d"]) == d]
        stats.append((d, float(np.mean(rs)), min(rs), max(bs)))
    _write_dat(cfg, "regret_sweep", "d mean_regret min_regret max_bound", stats)
    violated = any(
        float(r["regret_L"]) > float(r["bound"])
        + 1e-4 * max(1.0, float(r["bound"])) for r in table.rows)
    return 2 if violated else 0


def _audit_suite(cfg: Config) -> int:
    specs = theorem1_suite(cfg.seed, count=min(50, 12 * cfg.trials),
                           dims=tuple(d for d in cfg.dims if d <= 10) or (2, 5),
                           T=min(cfg.T, 50))
    table = ResultTable()
    dat = []
    failures = 0
    for i, spec in enumerate(specs):
        report, audits = run_theorem1_case(spec)
        worst = max(a.worst_residual for a in audits)
        ok = all(a.passed for a in audits)
        failures += 0 if ok else 1
        bound = 3.0 + 8.0 / report.instance.alpha
        table.append(family=spec.family, d=spec.d, trial=i, seed=spec.seed,
                     algo="primal_obd", total_cost=report.total_cost,
                     opt_cost=report.comparators["opt"].objective,
                     cr=report.cr, bound=bound, audit_worst_residual=worst)
        dat.append((i, report.cr, bound, worst))
        log.info("audit case %d: cr=%.4f bound=%.4f worst_residual=%.3g",
                 i, report.cr, bound, worst)
    _write_table(cfg, table)
    _write_dat(cfg, "audit_suite", "case cr bound worst_residual", dat)
    return 2 if failures else 0


def _build_algorithm(cfg: Config, instance):
    emap = euclidean_map()
    if cfg.algo == "primal_obd":
        if cfg.beta is not None:
            beta = cfg.beta
        elif cfg.alpha is not None:
            beta = choose_beta(cfg.alpha).beta
        else:
            beta = 0.5
        kw = {"level_tol": cfg.level_tol} if cfg.level_tol else {}
        return PrimalOBD(PrimalConfig(beta=beta, mirror_map=emap, **kw))
    if cfg.algo == "dual_obd":
        if cfg.eta is not None:
            eta = cfg.eta
        else:
            G = mirror_grad_bound(emap, instance.feasible)
            D = instance.feasible.diameter(instance.switching_norm)
            if not (math.isfinite(G) and math.isfinite(D)):
                raise ValueError(
                    "field 'eta' required: the feasible set is unbounded, so the "
                    "regret-optimal eta cannot be derived")
            eta = choose_eta(G, D, 1.0, instance.T).eta
        kw = {"level_tol": cfg.level_tol} if cfg.level_tol else {}
        return DualOBD(DualConfig(eta=eta, mirror_map=emap, **kw))
    return {"ogd": OGD, "omd": lambda: OMD(emap), "greedy": Greedy,
            "static_play": StaticPlay,
            "projection": lambda: SetProjectionResponder(emap)}[cfg.algo]()


def _single_run(cfg: Config) -> int:
    spec = InstanceSpec(d=cfg.d, T=cfg.T, family=cfg.family, seed=cfg.seed,
                        cond=cfg.cond, diameter=cfg.diameter,
                        tracking_norm=cfg.tracking_norm,
                        tracking_scale=cfg.tracking_scale,
                        switching_norm=cfg.switching_norm,
                        feasible_kind=cfg.feasible_kind,
                        feasible_radius=cfg.feasible_radius)
    instance = generate_instance(spec)
    algorithm = _build_algorithm(cfg, instance)
    comparators = () if instance.adaptive else ("opt", "static")
    report = run(algorithm, instance, comparators=comparators)
    _write_trajectory(cfg, report)
    table = ResultTable()
    table.append(family=spec.family, d=spec.d, trial=0, seed=spec.seed,
                 algo=report.algo, total_cost=report.total_cost,
                 opt_cost=report.comparators.get("opt").objective
                 if report.comparators.get("opt") else "",
                 cr=report.cr if report.cr is not None else "")
    _write_table(cfg, table)
    _write_dat(cfg, "single_run", "t hit move",
               [(s.t, s.hit, s.move) for s in report.steps])
    return 0


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the selected experiment, return the exit code."""
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help / --version / usage errors
        return int(exc.code or 0)
    try:
        cfg = _merge_config(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"obd: config error: {exc}", file=sys.stderr)
        return 1
    try:
        dispatch = {"cr_vs_dim": _cr_vs_dim, "lower_bound": _lower_bound,
                    "regret_sweep": _regret_sweep, "audit_suite": _audit_suite,
                    "single_run": _single_run}
        return dispatch[cfg.experiment](cfg)
    except (ValueError, OSError) as exc:
        print(f"obd: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())
