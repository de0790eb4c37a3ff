"""Experiment grids: problem specs, seeded runs, RunRecords and summaries.

A config file has four top-level keys::

    problem:  {kind: vqe, hamiltonian: h2.txt}      # or tfim / vqls / oracle
    search:   {iterations: 1000, ...}               # SearchConfig fields
    grid:     {iterations: [1000, 10000]}           # optional axes over SearchConfig fields
    runs: 10
    workers: 1                                      # optional, default = available cores

Run ``k`` of every grid point uses seed ``search.seed + k`` so that grid
points are compared under matched seeds.
"""
from __future__ import annotations

import csv
import functools
import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .circuit import Circuit, depth, parse, serialize
from .config import SearchConfig, coerce
from .dataset import DEFAULT_EPSILON, read_dataset
from .errors import ConfigurationError, QasError
from .finetune import finetune
from .mcts import search
from .problems import (
    EvalCounter,
    OracleProblem,
    Problem,
    VqeProblem,
    VqlsProblem,
    load_hamiltonian,
    transverse_field_ising,
)

log = logging.getLogger(__name__)

PROBLEM_KINDS = ("vqe", "tfim", "vqls", "oracle")
_FIELDS = {f.name: f for f in SearchConfig.__dataclass_fields__.values()}


# ---------------------------------------------------------------------------
# problem specs


@dataclass(frozen=True)
class Target:
    """One problem instance of a grid: an identifier plus a picklable spec."""

    ident: str
    spec: tuple  # sorted (key, value) pairs, hashable so instances can be cached per process
    info: tuple = ()

    @property
    def spec_dict(self) -> dict:
        return dict(self.spec)

    @property
    def info_dict(self) -> dict:
        return dict(self.info)


def _resolve(base: Path, p) -> str:
    path = Path(p)
    return str(path if path.is_absolute() else (base / path))


def _epsilon_for(n: int, eps) -> float:
    if eps is None:
        if n not in DEFAULT_EPSILON:
            raise ConfigurationError(f"no default epsilon for {n} qubits; set problem.epsilon")
        return DEFAULT_EPSILON[n]
    if isinstance(eps, dict):
        key = n if n in eps else str(n)
        if key not in eps:
            raise ConfigurationError(f"problem.epsilon has no entry for {n} qubits")
        return float(eps[key])
    return float(eps)


def expand_targets(problem: dict, base: Path) -> list[Target]:
    """Turn the ``problem`` section into concrete instances (files are resolved and read here)."""
    if not isinstance(problem, dict) or "kind" not in problem:
        raise ConfigurationError("config needs a 'problem' mapping with a 'kind'")
    kind = problem["kind"]
    if kind not in PROBLEM_KINDS:
        raise ConfigurationError(f"unknown problem kind {kind!r}; expected one of {PROBLEM_KINDS}")

    if kind == "vqe":
        if "hamiltonian" not in problem:
            raise ConfigurationError("vqe problem needs 'hamiltonian: <file>'")
        path = _resolve(base, problem["hamiltonian"])
        text = Path(path).read_text()
        return [Target(f"vqe-{Path(path).stem}", (("kind", "vqe"), ("text", text)),
                       (("source", problem["hamiltonian"]),))]

    if kind == "tfim":
        n = int(problem.get("n", 4))
        coupling = float(problem.get("coupling", 1.0))
        fld = float(problem.get("field", 0.5))
        return [Target(f"tfim-n{n}", (("coupling", coupling), ("field", fld), ("kind", "tfim"),
                                      ("n", n)))]

    if kind == "vqls":
        alphas = tuple(float(a) for a in problem.get("alphas", (0.1, 1.0, 1.0, 0.2)))
        if len(alphas) != 4:
            raise ConfigurationError("vqls alphas must have four entries")
        return [Target(f"vqls-a{alphas[0]:g}", (("alphas", alphas), ("kind", "vqls")))]

    # oracle
    eps = problem.get("epsilon")
    if "target" in problem:
        path = _resolve(base, problem["target"])
        circuit = parse(Path(path).read_text())
        e = _epsilon_for(circuit.n, eps)
        return [Target(f"oracle-{Path(path).stem}",
                       (("epsilon", e), ("kind", "oracle"), ("text", serialize(circuit))),
                       (("n", circuit.n),))]
    if "dataset" not in problem:
        raise ConfigurationError("oracle problem needs 'dataset: <manifest.csv>' or 'target: <file>'")
    entries = read_dataset(_resolve(base, problem["dataset"]))
    cells = problem.get("cells")
    cells = None if cells is None else {(int(n), int(g)) for n, g in cells}
    labels = problem.get("labels")
    out = []
    for e in entries:
        if cells is not None and (e.n, e.g) not in cells:
            continue
        if labels is not None and e.label not in labels:
            continue
        out.append(Target(e.key, (("epsilon", _epsilon_for(e.n, eps)), ("kind", "oracle"),
                                  ("text", serialize(e.circuit))),
                          (("g", e.g), ("label", e.label), ("m2", e.m2), ("n", e.n))))
    if not out:
        raise ConfigurationError("oracle problem selects no dataset entries")
    return out


@functools.lru_cache(maxsize=64)
def _build(spec: tuple, normalize: bool) -> Problem:
    d = dict(spec)
    kind = d["kind"]
    if kind == "vqe":
        from .problems import parse_hamiltonian
        return VqeProblem(parse_hamiltonian(d["text"]), normalize_reward=normalize)
    if kind == "tfim":
        return VqeProblem(transverse_field_ising(d["n"], d["coupling"], d["field"]),
                          normalize_reward=normalize)
    if kind == "vqls":
        return VqlsProblem.paper_instance(d["alphas"])
    return OracleProblem.from_circuit(parse(d["text"]), d["epsilon"])


def build_problem(target: Target, cfg: SearchConfig) -> Problem:
    """Instance for ``target``; heavy precomputation is cached, the counter is fresh."""
    problem = _build(target.spec, cfg.normalize_rewards)
    problem.counter = EvalCounter()
    return problem


# ---------------------------------------------------------------------------
# experiment config


@dataclass
class Experiment:
    targets: list[Target]
    base: SearchConfig
    grid: dict[str, list] = field(default_factory=dict)
    runs: int = 10
    workers: int | None = None
    finetune: bool = True
    source: dict = field(default_factory=dict)

    def points(self) -> list[dict]:
        """Cartesian product of the grid axes (a single empty point when there are none)."""
        if not self.grid:
            return [{}]
        keys = sorted(self.grid)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.grid[k] for k in keys))]

    def tasks(self) -> list[dict]:
        out = []
        for target in self.targets:
            for point in self.points():
                cfg = self.base.replace(**point)
                for k in range(self.runs):
                    out.append(dict(target=target, point=point, run=k,
                                    cfg=cfg.replace(seed=self.base.seed + k),
                                    finetune=self.finetune))
        return out


def _norm_key(key: str) -> str:
    return key.replace("-", "_")


def load_experiment(path=None, overrides: dict | None = None, runs: int | None = None) -> Experiment:
    """Read a YAML config and apply command-line overrides (which also remove matching grid axes)."""
    data: dict = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: top level must be a mapping")
        base = path.parent
    unknown = set(data) - {"problem", "search", "grid", "runs", "workers", "finetune"}
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")

    settings = {_norm_key(k): v for k, v in (data.get("search") or {}).items()}
    grid = {_norm_key(k): list(v) if isinstance(v, (list, tuple)) else [v]
            for k, v in (data.get("grid") or {}).items()}
    for key in list(settings) + list(grid):
        if key not in _FIELDS:
            raise ConfigurationError(f"unknown search setting {key!r}")
    for key, value in (overrides or {}).items():
        key = _norm_key(key)
        if key not in _FIELDS:
            raise ConfigurationError(f"unknown search setting {key!r}")
        settings[key] = value
        grid.pop(key, None)
    for key, values in grid.items():
        if not values:
            raise ConfigurationError(f"grid axis {key!r} is empty")
        grid[key] = [coerce(_FIELDS[key], v) for v in values]
    base_cfg = SearchConfig.from_dict(settings)
    for point in Experiment([], base_cfg, grid).points():
        base_cfg.replace(**point)  # validate every grid point up front

    n_runs = int(runs if runs is not None else data.get("runs", 10))
    if n_runs < 1:
        raise ConfigurationError("runs must be >= 1")
    workers = data.get("workers")
    if workers is not None and int(workers) < 1:
        raise ConfigurationError("workers must be >= 1")
    targets = expand_targets(data.get("problem") or {"kind": "tfim"}, base)
    return Experiment(targets, base_cfg, grid, n_runs,
                      None if workers is None else int(workers),
                      bool(data.get("finetune", True)), data)


# ---------------------------------------------------------------------------
# single run


def point_tag(point: dict) -> str:
    if not point:
        return "base"
    return "_".join(f"{k}={'pw' if v is None else v}" for k, v in sorted(point.items()))


def run_once(target: Target, cfg: SearchConfig, point: dict | None = None, run: int = 0,
             do_finetune: bool = True) -> dict:
    """Search + fine-tune for one seed; returns a RunRecord (a JSON-ready dict)."""
    point = point or {}
    start = time.perf_counter()
    record = {
        "problem": target.ident,
        "problem_info": target.info_dict,
        "grid_point": {k: v for k, v in sorted(point.items())},
        "grid_tag": point_tag(point),
        "run": run,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
    }
    try:
        problem = build_problem(target, cfg)
        counter = EvalCounter()
        result = search(problem, cfg, counter=counter)
        steps = cfg.max_adam_steps if do_finetune else 0
        trace = finetune(result.best_circuit, problem, steps, noise=cfg.noise, counter=counter,
                         learning_rate=cfg.learning_rate, beta1=cfg.adam_beta1,
                         beta2=cfg.adam_beta2, eps=cfg.adam_eps, plateau_tol=cfg.plateau_tol,
                         plateau_patience=cfg.plateau_patience)
        final = trace.circuit
        breakdown = counter.snapshot()
        for phase in ("search", "path", "finetune", "monitor"):
            breakdown.setdefault(phase, 0)
        l = final.param_count
        record.update({
            "status": "ok",
            "optimal_cost": problem.optimal_cost,
            "best_path_costs": result.path_costs,
            "search_cost": result.best_cost,
            "final_cost": trace.best_cost,
            "finetune_costs": trace.costs,
            "finetune_steps": trace.steps_used,
            "commits": result.committed,
            "circuit": serialize(final),
            "metrics": {"cnots": final.cnot_count, "parameters": l,
                        "depth": depth(final), "gates": final.gate_count},
            "evals": {
                "breakdown": dict(sorted(breakdown.items())),
                "total": sum(breakdown.values()),
                # search + path re-evaluation + gradients; per-step monitoring kept apart
                "n_eval": breakdown["search"] + breakdown["path"] + breakdown["finetune"],
                "idealized": cfg.iterations + 2 * l * trace.steps_used,
                "idealized_cap": cfg.iterations + 2 * l * steps,
                "path_length": len(result.best_path),
            },
        })
        if isinstance(problem, OracleProblem):
            fid = problem.fidelity(final)
            record["fidelity"] = fid
            record["epsilon"] = problem.epsilon
            # judged on the ideal state of the returned circuit, also for noisy searches
            record["success"] = bool(problem.is_epsilon_approx(final))
    except (QasError, ValueError, ArithmeticError) as exc:
        log.error("%s %s run %d failed: %s", target.ident, point_tag(point), run, exc)
        record.update({"status": "failed", "error": f"{type(exc).__name__}: {exc}"})
    record["wall_time"] = time.perf_counter() - start
    return record


def _run_task(task: dict) -> dict:
    return run_once(task["target"], task["cfg"], task["point"], task["run"], task["finetune"])


# ---------------------------------------------------------------------------
# persistence


VOLATILE = ("wall_time",)


def record_name(record: dict) -> str:
    return f"{record['problem']}__{record['grid_tag']}__run{record['run']:03d}.json"


def write_record(record: dict, runs_dir: Path) -> Path:
    path = Path(runs_dir) / record_name(record)
    path.write_text(json.dumps(record, indent=1, sort_keys=True) + "\n")
    return path


def read_records(results_dir) -> list[dict]:
    root = Path(results_dir)
    runs_dir = root / "runs" if (root / "runs").is_dir() else root
    records = []
    for p in sorted(runs_dir.glob("*.json")):
        with open(p) as fh:
            records.append(json.load(fh))
    return records


def stable_view(record: dict) -> dict:
    """The record without fields that legitimately differ between identical runs."""
    return {k: v for k, v in record.items() if k not in VOLATILE}


SUMMARY_FIELDS = ("problem", "grid", "runs", "ok", "failed", "min_cost", "mean_cost", "std_cost",
                  "min_search_cost", "mean_search_cost", "successes", "mean_n_eval",
                  "optimal_cost")


def _stats(xs):
    if not xs:
        return math.nan, math.nan, math.nan
    a = np.asarray(xs, dtype=float)
    return float(a.min()), float(a.mean()), float(a.std())


def summarize(records: list[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in records:
        groups.setdefault((r["problem"], r["grid_tag"]), []).append(r)
    rows = []
    for (prob, tag), rs in sorted(groups.items()):
        ok = [r for r in rs if r.get("status") == "ok"]
        mn, mean, std = _stats([r["final_cost"] for r in ok])
        smn, smean, _ = _stats([r["search_cost"] for r in ok])
        succ = [r["success"] for r in ok if "success" in r]
        rows.append({
            "problem": prob, "grid": tag, "runs": len(rs), "ok": len(ok),
            "failed": len(rs) - len(ok),
            "min_cost": mn, "mean_cost": mean, "std_cost": std,
            "min_search_cost": smn, "mean_search_cost": smean,
            "successes": sum(succ) if succ else "",
            "mean_n_eval": float(np.mean([r["evals"]["n_eval"] for r in ok])) if ok else math.nan,
            "optimal_cost": ok[0]["optimal_cost"] if ok and ok[0]["optimal_cost"] is not None else "",
        })
    return rows


def write_table(rows: list[dict], path, fields=None) -> Path:
    path = Path(path)
    fields = fields or (list(rows[0]) if rows else [])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k, "")) for k in fields})
    return path


def _fmt(v):
    return f"{v:.17g}" if isinstance(v, float) else v


# ---------------------------------------------------------------------------
# driver


def default_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def execute(exp: Experiment, out_dir=None, workers: int | None = None) -> list[dict]:
    """Run every task of ``exp``; records are written as they finish, then the summary."""
    tasks = exp.tasks()
    workers = workers or exp.workers or default_workers()
    runs_dir = None
    if out_dir is not None:
        runs_dir = Path(out_dir) / "runs"
        runs_dir.mkdir(parents=True, exist_ok=True)
    records = []

    def keep(rec):
        records.append(rec)
        if runs_dir is not None:
            write_record(rec, runs_dir)
        log.info("%s %s run %d: %s", rec["problem"], rec["grid_tag"], rec["run"],
                 rec.get("final_cost", rec.get("error")))

    if workers <= 1 or len(tasks) <= 1:
        for task in tasks:
            keep(_run_task(task))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rec in pool.map(_run_task, tasks, chunksize=1):
                keep(rec)
    if out_dir is not None:
        write_table(summarize(records), Path(out_dir) / "summary.csv", SUMMARY_FIELDS)
    return records
