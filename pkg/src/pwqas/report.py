"""Plot-ready delimited exports built from a directory of RunRecords."""
from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

import numpy as np

from .errors import QasError
from .experiments import read_records, summarize, write_table, SUMMARY_FIELDS


class EmptyResultsError(QasError):
    pass


def best_path_rows(records):
    rows = []
    for r in records:
        for step, cost in enumerate(r["best_path_costs"]):
            rows.append({"problem": r["problem"], "grid": r["grid_tag"],
                         "iterations": r["config"]["iterations"], "run": r["run"],
                         "step": step, "cost": cost})
    return rows


def finetune_rows(records):
    rows = []
    for r in records:
        for step, cost in enumerate(r["finetune_costs"]):
            rows.append({"problem": r["problem"], "grid": r["grid_tag"], "run": r["run"],
                         "step": step, "cost": cost})
    return rows


def success_rows(records):
    """Success counts per (n, g, label, grid point) and the n x g matrix per label and grid point."""
    counts = defaultdict(lambda: [0, 0])
    for r in records:
        if "success" not in r:
            continue
        info = r["problem_info"]
        key = (info.get("label", ""), r["grid_tag"], info.get("n"), info.get("g"))
        counts[key][0] += int(r["success"])
        counts[key][1] += 1
    long = [{"label": lab, "grid": tag, "n": n, "g": g, "successes": s, "runs": k}
            for (lab, tag, n, g), (s, k) in sorted(counts.items(), key=lambda kv: str(kv[0]))]
    gs = sorted({g for (_, _, _, g) in counts if g is not None})
    matrix = []
    for lab, tag in sorted({(lab, tag) for (lab, tag, _, _) in counts}):
        for n in sorted({n for (l2, t2, n, _) in counts if (l2, t2) == (lab, tag) and n is not None}):
            row = {"label": lab, "grid": tag, "n": n}
            for g in gs:
                row[f"g{g}"] = counts[(lab, tag, n, g)][0] if (lab, tag, n, g) in counts else ""
            matrix.append(row)
    return long, matrix, ["label", "grid", "n"] + [f"g{g}" for g in gs]


TABLE_FIELDS = ("problem", "grid", "iterations", "runs", "best_run", "result", "search_result",
                "mean_cost", "std_cost", "n_eval", "n_eval_with_monitor", "idealized",
                "idealized_cap", "evals_search", "evals_path", "evals_finetune", "evals_monitor",
                "finetune_steps", "cnots", "parameters", "depth")


def table_rows(records):
    """One row per (problem, grid point), describing the best run (lowest final cost)."""
    groups = defaultdict(list)
    for r in records:
        if r.get("status") == "ok":
            groups[(r["problem"], r["grid_tag"])].append(r)
    rows = []
    for (prob, tag), rs in sorted(groups.items()):
        best = min(rs, key=lambda r: (r["final_cost"], r["run"]))
        costs = np.array([r["final_cost"] for r in rs])
        ev, br = best["evals"], best["evals"]["breakdown"]
        rows.append({
            "problem": prob, "grid": tag, "iterations": best["config"]["iterations"],
            "runs": len(rs), "best_run": best["run"], "result": best["final_cost"],
            "search_result": best["search_cost"], "mean_cost": float(costs.mean()),
            "std_cost": float(costs.std()), "n_eval": ev["n_eval"], "n_eval_with_monitor": ev["total"],
            "idealized": ev["idealized"], "idealized_cap": ev["idealized_cap"],
            "evals_search": br.get("search", 0), "evals_path": br.get("path", 0),
            "evals_finetune": br.get("finetune", 0), "evals_monitor": br.get("monitor", 0),
            "finetune_steps": best["finetune_steps"], "cnots": best["metrics"]["cnots"],
            "parameters": best["metrics"]["parameters"], "depth": best["metrics"]["depth"],
        })
    return rows


def branching_rows(records):
    """Mean and standard deviation of costs per branching setting ("pw" = progressive widening)."""
    groups = defaultdict(list)
    for r in records:
        if r.get("status") != "ok":
            continue
        k = r["config"]["fixed_branching"]
        groups[(r["problem"], r["config"]["iterations"], "pw" if k is None else k)].append(r)
    rows = []
    for (prob, iters, k), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1],
                                                                        math.inf if kv[0][2] == "pw" else kv[0][2])):
        final = np.array([r["final_cost"] for r in rs])
        found = np.array([r["search_cost"] for r in rs])
        rows.append({"problem": prob, "iterations": iters, "branching": k, "runs": len(rs),
                     "mean_cost": float(final.mean()), "std_cost": float(final.std()),
                     "mean_search_cost": float(found.mean()), "std_search_cost": float(found.std())})
    return rows


def build_report(results_dir, out_dir=None) -> list[Path]:
    records = read_records(results_dir)
    if not records:
        raise EmptyResultsError(f"no run records found in {results_dir}")
    out = Path(out_dir) if out_dir is not None else Path(results_dir) / "report"
    out.mkdir(parents=True, exist_ok=True)
    ok = [r for r in records if r.get("status") == "ok"]
    written = [
        write_table(summarize(records), out / "summary.csv", SUMMARY_FIELDS),
        write_table(best_path_rows(ok), out / "best_path.csv",
                    ["problem", "grid", "iterations", "run", "step", "cost"]),
        write_table(finetune_rows(ok), out / "finetune_traces.csv",
                    ["problem", "grid", "run", "step", "cost"]),
        write_table(table_rows(records), out / "table_summary.csv", TABLE_FIELDS),
        write_table(branching_rows(records), out / "branching_sweep.csv",
                    ["problem", "iterations", "branching", "runs", "mean_cost", "std_cost",
                     "mean_search_cost", "std_search_cost"]),
    ]
    long, matrix, fields = success_rows(ok)
    if long:
        written.append(write_table(long, out / "success_counts.csv",
                                   ["label", "grid", "n", "g", "successes", "runs"]))
        written.append(write_table(matrix, out / "success_matrix.csv", fields))
    return written
