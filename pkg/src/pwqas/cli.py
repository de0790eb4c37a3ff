"""Command-line entry point.

    pwqas run --config configs/h2.yaml --runs 10 --out results/h2
    pwqas gen-dataset --seed 7 --out data/dataset
    pwqas report results/h2
    pwqas magic circuit.qc
    pwqas exact data/h2_sto3g.txt

Any search setting can be overridden on ``run`` with ``--<name> <value>``
(dashes or underscores), e.g. ``--exploration 0.8``.
Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .circuit import parse
from .dataset import DEFAULT_GATES, DEFAULT_QUBITS, SAMPLES_PER_CELL, build_dataset, m2_entropy, write_dataset
from .errors import ConfigurationError, ParseError, QasError
from .qsim import exact_ground_energy, run_encoded

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _branching(text: str):
    if text.lower() in ("none", "pw"):
        return None
    return int(text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pwqas", description="Progressive-widening MCTS circuit search")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a seeded experiment grid")
    r.add_argument("--config", type=Path, help="YAML experiment file")
    r.add_argument("--seed", type=int, help="base seed; run k uses seed + k")
    r.add_argument("--runs", type=int)
    r.add_argument("--iterations", type=int)
    r.add_argument("--noise-bitflip", type=float)
    r.add_argument("--noise-depolarizing", type=float)
    r.add_argument("--fixed-branching", type=_branching, default=argparse.SUPPRESS,
                   help="constant branching factor, or 'pw' for progressive widening")
    r.add_argument("--workers", type=int)
    r.add_argument("--out", type=Path, required=True, help="results directory")

    g = sub.add_parser("gen-dataset", help="generate the random Clifford+T target dataset")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--qubits", type=_int_list, default=DEFAULT_QUBITS)
    g.add_argument("--gates", type=_int_list, default=DEFAULT_GATES)
    g.add_argument("--samples", type=int, default=SAMPLES_PER_CELL)

    rep = sub.add_parser("report", help="export tables from a results directory")
    rep.add_argument("results", type=Path)
    rep.add_argument("--out", type=Path, help="defaults to <results>/report")

    m = sub.add_parser("magic", help="print the stabilizer 2-Renyi entropy of a circuit file")
    m.add_argument("circuit", type=Path)

    e = sub.add_parser("exact", help="print the exact ground energy of a Hamiltonian file")
    e.add_argument("hamiltonian", type=Path)
    return p


def _split_overrides(extra: list[str]) -> dict[str, str]:
    """``--name value`` / ``--name=value`` pairs left over by argparse."""
    out, i = {}, 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or tok == "--":
            raise UsageError(f"unexpected argument {tok!r}")
        if "=" in tok:
            key, value = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise UsageError(f"{tok} needs a value")
            key, value = tok[2:], extra[i + 1]
            i += 2
        out[key.replace("-", "_")] = value
    return out


def cmd_run(args, extra) -> int:
    from .experiments import execute, load_experiment

    overrides = _split_overrides(extra)
    for name in ("seed", "iterations", "noise_bitflip", "noise_depolarizing"):
        if getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    if hasattr(args, "fixed_branching"):
        overrides["fixed_branching"] = args.fixed_branching
    if args.runs is not None and args.runs < 1:
        raise UsageError("--runs must be >= 1")
    if args.workers is not None and args.workers < 1:
        raise UsageError("--workers must be >= 1")
    if args.config is not None and not args.config.is_file():
        raise FileNotFoundError(f"config file {args.config} not found")
    exp = load_experiment(args.config, overrides, args.runs)
    records = execute(exp, args.out, workers=args.workers)
    failed = sum(r["status"] != "ok" for r in records)
    print(f"{len(records)} runs written to {args.out / 'runs'}; summary in {args.out / 'summary.csv'}"
          + (f"; {failed} failed" if failed else ""))
    return EXIT_OK


def cmd_gen_dataset(args) -> int:
    if args.samples < 1 or not args.qubits or not args.gates:
        raise UsageError("need at least one qubit count, gate count and sample")
    entries = build_dataset(np.random.default_rng(args.seed), args.qubits, args.gates, args.samples)
    manifest = write_dataset(entries, args.out)
    print(f"{len(entries)} circuits, manifest {manifest}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import build_report

    if not args.results.is_dir():
        raise FileNotFoundError(f"results directory {args.results} not found")
    for path in build_report(args.results, args.out):
        print(path)
    return EXIT_OK


def cmd_magic(args) -> int:
    circuit = parse(args.circuit.read_text())
    print(f"{m2_entropy(run_encoded(circuit.n, circuit.encoded)):.12g}")
    return EXIT_OK


def cmd_exact(args) -> int:
    from .problems import load_hamiltonian

    print(f"{exact_ground_energy(load_hamiltonian(args.hamiltonian)):.12g}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        if extra and args.command != "run":
            raise UsageError(f"unrecognized arguments: {' '.join(extra)}")
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "run":
            return cmd_run(args, extra)
        handler = {"gen-dataset": cmd_gen_dataset, "report": cmd_report,
                   "magic": cmd_magic, "exact": cmd_exact}[args.command]
        return handler(args)
    except (UsageError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, QasError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
