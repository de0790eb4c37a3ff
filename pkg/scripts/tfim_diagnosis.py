"""Where does the TFIM energy gap come from: search structure or fine-tuning budget?

For each seed: energy of the best-path circuit, of the best circuit evaluated
anywhere in the tree, and of both after fine-tuning. A fixed layered RY/CNOT
ansatz is fine-tuned with 500 and 5000 Adam steps for comparison.

    python scripts/tfim_diagnosis.py [--iterations 5000] [--seeds 10]
"""
import argparse

import numpy as np

from pwqas.circuit import Circuit, cnot, ry
from pwqas.config import SearchConfig
from pwqas.finetune import finetune
from pwqas.mcts import Search
from pwqas.problems import VqeProblem, transverse_field_ising


def layered(n, layers, rng):
    gates = []
    for _ in range(layers):
        gates += [ry(q, rng.uniform(0, 0.3)) for q in range(n)]
        gates += [cnot(q, q + 1) for q in range(n - 1)]
    gates += [ry(q, rng.uniform(0, 0.3)) for q in range(n)]
    return Circuit(n, tuple(gates))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iterations", type=int, default=5000)
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()

    p = VqeProblem(transverse_field_ising(4))
    e0 = p.optimal_cost
    print("seed,path_gap,tree_gap,path_tuned_gap,tree_tuned_gap,steps,gates,params,cnots")
    for seed in range(args.seeds):
        s = Search(p, SearchConfig(iterations=args.iterations, seed=seed))
        r = s.run()
        a = finetune(r.best_circuit, p, 500)
        b = finetune(s.best_circuit, p, 500)
        c = r.best_circuit
        print(f"{seed},{r.best_cost - e0:.5f},{s.best_cost - e0:.5f},{a.best_cost - e0:.5f},"
              f"{b.best_cost - e0:.5f},{a.steps_used},{c.gate_count},{c.param_count},{c.cnot_count}")

    print("\nlayers,gap_T500,gap_T5000,steps_T5000")
    rng = np.random.default_rng(0)
    for layers in (2, 3, 4):
        c = layered(4, layers, rng)
        short, long = finetune(c, p, 500), finetune(c, p, 5000)
        print(f"{layers},{short.best_cost - e0:.3e},{long.best_cost - e0:.3e},{long.steps_used}")


if __name__ == "__main__":
    main()
