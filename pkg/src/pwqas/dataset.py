"""Random Clifford+T target circuits ranked by stabilizer 2-Rényi entropy."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import hadamard

from .circuit import Circuit, Gate, GateKind, cnot, parse, serialize
from .errors import ResourceError
from .qsim import num_qubits, run_encoded

MAX_M2_QUBITS = 8

DEFAULT_QUBITS = (4, 6, 8)
DEFAULT_GATES = (5, 10, 15, 20, 30)
SAMPLES_PER_CELL = 10

# success threshold used for each register size
DEFAULT_EPSILON = {4: 0.05, 6: 0.1, 8: 0.2}

_CLIFFORD_T = (GateKind.H, GateKind.S, GateKind.CNOT, GateKind.T)


def pauli_spectrum(state: np.ndarray) -> np.ndarray:
    """|<psi|X^x Z^z|psi>| for every (x, z) as a 2^n x 2^n array.

    Each Hermitian Pauli string equals X^x Z^z up to a phase, so these are
    the absolute Pauli expectation values. Row x is a Walsh-Hadamard
    transform of ``conj(psi[i ^ x]) * psi[i]``.
    """
    n = num_qubits(state)
    if n > MAX_M2_QUBITS:
        raise ResourceError(f"Pauli enumeration capped at {MAX_M2_QUBITS} qubits, got {n}")
    dim = 1 << n
    idx = np.arange(dim)
    overlaps = state.conj()[idx[:, None] ^ idx[None, :]] * state[None, :]
    return np.abs(overlaps @ hadamard(dim))


def m2_entropy(state: np.ndarray) -> float:
    """Stabilizer 2-Rényi entropy ``-log2(sum_P <P>^4 / 2^n)``; zero on stabilizer states."""
    n = num_qubits(state)
    moments = pauli_spectrum(state) ** 4
    value = -math.log2(moments.sum() / (1 << n))
    return value if value > 0.0 else 0.0


def gen_random_clifford_t(n: int, g: int, rng: np.random.Generator) -> Circuit:
    """``g`` gates drawn uniformly from {H, S, CNOT, T} on uniform qubits."""
    if n < 2 or g < 1:
        raise ValueError(f"need n >= 2 and g >= 1, got n={n}, g={g}")
    gates = []
    for _ in range(g):
        kind = _CLIFFORD_T[int(rng.integers(4))]
        if kind is GateKind.CNOT:
            control = int(rng.integers(n))
            target = int(rng.integers(n - 1))
            if target >= control:
                target += 1
            gates.append(cnot(control, target))
        else:
            gates.append(Gate(kind, int(rng.integers(n))))
    return Circuit(n, tuple(gates))


@dataclass(frozen=True)
class DatasetEntry:
    n: int
    g: int
    label: str
    circuit: Circuit
    m2: float
    index: int = 0  # generation index inside its (n, g) batch

    @property
    def key(self) -> str:
        return f"n{self.n}_g{self.g}_{self.label}"

    def state(self) -> np.ndarray:
        return run_encoded(self.n, self.circuit.encoded)


def build_dataset(rng: np.random.Generator, qubits=DEFAULT_QUBITS, gates=DEFAULT_GATES,
                  samples: int = SAMPLES_PER_CELL) -> list[DatasetEntry]:
    """Lowest-M2 ("easy") and highest-M2 ("hard") circuit of each (n, g) batch."""
    entries = []
    for n in qubits:
        for g in gates:
            batch = [gen_random_clifford_t(n, g, rng) for _ in range(samples)]
            m2 = [m2_entropy(run_encoded(n, c.encoded)) for c in batch]
            # rounding keeps float noise from breaking ties; argmin/argmax take the first index
            keys = np.round(m2, 10)
            lo, hi = int(np.argmin(keys)), int(np.argmax(keys))
            entries.append(DatasetEntry(n, g, "easy", batch[lo], m2[lo], lo))
            entries.append(DatasetEntry(n, g, "hard", batch[hi], m2[hi], hi))
    return entries


MANIFEST_FIELDS = ("n", "g", "label", "m2", "index", "circuit")


def write_dataset(entries: list[DatasetEntry], out_dir) -> Path:
    out = Path(out_dir)
    (out / "circuits").mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_FIELDS)
        for e in entries:
            rel = os.path.join("circuits", f"{e.key}.qc")
            (out / rel).write_text(serialize(e.circuit))
            writer.writerow((e.n, e.g, e.label, f"{e.m2:.17g}", e.index, rel))
    return manifest


def read_dataset(manifest) -> list[DatasetEntry]:
    manifest = Path(manifest)
    entries = []
    with open(manifest, newline="") as fh:
        for row in csv.DictReader(fh):
            circuit = parse((manifest.parent / row["circuit"]).read_text())
            entries.append(DatasetEntry(int(row["n"]), int(row["g"]), row["label"], circuit,
                                        float(row["m2"]), int(row["index"])))
    return entries
