"""Dense statevector and density-matrix simulation.

States are plain complex numpy arrays. Basis ordering: qubit 0 is the most
significant bit of the basis index, so ``|q0 q1 ... q_{n-1}>`` has index
``sum(q_k << (n - 1 - k))``. Rotations follow ``R_a(θ) = exp(-iθa/2)``.

Gate application runs in small numba kernels over the flat arrays produced
by :attr:`Circuit.encoded`; everything else is numpy/scipy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.sparse as sp
from numba import njit

from .circuit import Circuit, EncodedCircuit, Gate
from .errors import CircuitError, ConfigurationError, ObservableError, ResourceError

MAX_QUBITS = 14
MAX_DENSITY_QUBITS = 10
MAX_DIAG_QUBITS = 12



# ---------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _matrix(kind, angle):
    """Entries (a, b, c, d) of the 2x2 unitary [[a, b], [c, d]]."""
    if kind == 1:
        co = math.cos(angle / 2)
        si = math.sin(angle / 2)
        return complex(co, 0.0), complex(0.0, -si), complex(0.0, -si), complex(co, 0.0)
    if kind == 2:
        co = math.cos(angle / 2)
        si = math.sin(angle / 2)
        return complex(co, 0.0), complex(-si, 0.0), complex(si, 0.0), complex(co, 0.0)
    if kind == 3:
        co = math.cos(angle / 2)
        si = math.sin(angle / 2)
        return complex(co, -si), 0j, 0j, complex(co, si)
    if kind == 4:
        r = 0.7071067811865476
        return complex(r, 0.0), complex(r, 0.0), complex(r, 0.0), complex(-r, 0.0)
    if kind == 5:
        return 1 + 0j, 0j, 0j, 1j
    # T
    r = 0.7071067811865476
    return 1 + 0j, 0j, 0j, complex(r, r)


@njit(cache=True)
def _run_state(state, n, kinds, targets, controls, angles):
    dim = state.shape[0]
    for g in range(kinds.shape[0]):
        kind = kinds[g]
        tm = 1 << (n - 1 - targets[g])
        if kind == 0:
            cm = 1 << (n - 1 - controls[g])
            for i in range(dim):
                if (i & cm) and not (i & tm):
                    j = i | tm
                    tmp = state[i]
                    state[i] = state[j]
                    state[j] = tmp
            continue
        a, b, c, d = _matrix(kind, angles[g])
        for i in range(dim):
            if not (i & tm):
                j = i | tm
                x0 = state[i]
                x1 = state[j]
                state[i] = a * x0 + b * x1
                state[j] = c * x0 + d * x1
    return state


@njit(cache=True)
def _left_1q(rho, tm, a, b, c, d):
    dim = rho.shape[0]
    for i in range(dim):
        if not (i & tm):
            j = i | tm
            for k in range(dim):
                x0 = rho[i, k]
                x1 = rho[j, k]
                rho[i, k] = a * x0 + b * x1
                rho[j, k] = c * x0 + d * x1


@njit(cache=True)
def _right_1q_dagger(rho, tm, a, b, c, d):
    # rho <- rho U^dagger
    dim = rho.shape[0]
    ac, bc, cc, dc = a.conjugate(), b.conjugate(), c.conjugate(), d.conjugate()
    for i in range(dim):
        if not (i & tm):
            j = i | tm
            for r in range(dim):
                x0 = rho[r, i]
                x1 = rho[r, j]
                rho[r, i] = x0 * ac + x1 * bc
                rho[r, j] = x0 * cc + x1 * dc


@njit(cache=True)
def _cnot_dm(rho, cm, tm):
    dim = rho.shape[0]
    for i in range(dim):
        if (i & cm) and not (i & tm):
            j = i | tm
            for k in range(dim):
                tmp = rho[i, k]
                rho[i, k] = rho[j, k]
                rho[j, k] = tmp
    for i in range(dim):
        if (i & cm) and not (i & tm):
            j = i | tm
            for r in range(dim):
                tmp = rho[r, i]
                rho[r, i] = rho[r, j]
                rho[r, j] = tmp


@njit(cache=True)
def _depolarize(rho, m, p):
    # (1-p) rho + p/3 (X rho X + Y rho Y + Z rho Z) on the qubit with mask m
    dim = rho.shape[0]
    keep_diag = 1.0 - 2.0 * p / 3.0
    mix = 2.0 * p / 3.0
    keep_off = 1.0 - 4.0 * p / 3.0
    for i in range(dim):
        if i & m:
            continue
        i1 = i | m
        for k in range(dim):
            if k & m:
                continue
            k1 = k | m
            r00 = rho[i, k]
            r11 = rho[i1, k1]
            rho[i, k] = keep_diag * r00 + mix * r11
            rho[i1, k1] = keep_diag * r11 + mix * r00
            rho[i, k1] = keep_off * rho[i, k1]
            rho[i1, k] = keep_off * rho[i1, k]


@njit(cache=True)
def _bit_flip(rho, m, p):
    # (1-p) rho + p X rho X on the qubit with mask m
    dim = rho.shape[0]
    q = 1.0 - p
    for i in range(dim):
        if i & m:
            continue
        i1 = i | m
        for k in range(dim):
            if k & m:
                continue
            k1 = k | m
            r00 = rho[i, k]
            r11 = rho[i1, k1]
            r01 = rho[i, k1]
            r10 = rho[i1, k]
            rho[i, k] = q * r00 + p * r11
            rho[i1, k1] = q * r11 + p * r00
            rho[i, k1] = q * r01 + p * r10
            rho[i1, k] = q * r10 + p * r01


@njit(cache=True)
def _run_density(rho, n, kinds, targets, controls, angles, p_dep, p_flip):
    for g in range(kinds.shape[0]):
        kind = kinds[g]
        tm = 1 << (n - 1 - targets[g])
        if kind == 0:
            cm = 1 << (n - 1 - controls[g])
            _cnot_dm(rho, cm, tm)
            if p_dep > 0.0:
                _depolarize(rho, cm, p_dep)
                _depolarize(rho, tm, p_dep)
            continue
        a, b, c, d = _matrix(kind, angles[g])
        _left_1q(rho, tm, a, b, c, d)
        _right_1q_dagger(rho, tm, a, b, c, d)
        if p_dep > 0.0:
            _depolarize(rho, tm, p_dep)
    if p_flip > 0.0:
        for q in range(n):
            _bit_flip(rho, 1 << (n - 1 - q), p_flip)
    return rho


# ---------------------------------------------------------------------------
# states


def num_qubits(state: np.ndarray) -> int:
    dim = state.shape[0]
    n = dim.bit_length() - 1
    if n < 1 or (1 << n) != dim:
        raise ObservableError(f"dimension {dim} is not a power of two >= 2")
    return n


def zero_state(n: int) -> np.ndarray:
    if not (1 <= n <= MAX_QUBITS):
        raise ConfigurationError(f"qubit count must be in [1, {MAX_QUBITS}], got {n}")
    state = np.zeros(1 << n, dtype=np.complex128)
    state[0] = 1.0
    return state


def _check_qubits(n: int):
    if not (1 <= n <= MAX_QUBITS):
        raise ResourceError(f"{n} qubits exceeds the simulator cap of {MAX_QUBITS}")


def run_encoded(n: int, enc: EncodedCircuit, angles: np.ndarray | None = None,
                initial: np.ndarray | None = None) -> np.ndarray:
    """Simulate encoded gates from ``initial`` (default |0...0>).

    ``angles`` optionally overrides the per-gate angle array (same length as
    the gate list), which lets the optimizer skip rebuilding circuits.
    """
    state = zero_state(n) if initial is None else np.array(initial, dtype=np.complex128)
    return _run_state(state, n, enc.kinds, enc.targets, enc.controls,
                      enc.angles if angles is None else angles)


def apply_gate(state: np.ndarray, gate: Gate) -> np.ndarray:
    n = num_qubits(state)
    for q in gate.qubits:
        if q >= n:
            raise CircuitError(f"gate {gate} addresses qubit {q} of a {n}-qubit state")
    enc = Circuit(n, (gate,)).encoded
    return run_encoded(n, enc, initial=state)


def apply_circuit(circuit: Circuit, initial: np.ndarray | None = None) -> np.ndarray:
    _check_qubits(circuit.n)
    return run_encoded(circuit.n, circuit.encoded, initial=initial)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense unitary of ``circuit`` (columns are images of basis states)."""
    dim = 1 << circuit.n
    if circuit.n > MAX_DENSITY_QUBITS:
        raise ResourceError(f"dense unitary of {circuit.n} qubits is too large")
    cols = []
    for k in range(dim):
        basis = np.zeros(dim, dtype=np.complex128)
        basis[k] = 1.0
        cols.append(apply_circuit(circuit, initial=basis))
    return np.stack(cols, axis=1)


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ObservableError(f"state sizes differ: {a.shape} vs {b.shape}")
    return float(abs(np.vdot(a, b)) ** 2)


# ---------------------------------------------------------------------------
# Pauli observables

_LETTERS = frozenset("IXYZ")


def _validate_pauli(p: str) -> str:
    p = p.upper()
    if not p or not set(p) <= _LETTERS:
        raise ObservableError(f"invalid Pauli string {p!r}")
    return p


def pauli_masks(p: str) -> tuple[int, int, int]:
    """(flip mask, sign mask, number of Y) so that P|i> = i^nY (-1)^|i & sign| |i ^ flip>."""
    n = len(p)
    flip = sign = 0
    ny = 0
    for k, letter in enumerate(p):
        bit = 1 << (n - 1 - k)
        if letter in "XY":
            flip |= bit
        if letter in "YZ":
            sign |= bit
        if letter == "Y":
            ny += 1
    return flip, sign, ny


def _parity(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    out = np.zeros_like(x)
    while np.any(x):
        out ^= x & 1
        x >>= 1
    return out


def _pauli_action(p: str) -> tuple[np.ndarray, np.ndarray]:
    """Return (image index, phase) with P|i> = phase[i] |image[i]>."""
    n = len(p)
    flip, sign, ny = pauli_masks(p)
    idx = np.arange(1 << n, dtype=np.int64)
    signs = 1.0 - 2.0 * _parity(idx & sign)
    phase = (1j ** ny) * signs
    return idx ^ flip, phase.astype(np.complex128)


def pauli_expectation(state: np.ndarray, p: str) -> float:
    p = _validate_pauli(p)
    n = num_qubits(state)
    if len(p) != n:
        raise ObservableError(f"Pauli string of length {len(p)} on a {n}-qubit state")
    image, phase = _pauli_action(p)
    # <psi|P|psi> = sum_i conj(psi[image_i]) phase_i psi[i]
    val = np.vdot(state[image], phase * state)
    if abs(val.imag) > 1e-10:
        raise ObservableError(f"expectation of {p} has imaginary part {val.imag:.3e}")
    return float(val.real)


def apply_pauli(state: np.ndarray, p: str) -> np.ndarray:
    image, phase = _pauli_action(_validate_pauli(p))
    out = np.empty_like(state)
    out[image] = phase * state
    return out


@dataclass(frozen=True)
class PauliSum:
    """Linear combination of Pauli strings, ``sum_m c_m P_m``."""

    terms: tuple[tuple[complex, str], ...]

    def __post_init__(self):
        terms = tuple((complex(c), _validate_pauli(p)) for c, p in self.terms)
        if not terms:
            raise ObservableError("empty Pauli sum")
        lengths = {len(p) for _, p in terms}
        if len(lengths) != 1:
            raise ObservableError(f"Pauli strings of unequal lengths {sorted(lengths)}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[complex, str]]) -> PauliSum:
        return cls(tuple(pairs))

    @property
    def n(self) -> int:
        return len(self.terms[0][1])

    @property
    def is_hermitian(self) -> bool:
        return all(abs(c.imag) <= 1e-12 for c, _ in self.terms)

    def require_hermitian(self):
        if not self.is_hermitian:
            raise ObservableError("observable has complex Pauli coefficients")

    @property
    def one_norm(self) -> float:
        return float(sum(abs(c) for c, _ in self.terms))

    @cached_property
    def sparse(self) -> sp.csr_matrix:
        if self.n > MAX_QUBITS:
            raise ResourceError(f"{self.n}-qubit operator exceeds the cap of {MAX_QUBITS}")
        dim = 1 << self.n
        rows, cols, vals = [], [], []
        cols_base = np.arange(dim, dtype=np.int64)
        for c, p in self.terms:
            image, phase = _pauli_action(p)
            rows.append(image)
            cols.append(cols_base)
            vals.append(c * phase)
        m = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
        )
        return m.tocsr()

    @cached_property
    def operator(self):
        """Matrix used for expectations: dense for small registers, CSR otherwise."""
        return self.sparse.toarray() if self.n <= 6 else self.sparse

    def dense(self) -> np.ndarray:
        if self.n > MAX_DIAG_QUBITS:
            raise ResourceError(f"dense {self.n}-qubit operator is too large")
        return self.sparse.toarray()

    def __str__(self) -> str:
        return "\n".join(f"{c.real:.17g} {p}" for c, p in self.terms)


def pauli_sum_expectation(state: np.ndarray, h: PauliSum) -> float:
    h.require_hermitian()
    if num_qubits(state) != h.n:
        raise ObservableError(f"{h.n}-qubit observable on a {num_qubits(state)}-qubit state")
    val = np.vdot(state, h.operator @ state)
    if abs(val.imag) > 1e-10 * max(1.0, h.one_norm):
        raise ObservableError(f"Hermitian expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def exact_ground_energy(h: PauliSum) -> float:
    h.require_hermitian()
    if h.n > MAX_DIAG_QUBITS:
        raise ResourceError(f"exact diagonalization capped at {MAX_DIAG_QUBITS} qubits, got {h.n}")
    return float(np.linalg.eigvalsh(h.dense())[0])


# ---------------------------------------------------------------------------
# noise and density matrices


@dataclass(frozen=True)
class NoiseModel:
    bit_flip_p: float = 0.0
    depolarizing_p: float = 0.0

    def __post_init__(self):
        for name in ("bit_flip_p", "depolarizing_p"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigurationError(f"{name} must be in [0, 1], got {v}")

    @property
    def is_identity(self) -> bool:
        return self.bit_flip_p == 0.0 and self.depolarizing_p == 0.0


def run_encoded_noisy(n: int, enc: EncodedCircuit, noise: NoiseModel,
                      angles: np.ndarray | None = None) -> np.ndarray:
    if n > MAX_DENSITY_QUBITS:
        raise ResourceError(f"density-matrix simulation capped at {MAX_DENSITY_QUBITS} qubits")
    dim = 1 << n
    rho = np.zeros((dim, dim), dtype=np.complex128)
    rho[0, 0] = 1.0
    return _run_density(rho, n, enc.kinds, enc.targets, enc.controls,
                        enc.angles if angles is None else angles,
                        float(noise.depolarizing_p), float(noise.bit_flip_p))


def apply_circuit_noisy(circuit: Circuit, noise: NoiseModel) -> np.ndarray:
    """Density matrix after ``circuit`` with gate depolarizing and readout bit-flip noise.

    Each gate is followed by single-qubit depolarizing noise on every qubit it
    touches; a bit-flip channel acts on every qubit after the last gate.
    """
    return run_encoded_noisy(circuit.n, circuit.encoded, noise)


def depolarize(rho: np.ndarray, qubit: int, p: float) -> np.ndarray:
    n = num_qubits(rho)
    out = np.array(rho, dtype=np.complex128)
    _depolarize(out, 1 << (n - 1 - qubit), float(p))
    return out


def bit_flip(rho: np.ndarray, qubit: int, p: float) -> np.ndarray:
    n = num_qubits(rho)
    out = np.array(rho, dtype=np.complex128)
    _bit_flip(out, 1 << (n - 1 - qubit), float(p))
    return out


def density_from_state(state: np.ndarray) -> np.ndarray:
    return np.outer(state, state.conj())


def dm_expectation(rho: np.ndarray, op) -> float:
    """Tr(rho O) for a Hermitian dense or sparse operator ``O``."""
    if sp.issparse(op):
        val = op.multiply(rho.T).sum()
    else:
        val = np.sum(rho.T * op)
    val = complex(val)
    scale = max(1.0, float(abs(op).max()) if op.shape[0] else 1.0)
    if abs(val.imag) > 1e-10 * scale * rho.shape[0]:
        raise ObservableError(f"Tr(rho O) has imaginary part {val.imag:.3e}")
    return val.real


def dm_pauli_sum_expectation(rho: np.ndarray, h: PauliSum) -> float:
    h.require_hermitian()
    if rho.shape != (1 << h.n, 1 << h.n):
        raise ObservableError(f"{h.n}-qubit observable on a density matrix of shape {rho.shape}")
    return dm_expectation(rho, h.sparse)


def state_expectation(state: np.ndarray, op) -> float:
    """<psi|O|psi> for a Hermitian dense or sparse operator."""
    return float(np.vdot(state, op @ state).real)


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)

