"""Cost functions that score circuits: VQE, VQLS and state (oracle) approximation.

Every problem is an expectation-form cost: the circuit's state yields a small
vector of Hermitian expectation values, and the cost is a fixed function of
that vector. This keeps the parameter-shift gradient generic (see
:mod:`pwqas.finetune`).
"""
from __future__ import annotations

import math
import threading
from collections import Counter

import numpy as np

from .circuit import Circuit, root_circuit
from .errors import DegenerateInstanceError, ObservableError, ParseError, ProblemError
from .qsim import (
    NoiseModel,
    PauliSum,
    apply_pauli,
    circuit_unitary,
    dm_expectation,
    exact_ground_energy,
    num_qubits,
    run_encoded,
    run_encoded_noisy,
)


class EvalCounter:
    """Thread-safe tally of circuit evaluations, split by phase ("search", "path", ...)."""

    def __init__(self):
        self._lock = threading.Lock()
        self._counts: Counter[str] = Counter()

    def add(self, phase: str, k: int = 1):
        with self._lock:
            self._counts[phase] += k

    def __getitem__(self, phase: str) -> int:
        with self._lock:
            return self._counts[phase]

    @property
    def total(self) -> int:
        with self._lock:
            return sum(self._counts.values())

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return dict(self._counts)

    def __repr__(self) -> str:
        return f"EvalCounter({self.snapshot()})"


def parse_hamiltonian(text: str) -> PauliSum:
    """Parse ``<coefficient> <pauli letters>`` lines (``#`` starts a comment)."""
    terms = []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected '<coefficient> <pauli string>', got {line!r}", lineno)
        try:
            coef = float(parts[0])
        except ValueError:
            raise ParseError(f"coefficient {parts[0]!r} is not a real number", lineno) from None
        if not math.isfinite(coef):
            raise ParseError(f"coefficient {parts[0]!r} is not finite", lineno)
        letters = parts[1].upper()
        col = raw.index(parts[1]) + 1
        if set(letters) - set("IXYZ"):
            raise ParseError(f"invalid Pauli string {parts[1]!r}", lineno, col)
        if width is None:
            width = len(letters)
        elif len(letters) != width:
            raise ParseError(f"Pauli string length {len(letters)} differs from {width}", lineno, col)
        terms.append((coef, letters))
    if not terms:
        raise ParseError("no Hamiltonian terms found", 1)
    return PauliSum(tuple(terms))


def load_hamiltonian(path) -> PauliSum:
    with open(path) as fh:
        return parse_hamiltonian(fh.read())


def transverse_field_ising(n: int, coupling: float = 1.0, field: float = 0.5) -> PauliSum:
    """Open-chain ``coupling * sum Z_i Z_{i+1} + field * sum X_i``."""
    terms = []
    for i in range(n - 1):
        terms.append((coupling, "I" * i + "ZZ" + "I" * (n - i - 2)))
    for i in range(n):
        terms.append((field, "I" * i + "X" + "I" * (n - i - 1)))
    return PauliSum(tuple(terms))


class Problem:
    """Base class: subclasses define the expectations and how they combine into a cost."""

    name = "problem"
    n: int
    optimal_cost: float | None = None
    # True when the cost is affine in its expectation values (constant partials)
    linear_cost = True

    def __init__(self):
        self.counter = EvalCounter()

    # subclass hooks -----------------------------------------------------
    def state_expectations(self, psi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def density_expectations(self, rho: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def cost_from_expectations(self, values: np.ndarray) -> float:
        raise NotImplementedError

    def cost_partials(self, values: np.ndarray) -> np.ndarray:
        """Derivative of the cost with respect to each expectation value."""
        raise NotImplementedError

    def reward(self, cost: float) -> float:
        raise NotImplementedError

    # shared machinery ---------------------------------------------------
    def _check(self, circuit: Circuit):
        if circuit.n != self.n:
            raise ProblemError(f"{circuit.n}-qubit circuit for a {self.n}-qubit {self.name} problem")

    def _angles(self, circuit: Circuit, theta) -> np.ndarray | None:
        if theta is None:
            return None
        enc = circuit.encoded
        theta = np.asarray(theta, dtype=float)
        if theta.shape != enc.param_index.shape:
            raise ProblemError(f"expected {enc.param_index.size} parameters, got {theta.size}")
        full = enc.angles.copy()
        full[enc.param_index] = theta
        return full

    def expectations(self, circuit: Circuit, noise: NoiseModel | None = None, *,
                     theta=None, counter: EvalCounter | None = None,
                     phase: str = "search") -> np.ndarray:
        """Simulate once and return every expectation value.

        Counts one evaluation per expectation value, the number of circuits a
        device would have to run to estimate them separately.
        """
        self._check(circuit)
        angles = self._angles(circuit, theta)
        if noise is None or noise.is_identity:
            values = self.state_expectations(run_encoded(self.n, circuit.encoded, angles=angles))
        else:
            values = self.density_expectations(
                run_encoded_noisy(self.n, circuit.encoded, noise, angles=angles))
        (self.counter if counter is None else counter).add(phase, len(values))
        return values

    def cost(self, circuit: Circuit, noise: NoiseModel | None = None, *, theta=None,
             counter: EvalCounter | None = None, phase: str = "search") -> float:
        """Cost of ``circuit``; counts exactly one evaluation."""
        self._check(circuit)
        angles = self._angles(circuit, theta)
        if noise is None or noise.is_identity:
            values = self.state_expectations(run_encoded(self.n, circuit.encoded, angles=angles))
        else:
            values = self.density_expectations(
                run_encoded_noisy(self.n, circuit.encoded, noise, angles=angles))
        (self.counter if counter is None else counter).add(phase)
        return self.cost_from_expectations(values)

    def state_cost(self, psi: np.ndarray) -> float:
        return self.cost_from_expectations(self.state_expectations(psi))

    def density_cost(self, rho: np.ndarray) -> float:
        return self.cost_from_expectations(self.density_expectations(rho))


class VqeProblem(Problem):
    """Energy ``<psi|H|psi>``; reward is the negated energy."""

    name = "vqe"

    def __init__(self, hamiltonian: PauliSum, normalize_reward: bool = False):
        super().__init__()
        hamiltonian.require_hermitian()
        self.hamiltonian = hamiltonian
        self.n = hamiltonian.n
        self.normalize_reward = normalize_reward
        self._op = hamiltonian.operator
        self._sparse = hamiltonian.sparse
        self._optimal = None

    @property
    def optimal_cost(self) -> float | None:
        if self._optimal is None and self.n <= 12:
            self._optimal = exact_ground_energy(self.hamiltonian)
        return self._optimal

    def state_expectations(self, psi):
        val = np.vdot(psi, self._op @ psi)
        if abs(val.imag) > 1e-10 * max(1.0, self.hamiltonian.one_norm):
            raise ObservableError(f"energy has imaginary part {val.imag:.3e}")
        return np.array([val.real])

    def density_expectations(self, rho):
        return np.array([dm_expectation(rho, self._sparse)])

    def cost_from_expectations(self, values):
        return float(values[0])

    def cost_partials(self, values):
        return np.array([1.0])

    def reward(self, cost):
        if self.normalize_reward:
            return -cost / self.hamiltonian.one_norm
        return -cost


def vqe_cost(c: Circuit, p: VqeProblem, **kw) -> float:
    return p.cost(c, **kw)


def vqe_reward(cost: float) -> float:
    return -cost


class VqlsProblem(Problem):
    """Local VQLS cost for ``A = sum_m c_m A_m`` (Pauli strings) and ``|b> = U|0>``.

    ``C = 1 - <x|A^† U P U^† A|x> / <x|A^† A|x>`` with
    ``P = 1/2 + (1/2n) sum_j Z_j``; the reward is ``exp(-10 C)``.
    """

    name = "vqls"
    optimal_cost = 0.0
    linear_cost = False
    reward_sharpness = 10.0

    def __init__(self, coefficients, unitaries, b_prep: Circuit | None = None):
        super().__init__()
        coefficients = [complex(c) for c in coefficients]
        unitaries = [u.upper() for u in unitaries]
        if len(coefficients) != len(unitaries) or not unitaries:
            raise ProblemError("coefficients and unitaries must be non-empty and of equal length")
        n = len(unitaries[0])
        if any(len(u) != n for u in unitaries):
            raise ProblemError("all unitaries must act on the same number of qubits")
        if len(unitaries) > 4 * n * n:
            raise ProblemError(f"{len(unitaries)} terms exceeds the 4n^2 = {4 * n * n} limit")
        self.n = n
        self.coefficients = tuple(coefficients)
        self.unitaries = tuple(unitaries)
        self.b_prep = root_circuit(n) if b_prep is None else b_prep
        if self.b_prep.n != n:
            raise ProblemError("b_prep acts on a different number of qubits")

        dim = 1 << n
        a_mat = np.zeros((dim, dim), dtype=np.complex128)
        eye = np.eye(dim, dtype=np.complex128)
        for c, u in zip(coefficients, unitaries):
            a_mat += c * np.stack([apply_pauli(eye[:, k], u) for k in range(dim)], axis=1)
        u_mat = circuit_unitary(self.b_prep)
        ones = np.array([bin(i).count("1") for i in range(dim)])
        # sum_j Z_j is diagonal with entries (#zeros - #ones) of the basis index
        proj = 0.5 + ((n - ones) - ones) / (2.0 * n)
        upu = (u_mat * proj) @ u_mat.conj().T
        self.matrix = a_mat
        self._num = a_mat.conj().T @ upu @ a_mat
        self._den = a_mat.conj().T @ a_mat
        self._num = 0.5 * (self._num + self._num.conj().T)
        self._den = 0.5 * (self._den + self._den.conj().T)

    @classmethod
    def paper_instance(cls, alphas=(0.1, 1.0, 1.0, 0.2)) -> VqlsProblem:
        """4-qubit system ``a0 I + a1 X_1 + a2 X_2 + a3 Z_3 Z_4`` with ``|b> = H^{⊗4}|0>``."""
        return cls(alphas, ("IIII", "XIII", "IXII", "IIZZ"))

    def state_expectations(self, psi):
        num = np.vdot(psi, self._num @ psi)
        den = np.vdot(psi, self._den @ psi)
        return np.array([num.real, den.real])

    def density_expectations(self, rho):
        return np.array([dm_expectation(rho, self._num), dm_expectation(rho, self._den)])

    def cost_from_expectations(self, values):
        num, den = values
        if den <= 1e-14:
            raise DegenerateInstanceError(f"VQLS normalization {den:.3e} vanishes")
        return float(min(1.0, max(0.0, 1.0 - num / den)))

    def cost_partials(self, values):
        num, den = values
        return np.array([-1.0 / den, num / (den * den)])

    def reward(self, cost):
        return math.exp(-self.reward_sharpness * cost)

    def solution_state(self) -> np.ndarray:
        """Normalized ``A^{-1}|b>`` (reference for tests)."""
        b = run_encoded(self.n, self.b_prep.encoded)
        x = np.linalg.solve(self.matrix, b)
        return x / np.linalg.norm(x)


def vqls_cost(c: Circuit, p: VqlsProblem, **kw) -> float:
    return p.cost(c, **kw)


def vqls_reward(cost: float) -> float:
    return math.exp(-10.0 * cost)


class OracleProblem(Problem):
    """Approximate a target state; cost ``1 - |<target|psi>|^2``, reward the fidelity."""

    name = "oracle"
    optimal_cost = 0.0

    def __init__(self, target: np.ndarray, epsilon: float = 0.05):
        super().__init__()
        target = np.asarray(target, dtype=np.complex128)
        self.n = num_qubits(target)
        if abs(np.vdot(target, target).real - 1.0) > 1e-10:
            raise ProblemError("target state is not normalized")
        if not (0.0 < epsilon < 1.0):
            raise ProblemError(f"epsilon must lie in (0, 1), got {epsilon}")
        self.target = target
        self.epsilon = float(epsilon)

    @classmethod
    def from_circuit(cls, circuit: Circuit, epsilon: float = 0.05) -> OracleProblem:
        return cls(run_encoded(circuit.n, circuit.encoded), epsilon)

    def state_expectations(self, psi):
        return np.array([abs(np.vdot(self.target, psi)) ** 2])

    def density_expectations(self, rho):
        return np.array([float(np.vdot(self.target, rho @ self.target).real)])

    def cost_from_expectations(self, values):
        return float(min(1.0, max(0.0, 1.0 - values[0])))

    def cost_partials(self, values):
        return np.array([-1.0])

    def reward(self, cost):
        return 1.0 - cost

    def fidelity(self, circuit: Circuit) -> float:
        """Noiseless fidelity with the target; not counted as an evaluation."""
        self._check(circuit)
        psi = run_encoded(self.n, circuit.encoded)
        return float(abs(np.vdot(self.target, psi)) ** 2)

    def is_epsilon_approx(self, circuit: Circuit) -> bool:
        # the bound is inclusive; the slack absorbs rounding in the overlap
        return self.fidelity(circuit) >= 1.0 - self.epsilon - 1e-12


def oracle_cost(c: Circuit, p: OracleProblem, **kw) -> float:
    return p.cost(c, **kw)


def is_epsilon_approx(c: Circuit, p: OracleProblem) -> bool:
    return p.is_epsilon_approx(c)
