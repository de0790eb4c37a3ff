import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pwqas.acceptance import dense_pauli_sum, random_circuit
from pwqas.circuit import Circuit, cnot, h, root_circuit, rx, ry
from pwqas.errors import ParseError, ProblemError
from pwqas.problems import (
    EvalCounter,
    OracleProblem,
    VqeProblem,
    VqlsProblem,
    is_epsilon_approx,
    oracle_cost,
    parse_hamiltonian,
    transverse_field_ising,
    vqe_cost,
    vqe_reward,
    vqls_cost,
    vqls_reward,
)
from pwqas.qsim import NoiseModel, apply_circuit, exact_ground_energy, random_state, zero_state

# exact ground energy of sum_i Z_i Z_{i+1} + 0.5 sum_i X_i on 4 open sites (dense eigvalsh)
TFIM4 = -3.427034088908076


def test_parse_hamiltonian_examples():
    hsum = parse_hamiltonian("1.0 ZZ")
    assert exact_ground_energy(hsum) == pytest.approx(-1.0)
    assert parse_hamiltonian("0.5 Z\n0.5 X").n == 1
    with pytest.raises(ParseError) as info:
        parse_hamiltonian("1.0 ZZ\n0.5 XIX")
    assert info.value.line == 2


@pytest.mark.parametrize("text", ["abc ZZ", "1.0", "1.0 ZQ", "", "1.0 ZZ extra", "nan Z"])
def test_parse_hamiltonian_rejects(text):
    with pytest.raises(ParseError):
        parse_hamiltonian(text)


def test_tfim_oracle_value():
    hsum = transverse_field_ising(4)
    dense = float(np.linalg.eigvalsh(dense_pauli_sum(hsum)).min())
    assert dense == pytest.approx(TFIM4, abs=1e-12)
    assert exact_ground_energy(hsum) == pytest.approx(TFIM4, abs=1e-10)


def test_tfim_file_matches_builder():
    from pathlib import Path
    text = (Path(__file__).parents[1] / "data" / "tfim4.txt").read_text()
    assert exact_ground_energy(parse_hamiltonian(text)) == pytest.approx(TFIM4, abs=1e-10)


def test_h2_file_reference_energies():
    from pathlib import Path
    from pwqas.problems import load_hamiltonian
    h2 = load_hamiltonian(Path(__file__).parents[1] / "data" / "h2_sto3g.txt")
    assert exact_ground_energy(h2) == pytest.approx(-1.13619, abs=1e-5)
    hf = Circuit(4, (rx(0, math.pi), rx(1, math.pi)))
    assert VqeProblem(h2).cost(hf) == pytest.approx(-1.11735, abs=1e-5)


def test_vqe_cost_and_reward():
    p = VqeProblem(parse_hamiltonian("1.0 ZZ"))
    c = Circuit(2, (rx(0, math.pi),))
    assert vqe_cost(c, p) == pytest.approx(-1.0)
    assert vqe_reward(-1.0) == 1.0
    assert p.reward(-1.0) == 1.0


@given(st.integers(0, 2**32 - 1))
def test_vqe_cost_bounded_below(seed):
    rng = np.random.default_rng(seed)
    p = VqeProblem(transverse_field_ising(3))
    c = random_circuit(3, 15, rng)
    assert p.cost(c) >= exact_ground_energy(p.hamiltonian) - 1e-9


def test_normalized_reward():
    hsum = transverse_field_ising(3)
    p = VqeProblem(hsum, normalize_reward=True)
    assert p.reward(-2.0) == pytest.approx(2.0 / hsum.one_norm)


def test_qubit_mismatch():
    with pytest.raises(ProblemError):
        VqeProblem(transverse_field_ising(3)).cost(root_circuit(2))


def test_counter_counts_each_simulation():
    counter = EvalCounter()
    p = VqeProblem(transverse_field_ising(2))
    p.cost(root_circuit(2), counter=counter)
    p.cost(root_circuit(2), counter=counter, phase="path")
    assert counter.snapshot() == {"search": 1, "path": 1}
    assert counter.total == 2


def test_noisy_cost_goes_through_density_path():
    p = OracleProblem(zero_state(1))
    c = Circuit(1, ())
    assert p.cost(c, NoiseModel(0.1, 0.0)) == pytest.approx(0.1)
    assert p.cost(c, NoiseModel(0.0, 0.0)) == 0.0


def test_vqls_identity_with_root_is_solved():
    p = VqlsProblem([1.0], ["IIII"])
    assert vqls_cost(root_circuit(4), p) == pytest.approx(0.0, abs=1e-12)
    assert vqls_reward(0.0) == 1.0


def test_vqls_solution_state_has_zero_cost():
    p = VqlsProblem.paper_instance()
    x = p.solution_state()
    assert p.state_cost(x) == pytest.approx(0.0, abs=1e-10)
    assert p.state_cost(1j * x) == pytest.approx(0.0, abs=1e-10)


def test_vqls_matches_brute_force_formula():
    rng = np.random.default_rng(4)
    p = VqlsProblem.paper_instance()
    n = 4
    psi = random_state(n, rng)
    a = dense_pauli_sum(_as_sum(p))
    b = np.full(16, 0.25)
    # local projector with |b> = H^n |0>: P = 1/2 + 1/(2n) sum_j H_j Z_j H_j = 1/2 + 1/(2n) sum_j X_j
    xsum = sum(dense_pauli_sum(_single("X", j, n)) for j in range(n))
    proj = 0.5 * np.eye(16) + xsum / (2 * n)
    v = a @ psi
    expected = 1 - np.vdot(v, proj @ v).real / np.vdot(v, v).real
    assert p.state_cost(psi) == pytest.approx(expected, abs=1e-12)
    assert np.allclose(b, apply_circuit(root_circuit(4)))


def _single(letter, j, n):
    from pwqas.qsim import PauliSum
    return PauliSum(((1.0, "I" * j + letter + "I" * (n - j - 1)),))


def _as_sum(p):
    from pwqas.qsim import PauliSum
    return PauliSum(tuple((c.real, u) for c, u in zip(p.coefficients, p.unitaries)))


def test_vqls_validation():
    with pytest.raises(ProblemError):
        VqlsProblem([1.0, 2.0], ["I"])
    with pytest.raises(ProblemError):
        VqlsProblem([1.0] * 5, ["I", "X", "Y", "Z", "I"])  # more than 4 n^2 terms


def test_vqls_reward_sharpness():
    p = VqlsProblem.paper_instance()
    assert p.reward(0.1) == pytest.approx(math.exp(-1.0))


def test_oracle_examples():
    target = zero_state(4)
    p = OracleProblem(target, 0.05)
    assert oracle_cost(root_circuit(4), p) == pytest.approx(15 / 16)
    assert not is_epsilon_approx(root_circuit(4), p)
    same = OracleProblem.from_circuit(root_circuit(4))
    assert same.cost(root_circuit(4)) == pytest.approx(0.0, abs=1e-12)
    assert same.is_epsilon_approx(root_circuit(4))


def test_oracle_epsilon_boundary_inclusive():
    theta = 2 * math.acos(math.sqrt(0.95))
    p = OracleProblem(zero_state(1), 0.05)
    c = Circuit(1, (ry(0, theta),))
    assert p.fidelity(c) == pytest.approx(0.95, abs=1e-14)
    assert p.is_epsilon_approx(c)


def test_oracle_validation():
    with pytest.raises(ProblemError):
        OracleProblem(np.array([1.0, 1.0]))
    with pytest.raises(ProblemError):
        OracleProblem(zero_state(1), 1.5)


def test_expectations_count_per_value():
    counter = EvalCounter()
    p = VqlsProblem.paper_instance()
    vals = p.expectations(Circuit(4, (h(0), cnot(0, 1))), counter=counter, phase="finetune")
    assert counter["finetune"] == len(vals) == 2
