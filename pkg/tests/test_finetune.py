import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pwqas.acceptance import random_circuit
from pwqas.circuit import Circuit, GateKind, cnot, h, root_circuit, rx, ry
from pwqas.errors import OptimizerError
from pwqas.finetune import AdamState, adam_step, finetune, parameter_shift_gradient
from pwqas.problems import EvalCounter, OracleProblem, VqeProblem, VqlsProblem, parse_hamiltonian
from pwqas.qsim import NoiseModel, PauliSum, random_state

Z1 = VqeProblem(parse_hamiltonian("1.0 Z"))


def test_gradient_closed_form():
    # <Z> after RX(theta) is cos(theta)
    c = Circuit(1, (rx(0, math.pi / 2),))
    assert parameter_shift_gradient(c, Z1)[0] == pytest.approx(-1.0)
    assert parameter_shift_gradient(Circuit(1, (rx(0, 0.0),)), Z1)[0] == pytest.approx(0.0, abs=1e-15)
    assert parameter_shift_gradient(root_circuit(1), Z1).size == 0


def _fd(c, p, theta, noise=None, step=1e-5):
    out = np.empty_like(theta)
    for k in range(theta.size):
        hi, lo = theta.copy(), theta.copy()
        hi[k] += step
        lo[k] -= step
        out[k] = (p.cost(c, noise, theta=hi) - p.cost(c, noise, theta=lo)) / (2 * step)
    return out


KINDS = [GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.H, GateKind.CNOT]


@given(st.integers(0, 2**32 - 1))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    c = random_circuit(n, 10, rng, KINDS)
    if c.param_count == 0:
        c = c.append(ry(0, 0.3))
    terms = tuple((float(rng.normal()), "".join(rng.choice(list("IXYZ"), n))) for _ in range(4))
    for p in (VqeProblem(PauliSum(terms)), OracleProblem(random_state(n, rng)),
              VqlsProblem([1.0, 0.5], ["I" * n, "X" * n])):
        np.testing.assert_allclose(parameter_shift_gradient(c, p), _fd(c, p, c.angles), atol=1e-6)


def test_gradient_under_noise():
    rng = np.random.default_rng(1)
    c = random_circuit(2, 8, rng, KINDS).append(rx(1, 0.4))
    p = VqeProblem(PauliSum(((1.0, "ZZ"), (0.3, "XI"))))
    noise = NoiseModel(0.05, 0.02)
    np.testing.assert_allclose(parameter_shift_gradient(c, p, noise=noise),
                               _fd(c, p, c.angles, noise), atol=1e-6)


def test_gradient_eval_counts():
    c = Circuit(2, (rx(0, 0.1), cnot(0, 1), ry(1, 0.2), rx(1, 0.3)))
    counter = EvalCounter()
    parameter_shift_gradient(c, Z2, counter=counter)
    assert counter["finetune"] == 2 * 3
    counter = EvalCounter()
    parameter_shift_gradient(c, VqlsProblem([1.0, 0.4], ["II", "XZ"]), counter=counter)
    # numerator and denominator, shifted both ways per parameter, plus the unshifted pair
    assert counter["finetune"] == 4 * 3 + 2


Z2 = VqeProblem(parse_hamiltonian("1.0 ZI\n0.5 XX"))


def test_adam_first_step():
    theta, st_ = adam_step(np.array([0.0, 1.0]), np.array([1.0, -2.0]), AdamState.zeros(2))
    np.testing.assert_allclose(theta, [-0.01, 1.01])
    assert st_.t == 1


def test_adam_zero_gradient_and_determinism():
    s0 = AdamState.zeros(3)
    theta = np.array([0.1, 0.2, 0.3])
    same, _ = adam_step(theta, np.zeros(3), s0)
    np.testing.assert_array_equal(same, theta)
    a = adam_step(theta, np.array([0.3, -1, 2]), s0)
    b = adam_step(theta, np.array([0.3, -1, 2]), s0)
    np.testing.assert_array_equal(a[0], b[0])
    with pytest.raises(OptimizerError):
        adam_step(theta, np.zeros(2), s0)


def test_finetune_zero_steps():
    c = Circuit(1, (rx(0, 0.3),))
    tr = finetune(c, Z1, 0)
    assert tr.steps_used == 0 and tr.eval_increment == 0
    assert tr.circuit == c
    with pytest.raises(OptimizerError):
        finetune(c, Z1, -1)


def test_finetune_improves_and_keeps_structure():
    c = Circuit(2, (h(0), rx(0, 0.3), cnot(0, 1), ry(1, 2.0)))
    tr = finetune(c, Z2, 300)
    assert tr.best_cost <= Z2.cost(c) + 1e-12
    assert tr.best_cost == min(tr.costs)
    assert [(g.kind, g.target, g.control) for g in tr.circuit.gates] == \
        [(g.kind, g.target, g.control) for g in c.gates]
    assert all(0 <= a < 2 * math.pi for a in tr.circuit.angles)
    assert tr.eval_increment == 2 * c.param_count * tr.steps_used
    assert tr.monitor_evals == tr.steps_used + 1
    assert tr.best_cost == pytest.approx(Z2.cost(tr.circuit), abs=1e-12)


def test_finetune_early_stop_on_plateau():
    c = Circuit(1, (rx(0, 0.0),))  # stationary point of <Z>
    tr = finetune(c, Z1, 500)
    assert tr.steps_used == 10


def test_finetune_reaches_ground_state():
    p = VqeProblem(parse_hamiltonian("0.5 Z\n0.5 X"))
    tr = finetune(Circuit(1, (ry(0, 0.5),)), p, 500)
    assert tr.best_cost == pytest.approx(-1 / math.sqrt(2), abs=1e-4)
