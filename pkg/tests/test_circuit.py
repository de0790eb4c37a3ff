import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pwqas.acceptance import random_circuit
from pwqas.circuit import (
    ADD_ONLY,
    DEFAULT_DISTRIBUTION,
    TWO_PI,
    ActionDistribution,
    ActionKind,
    Circuit,
    EditAction,
    Gate,
    GateKind,
    apply_action,
    cnot,
    depth,
    effective_distribution,
    h,
    metrics,
    parse,
    root_circuit,
    rx,
    ry,
    rz,
    sample_action,
    serialize,
    t,
    wrap_angle,
)
from pwqas.config import SearchConfig
from pwqas.errors import ActionError, CircuitError, ConfigurationError, ParseError, SamplingError

seeds = st.integers(0, 2**32 - 1)


def test_root_circuit():
    c = root_circuit(4)
    assert [g.kind for g in c.gates] == [GateKind.H] * 4
    assert metrics(c) == (0, 0, 4)
    assert depth(c) == 1


def test_depth_counts_layers():
    c = Circuit(3, (h(0), h(1), cnot(0, 1), rx(2, 0.1), cnot(1, 2), t(0)))
    assert depth(c) == 3
    assert Circuit(2, ()).depth == 0


def test_gate_validation():
    with pytest.raises(CircuitError):
        cnot(1, 1)
    with pytest.raises(CircuitError):
        Gate(GateKind.RX, 0)
    with pytest.raises(CircuitError):
        Gate(GateKind.H, 0, angle=0.5)
    with pytest.raises(CircuitError):
        Circuit(2, (h(2),))
    with pytest.raises(CircuitError):
        rx(0, math.inf)


def test_metrics_and_angles():
    c = Circuit(2, (h(0), rx(0, 0.1), cnot(0, 1), rz(1, 0.2)))
    assert metrics(c) == (1, 2, 4)
    np.testing.assert_allclose(c.angles, [0.1, 0.2])
    d = c.with_angles([7.0, -1.0])
    assert d.gates[1].angle == pytest.approx(7.0 - TWO_PI)
    assert d.gates[3].angle == pytest.approx(TWO_PI - 1.0)
    assert c.with_angles([7.0, -1.0], wrap=False).gates[1].angle == 7.0
    with pytest.raises(Exception):
        c.with_angles([1.0])


@given(st.floats(-100, 100))
def test_wrap_angle_range(x):
    w = wrap_angle(x)
    assert 0.0 <= w < TWO_PI
    assert math.isclose(math.cos(w), math.cos(x), abs_tol=1e-9)


def test_serialize_round_trip_root():
    text = serialize(root_circuit(2))
    assert text == "qubits 2\nh 0\nh 1\n"
    assert parse(text) == root_circuit(2)


@given(seeds, st.integers(1, 5))
def test_serialize_round_trip_exact(seed, n):
    c = random_circuit(n, 20, np.random.default_rng(seed))
    back = parse(serialize(c))
    assert back == c  # 17 significant digits reproduce every double


def test_parse_comments_and_case():
    c = parse("# header comment\nqubits 2\n\nH 0   # trailing\ncx 0 1\nry 1 0.5\n")
    assert c == Circuit(2, (h(0), cnot(0, 1), ry(1, 0.5)))


@pytest.mark.parametrize("text,line,col", [
    ("h 0\n", 1, 1),
    ("qubits 2\nfoo 0\n", 2, 1),
    ("qubits 2\nrx 0\n", 2, 1),
    ("qubits 2\ncx 0 5\n", 2, 6),
    ("qubits 2\nrx 0 abc\n", 2, 6),
    ("qubits 2\nh 1\n  ry x 1.0\n", 3, 6),
    ("", 1, 1),
])
def test_parse_errors_locate_problem(text, line, col):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.line == line
    assert info.value.column == col
    assert f"line {line}, column {col}" in str(info.value)


def test_action_distribution_validation():
    with pytest.raises(ConfigurationError):
        ActionDistribution(0.5, 0.5, 0.5, 0.0)
    with pytest.raises(ConfigurationError):
        ActionDistribution(-0.1, 0.5, 0.5, 0.1)
    with pytest.raises(SamplingError):
        ADD_ONLY.without_add()
    d = DEFAULT_DISTRIBUTION.without_add()
    assert d.p_add == 0 and sum(d.as_tuple()) == pytest.approx(1.0)
    assert d.p_swap == pytest.approx(0.4)


def test_effective_distribution_phases():
    cfg = SearchConfig(max_depth=3)
    shallow, deep = root_circuit(2), Circuit(2, (h(0),) * 3)
    assert effective_distribution(shallow, DEFAULT_DISTRIBUTION, cfg, False) == ADD_ONLY
    assert effective_distribution(shallow, DEFAULT_DISTRIBUTION, cfg, True) == DEFAULT_DISTRIBUTION
    assert effective_distribution(deep, DEFAULT_DISTRIBUTION, cfg, True).p_add == 0.0
    # during warm-up add is the only action, so the depth cap cannot remove it
    assert effective_distribution(deep, DEFAULT_DISTRIBUTION, cfg, False) == ADD_ONLY
    cnots = Circuit(2, (cnot(0, 1),))
    capped = SearchConfig(max_cnots=1)
    assert effective_distribution(cnots, DEFAULT_DISTRIBUTION, capped, True).p_add == 0.0


@given(seeds)
def test_sampled_actions_apply_cleanly(seed):
    rng = np.random.default_rng(seed)
    c = root_circuit(3)
    for _ in range(60):
        a = sample_action(c, DEFAULT_DISTRIBUTION, rng, 0.2)
        new = apply_action(c, a)
        if a.kind is ActionKind.ADD:
            assert new.gate_count == c.gate_count + 1
            assert a.gate.kind in (GateKind.CNOT, GateKind.RX, GateKind.RY, GateKind.RZ)
            if a.gate.kind.parameterized:
                assert 0 <= a.gate.angle < TWO_PI
        elif a.kind is ActionKind.DELETE:
            assert new.gate_count == c.gate_count - 1
        elif a.kind is ActionKind.SWAP:
            assert new.gate_count == c.gate_count
        else:
            assert new.gate_count == c.gate_count
            assert 0 <= new.gates[a.position].angle < TWO_PI
        c = new if new.gate_count else root_circuit(3)


def test_single_qubit_pool_has_no_cnot():
    rng = np.random.default_rng(0)
    kinds = {sample_action(root_circuit(1), ADD_ONLY, rng, 0.2).gate.kind for _ in range(200)}
    assert kinds == {GateKind.RX, GateKind.RY, GateKind.RZ}


def test_action_frequencies_follow_distribution():
    rng = np.random.default_rng(11)
    c = Circuit(2, (h(0), rx(0, 0.3), cnot(0, 1)))
    kinds = [sample_action(c, DEFAULT_DISTRIBUTION, rng, 0.2).kind for _ in range(20000)]
    freq = {k: kinds.count(k) / len(kinds) for k in ActionKind}
    for k, p in zip(ActionKind, DEFAULT_DISTRIBUTION.as_tuple()):
        assert freq[k] == pytest.approx(p, abs=0.015)


def test_infeasible_classes_resampled():
    rng = np.random.default_rng(3)
    c = Circuit(2, (h(0),))  # nothing to change
    for _ in range(200):
        assert sample_action(c, DEFAULT_DISTRIBUTION, rng, 0.2).kind is not ActionKind.CHANGE
    with pytest.raises(SamplingError):
        sample_action(Circuit(2, ()), ActionDistribution(0, 0.5, 0.5, 0), rng, 0.2)


def test_change_and_stale_actions():
    c = Circuit(1, (h(0), rx(0, 6.2)))
    assert apply_action(c, EditAction(ActionKind.CHANGE, position=1, epsilon=0.2)).gates[1].angle == \
        pytest.approx(6.4 - TWO_PI)
    with pytest.raises(ActionError):
        apply_action(c, EditAction(ActionKind.CHANGE, position=0, epsilon=0.1))
    with pytest.raises(ActionError):
        apply_action(c, EditAction(ActionKind.DELETE, position=5))
    added = apply_action(root_circuit(1), EditAction(ActionKind.ADD, gate=rx(0, 0.3)))
    assert added == Circuit(1, (h(0), rx(0, 0.3)))
