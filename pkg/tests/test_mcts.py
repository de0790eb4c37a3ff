import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pwqas.circuit import Circuit, cnot, h, root_circuit, ry
from pwqas.config import SearchConfig
from pwqas.errors import ConfigurationError
from pwqas.mcts import Search, TreeNode, allowed_children, audit_tree, iter_nodes, search, ucb
from pwqas.problems import OracleProblem, VqeProblem, transverse_field_ising
from pwqas.qsim import NoiseModel, apply_circuit


@pytest.fixture(scope="module")
def toy():
    return OracleProblem(apply_circuit(Circuit(3, (h(0), cnot(0, 1), ry(2, 0.7)))))


def test_widening_cap():
    cfg = SearchConfig()
    node = TreeNode(root_circuit(1))
    for visits, cap in [(0, 1), (1, 1), (2, 2), (10, 2), (100, 4), (1000, 8)]:
        node.visits = visits
        assert allowed_children(node, cfg) == math.ceil(max(visits, 1) ** 0.3) == cap
    assert allowed_children(node, cfg.replace(fixed_branching=5)) == 5


def test_ucb_formula():
    parent, child = TreeNode(root_circuit(1)), TreeNode(root_circuit(1))
    parent.visits, child.visits, child.total_reward = 10, 4, 2.0
    assert ucb(parent, child, 0.4) == pytest.approx(0.5 + 0.4 * math.sqrt(math.log(10) / 4))
    child.visits = 0
    with pytest.raises(RuntimeError):
        ucb(parent, child, 0.4)


def test_search_invariants(toy):
    cfg = SearchConfig(iterations=3000, seed=2)
    res = search(toy, cfg)
    assert audit_tree(res.root, cfg) == []
    assert sum(1 for _ in iter_nodes(res.root)) == 3001
    assert res.root.visits == 3000
    log = res.iteration_log
    assert len(log) == 3000 and all(b <= a for a, b in zip(log, log[1:]))
    assert res.best_cost == min(res.path_costs)
    assert res.best_path[0][0] == root_circuit(3)


def test_fixed_branching_audit(toy):
    cfg = SearchConfig(iterations=2000, seed=3, fixed_branching=4)
    res = search(toy, cfg)
    assert audit_tree(res.root, cfg) == []
    assert max(len(n.children) for n in iter_nodes(res.root)) <= 4


def test_eval_accounting(toy):
    cfg = SearchConfig(iterations=1500, seed=4)
    res = search(toy, cfg)
    assert res.eval_breakdown["search"] == cfg.iterations + 1
    assert res.eval_breakdown["path"] == len(res.best_path)
    assert res.eval_count == sum(res.eval_breakdown.values())


def test_commitments_follow_threshold(toy):
    cfg = SearchConfig(iterations=2000, seed=5, commit_fraction=0.05)
    s = Search(toy, cfg)
    res = s.run()
    assert res.committed, "expected at least one commitment"
    # the committed chain is a path from the root
    node = s.search_root
    while node.parent is not None:
        assert node.visits >= 0.05 * cfg.iterations - 1e-9 or node is s.search_root
        node = node.parent
    assert node is s.root


def test_warm_up_is_add_only(toy):
    from pwqas.circuit import ActionKind
    s = Search(toy, SearchConfig(iterations=50, seed=0))
    seen = set()
    while not s.warmed:
        s.iterate()
        new = [n for n in iter_nodes(s.root) if n is not s.root and id(n) not in seen]
        assert len(new) == 1 and new[0].action.kind is ActionKind.ADD
        seen.add(id(new[0]))
    # the root holds 3 gates, so warm-up ends when some circuit reaches 2n = 6 gates
    assert max(n.circuit.gate_count for n in iter_nodes(s.root)) == 6


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_same_seed_same_result(seed):
    p = VqeProblem(transverse_field_ising(2))
    cfg = SearchConfig(iterations=300, seed=seed)
    a, b = search(p, cfg), search(p, cfg)
    assert a.path_costs == b.path_costs
    assert a.best_circuit == b.best_circuit
    assert a.committed == b.committed


def test_identity_noise_equals_noiseless():
    p = VqeProblem(transverse_field_ising(3))
    cfg = SearchConfig(iterations=800, seed=8)
    a = search(p, cfg)
    b = search(p, cfg, noise=NoiseModel(0.0, 0.0))
    assert a.path_costs == b.path_costs and a.best_circuit == b.best_circuit


def test_noisy_search_runs():
    p = VqeProblem(transverse_field_ising(2))
    res = search(p, SearchConfig(iterations=200, seed=1, noise_bitflip=0.05, noise_depolarizing=0.01))
    assert audit_tree(res.root, SearchConfig(iterations=200)) == []


def test_rollouts_use_max_reward():
    p = VqeProblem(transverse_field_ising(2))
    cfg = SearchConfig(iterations=200, seed=1, rollout_steps=3)
    res = search(p, cfg)
    assert res.eval_breakdown["search"] == 1 + 200 * 4
    assert audit_tree(res.root, cfg) == []


def test_search_finds_simple_target():
    target = apply_circuit(Circuit(2, (h(0), cnot(0, 1))))
    p = OracleProblem(target)
    res = search(p, SearchConfig(iterations=3000, seed=0))
    assert res.best_cost < 0.05


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SearchConfig(iterations=0)
    with pytest.raises(ConfigurationError):
        SearchConfig(p_add=0.9)
    with pytest.raises(ConfigurationError):
        SearchConfig(pw_exponent=1.5)
    with pytest.raises(ConfigurationError):
        SearchConfig.from_dict({"nope": 1})
    assert SearchConfig.from_dict({"iterations": "20", "fixed_branching": "none"}).iterations == 20
