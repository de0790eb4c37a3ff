"""Progressive-widening UCT over circuits.

Each tree node holds a circuit; each edge is an edit action sampled from the
add / swap / delete / change distribution. A node may hold at most
``ceil(beta * N**alpha)`` children, so the (infinite) action set is widened
gradually as the node is visited. Once a child of the current search root has
been visited ``rho * I`` times the search commits to it and continues from
there, sharing the single budget of ``I`` iterations.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .circuit import Circuit, EditAction, apply_action, effective_distribution, root_circuit, sample_action
from .config import SearchConfig
from .errors import ObservableError, ProblemError
from .problems import EvalCounter, Problem
from .qsim import NoiseModel

log = logging.getLogger(__name__)


class TreeNode:
    __slots__ = ("circuit", "parent", "action", "children", "visits", "total_reward",
                 "cost", "reward")

    def __init__(self, circuit: Circuit, parent: TreeNode | None = None,
                 action: EditAction | None = None, cost: float = math.nan,
                 reward: float = 0.0):
        self.circuit = circuit
        self.parent = parent
        self.action = action
        self.children: list[TreeNode] = []
        self.visits = 0
        self.total_reward = 0.0
        self.cost = cost
        self.reward = reward  # reward credited in the iteration that created the node

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def mean_reward(self) -> float:
        return self.total_reward / self.visits

    def depth_in_tree(self) -> int:
        d, node = 0, self
        while node.parent is not None:
            d, node = d + 1, node.parent
        return d

    def __repr__(self) -> str:
        return (f"TreeNode(gates={self.circuit.gate_count}, N={self.visits}, "
                f"Q={self.total_reward:.4g}, cost={self.cost:.6g}, children={len(self.children)})")


def iter_nodes(root: TreeNode) -> Iterator[TreeNode]:
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


def ucb(parent: TreeNode, child: TreeNode, c: float) -> float:
    """``Q/N + c * sqrt(ln N_parent / N)`` for an edge parent -> child."""
    if child.visits < 1 or parent.visits < 1:
        raise RuntimeError("UCB requested for an unvisited node")
    return child.total_reward / child.visits + c * math.sqrt(math.log(parent.visits) / child.visits)


def allowed_children(node: TreeNode, cfg: SearchConfig) -> int:
    if cfg.fixed_branching is not None:
        return cfg.fixed_branching
    return math.ceil(cfg.pw_coefficient * max(node.visits, 1) ** cfg.pw_exponent)


@dataclass
class SearchResult:
    best_path: list[tuple[Circuit, float]]
    best_circuit: Circuit
    best_cost: float
    committed: list[int]  # iteration index of each commitment
    eval_count: int
    eval_breakdown: dict[str, int]
    iteration_log: list[float]
    root: TreeNode = field(repr=False)
    root_evaluations: int = 1

    @property
    def path_costs(self) -> list[float]:
        return [c for _, c in self.best_path]


class Search:
    """One search run: an isolated tree, RNG and evaluation counter."""

    def __init__(self, problem: Problem, cfg: SearchConfig, counter: EvalCounter | None = None,
                 initial: Circuit | None = None, noise: NoiseModel | None = None):
        self.problem = problem
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.counter = EvalCounter() if counter is None else counter
        self.noise = cfg.noise if noise is None else noise
        self.base_distribution = cfg.action_distribution
        self.commit_threshold = cfg.commit_fraction * cfg.iterations

        circuit = root_circuit(problem.n) if initial is None else initial
        cost = self._evaluate(circuit)
        self.root = TreeNode(circuit, cost=cost, reward=problem.reward(cost))
        self.search_root = self.root
        self.warmed = circuit.gate_count >= 2 * problem.n
        self.best_cost = cost
        self.best_circuit = circuit
        self.iteration_log: list[float] = []
        self.committed: list[int] = []
        self.iterations_done = 0

    def _evaluate(self, circuit: Circuit, phase: str = "search") -> float:
        return self.problem.cost(circuit, self.noise, counter=self.counter, phase=phase)

    def _note(self, circuit: Circuit, cost: float):
        if cost < self.best_cost:
            self.best_cost = cost
            self.best_circuit = circuit

    # the four phases -----------------------------------------------------
    def select(self) -> TreeNode:
        node = self.search_root
        c = self.cfg.exploration
        while len(node.children) >= allowed_children(node, self.cfg):
            best, best_score = None, -math.inf
            for child in node.children:
                score = ucb(node, child, c)
                if score > best_score:
                    best, best_score = child, score
            node = best
        return node

    def _sample(self, circuit: Circuit) -> Circuit:
        dist = effective_distribution(circuit, self.base_distribution, self.cfg, self.warmed)
        action = sample_action(circuit, dist, self.rng, self.cfg.angle_deviation)
        return action, apply_action(circuit, action)

    def expand(self, node: TreeNode) -> TreeNode:
        action, circuit = self._sample(node.circuit)
        cost = self._evaluate(circuit)
        child = TreeNode(circuit, parent=node, action=action, cost=cost,
                         reward=self.problem.reward(cost))
        node.children.append(child)
        self._note(circuit, cost)
        if circuit.gate_count >= 2 * self.problem.n:
            self.warmed = True
        return child

    def rollout(self, node: TreeNode) -> float:
        """Best reward along ``rollout_steps`` random edits; states are not stored."""
        reward = node.reward
        circuit = node.circuit
        for _ in range(self.cfg.rollout_steps):
            _, circuit = self._sample(circuit)
            cost = self._evaluate(circuit)
            self._note(circuit, cost)
            reward = max(reward, self.problem.reward(cost))
        return reward

    @staticmethod
    def backpropagate(node: TreeNode, reward: float):
        # walks to the original root, so committed ancestors keep N >= sum of child visits
        while node is not None:
            node.visits += 1
            node.total_reward += reward
            node = node.parent

    def iterate(self):
        leaf = self.select()
        try:
            child = self.expand(leaf)
            reward = self.rollout(child) if self.cfg.rollout_steps else child.reward
        except (ProblemError, ObservableError) as exc:
            log.warning("iteration %d aborted: %s", self.iterations_done, exc)
        else:
            child.reward = reward
            self.backpropagate(child, reward)
        self.iterations_done += 1
        self.iteration_log.append(self.best_cost)

    def maybe_commit(self) -> bool:
        ready = [ch for ch in self.search_root.children
                 if ch.visits >= self.commit_threshold - 1e-9]
        if not ready:
            return False
        self.search_root = max(ready, key=lambda ch: (ch.visits, ch.total_reward))
        self.committed.append(self.iterations_done)
        return True

    # results --------------------------------------------------------------
    def best_path_nodes(self) -> list[TreeNode]:
        node = self.root
        path = [node]
        while node.children:
            node = max(node.children, key=lambda ch: ch.total_reward)
            path.append(node)
        return path

    def best_path(self) -> tuple[list[tuple[Circuit, float]], Circuit, float]:
        """Follow the highest-Q child from the root; re-evaluate every circuit on the way."""
        path = []
        for node in self.best_path_nodes():
            path.append((node.circuit, self._evaluate(node.circuit, phase="path")))
        best = min(range(len(path)), key=lambda i: path[i][1])
        return path, path[best][0], path[best][1]

    def run(self) -> SearchResult:
        while self.iterations_done < self.cfg.iterations:
            self.iterate()
            self.maybe_commit()
        path, best_circuit, best_cost = self.best_path()
        return SearchResult(
            best_path=path,
            best_circuit=best_circuit,
            best_cost=best_cost,
            committed=list(self.committed),
            eval_count=self.counter.total,
            eval_breakdown=self.counter.snapshot(),
            iteration_log=self.iteration_log,
            root=self.root,
        )


def search(problem: Problem, cfg: SearchConfig, counter: EvalCounter | None = None,
           initial: Circuit | None = None, noise: NoiseModel | None = None) -> SearchResult:
    """Run one search; ``noise`` overrides the model built from ``cfg``."""
    return Search(problem, cfg, counter=counter, initial=initial, noise=noise).run()


def audit_tree(root: TreeNode, cfg: SearchConfig) -> list[str]:
    """Structural invariants of a finished tree; returns a list of violations."""
    problems = []
    for node in iter_nodes(root):
        k = len(node.children)
        cap = allowed_children(node, cfg)
        if k > cap:
            problems.append(f"{node!r} has {k} children but the cap is {cap}")
        if node.visits < k:
            problems.append(f"{node!r} has fewer visits than children")
        child_visits = sum(ch.visits for ch in node.children)
        own = 0 if node is root else 1
        if node.visits != own + child_visits:
            problems.append(f"{node!r}: visits {node.visits} != {own} + {child_visits}")
        if node is not root:
            expected = node.reward + math.fsum(ch.total_reward for ch in node.children)
            if not math.isclose(node.total_reward, expected, rel_tol=1e-9, abs_tol=1e-9):
                problems.append(f"{node!r}: Q {node.total_reward} != {expected}")
    return problems
