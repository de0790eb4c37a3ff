"""Parameter-shift gradients and Adam fine-tuning of a circuit's angles."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .circuit import Circuit
from .errors import OptimizerError
from .problems import EvalCounter, Problem
from .qsim import NoiseModel

SHIFT = math.pi / 2


@dataclass(frozen=True)
class AdamState:
    t: int
    m: np.ndarray
    v: np.ndarray
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size: int, **hyper) -> AdamState:
        return cls(0, np.zeros(size), np.zeros(size), **hyper)


def adam_step(theta: np.ndarray, grad: np.ndarray, state: AdamState) -> tuple[np.ndarray, AdamState]:
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if theta.shape != grad.shape or theta.shape != state.m.shape:
        raise OptimizerError(f"shape mismatch: theta {theta.shape}, grad {grad.shape}, "
                             f"moments {state.m.shape}")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_theta = theta - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_theta, replace(state, t=t, m=m, v=v)


def parameter_shift_gradient(circuit: Circuit, problem: Problem, theta=None,
                             noise: NoiseModel | None = None,
                             counter: EvalCounter | None = None,
                             phase: str = "finetune") -> np.ndarray:
    """Exact gradient of the cost with respect to the rotation angles.

    Each expectation value the cost depends on is differentiated with the
    two-point shift rule (``(f(θ+π/2) - f(θ-π/2)) / 2``) and combined through
    the cost's partial derivatives. For single-expectation costs (VQE, state
    approximation) this is exactly 2 evaluations per parameter; costs built
    from a ratio of expectations also need the unshifted values.
    """
    theta = circuit.angles if theta is None else np.asarray(theta, dtype=float)
    l = theta.size
    if l == 0:
        return np.zeros(0)
    kw = dict(noise=noise, counter=counter, phase=phase)
    if problem.linear_cost:
        partials = problem.cost_partials(None)
    else:
        partials = problem.cost_partials(problem.expectations(circuit, theta=theta, **kw))
    grad = np.empty(l)
    for i in range(l):
        plus = theta.copy()
        plus[i] += SHIFT
        minus = theta.copy()
        minus[i] -= SHIFT
        d = 0.5 * (problem.expectations(circuit, theta=plus, **kw)
                   - problem.expectations(circuit, theta=minus, **kw))
        grad[i] = float(np.dot(partials, d))
    return grad


@dataclass
class FineTuneTrace:
    costs: list[float]  # cost before the first step, then after every step
    circuit: Circuit    # best circuit seen, angles wrapped into [0, 2π)
    best_cost: float
    steps_used: int
    eval_increment: int  # gradient evaluations
    monitor_evals: int   # per-step cost evaluations used for tracking/early stopping
    breakdown: dict[str, int] = field(default_factory=dict)


def finetune(circuit: Circuit, problem: Problem, max_steps: int, *,
             noise: NoiseModel | None = None, counter: EvalCounter | None = None,
             learning_rate: float = 0.01, beta1: float = 0.9, beta2: float = 0.999,
             eps: float = 1e-8, plateau_tol: float = 1e-9, plateau_patience: int = 10
             ) -> FineTuneTrace:
    """Adam on the angles of ``circuit`` for at most ``max_steps`` steps.

    Stops early once the cost changes by less than ``plateau_tol`` for
    ``plateau_patience`` consecutive steps. Returns the best circuit seen.
    """
    if max_steps < 0:
        raise OptimizerError("max_steps must be >= 0")
    counter = EvalCounter() if counter is None else counter
    before = counter.snapshot()
    theta = circuit.angles
    cost = problem.cost(circuit, noise, theta=theta, counter=counter, phase="monitor")
    costs = [cost]
    best_cost, best_theta = cost, theta.copy()
    state = AdamState.zeros(theta.size, learning_rate=learning_rate, beta1=beta1,
                            beta2=beta2, eps=eps)
    steps = 0
    flat = 0
    if theta.size:
        for _ in range(max_steps):
            grad = parameter_shift_gradient(circuit, problem, theta, noise=noise, counter=counter)
            theta, state = adam_step(theta, grad, state)
            steps += 1
            new_cost = problem.cost(circuit, noise, theta=theta, counter=counter, phase="monitor")
            costs.append(new_cost)
            if new_cost < best_cost:
                best_cost, best_theta = new_cost, theta.copy()
            flat = flat + 1 if abs(new_cost - cost) < plateau_tol else 0
            cost = new_cost
            if flat >= plateau_patience:
                break
    after = counter.snapshot()
    delta = {k: after.get(k, 0) - before.get(k, 0) for k in after if after.get(k, 0) != before.get(k, 0)}
    return FineTuneTrace(
        costs=costs,
        circuit=circuit.with_angles(best_theta, wrap=True),
        best_cost=best_cost,
        steps_used=steps,
        eval_increment=delta.get("finetune", 0),
        monitor_evals=delta.get("monitor", 0),
        breakdown=delta,
    )
