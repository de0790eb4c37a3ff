"""Circuit data model, edit actions and the text serialization format.

Circuits are immutable: every edit returns a new :class:`Circuit`. Qubit 0 is
the most significant bit of a basis index (see :mod:`pwqas.qsim`).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ActionError, CircuitError, ConfigurationError, ParseError, SamplingError

TWO_PI = 2.0 * math.pi


class GateKind(str, enum.Enum):
    CNOT = "cx"
    RX = "rx"
    RY = "ry"
    RZ = "rz"
    H = "h"
    S = "s"
    T = "t"

    @property
    def parameterized(self) -> bool:
        return self in _ROTATIONS


_ROTATIONS = frozenset({GateKind.RX, GateKind.RY, GateKind.RZ})

# Integer codes consumed by the compiled simulation kernels.
KIND_CODE = {
    GateKind.CNOT: 0,
    GateKind.RX: 1,
    GateKind.RY: 2,
    GateKind.RZ: 3,
    GateKind.H: 4,
    GateKind.S: 5,
    GateKind.T: 6,
}

# Gate pool available to the search (CNOT plus the three rotations).
SEARCH_GATES = (GateKind.CNOT, GateKind.RX, GateKind.RY, GateKind.RZ)


def wrap_angle(theta: float) -> float:
    """Map an angle into [0, 2π)."""
    w = math.fmod(theta, TWO_PI)
    if w < 0.0:
        w += TWO_PI
    # fmod of a tiny negative value can round up to exactly 2π
    if w >= TWO_PI:
        w = 0.0
    return w


@dataclass(frozen=True, slots=True)
class Gate:
    kind: GateKind
    target: int
    control: int | None = None
    angle: float | None = None

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.target < 0:
            raise CircuitError(f"negative target qubit {self.target}")
        if kind is GateKind.CNOT:
            if self.control is None:
                raise CircuitError("CNOT requires a control qubit")
            if self.control < 0 or self.control == self.target:
                raise CircuitError(f"invalid CNOT control {self.control} for target {self.target}")
        elif self.control is not None:
            raise CircuitError(f"{kind.name} takes no control qubit")
        if kind.parameterized:
            if self.angle is None or not math.isfinite(self.angle):
                raise CircuitError(f"{kind.name} requires a finite angle")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise CircuitError(f"{kind.name} takes no angle")

    @property
    def qubits(self) -> tuple[int, ...]:
        if self.control is None:
            return (self.target,)
        return (self.control, self.target)

    def with_angle(self, angle: float) -> Gate:
        return Gate(self.kind, self.target, self.control, angle)

    def __str__(self) -> str:
        if self.kind is GateKind.CNOT:
            return f"cx {self.control} {self.target}"
        if self.kind.parameterized:
            return f"{self.kind.value} {self.target} {self.angle:.17g}"
        return f"{self.kind.value} {self.target}"


def cnot(control: int, target: int) -> Gate:
    return Gate(GateKind.CNOT, target, control=control)


def rx(q: int, theta: float) -> Gate:
    return Gate(GateKind.RX, q, angle=theta)


def ry(q: int, theta: float) -> Gate:
    return Gate(GateKind.RY, q, angle=theta)


def rz(q: int, theta: float) -> Gate:
    return Gate(GateKind.RZ, q, angle=theta)


def h(q: int) -> Gate:
    return Gate(GateKind.H, q)


def s(q: int) -> Gate:
    return Gate(GateKind.S, q)


def t(q: int) -> Gate:
    return Gate(GateKind.T, q)


class EncodedCircuit(NamedTuple):
    """Flat arrays describing a circuit for the simulation kernels."""

    kinds: np.ndarray
    targets: np.ndarray
    controls: np.ndarray
    angles: np.ndarray
    param_index: np.ndarray


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise CircuitError(f"qubit count must be >= 1, got {self.n}")
        gates = tuple(self.gates)
        object.__setattr__(self, "gates", gates)
        for pos, g in enumerate(gates):
            if not isinstance(g, Gate):
                raise CircuitError(f"gate {pos} is not a Gate: {g!r}")
            for q in g.qubits:
                if q >= self.n:
                    raise CircuitError(f"gate {pos} ({g}) addresses qubit {q} >= {self.n}")

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    @property
    def gate_count(self) -> int:
        return len(self.gates)

    @cached_property
    def param_positions(self) -> tuple[int, ...]:
        return tuple(i for i, g in enumerate(self.gates) if g.kind.parameterized)

    @property
    def param_count(self) -> int:
        return len(self.param_positions)

    @property
    def cnot_count(self) -> int:
        return sum(1 for g in self.gates if g.kind is GateKind.CNOT)

    @property
    def angles(self) -> np.ndarray:
        return np.array([self.gates[i].angle for i in self.param_positions], dtype=float)

    @cached_property
    def depth(self) -> int:
        return depth(self)

    @cached_property
    def encoded(self) -> EncodedCircuit:
        L = len(self.gates)
        kinds = np.empty(L, dtype=np.int64)
        targets = np.empty(L, dtype=np.int64)
        controls = np.full(L, -1, dtype=np.int64)
        angles = np.zeros(L, dtype=np.float64)
        for i, g in enumerate(self.gates):
            kinds[i] = KIND_CODE[g.kind]
            targets[i] = g.target
            if g.control is not None:
                controls[i] = g.control
            if g.angle is not None:
                angles[i] = g.angle
        return EncodedCircuit(kinds, targets, controls, angles, np.array(self.param_positions, dtype=np.int64))

    def with_angles(self, theta: Sequence[float], wrap: bool = True) -> Circuit:
        """Replace the parameter vector, keeping the gate structure."""
        pos = self.param_positions
        if len(theta) != len(pos):
            raise CircuitError(f"expected {len(pos)} angles, got {len(theta)}")
        gates = list(self.gates)
        for p, a in zip(pos, theta):
            gates[p] = gates[p].with_angle(wrap_angle(a) if wrap else float(a))
        return Circuit(self.n, tuple(gates))

    def append(self, gate: Gate) -> Circuit:
        return Circuit(self.n, self.gates + (gate,))

    def __str__(self) -> str:
        return serialize(self)


def root_circuit(n: int) -> Circuit:
    """Hadamard on every qubit: the default starting point of a search."""
    if n < 1:
        raise ConfigurationError(f"qubit count must be >= 1, got {n}")
    return Circuit(n, tuple(h(q) for q in range(n)))


def depth(c: Circuit) -> int:
    level = [0] * c.n
    best = 0
    for g in c.gates:
        d = max(level[q] for q in g.qubits) + 1
        for q in g.qubits:
            level[q] = d
        best = max(best, d)
    return best


class Metrics(NamedTuple):
    cnot_count: int
    param_count: int
    gate_count: int


def metrics(c: Circuit) -> Metrics:
    return Metrics(c.cnot_count, c.param_count, c.gate_count)


# ---------------------------------------------------------------------------
# Edit actions


class ActionKind(str, enum.Enum):
    ADD = "add"
    SWAP = "swap"
    DELETE = "delete"
    CHANGE = "change"


ACTION_ORDER = (ActionKind.ADD, ActionKind.SWAP, ActionKind.DELETE, ActionKind.CHANGE)


@dataclass(frozen=True, slots=True)
class EditAction:
    kind: ActionKind
    gate: Gate | None = None
    position: int | None = None
    epsilon: float | None = None

    def __str__(self) -> str:
        if self.kind is ActionKind.ADD:
            return f"add[{self.gate}]"
        if self.kind is ActionKind.SWAP:
            return f"swap@{self.position}[{self.gate}]"
        if self.kind is ActionKind.DELETE:
            return f"delete@{self.position}"
        return f"change@{self.position}[{self.epsilon:+.4f}]"


@dataclass(frozen=True)
class ActionDistribution:
    """Probabilities of the add / swap / delete / change action classes."""

    p_add: float
    p_swap: float
    p_delete: float
    p_change: float

    def __post_init__(self):
        probs = self.as_tuple()
        if any(not (0.0 <= p <= 1.0) for p in probs):
            raise ConfigurationError(f"action probabilities must lie in [0, 1]: {probs}")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ConfigurationError(f"action probabilities must sum to 1: {probs}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p_add, self.p_swap, self.p_delete, self.p_change)

    def without_add(self) -> ActionDistribution:
        rest = math.fsum((self.p_swap, self.p_delete, self.p_change))
        if rest == 0.0:
            raise SamplingError("add suppressed and no other action has probability mass")
        # the last entry absorbs rounding so the sum is exactly representable as 1
        ps, pd = self.p_swap / rest, self.p_delete / rest
        return ActionDistribution(0.0, ps, pd, max(0.0, 1.0 - ps - pd))


ADD_ONLY = ActionDistribution(1.0, 0.0, 0.0, 0.0)
DEFAULT_DISTRIBUTION = ActionDistribution(0.5, 0.2, 0.1, 0.2)

_RESAMPLE_LIMIT = 100


def effective_distribution(
    c: Circuit, base: ActionDistribution, cfg, tree_has_warmed: bool
) -> ActionDistribution:
    """Distribution actually used to expand ``c``.

    Add-only until some circuit in the tree has at least ``2n`` gates; after
    that ``base``. Adding is switched off once ``c`` reaches ``cfg.max_depth``
    (or ``cfg.max_cnots`` CNOTs, when that cutoff is configured).
    """
    dist = base if tree_has_warmed else ADD_ONLY
    max_cnots = getattr(cfg, "max_cnots", None)
    capped = c.depth >= cfg.max_depth or (max_cnots is not None and c.cnot_count >= max_cnots)
    if capped and dist.p_add > 0.0 and dist.p_add < 1.0:
        dist = dist.without_add()
    return dist


def _random_gate(n: int, rng: np.random.Generator) -> Gate:
    pool = SEARCH_GATES if n > 1 else SEARCH_GATES[1:]
    kind = pool[rng.integers(len(pool))]
    if kind is GateKind.CNOT:
        # ordered pair of distinct qubits, uniform over n(n-1) choices
        control = int(rng.integers(n))
        target = int(rng.integers(n - 1))
        if target >= control:
            target += 1
        return cnot(control, target)
    q = int(rng.integers(n))
    return Gate(kind, q, angle=float(rng.uniform(0.0, TWO_PI)))


def _feasible(kind: ActionKind, c: Circuit) -> bool:
    if kind is ActionKind.ADD:
        return True
    if kind is ActionKind.CHANGE:
        return c.param_count > 0
    return c.gate_count > 0


def sample_action(
    c: Circuit, dist: ActionDistribution, rng: np.random.Generator, angle_deviation: float
) -> EditAction:
    probs = dist.as_tuple()
    if not any(p > 0.0 and _feasible(k, c) for k, p in zip(ACTION_ORDER, probs)):
        raise SamplingError(f"no feasible action for a {c.gate_count}-gate circuit under {dist}")
    cumulative = np.cumsum(probs)
    for _ in range(_RESAMPLE_LIMIT):
        u = rng.random() * cumulative[-1]
        # first class whose cumulative mass exceeds u; zero-mass classes are never hit
        kind = ACTION_ORDER[min(int(np.searchsorted(cumulative, u, side="right")), 3)]
        if _feasible(kind, c):
            break
    else:
        raise SamplingError(f"no feasible action after {_RESAMPLE_LIMIT} draws")

    if kind is ActionKind.ADD:
        return EditAction(kind, gate=_random_gate(c.n, rng))
    if kind is ActionKind.SWAP:
        pos = int(rng.integers(c.gate_count))
        return EditAction(kind, gate=_random_gate(c.n, rng), position=pos)
    if kind is ActionKind.DELETE:
        return EditAction(kind, position=int(rng.integers(c.gate_count)))
    params = c.param_positions
    pos = params[int(rng.integers(len(params)))]
    return EditAction(kind, position=pos, epsilon=float(rng.normal(0.0, angle_deviation)))


def apply_action(c: Circuit, a: EditAction) -> Circuit:
    if a.kind is ActionKind.ADD:
        return c.append(a.gate)
    pos = a.position
    if pos is None or not (0 <= pos < c.gate_count):
        raise ActionError(f"{a} refers to position {pos} of a {c.gate_count}-gate circuit")
    gates = list(c.gates)
    if a.kind is ActionKind.SWAP:
        gates[pos] = a.gate
    elif a.kind is ActionKind.DELETE:
        del gates[pos]
    else:
        g = gates[pos]
        if not g.kind.parameterized:
            raise ActionError(f"{a} targets unparameterized gate {g}")
        gates[pos] = g.with_angle(wrap_angle(g.angle + a.epsilon))
    try:
        return Circuit(c.n, tuple(gates))
    except CircuitError as exc:
        raise ActionError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Text format


def serialize(c: Circuit) -> str:
    lines = [f"qubits {c.n}"]
    lines.extend(str(g) for g in c.gates)
    return "\n".join(lines) + "\n"


_ARITY = {"h": 1, "s": 1, "t": 1, "cx": 2, "rx": 2, "ry": 2, "rz": 2}


def _tokens(line: str) -> Iterable[tuple[int, str]]:
    """Yield (1-based column, token) pairs."""
    col = 0
    for tok in line.split():
        col = line.index(tok, col)
        yield col + 1, tok
        col += len(tok)


def parse(text: str) -> Circuit:
    n = None
    gates = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = list(_tokens(line))
        if not toks:
            continue
        (col0, head), args = toks[0], toks[1:]
        if n is None:
            if head != "qubits" or len(args) != 1:
                raise ParseError("expected 'qubits <n>' header", lineno, col0)
            n = _parse_int(args[0], lineno)
            if n < 1:
                raise ParseError(f"qubit count must be >= 1, got {n}", lineno, args[0][0])
            continue
        name = head.lower()
        if name not in _ARITY:
            raise ParseError(f"unknown gate '{head}'", lineno, col0)
        if len(args) != _ARITY[name]:
            raise ParseError(f"'{name}' takes {_ARITY[name]} argument(s), got {len(args)}", lineno, col0)
        q0 = _parse_int(args[0], lineno)
        used = [(q0, args[0][0])]
        if name == "cx":
            q1 = _parse_int(args[1], lineno)
            used.append((q1, args[1][0]))
        for q, col in used:
            if not (0 <= q < n):
                raise ParseError(f"qubit index {q} out of range for {n} qubits", lineno, col)
        try:
            if name == "cx":
                gates.append(cnot(q0, q1))
            elif name in ("rx", "ry", "rz"):
                gates.append(Gate(GateKind(name), q0, angle=_parse_float(args[1], lineno)))
            else:
                gates.append(Gate(GateKind(name), q0))
        except CircuitError as exc:
            raise ParseError(str(exc), lineno, col0) from exc
    if n is None:
        raise ParseError("missing 'qubits <n>' header", 1, 1)
    return Circuit(n, tuple(gates))


def _parse_int(tok: tuple[int, str], lineno: int) -> int:
    col, text = tok
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"expected an integer, got '{text}'", lineno, col) from None


def _parse_float(tok: tuple[int, str], lineno: int) -> float:
    col, text = tok
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"expected a number, got '{text}'", lineno, col) from None
    if not math.isfinite(value):
        raise ParseError(f"angle must be finite, got '{text}'", lineno, col)
    return value
