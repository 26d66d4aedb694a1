"""Probabilistic Boolean network model and natural (uncontrolled) dynamics.

States are plain Python ints. Gene ``g_(i+1)`` lives in bit ``i`` of the
integer, and the canonical string rendering lists ``g_1 ... g_n`` left to
right, so ``state_to_str(0b1010, 4) == "0101"``.

Truth tables are indexed by the node's inputs read as an integer with the
first listed input as the least-significant bit.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

PROB_TOL = 1e-9
DEFAULT_SUPPORT_CAP = 2 ** 20

NAMED_FUNCTIONS = ("OR", "AND", "XOR")


class SpecError(ValueError):
    """Raised for malformed or inconsistent PBN spec documents."""


class SupportTooLarge(RuntimeError):
    """The exact next-state distribution has more entries than allowed."""


def named_table(name: str, arity: int) -> tuple[int, ...]:
    """Expand OR / AND / XOR over ``arity`` inputs into a truth table."""
    name = name.upper()
    out = []
    for idx in range(2 ** arity):
        ones = bin(idx).count("1")
        if name == "OR":
            out.append(int(ones > 0))
        elif name == "AND":
            out.append(int(ones == arity))
        elif name == "XOR":
            out.append(ones % 2)
        else:
            raise SpecError(f"unknown function name {name!r}; expected one of {NAMED_FUNCTIONS}")
    return tuple(out)


@dataclass(frozen=True)
class NodeSpec:
    inputs: tuple[int, ...]
    tables: tuple[tuple[int, ...], ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(int(i) for i in self.inputs))
        object.__setattr__(self, "tables", tuple(tuple(int(v) for v in t) for t in self.tables))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.inputs) < 1:
            raise SpecError("node needs at least one input")
        if len(self.tables) < 1:
            raise SpecError("node needs at least one boolean function")
        if len(self.tables) != len(self.probs):
            raise SpecError("one probability per function required")
        size = 2 ** len(self.inputs)
        for t in self.tables:
            if len(t) != size:
                raise SpecError(f"truth table has {len(t)} entries, expected 2^{len(self.inputs)} = {size}")
            if any(v not in (0, 1) for v in t):
                raise SpecError("truth table entries must be 0 or 1")
        for p in self.probs:
            if not (0.0 < p <= 1.0):
                raise SpecError(f"function probability {p} outside (0, 1]")
        total = sum(self.probs)
        if abs(total - 1.0) > PROB_TOL:
            raise SpecError(f"probabilities sum to {total:g}")

    @property
    def arity(self) -> int:
        return len(self.inputs)

    def on_probability(self) -> np.ndarray:
        """P(node = 1) for each input pattern, shape ``(2**arity,)``.

        Patterns on which every function agrees get exactly 0.0 or 1.0, so
        rounding in the probability sum never creates phantom branches.
        """
        tables = np.asarray(self.tables, dtype=float)
        q = np.asarray(self.probs) @ tables
        q[tables.min(axis=0) == 1] = 1.0
        q[tables.max(axis=0) == 0] = 0.0
        return q


@dataclass(frozen=True)
class PBNSpec:
    nodes: tuple[NodeSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if len(self.nodes) < 1:
            raise SpecError("network needs at least one node")
        for k, node in enumerate(self.nodes):
            for i in node.inputs:
                if not 0 <= i < self.n:
                    raise SpecError(f"node {k}: input index {i} out of range [0, {self.n})")

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def n_actions(self) -> int:
        return self.n + 1

    @cached_property
    def _compiled(self):
        # Padded input wiring + per-pattern on-probabilities, so a whole batch
        # of states can be advanced with a couple of fancy-indexing ops.
        tmax = max(node.arity for node in self.nodes)
        inputs = np.zeros((self.n, tmax), dtype=np.int64)
        weights = np.zeros((self.n, tmax), dtype=np.int64)
        qtab = np.zeros((self.n, 2 ** tmax))
        for i, node in enumerate(self.nodes):
            inputs[i, : node.arity] = node.inputs
            weights[i, : node.arity] = 1 << np.arange(node.arity)
            qtab[i, : 2 ** node.arity] = node.on_probability()
        return inputs, weights, qtab

    def on_probabilities(self, bits: np.ndarray) -> np.ndarray:
        """Per-node probability of being 1 next step.

        ``bits`` has shape ``(..., n)``; the result has the same shape.
        """
        inputs, weights, qtab = self._compiled
        bits = np.asarray(bits, dtype=np.int64)
        patterns = (bits[..., inputs] * weights).sum(axis=-1)
        return qtab[np.arange(self.n), patterns]


# -- state encoding ----------------------------------------------------------

def state_to_bits(state: int | np.ndarray, n: int) -> np.ndarray:
    """Integer state(s) to 0/1 array(s) of shape ``(..., n)``; bit 0 first."""
    s = np.asarray(state, dtype=np.int64)
    return ((s[..., None] >> np.arange(n)) & 1).astype(np.int8)


def bits_to_state(bits) -> int | np.ndarray:
    b = np.asarray(bits, dtype=np.int64)
    out = (b << np.arange(b.shape[-1])).sum(axis=-1)
    return int(out) if out.ndim == 0 else out


def state_to_str(state: int, n: int) -> str:
    return "".join(str((int(state) >> i) & 1) for i in range(n))


def str_to_state(text: str) -> int:
    text = text.strip()
    if not text or set(text) - {"0", "1"}:
        raise ValueError(f"not a bitstring: {text!r}")
    return sum(1 << i for i, c in enumerate(text) if c == "1")


# -- spec documents (JSON) ---------------------------------------------------

def parse_spec(text: str) -> PBNSpec:
    """Parse a JSON spec document into a validated :class:`PBNSpec`.

    Each function object carries either ``name`` (OR, AND, XOR, expanded over
    the node's declared inputs) or ``table`` (bitstring of length 2^T), and a
    selection probability ``p``.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"malformed spec document (line {exc.lineno}, column {exc.colno}): {exc.msg}") from exc
    if not isinstance(doc, dict) or "nodes" not in doc:
        raise SpecError("spec document must be an object with 'n' and 'nodes'")
    raw_nodes = doc["nodes"]
    if not isinstance(raw_nodes, list):
        raise SpecError("'nodes' must be a list")
    n = doc.get("n", len(raw_nodes))
    if n != len(raw_nodes):
        raise SpecError(f"'n' is {n} but {len(raw_nodes)} nodes are listed")

    nodes = []
    for k, raw in enumerate(raw_nodes):
        try:
            inputs = [int(i) for i in raw["inputs"]]
            funcs = raw["functions"]
            tables, probs = [], []
            for f in funcs:
                if "name" in f and "table" in f:
                    raise SpecError("give either 'name' or 'table', not both")
                if "name" in f:
                    tables.append(named_table(f["name"], len(inputs)))
                elif "table" in f:
                    table = str(f["table"])
                    if set(table) - {"0", "1"}:
                        raise SpecError(f"table {table!r} is not a bitstring")
                    tables.append(tuple(int(c) for c in table))
                else:
                    raise SpecError("function needs 'name' or 'table'")
                probs.append(float(f["p"]))
            for i in inputs:
                if not 0 <= i < n:
                    raise SpecError(f"input index {i} out of range [0, {n})")
            nodes.append(NodeSpec(inputs, tables, probs))
        except SpecError as exc:
            raise SpecError(f"node {k}: {exc}") from None
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"node {k}: malformed entry ({exc!r})") from None
    return PBNSpec(tuple(nodes))


def dumps_spec(spec: PBNSpec, **extra) -> str:
    """Serialize to the JSON document format. ``extra`` keys go to the top level."""
    doc = {"n": spec.n, **extra, "nodes": []}
    for node in spec.nodes:
        doc["nodes"].append({
            "inputs": list(node.inputs),
            "functions": [
                {"table": "".join(map(str, t)), "p": p} for t, p in zip(node.tables, node.probs)
            ],
        })
    return json.dumps(doc, indent=1)


def load_spec(path) -> PBNSpec:
    with open(path) as fh:
        return parse_spec(fh.read())


# -- dynamics ----------------------------------------------------------------

def eval_function(table: Sequence[int], input_bits: Sequence[int]) -> int:
    idx = 0
    for j, b in enumerate(input_bits):
        idx |= int(b) << j
    return int(table[idx])


def node_next_distribution(spec: PBNSpec, state: int, i: int) -> float:
    """Probability that node ``i`` is 1 after one natural step from ``state``."""
    node = spec.nodes[i]
    inp = [(state >> j) & 1 for j in node.inputs]
    outs = [eval_function(t, inp) for t in node.tables]
    if len(set(outs)) == 1:
        return float(outs[0])
    return float(sum(p * o for p, o in zip(node.probs, outs)))


def step_natural(spec: PBNSpec, state: int, rng: np.random.Generator) -> int:
    """One synchronous natural update; every node draws its function independently."""
    q = spec.on_probabilities(state_to_bits(state, spec.n))
    return bits_to_state(rng.random(spec.n) < q)


def step_natural_batch(spec: PBNSpec, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    q = spec.on_probabilities(state_to_bits(states, spec.n))
    return bits_to_state(rng.random(q.shape) < q)


@dataclass(frozen=True)
class TransitionSupport:
    """Exact next-state distribution; ``states`` ascending, ``probs`` > 0."""
    states: np.ndarray
    probs: np.ndarray

    def __len__(self):
        return len(self.states)

    def as_dict(self) -> dict[int, float]:
        return {int(s): float(p) for s, p in zip(self.states, self.probs)}


def transition_support(spec: PBNSpec, state: int, cap: int = DEFAULT_SUPPORT_CAP) -> TransitionSupport:
    """Exact distribution of the next state, using P(s'|s) = prod_i P(g_i'|s)."""
    q = spec.on_probabilities(state_to_bits(state, spec.n))
    base = int(bits_to_state(q >= 1.0))
    free = np.flatnonzero((q > 0.0) & (q < 1.0))
    if 2 ** len(free) > cap:
        raise SupportTooLarge(
            f"support of state {state} has 2^{len(free)} entries (cap {cap}); "
            "use Monte Carlo simulation instead"
        )
    combos = state_to_bits(np.arange(2 ** len(free)), len(free)).astype(bool)
    states = base + (combos * (1 << free)).sum(axis=1)
    probs = np.where(combos, q[free], 1.0 - q[free]).prod(axis=1)
    order = np.argsort(states)
    return TransitionSupport(states[order].astype(np.int64), probs[order])


def apply_intervention(state: int, u: int, n: int) -> int:
    """Flip gene ``u`` (1-based); ``u == 0`` leaves the state unchanged."""
    if not 0 <= u <= n:
        raise ValueError(f"action {u} out of range [0, {n}]")
    return state if u == 0 else state ^ (1 << (u - 1))


def apply_intervention_batch(states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    actions = np.asarray(actions, dtype=np.int64)
    flip = np.where(actions > 0, np.left_shift(1, np.maximum(actions - 1, 0)), 0)
    return np.asarray(states, dtype=np.int64) ^ flip
