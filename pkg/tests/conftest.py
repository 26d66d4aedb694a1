import itertools
from collections import defaultdict

import numpy as np
import pytest

from pbncontrol.pbn import NodeSpec, PBNSpec, named_table


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long acceptance experiments")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-hour experiments, enabled with --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


# acceptance criterion outcomes, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_spec(rng, n, max_funcs=3, max_arity=3):
    """Random PBN with random truth tables and probabilities."""
    nodes = []
    for _ in range(n):
        t = int(rng.integers(1, min(max_arity, n) + 1))
        inputs = rng.choice(n, size=t, replace=False)
        k = int(rng.integers(1, max_funcs + 1))
        tables = [rng.integers(0, 2, size=2 ** t) for _ in range(k)]
        w = rng.random(k) + 0.05
        probs = w / w.sum()
        probs[-1] = 1.0 - probs[:-1].sum()
        nodes.append(NodeSpec(inputs, tables, probs))
    return PBNSpec(tuple(nodes))


def named_spec(wiring, funcs):
    """Spec from wiring lists and ``{name: p}`` dicts."""
    return PBNSpec(tuple(
        NodeSpec(inp, [named_table(name, len(inp)) for name in fs], list(fs.values()))
        for inp, fs in zip(wiring, funcs)
    ))


def brute_force_support(spec, state):
    """Next-state distribution by enumerating every joint function selection."""
    out = defaultdict(float)
    choices = [range(len(node.tables)) for node in spec.nodes]
    for combo in itertools.product(*choices):
        p = 1.0
        nxt = 0
        for i, (node, k) in enumerate(zip(spec.nodes, combo)):
            p *= node.probs[k]
            idx = sum(((state >> j) & 1) << pos for pos, j in enumerate(node.inputs))
            nxt |= node.tables[k][idx] << i
        out[nxt] += p
    return dict(out)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
