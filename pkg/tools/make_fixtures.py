"""Regenerate the shipped fixtures in src/pbncontrol/data/.

Synthetic networks take their function sets and probabilities from the
benchmark tables (PBN10: 10 nodes, PBN20: 20 nodes); wiring is drawn with a
fixed seed, two distinct inputs per node. The melanoma-style fixture is a
31-sample expression matrix built from the codewords of a known 7-gene
Boolean network (melanoma_truth.spec).

    python tools/make_fixtures.py
"""
import csv
import itertools
import json
from pathlib import Path

import numpy as np

DATA = Path(__file__).resolve().parents[1] / "src" / "pbncontrol" / "data"

PBN10_FUNCTIONS = [
    {"OR": 1.00},
    {"OR": 0.50, "AND": 0.25, "XOR": 0.25},
    {"OR": 0.71, "AND": 0.29},
    {"OR": 0.52, "AND": 0.48},
    {"OR": 0.36, "AND": 0.05, "XOR": 0.59},
    {"OR": 0.82, "AND": 0.15, "XOR": 0.03},
    {"OR": 0.48, "AND": 0.52},
    {"OR": 0.28, "AND": 0.45, "XOR": 0.27},
    {"OR": 1.00},
    {"OR": 0.99, "AND": 0.01},
]

PBN20_FUNCTIONS = [
    {"OR": 0.39, "AND": 0.04, "XOR": 0.57},
    {"OR": 0.70, "XOR": 0.30},
    {"OR": 1.00},
    {"OR": 0.18, "AND": 0.82},
    {"AND": 0.11, "XOR": 0.89},
    {"OR": 1.00},
    {"OR": 1.00},
    {"AND": 0.44, "XOR": 0.56},
    {"XOR": 1.00},
    {"OR": 0.82, "AND": 0.09, "XOR": 0.09},
    {"AND": 1.00},
    {"AND": 1.00},
    {"OR": 1.00},
    {"OR": 0.01, "AND": 0.98, "XOR": 0.01},
    {"XOR": 1.00},
    {"AND": 1.00},
    {"OR": 1.00},
    {"AND": 1.00},
    {"XOR": 1.00},
    {"OR": 1.00},
]

ARITY = 2
PBN10_SEED = 27
PBN20_SEED = 17

GENES = ["pirin", "WNT5A", "S100P", "RET1", "MART1", "HADHB", "STC2"]


def wired_spec(functions, seed, arity=ARITY):
    rng = np.random.default_rng(seed)
    n = len(functions)
    nodes = []
    for fs in functions:
        inputs = sorted(rng.choice(n, size=arity, replace=False).tolist())
        nodes.append({"inputs": inputs,
                      "functions": [{"name": name, "p": p} for name, p in fs.items()]})
    return {"n": n, "wiring_seed": seed, "nodes": nodes}


def write_spec(doc, name):
    # one node per line keeps the files diffable
    lines = ["{", f' "n": {doc["n"]},']
    if "wiring_seed" in doc:
        lines.append(f' "wiring_seed": {doc["wiring_seed"]},')
    if "genes" in doc:
        lines.append(f' "genes": {json.dumps(doc["genes"])},')
    lines.append(' "nodes": [')
    body = [f"  {json.dumps(node)}" for node in doc["nodes"]]
    lines.append(",\n".join(body))
    lines.append(" ]")
    lines.append("}")
    (DATA / name).write_text("\n".join(lines) + "\n")


# Ground truth for the expression fixture (genes a..g in GENES order):
#   a, b, c, d free;  e = a ^ b ^ c;  f = d ^ (a | b);  g = MAJ(b, d, e)
# Each gene is then an exact function of exactly one other-gene triple.
TRUTH = {
    0: ((1, 2, 4), lambda b, c, e: b ^ c ^ e),
    1: ((0, 2, 4), lambda a, c, e: a ^ c ^ e),
    2: ((0, 1, 4), lambda a, b, e: a ^ b ^ e),
    3: ((0, 1, 5), lambda a, b, f: f ^ (a | b)),
    4: ((0, 1, 2), lambda a, b, c: a ^ b ^ c),
    5: ((0, 1, 3), lambda a, b, d: d ^ (a | b)),
    6: ((1, 3, 4), lambda b, d, e: int(b + d + e >= 2)),
}
# copies of each codeword, itertools.product order over (a, b, c, d); 31 samples,
# 16 ones per gene so the median split recovers the bits exactly
MULTIPLICITY = [1, 1, 1, 2, 1, 6, 2, 1, 1, 2, 6, 1, 2, 1, 1, 2]
EXPRESSION_SEED = 2024


def codewords():
    rows = []
    for a, b, c, d in itertools.product([0, 1], repeat=4):
        e = a ^ b ^ c
        f = d ^ (a | b)
        g = int(b + d + e >= 2)
        rows.append((a, b, c, d, e, f, g))
    return np.array(rows, dtype=np.int8)


def truth_spec():
    nodes = []
    for i in range(len(GENES)):
        inputs, fn = TRUTH[i]
        table = "".join(str(fn(*((idx >> j) & 1 for j in range(3)))) for idx in range(8))
        nodes.append({"inputs": list(inputs), "functions": [{"table": table, "p": 1.0}]})
    return {"n": len(GENES), "genes": GENES, "nodes": nodes}


def expression_matrix(seed=EXPRESSION_SEED):
    """Continuous, tie-free values whose median split is the binary sample."""
    rng = np.random.default_rng(seed)
    bits = np.repeat(codewords(), MULTIPLICITY, axis=0)
    bits = bits[rng.permutation(len(bits))]
    values = np.empty(bits.shape)
    for j in range(bits.shape[1]):
        # distinct levels: low band below 1, high band above 1
        low = np.sort(rng.choice(np.arange(200, 900), size=(bits[:, j] == 0).sum(), replace=False)) / 1000
        high = np.sort(rng.choice(np.arange(1100, 2600), size=(bits[:, j] == 1).sum(), replace=False)) / 1000
        values[bits[:, j] == 0, j] = rng.permutation(low)
        values[bits[:, j] == 1, j] = rng.permutation(high)
    return bits, values


def write_expression(values, name):
    with open(DATA / name, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GENES)
        for row in values:
            w.writerow([f"{v:.3f}" for v in row])


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    write_spec(wired_spec(PBN10_FUNCTIONS, PBN10_SEED), "pbn10.spec")
    write_spec(truth_spec(), "melanoma_truth.spec")
    write_expression(expression_matrix()[1], "melanoma.csv")
    write_spec(wired_spec(PBN20_FUNCTIONS, PBN20_SEED), "pbn20.spec")


if __name__ == "__main__":
    main()
