"""Infer a PBN from a static expression matrix.

Genes are binarized at their median, every K-gene predictor set is scored by
its coefficient of determination (COD) for each target gene, and the best
sets become that gene's candidate functions with COD-proportional selection
probabilities.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .pbn import NodeSpec, PBNSpec


@dataclass
class ExpressionMatrix:
    genes: list[str]
    values: np.ndarray        # (samples, genes)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.genes):
            raise ValueError(f"expected a (samples, {len(self.genes)}) matrix, got shape {self.values.shape}")
        if self.values.shape[0] < 2:
            raise ValueError("need at least two samples")


@dataclass(frozen=True)
class PredictorScore:
    target: int
    predictors: tuple[int, ...]
    table: tuple[int, ...]
    cod: float


class InferenceError(ValueError):
    pass


def read_expression_csv(path) -> ExpressionMatrix:
    """First row gene names, one sample per following row."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    genes = [g.strip() for g in rows[0]]
    values = [[float(v) for v in r] for r in rows[1:]]
    return ExpressionMatrix(genes, np.array(values))


def median_quantize(m: ExpressionMatrix | np.ndarray) -> np.ndarray:
    """Per gene: 1 where value >= that gene's median, else 0."""
    values = m.values if isinstance(m, ExpressionMatrix) else np.asarray(m, dtype=float)
    med = np.median(values, axis=0)
    constant = np.flatnonzero(values.min(axis=0) == values.max(axis=0))
    if len(constant):
        warnings.warn(f"constant expression in column(s) {constant.tolist()}; quantized to all ones",
                      RuntimeWarning, stacklevel=2)
    return (values >= med).astype(np.int8)


def _pattern_index(predictors: np.ndarray) -> np.ndarray:
    # first predictor column is the least-significant bit
    p = np.asarray(predictors, dtype=np.int64)
    if p.ndim == 1:
        p = p[:, None]
    return (p << np.arange(p.shape[1])).sum(axis=1)


def _fit_counts(target: np.ndarray, predictors: np.ndarray):
    t = np.asarray(target, dtype=np.int64)
    k = 1 if np.ndim(predictors) == 1 else np.shape(predictors)[1]
    idx = _pattern_index(predictors)
    ones = np.bincount(idx, weights=t, minlength=2 ** k).astype(np.int64)
    seen = np.bincount(idx, minlength=2 ** k)
    zeros = seen - ones
    table = (ones > zeros).astype(np.int8)          # ties and unseen patterns -> 0
    errors = int(np.minimum(ones, zeros).sum())
    return table, errors


def fit_function(target, predictors) -> tuple[tuple[int, ...], float]:
    """Majority-vote truth table over the predictor patterns, and its error rate."""
    table, errors = _fit_counts(target, predictors)
    return tuple(int(v) for v in table), errors / len(target)


def _cod_from_errors(e0: int, e: int) -> float:
    return 0.0 if e0 == 0 else (e0 - e) / e0


def cod(target, predictors) -> float:
    """(e0 - e) / e0, with e0 the error of the best constant predictor."""
    t = np.asarray(target, dtype=np.int64)
    ones = int(t.sum())
    e0 = min(ones, len(t) - ones)
    _, e = _fit_counts(t, predictors)
    return _cod_from_errors(e0, e)


def score_predictor_sets(binary: np.ndarray, target: int, k: int = 3,
                         allow_self: bool = True) -> list[PredictorScore]:
    """Every k-subset of genes scored for ``target``, best first.

    Ties in COD are broken by the lexicographic order of the predictor indices.
    """
    binary = np.asarray(binary, dtype=np.int64)
    t = binary[:, target]
    ones = int(t.sum())
    e0 = min(ones, len(t) - ones)
    pool = [g for g in range(binary.shape[1]) if allow_self or g != target]
    scores = []
    for subset in combinations(pool, k):
        table, e = _fit_counts(t, binary[:, subset])
        scores.append(PredictorScore(target, subset, tuple(int(v) for v in table), _cod_from_errors(e0, e)))
    scores.sort(key=lambda s: (-s.cod, s.predictors))
    return scores


def binarize(m: ExpressionMatrix | np.ndarray, binary: bool = False) -> np.ndarray:
    """Median-quantize continuous data, or validate already-binary data."""
    data = m.values if isinstance(m, ExpressionMatrix) else np.asarray(m)
    if not binary:
        return median_quantize(data)
    if set(np.unique(data).tolist()) - {0, 1}:
        raise InferenceError("binary input contains values other than 0/1")
    return data.astype(np.int8)


def select_predictors(bits: np.ndarray, k: int = 3, top: int = 10, allow_self: bool = True,
                      genes: Sequence[str] | None = None) -> list[list[PredictorScore]]:
    """The ``top`` best predictor sets per gene, keeping only COD > 0."""
    selected = []
    for i in range(bits.shape[1]):
        kept = [s for s in score_predictor_sets(bits, i, k, allow_self)[:top] if s.cod > 0]
        if not kept:
            name = genes[i] if genes is not None else f"gene {i}"
            raise InferenceError(f"no predictor set with positive COD for {name}")
        selected.append(kept)
    return selected


def build_pbn(selected: Sequence[Sequence[PredictorScore]]) -> PBNSpec:
    """Node i picks among ``selected[i]`` with probability proportional to COD.

    NodeSpec carries a single input list, so each table is lifted onto the
    union of that node's predictor sets.
    """
    nodes = []
    for kept in selected:
        total = sum(s.cod for s in kept)
        inputs = sorted({g for s in kept for g in s.predictors})
        tables = [_lift_table(s.table, s.predictors, inputs) for s in kept]
        nodes.append(NodeSpec(inputs, tables, [s.cod / total for s in kept]))
    return PBNSpec(tuple(nodes))


def infer_pbn(m: ExpressionMatrix | np.ndarray, k: int = 3, top: int = 10, allow_self: bool = True,
              binary: bool = False, genes: Sequence[str] | None = None) -> PBNSpec:
    """Binarize, select the best predictor sets per gene and build the PBN."""
    if isinstance(m, ExpressionMatrix):
        genes = m.genes
    bits = binarize(m, binary)
    return build_pbn(select_predictors(bits, k, top, allow_self, genes))


def _lift_table(table: Sequence[int], predictors: Sequence[int], inputs: Sequence[int]) -> tuple[int, ...]:
    """Re-express a table over ``predictors`` as a table over the superset ``inputs``."""
    pos = [inputs.index(g) for g in predictors]
    out = []
    for idx in range(2 ** len(inputs)):
        sub = 0
        for j, p in enumerate(pos):
            sub |= ((idx >> p) & 1) << j
        out.append(int(table[sub]))
    return tuple(out)
