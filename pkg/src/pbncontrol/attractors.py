"""Attractor detection on the state-transition graph, plus Monte Carlo
estimates of how often natural evolution ends up in each attractor."""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .pbn import (
    DEFAULT_SUPPORT_CAP,
    PBNSpec,
    SupportTooLarge,
    state_to_bits,
    state_to_str,
    step_natural_batch,
    transition_support,
)

DEFAULT_STG_LIMIT = 20
DEFAULT_MAX_STEPS = 1000
DEFAULT_ROLLOUTS = 100_000


@dataclass(frozen=True)
class Attractor:
    """A terminal strongly-connected component; ``states`` sorted ascending."""
    index: int
    states: tuple[int, ...]

    def __len__(self):
        return len(self.states)

    def __contains__(self, state) -> bool:
        k = bisect.bisect_left(self.states, int(state))
        return k < len(self.states) and self.states[k] == int(state)

    def to_strings(self, n: int) -> list[str]:
        return [state_to_str(s, n) for s in self.states]


@dataclass
class StateTransitionGraph:
    """Reachability graph in CSR form: successors of ``s`` are
    ``indices[indptr[s]:indptr[s + 1]]``, sorted ascending."""
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def num_states(self) -> int:
        return len(self.indptr) - 1

    def successors(self, state: int) -> np.ndarray:
        return self.indices[self.indptr[state]:self.indptr[state + 1]]

    @classmethod
    def from_successors(cls, succ: Sequence[Sequence[int]]) -> "StateTransitionGraph":
        lists = [sorted(set(int(t) for t in row)) for row in succ]
        indptr = np.zeros(len(lists) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(row) for row in lists])
        indices = np.fromiter((t for row in lists for t in row), dtype=np.int64, count=int(indptr[-1]))
        return cls(indptr, indices)


def _expand_free_bits(base: np.ndarray, free: np.ndarray, n: int) -> np.ndarray:
    """All states obtained by setting any subset of ``free`` bits on ``base``.

    ``free`` is a boolean (m, n) mask with the same popcount k on every row;
    returns an (m, 2**k) array, each row ascending.
    """
    m = len(base)
    k = int(free[0].sum()) if m else 0
    pos = np.nonzero(free)[1].reshape(m, k)
    combos = state_to_bits(np.arange(2 ** k), k).astype(np.int64)      # (2^k, k)
    offsets = combos @ np.left_shift(1, pos).T                          # (2^k, m)
    return np.sort(base[:, None] + offsets.T, axis=1)


def build_stg(spec: PBNSpec, limit: int = DEFAULT_STG_LIMIT,
              support_cap: int = DEFAULT_SUPPORT_CAP, chunk: int = 1 << 22) -> StateTransitionGraph:
    """Enumerate every state's nonzero-probability successors."""
    n = spec.n
    if n > limit:
        raise ValueError(f"network has {n} nodes; exact STG limited to n <= {limit}. "
                         "Use Monte Carlo attractor search instead.")
    states = np.arange(2 ** n, dtype=np.int64)
    q = spec.on_probabilities(state_to_bits(states, n))
    base = ((q >= 1.0) << np.arange(n)).sum(axis=1)
    free = (q > 0.0) & (q < 1.0)
    nfree = free.sum(axis=1)
    if nfree.max() > 0 and 2 ** int(nfree.max()) > support_cap:
        worst = int(np.argmax(nfree))
        raise SupportTooLarge(f"support of state {worst} has 2^{int(nfree.max())} entries (cap {support_cap})")

    degree = np.left_shift(1, nfree)
    indptr = np.zeros(2 ** n + 1, dtype=np.int64)
    np.cumsum(degree, out=indptr[1:])
    indices = np.empty(int(indptr[-1]), dtype=np.int64)
    for k in np.unique(nfree):
        rows = np.flatnonzero(nfree == k)
        step = max(1, chunk >> int(k))
        for lo in range(0, len(rows), step):
            r = rows[lo:lo + step]
            succ = _expand_free_bits(base[r], free[r], n)
            # degree is uniform within this group, so the CSR slots are contiguous per row
            dest = indptr[r][:, None] + np.arange(2 ** int(k))
            indices[dest.ravel()] = succ.ravel()
    return StateTransitionGraph(indptr, indices)


def terminal_sccs(graph: StateTransitionGraph) -> list[Attractor]:
    """Strongly-connected components with no edge leaving them, ordered by
    smallest member state."""
    N = graph.num_states
    adj = csr_matrix((np.ones(len(graph.indices), dtype=np.int8), graph.indices, graph.indptr), shape=(N, N))
    _, labels = connected_components(adj, directed=True, connection="strong")
    src = np.repeat(np.arange(N), np.diff(graph.indptr))
    leaving = labels[src] != labels[graph.indices]
    open_labels = np.zeros(labels.max() + 1, dtype=bool)
    open_labels[labels[src[leaving]]] = True

    closed = np.flatnonzero(~open_labels[labels])
    groups: dict[int, list[int]] = {}
    for s in closed:
        groups.setdefault(int(labels[s]), []).append(int(s))
    members = sorted(groups.values(), key=lambda g: g[0])
    return [Attractor(i, tuple(g)) for i, g in enumerate(members)]


def find_attractors(spec: PBNSpec, **kwargs) -> list[Attractor]:
    return terminal_sccs(build_stg(spec, **kwargs))


def closed_set_from(spec: PBNSpec, start: int, max_states: int = 1 << 20) -> tuple[int, ...] | None:
    """Forward closure of ``start``; returned only if it forms a terminal SCC.

    Used as a Monte Carlo companion for networks too large for a full STG:
    long rollouts propose candidate states, and this check confirms them.
    """
    seen = {start}
    frontier = [start]
    edges: dict[int, np.ndarray] = {}
    while frontier:
        s = frontier.pop()
        succ = transition_support(spec, s).states
        edges[s] = succ
        for t in succ.tolist():
            if t not in seen:
                seen.add(t)
                if len(seen) > max_states:
                    return None
                frontier.append(t)
    # closure holds by construction; check every member reaches back to start
    reverse: dict[int, list[int]] = {}
    for s, succ in edges.items():
        for t in succ.tolist():
            reverse.setdefault(t, []).append(s)
    back = {start}
    frontier = [start]
    while frontier:
        t = frontier.pop()
        for s in reverse.get(t, ()):
            if s not in back:
                back.add(s)
                frontier.append(s)
    if back != seen:
        return None
    return tuple(sorted(seen))


def find_attractors_sampled(spec: PBNSpec, rollouts: int, steps: int,
                            rng: np.random.Generator) -> list[Attractor]:
    """Attractors reached by ``rollouts`` natural trajectories of ``steps`` steps.

    Only attractors that some rollout actually reaches are found; rarely
    visited attractors can be missed.
    """
    states = rng.integers(0, 2 ** spec.n, size=rollouts, dtype=np.int64)
    for _ in range(steps):
        states = step_natural_batch(spec, states, rng)
    found: list[tuple[int, ...]] = []
    covered: set[int] = set()
    for s in np.unique(states).tolist():
        if s in covered:
            continue
        members = closed_set_from(spec, s)
        if members is not None:
            found.append(members)
            covered.update(members)
    found.sort(key=lambda m: m[0])
    return [Attractor(i, m) for i, m in enumerate(found)]


class AttractorIndex:
    """Vectorized membership lookup over disjoint attractors (binary search)."""

    def __init__(self, attractors: Sequence[Attractor]):
        self.attractors = list(attractors)
        if self.attractors:
            members = np.concatenate([np.asarray(a.states, dtype=np.int64) for a in self.attractors])
            labels = np.concatenate([np.full(len(a), k) for k, a in enumerate(self.attractors)])
        else:
            members = np.zeros(0, dtype=np.int64)
            labels = np.zeros(0, dtype=np.int64)
        order = np.argsort(members)
        self._members = members[order]
        self._labels = labels[order]

    def lookup(self, states) -> np.ndarray:
        """Position of each state's attractor in the list, or -1."""
        states = np.asarray(states, dtype=np.int64)
        if len(self._members) == 0:
            return np.full(states.shape, -1)
        k = np.searchsorted(self._members, states)
        kc = np.minimum(k, len(self._members) - 1)
        hit = self._members[kc] == states
        return np.where(hit, self._labels[kc], -1)


def membership(state: int, attractors: Sequence[Attractor]) -> int | None:
    """Position of the attractor containing ``state``, or None."""
    for k, a in enumerate(attractors):
        if state in a:
            return k
    return None


@dataclass
class FrequencyEstimate:
    counts: np.ndarray
    timeouts: int
    episodes: int

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.episodes

    @property
    def timeout_fraction(self) -> float:
        return self.timeouts / self.episodes


def estimate_attractor_frequencies(spec: PBNSpec, attractors: Sequence[Attractor], episodes: int,
                                   max_steps: int, rng: np.random.Generator,
                                   batch: int = 100_000) -> FrequencyEstimate:
    """Fraction of uniformly random starts that naturally fall into each attractor."""
    if not attractors:
        raise ValueError("need at least one attractor")
    index = AttractorIndex(attractors)
    counts = np.zeros(len(attractors), dtype=np.int64)
    timeouts = 0
    for lo in range(0, episodes, batch):
        m = min(batch, episodes - lo)
        states = rng.integers(0, 2 ** spec.n, size=m, dtype=np.int64)
        hit = index.lookup(states)
        for _ in range(max_steps):
            live = hit < 0
            if not live.any():
                break
            states[live] = step_natural_batch(spec, states[live], rng)
            hit[live] = index.lookup(states[live])
        counts += np.bincount(hit[hit >= 0], minlength=len(attractors))
        timeouts += int((hit < 0).sum())
    return FrequencyEstimate(counts, timeouts, episodes)


def least_frequent(attractors: Sequence[Attractor], estimate: FrequencyEstimate) -> Attractor:
    """Attractor with the lowest natural frequency; ties go to the smallest member state."""
    best = min(range(len(attractors)), key=lambda k: (estimate.counts[k], attractors[k].states[0]))
    return attractors[best]
