"""Lower bound on the distortion of classical models with ``k`` memory states.

A model with ``k`` memory states is relaxed to an L-step pre-model: an
encoding that merges causal states into ``k`` blocks, plus an arbitrary
distribution over the next ``L`` symbols for each block. For a fixed
encoding, the best block distribution is the stationary-weighted mixture of
the block's conditional rows, so only the encoding needs to be searched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import EmptyBlockError
from .process import EpsilonMachine, _check_horizon, exact_distribution

__all__ = [
    "Partition",
    "CoarseDistribution",
    "BoundResult",
    "enumerate_partitions",
    "optimal_coarse_distribution",
    "partition_distortion",
    "classical_bound",
]


@dataclass(frozen=True)
class Partition:
    """Assignment of causal states to memory labels, in first-use order."""

    assignment: tuple
    k: int

    def __post_init__(self):
        seen = 0
        for label in self.assignment:
            if label > seen or label < 0:
                raise ValueError(f"assignment {self.assignment} is not canonical")
            if label == seen:
                seen += 1
        if seen != self.k:
            raise ValueError(f"assignment {self.assignment} uses {seen} labels, not {self.k}")

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Canonicalise an arbitrary labelling by relabelling in first-use order."""
        mapping: dict = {}
        out = []
        for label in labels:
            out.append(mapping.setdefault(label, len(mapping)))
        return cls(tuple(out), len(mapping))

    @property
    def blocks(self) -> list[list[int]]:
        groups: list[list[int]] = [[] for _ in range(self.k)]
        for j, r in enumerate(self.assignment):
            groups[r].append(j)
        return groups

    def __str__(self) -> str:
        sep = "" if len(self.assignment) <= 10 else ","
        return "|".join(sep.join(str(j) for j in block) for block in self.blocks)


@dataclass(frozen=True)
class CoarseDistribution:
    """``table[r, i] = Q_L(string i | memory label r)``."""

    horizon: int
    table: np.ndarray


@dataclass(frozen=True)
class BoundResult:
    bits: float
    partition: Partition


def enumerate_partitions(n: int, k: int) -> Iterator[Partition]:
    """Yield each partition of ``n`` states into exactly ``k`` blocks once.

    Partitions come as restricted growth strings in lexicographic order; the
    count is the Stirling number S(n, k).
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")

    def grow(prefix: list[int], used: int):
        remaining = n - len(prefix)
        if remaining == 0:
            if used == k:
                yield Partition(tuple(prefix), k)
            return
        # too few slots left to introduce the missing labels
        if k - used > remaining:
            return
        for label in range(min(used + 1, k)):
            prefix.append(label)
            yield from grow(prefix, max(used, label + 1))
            prefix.pop()

    yield from grow([0], 1)


def optimal_coarse_distribution(machine: EpsilonMachine, partition: Partition, L: int, P=None) -> CoarseDistribution:
    """Stationary-weighted mixture of the conditional rows within each block."""
    if P is None:
        P = exact_distribution(machine, L)
    pi = machine.pi
    table = np.empty((partition.k, P.table.shape[1]))
    for r, block in enumerate(partition.blocks):
        if not block:
            raise EmptyBlockError(f"block {r} of {partition} is empty")
        weights = pi[block] / pi[block].sum()
        # singleton weights are exactly 1.0, so singleton rows are reproduced bit-exactly
        table[r] = weights @ P.table[block]
    return CoarseDistribution(L, table)


def partition_distortion(machine: EpsilonMachine, partition: Partition, L: int, P=None) -> float:
    """Per-symbol distortion of ``partition`` with its optimal block distributions."""
    if P is None:
        P = exact_distribution(machine, L)
    Q = optimal_coarse_distribution(machine, partition, L, P)
    total = 0.0
    for j, r in enumerate(partition.assignment):
        p, q = P.table[j], Q.table[r]
        mask = p > 0
        total += machine.pi[j] * np.sum(p[mask] * np.log2(p[mask] / q[mask]))
    return max(0.0, float(total)) / L


def _block_costs(machine: EpsilonMachine, P: np.ndarray) -> np.ndarray:
    """Distortion contribution of every nonempty subset of states, by bitmask."""
    n = machine.n_states
    pi = machine.pi
    size = 1 << n
    mass = np.zeros(size)
    mixed = np.zeros((size, P.shape[1]))
    neg_entropy = np.zeros(size)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(P > 0, P * np.log2(P), 0.0).sum(axis=1)
    # subsets containing state j as their highest member are [2**j, 2**(j+1))
    for j in range(n):
        lo, hi = 1 << j, 1 << (j + 1)
        mass[lo:hi] = mass[:lo] + pi[j]
        mixed[lo:hi] = mixed[:lo] + pi[j] * P[j]
        neg_entropy[lo:hi] = neg_entropy[:lo] + pi[j] * plogp[j]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = mixed[1:] / mass[1:, None]
        cross = np.where(mixed[1:] > 0, mixed[1:] * np.log2(q), 0.0).sum(axis=1)
    cost = np.zeros(size)
    cost[1:] = np.maximum(neg_entropy[1:] - cross, 0.0)
    cost[[1 << j for j in range(n)]] = 0.0
    return cost


def classical_bound(machine: EpsilonMachine, k: int = 2, L: int = 2) -> BoundResult:
    """Minimum pre-model distortion over all ``k``-block encodings.

    ``k`` larger than the number of causal states is clamped, so the bound
    is exactly zero whenever every state fits in its own memory label. Ties
    go to the first partition in enumeration order.
    """
    _check_horizon(L)
    n = machine.n_states
    k = min(k, n)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k == n:
        return BoundResult(0.0, Partition(tuple(range(n)), n))
    if n > 20:
        raise ValueError(f"exhaustive search is capped at 20 causal states, got {n}")
    P = exact_distribution(machine, L).table
    cost = _block_costs(machine, P)
    best_value = np.inf
    best = None
    for part in enumerate_partitions(n, k):
        masks = [0] * k
        for j, r in enumerate(part.assignment):
            masks[r] |= 1 << j
        value = sum(cost[m] for m in masks)
        if value < best_value:
            best_value, best = value, part
    return BoundResult(float(best_value) / L, best)
