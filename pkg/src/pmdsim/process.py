"""Periodically modulated decay (PMD) renewal processes and their epsilon-machines.

A PMD process is a discrete-time renewal process whose survival function is

    survival(n) = gamma**n * (1 - v * sin(n * pi / N)**2).

Since the ratio ``survival(n + 1) / survival(n)`` is N-periodic, the causal
states are the counts of zeros since the last one, taken mod N, and the
minimal exact classical model is an N-state clock.

Binary strings ``x_0 x_1 ... x_{L-1}`` are indexed by the integer whose
most significant bit is ``x_0``; `strings` returns them in that order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HorizonError, PhysicalityError, RangeError, SingularityError

__all__ = [
    "MAX_HORIZON",
    "PmdParams",
    "EpsilonMachine",
    "ConditionalDistribution",
    "validate_pmd",
    "survival",
    "emission_probs",
    "build_epsilon_machine",
    "stationary_distribution",
    "exact_distribution",
    "sample_classical",
    "strings",
]

MAX_HORIZON = 20


@dataclass(frozen=True)
class PmdParams:
    """Parameters of a PMD process.

    Attributes
    ----------
    gamma : float
        Base decay factor, in (0, 1).
    v : float
        Modulation strength, in [0, 1).
    n_period : int
        Modulation period N >= 1.
    """

    gamma: float
    v: float
    n_period: int

    @property
    def theta(self) -> float:
        return math.pi / self.n_period


@dataclass(frozen=True)
class ConditionalDistribution:
    """Table of ``P(x_{0:L} | s_j)``.

    ``table[j, i]`` is the probability of the string with index ``i`` given
    initial state ``j``.
    """

    horizon: int
    table: np.ndarray

    @property
    def n_states(self) -> int:
        return self.table.shape[0]

    def row(self, j: int) -> dict[str, float]:
        return dict(zip(strings(self.horizon), self.table[j].tolist()))

    def prob(self, j: int, x: str) -> float:
        return float(self.table[j, int(x, 2)])


@dataclass(frozen=True)
class EpsilonMachine:
    """Clock-topology causal-state model of a PMD process.

    Attributes
    ----------
    params : PmdParams
    emit : ndarray, shape (N, 2)
        ``emit[j] = (P(0|s_j), P(1|s_j))``.
    next_on_0, next_on_1 : tuple of int
        Successor state after emitting 0 or 1.
    pi : ndarray, shape (N,)
        Stationary distribution over causal states.
    """

    params: PmdParams
    emit: np.ndarray
    next_on_0: tuple
    next_on_1: tuple
    pi: np.ndarray = field(repr=False)

    @property
    def n_states(self) -> int:
        return len(self.next_on_0)

    @property
    def memory_cost(self) -> float:
        """Topological complexity ``log2 N`` in bits."""
        return math.log2(self.n_states)

    @property
    def transition_matrix(self) -> np.ndarray:
        """Row-stochastic ``T[j, k] = P(s_k | s_j)``."""
        return _transition_matrix(self.emit, self.next_on_0, self.next_on_1)

    def to_json(self) -> dict:
        return {
            "schema": "em-v1",
            "n_states": self.n_states,
            "emit": self.emit.tolist(),
            "pi": self.pi.tolist(),
        }


def validate_pmd(gamma, v, n_period) -> PmdParams:
    """Check ranges and physicality, returning validated parameters.

    Raises
    ------
    RangeError
        If ``gamma`` is not in (0, 1), ``v`` not in [0, 1) or ``n_period``
        is not an integer >= 1.
    PhysicalityError
        If the survival sequence fails to decrease strictly. The first
        offending ``n`` is attached to the exception.
    """
    gamma = float(gamma)
    v = float(v)
    if not 0.0 < gamma < 1.0:
        raise RangeError(f"gamma must lie in (0, 1), got {gamma}")
    if not 0.0 <= v < 1.0:
        raise RangeError(f"v must lie in [0, 1), got {v}")
    if isinstance(n_period, bool) or int(n_period) != n_period or n_period < 1:
        raise RangeError(f"n_period must be an integer >= 1, got {n_period}")
    params = PmdParams(gamma, v, int(n_period))
    # survival(n+1)/survival(n) is N-periodic, so a scan of [1..4N] covers
    # every n once the period has been seen at least once
    n = np.arange(0, 4 * params.n_period + 1)
    phi = _survival_array(params, n)
    bad = np.nonzero(phi[1:] >= phi[:-1])[0]
    if bad.size:
        first = int(bad[0]) + 1
        raise PhysicalityError(
            f"survival({first}) = {phi[first]:.6g} is not below "
            f"survival({first - 1}) = {phi[first - 1]:.6g}",
            first,
        )
    return params


def _survival_array(params: PmdParams, n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    return params.gamma**n * (1.0 - params.v * np.sin(n * params.theta) ** 2)


def survival(params: PmdParams, n: int) -> float:
    """Probability that consecutive ones are at least ``n`` steps apart."""
    if n == 0:
        return 1.0
    return params.gamma**n * (1.0 - params.v * math.sin(n * params.theta) ** 2)


def emission_probs(params: PmdParams, j: int) -> tuple[float, float]:
    """Return ``(P(0|s_j), P(1|s_j))`` for causal state ``j``."""
    p0 = survival(params, j + 1) / survival(params, j)
    return p0, 1.0 - p0


def _transition_matrix(emit, next_on_0, next_on_1) -> np.ndarray:
    n = len(next_on_0)
    T = np.zeros((n, n))
    for j in range(n):
        T[j, next_on_0[j]] += emit[j][0]
        T[j, next_on_1[j]] += emit[j][1]
    return T


def stationary_distribution(machine) -> np.ndarray:
    """Solve ``pi = pi T`` with ``sum(pi) = 1`` by a direct linear solve.

    ``machine`` may be an `EpsilonMachine` or a row-stochastic matrix.
    """
    T = machine if isinstance(machine, np.ndarray) else machine.transition_matrix
    n = T.shape[0]
    system = np.vstack([T.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    if np.linalg.matrix_rank(system) < n:
        raise SingularityError("transition matrix has no unique fixed point")
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    if np.any(pi < -1e-12):
        raise SingularityError("stationary solution has negative mass")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def build_epsilon_machine(params: PmdParams) -> EpsilonMachine:
    n = params.n_period
    emit = np.array([emission_probs(params, j) for j in range(n)])
    next_on_0 = tuple((j + 1) % n for j in range(n))
    next_on_1 = (0,) * n
    pi = stationary_distribution(_transition_matrix(emit, next_on_0, next_on_1))
    return EpsilonMachine(params, emit, next_on_0, next_on_1, pi)


def strings(L: int) -> list[str]:
    """All binary strings of length ``L`` in table-index order."""
    return [format(i, f"0{L}b") for i in range(2**L)]


def _check_horizon(L: int, cap: int = MAX_HORIZON) -> None:
    if int(L) != L or L < 1:
        raise HorizonError(f"horizon must be a positive integer, got {L}")
    if L > cap:
        raise HorizonError(f"horizon {L} exceeds cap {cap}; use sampling instead")


def exact_distribution(machine: EpsilonMachine, L: int) -> ConditionalDistribution:
    """Exact ``P(x_{0:L} | s_j)`` as products of emission probabilities.

    Built recursively: the table for horizon ``t + 1`` prepends one symbol to
    the table for horizon ``t`` evaluated at the successor state.
    """
    _check_horizon(L)
    nxt0 = np.asarray(machine.next_on_0)
    nxt1 = np.asarray(machine.next_on_1)
    p0 = machine.emit[:, :1]
    p1 = machine.emit[:, 1:]
    table = np.ones((machine.n_states, 1))
    for _ in range(L):
        table = np.hstack([p0 * table[nxt0], p1 * table[nxt1]])
    return ConditionalDistribution(L, table)


def sample_classical(machine: EpsilonMachine, j_init: int, L: int, seed=None, shots=None):
    """Run the epsilon-machine forward from state ``j_init``.

    Parameters
    ----------
    machine : EpsilonMachine
    j_init : int
        Initial causal state.
    L : int
        Number of symbols to emit.
    seed : int or numpy.random.SeedSequence, optional
        Seed for a private generator; equal seeds give equal output.
    shots : int, optional
        If given, run that many independent trajectories in one vectorized
        pass and return an integer array of string indices.

    Returns
    -------
    str or ndarray
    """
    rng = np.random.default_rng(seed)
    nxt0 = np.asarray(machine.next_on_0)
    nxt1 = np.asarray(machine.next_on_1)
    p1 = machine.emit[:, 1]
    size = 1 if shots is None else int(shots)
    state = np.full(size, j_init, dtype=np.int64)
    index = np.zeros(size, dtype=np.int64)
    for _ in range(L):
        x = rng.random(size) < p1[state]
        index = 2 * index + x
        state = np.where(x, nxt1[state], nxt0[state])
    if shots is None:
        return format(int(index[0]), f"0{L}b")
    return index
