"""Distortion and fidelity measures, all in bits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDensityMatrix
from .process import ConditionalDistribution

__all__ = [
    "CountTable",
    "kl_divergence",
    "per_symbol_conditional_kl",
    "empirical_conditional_distribution",
    "infidelity",
    "validate_density_matrix",
]


@dataclass(frozen=True)
class CountTable:
    """Outcome counts ``counts[j, i]`` of string ``i`` from initial state ``j``."""

    horizon: int
    counts: np.ndarray
    shots: np.ndarray

    def __post_init__(self):
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")
        if not np.array_equal(self.counts.sum(axis=1), self.shots):
            raise ValueError("per-state counts do not sum to the declared shots")

    @classmethod
    def from_indices(cls, horizon: int, indices) -> "CountTable":
        """Build from one array of sampled string indices per initial state."""
        counts = np.stack(
            [np.bincount(np.asarray(ix), minlength=2**horizon) for ix in indices]
        )
        return cls(horizon, counts, counts.sum(axis=1))


def kl_divergence(p, q) -> float:
    """Kullback-Leibler divergence ``D(p || q)`` in bits.

    Terms with ``p_i = 0`` contribute nothing. Returns ``math.inf`` when some
    ``p_i > 0`` meets ``q_i = 0``; the value is never clipped.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"support mismatch: {p.shape} vs {q.shape}")
    support = p > 0
    if np.any(q[support] <= 0):
        return math.inf
    ps = p[support]
    return float(np.sum(ps * np.log2(ps / q[support])))


def per_symbol_conditional_kl(pi, P: ConditionalDistribution, Ptilde: ConditionalDistribution) -> float:
    """Stationary-weighted conditional divergence per symbol.

        d = (1/L) sum_j pi_j D(P(.|s_j) || Ptilde(.|s_j))
    """
    if P.horizon != Ptilde.horizon:
        raise ValueError("horizons differ")
    if P.table.shape != Ptilde.table.shape:
        raise ValueError("state counts differ")
    pi = np.asarray(pi, dtype=float)
    total = 0.0
    for j, weight in enumerate(pi):
        if weight == 0.0:
            continue
        d = kl_divergence(P.table[j], Ptilde.table[j])
        if math.isinf(d):
            return math.inf
        total += weight * d
    return total / P.horizon


def empirical_conditional_distribution(counts: CountTable, smoothing: float = 0.0) -> ConditionalDistribution:
    """Add-constant estimate ``(count + eps) / (shots + eps * 2**L)``.

    With the default ``smoothing=0`` unseen strings get probability zero, so
    a divergence against a target that supports them is infinite. Use 0.5
    for reporting when that matters.
    """
    if np.any(counts.shots <= 0):
        raise ValueError("every initial state needs at least one shot")
    width = counts.counts.shape[1]
    table = (counts.counts + smoothing) / (counts.shots[:, None] + smoothing * width)
    return ConditionalDistribution(counts.horizon, table)


def validate_density_matrix(rho, atol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidDensityMatrix(f"expected a square matrix, got shape {rho.shape}")
    if not np.allclose(rho, rho.conj().T, atol=atol, rtol=0):
        raise InvalidDensityMatrix("matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > atol:
        raise InvalidDensityMatrix(f"trace {np.trace(rho).real:.6g} != 1")
    if np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2)) < -atol:
        raise InvalidDensityMatrix("matrix has a negative eigenvalue")
    return rho


def infidelity(rho, target) -> float:
    """``1 - <target|rho|target>``, clipped to [0, 1] against rounding."""
    rho = validate_density_matrix(rho)
    target = np.asarray(target, dtype=complex)
    if target.shape != (rho.shape[0],):
        raise InvalidDensityMatrix(f"state of shape {rho.shape} does not match target {target.shape}")
    overlap = np.vdot(target, rho @ target).real
    return float(min(1.0, max(0.0, 1.0 - overlap)))
