"""Jones matrices for waveplates and quarter-half-quarter decompositions.

Conventions: the fast axis angle is measured from horizontal, in radians.
A plate with retardance ``delta`` at angle ``t`` is

    R(t) diag(e^{-i delta/2}, e^{i delta/2}) R(t)^T,   R(t) = [[cos t, -sin t], [sin t, cos t]],

which has unit determinant, so a Q-H-Q stack lies in SU(2). Any 2x2 unitary
is matched up to a global phase.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import ConvergenceError

__all__ = [
    "OpticalDecomposition",
    "rotation",
    "waveplate",
    "quarter_wave",
    "half_wave",
    "qhq",
    "phase_residual",
    "qhq_angles",
]


def rotation(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]])


def waveplate(t: float, delta: float) -> np.ndarray:
    r = rotation(t)
    d = np.diag([np.exp(-0.5j * delta), np.exp(0.5j * delta)])
    return r @ d @ r.T


def quarter_wave(t: float) -> np.ndarray:
    return waveplate(t, math.pi / 2)


def half_wave(t: float) -> np.ndarray:
    return waveplate(t, math.pi)


def qhq(q1: float, h: float, q2: float) -> np.ndarray:
    """Jones matrix of the stack ``Q(q1) H(h) Q(q2)`` (light meets ``q2`` first)."""
    return quarter_wave(q1) @ half_wave(h) @ quarter_wave(q2)


def phase_residual(a: np.ndarray, b: np.ndarray) -> float:
    """``min_chi ||a - e^{i chi} b||_F``."""
    overlap = np.vdot(b, a)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(a - phase * b))


@dataclass(frozen=True)
class OpticalDecomposition:
    """Waveplate angles (radians) with ``qhq(q1, h, q2) ~ target``."""

    q1: float
    h: float
    q2: float
    residual: float

    @property
    def degrees(self) -> tuple[float, float, float]:
        return tuple(math.degrees(t) for t in (self.q1, self.h, self.q2))

    def matrix(self) -> np.ndarray:
        return qhq(self.q1, self.h, self.q2)


def _wrap(t: float) -> float:
    # R(t + pi) = -R(t), so each plate is pi-periodic in its angle
    return float(np.mod(t, math.pi))


def qhq_angles(U, tol: float = 1e-8, max_restarts: int = 64) -> OpticalDecomposition:
    """Find waveplate angles reproducing ``U`` up to a global phase.

    Levenberg-Marquardt on the entries of ``qhq(q1, h, q2) - e^{i chi} U``
    from a fixed grid of starting points, so results are deterministic.

    Raises
    ------
    ValueError
        If ``U`` is not unitary to 1e-10.
    ConvergenceError
        If no start reaches ``tol``.
    """
    U = np.asarray(U, dtype=complex)
    if U.shape != (2, 2) or np.linalg.norm(U.conj().T @ U - np.eye(2)) > 1e-10:
        raise ValueError("target must be a 2x2 unitary")

    def resid(x):
        q1, h, q2, chi = x
        diff = qhq(q1, h, q2) - np.exp(1j * chi) * U
        return np.concatenate([diff.real.ravel(), diff.imag.ravel()])

    grid = (0.0, math.pi / 3, 2 * math.pi / 3)
    starts = itertools.islice(itertools.product(grid, grid, grid), max_restarts)
    best = None
    for q1, h, q2 in starts:
        w = qhq(q1, h, q2)
        overlap = np.vdot(U, w)
        chi0 = float(np.angle(overlap)) if abs(overlap) > 1e-12 else 0.0
        sol = least_squares(resid, [q1, h, q2, chi0], method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        q1s, hs, q2s = (_wrap(t) for t in sol.x[:3])
        r = phase_residual(qhq(q1s, hs, q2s), U)
        if best is None or r < best.residual:
            best = OpticalDecomposition(q1s, hs, q2s, r)
        if r <= tol * 1e-2:
            break
    if best is None or best.residual > tol:
        raise ConvergenceError(
            f"Q-H-Q fit stalled at residual {best.residual if best else float('nan'):.3g}"
        )
    return best
