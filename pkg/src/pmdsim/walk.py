"""Compile a quantum model's Kraus pair into a three-step discrete-time quantum walk.

The coin is the memory qubit and the walker position carries the output.
Each walk step applies a position-dependent coin and then shifts the walker
by +1 for coin 0 and -1 for coin 1. With the factorisation

    A0 = U0 D0 V0,  A1 = U1 D1 V0,  D0 = diag(1, xi1),  D1 = diag(0, zeta),

one model timestep is realised by five non-identity coins:

    step 0, p =  0 : V0        splits the input into its singular components
    step 1, p = +1 : swap      returns the strong component towards p = 0
    step 1, p = -1 : mix       sends xi1 of the weak component to p = 0 and
                               zeta of it to p = -2
    step 2, p =  0 : U0 swap   finishes the 0 branch
    step 2, p = -2 : U1        finishes the 1 branch

The swap coin reverses the strong component's coin label, so it arrives at
p = 0 in coin slot 1 and the exit coin there undoes that swap. Which exit
position carries which outcome is found by propagation, not assumed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSVD, MappingError
from .optics import OpticalDecomposition, phase_residual, qhq_angles
from .process import ConditionalDistribution, _check_horizon
from .quantum import QuantumModel, complex_to_json

__all__ = [
    "STEPS",
    "MAX_CASCADE",
    "UnitaryFactors",
    "WalkProgram",
    "WalkState",
    "factor_kraus",
    "compile_walk",
    "apply_walk",
    "exit_maps",
    "verify_walk",
    "cascade_walk",
    "walk_distribution",
    "waveplate_table",
]

STEPS = 3
MAX_CASCADE = 10
SWAP = np.array([[0, 1], [1, 0]], dtype=complex)
_PORT_TOL = 1e-12


@dataclass(frozen=True)
class UnitaryFactors:
    """Shared-right-frame factorisation of the Kraus pair."""

    v0: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    d0: np.ndarray
    d1: np.ndarray

    @property
    def v1(self) -> np.ndarray:
        return self.v0


@dataclass(frozen=True)
class WalkProgram:
    """Coin schedule for one model timestep.

    Attributes
    ----------
    coins : dict
        ``(position, step) -> 2x2 unitary``; identity elsewhere.
    labels : dict
        ``(position, step) -> name`` for reporting.
    outcome_map : dict
        ``outcome -> exit position``, the site where that branch receives its
        last coin. After the final shift its coin-0 amplitude sits at
        ``exit + 1`` and its coin-1 amplitude at ``exit - 1``.
    """

    coins: dict
    labels: dict = field(default_factory=dict)
    outcome_map: dict = field(default_factory=dict)
    steps: int = STEPS

    def coin(self, p: int, k: int) -> np.ndarray:
        return self.coins.get((p, k), np.eye(2, dtype=complex))

    def final_positions(self, x: int) -> tuple[int, int]:
        q = self.outcome_map[x]
        return (q - 1, q + 1)

    def to_json(self) -> dict:
        return {
            "schema": "walk-v1",
            "steps": self.steps,
            "translation": {"0": 1, "1": -1},
            "coins": [
                {
                    "position": p,
                    "step": k,
                    "label": self.labels.get((p, k), ""),
                    "matrix": complex_to_json(c),
                }
                for (p, k), c in sorted(self.coins.items(), key=lambda kv: (kv[0][1], -kv[0][0]))
            ],
            "outcome_map": {
                str(x): {"exit_position": q, "final_positions": list(self.final_positions(x))}
                for x, q in sorted(self.outcome_map.items())
            },
        }


@dataclass(frozen=True)
class WalkState:
    """Joint coin-position amplitudes ``amps[i, c]`` at ``positions[i]``."""

    positions: np.ndarray
    amps: np.ndarray

    def amplitude(self, p: int) -> np.ndarray:
        i = p - int(self.positions[0])
        if 0 <= i < len(self.positions):
            return self.amps[i]
        return np.zeros(2, dtype=complex)

    def exit_vector(self, q: int) -> np.ndarray:
        """Coin vector of the branch whose last coin acted at ``q``."""
        return np.array([self.amplitude(q + 1)[0], self.amplitude(q - 1)[1]])

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))


def factor_kraus(model: QuantumModel) -> UnitaryFactors:
    """Factor ``A0 = U0 D0 V0`` and ``A1 = U1 D1 V0``.

    ``U1`` maps ``|1>`` to ``sigma_0``; its other column is the state
    orthogonal to ``sigma_0``. That column only ever meets zero amplitude
    because ``D1`` kills the ``|0>`` input.

    Raises
    ------
    DegenerateSVD
        When the singular values of ``A0`` coincide within 1e-12 (the N = 1
        model), leaving the singular frame arbitrary.
    """
    s = model.singular_values
    if abs(s[0] - s[1]) <= 1e-12:
        raise DegenerateSVD(f"singular values of A0 coincide: {s[0]:.15g}")
    mp = model.params
    v0 = model.svd_v.conj().T
    u0 = model.svd_u
    d0 = np.diag([1.0, mp.xi1]).astype(complex)
    d1 = np.diag([0.0, mp.zeta]).astype(complex)
    s0 = model.sigma[0]
    perp = np.array([-s0[1].conj(), s0[0].conj()])
    u1 = np.column_stack([perp, s0])
    return UnitaryFactors(v0, u0, u1, d0, d1)


def _evolve(program: WalkProgram, amps: np.ndarray, offset: int, origins) -> np.ndarray:
    """Run every step of ``program`` with a copy of its coins at each origin.

    ``amps[i]`` lives at position ``i + offset``. The register must leave
    ``program.steps`` sites of margin around each origin.
    """
    amps = amps.copy()
    for k in range(program.steps):
        for (p, kk), coin in program.coins.items():
            if kk != k:
                continue
            for o in origins:
                i = o + p - offset
                amps[i] = coin @ amps[i]
        shifted = np.zeros_like(amps)
        shifted[1:, 0] = amps[:-1, 0]
        shifted[:-1, 1] = amps[1:, 1]
        if np.any(amps[-1, 0]) or np.any(amps[0, 1]):
            raise RuntimeError("walker left the register")
        amps = shifted
    return amps


def apply_walk(program: WalkProgram, coin_state, p_init: int = 0) -> WalkState:
    """Evolve ``coin_state`` from position ``p_init`` through all walk steps.

    The coin schedule is placed relative to ``p_init``.
    """
    margin = program.steps + 1
    positions = np.arange(p_init - margin, p_init + margin + 1)
    amps = np.zeros((len(positions), 2), dtype=complex)
    amps[margin] = np.asarray(coin_state, dtype=complex)
    out = _evolve(program, amps, int(positions[0]), [p_init])
    return WalkState(positions, out)


def exit_maps(program: WalkProgram) -> dict:
    """Linear map from input coin to output coin at every occupied exit site.

    Returns
    -------
    dict
        ``exit position -> 2x2 matrix``, for sites where some basis input
        leaves nonzero amplitude.
    """
    states = [apply_walk(program, e) for e in np.eye(2, dtype=complex)]
    margin = program.steps
    maps = {}
    for q in range(-margin, margin + 1):
        m = np.column_stack([s.exit_vector(q) for s in states])
        if np.max(np.abs(m)) > _PORT_TOL:
            maps[q] = m
    return maps


def _discover(program: WalkProgram, model: QuantumModel) -> dict:
    maps = exit_maps(program)
    kraus = model.kraus
    if len(maps) != len(kraus):
        raise MappingError(
            f"walk has {len(maps)} occupied exit sites {sorted(maps)}, "
            f"expected one per outcome ({len(kraus)})"
        )
    ports = sorted(maps)
    best, best_cost = None, np.inf
    for perm in itertools.permutations(ports):
        cost = sum(phase_residual(maps[q], a) for q, a in zip(perm, kraus))
        if cost < best_cost:
            best, best_cost = perm, cost
    return {x: q for x, q in enumerate(best)}


def compile_walk(model: QuantumModel) -> WalkProgram:
    """Build the five-coin program for ``model`` and discover its outcome map."""
    f = factor_kraus(model)
    xi1, zeta = model.params.xi1, model.params.zeta
    mix = np.array([[-zeta, xi1], [xi1, zeta]], dtype=complex)
    coins = {
        (0, 0): f.v0,
        (1, 1): SWAP,
        (-1, 1): mix,
        (0, 2): f.u0 @ SWAP,
        (-2, 2): f.u1,
    }
    labels = {(0, 0): "V0", (1, 1): "swap", (-1, 1): "mix", (0, 2): "U0*swap", (-2, 2): "U1"}
    program = WalkProgram(coins, labels)
    return WalkProgram(coins, labels, _discover(program, model))


def verify_walk(program: WalkProgram, model: QuantumModel) -> float:
    """Largest deviation of the walk from the Kraus pair under one global phase.

    For each outcome ``x`` the map collected at its exit site must equal
    ``A_x`` times a phase common to all outcomes. The returned value is the
    worst Frobenius deviation, plus any amplitude found at unmapped sites.

    Raises
    ------
    MappingError
        If the occupied exit sites do not match the program's outcome map.
    """
    maps = exit_maps(program)
    if set(maps) != set(program.outcome_map.values()):
        raise MappingError(
            f"occupied exit sites {sorted(maps)} do not match outcome map {program.outcome_map}"
        )
    pairs = [(maps[program.outcome_map[x]], a) for x, a in enumerate(model.kraus)]
    overlap = sum(np.vdot(a, m) for m, a in pairs)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return max(float(np.linalg.norm(m - phase * a)) for m, a in pairs)


def cascade_walk(program: WalkProgram, coin_state, L: int) -> np.ndarray:
    """Run ``L`` timesteps on a widened register, one origin per output string.

    Returns
    -------
    ndarray, shape (2**L, 2)
        Final coin vector for every output string, in table-index order.
    """
    _check_horizon(L, MAX_CASCADE)
    spacing = 2 * program.steps + 2
    branches = np.asarray(coin_state, dtype=complex)[None, :]
    outcomes = sorted(program.outcome_map)
    for _ in range(L):
        origins = [spacing * (s + 1) for s in range(len(branches))]
        amps = np.zeros((spacing * (len(branches) + 2), 2), dtype=complex)
        for o, vec in zip(origins, branches):
            amps[o] = vec
        amps = _evolve(program, amps, 0, origins)
        state = WalkState(np.arange(len(amps)), amps)
        branches = np.array(
            [
                state.exit_vector(o + program.outcome_map[x])
                for o in origins
                for x in outcomes
            ]
        )
    return branches


def walk_distribution(program: WalkProgram, model: QuantumModel, L: int) -> ConditionalDistribution:
    """Output statistics obtained by cascading the walk from every memory state."""
    table = np.array(
        [np.sum(np.abs(cascade_walk(program, s, L)) ** 2, axis=1) for s in model.sigma]
    )
    return ConditionalDistribution(L, table)


def waveplate_table(program: WalkProgram) -> list[tuple[int, int, str, OpticalDecomposition]]:
    """Q-H-Q angles for every non-identity coin, ordered by step then position."""
    rows = []
    for (p, k), coin in sorted(program.coins.items(), key=lambda kv: (kv[0][1], -kv[0][0])):
        rows.append((p, k, program.labels.get((p, k), ""), qhq_angles(coin)))
    return rows
