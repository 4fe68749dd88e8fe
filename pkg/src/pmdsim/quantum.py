"""Single-qubit quantum models of PMD processes.

The model uses two Kraus operators on a qubit memory. ``A0`` is fixed to

    A0 = (1/eta) [[1, alpha (e^{i phi} - 1)], [0, e^{i phi}]],  phi = 2 pi / N,

so ``eta * A0`` has eigenvectors ``Z0 = (1, 0)`` and ``Z1 = (alpha, 1)`` with
eigenvalues 1 and ``e^{i phi}``, and ``A0**N`` is proportional to the
identity. The reset operator is ``A1 = zeta |sigma_0><v_1|``, with ``v_1``
the weaker right-singular vector of ``A0``. Memory states are
``|sigma_n> ~ beta0 Z0 + beta1 e^{i n phi} Z1``. Matching the survival
function of the process fixes all scalars:

    gamma = 1/eta**2,  v = 4 alpha beta0 beta1,
    (beta0 + alpha beta1)**2 + beta1**2 = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError, NoRealSolution, RangeError
from .metrics import CountTable
from .process import (
    ConditionalDistribution,
    PmdParams,
    _check_horizon,
    survival,
)

__all__ = [
    "RANK_TOL",
    "ModelParams",
    "QuantumModel",
    "NoiseSpec",
    "solve_model_params",
    "build_model",
    "model_for",
    "verify_survival",
    "completeness_residual",
    "quantum_exact_distribution",
    "output_distribution",
    "conditional_final_states",
    "sample_quantum",
    "sample_quantum_batch",
    "quantum_counts",
    "memory_cost",
    "target_state",
]

# singular values of the Gram matrix below this count as zero
RANK_TOL = 1e-10


@dataclass(frozen=True)
class ModelParams:
    """Scalars fixing the Kraus pair and memory states.

    ``alt_beta1_sq`` holds the other root of the quadratic for ``beta1**2``
    (None when it does not exist), for diagnostics only. ``degenerate`` marks
    the N = 1 geometric case, which bypasses the solver.
    """

    eta: float
    gamma_aux: float
    alpha: float
    phi: float
    beta0: float
    beta1: float
    xi1: float
    zeta: float
    alt_beta1_sq: float | None = None
    degenerate: bool = False

    @property
    def xi0(self) -> float:
        return 1.0


@dataclass(frozen=True)
class NoiseSpec:
    """Depolarizing noise on the memory qubit, applied once per timestep."""

    depolarizing_prob: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.depolarizing_prob <= 1.0:
            raise RangeError(
                f"depolarizing probability must lie in [0, 1], got {self.depolarizing_prob}"
            )


NOISELESS = NoiseSpec(0.0)


@dataclass(frozen=True)
class QuantumModel:
    """Kraus pair and memory states for one PMD process.

    Attributes
    ----------
    params : ModelParams
    kraus0, kraus1 : ndarray, shape (2, 2)
    sigma : ndarray, shape (N, 2)
        Unit memory states, ``sigma[n]`` encoding causal state ``n``.
    process : PmdParams
    svd_u, svd_v : ndarray, shape (2, 2)
        Columns are the left (``u_i``) and right (``v_i``) singular vectors
        of ``kraus0``, strongest first.
    """

    params: ModelParams
    kraus0: np.ndarray
    kraus1: np.ndarray
    sigma: np.ndarray
    process: PmdParams
    svd_u: np.ndarray = field(repr=False)
    svd_v: np.ndarray = field(repr=False)
    singular_values: np.ndarray = field(repr=False)

    @property
    def n_states(self) -> int:
        return self.sigma.shape[0]

    @property
    def kraus(self) -> tuple[np.ndarray, np.ndarray]:
        return self.kraus0, self.kraus1

    @property
    def eigvecs(self) -> tuple[np.ndarray, np.ndarray]:
        """``(Z0, Z1)``, the eigenvectors of ``eta * kraus0``."""
        return (
            np.array([1.0, 0.0], dtype=complex),
            np.array([self.params.alpha, 1.0], dtype=complex),
        )

    @property
    def w(self) -> np.ndarray:
        """Right vector of the reset operator; equals ``v_1``."""
        return self.svd_v[:, 1]

    def to_json(self) -> dict:
        p = self.params
        return {
            "schema": "qm-v1",
            "process": {
                "gamma": self.process.gamma,
                "v": self.process.v,
                "n_period": self.process.n_period,
            },
            "params": {
                "eta": p.eta,
                "gamma_aux": p.gamma_aux,
                "alpha": p.alpha,
                "phi": p.phi,
                "beta0": p.beta0,
                "beta1": p.beta1,
                "xi0": p.xi0,
                "xi1": p.xi1,
                "zeta": p.zeta,
                "alt_beta1_sq": p.alt_beta1_sq,
                "degenerate": p.degenerate,
            },
            "kraus0": complex_to_json(self.kraus0),
            "kraus1": complex_to_json(self.kraus1),
            "sigma": complex_to_json(self.sigma),
        }


def complex_to_json(a) -> list:
    """Nested lists with each complex entry as ``[re, im]``."""
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def complex_from_json(data) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def solve_model_params(params: PmdParams) -> ModelParams:
    """Solve for the scalars of the single-qubit model.

    ``eta**2 = 1/gamma``; with ``E = eta**2 - 1`` the singular-value
    condition gives ``gamma_aux = E**2 / (1 + E)`` and
    ``alpha = sqrt(gamma_aux) / (2 sin(phi/2))``. Writing ``u = beta1**2``
    and eliminating ``beta0 = v / (4 alpha beta1)`` from the normalisation
    leaves

        (alpha**2 + 1) u**2 + (v/2 - 1) u + v**2 / (16 alpha**2) = 0.

    The smaller root is taken, since it connects continuously to
    ``beta1 = 0`` as ``v -> 0``.

    Raises
    ------
    NoRealSolution
        If the quadratic has a negative discriminant.
    """
    g, v, n = params.gamma, params.v, params.n_period
    eta = 1.0 / math.sqrt(g)
    if n == 1:
        return ModelParams(
            eta=eta, gamma_aux=0.0, alpha=0.0, phi=2.0 * math.pi,
            beta0=1.0, beta1=0.0, xi1=math.sqrt(g), zeta=math.sqrt(1.0 - g),
            degenerate=True,
        )
    phi = 2.0 * math.pi / n
    excess = 1.0 / g - 1.0
    gamma_aux = excess * excess / (1.0 + excess)
    alpha = math.sqrt(gamma_aux) / (2.0 * math.sin(phi / 2.0))
    # the weaker singular value of A0 is 1/eta**2 once the stronger one is 1
    xi1 = g
    zeta = math.sqrt(1.0 - g * g)

    if v == 0.0:
        return ModelParams(eta, gamma_aux, alpha, phi, 1.0, 0.0, xi1, zeta)

    a = alpha * alpha + 1.0
    b = v / 2.0 - 1.0
    c = v * v / (16.0 * alpha * alpha)
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise NoRealSolution(
            f"no real beta1 for gamma={g}, v={v}, N={n}: discriminant {disc:.6g} < 0",
            disc,
        )
    root = math.sqrt(disc)
    # both roots are positive since c > 0 and -b > 0; the citardauq form
    # avoids cancellation in the small root
    u_small = 2.0 * c / (-b + root)
    u_large = (-b + root) / (2.0 * a)
    beta1 = math.sqrt(u_small)
    beta0 = v / (4.0 * alpha * beta1)
    return ModelParams(
        eta, gamma_aux, alpha, phi, beta0, beta1, xi1, zeta,
        alt_beta1_sq=u_large,
    )


def _svd_frames(a0: np.ndarray):
    """SVD of ``a0`` as column frames ``(U, s, V)`` with ``a0 = U diag(s) V^H``."""
    u, s, vh = np.linalg.svd(a0)
    return u, s, vh.conj().T


def build_model(mp: ModelParams, process: PmdParams, tol: float = 1e-10) -> QuantumModel:
    """Assemble Kraus operators and memory states from solved scalars.

    Raises
    ------
    ConstructionError
        If ``A0^H A0 + A1^H A1`` differs from the identity by more than
        ``tol`` in Frobenius norm.
    """
    n = process.n_period
    if mp.degenerate:
        kraus0 = math.sqrt(process.gamma) * np.eye(2, dtype=complex)
        kraus1 = math.sqrt(1.0 - process.gamma) * np.eye(2, dtype=complex)
        sigma = np.array([[1.0, 0.0]], dtype=complex)
        u, s, v = _svd_frames(kraus0)
        model = QuantumModel(mp, kraus0, kraus1, sigma, process, u, v, s)
    else:
        phase = np.exp(1j * mp.phi)
        kraus0 = np.array(
            [[1.0, mp.alpha * (phase - 1.0)], [0.0, phase]], dtype=complex
        ) / mp.eta
        steps = np.exp(1j * mp.phi * np.arange(n))
        sigma = np.empty((n, 2), dtype=complex)
        sigma[:, 0] = mp.beta0 + mp.beta1 * mp.alpha * steps
        sigma[:, 1] = mp.beta1 * steps
        sigma /= np.linalg.norm(sigma, axis=1, keepdims=True)
        u, s, v = _svd_frames(kraus0)
        kraus1 = mp.zeta * np.outer(sigma[0], v[:, 1].conj())
        model = QuantumModel(mp, kraus0, kraus1, sigma, process, u, v, s)
    resid = completeness_residual(model)
    if resid > tol:
        raise ConstructionError(f"completeness residual {resid:.3g} exceeds {tol:g}")
    return model


def model_for(params: PmdParams) -> QuantumModel:
    """Solve and build in one call."""
    return build_model(solve_model_params(params), params)


def completeness_residual(model: QuantumModel) -> float:
    total = sum(a.conj().T @ a for a in model.kraus)
    return float(np.linalg.norm(total - np.eye(2)))


def verify_survival(model: QuantumModel, n_max: int) -> float:
    """Max over ``n <= n_max`` of ``| ||A0^n sigma_0||^2 - survival(n) |``."""
    state = model.sigma[0].copy()
    worst = 0.0
    for n in range(n_max + 1):
        worst = max(worst, abs(np.vdot(state, state).real - survival(model.process, n)))
        state = model.kraus0 @ state
    return worst


def quantum_exact_distribution(model: QuantumModel, L: int) -> ConditionalDistribution:
    """``P(x | sigma_j) = ||A_{x_{L-1}} ... A_{x_0} sigma_j||^2``."""
    _check_horizon(L)
    kraus = np.stack(model.kraus)
    # amps[j, i, :] is the unnormalised branch for string i from sigma_j
    amps = model.sigma[:, None, :]
    for _ in range(L):
        branched = np.einsum("xab,jib->jixa", kraus, amps)
        amps = branched.reshape(amps.shape[0], -1, 2)
    table = np.sum(np.abs(amps) ** 2, axis=-1)
    return ConditionalDistribution(L, table)


def _depolarize(rho: np.ndarray, p: float) -> np.ndarray:
    if p == 0.0:
        return rho
    trace = np.trace(rho, axis1=-2, axis2=-1)[..., None, None]
    return (1.0 - p) * rho + p * trace * np.eye(2) / 2.0


def _branch_density_matrices(model: QuantumModel, L: int, noise: NoiseSpec):
    """Unnormalised final memory states for every (initial state, string)."""
    kraus = np.stack(model.kraus)
    p = noise.depolarizing_prob
    rho = np.einsum("ja,jb->jab", model.sigma, model.sigma.conj())[:, None]
    for _ in range(L):
        branched = np.einsum("xab,jibc,xdc->jixad", kraus, rho, kraus.conj())
        rho = _depolarize(branched.reshape(rho.shape[0], -1, 2, 2), p)
    return rho


def output_distribution(model: QuantumModel, L: int, noise: NoiseSpec = NOISELESS) -> ConditionalDistribution:
    """Output statistics of the (possibly noisy) model, from density matrices."""
    _check_horizon(L)
    rho = _branch_density_matrices(model, L, noise)
    table = np.trace(rho, axis1=-2, axis2=-1).real
    return ConditionalDistribution(L, table)


def target_state(model: QuantumModel, j: int, x: str) -> int:
    """Label of the memory state reached from ``sigma_j`` after string ``x``."""
    n = model.n_states
    for symbol in x:
        j = 0 if symbol == "1" else (j + 1) % n
    return j


def conditional_final_states(model: QuantumModel, L: int, noise: NoiseSpec = NOISELESS):
    """Probabilities and normalised final memory states per condition.

    Returns
    -------
    probs : ndarray, shape (N, 2**L)
    rho : ndarray, shape (N, 2**L, 2, 2)
        Normalised final states; NaN where the branch has zero probability.
    """
    _check_horizon(L)
    rho = _branch_density_matrices(model, L, noise)
    probs = np.trace(rho, axis1=-2, axis2=-1).real
    with np.errstate(invalid="ignore", divide="ignore"):
        normed = rho / probs[..., None, None]
    return probs, normed


def sample_quantum(model: QuantumModel, j_init: int, L: int, noise: NoiseSpec = NOISELESS, seed=None):
    """Simulate one run of ``L`` timesteps with Born-rule branching.

    Returns
    -------
    outcome : str
    rho : ndarray, shape (2, 2)
        Normalised final memory state.
    """
    rng = np.random.default_rng(seed)
    p = noise.depolarizing_prob
    rho = np.outer(model.sigma[j_init], model.sigma[j_init].conj())
    out = []
    for _ in range(L):
        a0, a1 = model.kraus
        branch0 = a0 @ rho @ a0.conj().T
        p0 = np.trace(branch0).real
        if rng.random() < p0:
            out.append("0")
            rho = branch0 / p0
        else:
            out.append("1")
            branch1 = a1 @ rho @ a1.conj().T
            rho = branch1 / np.trace(branch1).real
        rho = _depolarize(rho, p)
    return "".join(out), rho


def sample_quantum_batch(model: QuantumModel, j_init: int, L: int, shots: int, noise: NoiseSpec = NOISELESS, seed=None) -> np.ndarray:
    """Vectorized sequential sampling; returns string indices of ``shots`` runs."""
    rng = np.random.default_rng(seed)
    p = noise.depolarizing_prob
    a0, a1 = model.kraus
    rho = np.broadcast_to(
        np.outer(model.sigma[j_init], model.sigma[j_init].conj()), (shots, 2, 2)
    ).copy()
    index = np.zeros(shots, dtype=np.int64)
    for _ in range(L):
        b0 = a0 @ rho @ a0.conj().T
        b1 = a1 @ rho @ a1.conj().T
        p0 = np.trace(b0, axis1=1, axis2=2).real
        p1 = np.trace(b1, axis1=1, axis2=2).real
        one = rng.random(shots) >= p0
        index = 2 * index + one
        rho = np.where(one[:, None, None], b1 / p1[:, None, None], b0 / p0[:, None, None])
        rho = _depolarize(rho, p)
    return index


def quantum_counts(model: QuantumModel, L: int, shots: int, noise: NoiseSpec = NOISELESS, seed=None):
    """Outcome counts of ``shots`` runs from every memory state.

    Each state's counts are a multinomial draw from the model's exact (noisy)
    output distribution, which is the law of sequential Born sampling.
    Child seeds are spawned per initial state so rows are independent.
    """
    dist = output_distribution(model, L, noise)
    seeds = np.random.SeedSequence(seed).spawn(model.n_states)
    counts = np.empty(dist.table.shape, dtype=np.int64)
    for j, child in enumerate(seeds):
        probs = np.clip(dist.table[j], 0.0, None)
        counts[j] = np.random.default_rng(child).multinomial(shots, probs / probs.sum())
    return CountTable(L, counts, np.full(model.n_states, shots, dtype=np.int64))


def memory_cost(model: QuantumModel) -> float:
    """``log2`` of the numerical rank of the memory-state Gram matrix."""
    gram = model.sigma.conj() @ model.sigma.T
    sv = np.linalg.svd(gram, compute_uv=False)
    rank = int(np.sum(sv > RANK_TOL))
    return math.log2(rank)
