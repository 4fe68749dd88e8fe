"""Minimal classical and single-qubit quantum models of PMD renewal processes."""

__version__ = "0.1.0"

from .bound import BoundResult, Partition, classical_bound, enumerate_partitions, optimal_coarse_distribution
from .metrics import (
    CountTable,
    empirical_conditional_distribution,
    infidelity,
    kl_divergence,
    per_symbol_conditional_kl,
)
from .optics import OpticalDecomposition, qhq, qhq_angles
from .process import (
    ConditionalDistribution,
    EpsilonMachine,
    PmdParams,
    build_epsilon_machine,
    emission_probs,
    exact_distribution,
    sample_classical,
    stationary_distribution,
    survival,
    validate_pmd,
)
from .quantum import (
    ModelParams,
    NoiseSpec,
    QuantumModel,
    build_model,
    memory_cost,
    model_for,
    quantum_counts,
    quantum_exact_distribution,
    sample_quantum,
    solve_model_params,
    verify_survival,
)
from .walk import WalkProgram, apply_walk, compile_walk, factor_kraus, verify_walk
