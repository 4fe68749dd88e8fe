import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import FULL_GRID
from oracles import kl_bits, survival_direct, table_direct
from pmdsim import (
    NoiseSpec,
    build_model,
    exact_distribution,
    memory_cost,
    model_for,
    quantum_counts,
    quantum_exact_distribution,
    sample_quantum,
    solve_model_params,
    validate_pmd,
    verify_survival,
)
from pmdsim.errors import ConstructionError, HorizonError, NoRealSolution, PhysicalityError, RangeError
from pmdsim.metrics import empirical_conditional_distribution, infidelity, per_symbol_conditional_kl
from pmdsim.quantum import (
    complex_from_json,
    completeness_residual,
    conditional_final_states,
    output_distribution,
    sample_quantum_batch,
    target_state,
)


def invariant_residuals(mp, gamma, v):
    """The six scalar relations the solved parameters must satisfy."""
    return [
        gamma - 1 / mp.eta**2,
        mp.gamma_aux - 4 * mp.alpha**2 * math.sin(mp.phi / 2) ** 2,
        mp.eta**2 - (1 + mp.gamma_aux / 2 + 0.5 * math.sqrt(mp.gamma_aux**2 + 4 * mp.gamma_aux)),
        (mp.beta0 + mp.beta1 * mp.alpha) ** 2 + mp.beta1**2 - 1,
        v - 4 * mp.alpha * mp.beta0 * mp.beta1,
        mp.zeta**2 + mp.xi1**2 - 1,
    ]


def orth_component(vec, target):
    t = target / np.linalg.norm(target)
    return float(np.linalg.norm(vec - np.vdot(t, vec) * t))


@st.composite
def solvable(draw):
    n = draw(st.integers(2, 10))
    g = draw(st.floats(0.3, 0.7))
    v = draw(st.one_of(st.just(0.0), st.floats(1e-3, 0.5)))
    try:
        p = validate_pmd(g, v, n)
        return p, model_for(p)
    except (PhysicalityError, NoRealSolution):
        assume(False)


class TestSolver:
    def test_reference_values(self, ref_params):
        mp = solve_model_params(ref_params)
        assert mp.eta**2 == pytest.approx(2.0, abs=1e-12)
        assert mp.gamma_aux == pytest.approx(0.5, abs=1e-12)
        assert mp.alpha == pytest.approx(0.5, abs=1e-12)
        assert mp.xi1 == pytest.approx(0.5, abs=1e-12)
        assert mp.zeta == pytest.approx(math.sqrt(0.75), abs=1e-12)
        assert mp.beta1**2 == pytest.approx((0.8 - math.sqrt(0.44)) / 2.5, abs=1e-12)
        # the closed form evaluates to 0.0546700; the quoted 0.054673 is a rounding slip
        assert mp.beta1**2 == pytest.approx(0.054673, abs=5e-6)
        assert mp.beta0 == pytest.approx(0.85537, abs=1e-5)
        assert mp.xi0 == 1.0

    def test_reference_invariants(self, ref_params):
        mp = solve_model_params(ref_params)
        assert max(abs(r) for r in invariant_residuals(mp, 0.5, 0.4)) <= 1e-12

    @pytest.mark.parametrize("n,g,v", FULL_GRID)
    def test_grid_invariants(self, n, g, v):
        mp = solve_model_params(validate_pmd(g, v, n))
        assert max(abs(r) for r in invariant_residuals(mp, g, v)) <= 1e-12
        assert mp.alpha > 0 and mp.beta0 > 0 and mp.beta1 > 0

    def test_alternate_root_also_normalises(self, ref_params):
        mp = solve_model_params(ref_params)
        u = mp.alt_beta1_sq
        assert u is not None and u > mp.beta1**2
        b1 = math.sqrt(u)
        b0 = 0.4 / (4 * mp.alpha * b1)
        assert abs((b0 + b1 * mp.alpha) ** 2 + b1**2 - 1) <= 1e-12

    @pytest.mark.parametrize("n", [2, 3, 6])
    def test_zero_modulation(self, n):
        p = validate_pmd(0.55, 0.0, n)
        mp = solve_model_params(p)
        assert mp.beta1 == 0.0 and mp.beta0 == 1.0
        model = build_model(mp, p)
        assert np.allclose(model.sigma, model.sigma[0], atol=1e-15)
        assert memory_cost(model) == 0.0
        # outcome 1 still fires with probability 1 - gamma per step
        a0, a1 = model.kraus
        assert np.linalg.norm(a1 @ model.sigma[0]) ** 2 == pytest.approx(0.45, abs=1e-12)
        assert np.linalg.norm(a0 @ model.sigma[0]) ** 2 == pytest.approx(0.55, abs=1e-12)

    def test_no_real_solution(self):
        with pytest.raises(NoRealSolution) as info:
            solve_model_params(validate_pmd(0.65, 0.4, 3))
        assert info.value.discriminant < 0

    def test_edge_of_grid_is_solvable(self):
        solve_model_params(validate_pmd(0.64, 0.4, 3))

    def test_single_state(self):
        p = validate_pmd(0.3, 0.0, 1)
        model = model_for(p)
        assert model.params.degenerate
        assert model.n_states == 1
        assert completeness_residual(model) <= 1e-12
        assert verify_survival(model, 10) <= 1e-12
        assert memory_cost(model) == 0.0


class TestModel:
    def test_reference_completeness(self, ref_model):
        assert completeness_residual(ref_model) <= 1e-12

    def test_kraus0_form(self, ref_model):
        mp = ref_model.params
        e = np.exp(1j * mp.phi)
        expected = np.array([[1, mp.alpha * (e - 1)], [0, e]]) / mp.eta
        assert np.allclose(ref_model.kraus0, expected, atol=1e-15)

    @pytest.mark.parametrize("n", [2, 3, 4, 8])
    def test_kraus0_power(self, n):
        model = model_for(validate_pmd(0.5, 0.3, n))
        eta = model.params.eta
        power = np.linalg.matrix_power(model.kraus0, n)
        assert np.max(np.abs(power - eta ** (-n) * np.eye(2))) <= 1e-10

    def test_eigenstructure(self, ref_model):
        z0, z1 = ref_model.eigvecs
        eta, phi = ref_model.params.eta, ref_model.params.phi
        assert np.linalg.norm(eta * ref_model.kraus0 @ z0 - z0) <= 1e-12
        assert np.linalg.norm(eta * ref_model.kraus0 @ z1 - np.exp(1j * phi) * z1) <= 1e-12

    def test_w_is_weak_right_singular_vector(self, ref_model):
        s = np.linalg.svd(ref_model.kraus0, compute_uv=False)
        assert s[0] == pytest.approx(1.0, abs=1e-12)
        assert s[1] == pytest.approx(ref_model.params.xi1, abs=1e-12)
        assert np.linalg.norm(ref_model.kraus0 @ ref_model.w) == pytest.approx(s[1], abs=1e-12)

    def test_construction_error(self, ref_params):
        from dataclasses import replace

        bad = replace(solve_model_params(ref_params), zeta=0.5)
        with pytest.raises(ConstructionError):
            build_model(bad, ref_params)

    @pytest.mark.parametrize("n,g,v", FULL_GRID)
    def test_grid_invariants(self, n, g, v):
        p = validate_pmd(g, v, n)
        model = model_for(p)
        assert completeness_residual(model) <= 1e-12
        assert np.max(np.abs(np.linalg.norm(model.sigma, axis=1) - 1)) <= 1e-12
        a0, a1 = model.kraus
        for j in range(n):
            s = model.sigma[j]
            assert orth_component(a0 @ s, model.sigma[(j + 1) % n]) <= 1e-10
            assert orth_component(a1 @ s, model.sigma[0]) <= 1e-10
            ratio = survival_direct(g, v, n, j + 1) / survival_direct(g, v, n, j)
            assert abs(np.linalg.norm(a0 @ s) ** 2 - ratio) <= 1e-10
            assert abs(np.linalg.norm(a1 @ s) ** 2 - (1 - ratio)) <= 1e-10
        assert verify_survival(model, 4 * n) <= 1e-10
        assert memory_cost(model) <= 1.0

    @settings(max_examples=60, deadline=None)
    @given(solvable())
    def test_random_invariants(self, pm):
        p, model = pm
        assert completeness_residual(model) <= 1e-12
        assert verify_survival(model, 4 * p.n_period) <= 1e-10
        assert max(abs(r) for r in invariant_residuals(model.params, p.gamma, p.v)) <= 1e-12
        mc = memory_cost(model)
        assert mc == (0.0 if p.v == 0 else 1.0)

    def test_json_roundtrip(self, ref_model):
        data = json.loads(json.dumps(ref_model.to_json()))
        assert data["schema"] == "qm-v1"
        assert np.array_equal(complex_from_json(data["kraus0"]), ref_model.kraus0)
        assert np.array_equal(complex_from_json(data["kraus1"]), ref_model.kraus1)
        assert np.array_equal(complex_from_json(data["sigma"]), ref_model.sigma)


class TestSurvival:
    def test_reference(self, ref_model):
        assert verify_survival(ref_model, 16) <= 1e-10

    def test_first_term_exact(self, ref_model):
        assert verify_survival(ref_model, 0) <= 1e-15

    def test_pure_decay(self):
        model = model_for(validate_pmd(0.6, 0.0, 5))
        state = model.sigma[0]
        for n in range(12):
            assert np.linalg.norm(state) ** 2 == pytest.approx(0.6**n, rel=1e-12)
            state = model.kraus0 @ state


class TestMemoryCost:
    def test_eight_states_one_qubit(self):
        p = validate_pmd(0.5, 0.4, 8)
        from pmdsim import build_epsilon_machine

        assert build_epsilon_machine(p).memory_cost == 3.0
        assert memory_cost(model_for(p)) == 1.0

    def test_grid(self):
        assert all(memory_cost(model_for(validate_pmd(g, v, n))) <= 1 for n, g, v in FULL_GRID)


class TestExactDistribution:
    def test_reference_value(self, ref_model):
        d = quantum_exact_distribution(ref_model, 2)
        assert d.prob(0, "00") == pytest.approx(0.15, abs=1e-12)

    @pytest.mark.parametrize("L", [1, 3, 6, 10])
    def test_rows_sum_to_one(self, ref_model, L):
        d = quantum_exact_distribution(ref_model, L)
        assert np.max(np.abs(d.table.sum(axis=1) - 1)) <= 1e-10

    @pytest.mark.parametrize("args", [(0.5, 0.4, 4), (0.45, 0.4, 7), (0.64, 0.4, 3), (0.3, 0.2, 2)])
    def test_matches_direct_oracle(self, args):
        model = model_for(validate_pmd(*args))
        for L in range(1, 7):
            assert np.max(np.abs(quantum_exact_distribution(model, L).table - table_direct(*args, L))) <= 1e-10

    def test_noiseless_density_route_agrees(self, ref_model):
        a = quantum_exact_distribution(ref_model, 5).table
        b = output_distribution(ref_model, 5).table
        assert np.max(np.abs(a - b)) <= 1e-12

    def test_horizon(self, ref_model):
        with pytest.raises(HorizonError):
            quantum_exact_distribution(ref_model, 21)


class TestSampling:
    def test_noise_range(self):
        with pytest.raises(RangeError):
            NoiseSpec(1.5)
        with pytest.raises(RangeError):
            NoiseSpec(-0.1)

    def test_noiseless_final_state_is_target(self, ref_model):
        for seed in range(50):
            j = seed % 4
            x, rho = sample_quantum(ref_model, j, 7, seed=seed)
            k = target_state(ref_model, j, x)
            assert infidelity(rho, ref_model.sigma[k]) <= 1e-12

    def test_full_depolarization(self, ref_model):
        for seed in range(10):
            _, rho = sample_quantum(ref_model, seed % 4, 5, NoiseSpec(1.0), seed=seed)
            assert np.allclose(rho, np.eye(2) / 2, atol=1e-15)

    def test_deterministic(self, ref_model):
        a = sample_quantum(ref_model, 2, 30, NoiseSpec(0.05), seed=77)
        b = sample_quantum(ref_model, 2, 30, NoiseSpec(0.05), seed=77)
        assert a[0] == b[0]
        assert np.array_equal(a[1], b[1])

    def test_batch_matches_single_shot_law(self, ref_model):
        L, shots = 3, 10**6
        exact = quantum_exact_distribution(ref_model, L)
        for j in range(4):
            idx = sample_quantum_batch(ref_model, j, L, shots, seed=j)
            freq = np.bincount(idx, minlength=2**L) / shots
            assert kl_bits(exact.table[j], freq) / L <= 1e-4

    def test_batch_first_draw_matches_single(self, ref_model):
        # both routes draw one uniform per timestep in the same order
        x, _ = sample_quantum(ref_model, 1, 6, seed=4)
        idx = sample_quantum_batch(ref_model, 1, 6, 1, seed=4)
        assert int(idx[0]) == int(x, 2)

    def test_counts_convergence(self, ref_model, ref_machine):
        L = 4
        counts = quantum_counts(ref_model, L, 10**6, seed=3)
        emp = empirical_conditional_distribution(counts)
        d = per_symbol_conditional_kl(ref_machine.pi, exact_distribution(ref_machine, L), emp)
        assert d <= 1e-4

    def test_counts_deterministic(self, ref_model):
        a = quantum_counts(ref_model, 3, 1000, NoiseSpec(0.1), seed=5)
        b = quantum_counts(ref_model, 3, 1000, NoiseSpec(0.1), seed=5)
        assert np.array_equal(a.counts, b.counts)

    def test_noise_changes_statistics(self, ref_model):
        clean = output_distribution(ref_model, 3).table
        noisy = output_distribution(ref_model, 3, NoiseSpec(0.2)).table
        assert np.max(np.abs(noisy.sum(axis=1) - 1)) <= 1e-12
        assert np.max(np.abs(clean - noisy)) > 1e-3

    def test_conditional_states_noiseless(self, ref_model):
        probs, rho = conditional_final_states(ref_model, 3)
        for j in range(4):
            for i in range(8):
                x = format(i, "03b")
                k = target_state(ref_model, j, x)
                assert infidelity(rho[j, i], ref_model.sigma[k]) <= 1e-10
