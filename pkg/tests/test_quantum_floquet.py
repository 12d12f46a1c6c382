import math

import numpy as np
import pytest
import scipy.linalg

from kickjt import (DimensionMismatch, EigFailure, Operator, StepUnderflow,
                    apply_floquet, build_basis, build_operators, coherent_state,
                    diagonalize, expectation, floquet_operator, h0_phases,
                    kick_propagator, make_config, pes_seed, pgs_seed,
                    product_state, sector_leakage, spin_state, track_eigenstate)
from kickjt.observables import SpinDirection
from kickjt.quantum_floquet import SPIN_HALF, kron_osc_spin, osc_position_matrix
from conftest import DELTA, OMEGA, reference_config


class TestBasis:
    def test_minimal_truncation(self):
        basis = build_basis(0)
        assert basis.dim == 2
        assert basis.entries() == [(0, 0, -1), (0, 0, 1)]
        assert list(basis.parity_class) == ["O", "E"]

    def test_one_phonon_truncation(self):
        basis = build_basis(1)
        assert basis.dim == 6
        odd = {basis.entry(k) for k in basis.sector_indices("O")}
        assert odd == {(0, 0, -1), (1, 0, 1), (0, 1, 1)}

    def test_reference_truncation_counts(self, basis18):
        assert basis18.dim == 380
        assert basis18.osc_dim == 190
        assert basis18.sector_indices("O").size == 190
        assert basis18.sector_indices("E").size == 190

    def test_index_maps_are_inverse_bijections(self, basis18):
        seen = set()
        for k in range(basis18.dim):
            entry = basis18.entry(k)
            assert basis18.index(*entry) == k
            seen.add(entry)
        assert len(seen) == basis18.dim

    def test_ordering_ascending_in_total_then_nx_then_sigma(self, basis18):
        keys = [(nx + ny, nx, sigma) for nx, ny, sigma in basis18.entries()]
        assert keys == sorted(keys)


class TestOperators:
    def test_parity_eigenvalues_on_lowest_states(self, basis18):
        par = basis18.parity
        assert par[basis18.index(0, 0, -1)] == -1
        assert par[basis18.index(0, 0, 1)] == 1

    def test_parity_squares_to_identity_exactly(self, basis18):
        assert np.all(basis18.parity ** 2 == 1)

    def test_position_matrix_element(self, basis18):
        cfg = reference_config()
        ops = build_operators(basis18, cfg)
        i = basis18.index(1, 0, -1)
        j = basis18.index(0, 0, -1)
        assert ops.q_x.matrix[i, j] == pytest.approx(1 / math.sqrt(2))
        assert ops.q_x.hermitian

    def test_h0_phase_on_ground_state(self, basis18):
        cfg = reference_config(0.0)
        phases = h0_phases(basis18, cfg)
        value = np.angle(phases[basis18.index(0, 0, -1)])
        assert value == pytest.approx(-(OMEGA - DELTA / 2))
        assert value == pytest.approx(0.41129, abs=1e-5)


class TestKickPropagator:
    def test_identity_at_zero_coupling(self, basis18):
        k = kick_propagator("x", 0.0, basis18)
        assert np.max(np.abs(k.matrix - np.eye(basis18.dim))) <= 1e-14

    def test_exact_unitarity(self, basis18):
        k = kick_propagator("x", 0.32, basis18)
        defect = np.max(np.abs(k.matrix.conj().T @ k.matrix - np.eye(basis18.dim)))
        assert defect <= 1e-12
        assert k.unitary

    def test_pulse_conjugation_identity(self, basis18):
        rot = scipy.linalg.expm(-1j * (math.pi / 4) * 2 * SPIN_HALF["y"])
        rot_full = kron_osc_spin(np.eye(basis18.osc_dim), rot)
        k_z = kick_propagator("x", 0.32, basis18, spin_axis="z")
        k_x = kick_propagator("x", 0.32, basis18, spin_axis="x")
        conjugated = rot_full @ k_z.matrix @ rot_full.conj().T
        assert np.max(np.abs(conjugated - k_x.matrix)) <= 1e-12

    def test_small_instance_matches_expm(self):
        basis = build_basis(3)
        lam = 0.27
        generator = kron_osc_spin(osc_position_matrix(basis, "y"), SPIN_HALF["y"])
        expected = scipy.linalg.expm(-1j * lam * generator)
        actual = kick_propagator("y", lam, basis).matrix
        assert np.max(np.abs(expected - actual)) <= 1e-12


class TestFloquetOperator:
    def test_diagonal_at_zero_coupling(self, basis18):
        cfg = reference_config(0.0)
        u = floquet_operator(cfg, basis18)
        off = u.matrix - np.diag(np.diag(u.matrix))
        assert np.max(np.abs(off)) <= 1e-14

    def test_unitarity(self, basis18):
        cfg = reference_config(0.46)
        u = floquet_operator(cfg, basis18)
        assert np.max(np.abs(u.matrix.conj().T @ u.matrix - np.eye(basis18.dim))) <= 1e-10

    def test_commutes_with_parity(self, basis18):
        cfg = reference_config(0.32)
        u = floquet_operator(cfg, basis18).matrix
        par = basis18.parity
        assert np.max(np.abs(u * par[None, :] - par[:, None] * u)) <= 1e-10

    def test_parity_block_structure(self, basis18):
        cfg = reference_config(0.32)
        u = floquet_operator(cfg, basis18).matrix
        odd = basis18.sector_indices("O")
        even = basis18.sector_indices("E")
        assert np.max(np.abs(u[np.ix_(odd, even)])) <= 1e-10
        assert np.max(np.abs(u[np.ix_(even, odd)])) <= 1e-10

    def test_vector_application_matches_dense(self, basis18):
        cfg = reference_config(0.32)
        rng = np.random.default_rng(7)
        vec = rng.normal(size=basis18.dim) + 1j * rng.normal(size=basis18.dim)
        vec /= np.linalg.norm(vec)
        dense = floquet_operator(cfg, basis18).matrix @ vec
        assert np.max(np.abs(apply_floquet(vec, cfg, basis18) - dense)) <= 1e-12


class TestDiagonalize:
    def test_zero_coupling_matches_analytic_diagonal(self, basis18):
        cfg = reference_config(0.0)
        spec = diagonalize(floquet_operator(cfg, basis18), parity=basis18.parity)
        analytic = -(cfg.omega * (basis18.total + 1) + cfg.delta * basis18.sigma / 2)
        analytic = (analytic + math.pi) % (2 * math.pi) - math.pi
        assert np.max(np.abs(np.sort(spec.eigenphases) - np.sort(analytic))) <= 1e-12

    def test_small_instance_brute_force_oracle(self):
        basis = build_basis(2)
        assert basis.dim == 12
        lam = 0.1
        cfg = make_config(OMEGA, DELTA, lam)
        q_x = kron_osc_spin(osc_position_matrix(basis, "x"), np.eye(2))
        q_y = kron_osc_spin(osc_position_matrix(basis, "y"), np.eye(2))
        s_x = kron_osc_spin(np.eye(basis.osc_dim), SPIN_HALF["x"])
        s_y = kron_osc_spin(np.eye(basis.osc_dim), SPIN_HALF["y"])
        h0 = np.diag(cfg.omega * (basis.total + 1) + cfg.delta * basis.sigma / 2)
        brute = (scipy.linalg.expm(-1j * h0)
                 @ scipy.linalg.expm(-1j * lam * q_x @ s_x)
                 @ scipy.linalg.expm(-1j * lam * q_y @ s_y))
        brute_phases = np.sort(np.angle(np.linalg.eigvals(brute)))
        spec = diagonalize(floquet_operator(cfg, basis), parity=basis.parity)
        assert np.max(np.abs(np.sort(spec.eigenphases) - brute_phases)) <= 1e-10

    def test_eigenvector_orthonormality(self, basis18):
        cfg = reference_config(0.32)
        spec = diagonalize(floquet_operator(cfg, basis18), parity=basis18.parity)
        gram = spec.vectors.conj().T @ spec.vectors
        assert np.max(np.abs(gram - np.eye(basis18.dim))) <= 1e-9

    def test_eigenvalue_moduli_on_unit_circle(self, basis18):
        cfg = reference_config(0.32)
        u = floquet_operator(cfg, basis18)
        eigvals = np.linalg.eigvals(u.matrix)
        assert np.max(np.abs(np.abs(eigvals) - 1.0)) <= 1e-8

    def test_residual_failure_raises(self):
        rng = np.random.default_rng(3)
        bad = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
        with pytest.raises(EigFailure):
            diagonalize(Operator(bad, unitary=True))

    @pytest.mark.parametrize("lam", [0.1, 0.32])
    def test_spectral_stability_under_truncation(self, lam):
        # nearest-by-phase selection is only meaningful while the reference
        # neighbourhood is free of aliased near-cutoff states, i.e. through
        # the first bifurcation; beyond that the wrapped quasi-energies of
        # poorly converged high states enter the window
        ref_phase = 0.41129
        phases = {}
        for n_t in (18, 22):
            basis = build_basis(n_t)
            cfg = reference_config(lam).with_n_t(n_t)
            spec = diagonalize(floquet_operator(cfg, basis), parity=basis.parity)
            phases[n_t] = spec.eigenphases
        def circ_dist(a, b):
            return np.abs((a - b + math.pi) % (2 * math.pi) - math.pi)
        nearest20 = phases[18][np.argsort(circ_dist(phases[18], ref_phase))[:20]]
        for phase in nearest20:
            assert np.min(circ_dist(phases[22], phase)) < 1e-3

    def test_tracked_state_phase_stable_under_truncation(self):
        # the eigenstate the artifact actually follows is what must be
        # truncation-converged in the crossover regime
        phases = {}
        for n_t in (18, 22):
            basis = build_basis(n_t)
            cfg = reference_config(0.32).with_n_t(n_t)
            path = track_eigenstate(0.0, 0.32, pgs_seed(basis), cfg, basis)
            phases[n_t] = path.final().eigenphase
        move = abs((phases[18] - phases[22] + math.pi) % (2 * math.pi) - math.pi)
        assert move < 1e-3


class TestTracking:
    def test_pgs_starts_at_ground_state(self, pgs_path, basis18):
        first = pgs_path.samples[0]
        assert first.lam == 0.0
        k = basis18.index(0, 0, -1)
        assert abs(abs(first.state[k]) - 1.0) <= 1e-12
        assert first.eigenphase == pytest.approx(-(OMEGA - DELTA / 2))

    def test_consecutive_overlaps_within_threshold(self, pgs_path, base_cfg):
        for sample in pgs_path.samples[1:]:
            assert 1.0 - sample.overlap < base_cfg.overlap_threshold
            assert sample.overlap >= 0.99

    def test_path_lands_on_stops(self, pgs_path, lam_grid):
        tracked = set(np.round(pgs_path.lams(), 12))
        for lam in lam_grid:
            assert lam in tracked

    def test_sector_is_odd_and_leakage_zero(self, pgs_path, basis18):
        assert pgs_path.sector == "O"
        for sample in pgs_path.samples:
            assert sector_leakage(sample.state, basis18, "O") <= 1e-8

    def test_tracked_state_matches_unrestricted_eigenvector(self, pgs_path, basis18):
        # plain Schur on the full matrix, no parity hint: the matching
        # eigenvector must still live in the odd sector
        cfg = reference_config(0.32)
        spec = diagonalize(floquet_operator(cfg, basis18))
        tracked = pgs_path.sample_at(0.32).state
        k, overlap = spec.best_overlap(tracked)
        assert overlap > 0.9999
        assert sector_leakage(spec.vectors[:, k], basis18, "O") <= 1e-8

    def test_pes_is_doublet_partner(self, pgs_path, pes_path_032):
        g = pgs_path.sample_at(0.32)
        e = pes_path_032.sample_at(0.32)
        assert pes_path_032.sector == "E"
        gap = abs((g.eigenphase - e.eigenphase + math.pi) % (2 * math.pi) - math.pi)
        assert gap < 0.01

    def test_invalid_seed_rejected(self, basis18, base_cfg):
        rng = np.random.default_rng(5)
        vec = rng.normal(size=basis18.dim) + 1j * rng.normal(size=basis18.dim)
        vec /= np.linalg.norm(vec)
        with pytest.raises(EigFailure):
            track_eigenstate(0.0, 0.1, vec, base_cfg, basis18)

    def test_step_underflow_on_impossible_threshold(self):
        cfg = make_config(OMEGA, DELTA, 0.3, n_t=3, overlap_threshold=1e-15)
        basis = build_basis(3)
        with pytest.raises(StepUnderflow):
            track_eigenstate(0.0, 0.3, pgs_seed(basis), cfg, basis)


class TestExpectation:
    def test_ground_state_values(self, basis18):
        cfg = reference_config()
        ops = build_operators(basis18, cfg)
        ground = basis18.basis_state(0, 0, -1)
        assert expectation(ground, ops.q_x) == pytest.approx(0.0, abs=1e-15)
        assert expectation(ground, ops.s_z) == pytest.approx(-0.5)

    def test_hermitian_expectation_is_real(self, basis18):
        cfg = reference_config()
        ops = build_operators(basis18, cfg)
        rng = np.random.default_rng(11)
        vec = rng.normal(size=basis18.dim) + 1j * rng.normal(size=basis18.dim)
        vec /= np.linalg.norm(vec)
        assert abs(expectation(vec, ops.s_x).imag) <= 1e-12

    def test_coherent_state_position(self, basis18):
        osc = coherent_state(2.0, 0.0, basis18)
        state = product_state(osc, spin_state(SpinDirection(math.pi, 0.0)))
        cfg = reference_config()
        ops = build_operators(basis18, cfg)
        value = expectation(state, ops.q_x).real
        assert value == pytest.approx(2 * math.sqrt(2), rel=0.01)
        assert value == pytest.approx(2.828, abs=0.03)

    def test_dimension_mismatch(self, basis18):
        cfg = reference_config()
        ops = build_operators(basis18, cfg)
        with pytest.raises(DimensionMismatch):
            expectation(np.ones(3) / math.sqrt(3), ops.q_x)
