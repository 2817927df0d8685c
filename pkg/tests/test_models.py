import numpy as np
import pytest

from chiralspin import (
    CascadeSpec,
    DomainError,
    ModeSpec,
    SpinSite,
    basis_vector,
    build_bidirectional_model,
    build_cascade_hamiltonian,
    build_cascaded_model,
    build_chain_model,
    build_collective_jump,
    build_full_model,
    build_nonhermitian_hamiltonian,
    commutator,
    spin_operators,
    total_excitation,
)
from chiralspin.models import apply_generator

from conftest import random_density

# one-excitation basis bookkeeping for two spins-1/2: |uu>, |ud>, |du>, |dd>
UU, UD, DU, DD = 0, 1, 2, 3


def lindblad_rhs(h, rate_ops, rho):
    """Reference master-equation right-hand side, written out longhand."""
    out = -1j * (h @ rho - rho @ h)
    for rate, z in rate_ops:
        zd = z.conj().T
        out += rate * (z @ rho @ zd - 0.5 * (zd @ z @ rho + rho @ zd @ z))
    return out


class TestModeSpec:
    def test_class_derived_from_angular_momentum(self):
        assert ModeSpec(+1, +1, 1.0, 0.1, 2).coupling_class == "rotating"
        assert ModeSpec(+1, -1, 1.0, 0.1, 2).coupling_class == "counter_rotating"

    def test_inconsistent_class_rejected(self):
        with pytest.raises(DomainError):
            ModeSpec(+1, -1, 1.0, 0.1, 2, coupling_class="rotating")

    def test_negative_coupling_rejected(self):
        with pytest.raises(DomainError):
            ModeSpec(+1, +1, 1.0, -0.1, 2)


class TestCascadeSpec:
    def test_positions_must_increase(self, two_spins):
        with pytest.raises(DomainError):
            CascadeSpec(1.0, 0.0, 1.0, tuple(reversed(two_spins)))

    def test_needs_two_sites(self, two_spins):
        with pytest.raises(DomainError):
            CascadeSpec(1.0, 0.0, 1.0, two_spins[:1])

    def test_negative_rate_rejected(self, two_spins):
        with pytest.raises(DomainError):
            CascadeSpec(-1.0, 0.0, 1.0, two_spins)


class TestFullModel:
    def test_zero_coupling_is_diagonal_detuning(self, two_spins):
        mode = ModeSpec(+1, +1, detuning=3.0, g=0.0, fock_cutoff=1)
        model = build_full_model(two_spins, (mode,))
        h = model.hamiltonian.matrix
        assert np.max(np.abs(h - np.diag(np.diag(h)))) == 0.0
        # spin term only: Delta (S_A^z + S_B^z)
        expected = 3.0 * np.array([1, 0, 0, 0, 0, -1, -1, -1], dtype=float)[[0, 1, 2, 3, 4, 5, 6, 7]]
        expected = 3.0 * np.array([1, 1, 0, 0, 0, 0, -1, -1], dtype=float)
        assert np.allclose(np.diag(h).real, expected)

    def test_single_flip_matrix_element(self, two_spins):
        # <down,down,1| H |up,down,0> = g : spin A lowers while a phonon appears
        g = 0.37
        mode = ModeSpec(+1, +1, detuning=5.0, g=g, fock_cutoff=1)
        model = build_full_model(two_spins, (mode,))
        bra = basis_vector(model.space, (1, 1, 1))
        ket = basis_vector(model.space, (0, 1, 0))
        assert abs((bra.conj() @ model.hamiltonian.matrix @ ket) - g) <= 1e-14

    def test_rotating_conserves_total_excitation(self, two_spins):
        model = build_full_model(two_spins, (ModeSpec(+1, +1, 5.0, 0.3, 2),))
        n_op = total_excitation(model.space)
        dev = np.max(np.abs(commutator(model.hamiltonian, n_op).matrix))
        assert dev <= 1e-12 * np.max(np.abs(model.hamiltonian.matrix))

    def test_counter_rotating_violates_total_excitation(self, two_spins):
        model = build_full_model(two_spins, (ModeSpec(+1, -1, 50.0, 0.3, 2),))
        n_op = total_excitation(model.space)
        assert np.max(np.abs(commutator(model.hamiltonian, n_op).matrix)) > 1e-6

    def test_hermitian(self, two_spins):
        model = build_full_model(
            two_spins, (ModeSpec(+1, +1, 5.0, 0.3, 2), ModeSpec(-1, -1, 80.0, 0.2, 1)))
        assert model.hamiltonian.is_hermitian()

    def test_closed_system_has_no_jumps(self, two_spins):
        model = build_full_model(two_spins, (ModeSpec(+1, +1, 5.0, 0.3, 1),))
        assert model.jumps == ()

    def test_zero_modes_rejected(self, two_spins):
        with pytest.raises(DomainError):
            build_full_model(two_spins, ())

    def test_one_spin_rejected(self, two_spins):
        with pytest.raises(DomainError):
            build_full_model(two_spins[:1], (ModeSpec(+1, +1, 5.0, 0.3, 1),))


class TestCascadeHamiltonian:
    def test_transfer_matrix_element_at_zero_phase(self, pair_spec):
        h = build_cascade_hamiltonian(pair_spec(gamma=1.0, kd=0.0), "forward").matrix
        assert h[DU, UD] == -1j

    def test_phase_periodicity(self, pair_spec):
        h1 = build_cascade_hamiltonian(pair_spec(kd=np.pi), "forward").matrix
        h2 = build_cascade_hamiltonian(pair_spec(kd=-np.pi), "forward").matrix
        assert np.max(np.abs(h1 - h2)) <= 1e-12

    def test_zero_rate_gives_zero_operator(self, pair_spec):
        h = build_cascade_hamiltonian(pair_spec(gamma=0.0, kd=1.3), "forward").matrix
        assert np.max(np.abs(h)) == 0.0

    @pytest.mark.parametrize("direction", ["forward", "backward"])
    def test_always_hermitian(self, pair_spec, direction, rng):
        for _ in range(10):
            spec = pair_spec(gamma=float(rng.uniform(0, 3)),
                             gamma_prime=float(rng.uniform(0, 3)),
                             kd=float(rng.uniform(-7, 7)))
            h = build_cascade_hamiltonian(spec, direction)
            assert h.is_hermitian()

    def test_invalid_direction(self, pair_spec):
        with pytest.raises(DomainError):
            build_cascade_hamiltonian(pair_spec(), "sideways")


class TestCollectiveJump:
    def test_superradiant_combination_at_zero_phase(self, pair_spec):
        z = build_collective_jump(pair_spec(kd=0.0), "forward").matrix
        spA = np.kron(spin_operators(0.5)[1].matrix, np.eye(2))
        spB = np.kron(np.eye(2), spin_operators(0.5)[1].matrix)
        assert np.max(np.abs(z - (spA + spB))) <= 1e-15

    def test_annihilates_all_ground(self, pair_spec):
        z = build_collective_jump(pair_spec(kd=0.9), "forward").matrix
        ground = np.zeros(4)
        ground[DD] = 1.0
        assert np.max(np.abs(z @ ground)) == 0.0

    def test_symmetric_state_eigenvalue_two(self, pair_spec):
        # independent oracle: diagonalize the 4x4 weight operator
        z = build_collective_jump(pair_spec(kd=0.0), "forward").matrix
        eigs = np.linalg.eigvalsh(z.conj().T @ z)
        assert np.max(np.abs(np.sort(eigs) - np.array([0.0, 0.0, 2.0, 2.0]))) <= 1e-12
        sym = np.zeros(4)
        sym[UD] = sym[DU] = 1 / np.sqrt(2)
        assert abs(sym @ (z.conj().T @ z) @ sym - 2.0) <= 1e-12

    def test_backward_swaps_roles(self, pair_spec):
        spec = pair_spec(kd=0.4)
        z = build_collective_jump(spec, "backward").matrix
        phase = np.exp(-1j * 0.4)
        smA = np.kron(spin_operators(0.5)[1].matrix, np.eye(2))
        smB = np.kron(np.eye(2), spin_operators(0.5)[1].matrix)
        assert np.max(np.abs(z - (smB + phase * smA))) <= 1e-15


class TestCascadedModel:
    def test_jump_rate_is_twice_gamma(self, pair_spec):
        model = build_cascaded_model(pair_spec(gamma=1.7), "forward")
        assert model.jumps[0][0] == pytest.approx(3.4)

    def test_dark_steady_state(self, pair_spec):
        model = build_cascaded_model(pair_spec(gamma=1.0, kd=0.0), "forward")
        ground = np.zeros((4, 4), dtype=complex)
        ground[DD, DD] = 1.0
        assert np.max(np.abs(apply_generator(model, ground))) == 0.0

    def test_generator_annihilates_trace(self, pair_spec, rng):
        model = build_cascaded_model(pair_spec(gamma=0.8, kd=1.1), "forward")
        for _ in range(20):
            rho = random_density(rng, 4)
            assert abs(np.trace(apply_generator(model, rho))) <= 1e-12

    def test_single_excitation_decays(self, pair_spec):
        # from |up,down> the excited-manifold weight must not grow at t=0
        model = build_cascaded_model(pair_spec(gamma=1.0, kd=0.5), "forward")
        rho = np.zeros((4, 4), dtype=complex)
        rho[UD, UD] = 1.0
        p_excited = np.eye(4)
        p_excited[DD, DD] = 0.0
        derivative = np.trace(p_excited @ apply_generator(model, rho)).real
        assert derivative <= 1e-12


class TestNonHermitianHamiltonian:
    def test_defining_identity_random_parameters(self, pair_spec, rng):
        for _ in range(10):
            gamma = float(rng.uniform(0.05, 3.0))
            kd = float(rng.uniform(-np.pi, np.pi))
            spec = pair_spec(gamma=gamma, gamma_prime=gamma, kd=kd)
            for direction in ("forward", "backward"):
                h = build_cascade_hamiltonian(spec, direction).matrix
                z = build_collective_jump(spec, direction).matrix
                expected = h - 1j * gamma * (z.conj().T @ z)
                built = build_nonhermitian_hamiltonian(spec, direction).matrix
                assert np.max(np.abs(built - expected)) <= 1e-12 * gamma

    def test_frozen_zero_phase_matrix(self, pair_spec):
        # expanded termwise: -i[diag(2,1,1,0) + 2|du><ud|]
        built = build_nonhermitian_hamiltonian(pair_spec(gamma=1.0, kd=0.0), "forward").matrix
        expected = np.zeros((4, 4), dtype=complex)
        expected[UU, UU] = -2j
        expected[UD, UD] = expected[DU, DU] = -1j
        expected[DU, UD] = -2j
        assert np.max(np.abs(built - expected)) <= 1e-14

    def test_forward_reverse_coefficient_exactly_zero(self, pair_spec, rng):
        for _ in range(5):
            spec = pair_spec(gamma=float(rng.uniform(0.1, 2.0)), kd=float(rng.uniform(-3, 3)))
            built = build_nonhermitian_hamiltonian(spec, "forward").matrix
            # upstream spin gaining from downstream: |ud><du| element
            assert built[UD, DU] == 0.0

    def test_nonhermitian_unless_rate_vanishes(self, pair_spec):
        assert not build_nonhermitian_hamiltonian(pair_spec(gamma=1.0), "forward").is_hermitian()
        assert build_nonhermitian_hamiltonian(pair_spec(gamma=0.0), "forward").is_hermitian()


class TestGeneratorEquivalence:
    def test_jump_rewrite_matches_lindblad_form(self, pair_spec, rng):
        # the two ways of writing the same superoperator agree on random states
        for _ in range(10):
            gamma = float(rng.uniform(0.05, 3.0))
            kd = float(rng.uniform(-np.pi, np.pi))
            spec = pair_spec(gamma=gamma, kd=kd)
            h = build_cascade_hamiltonian(spec, "forward").matrix
            z = build_collective_jump(spec, "forward").matrix
            h_nh = build_nonhermitian_hamiltonian(spec, "forward").matrix
            for _ in range(5):
                rho = random_density(rng, 4)
                lhs = lindblad_rhs(h, [(2.0 * gamma, z)], rho)
                rhs = -1j * (h_nh @ rho - rho @ h_nh.conj().T) + 2.0 * gamma * (z @ rho @ z.conj().T)
                scale = np.max(np.abs(lhs))
                assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(scale, 1e-30)


class TestBidirectionalModel:
    def test_zero_backward_equals_forward_only(self, pair_spec):
        spec = pair_spec(gamma=1.2, gamma_prime=0.0, kd=0.8)
        bid = build_bidirectional_model(spec)
        fwd = build_cascaded_model(spec, "forward")
        assert np.max(np.abs(bid.hamiltonian.matrix - fwd.hamiltonian.matrix)) == 0.0
        assert len(bid.jumps) == 1
        assert bid.jumps[0][0] == fwd.jumps[0][0]
        assert np.max(np.abs(bid.jumps[0][1].matrix - fwd.jumps[0][1].matrix)) == 0.0

    def test_equal_rates_give_reciprocal_exchange(self, pair_spec):
        # matrix expansion of the two directional forms
        gamma, kd = 0.9, 0.6
        spec = pair_spec(gamma=gamma, gamma_prime=gamma, kd=kd)
        h = build_bidirectional_model(spec).hamiltonian.matrix
        sp = spin_operators(0.5)[0].matrix
        sm = spin_operators(0.5)[1].matrix
        flip = np.kron(sp, sm) + np.kron(sm, sp)
        expected = 2.0 * gamma * np.sin(kd) * flip
        assert np.max(np.abs(h - expected)) <= 1e-12

    def test_equal_rates_zero_phase_pure_dissipation(self, pair_spec):
        spec = pair_spec(gamma=1.0, gamma_prime=1.0, kd=0.0)
        h = build_bidirectional_model(spec).hamiltonian.matrix
        assert np.max(np.abs(h)) <= 1e-15
        assert len(build_bidirectional_model(spec).jumps) == 2


class TestChainModel:
    def chain_spec(self, n, gamma=1.0, kd=0.8):
        sites = tuple(SpinSite(0.5, float(j), f"s{j}") for j in range(n))
        return CascadeSpec(gamma, 0.0, kd, sites)

    def test_two_sites_reduces_to_cascaded(self):
        spec = self.chain_spec(2, gamma=1.3, kd=0.5)
        chain = build_chain_model(spec)
        pair = build_cascaded_model(spec, "forward")
        assert np.max(np.abs(chain.hamiltonian.matrix - pair.hamiltonian.matrix)) == 0.0
        assert np.max(np.abs(chain.jumps[0][1].matrix - pair.jumps[0][1].matrix)) <= 1e-15
        assert chain.jumps[0][0] == pair.jumps[0][0]

    def test_three_sites_symmetric_weight_three(self):
        # all phases zero: diagonalize the 8x8 weight operator directly
        spec = self.chain_spec(3, kd=0.0)
        z = build_chain_model(spec).jumps[0][1].matrix
        eigs = np.linalg.eigvalsh(z.conj().T @ z)
        assert np.min(np.abs(eigs - 3.0)) <= 1e-12
        sym = np.zeros(8)
        # one-excitation symmetric state over sites (indices 3, 5, 6 = udd perms)
        for idx in (3, 5, 6):
            sym[idx] = 1 / np.sqrt(3)
        weight = z.conj().T @ z
        assert np.max(np.abs(weight @ sym - 3.0 * sym)) <= 1e-12  # eigenvector, eigenvalue 3

    def test_all_ground_stationary(self):
        for n in (2, 3, 4):
            spec = self.chain_spec(n, kd=0.7)
            model = build_chain_model(spec)
            ground = np.zeros((2 ** n, 2 ** n), dtype=complex)
            ground[-1, -1] = 1.0
            assert np.max(np.abs(apply_generator(model, ground))) == 0.0

    def test_upstream_occupation_frozen_against_downstream(self):
        # leftmost spin in its ground state never gains from excited downstream
        spec = self.chain_spec(3, kd=0.8)
        model = build_chain_model(spec)
        psi = np.zeros(8)
        psi[4 - 1] = 0.0
        # |down, up, up> = index 0b100 = 4
        psi[4] = 1.0
        rho = np.outer(psi, psi.conj())
        sp, sm, _ = spin_operators(0.5)
        n1 = np.kron(np.kron((sp @ sm).matrix, np.eye(2)), np.eye(2))
        derivative = np.trace(n1 @ apply_generator(model, rho)).real
        assert abs(derivative) <= 1e-12

    def test_backward_chain_rejected(self):
        with pytest.raises(DomainError):
            build_chain_model(self.chain_spec(3), "backward")

    def test_unsorted_positions_rejected(self):
        sites = (SpinSite(0.5, 0.0), SpinSite(0.5, 2.0), SpinSite(0.5, 1.0))
        with pytest.raises(DomainError):
            CascadeSpec(1.0, 0.0, 1.0, sites)
