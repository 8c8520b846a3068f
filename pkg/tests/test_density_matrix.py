import numpy as np
import pytest
from numpy.testing import assert_allclose

from collapselab import (
    Ensemble,
    PreconditionError,
    make_bell_jump,
    normalize,
    sample_uniform,
)
from collapselab.density_matrix import (
    DensityMatrix,
    compare_mc_density,
    density_distance,
    ensemble_density,
    evolve_density,
    gisin_experiment,
    jump_average_bilinears,
    lift_generator,
)


def soft_qubit(c2=0.9, rate=1.0):
    return make_bell_jump(2, [np.sqrt(c2), np.sqrt(1 - c2)], rate)


class TestEnsembleDensity:
    def test_single_member_is_projector(self):
        psi = normalize([1, 1j, 0])
        e = Ensemble.from_members([(psi, 1.0)], seed=0)
        rho = ensemble_density(e).matrix
        expected = np.outer(psi.amplitudes, psi.amplitudes.conj())
        assert_allclose(rho, expected, atol=1e-14)

    def test_equal_basis_mixture_is_maximally_mixed(self):
        d = 4
        members = [(normalize(np.eye(d)[k]), 1 / d) for k in range(d)]
        e = Ensemble.from_members(members, seed=0)
        assert_allclose(ensemble_density(e).matrix, np.eye(d) / d, atol=1e-14)

    def test_random_ensembles_valid(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            members = [(sample_uniform(3, rng), w) for w in np.full(20, 1 / 20)]
            rho = ensemble_density(Ensemble.from_members(members, seed=0)).matrix
            assert abs(np.trace(rho) - 1.0) < 1e-12
            assert np.abs(rho - rho.conj().T).max() < 1e-12

    def test_empty_rejected(self):
        with pytest.raises(PreconditionError, match="empty"):
            ensemble_density(Ensemble.from_members([], seed=0))


class TestLiftGenerator:
    def test_diagonal_rates_vanish(self):
        rng = np.random.default_rng(1)
        model = make_bell_jump(6, rng.random(6) + 0.1, 1.7)
        gen = lift_generator(model)
        assert_allclose(np.diag(gen.decay_rates), 0.0, atol=1e-12)

    def test_one_hot_rates(self):
        model = make_bell_jump(4, [1.0], 2.0)
        gen = lift_generator(model)
        off = gen.decay_rates[~np.eye(4, dtype=bool)]
        assert_allclose(off, -2.0, atol=1e-12)

    def test_exact_jump_average_maps_bilinears(self):
        # sum_xi R^2 (J psi)_i (J psi)_j* must equal Lambda_ij psi_i psi_j*
        rng = np.random.default_rng(2)
        model = make_bell_jump(8, rng.random(8) + 0.05, 1.0)
        for _ in range(100):
            psi = sample_uniform(8, rng)
            averaged = jump_average_bilinears(model, psi)
            outer = np.outer(psi.amplitudes, psi.amplitudes.conj())
            assert np.abs(averaged - model.overlap * outer).max() < 1e-12


class TestEvolveDensity:
    def test_diagonal_density_is_frozen(self):
        model = soft_qubit(0.7)
        rho0 = DensityMatrix(np.diag([0.25, 0.75]).astype(complex))
        out = evolve_density(lift_generator(model), rho0, 3.7)
        assert_allclose(out.matrix, rho0.matrix, atol=1e-14)

    def test_late_time_diagonality(self):
        model = soft_qubit(0.9)
        psi = normalize([np.sqrt(0.6), np.sqrt(0.4)])
        rho0 = ensemble_density(Ensemble.from_members([(psi, 1.0)], seed=0))
        out = evolve_density(lift_generator(model), rho0, 1e4)
        assert np.abs(out.matrix[0, 1]) < 1e-15
        assert_allclose(np.diag(out.matrix), np.diag(rho0.matrix), atol=1e-14)

    def test_soft_qubit_decay_rate(self):
        # c^2 = 0.9 gives off-diagonal rate Gamma (1 - 2 c s) = 0.4 Gamma
        model = soft_qubit(0.9, rate=1.0)
        gen = lift_generator(model)
        assert abs(gen.decay_rates[0, 1] + 0.4) < 1e-12
        rho0 = DensityMatrix(np.array([[0.5, 0.3], [0.3, 0.5]], dtype=complex))
        t = 1.3
        out = evolve_density(gen, rho0, t)
        assert abs(out.matrix[0, 1] - 0.3 * np.exp(-0.4 * t)) < 1e-14

    def test_semigroup_exact(self):
        model = soft_qubit(0.8)
        gen = lift_generator(model)
        rho0 = DensityMatrix(np.array([[0.6, 0.2], [0.2, 0.4]], dtype=complex))
        a = evolve_density(gen, evolve_density(gen, rho0, 0.7), 1.1)
        b = evolve_density(gen, rho0, 1.8)
        assert_allclose(a.matrix, b.matrix, atol=1e-15)

    def test_positivity_preserved(self):
        rng = np.random.default_rng(3)
        model = make_bell_jump(5, rng.random(5) + 0.1, 1.0)
        members = [(sample_uniform(5, rng), w) for w in np.full(8, 1 / 8)]
        rho0 = ensemble_density(Ensemble.from_members(members, seed=0))
        gen = lift_generator(model)
        for t in (0.1, 1.0, 10.0):
            out = evolve_density(gen, rho0, t)  # validates PSD on build
            assert np.linalg.eigvalsh(out.matrix).min() > -1e-10

    def test_negative_time_rejected(self):
        model = soft_qubit()
        rho0 = DensityMatrix(np.eye(2, dtype=complex) / 2)
        with pytest.raises(PreconditionError):
            evolve_density(lift_generator(model), rho0, -0.1)


class TestCompareMcDensity:
    def test_time_zero_exact(self):
        model = soft_qubit()
        psi = normalize([np.sqrt(0.9), np.sqrt(0.1)])
        e = Ensemble.from_members([(psi, 1.0)], seed=21)
        cmp = compare_mc_density(model, e, [0.0], n_per_member=500)
        assert cmp.max_deviation[0] < 1e-12

    def test_projective_qubit_offdiagonal_decay(self):
        model = make_bell_jump(2, [1.0], 1.0)
        psi = normalize([np.sqrt(0.9), np.sqrt(0.1)])  # rho_01 = 0.3
        e = Ensemble.from_members([(psi, 1.0)], seed=22)
        t = 2.0
        cmp = compare_mc_density(model, e, [t], n_per_member=20_000)
        assert abs(cmp.analytic[0].matrix[0, 1] - 0.3 * np.exp(-t)) < 1e-12
        assert cmp.within(3.0)

    def test_deviation_shrinks_with_sample_size(self):
        model = soft_qubit(0.8)
        psi = normalize([np.sqrt(0.5), np.sqrt(0.5)])
        e = Ensemble.from_members([(psi, 1.0)], seed=23)
        times = [0.5, 1.0, 2.0]
        small = compare_mc_density(model, e, times, n_per_member=1000)
        large = compare_mc_density(model, e.reseeded(24), times, n_per_member=4000)
        ratio = small.max_deviation.mean() / large.max_deviation.mean()
        assert 1.0 < ratio < 3.0

    def test_zero_trajectories_rejected(self):
        model = soft_qubit()
        e = Ensemble.from_members([(normalize([1, 0]), 1.0)], seed=0)
        with pytest.raises(PreconditionError):
            compare_mc_density(model, e, [1.0], n_per_member=0)


def orthogonal_decomposition(seed):
    return Ensemble.from_members(
        [(normalize([1, 0]), 0.75), (normalize([0, 1]), 0.25)], seed=seed
    )


def superposed_decomposition(seed):
    plus = normalize([np.sqrt(0.75), np.sqrt(0.25)])
    minus = normalize([np.sqrt(0.75), -np.sqrt(0.25)])
    return Ensemble.from_members([(plus, 0.5), (minus, 0.5)], seed=seed)


class TestGisin:
    times = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]

    def test_identical_decompositions_stay_close(self):
        model = make_bell_jump(2, [1.0], 1.0)
        a = orthogonal_decomposition(seed=31)
        b = orthogonal_decomposition(seed=32)
        result = gisin_experiment(a, b, model, self.times, n_total=4000)
        assert result.within(3.0)

    def test_inequivalent_decompositions_indistinguishable(self):
        model = make_bell_jump(2, [1.0], 1.0)
        a = orthogonal_decomposition(seed=33)
        b = superposed_decomposition(seed=34)
        assert_allclose(
            ensemble_density(a).matrix, ensemble_density(b).matrix, atol=1e-14
        )
        result = gisin_experiment(a, b, model, self.times, n_total=20_000)
        assert result.within(3.0)
        assert result.sup_distance < 0.02

    def test_distinct_densities_rejected_and_detected(self):
        model = make_bell_jump(2, [1.0], 1.0)
        plus = normalize([np.sqrt(0.5), np.sqrt(0.5)])
        minus = normalize([np.sqrt(0.5), -np.sqrt(0.5)])
        a = Ensemble.from_members([(plus, 0.9), (minus, 0.1)], seed=41)  # rho_01 = 0.4
        b = Ensemble.from_members(
            [(normalize([1, 0]), 0.5), (normalize([0, 1]), 0.5)], seed=42
        )
        with pytest.raises(PreconditionError, match="differ"):
            gisin_experiment(a, b, model, self.times, n_total=1000)
        diff, sigma = density_distance(a.replicate(10_000), b.replicate(10_000))
        assert diff[0, 1] > 3 * sigma[0, 1]
        assert diff[0, 1] == pytest.approx(0.4, abs=1e-12)

    def test_same_seed_rejected(self):
        model = make_bell_jump(2, [1.0], 1.0)
        a = orthogonal_decomposition(seed=5)
        b = orthogonal_decomposition(seed=5)
        with pytest.raises(PreconditionError, match="seed"):
            gisin_experiment(a, b, model, self.times, n_total=100)


def test_lift_ensemble_commutation():
    # Evolving then reducing agrees with reducing then evolving, at MC level.
    from collapselab import evolve_ensemble

    model = soft_qubit(0.8, rate=1.0)
    psi = normalize([np.sqrt(0.7), np.sqrt(0.3) * np.exp(0.4j)])
    e = Ensemble.pure(psi, 20_000, seed=51)
    t = 1.0
    evolved = evolve_ensemble(e, model, t)
    rho_mc = ensemble_density(evolved).matrix
    rho_an = evolve_density(lift_generator(model), ensemble_density(e), t).matrix
    from collapselab.density_matrix import _entry_standard_errors

    sigma = _entry_standard_errors(evolved)
    assert np.all(np.abs(rho_mc - rho_an) <= 3 * sigma + 1e-12)
