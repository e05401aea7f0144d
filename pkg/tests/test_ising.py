"""Instance generation, energies, and exact Boltzmann sums."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qaoa_mcmc.ising import (
    BoltzmannTarget,
    EnumerationCapError,
    SpinGlassInstance,
    all_energies,
    all_magnetizations,
    energy,
    exact_average_magnetization,
    exact_distribution,
    generate_instance,
    load_instance,
    magnetization,
    pair_index,
    save_instance,
    spins,
)


def zero_instance(n: int) -> SpinGlassInstance:
    return SpinGlassInstance(
        n=n, couplings=np.zeros(n * (n - 1) // 2), fields=np.zeros(n), seed=0
    )


def oracle_energy(instance: SpinGlassInstance, z: int) -> float:
    """Direct double-loop summation, independent of the vectorized path."""
    x = [1.0 if ((z >> j) & 1) == 0 else -1.0 for j in range(instance.n)]
    total = 0.0
    for j in range(1, instance.n):
        for k in range(j):
            total -= instance.couplings[pair_index(j, k)] * x[j] * x[k]
    for j in range(instance.n):
        total -= instance.fields[j] * x[j]
    return total


class TestGeneration:
    def test_identical_seed_identical_instance(self):
        a = generate_instance(3, 1234)
        b = generate_instance(3, 1234)
        np.testing.assert_array_equal(a.couplings, b.couplings)
        np.testing.assert_array_equal(a.fields, b.fields)

    def test_coefficient_counts(self):
        inst = generate_instance(10, 5)
        assert inst.couplings.shape == (45,)
        assert inst.fields.shape == (10,)

    def test_rejects_zero_spins(self):
        with pytest.raises(ValueError):
            generate_instance(0, 1)
        with pytest.raises(ValueError):
            SpinGlassInstance(n=0, couplings=np.zeros(0), fields=np.zeros(0), seed=0)

    def test_standard_normal_statistics(self):
        # ~10k pooled coefficients across two large instances
        draws = []
        for seed in (11, 12):
            inst = generate_instance(100, seed)
            draws.append(inst.couplings)
            draws.append(inst.fields)
        pooled = np.concatenate(draws)
        assert pooled.size >= 10_000
        assert abs(pooled.mean()) < 0.05
        assert abs(pooled.var() - 1.0) < 0.1

    def test_instances_immutable(self):
        inst = generate_instance(4, 0)
        with pytest.raises(ValueError):
            inst.couplings[0] = 5.0


class TestEnergy:
    def test_zero_instance_any_config(self):
        inst = zero_instance(5)
        assert all(energy(inst, z) == 0.0 for z in range(32))

    def test_single_coupling(self):
        # n=2, J_{10}=1, both spins up -> energy -1
        inst = SpinGlassInstance(n=2, couplings=np.array([1.0]), fields=np.zeros(2), seed=0)
        assert energy(inst, 0b00) == -1.0
        assert energy(inst, 0b01) == 1.0

    def test_matches_direct_summation_oracle(self):
        inst = generate_instance(3, 99)
        for z in range(8):
            assert energy(inst, z) == pytest.approx(oracle_energy(inst, z), rel=1e-12)

    def test_oracle_sweep_many_instances(self):
        # 20 seeded instances, n <= 6, every configuration
        for seed in range(20):
            n = 3 + seed % 4
            inst = generate_instance(n, seed)
            table = all_energies(inst)
            for z in range(1 << n):
                assert table[z] == pytest.approx(oracle_energy(inst, z), rel=1e-12)

    def test_all_energies_matches_scalar(self):
        inst = generate_instance(6, 21)
        table = all_energies(inst)
        for z in (0, 7, 31, 63):
            assert table[z] == pytest.approx(energy(inst, z), rel=1e-12)

    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 8))
    @settings(max_examples=25, deadline=None)
    def test_global_flip_antisymmetry_without_fields(self, seed, n):
        rng = np.random.default_rng(seed)
        inst = SpinGlassInstance(
            n=n, couplings=rng.standard_normal(n * (n - 1) // 2), fields=np.zeros(n), seed=seed
        )
        table = all_energies(inst)
        flipped = (1 << n) - 1
        for z in range(1 << n):
            assert table[z] == pytest.approx(table[z ^ flipped], rel=1e-12, abs=1e-12)


class TestMagnetization:
    def test_extremes(self):
        assert magnetization(0, 4) == 1.0
        assert magnetization(0b1111, 4) == -1.0

    def test_balanced(self):
        assert magnetization(0b0011, 4) == 0.0

    @given(z=st.integers(0, 255))
    @settings(max_examples=50, deadline=None)
    def test_range_and_flip_antisymmetry(self, z):
        n = 8
        m = magnetization(z, n)
        assert -1.0 <= m <= 1.0
        assert m == -magnetization(z ^ 0xFF, n)

    def test_all_magnetizations_consistent(self):
        table = all_magnetizations(5)
        for z in range(32):
            assert table[z] == pytest.approx(magnetization(z, 5))


class TestExactDistribution:
    def test_zero_instance_uniform(self):
        target = BoltzmannTarget(zero_instance(4), 0.7)
        np.testing.assert_allclose(exact_distribution(target), np.full(16, 1 / 16), atol=1e-15)

    def test_high_temperature_limit(self):
        target = BoltzmannTarget(generate_instance(4, 3), 1e9)
        np.testing.assert_allclose(exact_distribution(target), np.full(16, 1 / 16), atol=1e-6)

    def test_matches_extended_precision_oracle(self):
        import mpmath

        mpmath.mp.dps = 60
        inst = generate_instance(3, 17)
        target = BoltzmannTarget(inst, 0.1)
        mu = exact_distribution(target)
        weights = [
            mpmath.exp(-mpmath.mpf(repr(float(all_energies(inst)[z]))) / mpmath.mpf("0.1"))
            for z in range(8)
        ]
        z_total = sum(weights)
        for z in range(8):
            assert mu[z] == pytest.approx(float(weights[z] / z_total), rel=1e-12, abs=1e-300)

    def test_sums_to_one_and_positive(self):
        for seed in range(5):
            target = BoltzmannTarget(generate_instance(5, seed), 1.0)
            mu = exact_distribution(target)
            assert abs(mu.sum() - 1.0) < 1e-12
            assert np.all(mu > 0)

    def test_energy_shift_invariance(self):
        # Adding a constant to all energies (via the partition function)
        # cannot change the distribution: compare against a manually
        # shifted computation.
        inst = generate_instance(4, 8)
        target = BoltzmannTarget(inst, 0.5)
        mu = exact_distribution(target)
        e = all_energies(inst) + 123.456
        logw = -e / 0.5
        shifted = np.exp(logw - logw.max())
        shifted /= shifted.sum()
        np.testing.assert_allclose(mu, shifted, atol=1e-12)

    def test_cap_enforced(self):
        target = BoltzmannTarget(generate_instance(6, 1), 1.0)
        with pytest.raises(EnumerationCapError):
            exact_distribution(target, cap=5)

    def test_low_temperature_no_overflow(self):
        target = BoltzmannTarget(generate_instance(8, 4), 0.1)
        mu = exact_distribution(target)
        assert np.isfinite(mu).all()
        assert abs(mu.sum() - 1.0) < 1e-12


class TestAverageMagnetization:
    def test_zero_instance(self):
        target = BoltzmannTarget(zero_instance(5), 1.0)
        assert exact_average_magnetization(target) == pytest.approx(0.0, abs=1e-14)

    def test_strong_field_saturates(self):
        n = 4
        inst = SpinGlassInstance(
            n=n, couplings=np.zeros(6), fields=np.full(n, 10.0), seed=0
        )
        target = BoltzmannTarget(inst, 0.1)
        assert exact_average_magnetization(target) == pytest.approx(1.0, abs=1e-6)

    def test_matches_bruteforce_oracle(self):
        inst = generate_instance(8, 123)
        target = BoltzmannTarget(inst, 1.0)
        # independent oracle: direct exp weights over all 256 states
        e = np.array([oracle_energy(inst, z) for z in range(256)])
        w = np.exp(-(e - e.min()) / 1.0)
        mu = w / w.sum()
        m = np.array([magnetization(z, 8) for z in range(256)])
        assert exact_average_magnetization(target) == pytest.approx(float(mu @ m), abs=1e-12)

    def test_n15_enumeration_feasible(self):
        target = BoltzmannTarget(generate_instance(15, 2), 1.0)
        value = exact_average_magnetization(target)
        assert -1.0 <= value <= 1.0


class TestInstanceIO:
    def test_round_trip(self, tmp_path):
        inst = generate_instance(5, 77)
        path = tmp_path / "inst.json"
        save_instance(inst, path)
        loaded = load_instance(path)
        assert loaded.n == inst.n and loaded.seed == inst.seed
        np.testing.assert_array_equal(loaded.couplings, inst.couplings)
        np.testing.assert_array_equal(loaded.fields, inst.fields)

    def test_byte_identical_rewrites(self, tmp_path):
        inst = generate_instance(5, 7)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_instance(inst, p1)
        save_instance(inst, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_coupling_order_documented(self, tmp_path):
        # order (1,0), (2,0), (2,1), (3,0), ...
        inst = generate_instance(4, 1)
        path = tmp_path / "inst.json"
        save_instance(inst, path)
        payload = json.loads(path.read_text())
        assert payload["couplings"][0] == inst.couplings[pair_index(1, 0)]
        assert payload["couplings"][2] == inst.couplings[pair_index(2, 1)]


class TestSpinConvention:
    def test_bit_zero_is_spin_up(self):
        np.testing.assert_array_equal(spins(0, 3), [1.0, 1.0, 1.0])
        np.testing.assert_array_equal(spins(0b101, 3), [-1.0, 1.0, -1.0])

    @given(z=st.integers(0, 2**10 - 1))
    @settings(max_examples=30, deadline=None)
    def test_bijection(self, z):
        x = spins(z, 10)
        rebuilt = sum((1 << j) for j in range(10) if x[j] < 0)
        assert rebuilt == z
