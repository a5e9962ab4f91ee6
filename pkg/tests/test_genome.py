"""Tests for the seed-list genome: PRNG, decoding, mutation and checkpoints."""

from concurrent.futures import ThreadPoolExecutor
import random

import numpy as np
import pytest

from genome import SEED_LIMIT, CheckpointError, DeterministicRng, Genome, decode, format_genome, \
                   init_weights, load_genome, mutate, noise_vector, parse_genome, save_genome
from network import WEIGHT_DTYPE, arch_for_environment, parameter_count, parse_arch


class TestDeterministicRng:
    """Seeded uniform/normal streams."""

    def test_same_seed_same_stream(self) -> None:
        a, b = DeterministicRng(42), DeterministicRng(42)
        assert np.array_equal(a.uniform(10), b.uniform(10))
        assert a.seed64() == b.seed64()

    def test_normals_follow_box_muller_over_uniform_pairs(self) -> None:
        u = DeterministicRng(7).uniform(6)
        normals = DeterministicRng(7).normal(6)
        for i in range(3):
            r = np.sqrt(-2.0 * np.log1p(-u[2 * i]))
            t = 2.0 * np.pi * u[2 * i + 1]
            assert normals[2 * i] == pytest.approx(r * np.cos(t), abs=1e-12)
            assert normals[2 * i + 1] == pytest.approx(r * np.sin(t), abs=1e-12)

    def test_odd_size_is_prefix_of_even(self) -> None:
        assert np.array_equal(DeterministicRng(3).normal(5), DeterministicRng(3).normal(6)[:5])

    def test_normals_look_standard(self) -> None:
        x = DeterministicRng(1).normal(100000)
        assert abs(x.mean()) < 0.02
        assert abs(x.std() - 1) < 0.02

    def test_seed_range(self) -> None:
        DeterministicRng(SEED_LIMIT - 1)
        with pytest.raises(ValueError):
            DeterministicRng(SEED_LIMIT)
        with pytest.raises(ValueError):
            DeterministicRng(-1)

    def test_below_and_sample_indices(self) -> None:
        rng = DeterministicRng(5)
        assert all(0 <= rng.below(3) < 3 for _ in range(100))
        picked = rng.sample_indices(10, 10)
        assert sorted(picked) == list(range(10))


class TestGenome:
    """Genome construction and mutation."""

    def test_needs_a_seed(self) -> None:
        with pytest.raises(ValueError):
            Genome((), 0.1)

    def test_rejects_negative_sigma(self) -> None:
        with pytest.raises(ValueError):
            Genome((1,), -0.1)

    def test_mutate_appends_seed(self) -> None:
        g = Genome((1, 2), 0.5)
        child = mutate(g, 99)
        assert child.seeds == (1, 2, 99)
        assert child.sigma == 0.5
        assert g.seeds == (1, 2)


class TestDecode:
    """Weight reconstruction from seeds."""

    def test_init_weights_shape_and_biases(self, stub_arch) -> None:
        w = init_weights(11, stub_arch)
        assert w.dtype == WEIGHT_DTYPE
        assert w.size == parameter_count(stub_arch) == 403
        # first layer: 4x16 weights then 16 zero biases
        assert np.all(w[64:80] == 0)
        assert np.any(w[:64] != 0)

    def test_glorot_std_on_small_dense_layer(self) -> None:
        arch = arch_for_environment(3, 2, '')
        assert parameter_count(arch) == 8
        weights = np.concatenate([init_weights(seed, arch)[:6] for seed in range(20000)])
        assert np.std(weights) == pytest.approx(np.sqrt(2 / 5), rel=0.02)
        assert abs(np.mean(weights)) < 0.01

    def test_decoded_weights_are_read_only(self, stub_arch) -> None:
        w = decode(Genome((1, 2), 0.1), stub_arch)
        with pytest.raises(ValueError):
            w[0] = 1

    def test_single_seed_is_initialisation(self, stub_arch) -> None:
        assert np.array_equal(decode(Genome((5,), 0.3), stub_arch), init_weights(5, stub_arch))

    def test_mutation_adds_scaled_noise_exactly(self, stub_arch) -> None:
        """decode(g + s) == decode(g) + sigma * noise(s), bit for bit."""
        rng = random.Random(0)
        for _ in range(100):
            seeds = tuple(rng.randrange(SEED_LIMIT) for _ in range(rng.randint(1, 20)))
            g = Genome(seeds, rng.choice([0.002, 0.05, 1.0]))
            s = rng.randrange(SEED_LIMIT)
            parent = decode(g, stub_arch)
            expected = parent + WEIGHT_DTYPE(g.sigma) * noise_vector(s, parent.size)
            assert np.array_equal(decode(mutate(g, s), stub_arch), expected)

    def test_seed_order_matters(self, stub_arch) -> None:
        a = decode(Genome((1, 2, 3), 0.1), stub_arch)
        b = decode(Genome((1, 3, 2), 0.1), stub_arch)
        assert np.allclose(a, b, atol=1e-5)  # same sum, different rounding order is allowed
        assert not np.array_equal(decode(Genome((2, 1, 3), 0.1), stub_arch), a)

    def test_decode_identical_across_threads(self, stub_arch) -> None:
        genomes = [Genome(tuple(range(i, i + 10)), 0.05) for i in range(16)]
        serial = [decode(g, stub_arch) for g in genomes]
        with ThreadPoolExecutor(max_workers=8) as pool:
            parallel = list(pool.map(lambda g: decode(g, stub_arch), genomes))
        assert all(np.array_equal(a, b) for a, b in zip(serial, parallel))


class TestCheckpoint:
    """Genome file format."""

    def test_round_trip(self, tmp_path, stub_arch) -> None:
        g = Genome((0, 12345, SEED_LIMIT - 1), 0.002)
        path = tmp_path / 'elite.txt'
        save_genome(path, g, stub_arch)
        loaded, arch = load_genome(path)
        assert loaded == g
        assert arch == stub_arch
        assert np.array_equal(decode(loaded, arch), decode(g, stub_arch))

    def test_format(self, stub_arch) -> None:
        text = format_genome(Genome((3, 4), 0.5), stub_arch)
        assert text == 'seedevo-genome v1\nsigma=0.5\narch=in:4;dense:16;dense:16;out:3\n3\n4\n'

    @pytest.mark.parametrize('text,line', [
        ('nope\n', 1),
        ('seedevo-genome v1\nsigma=abc\narch=in:4;out:3\n1\n', 2),
        ('seedevo-genome v1\nsigma=0.1\narch=in:4;bogus;out:3\n1\n', 3),
        ('seedevo-genome v1\nsigma=0.1\narch=in:4;out:3\n1\n2\n-3\n', 6),
        ('seedevo-genome v1\nsigma=0.1\narch=in:4;out:3\n18446744073709551616\n', 4),
        ('seedevo-genome v1\nsigma=0.1\narch=in:4;out:3\n', 4),
    ])
    def test_errors_name_the_line(self, text, line) -> None:
        with pytest.raises(CheckpointError, match=rf'^line {line}:'):
            parse_genome(text)

    def test_reference_architecture_checkpoint(self) -> None:
        arch = parse_arch('in:84x84x4;conv:32,8,4;conv:64,4,2;conv:64,3,1;dense:512;out:18')
        g, parsed = parse_genome(format_genome(Genome((1,), 0.002), arch))
        assert parsed == arch
