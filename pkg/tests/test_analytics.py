"""Tests for test-set evaluation and significance testing."""

import math
import random

import pytest

from analytics import TestReport, Verdict, compare_runs, compare_samples, evaluate_checkpoint, \
                      format_report, format_verdict, read_samples, welch_t_test, write_samples
from environments import StubFactory
from genome import Genome, save_genome
from network import ShapeError, arch_for_environment


class TestWelch:
    """Welch's t-test against closed-form values."""

    def test_shifted_samples(self) -> None:
        # t = -1 with 8 degrees of freedom
        t, p = welch_t_test([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
        assert t == pytest.approx(-1.0, abs=1e-12)
        assert p == pytest.approx(0.34659350708733416, abs=1e-9)

    def test_separated_samples(self) -> None:
        # t = -sqrt(13.5) with 4 degrees of freedom
        t, p = welch_t_test([1, 2, 3], [4, 5, 6])
        assert t == pytest.approx(-math.sqrt(13.5), abs=1e-9)
        assert p == pytest.approx(0.0213116412, abs=1e-6)

    @pytest.mark.parametrize('a,b,t_expected,p_expected', [
        # one degree of freedom: b has no variance, so df = n_a - 1
        ([0, 2], [3, 3, 3], -2.0, 1 - 2 / math.pi * math.atan(2)),
        # two degrees of freedom
        ([0, 2], [4, 6], -2 * math.sqrt(2), 1 - math.sqrt(8 / 10)),
        # four degrees of freedom
        ([0, 1, 2], [2, 3, 4], -math.sqrt(6), 2 * (0.5 - 0.375 * math.sqrt(2.4) * 0.8)),
    ])
    def test_small_integer_degrees_of_freedom(self, a, b, t_expected, p_expected) -> None:
        t, p = welch_t_test(a, b)
        assert t == pytest.approx(t_expected, abs=1e-9)
        assert p == pytest.approx(p_expected, abs=1e-9)

    def test_pooled_variant_on_equal_variances(self) -> None:
        t, p = welch_t_test([1, 2, 3, 4, 5], [2, 3, 4, 5, 6], equal_var=True)
        assert p == pytest.approx(0.34659350708733416, abs=1e-9)

    def test_identical_samples(self) -> None:
        t, p = welch_t_test([1, 2, 3], [1, 2, 3])
        assert t == 0
        assert p == pytest.approx(1.0)

    def test_zero_variance(self) -> None:
        assert welch_t_test([2, 2, 2], [2, 2]) == (0.0, 1.0)
        t, p = welch_t_test([3, 3], [2, 2, 2])
        assert t == math.inf
        assert p == 0.0

    def test_near_degenerate(self) -> None:
        _, p = welch_t_test([0, 0, 0], [10, 10, 10.0001])
        assert p < 1e-6

    def test_too_small(self) -> None:
        with pytest.raises(ValueError):
            welch_t_test([1], [1, 2])

    def test_symmetry_and_scale_invariance(self) -> None:
        rng = random.Random(0)
        for _ in range(1000):
            a = [rng.gauss(0, 1) for _ in range(rng.randint(2, 10))]
            b = [rng.gauss(0.5, 2) for _ in range(rng.randint(2, 10))]
            t, p = welch_t_test(a, b)
            t_rev, p_rev = welch_t_test(b, a)
            assert t_rev == pytest.approx(-t, abs=1e-9)
            assert p_rev == pytest.approx(p, abs=1e-9)
            assert 0 <= p <= 1
            c = rng.uniform(0.1, 100)
            t_scaled, p_scaled = welch_t_test([c * x for x in a], [c * x for x in b])
            assert t_scaled == pytest.approx(t, abs=1e-9, rel=1e-9)
            assert p_scaled == pytest.approx(p, abs=1e-9)


class TestCompare:
    """Verdicts."""

    def test_verdicts(self) -> None:
        low, high = [0, 0.1, 0.2], [10, 10.1, 10.2]
        assert compare_samples(high, low)[0] == Verdict.A_BETTER
        assert compare_samples(low, high)[0] == Verdict.B_BETTER
        assert compare_samples([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])[0] == Verdict.NO_DIFFERENCE

    def test_compare_runs_uses_scores(self) -> None:
        a = TestReport((10.0, 10.5, 11.0), (1, 1, 1))
        b = TestReport((1.0, 1.5, 2.0), (9, 9, 9))
        assert compare_runs(a, b) == Verdict.A_BETTER

    def test_verdict_line(self) -> None:
        line = format_verdict(Verdict.NO_DIFFERENCE, -1.0, 0.34659350708733416)
        assert line == 'verdict=none t=-1 p=0.346594 alpha=0.05'


class TestReports:
    """TestReport statistics and checkpoint evaluation."""

    def test_mean_and_sample_std(self) -> None:
        report = TestReport((1.0, 3.0), (5, 7))
        assert report.mean_score == 2
        assert report.std_score == pytest.approx(math.sqrt(2))
        assert report.mean_lifespan == 6
        assert 'episodes=2' in format_report(report)

    def test_constant_environment(self, tmp_path) -> None:
        env = StubFactory('const')
        arch = arch_for_environment(env.observation_length, env.action_space_size)
        path = tmp_path / 'elite.txt'
        save_genome(path, Genome((4, 5), 0.1), arch)
        report = evaluate_checkpoint(path, arch, env, episodes=4, max_frames=10)
        assert report.scores == (1.0,) * 4
        assert report.std_score == 0
        assert report.lifespans == (10,) * 4

    def test_architecture_mismatch(self, tmp_path) -> None:
        env = StubFactory('const')
        path = tmp_path / 'elite.txt'
        save_genome(path, Genome((4,), 0.1), arch_for_environment(4, 3))
        with pytest.raises(ShapeError):
            evaluate_checkpoint(path, arch_for_environment(4, 3, 'dense:2'), env, 2)

    def test_reserved_namespace(self, tmp_path) -> None:
        env = StubFactory('const')
        arch = arch_for_environment(4, 3)
        path = tmp_path / 'elite.txt'
        save_genome(path, Genome((4,), 0.1), arch)
        with pytest.raises(ValueError):
            evaluate_checkpoint(path, arch, env, 2, seed_namespace='train')


class TestSampleFiles:
    """Per-episode sample files."""

    def test_write_and_read(self, tmp_path) -> None:
        path = tmp_path / 'scores.csv'
        write_samples(path, [1, 2.5, 3], 'scores of run a')
        assert path.read_text().startswith('# scores of run a\n')
        assert list(read_samples(path)) == [1.0, 2.5, 3.0]

    def test_single_value_and_comments(self, tmp_path) -> None:
        path = tmp_path / 'one.csv'
        path.write_text('# header\n4.5  # trailing\n')
        assert list(read_samples(path)) == [4.5]
