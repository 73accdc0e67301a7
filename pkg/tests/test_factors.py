import math

import numpy as np
import pytest

from tensorgen_cli.core.errors import ParameterError, ShapeError
from tensorgen_cli.core.factors import (
    FactorSpec,
    canonical_factor_method,
    gen_binary,
    gen_gamma,
    gen_multi_normal,
    gen_orthogonal,
    gen_stochastic,
    gen_uniform,
    gen_weights,
    generate_factor,
)
from tensorgen_cli.core.rng import MAX_SEED, RngStream


class TestRngStream:
    def test_same_path_same_numbers(self):
        a = RngStream(3).child("factors", 0).generator().random(5)
        b = RngStream(3).child("factors", 0).generator().random(5)
        assert np.array_equal(a, b)

    def test_sibling_streams_differ(self):
        root = RngStream(3)
        a = root.child("factors", 0).generator().random(5)
        b = root.child("factors", 1).generator().random(5)
        assert not np.array_equal(a, b)

    @pytest.mark.parametrize("seed", [-1, MAX_SEED + 1])
    def test_seed_range(self, seed):
        with pytest.raises(ParameterError):
            RngStream(seed)

    def test_max_seed_accepted(self):
        assert RngStream(MAX_SEED).generator().random() < 1.0


class TestGamma:
    def test_mean_with_fixed_shape(self, rng):
        sample = gen_gamma(100000, 1, rng, theta=0.5, shapes=[2.0])[:, 0]
        stderr = math.sqrt(2.0 * 0.5**2 / sample.size)
        assert abs(sample.mean() - 1.0) < 3 * stderr

    def test_non_negative(self, rng):
        assert np.all(gen_gamma(50, 4, rng) >= 0)

    def test_theta_must_be_positive(self, rng):
        with pytest.raises(ParameterError):
            gen_gamma(5, 2, rng, theta=0.0)

    def test_columns_do_not_depend_on_width(self, rng):
        narrow = gen_gamma(20, 2, rng)
        wide = gen_gamma(20, 5, rng)
        assert np.array_equal(narrow, wide[:, :2])


class TestMultiNormal:
    def test_zero_variance_columns(self, rng):
        out = gen_multi_normal(10, 2, rng, mus=[5.0, -1.0], sigmas=0.0)
        assert np.all(out[:, 0] == 5.0)
        assert np.all(out[:, 1] == -1.0)

    def test_moments(self, rng):
        sample = gen_multi_normal(100000, 1, rng, mus=2.0, sigmas=3.0)[:, 0]
        assert abs(sample.mean() - 2.0) < 3 * 3.0 / math.sqrt(sample.size)
        assert abs(sample.std() - 3.0) < 0.02 * 3.0

    def test_negative_sigma(self, rng):
        with pytest.raises(ParameterError):
            gen_multi_normal(5, 2, rng, sigmas=[1.0, -1.0])


class TestUniform:
    def test_mean(self, rng):
        sample = gen_uniform(1000, 100, rng)
        assert np.all((sample >= 0) & (sample < 1))
        bound = 3 * (1 / math.sqrt(12)) / math.sqrt(sample.size)
        assert abs(sample.mean() - 0.5) < bound

    def test_deterministic(self):
        assert np.array_equal(
            gen_uniform(7, 3, RngStream(11)), gen_uniform(7, 3, RngStream(11))
        )


class TestOrthogonal:
    def test_orthonormal_columns(self, rng):
        q = gen_orthogonal(20, 5, rng)
        np.testing.assert_allclose(q.T @ q, np.eye(5), atol=1e-12)

    def test_one_by_one(self, rng):
        q = gen_orthogonal(1, 1, rng)
        assert abs(q[0, 0]) == pytest.approx(1.0)

    def test_rows_below_cols(self, rng):
        with pytest.raises(ShapeError):
            gen_orthogonal(3, 4, rng)


class TestStochastic:
    def test_columns_sum_to_one(self, rng):
        out = gen_stochastic(30, 4, rng)
        np.testing.assert_allclose(out.sum(axis=0), np.ones(4), atol=1e-12)
        assert np.all(out >= 0)

    def test_single_row(self, rng):
        assert np.all(gen_stochastic(1, 3, rng) == 1.0)


class TestBinary:
    def test_one_per_row(self, rng):
        out = gen_binary(40, 3, rng)
        assert set(np.unique(out)) <= {0.0, 1.0}
        assert np.all(out.sum(axis=1) == 1.0)

    def test_single_column(self, rng):
        assert np.all(gen_binary(10, 1, rng) == 1.0)

    def test_balanced_counts(self, rng):
        rows = 60000
        counts = gen_binary(rows, 3, rng).sum(axis=0)
        bound = 3 * math.sqrt(rows * (1 / 3) * (2 / 3))
        assert np.all(np.abs(counts - rows / 3) < bound)


class TestWeights:
    def test_ones(self, rng):
        assert gen_weights("ones", 3, rng).tolist() == [1.0, 1.0, 1.0]

    def test_custom_verbatim(self, rng):
        assert gen_weights("custom", 3, rng, [2.0, 0.0, -1.0]).tolist() == [2.0, 0.0, -1.0]

    def test_custom_length(self, rng):
        with pytest.raises(ParameterError):
            gen_weights("custom", 2, rng, [1.0])

    def test_normal_mean(self, rng):
        sample = gen_weights("randn", 10000, rng)
        assert abs(sample.mean()) < 3 / math.sqrt(10000)

    def test_unknown(self, rng):
        with pytest.raises(ParameterError):
            gen_weights("beta", 3, rng)


class TestFactorSpec:
    def test_aliases(self):
        assert canonical_factor_method("rand") == "uniform"
        assert canonical_factor_method("randn") == "multi_normal"
        assert FactorSpec("randn", 3, 2).method == "multi_normal"

    def test_orthogonal_shape(self):
        with pytest.raises(ShapeError):
            FactorSpec("orthogonal", 2, 3)

    def test_unknown_parameter(self):
        with pytest.raises(ParameterError):
            FactorSpec("uniform", 2, 3, {"theta": 1.0})

    def test_generate_dispatch(self, rng):
        spec = FactorSpec("gamma", 6, 2, {"mu": 1.0, "sigma2": 0.1, "theta": 0.5, "shapes": None})
        assert generate_factor(spec, rng).shape == (6, 2)


def _draw(method, seed):
    gen = np.random.default_rng(seed)
    cols = int(gen.integers(1, 5))
    rows = int(gen.integers(cols if method == "orthogonal" else 1, 13))
    return generate_factor(FactorSpec(method, rows, cols), RngStream(seed, ("contract",))), rows, cols


class TestGeneratorContracts:
    SEEDS = range(100)

    @pytest.mark.parametrize("method", ["gamma", "multi_normal", "uniform"])
    def test_shape_and_support(self, method):
        for seed in self.SEEDS:
            out, rows, cols = _draw(method, seed)
            assert out.shape == (rows, cols)
            assert np.all(np.isfinite(out))
            if method == "gamma":
                assert out.min() >= 0.0
            if method == "uniform":
                assert np.all((out >= 0.0) & (out < 1.0))

    def test_orthogonal(self):
        for seed in self.SEEDS:
            out, _, cols = _draw("orthogonal", seed)
            assert np.max(np.abs(out.T @ out - np.eye(cols))) <= 1e-10

    def test_stochastic(self):
        for seed in self.SEEDS:
            out, _, _ = _draw("stochastic", seed)
            assert out.min() >= 0.0
            assert np.all(np.abs(out.sum(axis=0) - 1.0) <= 1e-12)

    def test_binary(self):
        for seed in self.SEEDS:
            out, _, _ = _draw("binary", seed)
            assert set(np.unique(out)) <= {0.0, 1.0}
            assert np.all(out.sum(axis=1) == 1.0)

    @pytest.mark.parametrize(
        "method", ["gamma", "multi_normal", "uniform", "orthogonal", "stochastic", "binary"]
    )
    def test_bit_identical_reruns(self, method):
        for seed in range(10):
            first, _, _ = _draw(method, seed)
            second, _, _ = _draw(method, seed)
            assert np.array_equal(first, second)


def test_orthogonal_first_column_angle_is_uniform():
    root = RngStream(2024, ("haar",))
    draws = 10000
    angles = np.empty(draws)
    for i in range(draws):
        q = gen_orthogonal(2, 2, root.child("draw", i))
        angles[i] = math.atan2(q[1, 0], q[0, 0])
    observed, _ = np.histogram(angles, bins=8, range=(-math.pi, math.pi))
    expected = draws / 8
    chi_square = float(np.sum((observed - expected) ** 2 / expected))
    # 7 degrees of freedom, p = 0.001
    assert chi_square < 24.322


def test_stochastic_is_uniform_times_inverse_column_sums():
    stream = RngStream(99, ("stochastic",))
    uniform = gen_uniform(25, 4, stream)
    expected = uniform @ np.diag(1.0 / uniform.sum(axis=0))
    np.testing.assert_array_max_ulp(gen_stochastic(25, 4, stream), expected, maxulp=1)
