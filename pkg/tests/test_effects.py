import math

import numpy as np
import pytest

from tensorgen_cli.core.effects import (
    AnomalySpec,
    ChangePointSpec,
    EffectRecord,
    add_awgn,
    add_factor_noise,
    add_sparse_noise,
    apply_change_point,
    apply_nonneg,
    compound_symmetric,
    gen_poisson_count,
    impose_congruence,
    impose_correlation,
    inject_anomaly,
    noise_sigma,
    normalize_tensor,
    round_half_up,
    sample_poisson_counts,
    sign_fix,
    sparsify,
)
from tensorgen_cli.core.errors import NumericalError, ParameterError
from tensorgen_cli.core.factors import gen_stochastic
from tensorgen_cli.core.rng import RngStream
from tensorgen_cli.core.tensors import (
    CpModel,
    DenseTensor,
    cp_reconstruct,
    frobenius_norm,
)


def _random_tensor(dims, seed=0):
    return DenseTensor(np.random.default_rng(seed).standard_normal(dims))


def _changed(before: np.ndarray, after: np.ndarray):
    return {tuple(int(i) for i in idx) for idx in np.argwhere(before != after)}


def _tensor_coords(record: EffectRecord):
    return {idx for target, _, idx in record.coordinates() if target == "tensor"}


class TestChangePoint:
    def test_structural_shift(self):
        factor = np.zeros((100, 2))
        out, record = apply_change_point(factor, ChangePointSpec(0, 50, 99, 2.5), mode=2)
        assert np.all(out[50:, 0] == 2.5)
        assert np.all(out[:50] == 0.0)
        assert np.all(out[:, 1] == 0.0)
        assert record.achieved["classification"] == "structural_shift"
        assert record.coordinates() == {("factor", 2, (t, 0)) for t in range(50, 100)}

    def test_zero_magnitude(self):
        factor = np.random.default_rng(0).random((10, 2))
        out, _ = apply_change_point(factor, ChangePointSpec(1, 2, 5, 0.0))
        assert np.array_equal(out, factor)

    def test_singular_outlier(self):
        factor = np.random.default_rng(1).random((10, 2))
        out, record = apply_change_point(factor, ChangePointSpec(1, 7, 7, 5.0))
        assert _changed(factor, out) == {(7, 1)}
        assert out[7, 1] - factor[7, 1] == pytest.approx(5.0)
        assert record.achieved["classification"] == "singular_outlier"

    def test_default_magnitude(self):
        factor = np.random.default_rng(2).standard_normal((50, 1))
        _, record = apply_change_point(factor, ChangePointSpec(0, 10, 20))
        assert record.achieved["magnitude"] == pytest.approx(3 * np.std(factor[:, 0], ddof=1))
        assert record.achieved["classification"] == "temporary_change"

    def test_out_of_range(self):
        with pytest.raises(ParameterError):
            apply_change_point(np.zeros((10, 1)), ChangePointSpec(0, 5, 10, 1.0))
        with pytest.raises(ParameterError):
            ChangePointSpec(0, 6, 5)


class TestAnomaly:
    def test_touches_only_its_block(self, rng):
        host = _random_tensor((6, 7, 8))
        spec = AnomalySpec(block=((1, 3), (2, 5), (0, 4)), rank=2, amplitude=3.0)
        out, record = inject_anomaly(host, spec, rng)
        assert _changed(host.values, out.values) <= _tensor_coords(record)
        assert len(_tensor_coords(record)) == 2 * 3 * 4
        block = out.values[1:3, 2:5, 0:4]
        old = host.values[1:3, 2:5, 0:4]
        assert np.linalg.norm(block) == pytest.approx(3.0 * np.linalg.norm(old))

    def test_zero_weights_zero_the_block(self, rng):
        host = _random_tensor((4, 4, 4))
        spec = AnomalySpec(block=((0, 2), (0, 2), (0, 2)), weights="custom", weight_values=(0.0,))
        out, _ = inject_anomaly(host, spec, rng)
        assert np.all(out.values[:2, :2, :2] == 0.0)
        mask = np.ones((4, 4, 4), dtype=bool)
        mask[:2, :2, :2] = False
        assert np.array_equal(out.values[mask], host.values[mask])

    def test_zero_host_block(self, rng):
        values = np.ones((4, 4))
        values[:2, :2] = 0.0
        host = DenseTensor(values)
        out, record = inject_anomaly(host, AnomalySpec(block=((0, 2), (0, 2))), rng)
        expected = frobenius_norm(host) * math.sqrt(4 / 16)
        assert record.achieved["target_norm"] == pytest.approx(expected)
        assert np.linalg.norm(out.values[:2, :2]) == pytest.approx(expected)

    def test_empty_block(self):
        with pytest.raises(ParameterError):
            AnomalySpec(block=((2, 2), (0, 1)))

    def test_block_outside_tensor(self, rng):
        with pytest.raises(ParameterError):
            inject_anomaly(_random_tensor((3, 3)), AnomalySpec(block=((0, 4), (0, 1))), rng)


class TestNoise:
    def test_infinite_snr_is_a_noop(self, rng):
        host = _random_tensor((3, 4, 5))
        out, record = add_awgn(host, math.inf, rng)
        assert np.array_equal(out.values, host.values)
        assert record.touched == []

    def test_snr_is_met(self, rng):
        host = _random_tensor((50, 50, 50))
        out, _ = add_awgn(host, 10.0, rng)
        noise = out.values - host.values
        measured = 10 * math.log10(np.mean(host.values**2) / np.mean(noise**2))
        assert 9.7 <= measured <= 10.3

    def test_zero_db_equal_power(self, rng):
        host = _random_tensor((50, 50, 50))
        out, _ = add_awgn(host, 0.0, rng)
        ratio = np.linalg.norm(out.values - host.values) / np.linalg.norm(host.values)
        assert 0.97 <= ratio <= 1.03

    def test_zero_tensor(self, rng):
        with pytest.raises(NumericalError):
            add_awgn(DenseTensor.zeros((3, 3)), 10.0, rng)

    def test_sparse_noise_count(self, rng):
        host = _random_tensor((100, 100, 10))
        out, record = add_sparse_noise(host, 0.0, 0.01, rng)
        changed = _changed(host.values, out.values)
        assert len(changed) == 1000
        assert changed == _tensor_coords(record)

    def test_full_density_touches_everything(self, rng):
        host = _random_tensor((4, 5, 6))
        out, record = add_sparse_noise(host, 5.0, 1.0, rng)
        assert len(_tensor_coords(record)) == host.size
        _, dense_record = add_awgn(host, 5.0, rng)
        assert record.achieved["sigma"] == pytest.approx(dense_record.achieved["sigma"])
        assert np.all(out.values != host.values)

    def test_factor_noise_zero(self, rng):
        factors = [np.ones((5, 2)), np.ones((4, 2))]
        out, record = add_factor_noise(factors, 0.0, rng)
        assert all(np.array_equal(a, b) for a, b in zip(out, factors))
        assert record.touched == []

    def test_factor_noise_level(self, rng):
        factor = np.random.default_rng(3).standard_normal((1000, 10))
        out, _ = add_factor_noise([factor, factor], 0.1, rng)
        relative = np.linalg.norm(out[0] - factor) / np.linalg.norm(factor)
        assert 0.095 <= relative <= 0.105

    def test_factor_noise_modes_independent(self, rng):
        factor = np.ones((1000, 10))
        out, _ = add_factor_noise([factor, factor], 0.5, rng)
        a = (out[0] - factor).reshape(-1)
        b = (out[1] - factor).reshape(-1)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.03

    def test_factor_noise_selected_modes(self, rng):
        factors = [np.ones((5, 2)), np.ones((4, 2)), np.ones((3, 2))]
        out, record = add_factor_noise(factors, 0.2, rng, modes=[1])
        assert np.array_equal(out[0], factors[0])
        assert np.array_equal(out[2], factors[2])
        assert {mode for _, mode, _ in record.coordinates()} == {1}


class TestConstraints:
    def test_nonneg_idempotent(self):
        factors = [np.abs(np.random.default_rng(4).standard_normal((4, 2)))] * 2
        out, record = apply_nonneg(factors)
        assert all(np.array_equal(a, b) for a, b in zip(out, factors))
        assert record.achieved["changed"] == 0

    def test_nonneg_rules(self):
        out, _ = apply_nonneg([np.array([[-3.0, 1.0]]), np.array([[2.0, 2.0]])])
        assert out[0].tolist() == [[3.0, 1.0]]
        tensor, record = apply_nonneg(DenseTensor(np.array([[-3.0, 1.0], [2.0, -0.5]])))
        assert tensor.values.tolist() == [[0.0, 1.0], [2.0, 0.0]]
        assert _tensor_coords(record) == {(0, 0), (1, 1)}

    def test_stochastic_cp_is_non_negative(self, rng):
        factors = tuple(gen_stochastic(d, 3, rng.child(d)) for d in (5, 6, 7))
        tensor = cp_reconstruct(CpModel(factors=factors, weights=[0.5, 1.0, 2.0]))
        assert tensor.values.min() >= 0.0

    def test_congruence_identity(self, rng):
        u = impose_congruence(30, 4, 0.0, rng)
        np.testing.assert_allclose(u.T @ u, np.eye(4), atol=1e-10)

    def test_congruence_target(self, rng):
        u = impose_congruence(30, 2, 0.9, rng)
        gram = u.T @ u
        assert abs(gram[0, 1] - 0.9) <= 1e-10
        np.testing.assert_allclose(np.diag(gram), [1.0, 1.0], atol=1e-10)

    def test_positive_definite_boundary(self):
        with pytest.raises(ParameterError, match="positive definite"):
            compound_symmetric(3, -0.5)
        compound_symmetric(3, -0.49)

    def test_correlation_white(self, rng):
        rows = 10000
        u = impose_correlation(rows, 3, 0.0, rng)
        corr = np.corrcoef(u, rowvar=False)
        assert np.all(np.abs(corr[np.triu_indices(3, 1)]) < 3 / math.sqrt(rows))

    def test_correlation_target(self, rng):
        u = impose_correlation(10000, 4, 0.8, rng)
        corr = np.corrcoef(u, rowvar=False)
        assert np.all(np.abs(corr[np.triu_indices(4, 1)] - 0.8) < 0.05)

    def test_normalize(self):
        out, _ = normalize_tensor(DenseTensor(np.ones((2, 2, 2))))
        np.testing.assert_allclose(out.values, np.full((2, 2, 2), 1 / math.sqrt(8)))
        again, _ = normalize_tensor(_random_tensor((4, 5, 6)))
        assert abs(frobenius_norm(again) - 1.0) <= 1e-12
        unit, _ = normalize_tensor(again)
        assert np.max(np.abs(unit.values - again.values)) <= 1e-15

    def test_normalize_zero(self):
        with pytest.raises(NumericalError):
            normalize_tensor(DenseTensor.zeros((2, 2)))


class TestSignFix:
    def test_positive_model_unchanged(self):
        model = CpModel(factors=(np.ones((3, 2)), np.ones((4, 2))), weights=[1.0, 2.0])
        fixed, record = sign_fix(model)
        assert all(np.array_equal(a, b) for a, b in zip(fixed.factors, model.factors))
        assert record.touched == []

    def test_negated_pair(self):
        u, v = np.array([[1.0], [2.0]]), np.array([[3.0], [1.0]])
        model = CpModel(factors=(-u, -v), weights=[1.0])
        fixed, _ = sign_fix(model)
        assert np.array_equal(fixed.factors[0], u)
        assert np.array_equal(fixed.factors[1], v)
        assert np.array_equal(cp_reconstruct(fixed).values, cp_reconstruct(model).values)

    def test_reconstruction_is_bit_identical(self):
        gen = np.random.default_rng(5)
        model = CpModel(
            factors=tuple(gen.standard_normal((d, 4)) for d in (5, 6, 7)),
            weights=gen.standard_normal(4),
        )
        fixed, _ = sign_fix(model)
        assert np.array_equal(cp_reconstruct(fixed).values, cp_reconstruct(model).values)
        for u in fixed.factors:
            leaders = u[np.argmax(np.abs(u), axis=0), np.arange(u.shape[1])]
            assert np.all(leaders >= 0)


class TestSparsity:
    def test_zero_fraction(self, rng):
        host = _random_tensor((4, 4, 4))
        out, view, _ = sparsify(host, 0.0, rng)
        assert np.array_equal(out.values, host.values)
        assert view.nnz == host.size

    def test_half_of_nonzeros(self, rng):
        host = _random_tensor((10, 10, 10))
        out, view, record = sparsify(host, 0.5, rng)
        assert out.nnz == 500
        assert view.nnz == 500
        assert _changed(host.values, out.values) == _tensor_coords(record)

    def test_factor_modes(self, rng):
        factors = [np.ones((10, 2)), np.ones((10, 2))]
        out, view, record = sparsify(factors, 0.5, rng, modes=[0])
        assert view is None
        assert np.count_nonzero(out[0]) == 10
        assert np.array_equal(out[1], factors[1])
        assert record.achieved["dropped"] == {"0": 10}

    def test_fraction_range(self, rng):
        with pytest.raises(ParameterError):
            sparsify(_random_tensor((2, 2)), 1.0, rng)

    def test_round_half_up(self):
        assert round_half_up(2.5) == 3
        assert round_half_up(0.5) == 1
        assert round_half_up(2.49) == 2


class TestPoisson:
    def test_zero_rates(self, rng):
        assert sample_poisson_counts(DenseTensor.zeros((3, 3, 3)), rng).nnz == 0

    def test_mean(self):
        rate = np.full((2, 2, 2), 0.5)
        rate[1, 0, 1] = 3.0
        draws = [
            sample_poisson_counts(DenseTensor(rate), RngStream(99).child("draw", i))
            .to_dense()
            .values[1, 0, 1]
            for i in range(10000)
        ]
        assert abs(np.mean(draws) - 3.0) < 3 * math.sqrt(3.0 / 10000)

    def test_negative_rate(self, rng):
        with pytest.raises(NumericalError):
            sample_poisson_counts(DenseTensor(np.array([[1.0, -1.0]])), rng)

    def test_counts_are_integers(self, rng):
        counts, model = gen_poisson_count((10, 10, 10), 3, rng, mu=1.0, theta=1.0)
        assert model.rank == 3
        assert np.all(counts.values == np.round(counts.values))
        assert np.all(counts.values > 0)


def _model_cells(model: CpModel):
    cells = {
        ("factor", n, (int(i), int(r))): float(u[i, r])
        for n, u in enumerate(model.factors)
        for i, r in np.ndindex(*u.shape)
    }
    cells.update({("weights", None, (r,)): float(w) for r, w in enumerate(model.weights)})
    return cells


def _changed_cells(before: CpModel, after: CpModel):
    old, new = _model_cells(before), _model_cells(after)
    return {key for key in old if old[key] != new[key]}


class TestSignFixLog:
    def test_compensating_flip_is_not_logged(self):
        model = CpModel(
            factors=(np.array([[-2.0], [1.0]]), np.array([[3.0], [1.0]])), weights=[1.0]
        )
        fixed, record = sign_fix(model)
        assert record.coordinates() == _changed_cells(model, fixed)
        assert record.coordinates() == {
            ("factor", 0, (0, 0)),
            ("factor", 0, (1, 0)),
            ("weights", None, (0,)),
        }
        assert fixed.weights.tolist() == [-1.0]

    def test_last_mode_flip_is_logged(self):
        model = CpModel(
            factors=(np.array([[-2.0], [1.0]]), np.array([[-3.0], [1.0]])), weights=[1.0]
        )
        fixed, record = sign_fix(model)
        assert record.coordinates() == _changed_cells(model, fixed)
        assert ("factor", 1, (0, 0)) in record.coordinates()
        assert fixed.weights.tolist() == [1.0]

    @pytest.mark.parametrize("seed", range(20))
    def test_log_matches_changed_cells(self, seed):
        gen = np.random.default_rng(500 + seed)
        order = int(gen.integers(2, 5))
        rank = int(gen.integers(1, 5))
        model = CpModel(
            factors=tuple(gen.standard_normal((int(d), rank)) for d in gen.integers(1, 6, order)),
            weights=gen.standard_normal(rank),
        )
        fixed, record = sign_fix(model)
        assert record.coordinates() == _changed_cells(model, fixed)
        assert np.array_equal(cp_reconstruct(fixed).values, cp_reconstruct(model).values)


class TestSnrCalibration:
    def test_twenty_db(self, rng):
        host = _random_tensor((50, 50, 50))
        out, record = add_awgn(host, 20.0, rng)
        noise = out.values - host.values
        measured = 10 * math.log10(np.mean(host.values**2) / np.mean(noise**2))
        assert 19.7 <= measured <= 20.3
        assert record.achieved["measured_snr_db"] == pytest.approx(measured)

    @pytest.mark.parametrize("snr_db", [-4000.0, 1e308, -1e308, math.nan, -math.inf])
    def test_unusable_snr_is_a_numerical_error(self, rng, snr_db):
        host = _random_tensor((4, 4, 4))
        with pytest.raises(NumericalError):
            add_awgn(host, snr_db, rng)
        with pytest.raises(NumericalError):
            add_sparse_noise(host, snr_db, 0.5, rng)

    def test_large_finite_snr_gives_tiny_noise(self, rng):
        host = _random_tensor((4, 4, 4))
        sigma, _ = noise_sigma(host, 300.0)
        assert 0.0 < sigma < 1e-14
        out, record = add_awgn(host, 4000.0, rng)
        assert np.allclose(out.values, host.values, rtol=1e-15, atol=0)
        assert 0.0 < record.achieved["sigma"] < 1e-190


@pytest.mark.parametrize("rank", [2, 3, 5])
@pytest.mark.parametrize("c", [0.0, 0.5, 0.9])
def test_congruence_grid(rng, rank, c):
    u = impose_congruence(20, rank, c, rng.child(rank, str(c)))
    gram = u.T @ u
    np.testing.assert_allclose(np.diag(gram), np.ones(rank), rtol=0, atol=1e-10)
    off_diagonal = gram[~np.eye(rank, dtype=bool)]
    assert np.max(np.abs(off_diagonal - c)) <= 1e-10
