import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abusekit import fusion
from abusekit.errors import ConfigError


class TestZScore:
    def test_two_value_column(self):
        params = fusion.fit_zscore(np.array([[0.0], [2.0]]))
        assert params.mean[0] == 1.0 and params.std[0] == 1.0

    def test_constant_column_floored(self):
        train = np.column_stack([np.full(10, 3.0), np.arange(10.0)])
        params = fusion.fit_zscore(train)
        assert params.std[0] == fusion.STD_FLOOR
        np.testing.assert_allclose(params.transform(train)[:, 0], 0.0)

    def test_transformed_train_statistics(self):
        rng = np.random.default_rng(5)
        train = rng.normal(3.0, 7.0, size=(200, 6))
        z = fusion.fit_zscore(train).transform(train)
        assert np.max(np.abs(z.mean(axis=0))) < 1e-9
        assert np.max(np.abs(z.std(axis=0) - 1.0)) < 1e-6

    def test_needs_two_rows(self):
        with pytest.raises(ConfigError):
            fusion.fit_zscore(np.ones((1, 3)))

    @given(shift=st.floats(-50, 50), seed=st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_shift_equivariance(self, shift, seed):
        rng = np.random.default_rng(seed)
        train = rng.standard_normal((30, 4))
        base = fusion.fit_zscore(train)
        shifted = fusion.fit_zscore(train + shift)
        np.testing.assert_allclose(shifted.mean, base.mean + shift, atol=1e-9)
        np.testing.assert_allclose(shifted.std, base.std, atol=1e-9)
        np.testing.assert_allclose(shifted.transform(train + shift),
                                   base.transform(train), atol=1e-8)


class TestPCA:
    def test_rank_one_line(self):
        rng = np.random.default_rng(0)
        t = rng.standard_normal(100)
        train = np.column_stack([t, t]) + 1e-12 * rng.standard_normal((100, 2))
        model = fusion.fit_pca(train)
        assert model.k == 1
        np.testing.assert_allclose(np.abs(model.components[0]),
                                   [np.sqrt(0.5), np.sqrt(0.5)], atol=1e-6)

    def test_isotropic_gaussian_needs_all_components(self):
        rng = np.random.default_rng(42)
        train = rng.standard_normal((10000, 3))
        model = fusion.fit_pca(train)
        assert model.k == 3
        np.testing.assert_allclose(model.all_ratios, 1 / 3, atol=0.02)

    def test_orthonormal_components(self):
        rng = np.random.default_rng(7)
        train = rng.standard_normal((50, 12)) * np.linspace(5, 0.1, 12)
        model = fusion.fit_pca(train)
        gram = model.components @ model.components.T
        assert np.max(np.abs(gram - np.eye(model.k))) < 1e-8

    def test_k_boundary_straddles_target(self):
        rng = np.random.default_rng(11)
        train = rng.standard_normal((200, 10)) * np.linspace(4, 0.5, 10)
        model = fusion.fit_pca(train)
        cumulative = np.cumsum(model.all_ratios)
        assert cumulative[model.k - 1] >= 0.95
        if model.k > 1:
            assert cumulative[model.k - 2] < 0.95

    def test_ratios_positive_descending_sum_to_one(self):
        rng = np.random.default_rng(3)
        model = fusion.fit_pca(rng.standard_normal((60, 8)))
        assert np.all(model.all_ratios >= 0.0)
        assert np.all(np.diff(model.all_ratios) <= 1e-12)
        assert abs(model.all_ratios.sum() - 1.0) < 1e-6

    def test_row_order_invariance_up_to_sign(self):
        rng = np.random.default_rng(9)
        train = rng.standard_normal((40, 5)) * np.array([3, 2, 1, 0.5, 0.1])
        a = fusion.fit_pca(train)
        b = fusion.fit_pca(train[rng.permutation(40)])
        assert a.k == b.k
        np.testing.assert_allclose(a.components, b.components, atol=1e-8)

    def test_k_capped_by_rank(self):
        rng = np.random.default_rng(2)
        train = rng.standard_normal((4, 10))
        model = fusion.fit_pca(train)
        assert 1 <= model.k <= 3


class TestFusionModel:
    def _fit(self, use_pca=True, seed=0):
        rng = np.random.default_rng(seed)
        train = {
            "audio": rng.standard_normal((50, 8)) * np.linspace(3, 0.1, 8),
            "emotion": rng.standard_normal((50, 12)),
            "text": rng.standard_normal((50, 6)),
        }
        return train, fusion.fit_fusion(train, use_pca=use_pca)

    def test_fused_length_is_sum_of_ks(self):
        train, model = self._fit()
        ks = model.per_modality_k()
        vec = model.transform({m: train[m][0] for m in train})
        assert vec.shape == (sum(ks.values()),)
        assert model.fused_dim == sum(ks.values())

    def test_training_mean_projects_to_zero(self):
        train, model = self._fit()
        means = {m: train[m].mean(axis=0) for m in train}
        np.testing.assert_allclose(model.transform(means), 0.0, atol=1e-9)

    def test_reconstruction_captures_variance_target(self):
        rng = np.random.default_rng(21)
        train = rng.standard_normal((300, 20)) * np.linspace(6, 0.05, 20)
        zs = fusion.fit_zscore(train)
        z = zs.transform(train)
        model = fusion.fit_pca(z)
        projected = model.transform(z)
        reconstructed = projected @ model.components + model.mean
        residual = np.var(z - reconstructed, axis=0).sum()
        total = np.var(z, axis=0).sum()
        assert 1.0 - residual / total >= 0.95 - 1e-9

    def test_missing_modality_rejected(self):
        train, model = self._fit()
        with pytest.raises(ConfigError, match="missing"):
            model.transform({"audio": train["audio"][0]})

    def test_dim_mismatch_rejected(self):
        train, model = self._fit()
        vectors = {m: train[m][0] for m in train}
        vectors["audio"] = np.zeros(9)
        with pytest.raises(ConfigError, match="dim"):
            model.transform(vectors)

    def test_no_pca_keeps_raw_dims(self):
        train, model = self._fit(use_pca=False)
        assert model.fused_dim == 8 + 12 + 6

    def test_serialization_round_trip(self):
        train, model = self._fit()
        text = fusion.fusion_to_json(model)
        back = fusion.fusion_from_json(text)
        vectors = {m: train[m][3] for m in train}
        np.testing.assert_array_equal(back.transform(vectors), model.transform(vectors))
        assert fusion.fusion_to_json(back) == text

    def test_shift_leaves_projected_train_unchanged(self):
        rng = np.random.default_rng(33)
        train = rng.standard_normal((40, 6))
        model = fusion.fit_fusion({"audio": train})
        shifted_model = fusion.fit_fusion({"audio": train + 11.0})
        np.testing.assert_allclose(
            shifted_model.modalities[0].zscore.mean,
            model.modalities[0].zscore.mean + 11.0, atol=1e-8)
        a = model.transform_matrix({"audio": train})
        b = shifted_model.transform_matrix({"audio": train + 11.0})
        np.testing.assert_allclose(a, b, atol=1e-8)
