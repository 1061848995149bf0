import numpy as np
import pytest

from ssl_vit_lens import (
    AttentionRestriction,
    ModelConfig,
    attention_distance,
    forward,
    make_local_mask,
    random_weights,
)
from ssl_vit_lens.errors import InvalidKernel, ShapeError
from ssl_vit_lens.vit import LayerWeights, Weights, patchify

from oracles import naive_forward


def weights_equal(a, b):
    named_a, named_b = a.named(), b.named()
    return set(named_a) == set(named_b) and all(
        np.array_equal(named_a[k], named_b[k]) for k in named_a)


class TestRandomWeights:
    def test_deterministic(self, toy_config):
        assert weights_equal(random_weights(toy_config, 5), random_weights(toy_config, 5))

    def test_seed_changes_weights(self, toy_config):
        assert not weights_equal(random_weights(toy_config, 5), random_weights(toy_config, 6))

    def test_empirical_std_near_configured(self):
        cfg = ModelConfig(depth=1, heads=1, dim=64, patch_size=4, image_size=16)
        w = random_weights(cfg, 1)
        assert 0.015 <= np.std(w.patch_weight) <= 0.025

    def test_layernorms_at_identity(self, toy_weights):
        for lw in toy_weights.layers:
            assert np.all(lw.ln1_scale == 1) and np.all(lw.ln1_shift == 0)


class TestLocalMask:
    def test_unlimited_is_all_ones(self):
        m = make_local_mask(3, 3, AttentionRestriction(kernel=None))
        assert np.all(m == 1)

    def test_center_query_full_neighborhood(self):
        m = make_local_mask(3, 3, AttentionRestriction(kernel=3))
        assert m[4].sum() == 9  # center of a 3x3 grid sees everything

    def test_pair_count_matches_enumeration(self):
        # 4x4 grid, kernel 3: count admitted (q, k) pairs by brute force
        m = make_local_mask(4, 4, AttentionRestriction(kernel=3))
        count = 0
        for q in range(16):
            qy, qx = divmod(q, 4)
            for k in range(16):
                ky, kx = divmod(k, 4)
                if max(abs(qy - ky), abs(qx - kx)) <= 1:
                    count += 1
        assert m.sum() == count == 100

    def test_even_kernel_rejected(self):
        with pytest.raises(InvalidKernel):
            AttentionRestriction(kernel=2)
        with pytest.raises(InvalidKernel):
            AttentionRestriction(kernel=0)

    def test_cls_row_and_column(self):
        r = AttentionRestriction(kernel=3, include_cls_always=True)
        m = make_local_mask(2, 2, r, use_cls=True)
        assert np.all(m[0] == 1) and np.all(m[:, 0] == 1)
        r2 = AttentionRestriction(kernel=1, include_cls_always=False)
        m2 = make_local_mask(2, 2, r2, use_cls=True)
        assert m2[0, 0] == 1 and m2[0, 1:].sum() == 0 and m2[1:, 0].sum() == 0


class TestForward:
    def test_rows_sum_to_one(self, toy_bundle):
        for a in toy_bundle.attention:
            assert np.max(np.abs(a.sum(axis=-1) - 1)) < 1e-5

    def test_determinism(self, toy_image, toy_weights, toy_config):
        b1 = forward(toy_image, toy_weights, toy_config)
        b2 = forward(toy_image, toy_weights, toy_config)
        assert b1.equal_to(b2)

    def test_kernel_one_attention_is_identity_support(self, toy_image, toy_weights, toy_config):
        b = forward(toy_image, toy_weights, toy_config,
                    restriction=AttentionRestriction(kernel=1))
        for a in b.attention:
            for h in range(a.shape[0]):
                assert np.allclose(a[h], np.eye(a.shape[1]), atol=1e-6)
            d = attention_distance(a, toy_config.grid, toy_config.grid,
                                   toy_config.patch_size)
            assert np.all(d == 0)

    def test_masked_mass_exactly_zero(self, toy_image, toy_config):
        cfg = ModelConfig(depth=2, heads=2, dim=16, patch_size=2, image_size=8)
        w = random_weights(cfg, 3)
        img = np.random.default_rng(0).random((3, 8, 8), dtype=np.float32)
        r = AttentionRestriction(kernel=3)
        mask = make_local_mask(cfg.grid, cfg.grid, r)
        b = forward(img, w, cfg, restriction=r)
        for a in b.attention:
            assert np.all(a[:, mask == 0] == 0.0)

    def test_dual_implementation_oracle(self, toy_config):
        rng = np.random.default_rng(99)
        for seed in range(3):
            w = random_weights(toy_config, seed)
            img = rng.random((3, 8, 8), dtype=np.float32)
            fast = forward(img, w, toy_config)
            attn_ref, reps_ref = naive_forward(img, w, toy_config)
            for a, ar in zip(fast.attention, attn_ref):
                assert np.max(np.abs(a - ar)) < 1e-4
            for r, rr in zip(fast.representations, reps_ref):
                assert np.max(np.abs(r - rr)) < 1e-4

    def test_permutation_equivariance_without_pos(self, toy_config):
        w = random_weights(toy_config, 2)
        w.pos_embed = np.zeros_like(w.pos_embed)
        rng = np.random.default_rng(5)
        img = rng.random((3, 8, 8), dtype=np.float32)
        patches = patchify(img, toy_config)
        perm = rng.permutation(toy_config.num_tokens)
        # permute input patches by rebuilding the image patch-wise
        permuted = np.zeros_like(img)
        g, p = toy_config.grid, toy_config.patch_size
        for dst, src in enumerate(perm):
            dy, dx = divmod(dst, g)
            sy, sx = divmod(int(src), g)
            permuted[:, dy * p:(dy + 1) * p, dx * p:(dx + 1) * p] = \
                img[:, sy * p:(sy + 1) * p, sx * p:(sx + 1) * p]
        out = forward(img, w, toy_config).representations[-1]
        out_perm = forward(permuted, w, toy_config).representations[-1]
        assert np.allclose(out_perm, out[perm], atol=1e-5)

    def test_residual_identity_with_zero_projections(self, toy_config):
        w = random_weights(toy_config, 4)
        w.pos_embed = np.zeros_like(w.pos_embed)
        for lw in w.layers:
            for name in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
                         "mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2"):
                setattr(lw, name, np.zeros_like(getattr(lw, name)))
        img = np.random.default_rng(1).random((3, 8, 8), dtype=np.float32)
        b = forward(img, w, toy_config)
        embed = b.representations[0]
        for rep in b.representations[1:]:
            assert np.array_equal(rep, embed)

    def test_shape_mismatch(self, toy_weights, toy_config):
        with pytest.raises(ShapeError):
            forward(np.zeros((3, 4, 4), dtype=np.float32), toy_weights, toy_config)

    def test_cls_forward_valid(self):
        cfg = ModelConfig(depth=2, heads=2, dim=8, patch_size=4, image_size=8,
                          use_cls=True)
        w = random_weights(cfg, 0)
        img = np.random.default_rng(0).random((3, 8, 8), dtype=np.float32)
        b = forward(img, w, cfg)
        b.validate()
        assert b.representations[0].shape == (5, 8)
