import numpy as np
import pytest

from deepckit import slra
from deepckit.hankel import build_block_hankel, hankel_project
from deepckit.matlib import numeric_rank, rowspace_projector
from deepckit.plants import NoiseSpec, collect_trajectory, triple_mass_spring


def noisy_pair(seed, variance=0.01, T=200, t_ini=4, n_horizon=40):
    """(H_u, H_y noisy, H_y clean) for one seeded mass-spring record."""
    plant = triple_mass_spring()
    box = (np.full(2, -0.7), np.full(2, 0.7))
    depth = t_ini + n_horizon
    noisy = collect_trajectory(plant, T, box, NoiseSpec(variance, seed))
    clean = collect_trajectory(plant, T, box, NoiseSpec(0.0, seed))
    h_u = build_block_hankel(noisy.u_d, depth)
    return h_u, build_block_hankel(noisy.y_d, depth), build_block_hankel(clean.y_d, depth)


class TestRangeTruncate:
    def test_low_rank_null_component_is_identity(self):
        rng = np.random.default_rng(0)
        basis = rng.standard_normal((10, 4))
        pi2 = rowspace_projector(basis.T @ rng.standard_normal((10, 10)))
        # build h_y whose null-space component has rank 2
        h_y = rng.standard_normal((6, 10)) @ pi2
        h_y += rng.standard_normal((6, 2)) @ rng.standard_normal((2, 10)) @ (np.eye(10) - pi2)
        out = slra.range_truncate(h_y, pi2, 2)
        np.testing.assert_allclose(out, h_y, atol=1e-10)

    def test_full_projector_is_identity(self):
        rng = np.random.default_rng(1)
        h_y = rng.standard_normal((5, 7))
        out = slra.range_truncate(h_y, np.eye(7), 0)
        np.testing.assert_allclose(out, h_y, atol=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_output_null_rank_bounded(self, seed):
        rng = np.random.default_rng(seed)
        sub = rng.standard_normal((4, 9))
        pi2 = rowspace_projector(sub)
        h_y = rng.standard_normal((7, 9))
        out = slra.range_truncate(h_y, pi2, 2)
        assert numeric_rank(out @ (np.eye(9) - pi2), 1e-9) <= 2

    def test_invalid_projector_rejected(self):
        rng = np.random.default_rng(2)
        with pytest.raises(ValueError):
            slra.range_truncate(rng.standard_normal((4, 5)), rng.standard_normal((5, 5)), 1)


class TestIterativeSlra:
    def test_noise_free_fixed_point(self):
        h_u, _, h_y_clean = noisy_pair(seed=3, variance=0.0)
        report = slra.iterative_slra(h_y_clean, h_u, 8, eps=1e-6, block_size=3)
        assert report.converged
        assert report.iterations <= 2
        rel = np.linalg.norm(report.h_y_star - h_y_clean) / np.linalg.norm(h_y_clean)
        assert rel <= 1e-10

    def test_loose_eps_single_pass(self):
        h_u, h_y, _ = noisy_pair(seed=4)
        report = slra.iterative_slra(h_y, h_u, 8, eps=1.0, block_size=3)
        assert report.converged
        assert report.iterations == 1

    def test_denoises_seeded_instance(self):
        h_u, h_y, h_y_clean = noisy_pair(seed=5)
        report = slra.iterative_slra(h_y, h_u, 8, eps=1e-6, max_iter=200, block_size=3)
        before = np.linalg.norm(h_y - h_y_clean)
        after = np.linalg.norm(report.h_y_star - h_y_clean)
        assert after < before

    def test_output_exactly_block_hankel(self):
        h_u, h_y, _ = noisy_pair(seed=6)
        report = slra.iterative_slra(h_y, h_u, 8, eps=1e-4, max_iter=50, block_size=3)
        out = report.h_y_star
        depth, n_c = out.shape[0] // 3, out.shape[1]
        blocks = out.reshape(depth, 3, n_c)
        # every block on a block-anti-diagonal is bit-identical
        for i in range(depth - 1):
            for j in range(n_c - 1):
                np.testing.assert_array_equal(blocks[i + 1, :, j], blocks[i, :, j + 1])

    def test_input_hankel_untouched(self):
        h_u, h_y, _ = noisy_pair(seed=7)
        h_u_copy = h_u.copy()
        slra.iterative_slra(h_y, h_u, 8, eps=1e-3, max_iter=20, block_size=3)
        np.testing.assert_array_equal(h_u, h_u_copy)

    def test_rel_change_sequence_recorded(self):
        h_u, h_y, _ = noisy_pair(seed=8)
        report = slra.iterative_slra(h_y, h_u, 8, eps=1e-4, max_iter=30, block_size=3)
        assert len(report.rel_changes) == report.iterations
        assert all(np.isfinite(r) for r in report.rel_changes)
        assert report.final_rel_change == report.rel_changes[-1]
        if report.converged:
            assert report.final_rel_change <= 1e-4

    def test_max_iter_exhaustion_flagged(self):
        h_u, h_y, _ = noisy_pair(seed=9)
        report = slra.iterative_slra(h_y, h_u, 8, eps=1e-12, max_iter=3, block_size=3)
        assert not report.converged
        assert report.iterations == 3

    def test_near_fixed_point_after_convergence(self):
        # one more truncation changes a converged iterate by <= eps relative
        h_u, h_y, _ = noisy_pair(seed=10)
        eps = 1e-4
        report = slra.iterative_slra(h_y, h_u, 8, eps=eps, max_iter=2000, block_size=3)
        assert report.converged
        pi2 = rowspace_projector(h_u)
        again = slra.range_truncate(report.h_y_star, pi2, 8)
        rel = np.linalg.norm(again - report.h_y_star) / np.linalg.norm(report.h_y_star)
        assert rel <= eps

    def test_column_mismatch_rejected(self):
        with pytest.raises(ValueError):
            slra.iterative_slra(np.zeros((4, 5)), np.zeros((2, 6)), 1)

    def test_block_inference_differing_channels(self):
        # m=2 vs p=3 makes the shared depth unambiguous
        h_u, h_y, h_y_clean = noisy_pair(seed=11, variance=0.0)
        report = slra.iterative_slra(h_y_clean, h_u, 8, eps=1e-6)
        rel = np.linalg.norm(report.h_y_star - h_y_clean) / np.linalg.norm(h_y_clean)
        assert rel <= 1e-10
