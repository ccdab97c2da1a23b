import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrxai.errors import InvalidParams, RectTooSmall
from mrxai.imaging import Image
from mrxai.mutants import (Partition, RiseMaskParams, Segmentation,
                           coalition_samples, rex_partition, rise_mask,
                           rise_masks, segment_image, shapley_kernel_weights)


class TestRiseMasks:
    def test_p_one_all_ones(self):
        for mask in rise_masks(RiseMaskParams(grid=4, keep_prob=1.0, count=5, seed=1), (16, 16)):
            assert np.array_equal(mask.values, np.ones((16, 16)))

    def test_p_zero_all_zeros(self):
        for mask in rise_masks(RiseMaskParams(grid=4, keep_prob=0.0, count=5, seed=1), (16, 16)):
            assert np.array_equal(mask.values, np.zeros((16, 16)))

    def test_values_in_unit_interval(self):
        for mask in rise_masks(RiseMaskParams(grid=8, keep_prob=0.4, count=20, seed=3), (32, 32)):
            assert mask.values.min() >= 0.0 and mask.values.max() <= 1.0

    def test_grand_mean_near_p(self):
        masks = rise_masks(RiseMaskParams(grid=8, keep_prob=0.1, count=2000, seed=0), (64, 64))
        grand = float(np.mean([m.values for m in masks]))
        assert grand == pytest.approx(0.1, abs=0.01)

    def test_per_pixel_mean_within_3_sigma(self):
        params = RiseMaskParams(grid=8, keep_prob=0.1, count=2000, seed=0)
        stack = np.stack([m.values for m in rise_masks(params, (64, 64))])
        tol = 3.0 * math.sqrt(0.1 * 0.9 / params.count)
        per_pixel = stack.mean(axis=0)
        assert np.all(np.abs(per_pixel - 0.1) <= tol)

    def test_replay_is_byte_identical(self):
        params = RiseMaskParams(grid=8, keep_prob=0.3, count=10, seed=9)
        a = rise_masks(params, (20, 24))
        b = rise_masks(params, (20, 24))
        for ma, mb in zip(a, b):
            assert ma.values.tobytes() == mb.values.tobytes()

    def test_single_index_matches_batch(self):
        params = RiseMaskParams(grid=8, keep_prob=0.3, count=12, seed=4)
        batch = rise_masks(params, (17, 23))
        for i in (0, 5, 11):
            assert np.array_equal(rise_mask(params, (17, 23), i).values, batch[i].values)

    def test_invalid_params(self):
        with pytest.raises(InvalidParams):
            RiseMaskParams(grid=0)
        with pytest.raises(InvalidParams):
            RiseMaskParams(keep_prob=1.5)
        with pytest.raises(InvalidParams):
            RiseMaskParams(count=0)


class TestSegmentation:
    def test_constant_image_exact_grid(self):
        seg = segment_image(Image(np.full((60, 60, 1), 0.5)), 36, seed=7)
        expect = (np.arange(60)[:, None] // 10) * 6 + (np.arange(60)[None, :] // 10)
        assert seg.k == 36
        assert np.array_equal(seg.labels, expect)

    def test_partition_and_connectivity(self):
        rng = np.random.default_rng(5)
        img = Image(rng.random((40, 40, 1)))
        seg = segment_image(img, 12, seed=2)
        assert seg.k <= 12
        counts = np.bincount(seg.labels.reshape(-1), minlength=seg.k)
        assert counts.sum() == 1600
        assert counts.min() > 0  # Segmentation validates 4-connectivity itself

    def test_two_tone_halves(self):
        data = np.zeros((32, 64, 1))
        data[:, 32:, 0] = 1.0
        seg = segment_image(Image(data), 2, seed=3)
        assert seg.k == 2
        assert np.all(seg.labels[:, :32] == seg.labels[0, 0])
        assert np.all(seg.labels[:, 32:] == seg.labels[0, 63])
        assert seg.labels[0, 0] != seg.labels[0, 63]

    def test_determinism(self):
        rng = np.random.default_rng(8)
        img = Image(rng.random((24, 24, 1)))
        a = segment_image(img, 9, seed=1)
        b = segment_image(img, 9, seed=1)
        assert np.array_equal(a.labels, b.labels)

    def test_invalid_target(self):
        img = Image(np.zeros((4, 4, 1)))
        with pytest.raises(InvalidParams):
            segment_image(img, 0)
        with pytest.raises(InvalidParams):
            segment_image(img, 17)

    def test_segmentation_rejects_disconnected_label(self):
        labels = np.zeros((4, 4), int)
        labels[0, 0] = 1
        labels[3, 3] = 1
        with pytest.raises(InvalidParams):
            Segmentation(labels=labels, k=2)


class TestCoalitions:
    def test_forced_pair(self):
        out = coalition_samples(5, 2, seed=1)
        assert not out[0].any() and out[1].all()

    def test_n_one_is_all_off(self):
        out = coalition_samples(3, 1, seed=1)
        assert out.shape == (1, 3) and not out[0].any()

    @pytest.mark.parametrize("scheme", ["uniform", "shapley-kernel"])
    def test_k_one_only_two_coalitions(self, scheme):
        out = coalition_samples(1, 50, seed=2, scheme=scheme)
        assert set(map(tuple, out.tolist())) <= {(False,), (True,)}

    def test_kernel_weights_k3_symmetric(self):
        w = shapley_kernel_weights(3)
        assert w == pytest.approx([0.5, 0.5])

    def test_kernel_size_distribution_k3(self):
        out = coalition_samples(3, 10_000, seed=5, scheme="shapley-kernel")
        sizes = out[2:].sum(axis=1)
        assert set(sizes.tolist()) <= {1, 2}
        assert np.mean(sizes == 1) == pytest.approx(0.5, abs=0.02)
        assert np.mean(sizes == 2) == pytest.approx(0.5, abs=0.02)

    def test_kernel_sizes_always_proper(self):
        out = coalition_samples(6, 500, seed=9, scheme="shapley-kernel")
        sizes = out[2:].sum(axis=1)
        assert sizes.min() >= 1 and sizes.max() <= 5

    def test_deterministic_and_index_stable(self):
        a = coalition_samples(7, 40, seed=3)
        b = coalition_samples(7, 40, seed=3)
        assert np.array_equal(a, b)
        # prefix stability: sample i depends only on (seed, i)
        c = coalition_samples(7, 20, seed=3)
        assert np.array_equal(a[:20], c)

    def test_invalid(self):
        with pytest.raises(InvalidParams):
            coalition_samples(0, 5)
        with pytest.raises(InvalidParams):
            coalition_samples(3, 5, scheme="nope")


class TestRexPartition:
    def test_2x2_forced(self):
        part = rex_partition((0, 0, 2, 2), seed=0)
        assert part.parts == ((0, 0, 1, 1), (0, 1, 1, 2), (1, 0, 2, 1), (1, 1, 2, 2))

    @given(st.integers(0, 2**31), st.integers(2, 30), st.integers(2, 30))
    @settings(max_examples=60, deadline=None)
    def test_tiles_exactly(self, seed, h, w):
        part = rex_partition((0, 0, h, w), seed)
        areas = sum((r1 - r0) * (c1 - c0) for r0, c0, r1, c1 in part.parts)
        assert areas == h * w
        cells = set()
        for r0, c0, r1, c1 in part.parts:
            assert r1 > r0 and c1 > c0
            for r in range(r0, r1):
                for c in range(c0, c1):
                    assert (r, c) not in cells
                    cells.add((r, c))

    def test_deterministic(self):
        assert rex_partition((0, 0, 256, 256), seed=42) == rex_partition((0, 0, 256, 256), seed=42)

    def test_too_small(self):
        with pytest.raises(RectTooSmall):
            rex_partition((0, 0, 1, 5), seed=0)

    def test_partition_type_validates(self):
        with pytest.raises(InvalidParams):
            Partition(parent=(0, 0, 4, 4),
                      parts=((0, 0, 2, 2), (0, 2, 2, 4), (2, 0, 4, 2), (2, 2, 3, 3)))
