"""
NucleiGrind — Tests for the target encodings.
Run with: python -m pytest tests/ -v
"""
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import sys
sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

from content.fixtures import disk, l_shape, random_label_map, square5
from content.models import Encoder, EncodingConfig, RigidTransform
from engine import oracles
from engine.encodings import (
    dir_encoding,
    encode,
    hv_encoding,
    position_encoding,
    quantize_angle,
    structure_distances,
    structure_encoding,
)
from engine.grid import contour_mask
from engine.invariance import ALL_TRANSFORMS, apply_transform

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _single_pixel():
    labels = np.zeros((5, 5), dtype=np.int64)
    labels[2, 2] = 1
    return labels


class TestStructureEncoding:
    """Signed, per-instance normalized contour distance"""

    def test_square_values(self):
        """Ring 0, centre +1, edge background -1/√2, corner -1"""
        se = structure_encoding(square5())[:, :, 0]
        assert np.all(se[contour_mask(square5())] == 0.0)
        assert se[2, 2] == 1.0
        assert se[0, 2] == pytest.approx(-1 / np.sqrt(2))
        assert se[0, 0] == -1.0

    def test_empty_map(self):
        """No instances gives -1 everywhere"""
        se = structure_encoding(np.zeros((4, 4), dtype=np.int64))
        assert se.shape == (4, 4, 1)
        assert np.all(se == -1.0)

    def test_single_pixel_instance(self):
        """A 1-pixel nucleus is pure contour; nothing is positive"""
        se = structure_encoding(_single_pixel())[:, :, 0]
        assert se[2, 2] == 0.0
        assert not (se > 0).any()

    def test_ranges(self):
        """Inside (0, 1], background [-1, 0)"""
        labels = random_label_map(np.random.default_rng(11), 40, 40, 10)
        se = structure_encoding(labels)[:, :, 0]
        contour = contour_mask(labels)
        inside = (labels > 0) & ~contour
        assert np.all(se[inside] > 0) and np.all(se[inside] <= 1)
        assert np.all(se[labels == 0] < 0) and np.all(se[labels == 0] >= -1)
        assert np.all(se[contour] == 0)

    def test_each_instance_peaks_at_one(self):
        """Per-instance normalization: every instance with an interior reaches 1"""
        labels = np.zeros((20, 20), dtype=np.int64)
        labels[1:4, 1:4] = 1
        labels[8:19, 8:19] = 2
        se = structure_encoding(labels)[:, :, 0]
        assert se[labels == 1].max() == 1.0
        assert se[labels == 2].max() == 1.0

    def test_background_cap(self):
        """A fixed cap divides instead of the global maximum and clips at -1"""
        se = structure_encoding(square5(), EncodingConfig(background_norm_cap=16.0))[:, :, 0]
        assert se[0, 0] == pytest.approx(-np.sqrt(2) / 16)
        se = structure_encoding(square5(), EncodingConfig(background_norm_cap=1.0))[:, :, 0]
        assert se[0, 0] == -1.0

    def test_inside_distance_uses_own_contour_only(self):
        """A neighbour's contour never shortens an inside distance"""
        labels = np.zeros((7, 12), dtype=np.int64)
        labels[:, 0:6] = 1
        labels[:, 6:12] = 2
        raw = structure_distances(labels)
        np.testing.assert_allclose(raw, oracles.brute_structure_distances(labels), atol=1e-12)
        assert raw[3, 3] == 2.0

    @settings(max_examples=40, deadline=None)
    @given(seeds)
    def test_matches_brute_force(self, seed):
        """EDT distances agree with a scan over every contour pixel"""
        labels = random_label_map(np.random.default_rng(seed), 24, 24, 8)
        fast = structure_distances(labels)
        slow = oracles.brute_structure_distances(labels)
        if slow is None:
            assert fast is None
        else:
            np.testing.assert_allclose(fast, slow, rtol=0, atol=1e-9)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(3, 14), st.integers(0, 3), st.integers(0, 3))
    def test_isotropic_on_disks(self, radius, shift_row, shift_col):
        """Interior pixels at equal contour distance share one SE value"""
        size = 2 * radius + 9
        centre = (radius + 2 + shift_row, radius + 2 + shift_col)
        labels = disk(radius=radius, size=size, center=centre)
        raw = structure_distances(labels)
        se = structure_encoding(labels)[:, :, 0]
        interior = (labels > 0) & ~contour_mask(labels)
        for distance in np.unique(raw[interior]):
            values = np.unique(se[interior & (raw == distance)])
            assert values.size == 1
            assert values[0] > 0


class TestCentroidEncodings:
    """HV, Dir and position maps"""

    def test_hv_square(self):
        """Left/right neighbours of the centre are -1/+1 horizontally"""
        hv = hv_encoding(square5())
        assert tuple(hv[2, 1]) == (-1.0, 0.0)
        assert tuple(hv[2, 3]) == (1.0, 0.0)
        assert tuple(hv[2, 2]) == (0.0, 0.0)
        assert tuple(hv[0, 0]) == (0.0, 0.0)

    def test_hv_single_pixel(self):
        """Zero extent gives zero offsets"""
        assert not hv_encoding(_single_pixel()).any()

    def test_hv_range(self):
        """HV lies in [-1, 1] and each channel reaches ±1 on a non-trivial instance"""
        hv = hv_encoding(l_shape())
        assert np.abs(hv).max() == 1.0
        assert np.abs(hv[:, :, 0]).max() == 1.0 and np.abs(hv[:, :, 1]).max() == 1.0

    def test_dir_square(self):
        """θ = 0 is class 1, θ = π/2 (downward) is class 3 for K = 8"""
        dirs = dir_encoding(square5())
        assert dirs[2, 3] == 1
        assert dirs[3, 2] == 3
        assert dirs[2, 2] == 1
        assert dirs[0, 0] == 0

    def test_dir_class_range(self):
        """Every nucleus pixel lands in 1..K"""
        cfg = EncodingConfig(dir_class_count=5)
        labels = random_label_map(np.random.default_rng(2), 30, 30, 8)
        dirs = dir_encoding(labels, cfg)
        assert np.all((dirs[labels > 0] >= 1) & (dirs[labels > 0] <= 5))
        assert np.all(dirs[labels == 0] == 0)

    def test_quantize_angle_wraps(self):
        """Angles just below 2π stay in the last class"""
        assert quantize_angle(np.array([-1e-9]), np.array([1.0]), 8)[0] == 8
        assert quantize_angle(np.array([0.0]), np.array([-1.0]), 4)[0] == 3

    def test_quantize_signed_zero_vector(self):
        """Every signed zero vector is class 1"""
        rows = np.array([0.0, -0.0, 0.0, -0.0])
        cols = np.array([0.0, 0.0, -0.0, -0.0])
        assert quantize_angle(rows, cols, 8).tolist() == [1, 1, 1, 1]
        assert quantize_angle(-rows, -cols, 4).tolist() == [1, 1, 1, 1]

    def test_position_square(self):
        """Centre 0, corner of the square √2"""
        pos = position_encoding(square5())
        assert pos.shape == (5, 5, 1)
        assert pos[2, 2, 0] == 0.0
        assert pos[1, 1, 0] == pytest.approx(np.sqrt(2))
        assert pos[0, 0, 0] == 0.0

    def test_position_single_pixel(self):
        assert not position_encoding(_single_pixel()).any()

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_position_matches_brute_force(self, seed):
        """Integer offsets agree with float centroids"""
        labels = random_label_map(np.random.default_rng(seed), 20, 20, 6)
        np.testing.assert_allclose(position_encoding(labels), oracles.brute_position_encoding(labels), atol=1e-9)

    def test_encode_dispatch(self):
        """encode() routes by name"""
        labels = square5()
        assert encode(labels, "se").shape == (5, 5, 1)
        assert encode(labels, Encoder.HV).shape == (5, 5, 2)
        assert encode(labels, "dir").dtype == np.int64
        np.testing.assert_array_equal(encode(labels, "pos"), position_encoding(labels))
        with pytest.raises(ValueError):
            encode(labels, "sdf")


class TestEquivariance:
    """Rigid transforms commute with SE and position, not with HV"""

    @settings(max_examples=20, deadline=None)
    @given(seeds)
    def test_se_and_position_exact(self, seed):
        """encode(T(L)) == T(encode(L)) bit for bit"""
        labels = random_label_map(np.random.default_rng(seed), 32, 32, 10)
        for t in ALL_TRANSFORMS:
            moved = apply_transform(labels, t)
            np.testing.assert_array_equal(structure_encoding(moved), apply_transform(structure_encoding(labels), t))
            np.testing.assert_array_equal(position_encoding(moved), apply_transform(position_encoding(labels), t))

    def test_hv_breaks_under_flip(self):
        """Mirroring columns flips the sign of the horizontal channel"""
        labels = l_shape()
        moved = apply_transform(labels, RigidTransform.FLIP_H)
        after = hv_encoding(moved)
        before = apply_transform(hv_encoding(labels), RigidTransform.FLIP_H)
        np.testing.assert_array_equal(after[:, :, 0], -before[:, :, 0])
        np.testing.assert_array_equal(after[:, :, 1], before[:, :, 1])
