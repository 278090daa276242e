"""
NucleiGrind — Tests for the training losses and their gradients.
Run with: python -m pytest tests/ -v
"""
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import sys
sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

from content.fixtures import fixture_set
from content.models import LossConfig
from engine import losses, oracles
from engine.errors import DimensionMismatch, MissingScale
from engine.grid import semantic_from_labels
from engine.encodings import structure_encoding

GRADIENT_TOLERANCE = 1e-4

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _softmax_field(rng, shape):
    logits = rng.normal(size=shape)
    weights = np.exp(logits - logits.max(axis=2, keepdims=True))
    return weights / weights.sum(axis=2, keepdims=True)


def _uniform(shape):
    return np.full(shape + (3,), 1 / 3)


class TestCrossEntropy:
    """Pixel-mean cross-entropy"""

    def test_perfect_prediction(self):
        """A one-hot prediction of the target costs nothing"""
        target = np.array([[0, 1], [2, 1]])
        loss, _ = losses.cross_entropy(losses.one_hot(target, 3), target)
        assert loss == 0.0

    def test_uniform_prediction(self):
        """Uniform over 3 classes costs ln 3"""
        loss, _ = losses.cross_entropy(_uniform((4, 4)), np.zeros((4, 4), dtype=int))
        assert loss == pytest.approx(np.log(3))

    def test_clamped_probability_has_zero_gradient(self):
        """p = 0 on the true class is clamped to eps with no gradient"""
        pred = np.zeros((1, 1, 2))
        pred[0, 0, 1] = 1.0
        loss, grad = losses.cross_entropy(pred, np.array([[0]]))
        assert loss == pytest.approx(-np.log(1e-12))
        assert not grad.any()

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        pred = _softmax_field(rng, (4, 4, 3))
        target = rng.integers(0, 3, size=(4, 4))
        _, analytic = losses.cross_entropy(pred, target)
        numeric = oracles.finite_difference(lambda p: losses.cross_entropy(p, target)[0], pred)
        assert oracles.gradient_error(analytic, numeric) < GRADIENT_TOLERANCE

    @settings(max_examples=50, deadline=None)
    @given(seeds, st.integers(2, 5))
    def test_never_negative(self, seed, classes):
        rng = np.random.default_rng(seed)
        target = rng.integers(0, classes, size=(5, 6))
        for pred in (_softmax_field(rng, (5, 6, classes)), rng.uniform(0.0, 1.0, size=(5, 6, classes))):
            loss, _ = losses.cross_entropy(pred, target)
            assert loss >= 0.0

    def test_target_class_out_of_range(self):
        """Target ids must have a channel"""
        with pytest.raises(DimensionMismatch):
            losses.cross_entropy(np.full((2, 2, 2), 0.5), np.full((2, 2), 2))


class TestDiceLoss:
    """Soft Dice over every class"""

    def test_perfect_prediction(self):
        target = np.array([[0, 1], [2, 1]])
        loss, _ = losses.dice_loss(losses.one_hot(target, 3), target)
        assert loss == pytest.approx(0.0, abs=1e-9)

    def test_half_coverage(self):
        """Binary target covering half, prediction 0.5 everywhere: D = 0.5"""
        target = np.zeros((4, 4), dtype=int)
        target[:2] = 1
        loss, _ = losses.dice_loss(np.full((4, 4, 2), 0.5), target)
        assert loss == pytest.approx(0.5, abs=1e-6)

    @settings(max_examples=50, deadline=None)
    @given(seeds, st.integers(2, 5))
    def test_bounded(self, seed, classes):
        """Dice loss stays in [0, 1] for any probabilities"""
        rng = np.random.default_rng(seed)
        target = rng.integers(0, classes, size=(5, 6))
        for pred in (_softmax_field(rng, (5, 6, classes)), rng.uniform(0.0, 1.0, size=(5, 6, classes)),
                     losses.one_hot(target, classes), np.zeros((5, 6, classes))):
            loss, _ = losses.dice_loss(pred, target)
            assert -1e-9 <= loss <= 1.0 + 1e-9

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(100 + seed)
        pred = _softmax_field(rng, (4, 4, 3))
        target = rng.integers(0, 3, size=(4, 4))
        _, analytic = losses.dice_loss(pred, target)
        numeric = oracles.finite_difference(lambda p: losses.dice_loss(p, target)[0], pred)
        assert oracles.gradient_error(analytic, numeric) < GRADIENT_TOLERANCE


class TestMSE:
    """Structure / position regression"""

    def test_values(self):
        """Identical fields give 0, a unit offset gives 1"""
        target = np.random.default_rng(0).normal(size=(3, 3, 1))
        assert losses.mse(target, target)[0] == 0.0
        assert losses.mse(target + 1.0, target)[0] == pytest.approx(1.0)

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(3, 4, 2)), rng.normal(size=(3, 4, 2))
        assert losses.mse(a, b)[0] == losses.mse(b, a)[0]

    def test_gradient(self):
        rng = np.random.default_rng(2)
        pred, target = rng.normal(size=(4, 4, 1)), rng.normal(size=(4, 4, 1))
        _, analytic = losses.mse(pred, target)
        numeric = oracles.finite_difference(lambda p: losses.mse(p, target)[0], pred)
        assert oracles.gradient_error(analytic, numeric) < GRADIENT_TOLERANCE

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            losses.mse(np.zeros((2, 2, 1)), np.zeros((2, 2, 2)))


class TestAggregates:
    """Multi-scale sums and the weighted total"""

    def _targets(self):
        rng = np.random.default_rng(5)
        return {b: rng.integers(0, 3, size=(2 ** b, 2 ** b)) for b in (2, 3, 4)}

    def test_semantic_perfect(self):
        targets = self._targets()
        preds = {b: losses.one_hot(t, 3) for b, t in targets.items()}
        assert losses.semantic_loss(preds, targets) == pytest.approx(0.0, abs=1e-9)

    def test_semantic_additive_over_scales(self):
        """One perfect scale, two uniform: 2·(ln 3 + Dice loss of uniform)"""
        targets = self._targets()
        preds = {2: losses.one_hot(targets[2], 3), 3: _uniform((8, 8)), 4: _uniform((16, 16))}
        d3, _ = losses.dice_loss(preds[3], targets[3])
        d4, _ = losses.dice_loss(preds[4], targets[4])
        expected = 2 * np.log(3) + d3 + d4
        assert losses.semantic_loss(preds, targets) == pytest.approx(expected)

    def test_structure_offsets(self):
        """A unit offset at each of three scales sums to 3"""
        targets = {b: np.zeros((2 ** b, 2 ** b, 1)) for b in (2, 3, 4)}
        preds = {b: t + 1.0 for b, t in targets.items()}
        assert losses.structure_loss(preds, targets) == pytest.approx(3.0)
        assert losses.structure_loss(targets, targets) == 0.0

    def test_missing_scale(self):
        """Every configured block needs a prediction and a target"""
        targets = {b: np.zeros((4, 4, 1)) for b in (2, 3, 4)}
        with pytest.raises(MissingScale):
            losses.structure_loss({2: targets[2], 4: targets[4]}, targets)
        with pytest.raises(MissingScale):
            losses.structure_loss(targets, {2: targets[2]})

    def test_configured_blocks_only(self):
        """Extra blocks are ignored; only cfg.scale_blocks count"""
        targets = {b: np.zeros((4, 4, 1)) for b in (1, 4)}
        preds = {1: targets[1] + 5.0, 4: targets[4] + 1.0}
        assert losses.structure_loss(preds, targets, LossConfig(scale_blocks=(4,))) == pytest.approx(1.0)

    def test_position_loss(self):
        """Both branches regress the same target"""
        target = np.random.default_rng(9).normal(size=(4, 4, 1))
        assert losses.position_loss(target, target, target) == 0.0
        assert losses.position_loss(target, target + 1.0, target) == pytest.approx(1.0)

    def test_total_loss(self):
        """L = L_sem + λ1·L_str + λ2·L_pos"""
        assert losses.total_loss(1.0, 2.0, 3.0) == 6.0
        assert losses.total_loss(4.0, 0.0, 0.0) == 4.0
        assert losses.total_loss(1.0, 2.0, 3.0, LossConfig(lambda1=0.5, lambda2=2.0)) == 8.0


class TestScaleTargets:
    """Downsampled supervision per decoder block"""

    def test_shapes_and_full_resolution(self):
        """Block k is downsampled by 2^(4-k); block 4 is the full target"""
        labels = fixture_set(count=1, height=32, width=32, radius_max=6)[0]
        semantic, structure = losses.build_scale_targets(labels)
        assert sorted(semantic) == [2, 3, 4]
        assert semantic[2].shape == (8, 8) and structure[2].shape == (8, 8, 1)
        assert semantic[3].shape == (16, 16)
        np.testing.assert_array_equal(semantic[4], semantic_from_labels(labels))
        np.testing.assert_array_equal(structure[4], structure_encoding(labels))

    def test_targets_feed_the_losses(self):
        """Targets scored against themselves cost nothing"""
        labels = fixture_set(count=1, height=32, width=32, radius_max=6)[0]
        semantic, structure = losses.build_scale_targets(labels)
        preds = {b: losses.one_hot(t, 3) for b, t in semantic.items()}
        assert losses.semantic_loss(preds, semantic) == pytest.approx(0.0, abs=1e-9)
        assert losses.structure_loss(structure, structure) == 0.0

    def test_unknown_block(self):
        with pytest.raises(MissingScale):
            losses.build_scale_targets(np.zeros((16, 16), dtype=int), blocks=(5,))

    def test_indivisible_grid(self):
        with pytest.raises(DimensionMismatch):
            losses.build_scale_targets(np.zeros((10, 10), dtype=int))

    def test_scale_factor(self):
        assert [losses.scale_factor(b) for b in (1, 2, 3, 4)] == [8, 4, 2, 1]
