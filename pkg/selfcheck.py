#!/usr/bin/env python3
"""
NucleiGrind Self-check
Runs the acceptance suites against brute-force oracles on built-in seeds.

Usage: python selfcheck.py [--seeds N]
       python main.py selfcheck [--seeds N]
"""
import logging
import sys
import time

import numpy as np

from content.fixtures import (
    aji_construction,
    disk,
    fixture_set,
    nonsymmetric_fixtures,
    random_label_map,
)
from content.models import CheckResult, Encoder, EncodingConfig, LossConfig, PostprocConfig
from engine import losses, metrics, network, oracles
from engine.encodings import position_encoding, structure_distances, structure_encoding
from engine.grid import contour_mask, semantic_from_labels
from engine.invariance import ALL_TRANSFORMS, NONTRIVIAL_TRANSFORMS, equivariance_error, relation_check
from engine.postproc import contour_from_structure, run_pipeline

logger = logging.getLogger(__name__)

DEFAULT_SEEDS = 100
ORACLE_TOLERANCE = 1e-9
GRADIENT_TOLERANCE = 1e-4
STOCHASTIC_TOLERANCE = 1e-6


# ═══════════════════════════════════════════════════════════
#  SUITES
# ═══════════════════════════════════════════════════════════
# Each suite returns (passed, detail).

def check_encoding_oracle(seeds, corrupt=False):
    rng = np.random.default_rng(1000)
    worst = 0.0
    pending_corruption = corrupt
    for index in range(2 * seeds):
        labels = random_label_map(rng, 64, 64, max_instances=20)
        fast = structure_distances(labels)
        slow = oracles.brute_structure_distances(labels)
        if fast is None or slow is None:
            if (fast is None) != (slow is None):
                return False, f"map {index}: instance detection differs"
            continue
        if pending_corruption:
            fast = fast.copy()
            fast.flat[fast.size // 2] += 1.0
            pending_corruption = False
        worst = max(worst, float(np.abs(fast - slow).max()))
        worst = max(worst, float(np.abs(position_encoding(labels) - oracles.brute_position_encoding(labels)).max()))
    return worst <= ORACLE_TOLERANCE, f"{2 * seeds} maps, max deviation {worst:.2e}"


def check_equivariance(seeds):
    fixtures = fixture_set(count=max(3, seeds // 10)) + nonsymmetric_fixtures()
    for labels in fixtures:
        for t in ALL_TRANSFORMS:
            for encoder in (Encoder.SE, Encoder.POS):
                error = equivariance_error(encoder, labels, t).max_abs_error
                if error != 0.0:
                    return False, f"{encoder.value} under {t.value}: error {error:.3e}"
    hv_worst = max(
        equivariance_error(Encoder.HV, labels, t).max_abs_error
        for labels in nonsymmetric_fixtures() for t in NONTRIVIAL_TRANSFORMS
    )
    if hv_worst <= 0.1:
        return False, f"HV looked equivariant (max error {hv_worst:.3f})"
    return True, f"SE/pos exact on {len(fixtures)} maps; HV max error {hv_worst:.3f}"


def check_round_trip(seeds):
    fixtures = fixture_set(count=seeds, height=64, width=64, radius_max=8, seed=2000)
    for index, labels in enumerate(fixtures):
        result = run_pipeline(semantic_from_labels(labels), structure_encoding(labels))
        aji = metrics.aji_score(result, labels)
        if aji != 1.0:
            return False, f"fixture {index}: AJI {aji:.6f}"
    return True, f"{len(fixtures)}/{len(fixtures)} fixtures AJI = 1.0"


def check_band_recovery(seeds):
    cfg = EncodingConfig(background_norm_cap=16.0)
    fixtures = fixture_set(count=seeds, height=48, width=48, radius_max=8, seed=3000)
    for index, labels in enumerate(fixtures):
        band = contour_from_structure(structure_encoding(labels, cfg), PostprocConfig())
        if not np.array_equal(band, contour_mask(labels)):
            return False, f"fixture {index}: band differs from the contour set"
    return True, f"{len(fixtures)} fixtures at t_p=0.05, t_n=-0.05"


def _random_prob_field(rng, shape=(4, 4, 3)):
    logits = rng.normal(size=shape)
    weights = np.exp(logits - logits.max(axis=2, keepdims=True))
    return weights / weights.sum(axis=2, keepdims=True)


def check_gradients(seeds):
    cfg = LossConfig()
    worst = 0.0
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        pred = _random_prob_field(rng)
        target = rng.integers(0, 3, size=(4, 4))
        for loss_fn in (losses.cross_entropy, losses.dice_loss):
            _, analytic = loss_fn(pred, target, cfg)
            numeric = oracles.finite_difference(lambda p: loss_fn(p, target, cfg)[0], pred)
            worst = max(worst, oracles.gradient_error(analytic, numeric))
        field, goal = rng.normal(size=(4, 4, 1)), rng.normal(size=(4, 4, 1))
        _, analytic = losses.mse(field, goal)
        numeric = oracles.finite_difference(lambda p: losses.mse(p, goal)[0], field)
        worst = max(worst, oracles.gradient_error(analytic, numeric))
    return worst < GRADIENT_TOLERANCE, f"{seeds} seeds x 3 losses, worst relative error {worst:.2e}"


def check_attention(seeds):
    rng = np.random.default_rng(4000)
    for _ in range(max(1, seeds // 10)):
        q, k = rng.normal(size=(5, 6, 4)), rng.normal(size=(5, 6, 4))
        for attention in (network.full_attention(q, k), network.criss_cross_attention(q, k)):
            if (attention.weights < 0).any() or np.abs(attention.weights.sum(axis=1) - 1).max() > STOCHASTIC_TOLERANCE:
                return False, f"{attention.form.value} attention is not row-stochastic"

    q, k = rng.normal(size=(4, 5, 3)), rng.normal(size=(4, 5, 3))
    hot_a, hot_b = np.zeros((4, 5, 1)), np.zeros((4, 5, 1))
    hot_a[1, 2, 0], hot_b[1, 2, 0] = 1.0, 2.0
    one_a = network.criss_cross_pass(q, k, hot_a)
    one_b = network.criss_cross_pass(q, k, hot_b)
    cross = np.zeros((4, 5), dtype=bool)
    cross[1, :] = True
    cross[:, 2] = True
    if not np.array_equal(one_a[~cross], one_b[~cross]):
        return False, "one pass reached positions off the cross"
    two_a, _ = network.sga_criss_cross(q, k, hot_a, hot_a, passes=2)
    two_b, _ = network.sga_criss_cross(q, k, hot_b, hot_b, passes=2)
    if not (two_a != two_b).all():
        return False, "two passes did not reach every position"

    for shape in ((1, 7), (7, 1)):
        q, k, v = (rng.normal(size=shape + (3,)) for _ in range(3))
        _, full, _ = network.sga_full(q, k, v, v)
        if not np.array_equal(full, network.criss_cross_pass(q, k, v)):
            return False, f"full and criss-cross differ on a {shape[0]}x{shape[1]} grid"
    return True, "row-stochastic, two-pass reach, 1xN agreement"


def check_metrics_oracle(seeds):
    rng = np.random.default_rng(5000)
    for index in range(seeds):
        size = int(rng.integers(8, 65))
        pred = random_label_map(rng, size, size, max_instances=20)
        gt = random_label_map(rng, size, size, max_instances=20)
        pairs = (
            ("dice", metrics.dice_score(pred, gt), oracles.naive_dice(pred, gt)),
            ("aji", metrics.aji_score(pred, gt), oracles.naive_aji(pred, gt)),
            ("pq", metrics.pq_score(pred, gt)[0], oracles.naive_pq(pred, gt)),
        )
        for name, fast, slow in pairs:
            if abs(fast - slow) > 1e-12:
                return False, f"pair {index}: {name} {fast!r} vs oracle {slow!r}"

    gt = np.zeros((5, 5), dtype=np.int64)
    gt[1:4, 1:4] = 1
    pred = gt.copy()
    pred[3, :] = 0
    if abs(metrics.dice_score(pred, gt) - 0.8) > 1e-12:
        return False, "Dice 0.8 construction"
    aji_pred, aji_gt = aji_construction()
    if abs(metrics.aji_score(aji_pred, aji_gt) - 0.4) > 1e-12:
        return False, "AJI 0.4 construction"
    pq_gt = np.zeros((5, 5), dtype=np.int64)
    pq_gt[0:4, 0:5] = 1
    pq_pred = np.zeros_like(pq_gt)
    pq_pred[0:4, 0:4] = 1
    if abs(metrics.pq_score(pq_pred, pq_gt)[0] - 0.8) > 1e-12:
        return False, "PQ 0.8 construction"
    return True, f"{seeds} random pairs + hand-derived cases"


def check_relation(seeds):
    report = relation_check(disk(radius=8))
    ok = report.corr_h >= 0.9 and report.corr_v >= 0.9 and report.dir_agreement >= 0.85
    detail = f"corr_h {report.corr_h:.3f}, corr_v {report.corr_v:.3f}, Dir agreement {report.dir_agreement:.1%}"
    return ok, detail


SUITES = [
    ("Encoding oracle", check_encoding_oracle),
    ("Equivariance", check_equivariance),
    ("Round trip", check_round_trip),
    ("Band recovery", check_band_recovery),
    ("Loss gradients", check_gradients),
    ("Attention invariants", check_attention),
    ("Metrics oracle", check_metrics_oracle),
    ("Encoding relations", check_relation),
]


# ═══════════════════════════════════════════════════════════
#  RUNNER
# ═══════════════════════════════════════════════════════════

def run_suites(seeds=DEFAULT_SEEDS, corrupt_distances=False):
    """Run every suite; a suite that raises counts as failed."""
    results = []
    for name, suite in SUITES:
        started = time.perf_counter()
        try:
            if suite is check_encoding_oracle:
                passed, detail = suite(seeds, corrupt=corrupt_distances)
            else:
                passed, detail = suite(seeds)
        except Exception as e:
            logger.exception("Suite %s crashed", name)
            passed, detail = False, f"crashed: {e}"
        results.append(CheckResult(name, passed, detail, time.perf_counter() - started))
        logger.info("[%d/%d] %s: %s", len(results), len(SUITES), name, "PASS" if passed else "FAIL")
    return results


def main(seeds=DEFAULT_SEEDS, corrupt_distances=False):
    import ui

    results = run_suites(seeds, corrupt_distances)
    ui.show_selfcheck(results)
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    seeds = DEFAULT_SEEDS
    if "--seeds" in sys.argv:
        seeds = int(sys.argv[sys.argv.index("--seeds") + 1])
    sys.exit(main(seeds))
