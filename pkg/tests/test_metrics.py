import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from cover.errors import EmptyInput, NonFinite
from cover.metrics import ScoredSplit, auroc, calibrate_threshold, detect, evaluate, fpr_at_tpr

score_lists = st.lists(
    st.floats(min_value=-100.0, max_value=100.0, allow_nan=False), min_size=1, max_size=60
)


class TestCalibrate:
    def test_twenty_value_grid(self):
        scores = [round(0.05 * k, 2) for k in range(1, 21)]
        assert calibrate_threshold(scores, 0.95) == 0.10

    def test_constant_scores(self):
        for target in (0.01, 0.5, 0.99):
            assert calibrate_threshold([3.0] * 7, target) == 3.0

    def test_half_target(self):
        assert calibrate_threshold([1.0, 2.0, 3.0, 4.0], 0.5) == 3.0

    def test_fraction_product_rounding(self):
        # 0.7 * 20 = 14.000000000000002 in floats; a naive ceil of the
        # product admits one sample too few.  14/20 >= 0.7 must hold.
        scores = list(range(1, 21))
        assert calibrate_threshold(scores, 0.7) == 7

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            calibrate_threshold([], 0.95)

    def test_rejects_nonfinite(self):
        with pytest.raises(NonFinite):
            calibrate_threshold([0.1, float("nan")], 0.95)

    @given(score_lists, st.floats(min_value=0.01, max_value=0.99))
    def test_matches_exhaustive_sweep(self, scores, target):
        got = calibrate_threshold(scores, target)
        assert got == oracles.calibrate_sweep(scores, target)

    @given(score_lists, st.floats(min_value=0.01, max_value=0.99))
    def test_threshold_admits_target_fraction(self, scores, target):
        t = calibrate_threshold(scores, target)
        frac = sum(1 for v in scores if v >= t) / len(scores)
        assert frac >= target
        assert t in [float(v) for v in scores]


class TestDetect:
    def test_above(self):
        assert detect(0.9, 0.5) == "id"

    def test_boundary_inclusive(self):
        assert detect(0.5, 0.5) == "id"

    def test_below(self):
        assert detect(0.49, 0.5) == "ood"


class TestFpr:
    def test_perfect_separation(self):
        split = ScoredSplit(id_scores=[1.0] * 10, ood_scores=[0.0] * 10)
        assert fpr_at_tpr(split, 0.95) == 0.0

    def test_identical_distributions(self):
        gen = np.random.default_rng(3)
        scores = gen.normal(size=10**6)
        split = ScoredSplit(id_scores=scores, ood_scores=scores)
        assert fpr_at_tpr(split, 0.95) == pytest.approx(0.95, abs=0.01)

    def test_dominating_ood(self):
        split = ScoredSplit(id_scores=[0.1, 0.2, 0.3], ood_scores=[0.3, 0.5, 0.9])
        assert fpr_at_tpr(split, 0.95) == 1.0

    def test_threshold_agrees_with_direct_count(self):
        gen = np.random.default_rng(5)
        split = ScoredSplit(id_scores=gen.normal(1, 1, 300), ood_scores=gen.normal(0, 1, 400))
        t = calibrate_threshold(split.id_scores, 0.95)
        assert fpr_at_tpr(split, 0.95) == oracles.fpr_direct(split.ood_scores, t)


class TestAuroc:
    def test_perfect(self):
        assert auroc(ScoredSplit(id_scores=[0.9, 0.8], ood_scores=[0.7, 0.6])) == 1.0

    def test_three_quarters(self):
        assert auroc(ScoredSplit(id_scores=[0.9, 0.6], ood_scores=[0.7, 0.5])) == 0.75

    def test_single_tie(self):
        assert auroc(ScoredSplit(id_scores=[0.5], ood_scores=[0.5])) == 0.5

    def test_all_ties(self):
        assert auroc(ScoredSplit(id_scores=[2.0] * 9, ood_scores=[2.0] * 13)) == 0.5

    @given(
        st.lists(st.floats(min_value=-50, max_value=50, allow_nan=False), min_size=1, max_size=40),
        st.lists(st.floats(min_value=-50, max_value=50, allow_nan=False), min_size=1, max_size=40),
    )
    def test_matches_pairwise_oracle(self, ids, oods):
        split = ScoredSplit(id_scores=ids, ood_scores=oods)
        assert auroc(split) == pytest.approx(oracles.auroc_pairwise(ids, oods), abs=1e-12)

    def test_matches_trapezoid_on_random_sets(self):
        gen = np.random.default_rng(9)
        for _ in range(25):
            ids = gen.normal(0.6, 0.3, int(gen.integers(5, 200)))
            oods = gen.normal(0.0, 0.5, int(gen.integers(5, 200)))
            split = ScoredSplit(id_scores=ids, ood_scores=oods)
            want = oracles.auroc_trapezoid(ids, oods)
            assert auroc(split) == pytest.approx(want, abs=1e-9)

    def test_complement_under_negation(self):
        gen = np.random.default_rng(13)
        ids = gen.normal(1, 1, 50)
        oods = gen.normal(0, 1, 60)
        a = auroc(ScoredSplit(id_scores=ids, ood_scores=oods))
        neg = auroc(ScoredSplit(id_scores=-ids, ood_scores=-oods))
        swap = auroc(ScoredSplit(id_scores=oods, ood_scores=ids))
        assert neg == pytest.approx(1.0 - a, abs=1e-12)
        assert swap == pytest.approx(1.0 - a, abs=1e-12)

    # Inputs are quantized to 1e-3 so the transforms stay injective in
    # float arithmetic; otherwise near-equal scores could collide and
    # introduce ties the originals lack.
    quantized = st.lists(
        st.floats(min_value=-20, max_value=20, allow_nan=False).map(lambda v: round(v, 3)),
        min_size=1,
        max_size=30,
    )

    @given(quantized, quantized, st.sampled_from(["affine", "exp", "atan", "cube"]))
    def test_monotone_transform_invariance(self, ids, oods, name):
        fn = {
            "affine": lambda v: 3.0 * v + 1.0,
            "exp": lambda v: math.exp(v / 10.0),
            "atan": math.atan,
            "cube": lambda v: v + v ** 3,
        }[name]
        before = ScoredSplit(id_scores=ids, ood_scores=oods)
        after = ScoredSplit(id_scores=[fn(v) for v in ids], ood_scores=[fn(v) for v in oods])
        assert auroc(after) == pytest.approx(auroc(before), abs=1e-12)
        assert fpr_at_tpr(after, 0.9) == pytest.approx(fpr_at_tpr(before, 0.9), abs=1e-12)

    def test_empty_split_rejected(self):
        with pytest.raises(EmptyInput):
            auroc(ScoredSplit(id_scores=[], ood_scores=[1.0]))
        with pytest.raises(EmptyInput):
            auroc(ScoredSplit(id_scores=[1.0], ood_scores=[]))


class TestEvaluate:
    def test_bundle_consistency(self):
        gen = np.random.default_rng(17)
        split = ScoredSplit(id_scores=gen.normal(1, 1, 500), ood_scores=gen.normal(0, 1, 500))
        res = evaluate(split, 0.95)
        assert res.auroc == auroc(split)
        assert res.fpr_at_tpr == fpr_at_tpr(split, 0.95)
        assert res.threshold == calibrate_threshold(split.id_scores, 0.95)
        assert res.tpr_target == 0.95
        assert set(res.to_dict()) == {"auroc", "fpr_at_tpr", "threshold", "tpr_target"}

    def test_result_ranges(self):
        gen = np.random.default_rng(19)
        for _ in range(20):
            split = ScoredSplit(
                id_scores=gen.normal(size=int(gen.integers(1, 50))),
                ood_scores=gen.normal(size=int(gen.integers(1, 50))),
            )
            res = evaluate(split)
            assert 0.0 <= res.auroc <= 1.0
            assert 0.0 <= res.fpr_at_tpr <= 1.0
