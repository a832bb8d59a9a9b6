import numpy as np
import pytest

from logofuse.metrics import (
    MetricInputError,
    RankEvaluation,
    binary_accuracy,
    degenerate_sample_counts,
    lrap,
    lrl,
    nar,
)
from oracles import brute_lrap, brute_lrl, mean_reciprocal_rank


class TestLrap:
    def test_top_ranked_single_true_label(self):
        assert lrap([[1, 0, 0]], [[0.9, 0.5, 0.1]]) == 1.0

    def test_interleaved_example(self):
        # label 0 (score .5): labels >= .5 are {0,.9}; true among them {0} -> 1/2
        # label 2 (score .1): all three >= .1; true among them {0,2}  -> 2/3
        assert lrap([[1, 0, 1]], [[0.5, 0.9, 0.1]]) == pytest.approx(7 / 12, abs=1e-12)

    def test_equals_mrr_for_single_label_rows(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            n, l = rng.integers(2, 7), rng.integers(2, 6)
            y = np.zeros((n, l), dtype=int)
            y[np.arange(n), rng.integers(0, l, size=n)] = 1
            f = rng.normal(size=(n, l))
            assert lrap(y, f) == pytest.approx(mean_reciprocal_rank(y.tolist(), f.tolist()), abs=1e-12)

    def test_skips_empty_rows(self):
        value = lrap([[1, 0], [0, 0]], [[0.9, 0.1], [0.5, 0.5]])
        assert value == 1.0

    def test_all_zero_truth_rejected(self):
        with pytest.raises(MetricInputError):
            lrap([[0, 0]], [[0.1, 0.2]])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(MetricInputError):
            lrap([[1, 0]], [[0.1, 0.2, 0.3]])

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(101)
        for _ in range(300):
            n, l = rng.integers(1, 9), rng.integers(2, 7)
            y = (rng.random((n, l)) < 0.5).astype(int)
            if not y.any():
                y[0, 0] = 1
            f = np.round(rng.normal(size=(n, l)), 2)  # rounding provokes ties
            assert lrap(y, f) == pytest.approx(brute_lrap(y.tolist(), f.tolist()), abs=1e-12)


class TestLrl:
    def test_fully_inverted_example(self):
        assert lrl([[1, 0, 1]], [[0.5, 0.9, 0.1]]) == 1.0

    def test_perfect_separation_is_zero(self):
        assert lrl([[1, 1, 0]], [[0.9, 0.8, 0.1]]) == 0.0

    def test_tie_counts_as_inverted(self):
        assert lrl([[1, 0]], [[0.5, 0.5]]) == 1.0

    def test_skips_degenerate_rows(self):
        assert lrl([[1, 1], [1, 0]], [[0.5, 0.5], [0.9, 0.1]]) == 0.0

    def test_all_degenerate_rejected(self):
        with pytest.raises(MetricInputError):
            lrl([[1, 1], [0, 0]], [[0.5, 0.5], [0.5, 0.5]])

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(202)
        for _ in range(300):
            n, l = rng.integers(1, 9), rng.integers(2, 7)
            y = (rng.random((n, l)) < 0.5).astype(int)
            y[0] = [1] + [0] * (l - 1)  # keep at least one usable row
            f = np.round(rng.normal(size=(n, l)), 2)
            assert lrl(y, f) == pytest.approx(brute_lrl(y.tolist(), f.tolist()), abs=1e-12)


class TestRankMetricProperties:
    def test_score_scale_invariance(self):
        rng = np.random.default_rng(3)
        y = (rng.random((6, 5)) < 0.4).astype(int)
        y[0, 0] = 1
        y[1] = [1, 0, 0, 0, 0]
        f = rng.normal(size=(6, 5))
        for transform in (lambda x: 3 * x + 2, np.tanh, lambda x: np.exp(x / 4)):
            assert lrap(y, transform(f)) == pytest.approx(lrap(y, f), abs=1e-12)
            assert lrl(y, transform(f)) == pytest.approx(lrl(y, f), abs=1e-12)

    def test_monotonic_degradation_on_pair_swap(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            l = 6
            y = np.zeros((1, l), dtype=int)
            y[0, rng.choice(l, size=2, replace=False)] = 1
            f = rng.permutation(np.linspace(0.1, 1.0, l)).reshape(1, l)
            true_idx = np.nonzero(y[0])[0]
            false_idx = np.nonzero(1 - y[0])[0]
            ordered = [
                (t, fl) for t in true_idx for fl in false_idx if f[0, t] > f[0, fl]
            ]
            if not ordered:
                continue
            t, fl = ordered[rng.integers(len(ordered))]
            swapped = f.copy()
            swapped[0, t], swapped[0, fl] = f[0, fl], f[0, t]
            assert lrap(y, swapped) <= lrap(y, f) + 1e-12
            assert lrl(y, swapped) >= lrl(y, f) - 1e-12


class TestNar:
    def test_perfect_retrieval_is_zero(self):
        ev = RankEvaluation(corpus_size=100, ranks=tuple(range(1, 11)))
        assert nar(ev) == 0.0

    def test_bottom_ranks_closed_form(self):
        n, n_rel = 50, 7
        ev = RankEvaluation(corpus_size=n, ranks=tuple(range(n - n_rel + 1, n + 1)))
        assert nar(ev) == pytest.approx((n - n_rel) / n, abs=1e-12)

    def test_random_ranks_near_half(self):
        rng = np.random.default_rng(5)
        n, n_rel = 10_000, 10
        values = []
        for _ in range(200):
            ranks = rng.choice(np.arange(1, n + 1), size=n_rel, replace=False)
            values.append(nar(RankEvaluation(n, tuple(ranks))))
        assert np.mean(values) == pytest.approx(0.5, abs=0.02)

    def test_validation(self):
        with pytest.raises(MetricInputError):
            RankEvaluation(corpus_size=5, ranks=())
        with pytest.raises(MetricInputError):
            RankEvaluation(corpus_size=5, ranks=(1, 1))
        with pytest.raises(MetricInputError):
            RankEvaluation(corpus_size=5, ranks=(0, 2))
        with pytest.raises(MetricInputError):
            RankEvaluation(corpus_size=5, ranks=(6,))


class TestBinaryAccuracy:
    def test_identical(self):
        assert binary_accuracy([True, False, True], [True, False, True]) == 1.0

    def test_complementary(self):
        assert binary_accuracy([True, False], [False, True]) == 0.0

    def test_three_of_four(self):
        assert binary_accuracy([1, 1, 0, 0], [1, 1, 0, 1]) == 0.75

    def test_length_mismatch(self):
        with pytest.raises(MetricInputError):
            binary_accuracy([True], [True, False])


def test_degenerate_counts_helper():
    y = [[0, 0], [1, 1], [1, 0]]
    assert degenerate_sample_counts(y) == {"lrap_skipped": 1, "lrl_skipped": 2}
