import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from skewmix import ari, confusion_rates

from .oracles import ari_pair_counting


class TestAri:
    def test_identical_labelings(self):
        assert ari([0, 0, 1, 1, 2], [0, 0, 1, 1, 2]) == 1.0

    def test_hand_contingency_value(self):
        assert ari([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(-0.5)

    def test_label_names_do_not_matter(self):
        a = [0, 0, 1, 1, 2, 2]
        b = [5, 5, 9, 9, 7, 7]
        assert ari(a, b) == 1.0

    def test_symmetry_and_bruteforce_agreement(self, rng):
        for _ in range(20):
            n = int(rng.integers(5, 30))
            a = rng.integers(0, 4, size=n)
            b = rng.integers(0, 3, size=n)
            val = ari(a, b)
            assert val == pytest.approx(ari(b, a), abs=1e-12)
            assert val == pytest.approx(ari_pair_counting(a, b), abs=1e-12)

    @given(st.lists(st.integers(0, 3), min_size=2, max_size=25))
    def test_self_agreement_is_one(self, labels):
        assert ari(labels, labels) == pytest.approx(1.0)

    @given(st.permutations(range(4)), st.lists(st.integers(0, 3), min_size=4, max_size=25))
    def test_invariant_to_permuting_label_names(self, perm, labels):
        other = [(v * 7 + 1) % 5 for v in labels]  # arbitrary second labeling
        renamed = [perm[v] for v in labels]
        assert ari(labels, other) == pytest.approx(ari(renamed, other), abs=1e-12)

    def test_independent_labelings_average_near_zero(self, rng):
        vals = []
        for _ in range(100):
            a = rng.integers(0, 3, size=1000)
            b = rng.integers(0, 3, size=1000)
            vals.append(ari(a, b))
        assert abs(np.mean(vals)) < 0.02

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ari([1, 2], [1, 2, 3])


class TestConfusionRates:
    def test_perfect_flags(self):
        acc, tpr, fpr = confusion_rates([True, False, True], [True, False, True])
        assert (acc, tpr, fpr) == (1.0, 1.0, 0.0)

    def test_all_good_prediction(self):
        true = [True] * 10 + [False] * 90
        acc, tpr, fpr = confusion_rates([False] * 100, true)
        assert acc == pytest.approx(0.9)
        assert tpr == 0.0
        assert fpr == 0.0

    def test_no_true_outliers_reports_absent_tpr(self):
        acc, tpr, fpr = confusion_rates([False, True], [False, False])
        assert tpr is None
        assert fpr == pytest.approx(0.5)

    def test_random_flags_match_binomial_rate(self, rng):
        q = 0.2
        n = 20_000
        true = np.zeros(n, dtype=bool)
        true[:2000] = True
        pred = rng.random(n) < q
        _, _, fpr = confusion_rates(pred, true)
        se = np.sqrt(q * (1 - q) / 18_000)
        assert abs(fpr - q) < 3 * se
