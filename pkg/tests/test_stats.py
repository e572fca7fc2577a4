"""Welch's t machinery against hand values and a reference implementation."""

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from novscore import DataError, SampleSummary, student_t_sf, summarize, welch_t


class TestSummarize:
    def test_hand_values(self):
        s = summarize([1, 2, 3, 4, 5])
        assert s.n == 5
        assert s.mean == 3.0
        assert s.variance == 2.5

    def test_single_observation(self):
        s = summarize([5.0])
        assert (s.n, s.mean, s.variance) == (1, 5.0, 0.0)

    def test_constant_list_has_zero_variance(self):
        s = summarize([2.5] * 40)
        assert s.variance == 0.0

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            summarize([])

    def test_matches_reference_on_random_data(self):
        rng = random.Random(4)
        for _ in range(50):
            xs = [rng.gauss(0, 3) for _ in range(rng.randint(2, 60))]
            s = summarize(xs)
            assert math.isclose(s.mean, sum(xs) / len(xs), rel_tol=1e-12)
            ref_var = sps.tvar(xs)
            assert math.isclose(s.variance, ref_var, rel_tol=1e-9)


class TestStudentTSf:
    def test_symmetry_at_zero(self):
        for df in (0.5, 1, 7, 36.5, 200):
            assert student_t_sf(0.0, df) == 0.5

    def test_reported_p_values(self):
        # Independent oracle: scipy.stats.t.sf(2.9, 36.5) and (2.6, 66.3).
        assert abs(student_t_sf(2.9, 36.5) - 0.003141929863254931) < 1e-6
        assert abs(student_t_sf(2.6, 66.3) - 0.00574092525429945) < 1e-6

    def test_tail_identity(self):
        rng = random.Random(9)
        for _ in range(200):
            t = rng.uniform(-8, 8)
            df = rng.uniform(0.5, 300)
            assert abs(student_t_sf(t, df) + student_t_sf(-t, df) - 1.0) < 1e-12

    def test_strictly_decreasing_in_t(self):
        for df in (1.5, 10, 66.3):
            values = [student_t_sf(t, df) for t in [x * 0.25 for x in range(-30, 31)]]
            assert all(a > b for a, b in zip(values, values[1:]))

    def test_oracle_agreement_on_1000_random_pairs(self):
        rng = random.Random(123)
        for _ in range(1000):
            t = rng.uniform(-12, 12)
            df = rng.uniform(0.2, 500)
            mine = student_t_sf(t, df)
            ref = sps.t.sf(t, df)
            assert abs(mine - ref) < 1e-6, (t, df, mine, ref)

    def test_df_must_be_positive(self):
        with pytest.raises(DataError):
            student_t_sf(1.0, 0.0)
        with pytest.raises(DataError):
            student_t_sf(1.0, -3)


class TestWelch:
    def test_identical_groups(self):
        s = summarize([1.0, 2.0, 3.0])
        r = welch_t(s, s)
        assert r.t == 0.0
        assert r.p_one_tailed == 0.5

    def test_frozen_equal_variance_example(self):
        # Hand formula: t = 1/sqrt(0.2), df = 18; p frozen from scipy.
        a = SampleSummary(n=10, mean=5.0, variance=1.0)
        b = SampleSummary(n=10, mean=4.0, variance=1.0)
        r = welch_t(a, b, alternative="greater")
        assert math.isclose(r.t, 2.23606797749979, rel_tol=1e-12)
        assert math.isclose(r.df, 18.0, rel_tol=1e-12)
        assert abs(r.p_one_tailed - 0.019124807258056927) < 1e-6

    def test_frozen_unequal_variance_example(self):
        # Welch-Satterthwaite by hand: sa=0.5, sb=1/12,
        # df = (sa+sb)^2 / (sa^2/7 + sb^2/11) = 9.3622828...
        a = SampleSummary(n=8, mean=10.0, variance=4.0)
        b = SampleSummary(n=12, mean=9.0, variance=1.0)
        r = welch_t(a, b)
        assert math.isclose(r.t, 1.3093073414159542, rel_tol=1e-12)
        assert math.isclose(r.df, 9.362282878411914, rel_tol=1e-12)
        assert abs(r.p_one_tailed - 0.1108251887038046) < 1e-6

    def test_antisymmetry(self):
        rng = random.Random(10)
        for _ in range(50):
            a = summarize([rng.gauss(0, 1) for _ in range(rng.randint(3, 30))])
            b = summarize([rng.gauss(0.5, 2) for _ in range(rng.randint(3, 30))])
            r1 = welch_t(a, b, alternative="greater")
            r2 = welch_t(b, a, alternative="less")
            assert math.isclose(r1.t, -r2.t, rel_tol=1e-12)
            assert math.isclose(r1.df, r2.df, rel_tol=1e-12)
            assert math.isclose(r1.p_one_tailed, r2.p_one_tailed, rel_tol=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(
        st.floats(min_value=0.01, max_value=1000),
        st.integers(min_value=0, max_value=10_000),
    )
    def test_scale_equivariance(self, scale, salt):
        rng = random.Random(salt)
        xs = [rng.gauss(5, 2) for _ in range(12)]
        ys = [rng.gauss(4, 1) for _ in range(9)]
        r1 = welch_t(summarize(xs), summarize(ys))
        r2 = welch_t(
            summarize([x * scale for x in xs]), summarize([y * scale for y in ys])
        )
        assert math.isclose(r1.t, r2.t, rel_tol=1e-7)
        assert math.isclose(r1.df, r2.df, rel_tol=1e-7)
        assert math.isclose(r1.p_one_tailed, r2.p_one_tailed, rel_tol=1e-6)

    def test_matches_reference_welch_on_raw_data(self):
        rng = random.Random(21)
        for _ in range(50):
            xs = [rng.gauss(1, 2) for _ in range(rng.randint(5, 40))]
            ys = [rng.gauss(0.5, 1) for _ in range(rng.randint(5, 40))]
            r = welch_t(summarize(xs), summarize(ys), alternative="greater")
            ref = sps.ttest_ind(xs, ys, equal_var=False, alternative="greater")
            assert math.isclose(r.t, float(ref.statistic), rel_tol=1e-9)
            assert abs(r.p_one_tailed - float(ref.pvalue)) < 1e-9

    def test_degenerate_inputs_rejected(self):
        const = summarize([1.0, 1.0, 1.0])
        with pytest.raises(DataError, match="zero variance"):
            welch_t(const, const)
        tiny = SampleSummary(n=1, mean=0.0, variance=0.0)
        ok = summarize([1.0, 2.0])
        with pytest.raises(DataError):
            welch_t(tiny, ok)
        with pytest.raises(DataError):
            welch_t(ok, ok, alternative="two-sided")
