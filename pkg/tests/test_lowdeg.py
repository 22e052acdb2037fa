import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mslr.errors import DegreeTooLarge, TooLarge, UnsupportedValueSet
from mslr.lowdeg import (
    MAX_HALF_DEGREE,
    ChiSqConfig,
    LowDegRegime,
    chi2,
    chi2_bruteforce_oracle,
    chi2_sbmslrd,
    chi2_slrd,
    chi2_sym_unbalanced,
    compositions,
    hermite_eval,
    hermite_orthonormality_check,
    inner_moment,
    overlap_pmf,
)


def cfg(p, n, k, s2, D, regime="slrd", vs="pm1", arithmetic="rational", phi=Fraction(1, 2)):
    return ChiSqConfig(p=p, n=n, k=k, sigma2=s2, D=D, regime=regime, value_set=vs, arithmetic=arithmetic, phi=phi)


class TestHermite:
    def test_base_cases(self):
        assert hermite_eval(0, 2.5) == 1
        assert hermite_eval(1, 2.5) == 2.5

    def test_worked_values(self):
        assert hermite_eval(2, 3) == 8
        assert hermite_eval(3, 2) == 2
        assert hermite_eval(3, Fraction(1, 2)) == Fraction(1, 8) - Fraction(3, 2)

    def test_vectorized(self):
        x = np.array([-1.0, 0.0, 2.0])
        np.testing.assert_allclose(hermite_eval(4, x), x**4 - 6 * x**2 + 3)

    def test_orthonormality_small(self):
        report = hermite_orthonormality_check(3, 200_000, 1)
        assert report.gram[0, 0] == 1.0
        assert report.within(5)


class TestCombinatorics:
    def test_compositions(self):
        assert compositions(0, 5) == 1
        assert compositions(2, 2) == 3
        assert compositions(3, 4) == 20

    def test_compositions_brute_force(self):
        for m in range(5):
            for n in range(1, 4):
                count = sum(1 for c in itertools.product(range(m + 1), repeat=n) if sum(c) == m)
                assert compositions(m, n) == count

    def test_overlap_pmf(self):
        assert overlap_pmf(4, 2) == [Fraction(1, 6), Fraction(4, 6), Fraction(1, 6)]
        assert overlap_pmf(5, 5) == [0, 0, 0, 0, 0, 1]

    @settings(max_examples=50, deadline=None)
    @given(p=st.integers(1, 30), data=st.data())
    def test_pmf_sums_to_one(self, p, data):
        k = data.draw(st.integers(0, p))
        assert sum(overlap_pmf(p, k)) == 1

    def test_inner_moment(self):
        assert inner_moment(4, 2, 0) == 1
        assert inner_moment(6, 3, 3, "pm1") == 0
        assert inner_moment(4, 2, 2, "pm1") == 1

    def test_inner_moment_brute_force(self):
        p, k = 4, 2
        supports = list(itertools.combinations(range(p), k))
        for m in range(5):
            total = Fraction(0)
            for s1, s2 in itertools.product(supports, repeat=2):
                for g1, g2 in itertools.product(itertools.product((-1, 1), repeat=k), repeat=2):
                    b1 = dict(zip(s1, g1))
                    b2 = dict(zip(s2, g2))
                    total += sum(b1[j] * b2[j] for j in set(s1) & set(s2)) ** m
            assert inner_moment(p, k, m, "pm1") == total / (len(supports) ** 2 * 2 ** (2 * k))

    def test_float_matches_exact(self):
        for m in range(0, 9):
            exact = inner_moment(30, 5, m, "pm1")
            assert inner_moment(30, 5, m, "pm1", exact=False) == pytest.approx(float(exact), rel=1e-12, abs=0)

    def test_unsupported_value_set(self):
        with pytest.raises(UnsupportedValueSet):
            inner_moment(4, 2, 2, (1.0, 2.0))


class TestClosedForms:
    def test_zero_degree(self):
        for regime in LowDegRegime:
            assert chi2(cfg(4, 2, 2, 1, 0, regime)).value == 0

    def test_slrd_pm1_degree_two_vanishes(self):
        assert chi2_slrd(cfg(4, 1, 2, 2, 2, vs="pm1")).value == 0

    def test_slrd_worked_value(self):
        assert chi2_slrd(cfg(4, 1, 2, 2, 2, vs="p1")).value == Fraction(1, 4)

    def test_sbmslrd_low_degrees_vanish(self):
        for D in range(4):
            assert chi2_sbmslrd(cfg(6, 2, 3, 1, D)).value == 0

    def test_sbmslrd_worked_value(self):
        assert chi2_sbmslrd(cfg(4, 2, 2, 2, 4)).value == Fraction(1, 8)

    def test_sbmslrd_zero_terms_follow_zero_moments(self):
        res = chi2_sbmslrd(cfg(10, 3, 3, 1, 12, vs="pm1"))
        for m, term in zip(range(1, 7), res.terms):
            if m % 2 or inner_moment(10, 3, m, "pm1") == 0:
                assert term == 0

    def test_sym_reductions(self):
        for D in range(0, 9):
            for vs in ("pm1", "p1"):
                half = chi2_sym_unbalanced(cfg(8, 3, 2, 1, D, "sym", vs, phi=Fraction(1, 2))).value
                assert half == chi2_sbmslrd(cfg(8, 3, 2, 1, D, "sbmslrd", vs)).value
                one = chi2_sym_unbalanced(cfg(8, 3, 2, 1, D, "sym", vs, phi=Fraction(1))).value
                assert one == chi2_slrd(cfg(8, 3, 2, 1, D, "slrd", vs)).value

    def test_sym_matches_oracle(self):
        c = cfg(4, 1, 2, 2, 2, "sym", "p1", phi=Fraction(3, 10))
        assert chi2_sym_unbalanced(c).value == chi2_bruteforce_oracle(c)

    @settings(max_examples=60, deadline=None)
    @given(
        regime=st.sampled_from(list(LowDegRegime)),
        vs=st.sampled_from(["pm1", "p1"]),
        p=st.integers(2, 40),
        n=st.integers(1, 20),
        D=st.integers(0, 16),
        data=st.data(),
    )
    def test_nonnegative_and_monotone_in_degree(self, regime, vs, p, n, D, data):
        k = data.draw(st.integers(1, p))
        prev = chi2(cfg(p, n, k, 1, D, regime, vs, phi=Fraction(3, 10))).value
        assert prev >= 0
        nxt = chi2(cfg(p, n, k, 1, D + 1, regime, vs, phi=Fraction(3, 10))).value
        assert nxt >= prev

    def test_monotone_in_n(self):
        values = [chi2_sbmslrd(cfg(50, n, 5, 1, 8)).value for n in (1, 5, 20, 100, 500)]
        assert values == sorted(values)

    def test_float_agrees_with_rational(self):
        for regime, vs, p, n, k, D in itertools.product(
            list(LowDegRegime), ("pm1", "p1"), (4, 9), (1, 3), (1, 2), (2, 4, 6)
        ):
            if k > p:
                continue
            exact = chi2(cfg(p, n, k, Fraction(3, 2), D, regime, vs, phi=Fraction(3, 10))).value
            approx = chi2(cfg(p, n, k, 1.5, D, regime, vs, "float", phi=0.3)).value
            assert approx == pytest.approx(float(exact), rel=1e-12, abs=1e-300)

    def test_large_scale_float(self):
        res = chi2(cfg(10**6, 10**4, 100, 100.0, 40, "sbmslrd", "pm1", "float"))
        assert math.isfinite(res.value) and res.value >= 0

    def test_degree_limit(self):
        with pytest.raises(DegreeTooLarge):
            chi2_slrd(cfg(4, 1, 2, 1, 2 * MAX_HALF_DEGREE + 2, arithmetic="float"))


class TestOracle:
    def test_size_limit(self):
        with pytest.raises(TooLarge):
            chi2_bruteforce_oracle(cfg(5, 1, 2, 1, 2))

    def test_worked_values(self):
        assert chi2_bruteforce_oracle(cfg(4, 1, 2, 2, 2, vs="p1")) == Fraction(1, 4)
        assert chi2_bruteforce_oracle(cfg(4, 2, 2, 2, 4, "sbmslrd")) == Fraction(1, 8)
        assert chi2_bruteforce_oracle(cfg(4, 2, 2, 2, 0)) == 0

    @pytest.mark.parametrize("regime", list(LowDegRegime))
    @pytest.mark.parametrize("vs", ["pm1", "p1"])
    def test_equivalence_sample(self, regime, vs):
        for p, n, k, D in ((3, 2, 1, 4), (4, 1, 2, 6), (2, 3, 2, 4)):
            c = cfg(p, n, k, Fraction(1, 2), D, regime, vs, phi=Fraction(1, 3))
            assert chi2(c).value == chi2_bruteforce_oracle(c)
