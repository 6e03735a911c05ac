import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from coherent.bounds import (
    QuadraticForm,
    SphereInstance,
    abspow_bound,
    abspow_step,
    abspow_witness,
    alpha0,
    asymptotic_check,
    cov_bound,
    cov_witness,
    quad_bound,
    six_point_value,
    sphere_max,
    sphere_max_numeric,
)
from coherent.distribution import ObjectiveFn, covariance, expectation, validate_coherence

from tables import signal_table, signal_tables

COV_VALUES = {
    F(1, 10): -F(81, 12100),
    F(1, 4): -F(9, 400),
    F(1, 3): -F(1, 36),
    F(1, 2): -F(1, 32),
    F(2, 3): -F(1, 36),
    F(3, 4): -F(9, 400),
    F(9, 10): -F(81, 12100),
}

# opt(k) = max_a 2a(1-a)^k/(1+a), frozen from a bounded scalar search
OPT = {3: 0.17119910863906956, 4: 0.13798987489692202, 8: 0.07828157834507343}


def printed_opt(k):
    """The six-point value written with the square root expanded."""
    r = math.sqrt(k * k + 6 * k + 1)
    return 2 * ((3 * k + 1 - r) / (2 * k)) ** k * (-(k + 1) + r) / (k - 1 + r)


class TestCovariance:
    @pytest.mark.parametrize("p", sorted(COV_VALUES))
    def test_values(self, p):
        assert cov_bound(p) == COV_VALUES[p]

    @pytest.mark.parametrize("p", sorted(COV_VALUES) + [F(1, 7), F(5, 11), F(13, 14)])
    def test_witness_is_exact(self, p):
        table = cov_witness(p)
        assert validate_coherence(table, tol=0)
        assert covariance(table) == cov_bound(p)

    def test_branches_meet(self):
        for p in (F(1, 3), F(2, 3)):
            below = -(p * (1 - p) / (1 + p)) ** 2
            above = -(p * (1 - p) / (2 - p)) ** 2
            assert cov_bound(p) == -p * (1 - p) / 8
            assert cov_bound(p) in (below, above)

    def test_symmetric_in_p(self):
        for p in (F(1, 5), F(2, 7), F(9, 20)):
            assert cov_bound(p) == cov_bound(1 - p)

    def test_domain(self):
        with pytest.raises(ValueError):
            cov_bound(F(1))


class TestQuadratic:
    def test_ladder_parameters(self):
        res = quad_bound(F(2, 3), QuadraticForm(1, -4))
        assert res.tight and res.spec.steps == 4
        assert res.value == F(2, 3) * F(1, 3) * F(1, 5)
        assert expectation(res.witness_table(), ObjectiveFn.quadratic(1, -4, F(2, 3))) == res.value

    def test_not_tight(self):
        res = quad_bound(F(1, 4), QuadraticForm(1, -1))
        assert res.value == F(3, 32) and not res.tight and res.witness is None

    @pytest.mark.parametrize(
        "alpha, beta, label",
        [(-1, -1, "X1 = X2 = p"), (1, 2, "X1 = X2 = X"), (-1, 0, "X1 = X2 = p"), (-1, 3, "X1 = X2 = X"),
         (0, -1, "X1 = X2 = p")],
    )
    def test_degenerate_branches(self, alpha, beta, label):
        p = F(2, 7)
        res = quad_bound(p, QuadraticForm(alpha, beta))
        assert res.tight and res.attained_by == label
        table = res.witness_table()
        assert validate_coherence(table, tol=0)
        assert expectation(table, ObjectiveFn.quadratic(alpha, beta, p)) == res.value

    def test_step_parametrization(self):
        # alpha = 1, beta = 1 - 1/a gives a p (1 - p)
        p = F(1, 2)
        for a in (F(1, 3), F(1, 2), F(2, 5), F(1)):
            assert quad_bound(p, QuadraticForm(1, 1 - 1 / a)).value == a * p * (1 - p)

    def test_kink(self):
        # alpha = 2 beta sits on both formulas
        res = quad_bound(F(1, 3), QuadraticForm(2, 1))
        assert res.value == F(1, 3) * F(2, 3) * 4


class TestSphere:
    @pytest.mark.parametrize(
        "alpha, beta, expected",
        [(1, 0, 1), (1, -1, 0.5), (0, 1, 4), (0.3, 2, 8), (1, 0.75, 3), (-1, -1, 0)],
    )
    def test_closed_form(self, alpha, beta, expected):
        assert sphere_max(SphereInstance(alpha, beta)) == pytest.approx(expected)

    @pytest.mark.parametrize("alpha, beta", [(1, 0), (1, -1), (0.3, 2), (-0.5, 0.2), (2, 0.9)])
    def test_numeric_oracle(self, alpha, beta):
        inst = SphereInstance(alpha, beta, 2.0)
        assert sphere_max_numeric(inst, resolution=60) == pytest.approx(sphere_max(inst), abs=1e-6)

    def test_scales_with_diameter(self):
        assert sphere_max(SphereInstance(1, 0, 4)) == 4 * sphere_max(SphereInstance(1, 0, 1))

    def test_negative_diameter(self):
        with pytest.raises(ValueError):
            SphereInstance(1, 0, -1)


class TestAbsPow:
    def test_crossover(self):
        a0 = alpha0()
        assert abs(a0 - 2.25751) < 1e-4
        assert six_point_value(a0) == pytest.approx(2.0**-a0, abs=1e-13)

    @pytest.mark.parametrize("k", [0.5, 1, 2])
    def test_small_exponents(self, k):
        assert abspow_bound(k) == 2.0**-k

    @pytest.mark.parametrize("k", sorted(OPT))
    def test_frozen_values(self, k):
        assert abspow_bound(k) == pytest.approx(OPT[k], abs=1e-15)
        assert six_point_value(k) == pytest.approx(printed_opt(k), rel=1e-12)
        res = minimize_scalar(lambda a: -six_point_value(k, a), bounds=(0, 1), method="bounded",
                              options={"xatol": 1e-12})
        assert -res.fun == pytest.approx(OPT[k], abs=1e-12)
        assert res.x == pytest.approx(abspow_step(k), abs=1e-6)

    @pytest.mark.parametrize("k", [0.5, 1, 2, 3, 4, 8, 20])
    def test_witness(self, k):
        table = abspow_witness(k)
        assert validate_coherence(table, tol=1e-12)
        assert expectation(table, ObjectiveFn.abspow(k)) == pytest.approx(abspow_bound(k), abs=1e-12)

    def test_six_point_family_at_any_a(self):
        for a in (0.0, 0.1, 0.5, 1.0):
            table = abspow_witness(3, a=a)
            assert validate_coherence(table, tol=1e-12)
            assert expectation(table, ObjectiveFn.abspow(3)) == pytest.approx(six_point_value(3, a), abs=1e-14)

    def test_asymptotics(self):
        assert abs(asymptotic_check(1e4) - 2 / math.e) < 0.01
        assert abs(asymptotic_check(1e6) - 2 / math.e) < 1e-3
        with pytest.raises(ValueError):
            asymptotic_check(1)

    def test_domain(self):
        with pytest.raises(ValueError):
            abspow_bound(0)
        with pytest.raises(ValueError):
            abspow_witness(2, a=1.5)


coef = st.fractions(min_value=-3, max_value=3, max_denominator=4)


@settings(max_examples=120, deadline=None)
@given(table=signal_tables(), alpha=coef, beta=coef)
def test_no_coherent_table_beats_the_bounds(table, alpha, beta):
    p = table.prior
    quad = quad_bound(p, QuadraticForm(alpha, beta))
    assert expectation(table, ObjectiveFn.quadratic(alpha, beta, p)) <= quad.value
    assert covariance(table) >= cov_bound(p)


@settings(max_examples=60, deadline=None)
@given(one=st.lists(st.lists(st.integers(0, 4), min_size=3, max_size=3), min_size=3, max_size=3),
       zero=st.lists(st.lists(st.integers(0, 4), min_size=3, max_size=3), min_size=3, max_size=3),
       k=st.sampled_from([0.5, 1, 2, 3, 4, 8]))
def test_abspow_bound_dominates_signal_tables(one, zero, k):
    if not any(map(any, one)) or not any(map(any, zero)):
        return
    table = signal_table(F(1, 2), one, zero).to_float()
    assert expectation(table, ObjectiveFn.abspow(k)) <= abspow_bound(k) + 1e-12
