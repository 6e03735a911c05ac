from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coherent.distribution import (
    JointAtomTable,
    ObjectiveFn,
    StructureError,
    complement,
    constant_expert,
    covariance,
    dumps,
    expectation,
    from_conditionals,
    fully_informed,
    loads,
    mix,
    one_informed,
    swap_experts,
    validate_coherence,
)
from coherent._numbers import as_fraction, format_number, parse_number

from tables import signal_table, signal_tables


def cov_witness_small_p(p):
    t = 2 * p / (p + 1)
    return from_conditionals(p, [(t, t, 1, 1), (0, t, F(1, 2), 0), (t, 0, F(1, 2), 0)])


class TestNumbers:
    def test_decimal_strings_are_exact(self):
        assert as_fraction("0.37") == F(37, 100)
        assert as_fraction(0.37) == F(37, 100)
        assert as_fraction("3/10") == F(3, 10)

    def test_format_round_trip(self):
        for v in (F(3, 10), F(4), 0.1, 7):
            assert parse_number(format_number(v)) == v

    def test_parse_modes(self):
        assert isinstance(parse_number("0.5"), float)
        assert parse_number("0.5", exact=True) == F(1, 2)
        assert parse_number("2") == F(2)


class TestTable:
    def test_dimension_mismatch(self):
        with pytest.raises(StructureError):
            JointAtomTable(F(1, 2), (0, 1), ((1, 0),), ((0, 1), (0, 0)))

    def test_marginals_and_means(self):
        t = cov_witness_small_p(F(1, 4))
        assert t.mean_x1() == F(1, 4) and t.mean_x2() == F(1, 4)
        assert sum(t.marginal_x1()) == 1
        assert t.exact

    def test_float_copy(self):
        t = cov_witness_small_p(F(1, 4)).to_float()
        assert not t.exact
        assert validate_coherence(t, 1e-12)


class TestValidation:
    @pytest.mark.parametrize("p", [F(1, 10), F(1, 4), F(3, 10)])
    def test_cov_witness_is_coherent(self, p):
        report = validate_coherence(cov_witness_small_p(p), tol=0)
        assert report.passed and not report.violations

    def test_reports_the_broken_family(self):
        bad = from_conditionals(F(1, 2), [(F(3, 4), F(3, 4), 1, 1), (F(1, 4), F(1, 4), 1, 0)])
        report = validate_coherence(bad, tol=0)
        assert not report
        assert {v.family for v in report.violations} == {"bayes_x1", "bayes_x2"}

    def test_normalization(self):
        t = from_conditionals(F(1, 2), [(F(1, 2), F(1, 2), F(1, 2), 1), (F(1, 2), F(1, 2), 1, 0)])
        report = validate_coherence(t, tol=0)
        assert any(v.family == "alpha_normalization" for v in report.violations)

    def test_negative_weight_rejected_at_build(self):
        with pytest.raises(StructureError):
            from_conditionals(F(1, 2), [(0, 0, -1, 0)])

    def test_coordinate_outside_square(self):
        with pytest.raises(StructureError):
            from_conditionals(F(1, 2), [(F(3, 2), 0, 1, 0)])

    def test_bad_x_value(self):
        with pytest.raises(StructureError):
            from_conditionals(F(1, 2), [(0, 0, 1, 2)])

    def test_empty(self):
        with pytest.raises(StructureError):
            from_conditionals(F(1, 2), [])

    def test_atoms_at_zero_and_one(self):
        # X1 = X2 = X: the Bayes rows at atoms 0 and 1 hold with zero mass on one side
        assert validate_coherence(fully_informed(F(1, 3)), tol=0)
        assert validate_coherence(one_informed(F(1, 3)), tol=0)
        assert validate_coherence(constant_expert(F(1, 3)), tol=0)


class TestExpectation:
    def test_cov_witness_covariance(self):
        p = F(1, 4)
        assert covariance(cov_witness_small_p(p)) == -F(9, 400)

    def test_objective_constructors(self):
        p = F(1, 3)
        assert ObjectiveFn.neg_cov(p)(F(0), F(1)) == p * (1 - p)
        assert ObjectiveFn.quadratic(1, 0, p)(F(1), F(0)) == 1
        assert ObjectiveFn.abspow(F(2))(F(1, 4), F(3, 4)) == F(1, 4)
        assert ObjectiveFn.abspow(2.0).params == (2,)

    def test_tabulated_is_bilinear(self):
        f = ObjectiveFn.tabulated([0, 1], [0, 1], [[0, 1], [1, 2]])
        assert f(0.5, 0.5) == pytest.approx(1.0)
        assert f.symmetric
        with pytest.raises(StructureError):
            ObjectiveFn.tabulated([0, 0.5], [0, 1], [[0, 1], [1, 2]])

    def test_fully_informed_value(self):
        p = F(2, 5)
        assert expectation(fully_informed(p), ObjectiveFn.abspow(1)) == 0
        assert expectation(one_informed(p), ObjectiveFn.abspow(1)) == p * (1 - p) + (1 - p) * p


class TestTransforms:
    def test_swap_is_involution(self):
        t = cov_witness_small_p(F(1, 5))
        assert swap_experts(swap_experts(t)) == t

    def test_complement_changes_prior(self):
        t = cov_witness_small_p(F(1, 5))
        c = complement(t)
        assert c.prior == F(4, 5)
        assert validate_coherence(c, tol=0)
        assert covariance(c) == covariance(t)

    def test_mix_keeps_coherence(self):
        p = F(1, 2)
        m = mix(fully_informed(p), constant_expert(p), F(1, 3))
        assert validate_coherence(m, tol=0)
        assert expectation(m, ObjectiveFn.quadratic(0, 1, p)) == F(1, 3) * 4 * p * (1 - p)

    def test_mix_needs_same_prior(self):
        with pytest.raises(StructureError):
            mix(fully_informed(F(1, 2)), fully_informed(F(1, 3)), F(1, 2))


class TestTextFormat:
    def test_round_trip_exact(self):
        t = cov_witness_small_p(F(1, 4))
        assert loads(dumps(t)) == t

    def test_round_trip_float(self):
        t = cov_witness_small_p(F(1, 4)).to_float()
        back = loads(dumps(t))
        assert back.atoms == t.atoms
        assert np.allclose(back.arrays()[1], t.arrays()[1])

    def test_comments_and_errors(self):
        text = "# witness\np=1/2\n1 1 1 1\n\n0 0 1 0  # X = 0\n"
        assert validate_coherence(loads(text), tol=0)
        with pytest.raises(StructureError):
            loads("1 1 1 1\n")
        with pytest.raises(StructureError):
            loads("p=1/2\n1 1 1\n")


@settings(max_examples=80, deadline=None)
@given(table=signal_tables(), w=st.fractions(min_value=0, max_value=1, max_denominator=8))
def test_signal_tables_are_coherent_and_stay_so(table, w):
    other = fully_informed(table.prior)
    for t in (table, swap_experts(table), complement(table), mix(table, other, w)):
        assert validate_coherence(t, tol=0)
        assert t.mean_x1() == t.prior == t.mean_x2()
    assert loads(dumps(table)) == table


def test_signal_table_rejects_incoherent_perturbation():
    t = signal_table(F(1, 3), [[1, 2], [0, 1]], [[2, 1], [1, 1]])
    assert validate_coherence(t, tol=0)
    shifted = JointAtomTable(t.prior, t.atoms, t.beta, t.alpha)
    assert not validate_coherence(shifted, tol=0)
