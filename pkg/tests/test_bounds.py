import csv
import io
import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bia.bounds import (
    CURVE_COLUMNS,
    asymptotic_gap,
    brute_force_r,
    curve_csv,
    max_sum_dof,
    outer_bound_curve,
    verify_r_optimality,
)
from bia.scheme import optimal_r, sum_dof_formula


def test_r_optimality_exhaustive():
    assert all(verify_r_optimality(K) for K in range(1, 1001))


def test_tie_goes_to_smallest_r():
    assert sum_dof_formula(2, 1) == sum_dof_formula(2, 2)
    assert brute_force_r(2) == 1


@pytest.mark.parametrize("K,r,dof", [(5, 2, Fraction(10, 7)), (2, 1, 1), (42, 6, Fraction(7, 2)), (3, 2, Fraction(6, 5))])
def test_curve_points(K, r, dof):
    (pt,) = outer_bound_curve(K, K)
    assert (pt.r_star, pt.dof) == (r, dof)


def test_k42_brute_force_cross_check():
    vals = [sum_dof_formula(42, r) for r in range(1, 43)]
    assert max(vals) == Fraction(7, 2) and vals.index(max(vals)) + 1 == 6


def test_decimal_rendering():
    (pt,) = outer_bound_curve(5, 5)
    assert pt.dof_decimal == "1.42857"
    assert pt.asymptote == "1.11803"


@pytest.mark.parametrize("K,gap", [(1, 1.0), (100, 1000 / 190 / 5 - 1), (10_000, 1e6 / 19_900 / 50 - 1)])
def test_asymptotic_gap_values(K, gap):
    assert asymptotic_gap(K) == pytest.approx(gap, rel=1e-12)


def test_asymptotic_gap_decreasing():
    gaps = [asymptotic_gap(10**e) for e in (2, 3, 4)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.01


def test_unimodal_in_r():
    for K in range(1, 201):
        vals = [sum_dof_formula(K, r) for r in range(1, K + 1)]
        peak = optimal_r(K) - 1
        assert all(a <= b for a, b in zip(vals[:peak], vals[1 : peak + 1]))
        assert all(a >= b for a, b in zip(vals[peak:], vals[peak + 1 :]))


@given(st.integers(1, 5000))
def test_dof_lower_bounds(K):
    assert max_sum_dof(K) >= 1
    if K >= 3:
        assert max_sum_dof(K) >= Fraction(6, 5)


def test_curve_monotone_in_K():
    dofs = [pt.dof for pt in outer_bound_curve(1, 500)]
    assert all(a <= b for a, b in zip(dofs, dofs[1:]))


def test_curve_rejects_bad_range():
    with pytest.raises(ValueError):
        outer_bound_curve(5, 4)
    with pytest.raises(ValueError):
        asymptotic_gap(0)


def test_curve_csv_format():
    text = curve_csv(outer_bound_curve(2, 50), ["tool=bia", "seed=0"])
    lines = text.splitlines()
    assert lines[:2] == ["# tool=bia", "# seed=0"]
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[2:]))))
    assert list(rows[0]) == CURVE_COLUMNS
    assert len(rows) == 49
    k5 = next(r for r in rows if r["K"] == "5")
    assert Fraction(int(k5["dof_num"]), int(k5["dof_den"])) == Fraction(10, 7)
    assert float(rows[-1]["sqrtK_over_2"]) == pytest.approx(math.sqrt(50) / 2, rel=5e-6)
