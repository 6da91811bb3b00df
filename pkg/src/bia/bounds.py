"""Closed-form sum-DoF values, the optimal coalition size and curve data."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

from .scheme import optimal_r, sum_dof_formula


def brute_force_r(K: int) -> int:
    """argmax_r of the sum-DoF formula by enumeration; ties go to the smallest r."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    # Kr/(r^2-r+K) compared by exact integer cross-multiplication
    best_r, num, den = 1, K, K
    for r in range(2, K + 1):
        n, d = K * r, r * r - r + K
        if n * den > num * d:
            best_r, num, den = r, n, d
    return best_r


def verify_r_optimality(K: int) -> bool:
    return optimal_r(K) == brute_force_r(K)


def max_sum_dof(K: int) -> Fraction:
    return sum_dof_formula(K, optimal_r(K))


def _sig6(x: float) -> str:
    return f"{x:.6g}"


@dataclass(frozen=True)
class DofCurvePoint:
    K: int
    r_star: int
    dof: Fraction

    @property
    def dof_decimal(self) -> str:
        return _sig6(float(self.dof))

    @property
    def asymptote(self) -> str:
        return _sig6(math.sqrt(self.K) / 2)


def outer_bound_curve(K_min: int, K_max: int) -> list[DofCurvePoint]:
    if not 1 <= K_min <= K_max:
        raise ValueError(f"need 1 <= K_min <= K_max, got {K_min}, {K_max}")
    return [DofCurvePoint(K, optimal_r(K), max_sum_dof(K)) for K in range(K_min, K_max + 1)]


CURVE_COLUMNS = ["K", "r_star", "dof_num", "dof_den", "dof_decimal", "sqrtK_over_2"]


def curve_csv(points: list[DofCurvePoint], header_lines: list[str] | None = None) -> str:
    buf = io.StringIO()
    for line in header_lines or []:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for pt in points:
        w.writerow([pt.K, pt.r_star, pt.dof.numerator, pt.dof.denominator, pt.dof_decimal, pt.asymptote])
    return buf.getvalue()


def asymptotic_gap(K: int) -> float:
    """Relative distance of the optimal sum DoF from sqrt(K)/2."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    target = math.sqrt(K) / 2
    return abs(float(max_sum_dof(K)) - target) / target
