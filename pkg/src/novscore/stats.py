"""One-tailed Welch's t-test machinery and group summaries.

The Student-t survival function is evaluated through the regularized
incomplete beta function, computed with the modified Lentz continued
fraction and the usual symmetry switch. Fractional degrees of freedom are
supported directly; p-values carry full double precision, display rounding
is left to callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DataError

_EPS = 1e-15
_FPMIN = 1e-300
_MAX_ITER = 500
_CF_TOL = 1e-16


@dataclass(frozen=True)
class SampleSummary:
    """Count, mean, and unbiased (n-1) variance of one group."""

    n: int
    mean: float
    variance: float


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p_one_tailed: float
    alternative: str


def summarize(values: Sequence[float] | Iterable[float]) -> SampleSummary:
    """One-pass Welford mean and unbiased variance; n=1 reports variance 0."""
    n = 0
    mean = 0.0
    m2 = 0.0
    for x in values:
        n += 1
        delta = x - mean
        mean += delta / n
        m2 += delta * (x - mean)
    if n == 0:
        raise DataError("cannot summarize an empty sample")
    variance = m2 / (n - 1) if n > 1 else 0.0
    return SampleSummary(n=n, mean=mean, variance=max(variance, 0.0))


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta, modified Lentz method."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOL:
            return h
    raise ArithmeticError(
        f"incomplete beta continued fraction did not converge for "
        f"a={a}, b={b}, x={x}"
    )


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0.0 or b <= 0.0:
        raise DataError(f"beta parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise DataError(f"x must be in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """Upper-tail probability P(T > t) of Student's t with ``df`` > 0."""
    if df <= 0.0:
        raise DataError(f"degrees of freedom must be positive, got {df}")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * betainc_regularized(0.5 * df, 0.5, x)
    return tail if t > 0.0 else 1.0 - tail


def welch_t(
    a: SampleSummary, b: SampleSummary, alternative: str = "greater"
) -> WelchResult:
    """Welch's two-sample t-test with Welch-Satterthwaite degrees of freedom.

    ``alternative`` is the direction of the claim about group a relative to
    group b: "greater" tests mean(a) > mean(b), "less" the reverse.
    """
    if alternative not in ("greater", "less"):
        raise DataError(f"alternative must be 'greater' or 'less', got {alternative!r}")
    if a.n < 2 or b.n < 2:
        raise DataError(f"both groups need n >= 2 (got {a.n} and {b.n})")
    if a.variance == 0.0 and b.variance == 0.0:
        raise DataError(
            "both groups have zero variance; the t statistic is undefined "
            "(all observations within each group are identical)"
        )
    sa = a.variance / a.n
    sb = b.variance / b.n
    se = math.sqrt(sa + sb)
    t = (a.mean - b.mean) / se
    df = (sa + sb) ** 2 / (sa * sa / (a.n - 1) + sb * sb / (b.n - 1))
    p = student_t_sf(t, df) if alternative == "greater" else student_t_sf(-t, df)
    return WelchResult(t=t, df=df, p_one_tailed=p, alternative=alternative)
