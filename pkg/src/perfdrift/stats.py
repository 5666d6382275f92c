"""Normality and mean-difference tests used to validate detected changes.

Shapiro-Wilk follows Royston's AS R94 algorithm (3 <= n <= 5000). The t-tests
use a Student-t tail computed from the regularized incomplete beta function,
evaluated with a modified Lentz continued fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .errors import DegenerateDifference, DegenerateSample, InvalidArgument, UnpairedInput, UnsupportedSize
from .model import StatTest, StatTestResult

SIGNIFICANCE = 0.05

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 100_000


@dataclass(frozen=True)
class SampleVector:
    values: tuple[float, ...]
    label: str = ""

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        if not all(math.isfinite(v) for v in values):
            raise InvalidArgument(f"sample {self.label!r} contains non-finite values")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


def _as_array(sample: SampleVector | Sequence[float]) -> np.ndarray:
    if not isinstance(sample, SampleVector):
        sample = SampleVector(tuple(sample))
    return np.asarray(sample.values, dtype=float)


# -- incomplete beta / Student t -------------------------------------------

def _beta_cf(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float, y: float | None = None) -> float:
    """Regularized incomplete beta I_x(a, b).

    ``y`` may carry ``1 - x`` computed without cancellation by the caller.
    """
    if a <= 0 or b <= 0:
        raise InvalidArgument("betainc requires a > 0 and b > 0")
    if y is None:
        y = 1.0 - x
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log(y))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, y) / b


def student_t_sf(t: float, df: float) -> float:
    """P(T > t) for Student's t with ``df`` degrees of freedom."""
    if not df > 0:
        raise InvalidArgument(f"df must be positive, got {df}")
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    if t == 0.0:
        return 0.5
    t2 = t * t
    tail = 0.5 * betainc(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2))
    return tail if t > 0 else 1.0 - tail


def _two_sided(t: float, df: float) -> float:
    return min(1.0, 2.0 * student_t_sf(abs(t), df))


# -- Shapiro-Wilk (AS R94) ---------------------------------------------------

_C1 = (0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.544, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)

_STD_NORMAL = NormalDist()


def _poly(coef: Sequence[float], x: float) -> float:
    result = 0.0
    for c in reversed(coef):
        result = result * x + c
    return result


def _swilk_coefficients(n: int) -> np.ndarray:
    """Weights a_1..a_{n//2} for the lower half of the ordered sample."""
    half = n // 2
    if n == 3:
        return np.array([math.sqrt(0.5)])
    m = np.array([_STD_NORMAL.inv_cdf((i - 0.375) / (n + 0.25)) for i in range(1, half + 1)])
    summ2 = 2.0 * float(np.sum(m * m))
    ssumm2 = math.sqrt(summ2)
    rsn = 1.0 / math.sqrt(n)
    a = -m / ssumm2
    a1 = _poly(_C1, rsn) - m[0] / ssumm2
    if n > 5:
        a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
        fac = math.sqrt((summ2 - 2.0 * m[0] ** 2 - 2.0 * m[1] ** 2) / (1.0 - 2.0 * a1 ** 2 - 2.0 * a2 ** 2))
        a[2:] = -m[2:] / fac
        a[1] = a2
    else:
        fac = math.sqrt((summ2 - 2.0 * m[0] ** 2) / (1.0 - 2.0 * a1 ** 2))
        a[1:] = -m[1:] / fac
    a[0] = a1
    return a


def _swilk_pvalue(w: float, n: int) -> float:
    if n == 3:
        # exact distribution for n = 3
        return max(0.0, 6.0 / math.pi * (math.asin(math.sqrt(w)) - math.pi / 3.0))
    y = math.log1p(-w) if w < 1.0 else -math.inf
    if n <= 11:
        gamma = _poly(_G, n)
        if y >= gamma:
            return 1e-99
        y = -math.log(gamma - y)
        mean = _poly(_C3, n)
        sd = math.exp(_poly(_C4, n))
    else:
        ln = math.log(n)
        mean = _poly(_C5, ln)
        sd = math.exp(_poly(_C6, ln))
    if math.isinf(y):
        return 1.0
    z = (y - mean) / sd
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def shapiro_wilk(x: SampleVector | Sequence[float]) -> StatTestResult:
    """Shapiro-Wilk W and its AS R94 p-value."""
    values = np.sort(_as_array(x))
    n = len(values)
    if not 3 <= n <= 5000:
        raise UnsupportedSize(f"Shapiro-Wilk needs 3 <= n <= 5000, got n={n}")
    spread = values[-1] - values[0]
    if spread <= 0.0:
        raise DegenerateSample("Shapiro-Wilk is undefined for a zero-variance sample")
    a = _swilk_coefficients(n)
    half = len(a)
    scaled = (values - values.mean()) / spread
    numerator = float(np.dot(a, scaled[::-1][:half] - scaled[:half])) ** 2
    denominator = float(np.dot(scaled, scaled))
    w = min(1.0, numerator / denominator)
    return StatTestResult(
        test=StatTest.SHAPIRO_WILK,
        statistic=w,
        p_value=min(1.0, _swilk_pvalue(w, n)),
        n=(n,),
    )


# -- t-tests -----------------------------------------------------------------

def paired_t_test(x: SampleVector | Sequence[float], y: SampleVector | Sequence[float]) -> StatTestResult:
    """Two-sided paired t-test on ``x - y``."""
    xa, ya = _as_array(x), _as_array(y)
    if len(xa) != len(ya):
        raise UnpairedInput(f"paired t-test needs equal lengths, got {len(xa)} and {len(ya)}")
    n = len(xa)
    if n < 2:
        raise UnpairedInput(f"paired t-test needs at least 2 pairs, got {n}")
    d = xa - ya
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = float(n - 1)
    if sd == 0.0:
        if mean == 0.0:
            return StatTestResult(StatTest.PAIRED_T, 0.0, 1.0, (n, n), df, False)
        raise DegenerateDifference("all paired differences are identical and non-zero; t is undefined")
    t = mean / (sd / math.sqrt(n))
    p = _two_sided(t, df)
    return StatTestResult(StatTest.PAIRED_T, t, p, (n, n), df, p < SIGNIFICANCE)


def welch_t_test(x: SampleVector | Sequence[float], y: SampleVector | Sequence[float]) -> StatTestResult:
    """Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom."""
    xa, ya = _as_array(x), _as_array(y)
    nx, ny = len(xa), len(ya)
    if nx < 2 or ny < 2:
        raise InvalidArgument(f"Welch t-test needs at least 2 values per sample, got {nx} and {ny}")
    vx = float(xa.var(ddof=1)) / nx
    vy = float(ya.var(ddof=1)) / ny
    diff = float(xa.mean() - ya.mean())
    se2 = vx + vy
    if se2 == 0.0:
        if diff == 0.0:
            return StatTestResult(StatTest.WELCH_T, 0.0, 1.0, (nx, ny), float(nx + ny - 2), False)
        # limit of the statistic as both variances vanish
        p = math.ulp(0.0)
        return StatTestResult(
            StatTest.WELCH_T, math.copysign(math.inf, diff), p, (nx, ny),
            float(nx + ny - 2), True, degenerate=True,
        )
    t = diff / math.sqrt(se2)
    df = se2 ** 2 / (vx ** 2 / (nx - 1) + vy ** 2 / (ny - 1))
    p = _two_sided(t, df)
    return StatTestResult(StatTest.WELCH_T, t, p, (nx, ny), df, p < SIGNIFICANCE)
