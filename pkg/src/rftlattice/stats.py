"""
Scalar special functions and the two univariate distributions the rest of
the package needs (standard normal and Student t), plus Welch's t-test.

Tail probabilities are computed directly rather than as ``1 - cdf`` so that
values around 1e-7 (the Bonferroni regime for a million voxels) keep full
relative precision.
"""

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from scipy.optimize import brentq

from .errors import DomainError

__all__ = [
    "log_gamma",
    "regularized_incomplete_beta",
    "t_tail",
    "t_quantile",
    "normal_cdf",
    "normal_tail",
    "normal_quantile",
    "WelchResult",
    "welch_t_test",
]

_EPS = 1e-16
_TINY = 1e-300
_CF_MAX_ITER = 200_000


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for ``x > 0``."""
    if not x > 0:
        raise DomainError(f"log_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def _beta_cf(a: float, b: float, x: float) -> float:
    # Modified Lentz evaluation of the continued fraction for I_x(a, b).
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


# Stirling series coefficients B_2k / (2k (2k - 1)).
_STIRLING = (1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188, -691 / 360360)


def _stirling_tail(z: float) -> float:
    zi = 1.0 / z
    zi2 = zi * zi
    acc = 0.0
    for c in reversed(_STIRLING):
        acc = acc * zi2 + c
    return acc * zi


def _log_gamma_ratio(a: float, b: float) -> float:
    # lgamma(a + b) - lgamma(a) for a >= 10, without forming either term.
    return (
        (a - 0.5) * math.log1p(b / a) + b * math.log(a + b) - b
        + _stirling_tail(a + b) - _stirling_tail(a)
    )


def _log_beta(a: float, b: float) -> float:
    small, big = min(a, b), max(a, b)
    if big < 10.0:
        return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    return math.lgamma(small) - _log_gamma_ratio(big, small)


def _log_beta_prefactor(a: float, b: float, log_x: float, log_y: float) -> float:
    # log of x^a y^b / (a B(a, b))
    return a * log_x + b * log_y - math.log(a) - _log_beta(a, b)


def _ibeta(a: float, b: float, x: float, y: float, log_x=None, log_y=None) -> float:
    # y = 1 - x, and optionally their logs, are passed in exactly by callers
    # that can form them without rounding (large-a exponents amplify it).
    if x == 0.0:
        return 0.0
    if y == 0.0:
        return 1.0
    log_x = math.log(x) if log_x is None else log_x
    log_y = math.log(y) if log_y is None else log_y
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(_log_beta_prefactor(a, b, log_x, log_y)) * _beta_cf(a, b, x)
    return 1.0 - math.exp(_log_beta_prefactor(b, a, log_y, log_x)) * _beta_cf(b, a, y)


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """
    Regularized incomplete beta function I_x(a, b).

    Evaluated by continued fraction on whichever side of the mean converges
    fastest, using ``I_x(a, b) = 1 - I_{1-x}(b, a)``.
    """
    if not (a > 0 and b > 0):
        raise DomainError(f"incomplete beta requires a, b > 0, got a={a!r}, b={b!r}")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"incomplete beta requires 0 <= x <= 1, got {x!r}")
    return _ibeta(a, b, x, 1.0 - x)


def _check_nu(nu: float) -> None:
    if not nu > 0:
        raise DomainError(f"degrees of freedom must be > 0, got {nu!r}")


def t_tail(t: float, nu: float) -> float:
    """Upper tail probability P(T >= t) of Student's t with `nu` degrees of freedom."""
    _check_nu(nu)
    if t == 0.0:
        return 0.5
    t2 = t * t
    # Both nu/(nu+t^2) and its complement are formed directly; _ibeta picks
    # the side on which the continued fraction converges.
    log_x = -math.log1p(t2 / nu)
    log_y = math.log(t2 / nu) + log_x
    upper = 0.5 * _ibeta(0.5 * nu, 0.5, nu / (nu + t2), t2 / (nu + t2), log_x, log_y)
    return upper if t > 0 else 1.0 - upper


def _invert_decreasing(tail: Callable[[float], float], p: float) -> float:
    # Expand a bracket around the root of tail(x) - p, then hand it to Brent.
    lo, hi = -1.0, 1.0
    while tail(hi) > p:
        lo, hi = hi, hi * 2.0
    while tail(lo) < p:
        lo, hi = lo * 2.0, lo
    return brentq(lambda x: tail(x) - p, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)


def t_quantile(p: float, nu: float) -> float:
    """Return ``t`` such that ``t_tail(t, nu) == p`` (inverse upper tail)."""
    _check_nu(nu)
    if not 0.0 < p < 1.0:
        raise DomainError(f"tail probability must lie in (0, 1), got {p!r}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return -t_quantile(1.0 - p, nu)
    return _invert_decreasing(lambda x: t_tail(x, nu), p)


def normal_cdf(z: float) -> float:
    """Standard normal CDF."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_tail(z: float) -> float:
    """Standard normal upper tail P(Z >= z)."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def normal_quantile(p: float) -> float:
    """Inverse of :func:`normal_cdf`."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p!r}")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        # Invert the lower tail directly to keep precision for tiny p.
        return -_invert_decreasing(normal_tail, p)
    return _invert_decreasing(normal_tail, 1.0 - p)


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p_two_sided: float
    effect_r: float


def _mean_var(x: Sequence[float]) -> tuple:
    n = len(x)
    m = math.fsum(x) / n
    v = math.fsum((xi - m) ** 2 for xi in x) / (n - 1)
    return n, m, v


def welch_t_test(sample_a: Sequence[float], sample_b: Sequence[float]) -> WelchResult:
    """
    Welch's unequal-variance two-sample t-test.

    Returns the statistic (positive when ``sample_a`` has the larger mean),
    the Welch-Satterthwaite degrees of freedom (not rounded), the two-sided
    p-value and the effect size ``r = sqrt(t^2 / (t^2 + df))``.
    """
    if len(sample_a) < 2 or len(sample_b) < 2:
        raise DomainError("each sample needs at least 2 observations")
    na, ma, va = _mean_var(sample_a)
    nb, mb, vb = _mean_var(sample_b)
    sa, sb = va / na, vb / nb
    se2 = sa + sb
    if se2 == 0.0:
        raise DomainError("both samples have zero variance")
    t = (ma - mb) / math.sqrt(se2)
    df = se2 ** 2 / (sa ** 2 / (na - 1) + sb ** 2 / (nb - 1))
    p = min(1.0, 2.0 * t_tail(abs(t), df))
    r = math.sqrt(t * t / (t * t + df))
    return WelchResult(t=t, df=df, p_two_sided=p, effect_r=r)
