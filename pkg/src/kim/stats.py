"""Student-t statistics without an external stats dependency.

The t CDF is computed through the regularized incomplete beta function,
evaluated with a Lentz continued fraction to 1e-12, so confidence
intervals and paired tests are reproducible against published tables.
"""

import math
from dataclasses import dataclass, field

__all__ = [
    "incomplete_beta", "t_cdf", "t_ppf",
    "confidence_interval", "paired_t_test", "PairedComparison",
]

_CF_TOL = 1e-12
_CF_MAX_ITER = 300
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
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
        if abs(delta - 1.0) < _CF_TOL:
            return h
    raise ArithmeticError(f"incomplete beta failed to converge "
                          f"(a={a}, b={b}, x={x})")


def incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if not (a > 0 and b > 0):
        raise ValueError("incomplete_beta needs a > 0 and b > 0")
    if x < 0.0 or x > 1.0:
        raise ValueError(f"x = {x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return float(x)
    front = math.exp(math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                     + a * math.log(x) + b * math.log1p(-x))
    # the continued fraction converges fast only below the pivot;
    # above it use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: int) -> float:
    if df < 1:
        raise ValueError("t distribution needs df >= 1")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x)
    return tail if t < 0 else 1.0 - tail


def t_ppf(q: float, df: int) -> float:
    """Inverse CDF by bisection; the CDF is strictly monotone."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile must be strictly inside (0, 1)")
    if q == 0.5:
        return 0.0
    if q < 0.5:
        return -t_ppf(1.0 - q, df)
    hi = 2.0
    while t_cdf(hi, df) < q:
        hi *= 2.0
        if hi > 1e12:
            raise ArithmeticError(f"t_ppf bracket blew up (q={q}, df={df})")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, df) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def confidence_interval(samples, level: float = 0.95):
    """t-based CI for the mean: mean +- t_{(1+level)/2, n-1} * s / sqrt(n)."""
    xs = [float(v) for v in samples]
    n = len(xs)
    if n < 2:
        raise ValueError("confidence interval needs at least 2 samples")
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must be in (0, 1)")
    mean = sum(xs) / n
    var = sum((v - mean) ** 2 for v in xs) / (n - 1)
    half = t_ppf(0.5 * (1.0 + level), n - 1) * math.sqrt(var / n)
    return mean - half, mean + half


@dataclass(frozen=True)
class PairedComparison:
    condition_a: str
    condition_b: str
    keys: tuple
    diffs: tuple
    t: float
    df: int
    p: float
    flags: tuple = field(default_factory=tuple)


def _as_keyed(values, side: str):
    if isinstance(values, dict):
        return list(values.keys()), [float(v) for v in values.values()]
    vals = [float(v) for v in values]
    return list(range(len(vals))), vals


def paired_t_test(a, b, condition_a: str = "a",
                  condition_b: str = "b") -> PairedComparison:
    """Two-sided paired t-test on matched samples.

    Dict inputs pair by key (order-insensitive); sequences pair by
    position. A zero-variance difference cannot produce a t statistic,
    so those cases collapse to p = 0 (flagged) or p = 1 by the sign of
    the mean difference.
    """
    keys_a, vals_a = _as_keyed(a, "a")
    keys_b, vals_b = _as_keyed(b, "b")
    if isinstance(a, dict) or isinstance(b, dict):
        if set(keys_a) != set(keys_b):
            raise ValueError(f"pairing keys differ: {sorted(set(keys_a) ^ set(keys_b))}")
        order = sorted(keys_a)
        map_a = dict(zip(keys_a, vals_a))
        map_b = dict(zip(keys_b, vals_b))
        keys = order
        d = [map_a[k] - map_b[k] for k in order]
    else:
        if len(vals_a) != len(vals_b):
            raise ValueError("paired samples differ in length")
        keys = keys_a
        d = [x - y for x, y in zip(vals_a, vals_b)]
    n = len(d)
    if n < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    mean = sum(d) / n
    var = sum((v - mean) ** 2 for v in d) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return PairedComparison(condition_a, condition_b, tuple(keys),
                                    tuple(d), 0.0, n - 1, 1.0)
        t = math.inf if mean > 0 else -math.inf
        return PairedComparison(condition_a, condition_b, tuple(keys),
                                tuple(d), t, n - 1, 0.0,
                                flags=("degenerate variance",))
    t = mean / math.sqrt(var / n)
    p = 2.0 * (1.0 - t_cdf(abs(t), n - 1))
    return PairedComparison(condition_a, condition_b, tuple(keys),
                            tuple(d), t, n - 1, min(p, 1.0))
