"""Maximum-entropy activation functions for the three canonical data ranges.

Each supported range (the real line, the nonnegative half-line, the unit
interval) has an associated strictly increasing activation that maps a
natural parameter to the conditional mean of the matching maximum-entropy
prior: identity for the real line, a truncated-Gaussian mean for the
half-line, and a truncated-exponential mean for the unit interval.  All
functions here are elementwise and accept scalars or arrays.
"""

from __future__ import annotations

import enum

import numpy as np
from scipy import special

from .errors import OutOfRangeError
from .rootfind import invert_monotone

__all__ = [
    "MaxEntKind",
    "gauss_pdf",
    "gauss_cdf",
    "maxent_lambda",
    "maxent_lambda_deriv",
    "maxent_lambda_inverse",
    "range_contains",
]

_INV_SQRT_2PI = 0.3989422804014327
_SQRT_2 = np.sqrt(2.0)
_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)

# branch switch points, chosen so each side is accurate past its tolerance
_TG_ERFCX_CUT = -8.0    # below: scaled-erfc form of the pdf/cdf ratio
_TG_SERIES_CUT = -100.0  # below: tail series avoids cancellation in 1 - a*r - r^2
_TED_SERIES_CUT = 1e-4  # inside: Taylor series around the removable 0/0
_TED_SATURATE = 45.0    # beyond: exp terms are below float64 resolution


class MaxEntKind(enum.Enum):
    """Selects the data range and its maximum-entropy activation."""

    LINEAR = "linear"            # range: all reals
    TRUNC_GAUSS = "trunc_gauss"  # range: (0, inf)
    TRUNC_EXPON = "trunc_expon"  # range: (0, 1)


def gauss_pdf(x):
    """Standard normal density exp(-x^2/2)/sqrt(2*pi)."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore"):
        return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def gauss_cdf(x):
    """Standard normal CDF, relatively accurate deep into the left tail."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * special.erfc(-x / _SQRT_2)


def _mills(a):
    """pdf/CDF ratio N(a)/Phi(a); erfcx form below the cut avoids 0/0."""
    deep = a < _TG_ERFCX_CUT
    safe = np.where(deep, 0.0, a)
    out = gauss_pdf(safe) / gauss_cdf(safe)
    if deep.any():
        out[deep] = _SQRT_2_OVER_PI / special.erfcx(-a[deep] / _SQRT_2)
    return out


def _lambda_tg(a):
    out = a + _mills(a)
    tail = a < _TG_SERIES_CUT
    if tail.any():
        at = a[tail]
        ia2 = 1.0 / (at * at)
        out[tail] = -(1.0 - (2.0 - 10.0 * ia2) * ia2) / at
    return out


def _lambda_tg_deriv(a):
    r = _mills(a)
    out = 1.0 - a * r - r * r
    tail = a < _TG_SERIES_CUT
    if tail.any():
        ia2 = 1.0 / (a[tail] * a[tail])
        out[tail] = ia2 * (1.0 - (6.0 - 50.0 * ia2) * ia2)
    return out


def _lambda_ted(a):
    out = np.empty_like(a)
    small = np.abs(a) < _TED_SERIES_CUT
    if small.any():
        s = a[small]
        out[small] = 0.5 + s / 12.0 - s * s * s / 720.0
    big = ~small
    if big.any():
        ab = np.abs(a[big])
        pos = 1.0 + 1.0 / np.expm1(np.minimum(ab, _TED_SATURATE)) - 1.0 / ab
        out[big] = np.where(a[big] > 0, pos, 1.0 - pos)
    return out


def _lambda_ted_deriv(a):
    out = np.empty_like(a)
    small = np.abs(a) < _TED_SERIES_CUT
    if small.any():
        s = a[small]
        out[small] = 1.0 / 12.0 - s * s / 240.0
    big = ~small
    if big.any():
        ab = np.abs(a[big])
        inv2 = 1.0 / (ab * ab)
        e = np.expm1(np.minimum(ab, _TED_SATURATE))
        out[big] = np.where(ab > _TED_SATURATE, inv2,
                            inv2 - (e + 1.0) / (e * e))
    return out


def _elementwise(kind, x, linear, tg, ted):
    x = np.asarray(x, dtype=np.float64)
    flat = np.atleast_1d(x).astype(np.float64, copy=True)
    if kind is MaxEntKind.LINEAR:
        out = linear(flat)
    elif kind is MaxEntKind.TRUNC_GAUSS:
        out = tg(flat)
    elif kind is MaxEntKind.TRUNC_EXPON:
        out = ted(flat)
    else:
        raise TypeError(f"not a MaxEntKind: {kind!r}")
    return out.reshape(x.shape) if x.ndim else out[0]


def maxent_lambda(kind, alpha):
    """Activation value for the given range kind.

    Linear: alpha.  Truncated Gaussian: alpha + N(alpha)/Phi(alpha), always
    positive.  Truncated exponential: in (0, 1), equal to 1/2 at alpha = 0.
    Strictly increasing in alpha for every kind.
    """
    return _elementwise(kind, alpha, lambda a: a, _lambda_tg, _lambda_ted)


def maxent_lambda_deriv(kind, alpha):
    """First derivative of maxent_lambda; positive everywhere."""
    return _elementwise(kind, alpha, np.ones_like,
                        _lambda_tg_deriv, _lambda_ted_deriv)


def range_contains(kind, y, *, strict=True):
    """True where y lies in kind's output range (open interior if strict)."""
    y = np.asarray(y, dtype=np.float64)
    if kind is MaxEntKind.LINEAR:
        return np.isfinite(y)
    if kind is MaxEntKind.TRUNC_GAUSS:
        return (y > 0.0) if strict else (y >= 0.0)
    if kind is MaxEntKind.TRUNC_EXPON:
        if strict:
            return (y > 0.0) & (y < 1.0)
        return (y >= 0.0) & (y <= 1.0)
    raise TypeError(f"not a MaxEntKind: {kind!r}")


def maxent_lambda_inverse(kind, y, rtol=1e-12):
    """Solve maxent_lambda(kind, x) = y; y must be strictly inside the range.

    Bisection after a doubling bracket search, finished with Newton steps.
    Raises OutOfRangeError when y is outside the open output range.
    """
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)) or not np.all(range_contains(kind, y)):
        raise OutOfRangeError(
            f"value outside the open output range of {kind.value}")
    if kind is MaxEntKind.LINEAR:
        return y + 0.0
    return invert_monotone(lambda x: maxent_lambda(kind, x), y,
                           fprime=lambda x: maxent_lambda_deriv(kind, x),
                           rtol=rtol)
