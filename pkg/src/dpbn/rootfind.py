"""Safeguarded scalar root finding, vectorized over element arrays.

Used by the activation inverses: every function inverted here is strictly
monotonic increasing and defined on the whole real line, so a sign change
can always be bracketed by expanding probes away from zero.
"""

from __future__ import annotations

import numpy as np

from .errors import NoConvergenceError

_MAX_DOUBLINGS = 1100  # 2**1100 is past float64 range; loop exits long before
_N_BISECT = 4          # plain bisection steps before Newton is attempted


def invert_monotone(f, y, fprime=None, rtol=1e-12, expand_limit=None,
                    max_iter=80):
    """Solve f(x) = y elementwise for a strictly increasing f.

    Brackets each root by probing 0, +-1, +-2, +-4, ... (doubling away from
    zero), then refines with bisection and bracket-safeguarded Newton steps
    when `fprime` is given.  An element is finished once |f(x) - y| <=
    rtol*max(1,|y|) holds on two consecutive iterates, the residual reaches
    exactly zero, or a small-residual iterate admits no in-bracket Newton
    improvement; the iterate with the smallest residual seen is returned.

    f and fprime must accept a 1-D float array of the same length as y and
    evaluate elementwise (each element may carry its own parameters).

    Raises NoConvergenceError when a bracket would exceed `expand_limit`
    (default: the float64 range) or the iteration budget runs out.
    """
    y = np.asarray(y, dtype=np.float64)
    shape = y.shape
    y = np.ravel(y)
    n = y.size
    if n == 0:
        return np.zeros(shape)
    limit = np.inf if expand_limit is None else float(expand_limit)

    lo = np.zeros(n)
    hi = np.zeros(n)
    f0 = f(np.zeros(n))
    go_up = f0 < y
    go_dn = f0 > y
    # exact hits at zero keep the degenerate bracket [0, 0]

    prev = 0.0
    p = 1.0
    for _ in range(_MAX_DOUBLINGS):
        active = go_up | go_dn
        if not active.any():
            break
        if p > limit:
            raise NoConvergenceError(
                f"bracket expansion exceeded |x| = {limit:g} "
                f"for {int(active.sum())} element(s)")
        x = np.where(go_up, p, np.where(go_dn, -p, 0.0))
        fx = f(x)
        hit_up = go_up & (fx >= y)
        lo[hit_up] = prev
        hi[hit_up] = p
        go_up &= ~hit_up
        hit_dn = go_dn & (fx <= y)
        lo[hit_dn] = -p
        hi[hit_dn] = -prev
        go_dn &= ~hit_dn
        prev = p
        p *= 2.0
    else:
        raise NoConvergenceError("bracket expansion did not terminate")

    tol = rtol * np.maximum(1.0, np.abs(y))
    x = 0.5 * (lo + hi)
    x_best = x.copy()
    r_best = np.full(n, np.inf)
    done = np.zeros(n, dtype=bool)
    was_small = np.zeros(n, dtype=bool)
    for it in range(max_iter):
        fx = f(x)
        resid = np.abs(fx - y)
        better = resid < r_best
        x_best = np.where(better, x, x_best)
        r_best = np.where(better, resid, r_best)
        small = resid <= tol
        done |= (small & was_small) | (resid == 0.0)
        if done.all():
            break
        was_small = small
        below = fx < y
        lo = np.where(below & ~done, x, lo)
        hi = np.where(~below & ~done, x, hi)
        mid = 0.5 * (lo + hi)
        if fprime is not None and it >= _N_BISECT:
            d = fprime(x)
            with np.errstate(divide="ignore", invalid="ignore"):
                xn = x - (fx - y) / d
            bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
            # no in-bracket improvement from an already-small residual means
            # the iterate is at the limit of the arithmetic: accept it
            done |= small & bad
            xn = np.where(bad, mid, xn)
        else:
            xn = mid
        x = np.where(done, x, xn)
    else:
        if not done.all():
            raise NoConvergenceError(
                f"inversion did not converge for "
                f"{int((~done).sum())} element(s)")
    return x_best.reshape(shape)
