"""Trainable compound activation functions.

A compound activation mixes a base activation with extra sigmoid-shaped
components, each shifted, scaled, and weighted:

    f(x) = sum_k exp(a_k) * f_k(exp(w_k) * x + b_k) / sum_k exp(a_k)

Component 1 is the base activation, which fixes the output range; the
remaining components are the unit-interval activation (bounded sigmoids),
so they add local slope variation ("wiggles") without changing the range.
Exponentiated weights and scales keep every component increasing, hence
the compound stays strictly monotonic and invertible for all parameters.

A `Tca` value holds one independent parameter set per unit (vector
coordinate), stored as (units, K) arrays; a single-row bank broadcasts the
same parameters across all coordinates it is applied to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfRangeError
from .maxent import MaxEntKind, maxent_lambda, maxent_lambda_deriv, range_contains
from .rootfind import invert_monotone

__all__ = [
    "Tca",
    "tca_eval",
    "tca_deriv",
    "tca_invert",
    "tca_param_grads",
    "tca_neutral_init",
]

NEUTRAL_LOG_WEIGHT = -6.0  # extra components start at about 0.25% mix weight
TCA_BRACKET_LIMIT = 1e9    # inversion bracket cap; beyond this the
                           # parameters are considered pathological


@dataclass
class Tca:
    """Per-unit compound activation parameters.

    base: output-range-determining activation of component 1.
    log_weights, log_scales, biases: (units, K) arrays; the effective
    weight of component k is exp(log_weights[:, k]) and its input is
    exp(log_scales[:, k]) * x + biases[:, k].
    """

    base: MaxEntKind
    log_weights: np.ndarray
    log_scales: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        self.log_weights = np.asarray(self.log_weights, dtype=np.float64)
        self.log_scales = np.asarray(self.log_scales, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        shapes = {self.log_weights.shape, self.log_scales.shape,
                  self.biases.shape}
        if len(shapes) != 1 or self.log_weights.ndim != 2:
            raise ValueError("parameter arrays must share one (units, K) shape")
        if self.n_components < 1:
            raise ValueError("need at least one component")

    @property
    def n_units(self):
        return self.log_weights.shape[0]

    @property
    def n_components(self):
        return self.log_weights.shape[1]

    def copy(self):
        return Tca(self.base, self.log_weights.copy(),
                   self.log_scales.copy(), self.biases.copy())


def _component_args(t: Tca, x):
    """exp(w_k)*x + b_k, shape (..., units, K)."""
    x = np.asarray(x, dtype=np.float64)
    return np.exp(t.log_scales) * x[..., np.newaxis] + t.biases


def _component_values(t: Tca, args):
    vals = np.empty_like(args)
    vals[..., 0] = maxent_lambda(t.base, args[..., 0])
    if t.n_components > 1:
        vals[..., 1:] = maxent_lambda(MaxEntKind.TRUNC_EXPON, args[..., 1:])
    return vals


def _component_derivs(t: Tca, args):
    der = np.empty_like(args)
    der[..., 0] = maxent_lambda_deriv(t.base, args[..., 0])
    if t.n_components > 1:
        der[..., 1:] = maxent_lambda_deriv(MaxEntKind.TRUNC_EXPON,
                                           args[..., 1:])
    return der


def tca_eval(t: Tca, x):
    """Evaluate the compound activation elementwise.

    x has shape (..., units) matching the bank, or any shape when the bank
    has a single broadcast row.  Scalars work for single-unit banks.
    """
    weights = np.exp(t.log_weights)
    vals = _component_values(t, _component_args(t, x))
    out = (vals * weights).sum(axis=-1) / weights.sum(axis=-1)
    return out[0] if (np.ndim(x) == 0 and t.n_units == 1) else out


def tca_deriv(t: Tca, x):
    """First derivative df/dx; strictly positive for every x."""
    weights = np.exp(t.log_weights)
    der = _component_derivs(t, _component_args(t, x))
    scaled = weights * np.exp(t.log_scales)
    out = (der * scaled).sum(axis=-1) / weights.sum(axis=-1)
    return out[0] if (np.ndim(x) == 0 and t.n_units == 1) else out


def tca_param_grads(t: Tca, x):
    """Partial derivatives of f at x w.r.t. every parameter, plus df/dx.

    Returns (d_log_weights, d_log_scales, d_biases, d_x); the first three
    have shape (..., units, K), the last (..., units).
    """
    x = np.asarray(x, dtype=np.float64)
    args = _component_args(t, x)
    weights = np.exp(t.log_weights)
    wsum = weights.sum(axis=-1)
    vals = _component_values(t, args)
    der = _component_derivs(t, args)
    f = (vals * weights).sum(axis=-1) / wsum

    # d/da_k of a normalized mixture: weight times the component's
    # deviation from the mixture value
    d_log_w = weights * (vals - f[..., np.newaxis]) / wsum[..., np.newaxis]
    scaled = weights * np.exp(t.log_scales) / wsum[..., np.newaxis]
    d_bias = weights * der / wsum[..., np.newaxis]
    d_log_s = d_bias * np.exp(t.log_scales) * x[..., np.newaxis]
    d_x = (der * scaled).sum(axis=-1)
    return d_log_w, d_log_s, d_bias, d_x


def tca_invert(t: Tca, y, rtol=1e-12):
    """Solve f(x) = y elementwise; y must lie strictly inside the base range.

    Bracket by doubling expansion from 0, then bisection and Newton.
    Raises OutOfRangeError for y outside the open base range and
    NoConvergenceError when the bracket would pass |x| = 1e9, which signals
    pathological parameters rather than a bad target.
    """
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)) or not np.all(range_contains(t.base, y)):
        raise OutOfRangeError(
            f"inversion target outside the open {t.base.value} range")
    scalar = y.ndim == 0
    ybc = np.atleast_1d(y + 0.0)
    if t.n_units == 1:
        shape = ybc.shape
    else:
        # align y with the unit axis; tca_eval then applies each flat
        # element's own unit parameters by broadcasting
        shape = np.broadcast_shapes(ybc.shape, (t.n_units,))
        ybc = np.broadcast_to(ybc, shape)
    yflat = np.ravel(ybc)

    def f(xs):
        return np.ravel(tca_eval(t, xs.reshape(shape)))

    def fp(xs):
        return np.ravel(tca_deriv(t, xs.reshape(shape)))

    x = invert_monotone(f, yflat, fprime=fp, rtol=rtol,
                        expand_limit=TCA_BRACKET_LIMIT).reshape(shape)
    if scalar and x.size == 1:
        return x.reshape(())[()]
    return x


def tca_neutral_init(base: MaxEntKind, n_components: int, units: int = 1,
                     rng=0) -> Tca:
    """Bank initialized to act like the plain base activation.

    Component 1 gets unit weight, zero shift and log-scale; the extra
    sigmoid components get weight exp(-6) (about 0.25%, small enough that
    |f - f1| <= (K-1)*exp(-6)*(1+|f1|) everywhere, large enough that their
    gradients stay alive) and biases drawn uniformly from [-2, 2] so that
    otherwise identical components do not keep tied gradients forever.
    """
    if n_components < 1:
        raise ValueError("need at least one component")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    log_w = np.full((units, n_components), NEUTRAL_LOG_WEIGHT)
    log_w[:, 0] = 0.0
    log_s = np.zeros((units, n_components))
    b = np.zeros((units, n_components))
    if n_components > 1:
        b[:, 1:] = rng.uniform(-2.0, 2.0, size=(units, n_components - 1))
    return Tca(base, log_w, log_s, b)
