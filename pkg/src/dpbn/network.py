"""The back-projecting auto-encoder built from dimension-reducing layers.

Forward (encode): each layer applies its per-coordinate compound
activation to the layer input, then projects with W'.  The bottleneck is
the last linear output; nothing follows it.

Backward (decode): walk the layers in reverse.  For each layer, a saddle
solve lifts the current target back to a point in the layer-input range
(under the maximum-entropy prior of that range, fixed by the layer's
activation base), and inverting the compound activation turns that point
into the target for the layer below.  After the first layer's inversion
the result is the reconstruction.

Intermediate lifted targets are not guaranteed to be reachable (the prior
mean moves within the solution manifold), so decode carries per-layer
convergence flags; a failed solve contributes its best iterate and flips
the sample's success flag instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError
from .maxent import MaxEntKind
from .saddle import DEFAULT_OPTIONS, SolverOptions, solve_saddle_batch
from .tca import Tca, tca_eval, tca_invert

__all__ = [
    "LayerSpec",
    "DpbnNetwork",
    "EncodeTrace",
    "DecodeTrace",
    "encode",
    "decode",
    "decode_with_trace",
    "autoencode",
    "sampling_efficiency",
]


@dataclass
class LayerSpec:
    """One dimension-reducing stage: input activation bank, then W'.

    weights has shape (in_dim, out_dim) with out_dim <= in_dim; the
    activation bank holds one parameter row per input coordinate (or a
    single shared row).  The bank's base activation fixes the range the
    backward solve reconstructs into.
    """

    weights: np.ndarray
    input_tca: Tca

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ShapeMismatchError("weights must be 2-D")
        n, m = self.weights.shape
        if m > n:
            raise ShapeMismatchError(
                f"layer must not increase dimension ({n} -> {m})")
        if self.input_tca.n_units not in (1, n):
            raise ShapeMismatchError(
                f"activation bank has {self.input_tca.n_units} units, "
                f"layer input has {n}")

    @property
    def in_dim(self):
        return self.weights.shape[0]

    @property
    def out_dim(self):
        return self.weights.shape[1]

    @property
    def kind(self) -> MaxEntKind:
        return self.input_tca.base


@dataclass
class DpbnNetwork:
    """Ordered stack of layers; adjacent dimensions must chain."""

    layers: list

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        for lower, upper in zip(self.layers, self.layers[1:]):
            if lower.out_dim != upper.in_dim:
                raise ShapeMismatchError(
                    f"layer dims do not chain: {lower.out_dim} vs "
                    f"{upper.in_dim}")

    @property
    def dims(self):
        return [self.layers[0].in_dim] + [l.out_dim for l in self.layers]

    @property
    def in_dim(self):
        return self.layers[0].in_dim

    @property
    def bottleneck_dim(self):
        return self.layers[-1].out_dim


@dataclass
class EncodeTrace:
    """Forward-pass cache: activation outputs and linear outputs per layer."""

    tca_outputs: list = field(default_factory=list)    # u_l, (S, N_l)
    linear_outputs: list = field(default_factory=list)  # z_{l+1}, (S, N_{l+1})


@dataclass
class DecodeTrace:
    """Backward-pass cache, one entry per layer (network order).

    saddle[l] is the batched solve result at layer l (h, lifted mean,
    convergence); targets[l] is what the solve aimed at; inverted[l] is the
    activation inversion of the lifted mean (the reconstruction for l=0).
    """

    saddle: list = field(default_factory=list)
    targets: list = field(default_factory=list)
    inverted: list = field(default_factory=list)


_DECODE_CLIP = 1e8  # lifts are clamped into [f(-1e8), f(+1e8)] per unit


def _invertible_window(tca: Tca):
    """Elementwise bounds on inversion targets whose preimages stay well
    inside the bracket cap.  Best iterates of failed solves can park lifted
    values arbitrarily close to the range boundary (preimages off to
    infinity); clamping them here keeps decode total and bounds the
    blow-up a failed layer can feed to the layers below."""
    probe = np.full(tca.n_units, _DECODE_CLIP)
    return tca_eval(tca, -probe), tca_eval(tca, probe)


def _as_batch(x, dim, what):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != dim:
            raise ShapeMismatchError(f"{what} has length {x.shape[0]}, "
                                     f"expected {dim}")
        return x[None, :], True
    if x.ndim == 2:
        if x.shape[1] != dim:
            raise ShapeMismatchError(f"{what} has width {x.shape[1]}, "
                                     f"expected {dim}")
        return x, False
    raise ShapeMismatchError(f"{what} must be 1-D or 2-D")


def encode(net: DpbnNetwork, x):
    """Run the forward path; returns (bottleneck, trace).

    x may be one sample (in_dim,) or a batch (S, in_dim); the bottleneck
    and the trace arrays match.
    """
    xb, squeeze = _as_batch(x, net.in_dim, "input")
    if not np.all(np.isfinite(xb)):
        raise ValueError("input contains non-finite values")
    trace = EncodeTrace()
    cur = xb
    for layer in net.layers:
        u = tca_eval(layer.input_tca, cur)
        z = u @ layer.weights
        trace.tca_outputs.append(u)
        trace.linear_outputs.append(z)
        cur = z
    if squeeze:
        trace.tca_outputs = [a[0] for a in trace.tca_outputs]
        trace.linear_outputs = [a[0] for a in trace.linear_outputs]
        return cur[0], trace
    return cur, trace


def decode_with_trace(net: DpbnNetwork, y,
                      opts: SolverOptions = DEFAULT_OPTIONS):
    """Backward path on a batch (S, bottleneck); returns (x_hat, success,
    layer_converged, trace) with full per-layer intermediates."""
    yb = np.asarray(y, dtype=np.float64)
    trace = DecodeTrace()
    n_layers = len(net.layers)
    layer_converged = np.ones((yb.shape[0], n_layers), dtype=bool)
    target = yb
    for pos, layer in enumerate(reversed(net.layers)):
        li = n_layers - 1 - pos
        res = solve_saddle_batch(layer.weights, target, layer.kind, opts)
        # a failed solve still yields its best iterate; the sample is
        # flagged and reconstruction continues
        layer_converged[:, li] = res.converged
        lo, hi = _invertible_window(layer.input_tca)
        inverted = tca_invert(layer.input_tca, np.clip(res.x_hat, lo, hi))
        trace.saddle.append(res)
        trace.targets.append(target)
        trace.inverted.append(inverted)
        target = inverted
    trace.saddle.reverse()
    trace.targets.reverse()
    trace.inverted.reverse()
    success = layer_converged.all(axis=1)
    return target, success, layer_converged, trace


def decode(net: DpbnNetwork, y, opts: SolverOptions = DEFAULT_OPTIONS):
    """Reconstruct from a bottleneck value.

    Returns (x_hat, success, layer_converged).  success is False whenever
    any intermediate solve failed; the reconstruction is then built from
    best iterates rather than exact lifts.
    """
    yb, squeeze = _as_batch(y, net.bottleneck_dim, "bottleneck")
    x_hat, success, layer_converged, _ = decode_with_trace(net, yb, opts)
    if squeeze:
        return x_hat[0], bool(success[0]), layer_converged[0]
    return x_hat, success, layer_converged


def autoencode(net: DpbnNetwork, x, opts: SolverOptions = DEFAULT_OPTIONS):
    """encode then decode; returns (x_hat, success)."""
    y, _ = encode(net, x)
    x_hat, success, _ = decode(net, y, opts)
    return x_hat, success


def sampling_efficiency(net: DpbnNetwork, batch,
                        opts: SolverOptions = DEFAULT_OPTIONS) -> float:
    """Fraction of batch rows whose decode fully converged."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ShapeMismatchError("batch must be 2-D")
    _, success = autoencode(net, batch, opts)
    return float(np.mean(success)) if batch.shape[0] else 1.0
