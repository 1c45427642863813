"""Conventional feed-forward auto-encoder baseline.

Encoder and decoder are mirrored dense stacks with the positive-half-line
activation after every layer except the final decoder output, which stays
linear because the targets live on the real line.  The decoder either
owns independent weights ("untied") or reuses the transposed encoder
matrices, each scaled by one trainable factor ("tied").  Trained by plain
backpropagation; shares the optimizer, config, and log format of the
back-projecting model so runs are directly comparable.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError
from .maxent import MaxEntKind, maxent_lambda, maxent_lambda_deriv
from .training import TrainConfig, _Optimizer, _orthonormal_columns, mse_loss

__all__ = [
    "AecNetwork",
    "init_aec",
    "aec_forward",
    "aec_gradients",
    "aec_train",
    "aec_parameter_count",
]

log = logging.getLogger(__name__)

_ACT = MaxEntKind.TRUNC_GAUSS


@dataclass
class AecNetwork:
    """Mirror-image dense auto-encoder.

    dims is the encoder chain (input first, code last).  Untied mode keeps
    dec_weights; tied mode keeps one dec_scales entry per decoder layer
    and builds the decoder matrix as scale * encoder_weight.T on the fly.
    """

    dims: list
    enc_weights: list
    enc_biases: list
    dec_biases: list
    dec_weights: list = None
    dec_scales: list = None

    @property
    def tied(self):
        return self.dec_weights is None

    @property
    def n_layers(self):
        return len(self.enc_weights)

    def decoder_matrix(self, j):
        """Weight matrix of decoder layer j (0 maps code -> next dim up)."""
        if self.tied:
            return self.dec_scales[j] * self.enc_weights[self.n_layers - 1
                                                         - j].T
        return self.dec_weights[j]


def init_aec(dims, tied, seed) -> AecNetwork:
    """Orthonormal-column weights, zero biases, unit tying scales."""
    rng = np.random.default_rng(seed)
    enc_w = [_orthonormal_columns(rng, dims[i], dims[i + 1])
             for i in range(len(dims) - 1)]
    enc_b = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]
    dec_b = [np.zeros(dims[len(dims) - 2 - j])
             for j in range(len(dims) - 1)]
    if tied:
        return AecNetwork(list(dims), enc_w, enc_b, dec_b,
                          dec_scales=[np.ones(()) for _ in enc_w])
    # decoder layers grow the dimension, so orthonormality goes on the rows
    dec_w = [np.ascontiguousarray(
                 _orthonormal_columns(rng, dims[len(dims) - 2 - j],
                                      dims[len(dims) - 1 - j]).T)
             for j in range(len(dims) - 1)]
    return AecNetwork(list(dims), enc_w, enc_b, dec_b, dec_weights=dec_w)


def aec_parameter_count(net: AecNetwork) -> int:
    total = sum(w.size for w in net.enc_weights)
    total += sum(b.size for b in net.enc_biases)
    total += sum(b.size for b in net.dec_biases)
    if net.tied:
        total += len(net.dec_scales)
    else:
        total += sum(w.size for w in net.dec_weights)
    return total


@dataclass
class _ForwardCache:
    enc_inputs: list = field(default_factory=list)
    enc_pre: list = field(default_factory=list)
    dec_inputs: list = field(default_factory=list)
    dec_pre: list = field(default_factory=list)


def aec_forward(net: AecNetwork, x):
    """Full round trip; returns (x_hat, cache of pre-activations)."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    a = np.atleast_2d(x)
    if a.shape[1] != net.dims[0]:
        raise ShapeMismatchError(
            f"input width {a.shape[1]}, expected {net.dims[0]}")
    cache = _ForwardCache()
    for w, b in zip(net.enc_weights, net.enc_biases):
        cache.enc_inputs.append(a)
        pre = a @ w + b
        cache.enc_pre.append(pre)
        a = maxent_lambda(_ACT, pre)
    last = net.n_layers - 1
    for j in range(net.n_layers):
        cache.dec_inputs.append(a)
        pre = a @ net.decoder_matrix(j) + net.dec_biases[j]
        cache.dec_pre.append(pre)
        a = pre if j == last else maxent_lambda(_ACT, pre)
    return (a[0], cache) if squeeze else (a, cache)


def _parameters(net: AecNetwork):
    out = [(w, False) for w in net.enc_weights]
    out += [(b, False) for b in net.enc_biases]
    out += [(b, False) for b in net.dec_biases]
    if net.tied:
        out += [(s, False) for s in net.dec_scales]
    else:
        out += [(w, False) for w in net.dec_weights]
    return out


def aec_gradients(net: AecNetwork, x_batch, cfg: TrainConfig):
    """Backprop gradients of the batch MSE; returns (grad list aligned
    with the parameter order, loss).  Weight decay hits matrices (and
    tying scales), not biases."""
    x_batch = np.asarray(x_batch, dtype=np.float64)
    x_hat, cache = aec_forward(net, x_batch)
    s, n0 = x_batch.shape
    loss = mse_loss(x_hat, x_batch)

    d_enc_w = [np.zeros_like(w) for w in net.enc_weights]
    d_enc_b = [np.zeros_like(b) for b in net.enc_biases]
    d_dec_b = [np.zeros_like(b) for b in net.dec_biases]
    d_dec_w = (None if net.tied
               else [np.zeros_like(w) for w in net.dec_weights])
    d_scales = ([np.zeros(()) for _ in net.dec_scales] if net.tied
                else None)

    c = 2.0 * (x_hat - x_batch) / (s * n0)
    last = net.n_layers - 1
    for j in range(last, -1, -1):
        cpre = c if j == last else c * maxent_lambda_deriv(
            _ACT, cache.dec_pre[j])
        dv = cache.dec_inputs[j].T @ cpre
        d_dec_b[j] += cpre.sum(axis=0)
        if net.tied:
            i = net.n_layers - 1 - j
            d_scales[j] += np.sum(dv * net.enc_weights[i].T)
            d_enc_w[i] += net.dec_scales[j] * dv.T
        else:
            d_dec_w[j] += dv
        c = cpre @ net.decoder_matrix(j).T
    for i in range(net.n_layers - 1, -1, -1):
        cpre = c * maxent_lambda_deriv(_ACT, cache.enc_pre[i])
        d_enc_w[i] += cache.enc_inputs[i].T @ cpre
        d_enc_b[i] += cpre.sum(axis=0)
        c = cpre @ net.enc_weights[i].T

    if cfg.weight_decay:
        for i, w in enumerate(net.enc_weights):
            d_enc_w[i] += cfg.weight_decay * w
        if net.tied:
            for j, sc in enumerate(net.dec_scales):
                d_scales[j] += cfg.weight_decay * sc
        else:
            for j, w in enumerate(net.dec_weights):
                d_dec_w[j] += cfg.weight_decay * w

    grads = d_enc_w + d_enc_b + d_dec_b + (d_scales if net.tied else d_dec_w)
    return grads, loss


def aec_finite_diff_check(net: AecNetwork, x_batch, eps=1e-6) -> float:
    """Worst relative error of aec_gradients against central differences."""
    cfg = TrainConfig(weight_decay=0.0, epochs=0)
    analytic, _ = aec_gradients(net, x_batch, cfg)
    worst = 0.0
    for (param, _), ga in zip(_parameters(net), analytic):
        ga = np.asarray(ga)
        for idx in np.ndindex(param.shape):
            orig = param[idx]
            param[idx] = orig + eps
            up = mse_loss(aec_forward(net, x_batch)[0], x_batch)
            param[idx] = orig - eps
            dn = mse_loss(aec_forward(net, x_batch)[0], x_batch)
            param[idx] = orig
            gf = (up - dn) / (2 * eps)
            worst = max(worst, abs(gf - ga[idx])
                        / max(1.0, abs(gf), abs(ga[idx])))
    return worst


def aec_train(net: AecNetwork, train, test, cfg: TrainConfig, augment=None):
    """Minibatch training; same record/log structure as the main model.

    The efficiency column is identically 1: a feed-forward decoder cannot
    fail to produce a reconstruction.
    """
    train = np.asarray(train, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    opt = _Optimizer(cfg, _parameters(net))
    start = time.time()

    def record(epoch):
        return {"epoch": epoch,
                "train_mse": mse_loss(aec_forward(net, train)[0], train),
                "test_mse": mse_loss(aec_forward(net, test)[0], test),
                "efficiency": 1.0,
                "wall_seconds": time.time() - start}

    records = [record(0)]
    n = train.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        epoch_data = augment(train, rng) if augment is not None else train
        order = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            batch = epoch_data[order[lo:lo + cfg.batch_size]]
            grads, loss = aec_gradients(net, batch, cfg)
            if np.isfinite(loss):
                opt.step(grads)
        rec = record(epoch)
        records.append(rec)
        log.info("aec epoch %d: train_mse=%.6g test_mse=%.6g", epoch,
                 rec["train_mse"], rec["test_mse"])
    return records
