"""Training: reconstruction-error gradients through the full round trip.

The loss is the per-coordinate mean squared reconstruction error.  Its
gradient is accumulated in reverse through both passes:

* decode side: at each saddle solve the solution h is an implicit function
  of the target and the weights, so the adjoint is obtained from one extra
  solve against the (already factored) Jacobian; at each activation
  inversion x = f^-1(y) the adjoint uses dx/dy = 1/f'(x) and pushes
  -df/dtheta(x)/f'(x) into the activation parameters;
* encode side: ordinary reverse-mode through the activation evaluations
  and projections.

Samples whose decode failed are either dropped from the batch gradient
(policy "skip") or differentiated through their best iterates (policy
"best-iterate-gradient").
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError
from .maxent import MaxEntKind, maxent_lambda_deriv
from .network import (
    DpbnNetwork,
    LayerSpec,
    _invertible_window,
    decode_with_trace,
    encode,
)
from .saddle import SolverOptions, _chol_solve, batch_jacobian_factor
from .tca import tca_deriv, tca_neutral_init, tca_param_grads

__all__ = [
    "TrainConfig",
    "GradientSet",
    "mse_loss",
    "init_network",
    "network_parameters",
    "backward_gradients",
    "finite_diff_check",
    "evaluate",
    "fit",
    "write_training_log",
    "LOG_COLUMNS",
    "TRAIN_SOLVER",
    "CHECK_SOLVER",
]

log = logging.getLogger(__name__)

FAILURE_POLICIES = ("skip", "best-iterate-gradient")
OPTIMIZERS = ("adam", "sgd")
LOG_COLUMNS = ("epoch", "train_mse", "test_mse", "efficiency",
               "wall_seconds")

# evaluation/backprop want tighter solves than the 1e-10 default so that
# gradient checks are not dominated by solver noise
TRAIN_SOLVER = SolverOptions(tol=1e-12, max_iter=150)
CHECK_SOLVER = SolverOptions(tol=5e-14, max_iter=250)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 288
    weight_decay: float = 0.0
    seed: int = 0
    failure_policy: str = "skip"
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    # activation parameters move on a smaller step: their effect on the
    # loss is weak and highly non-linear
    tca_lr_scale: float = 0.1

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.failure_policy not in FAILURE_POLICIES:
            raise ValueError(f"failure_policy must be one of "
                             f"{FAILURE_POLICIES}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")


@dataclass
class GradientSet:
    """Per-parameter loss gradients, shapes mirroring the network."""

    d_weights: list = field(default_factory=list)
    d_tca_log_weights: list = field(default_factory=list)
    d_tca_log_scales: list = field(default_factory=list)
    d_tca_biases: list = field(default_factory=list)

    @classmethod
    def zeros_like(cls, net: DpbnNetwork):
        g = cls()
        for layer in net.layers:
            g.d_weights.append(np.zeros_like(layer.weights))
            t = layer.input_tca
            g.d_tca_log_weights.append(np.zeros_like(t.log_weights))
            g.d_tca_log_scales.append(np.zeros_like(t.log_scales))
            g.d_tca_biases.append(np.zeros_like(t.biases))
        return g

    def arrays(self):
        """Flat list aligned with network_parameters(net)."""
        out = []
        for i in range(len(self.d_weights)):
            out += [self.d_weights[i], self.d_tca_log_weights[i],
                    self.d_tca_log_scales[i], self.d_tca_biases[i]]
        return out


def network_parameters(net: DpbnNetwork):
    """Flat list of (array, is_tca_param) in a fixed traversal order."""
    out = []
    for layer in net.layers:
        t = layer.input_tca
        out += [(layer.weights, False), (t.log_weights, True),
                (t.log_scales, True), (t.biases, True)]
    return out


def mse_loss(x_hat, x) -> float:
    """Mean over all samples and coordinates of the squared error."""
    x_hat = np.asarray(x_hat, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x_hat.shape != x.shape:
        raise ShapeMismatchError(
            f"shape {x_hat.shape} vs {x.shape}")
    d = x_hat - x
    return float(np.mean(d * d))


def _orthonormal_columns(rng, n, m, center=False):
    a = rng.normal(0.0, 1.0 / np.sqrt(n), (n, m))
    if center:
        a -= a.mean(axis=0, keepdims=True)
    q, r = np.linalg.qr(a)
    # QR keeps the columns inside the centered subspace, so the zero
    # column sums survive the orthonormalization
    return q * np.sign(np.diag(r))


def init_network(dims, n_components, seed, data=None,
                 tca_shared=False) -> DpbnNetwork:
    """Fresh network: orthonormal-column weights, neutral activations.

    dims is the full dimension chain (input first); n_components gives the
    component count of each layer's input activation.  The first layer's
    activation has the all-reals base (inputs live on the real line), the
    rest the positive-half-line base.

    Hidden-layer weight matrices get zero column sums before the
    orthonormalization.  With the rows' centroid at the origin their
    positive span is the whole target space, so every backward solve at a
    freshly initialized hidden layer has a solution; plain random
    orthonormal weights can start with a feasible cone that misses every
    lifted target, which leaves nothing to train on.

    When `data` (a training matrix) is given, the input activation's base
    bias is set to minus the per-coordinate mean.  That centers the first
    projection, which keeps the hidden activations in their responsive
    region and the backward solves well inside the feasible cone; decode
    restores the offset automatically when the input activation is
    inverted.
    """
    if len(n_components) != len(dims) - 1:
        raise ValueError("need one component count per layer")
    rng = np.random.default_rng(seed)
    layers = []
    for i in range(len(dims) - 1):
        base = MaxEntKind.LINEAR if i == 0 else MaxEntKind.TRUNC_GAUSS
        units = 1 if tca_shared else dims[i]
        t = tca_neutral_init(base, n_components[i], units=units, rng=rng)
        w = _orthonormal_columns(rng, dims[i], dims[i + 1], center=i >= 1)
        layers.append(LayerSpec(w, t))
    if data is not None:
        data = np.asarray(data, dtype=np.float64)
        t0 = layers[0].input_tca
        if t0.n_units == data.shape[1]:
            t0.biases[:, 0] = -data.mean(axis=0)
        else:
            t0.biases[:, 0] = -data.mean()
    return DpbnNetwork(layers)


def _reduce_tca_grad(bank, grad):
    """Sum per-unit gradients into a shared bank's single row."""
    if bank.n_units == 1 and grad.shape[0] != 1:
        return grad.sum(axis=0, keepdims=True)
    return grad


def backward_gradients(net: DpbnNetwork, x_batch, cfg: TrainConfig,
                       opts: SolverOptions = TRAIN_SOLVER):
    """Loss gradients on one batch; returns (GradientSet, loss, efficiency).

    loss averages the squared error over the samples the gradient uses
    (all of them under best-iterate-gradient, converged ones under skip);
    efficiency is the fraction of fully converged samples either way.
    Weight decay contributes cfg.weight_decay * W to the weight gradients
    and nothing to the activation gradients.
    """
    x_batch = np.asarray(x_batch, dtype=np.float64)
    if x_batch.ndim != 2 or x_batch.shape[1] != net.in_dim:
        raise ShapeMismatchError(
            f"batch {x_batch.shape} does not match input dim {net.in_dim}")
    s = x_batch.shape[0]
    n_layers = len(net.layers)

    y, etrace = encode(net, x_batch)
    x_hat, success, _, dtrace = decode_with_trace(net, y, opts)
    efficiency = float(np.mean(success)) if s else 1.0

    grads = GradientSet.zeros_like(net)
    if cfg.failure_policy == "skip":
        sel = success
    else:
        sel = np.ones(s, dtype=bool)
    n_eff = int(sel.sum())
    if n_eff == 0:
        for i, layer in enumerate(net.layers):
            grads.d_weights[i] += cfg.weight_decay * layer.weights
        return grads, float("nan"), efficiency

    diff = np.where(sel[:, None], x_hat - x_batch, 0.0)
    loss = float(np.sum(diff * diff) / (n_eff * net.in_dim))
    c = 2.0 * diff / (n_eff * net.in_dim)

    # ----- decode side, walking from the reconstruction back to the code
    for li in range(n_layers):
        layer = net.layers[li]
        bank = layer.input_tca
        sres = dtrace.saddle[li]
        x_inv = dtrace.inverted[li]
        lifted = sres.x_hat

        # inversion node: x = f^-1(clip(v)); clipped coordinates are flat
        lo, hi = _invertible_window(bank)
        inside = (lifted > lo) & (lifted < hi)
        fprime = tca_deriv(bank, x_inv)
        cv = np.where(inside, c / fprime, 0.0)
        d_lw, d_ls, d_b, _ = tca_param_grads(bank, x_inv)
        grads.d_tca_log_weights[li] -= _reduce_tca_grad(
            bank, np.einsum("su,suk->uk", cv, d_lw))
        grads.d_tca_log_scales[li] -= _reduce_tca_grad(
            bank, np.einsum("su,suk->uk", cv, d_ls))
        grads.d_tca_biases[li] -= _reduce_tca_grad(
            bank, np.einsum("su,suk->uk", cv, d_b))

        # saddle node: differentiate h through W' lambda(W h) = t
        w = layer.weights
        d, chol = batch_jacobian_factor(w, sres.h, layer.kind, opts.ridge)
        dcv = d * cv
        m = _chol_solve(chol, dcv @ w)
        grads.d_weights[li] += ((dcv - d * (m @ w.T)).T @ sres.h
                                - lifted.T @ m)
        c = m

    # ----- encode side, from the code back to the input
    for li in range(n_layers - 1, -1, -1):
        layer = net.layers[li]
        bank = layer.input_tca
        u_prev = etrace.tca_outputs[li]
        grads.d_weights[li] += u_prev.T @ c
        cu = c @ layer.weights.T
        inp = x_batch if li == 0 else etrace.linear_outputs[li - 1]
        d_lw, d_ls, d_b, d_x = tca_param_grads(bank, inp)
        grads.d_tca_log_weights[li] += _reduce_tca_grad(
            bank, np.einsum("su,suk->uk", cu, d_lw))
        grads.d_tca_log_scales[li] += _reduce_tca_grad(
            bank, np.einsum("su,suk->uk", cu, d_ls))
        grads.d_tca_biases[li] += _reduce_tca_grad(
            bank, np.einsum("su,suk->uk", cu, d_b))
        if li > 0:
            c = cu * d_x

    if cfg.weight_decay:
        for i, layer in enumerate(net.layers):
            grads.d_weights[i] += cfg.weight_decay * layer.weights

    return grads, loss, efficiency


def finite_diff_check(net: DpbnNetwork, x_batch, eps=1e-5,
                      opts: SolverOptions = CHECK_SOLVER) -> float:
    """Worst relative disagreement between the analytic batch gradient and
    central finite differences, over every parameter in the network.

    Uses the all-samples loss (decay off), so it probes the reconstruction
    gradient itself.  Meant for small nets; cost is two full round trips
    per parameter.
    """
    cfg = TrainConfig(failure_policy="best-iterate-gradient",
                      weight_decay=0.0, epochs=0)
    grads, _, _ = backward_gradients(net, x_batch, cfg, opts)
    analytic = grads.arrays()

    def loss_now():
        y, _ = encode(net, x_batch)
        x_hat, _, _, _ = decode_with_trace(net, y, opts)
        return mse_loss(x_hat, x_batch)

    worst = 0.0
    for (param, _), ga in zip(network_parameters(net), analytic):
        for idx in np.ndindex(param.shape):
            orig = param[idx]
            param[idx] = orig + eps
            up = loss_now()
            param[idx] = orig - eps
            dn = loss_now()
            param[idx] = orig
            gf = (up - dn) / (2.0 * eps)
            err = abs(gf - ga[idx]) / max(1.0, abs(gf), abs(ga[idx]))
            worst = max(worst, err)
    return worst


def evaluate(net: DpbnNetwork, x, opts: SolverOptions = TRAIN_SOLVER):
    """(reconstruction MSE over all samples, sampling efficiency)."""
    y, _ = encode(net, x)
    x_hat, success, _, _ = decode_with_trace(net, y, opts)
    return mse_loss(x_hat, x), float(np.mean(success))


class _Optimizer:
    def __init__(self, cfg: TrainConfig, params):
        self.cfg = cfg
        self.lrs = [cfg.learning_rate * (cfg.tca_lr_scale if is_tca else 1.0)
                    for _, is_tca in params]
        self.params = [p for p, _ in params]
        if cfg.optimizer == "adam":
            self.m = [np.zeros_like(p) for p in self.params]
            self.v = [np.zeros_like(p) for p in self.params]
            self.t = 0

    def step(self, grad_arrays):
        cfg = self.cfg
        if cfg.optimizer == "sgd":
            for p, g, lr in zip(self.params, grad_arrays, self.lrs):
                p -= lr * g
            return
        self.t += 1
        b1, b2 = cfg.adam_beta1, cfg.adam_beta2
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for p, g, lr, m, v in zip(self.params, grad_arrays, self.lrs,
                                  self.m, self.v):
            m += (1.0 - b1) * (g - m)
            v += (1.0 - b2) * (g * g - v)
            p -= lr * (m / corr1) / (np.sqrt(v / corr2) + cfg.adam_eps)


def fit(net: DpbnNetwork, train, test, cfg: TrainConfig, augment=None,
        opts: SolverOptions = TRAIN_SOLVER):
    """Minibatch training loop; returns one record per epoch plus the
    initial evaluation (epoch 0, parameters untouched).

    augment, when given, is called as augment(train_matrix, rng) once per
    epoch and feeds the optimizer; evaluation always uses the clean data.
    Deterministic for a fixed cfg.seed.
    """
    train = np.asarray(train, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    opt = _Optimizer(cfg, network_parameters(net))
    start = time.time()

    def record(epoch):
        train_mse, _ = evaluate(net, train, opts)
        test_mse, test_eff = evaluate(net, test, opts)
        return {"epoch": epoch, "train_mse": train_mse,
                "test_mse": test_mse, "efficiency": test_eff,
                "wall_seconds": time.time() - start}

    records = [record(0)]
    n = train.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        epoch_data = augment(train, rng) if augment is not None else train
        order = rng.permutation(n)
        skipped = 0
        for lo in range(0, n, cfg.batch_size):
            batch = epoch_data[order[lo:lo + cfg.batch_size]]
            grads, loss, eff = backward_gradients(net, batch, cfg, opts)
            skipped += int(round((1.0 - eff) * batch.shape[0]))
            if np.isfinite(loss):
                opt.step(grads.arrays())
        rec = record(epoch)
        rec["skipped_samples"] = skipped
        records.append(rec)
        log.info("epoch %d: train_mse=%.6g test_mse=%.6g efficiency=%.4f "
                 "skipped=%d", epoch, rec["train_mse"], rec["test_mse"],
                 rec["efficiency"], skipped)
    return records


def write_training_log(records, path, header_lines=()):
    """CSV with the fixed column set; header comment lines start with '#'."""
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(LOG_COLUMNS) + "\n")
        for rec in records:
            fh.write("%d,%.17g,%.17g,%.17g,%.6f\n" % tuple(
                rec[c] for c in LOG_COLUMNS))
