"""Command-line surface: train, eval, reconstruct, gradcheck.

Batch-oriented; every command is deterministic given the config seed.
Exit codes are part of the contract:

    train:       1 config error, 2 data error, 3 diverged (NaN loss)
    eval:        1 bad model file
    reconstruct: 1 bad model file, 2 I/O error
    gradcheck:   0 iff the max relative gradient error is within 1e-4

The DPBN_THREADS environment variable caps the linear-algebra worker
count; it must take effect before the numeric libraries load, which is
why the heavy imports happen inside main().
"""

from __future__ import annotations

import argparse
import os
import sys

_EXIT_OK = 0


def _cap_threads():
    cap = os.environ.get("DPBN_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, cap)


def _build_parser():
    p = argparse.ArgumentParser(
        prog="dpbn",
        description="Back-projecting auto-encoder: training and evaluation")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="preprocess data, train, save model+log")
    t.add_argument("--config", required=True)
    t.add_argument("--model", help="override output model path")
    t.add_argument("--out", help="directory prefix for outputs")
    t.add_argument("--seed", type=int, help="override config seed")

    e = sub.add_parser("eval", help="report train/test MSE and efficiency")
    e.add_argument("--config", required=True)
    e.add_argument("--model", required=True)
    e.add_argument("--seed", type=int)

    r = sub.add_parser("reconstruct",
                       help="export original/reconstruction image pairs")
    r.add_argument("--config", required=True)
    r.add_argument("--model", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--count", type=int, default=0,
                   help="limit exported samples (0 = all)")

    g = sub.add_parser("gradcheck",
                       help="finite-difference check on the canonical net")
    g.add_argument("--config", help=argparse.SUPPRESS)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--linear", action="store_true",
                   help="all-linear variant (expects error <= 1e-8)")
    g.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    return p


def _load_run_config(path, seed_override):
    from .config import load_config
    cfg = load_config(path)
    if seed_override is not None:
        cfg.seed = seed_override
        cfg.training.seed = seed_override
    return cfg


def _prepare_data(cfg):
    """IDX -> subset -> dither -> gaussianify, for train and test."""
    from . import data as D
    train_raw = D.load_idx(cfg.data.train_images, cfg.data.train_labels)
    test_raw = D.load_idx(cfg.data.test_images, cfg.data.test_labels)
    train = D.select_subset(train_raw, cfg.data.classes, cfg.data.per_class,
                            seed=cfg.seed)
    test = D.select_classes(test_raw, cfg.data.classes)
    train = D.gaussianify(D.dither(train, cfg.data.dither_scale,
                                   seed=cfg.seed + 1))
    test = D.gaussianify(D.dither(test, cfg.data.dither_scale,
                                  seed=cfg.seed + 2))
    if cfg.data.cache_dir:
        os.makedirs(cfg.data.cache_dir, exist_ok=True)
        D.save_cache(train, os.path.join(cfg.data.cache_dir, "train.dpbd"))
        D.save_cache(test, os.path.join(cfg.data.cache_dir, "test.dpbd"))
    return train, test


def _augmenter(cfg, shape):
    if cfg.data.shift_augment <= 0:
        return None
    from .data import fractional_roll
    amount = cfg.data.shift_augment

    def augment(x, rng):
        shifts = rng.uniform(-amount, amount, size=(x.shape[0], 2))
        return fractional_roll(x, shape, shifts)

    return augment


def _out_path(args, path):
    if getattr(args, "out", None):
        os.makedirs(args.out, exist_ok=True)
        return os.path.join(args.out, os.path.basename(path))
    return path


def cmd_train(args) -> int:
    import numpy as np

    from . import baseline, modelio, training
    from .config import ConfigError, config_hash
    from .errors import DataError, ShapeMismatchError

    try:
        cfg = _load_run_config(args.config, args.seed)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    try:
        train, test = _prepare_data(cfg)
    except (DataError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2

    dims = [train.samples.shape[1]] + list(cfg.network.dims)
    augment = _augmenter(cfg, train.shape)
    try:
        if cfg.model == "dpbn":
            net = training.init_network(dims, cfg.network.tca_components,
                                        seed=cfg.seed + 3,
                                        data=train.samples,
                                        tca_shared=cfg.network.tca_shared)
            records = training.fit(net, train.samples, test.samples,
                                   cfg.training, augment=augment)
        else:
            net = baseline.init_aec(dims, cfg.network.tied, seed=cfg.seed + 3)
            records = baseline.aec_train(net, train.samples, test.samples,
                                         cfg.training, augment=augment)
    except ShapeMismatchError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1

    model_path = args.model or _out_path(args, cfg.output.model)
    log_path = _out_path(args, cfg.output.log)
    header = [f"config_hash={config_hash(cfg)}",
              f"seed={cfg.seed}",
              f"model={cfg.model}",
              "mse=per-coordinate mean over all samples; "
              "efficiency=test-set decode success rate"]
    modelio.save_model(net, model_path)
    training.write_training_log(records, log_path, header_lines=header)
    print(f"model: {model_path}")
    print(f"log:   {log_path}")
    if not np.isfinite(records[-1]["train_mse"]):
        print("training diverged (non-finite loss)", file=sys.stderr)
        return 3
    return _EXIT_OK


def _model_metrics(net, train, test):
    from . import baseline, training
    from .network import DpbnNetwork

    if isinstance(net, DpbnNetwork):
        mse_train, _ = training.evaluate(net, train.samples)
        mse_test, eff = training.evaluate(net, test.samples)
    else:
        mse_train = training.mse_loss(
            baseline.aec_forward(net, train.samples)[0], train.samples)
        mse_test = training.mse_loss(
            baseline.aec_forward(net, test.samples)[0], test.samples)
        eff = 1.0
    return mse_train, mse_test, eff


def cmd_eval(args) -> int:
    from .config import ConfigError
    from .errors import BadModelFileError, DataError
    from .modelio import load_model

    try:
        net = load_model(args.model)
    except (BadModelFileError, OSError) as e:
        print(f"bad model file: {e}", file=sys.stderr)
        return 1
    try:
        cfg = _load_run_config(args.config, args.seed)
        train, test = _prepare_data(cfg)
    except (ConfigError, DataError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    mse_train, mse_test, eff = _model_metrics(net, train, test)
    print(f"mse_train={mse_train:.17g} mse_test={mse_test:.17g} "
          f"efficiency={eff:.17g}")
    return _EXIT_OK


def _write_pgm(path, img):
    """8-bit binary PGM."""
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(img.tobytes())


def cmd_reconstruct(args) -> int:
    import numpy as np

    from .config import ConfigError
    from .data import sigmoid
    from .errors import BadModelFileError, DataError
    from .modelio import load_model
    from .network import DpbnNetwork, decode, encode

    try:
        net = load_model(args.model)
    except (BadModelFileError, OSError) as e:
        print(f"bad model file: {e}", file=sys.stderr)
        return 1
    try:
        cfg = _load_run_config(args.config, args.seed)
        _, test = _prepare_data(cfg)
    except (ConfigError, DataError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    x = test.samples
    if args.count:
        x = x[:args.count]
    labels = test.labels[:x.shape[0]]
    if isinstance(net, DpbnNetwork):
        y, _ = encode(net, x)
        x_hat, success, _ = decode(net, y)
    else:
        from .baseline import aec_forward
        x_hat, _ = aec_forward(net, x)
        success = np.ones(x.shape[0], dtype=bool)

    rows, cols = test.shape

    def to_pixels(mat):
        return np.clip(np.round(sigmoid(mat) * 255.0), 0,
                       255).astype(np.uint8)

    try:
        os.makedirs(args.out, exist_ok=True)
        orig_pix = to_pixels(x)
        recon_pix = to_pixels(x_hat)
        per_sample = np.mean((x_hat - x) ** 2, axis=1)
        csv_path = os.path.join(args.out, "reconstruction.csv")
        with open(csv_path, "w") as fh:
            fh.write("index,label,mse,success\n")
            for i in range(x.shape[0]):
                _write_pgm(os.path.join(args.out, f"orig_{i:04d}.pgm"),
                           orig_pix[i].reshape(rows, cols))
                _write_pgm(os.path.join(args.out, f"recon_{i:04d}.pgm"),
                           recon_pix[i].reshape(rows, cols))
                fh.write(f"{i},{labels[i]},{per_sample[i]:.17g},"
                         f"{int(success[i])}\n")
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {x.shape[0]} pairs to {args.out}")
    return _EXIT_OK


GRADCHECK_THRESHOLD = 1e-4


def cmd_gradcheck(args) -> int:
    import numpy as np

    from . import training
    from .maxent import MaxEntKind
    from .network import DpbnNetwork, LayerSpec
    from .tca import tca_neutral_init

    rng = np.random.default_rng(args.seed)
    dims = [12, 8, 5, 3]
    if args.linear:
        layers = []
        for i in range(3):
            t = tca_neutral_init(MaxEntKind.LINEAR, 1, units=dims[i],
                                 rng=rng)
            layers.append(LayerSpec(
                training._orthonormal_columns(rng, dims[i], dims[i + 1]), t))
        net = DpbnNetwork(layers)
    else:
        net = training.init_network(dims, [2, 3, 3], seed=args.seed)
    x = rng.normal(0.0, 1.5, (6, 12))

    if args.corrupt:
        # negative-control fixture: taint one gradient entry
        original = training.backward_gradients

        def tainted(*a, **kw):
            grads, loss, eff = original(*a, **kw)
            grads.d_weights[0][0, 0] += 0.5
            return grads, loss, eff

        training.backward_gradients = tainted
        try:
            err = training.finite_diff_check(net, x)
        finally:
            training.backward_gradients = original
    else:
        err = training.finite_diff_check(net, x)

    print(f"max_rel_err={err:.6e}")
    return _EXIT_OK if err <= GRADCHECK_THRESHOLD else 1


def main(argv=None) -> int:
    _cap_threads()
    args = _build_parser().parse_args(argv)
    handler = {"train": cmd_train, "eval": cmd_eval,
               "reconstruct": cmd_reconstruct,
               "gradcheck": cmd_gradcheck}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
