"""Calibration driver: tag ks lr wd augment epochs seed [tca_lr_scale]."""
import json
import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")
from dpbn.data import fractional_roll
from dpbn.training import TrainConfig, fit, init_network

tag, ks, lr, wd, aug, epochs, seed = sys.argv[1:8]
tca_lr_scale = float(sys.argv[8]) if len(sys.argv) > 8 else 0.1
ks = [int(v) for v in ks.split(",")]
Xtr = np.load("/root/pkg/.calib/train.npy")
Xte = np.load("/root/pkg/.calib/test.npy")

net = init_network([784, 64, 32, 16], ks, seed=int(seed), data=Xtr)
marker = max(float(np.max(np.abs(l.weights.sum(0)))) for l in net.layers[1:])
print(tag, "hidden col-sum marker:", marker, flush=True)
cfg = TrainConfig(learning_rate=float(lr), epochs=int(epochs),
                  batch_size=288, weight_decay=float(wd), seed=0,
                  tca_lr_scale=tca_lr_scale)
augment = None
if float(aug) > 0:
    a = float(aug)

    def augment(x, rng):
        return fractional_roll(x, (28, 28),
                               rng.uniform(-a, a, size=(x.shape[0], 2)))

t0 = time.time()
recs = fit(net, Xtr, Xte, cfg, augment=augment)
out = {"tag": tag, "ks": ks, "lr": float(lr), "wd": float(wd),
       "aug": float(aug), "seed": int(seed), "tca_lr_scale": tca_lr_scale,
       "init_marker": marker,
       "records": [{k: v for k, v in r.items()} for r in recs],
       "minutes": (time.time() - t0) / 60.0}
with open(f"/root/pkg/.calib/{tag}.json", "w") as fh:
    json.dump(out, fh)
print(tag, "done", out["minutes"], "min", flush=True)
