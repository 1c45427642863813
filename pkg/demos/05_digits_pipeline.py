"""The full image experiment, scaled down to run in about a minute.

Generates the stand-in handwritten-digit corpus, runs the preprocessing
pipeline (class subset, dither, logit transform), trains the
back-projecting auto-encoder briefly, and writes reconstruction pairs.
The same flow runs from the command line:

    dpbn train --config cfg.json
    dpbn eval --config cfg.json --model model.dpbn
    dpbn reconstruct --config cfg.json --model model.dpbn --out recon/
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from dpbn import data, synth
from dpbn.data import fractional_roll
from dpbn.network import autoencode
from dpbn.training import TrainConfig, fit, init_network

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

# corpus + pipeline
paths = synth.write_corpus(os.path.join(OUT, "corpus"),
                           n_train_per_class=120, n_test_per_class=40,
                           seed=7)
train_raw = data.load_idx(paths["train_images"], paths["train_labels"])
test_raw = data.load_idx(paths["test_images"], paths["test_labels"])
train = data.select_subset(train_raw, [3, 8, 9], 100, seed=0)
test = data.select_classes(test_raw, [3, 8, 9])
train = data.gaussianify(data.dither(train, seed=1))
test = data.gaussianify(data.dither(test, seed=2))
print("train", train.samples.shape, "test", test.samples.shape)

# random fractional shifts as augmentation, drawn fresh every epoch
def augment(x, rng):
    return fractional_roll(x, (28, 28), rng.uniform(-1, 1, (x.shape[0], 2)))

net = init_network([784, 48, 24, 12], [2, 3, 3], seed=3,
                   data=train.samples)
cfg = TrainConfig(learning_rate=1e-3, epochs=10, batch_size=96, seed=0)
records = fit(net, train.samples, test.samples, cfg, augment=augment)
for r in records[:: max(1, len(records) // 5)]:
    print(f"epoch {r['epoch']:2d}: train {r['train_mse']:.3f} "
          f"test {r['test_mse']:.3f} efficiency {r['efficiency']:.3f}")

# reconstruction gallery: originals on top, round trips below
x = test.samples[:8]
x_hat, success = autoencode(net, x)
fig, axes = plt.subplots(2, 8, figsize=(12, 3.2))
for i in range(8):
    axes[0, i].imshow(data.sigmoid(x[i]).reshape(28, 28), cmap="gray",
                      vmin=0, vmax=1)
    axes[1, i].imshow(data.sigmoid(x_hat[i]).reshape(28, 28), cmap="gray",
                      vmin=0, vmax=1)
    axes[0, i].set_axis_off()
    axes[1, i].set_axis_off()
axes[0, 0].set_title("original", loc="left")
axes[1, 0].set_title("reconstruction", loc="left")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "digit_reconstructions.png"), dpi=120)
print("wrote", os.path.join(OUT, "digit_reconstructions.png"))
print("round-trip success on gallery:", success.tolist())
