"""Deterministic stand-in corpus of handwritten-digit-like images.

Renders the characters 3, 8, and 9 as jittered stroke curves on a 28x28
grid with the same gross statistics as scanned digit data: a hard-zero
background, saturated stroke cores, antialiased edges, and coarse 8-bit
quantization.  Useful wherever the real corpus files are not available;
the output is written through the standard IDX writer, so swapping in the
real files is a config change.
"""

from __future__ import annotations

import os

import numpy as np

from .data import ImageBatch, STAGE_RAW, save_idx

__all__ = ["render_digit", "make_corpus", "write_corpus"]

GRID = 28

# strokes in unit coordinates (x right, y down): full or partial circle
# arcs plus line segments, per character
_ARC = "arc"    # (cx, cy, radius, theta_start_deg, theta_end_deg)
_SEG = "seg"    # (x0, y0, x1, y1)

_TEMPLATES = {
    3: [(_ARC, (0.48, 0.34, 0.17, -115.0, 115.0)),
        (_ARC, (0.48, 0.67, 0.18, -115.0, 115.0))],
    8: [(_ARC, (0.50, 0.33, 0.15, 0.0, 360.0)),
        (_ARC, (0.50, 0.68, 0.17, 0.0, 360.0))],
    9: [(_ARC, (0.52, 0.36, 0.16, 0.0, 360.0)),
        (_SEG, (0.68, 0.38, 0.58, 0.86))],
}

_POINTS_PER_STROKE = 140


def _stroke_points(kind, params, rng):
    """Sample points along one stroke, with mild shape jitter."""
    t = np.linspace(0.0, 1.0, _POINTS_PER_STROKE)
    if kind == _ARC:
        cx, cy, r, th0, th1 = params
        cx += rng.uniform(-0.02, 0.02)
        cy += rng.uniform(-0.02, 0.02)
        r *= rng.uniform(0.9, 1.1)
        th = np.deg2rad(th0 + (th1 - th0) * t)
        return np.stack([cx + r * np.cos(th), cy + r * np.sin(th)], axis=1)
    x0, y0, x1, y1 = params
    x0 += rng.uniform(-0.02, 0.02)
    x1 += rng.uniform(-0.02, 0.02)
    y1 += rng.uniform(-0.03, 0.03)
    return np.stack([x0 + (x1 - x0) * t, y0 + (y1 - y0) * t], axis=1)


def render_digit(cls, rng) -> np.ndarray:
    """One (GRID, GRID) float image in [0, 1] of the given character."""
    if cls not in _TEMPLATES:
        raise ValueError(f"no template for character {cls!r}")
    pts = np.concatenate([_stroke_points(kind, params, rng)
                          for kind, params in _TEMPLATES[cls]])
    # pose jitter: rotate about the center, scale, translate
    angle = rng.uniform(-0.22, 0.22)
    scale = rng.uniform(0.85, 1.12)
    shift = rng.uniform(-0.05, 0.05, size=2)
    rot = np.array([[np.cos(angle), -np.sin(angle)],
                    [np.sin(angle), np.cos(angle)]])
    pts = (pts - 0.5) @ rot.T * scale + 0.5 + shift

    sigma = rng.uniform(0.030, 0.046)
    amp = rng.uniform(0.88, 1.0)
    grid = (np.arange(GRID) + 0.5) / GRID
    gx, gy = np.meshgrid(grid, grid)
    # brush: intensity from the nearest stroke point, peak-normalized
    d2 = ((gx.ravel()[:, None] - pts[None, :, 0]) ** 2
          + (gy.ravel()[:, None] - pts[None, :, 1]) ** 2)
    img = amp * np.exp(-d2.min(axis=1) / (2.0 * sigma * sigma))
    img[img < 0.02] = 0.0  # hard-zero background like thresholded scans
    return img.reshape(GRID, GRID)


def make_corpus(n_per_class, seed, classes=(3, 8, 9)) -> ImageBatch:
    """A raw batch of rendered characters, n_per_class each, quantized to
    8 bits exactly as the IDX files would carry them."""
    rng = np.random.default_rng(seed)
    images = []
    labels = []
    for cls in classes:
        for _ in range(n_per_class):
            images.append(render_digit(cls, rng).ravel())
            labels.append(cls)
    samples = np.round(np.array(images) * 255.0) / 255.0
    return ImageBatch(samples, np.array(labels), (GRID, GRID), STAGE_RAW)


def write_corpus(out_dir, n_train_per_class=520, n_test_per_class=210,
                 seed=20240901, classes=(3, 8, 9)):
    """Write train/test IDX pairs into out_dir; returns the four paths."""
    os.makedirs(out_dir, exist_ok=True)
    train = make_corpus(n_train_per_class, seed, classes)
    test = make_corpus(n_test_per_class, seed + 1, classes)
    paths = {
        "train_images": os.path.join(out_dir, "train-images-idx3-ubyte"),
        "train_labels": os.path.join(out_dir, "train-labels-idx1-ubyte"),
        "test_images": os.path.join(out_dir, "test-images-idx3-ubyte"),
        "test_labels": os.path.join(out_dir, "test-labels-idx1-ubyte"),
    }
    save_idx(train, paths["train_images"], paths["train_labels"])
    save_idx(test, paths["test_images"], paths["test_labels"])
    return paths
