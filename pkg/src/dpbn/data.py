"""Corpus ingestion and the image preprocessing pipeline.

Stages move strictly forward: raw (unit-interval pixels straight from the
IDX files) -> dithered (quantization mass smeared off the lattice, values
strictly inside (0, 1)) -> gaussianified (logit-transformed onto the real
line, where squared error is meaningful).  Fractional circular shifts for
augmentation act on gaussianified images in the frequency domain.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import (
    BadMagicError,
    DimMismatchError,
    DomainError,
    InsufficientSamplesError,
    ShapeMismatchError,
    StageError,
    TruncatedFileError,
)

__all__ = [
    "ImageBatch",
    "load_idx",
    "save_idx",
    "select_classes",
    "select_subset",
    "dither",
    "gaussianify",
    "sigmoid",
    "fractional_roll",
    "fft_shift_augment",
    "save_cache",
    "load_cache",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

STAGE_RAW = "raw"
STAGE_DITHERED = "dithered"
STAGE_GAUSSIANIFIED = "gaussianified"
_STAGES = (STAGE_RAW, STAGE_DITHERED, STAGE_GAUSSIANIFIED)

# dither clipping keeps every pixel strictly inside the unit interval so
# the logit stays finite
DITHER_CLIP = 1e-6
DEFAULT_DITHER_SCALE = 0.01

CACHE_MAGIC = b"DPBD"
CACHE_VERSION = 1


@dataclass
class ImageBatch:
    """A batch of flattened images plus labels and its pipeline stage."""

    samples: np.ndarray   # (S, rows*cols) float64
    labels: np.ndarray    # (S,) int64
    shape: tuple          # (rows, cols)
    stage: str

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.samples.ndim != 2:
            raise ShapeMismatchError("samples must be (S, rows*cols)")
        if self.samples.shape[0] != self.labels.shape[0]:
            raise DimMismatchError(
                f"{self.samples.shape[0]} samples vs "
                f"{self.labels.shape[0]} labels")
        rows, cols = self.shape
        if self.samples.shape[1] != rows * cols:
            raise DimMismatchError(
                f"flattened width {self.samples.shape[1]} != {rows}x{cols}")
        if self.stage not in _STAGES:
            raise StageError(f"unknown stage {self.stage!r}")

    @property
    def n_samples(self):
        return self.samples.shape[0]

    def replace(self, samples=None, labels=None, stage=None):
        return ImageBatch(
            self.samples if samples is None else samples,
            self.labels if labels is None else labels,
            self.shape,
            self.stage if stage is None else stage)


def _read_exact(buf, offset, count, path):
    if offset + count > len(buf):
        raise TruncatedFileError(
            f"{path}: needs {offset + count} bytes, has {len(buf)}")
    return buf[offset:offset + count]


def load_idx(images_path, labels_path) -> ImageBatch:
    """Parse a big-endian IDX image/label file pair into a raw batch.

    Pixel bytes are scaled to [0, 1] by division with 255.
    """
    with open(images_path, "rb") as fh:
        ibuf = fh.read()
    magic, = struct.unpack(">I", _read_exact(ibuf, 0, 4, images_path))
    if magic != IDX_IMAGES_MAGIC:
        raise BadMagicError(
            f"{images_path}: magic 0x{magic:08x}, "
            f"expected 0x{IDX_IMAGES_MAGIC:08x}")
    count, rows, cols = struct.unpack(
        ">III", _read_exact(ibuf, 4, 12, images_path))
    pix = np.frombuffer(
        _read_exact(ibuf, 16, count * rows * cols, images_path),
        dtype=np.uint8)

    with open(labels_path, "rb") as fh:
        lbuf = fh.read()
    magic, = struct.unpack(">I", _read_exact(lbuf, 0, 4, labels_path))
    if magic != IDX_LABELS_MAGIC:
        raise BadMagicError(
            f"{labels_path}: magic 0x{magic:08x}, "
            f"expected 0x{IDX_LABELS_MAGIC:08x}")
    n_labels, = struct.unpack(">I", _read_exact(lbuf, 4, 4, labels_path))
    if n_labels != count:
        raise DimMismatchError(
            f"{n_labels} labels for {count} images")
    labels = np.frombuffer(
        _read_exact(lbuf, 8, n_labels, labels_path), dtype=np.uint8)

    samples = pix.reshape(count, rows * cols).astype(np.float64) / 255.0
    return ImageBatch(samples, labels.astype(np.int64), (rows, cols),
                      STAGE_RAW)


def save_idx(batch: ImageBatch, images_path, labels_path):
    """Write a raw batch as a standard big-endian IDX pair (uint8 pixels)."""
    if batch.stage != STAGE_RAW:
        raise StageError("only raw batches can be written as IDX")
    rows, cols = batch.shape
    pix = np.clip(np.round(batch.samples * 255.0), 0, 255).astype(np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, batch.n_samples,
                             rows, cols))
        fh.write(pix.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, batch.n_samples))
        fh.write(batch.labels.astype(np.uint8).tobytes())


def select_classes(batch: ImageBatch, classes) -> ImageBatch:
    """Every sample whose label is in `classes`, original order kept."""
    mask = np.isin(batch.labels, np.asarray(list(classes)))
    return batch.replace(samples=batch.samples[mask],
                         labels=batch.labels[mask])


def select_subset(batch: ImageBatch, classes, per_class, seed) -> ImageBatch:
    """Pick `per_class` samples of every requested class, rows grouped by
    class in the order given; the within-class choice is a seeded shuffle.
    """
    rng = np.random.default_rng(seed)
    picks = []
    for cls in classes:
        idx = np.nonzero(batch.labels == cls)[0]
        if len(idx) < per_class:
            raise InsufficientSamplesError(
                f"class {cls}: have {len(idx)}, need {per_class}")
        picks.append(rng.permutation(idx)[:per_class])
    sel = (np.concatenate(picks) if picks
           else np.zeros(0, dtype=np.int64))
    return batch.replace(samples=batch.samples[sel],
                         labels=batch.labels[sel])


def dither(batch: ImageBatch, scale=DEFAULT_DITHER_SCALE,
           seed=0) -> ImageBatch:
    """Break pixel quantization: subtract a small exponential-distributed
    value from pixels above 0.5, add one to pixels at or below 0.5, then
    clip strictly inside (0, 1)."""
    if batch.stage != STAGE_RAW:
        raise StageError(f"dither expects a raw batch, got {batch.stage}")
    rng = np.random.default_rng(seed)
    eps = rng.exponential(scale, size=batch.samples.shape)
    x = batch.samples
    out = np.where(x > 0.5, x - eps, x + eps)
    out = np.clip(out, DITHER_CLIP, 1.0 - DITHER_CLIP)
    return batch.replace(samples=out, stage=STAGE_DITHERED)


def gaussianify(batch: ImageBatch) -> ImageBatch:
    """Map pixels from (0, 1) onto the real line with the logit transform."""
    if batch.stage != STAGE_DITHERED:
        raise StageError(
            f"gaussianify expects a dithered batch, got {batch.stage}")
    x = batch.samples
    if np.any(x <= 0.0) or np.any(x >= 1.0):
        raise DomainError("pixel values must lie strictly inside (0, 1)")
    out = np.log(x / (1.0 - x))
    return batch.replace(samples=out, stage=STAGE_GAUSSIANIFIED)


def sigmoid(x):
    """Inverse of the logit transform."""
    return expit(np.asarray(x, dtype=np.float64))


def fractional_roll(samples, shape, shifts):
    """Circularly shift flattened images by fractional pixel amounts.

    shifts is (S, 2) as (rows, cols) displacement.  The shift is applied as
    a linear phase in the 2-D frequency domain; the imaginary residue of
    the inverse transform is discarded.  Integer shifts reproduce an exact
    array roll; energy is preserved up to the image's content at the
    Nyquist frequencies (zero for band-limited images).
    """
    samples = np.asarray(samples, dtype=np.float64)
    rows, cols = shape
    squeeze = samples.ndim == 1
    imgs = np.atleast_2d(samples).reshape(-1, rows, cols)
    shifts = np.atleast_2d(np.asarray(shifts, dtype=np.float64))
    if shifts.shape != (imgs.shape[0], 2):
        raise ShapeMismatchError("need one (dv, dh) pair per image")
    fv = np.fft.fftfreq(rows)[None, :, None]
    fh = np.fft.fftfreq(cols)[None, None, :]
    phase = np.exp(-2j * np.pi * (fv * shifts[:, 0, None, None]
                                  + fh * shifts[:, 1, None, None]))
    out = np.fft.ifft2(np.fft.fft2(imgs) * phase).real
    out = out.reshape(-1, rows * cols)
    return out[0] if squeeze else out


def fft_shift_augment(batch: ImageBatch, max_shift=1.0, seed=0) -> ImageBatch:
    """Random fractional circular shift per sample, both axes uniform in
    [-max_shift, max_shift]."""
    if batch.stage != STAGE_GAUSSIANIFIED:
        raise StageError(
            f"shift augmentation expects gaussianified data, got "
            f"{batch.stage}")
    rng = np.random.default_rng(seed)
    shifts = rng.uniform(-max_shift, max_shift, size=(batch.n_samples, 2))
    return batch.replace(
        samples=fractional_roll(batch.samples, batch.shape, shifts))


_STAGE_CODES = {s: i for i, s in enumerate(_STAGES)}


def save_cache(batch: ImageBatch, path):
    """Write a preprocessed batch as a little-endian binary cache.

    Layout: magic 'DPBD', u16 version, u8 stage, u32 samples, u16 rows,
    u16 cols, then samples*rows*cols float64 pixels followed by `samples`
    float64 labels.
    """
    rows, cols = batch.shape
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<HBIHH", CACHE_VERSION,
                             _STAGE_CODES[batch.stage],
                             batch.n_samples, rows, cols))
        fh.write(batch.samples.astype("<f8").tobytes())
        fh.write(batch.labels.astype("<f8").tobytes())


def load_cache(path) -> ImageBatch:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != CACHE_MAGIC:
        raise BadMagicError(f"{path}: not a batch cache")
    version, stage_code, count, rows, cols = struct.unpack(
        "<HBIHH", _read_exact(buf, 4, 11, path))
    if version != CACHE_VERSION:
        raise BadMagicError(f"{path}: unsupported cache version {version}")
    need = count * rows * cols * 8
    pix = np.frombuffer(_read_exact(buf, 15, need, path), dtype="<f8")
    lab = np.frombuffer(_read_exact(buf, 15 + need, count * 8, path),
                        dtype="<f8")
    return ImageBatch(pix.reshape(count, rows * cols).copy(),
                      lab.astype(np.int64), (rows, cols),
                      _STAGES[stage_code])
