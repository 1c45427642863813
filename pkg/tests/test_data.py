"""Tests for IDX parsing, the preprocessing pipeline, and augmentation."""

import struct

import numpy as np
import pytest

from dpbn import synth
from dpbn.data import (
    ImageBatch,
    STAGE_DITHERED,
    STAGE_GAUSSIANIFIED,
    STAGE_RAW,
    dither,
    fft_shift_augment,
    fractional_roll,
    gaussianify,
    load_cache,
    load_idx,
    save_cache,
    save_idx,
    select_classes,
    select_subset,
    sigmoid,
)
from dpbn.errors import (
    BadMagicError,
    DimMismatchError,
    DomainError,
    InsufficientSamplesError,
    StageError,
    TruncatedFileError,
)


def write_idx_pair(tmp_path, images, labels):
    """images: (S, rows, cols) uint8."""
    s, rows, cols = images.shape
    ip = tmp_path / "imgs.idx3"
    lp = tmp_path / "labs.idx1"
    ip.write_bytes(struct.pack(">IIII", 0x803, s, rows, cols)
                   + images.tobytes())
    lp.write_bytes(struct.pack(">II", 0x801, s) + labels.tobytes())
    return str(ip), str(lp)


@pytest.fixture
def tiny_idx(tmp_path, rng):
    imgs = rng.integers(0, 256, size=(10, 4, 5), dtype=np.uint8)
    labs = np.array([3, 8, 9, 3, 8, 9, 3, 8, 9, 3], dtype=np.uint8)
    return write_idx_pair(tmp_path, imgs, labs), imgs, labs


class TestLoadIdx:
    def test_roundtrip_values(self, tiny_idx):
        (ip, lp), imgs, labs = tiny_idx
        batch = load_idx(ip, lp)
        assert batch.stage == STAGE_RAW
        assert batch.shape == (4, 5)
        np.testing.assert_allclose(
            batch.samples, imgs.reshape(10, 20) / 255.0, atol=1e-15)
        np.testing.assert_array_equal(batch.labels, labs)

    def test_all_zero_file(self, tmp_path):
        ip, lp = write_idx_pair(tmp_path, np.zeros((3, 2, 2), np.uint8),
                                np.zeros(3, np.uint8))
        batch = load_idx(ip, lp)
        assert np.all(batch.samples == 0.0)

    def test_bad_magic(self, tmp_path, tiny_idx):
        (ip, lp), _, _ = tiny_idx
        bad = tmp_path / "bad.idx3"
        bad.write_bytes(b"\x00\x00\x08\x77" + open(ip, "rb").read()[4:])
        with pytest.raises(BadMagicError):
            load_idx(str(bad), lp)
        with pytest.raises(BadMagicError):
            load_idx(lp, lp)  # labels magic where images expected

    def test_truncated(self, tmp_path, tiny_idx):
        (ip, lp), _, _ = tiny_idx
        cut = tmp_path / "cut.idx3"
        cut.write_bytes(open(ip, "rb").read()[:-7])
        with pytest.raises(TruncatedFileError):
            load_idx(str(cut), lp)

    def test_count_mismatch(self, tmp_path, tiny_idx):
        (ip, _), _, _ = tiny_idx
        lp2 = tmp_path / "short.idx1"
        lp2.write_bytes(struct.pack(">II", 0x801, 7) + bytes(7))
        with pytest.raises(DimMismatchError):
            load_idx(ip, str(lp2))

    def test_save_idx_roundtrip(self, tmp_path):
        batch = synth.make_corpus(5, seed=0)
        ip, lp = str(tmp_path / "i.idx3"), str(tmp_path / "l.idx1")
        save_idx(batch, ip, lp)
        back = load_idx(ip, lp)
        np.testing.assert_allclose(back.samples, batch.samples, atol=1e-12)
        np.testing.assert_array_equal(back.labels, batch.labels)


class TestSelect:
    @pytest.fixture
    def corpus(self):
        return synth.make_corpus(20, seed=1)

    def test_counts_exact(self, corpus):
        sub = select_subset(corpus, [3, 9], 12, seed=0)
        assert sub.n_samples == 24
        assert np.sum(sub.labels == 3) == 12
        assert np.sum(sub.labels == 9) == 12

    def test_zero_per_class_empty(self, corpus):
        sub = select_subset(corpus, [3, 8, 9], 0, seed=0)
        assert sub.n_samples == 0

    def test_deterministic(self, corpus):
        a = select_subset(corpus, [3, 8], 10, seed=5)
        b = select_subset(corpus, [3, 8], 10, seed=5)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_insufficient(self, corpus):
        with pytest.raises(InsufficientSamplesError):
            select_subset(corpus, [3], 21, seed=0)

    def test_select_classes_keeps_all(self, corpus):
        sub = select_classes(corpus, [8])
        assert sub.n_samples == 20
        assert np.all(sub.labels == 8)


class TestDitherGaussianify:
    @pytest.fixture
    def raw(self):
        return synth.make_corpus(15, seed=2)

    def test_direction_and_openness(self, raw):
        d = dither(raw, scale=0.01, seed=0)
        assert d.stage == STAGE_DITHERED
        hi = raw.samples > 0.5
        assert np.all(d.samples[hi] < raw.samples[hi])
        assert np.all(d.samples[hi] > 0.5 - 0.5)  # still positive
        lo = raw.samples <= 0.5
        assert np.all(d.samples[lo] >= raw.samples[lo])
        assert np.all((d.samples > 0.0) & (d.samples < 1.0))
        # no mass sits exactly on the lattice endpoints
        assert not np.any(d.samples == 0.0)
        assert not np.any(d.samples == 1.0)

    def test_extreme_pixels_move_inward(self):
        batch = ImageBatch(np.array([[0.0, 1.0]]), np.array([0]), (1, 2),
                           STAGE_RAW)
        d = dither(batch, scale=0.01, seed=3)
        assert 0.0 < d.samples[0, 0] <= 0.5
        assert 0.5 < d.samples[0, 1] < 1.0

    def test_deterministic(self, raw):
        a = dither(raw, seed=9).samples
        b = dither(raw, seed=9).samples
        np.testing.assert_array_equal(a, b)

    def test_stage_enforcement(self, raw):
        d = dither(raw, seed=0)
        with pytest.raises(StageError):
            dither(d, seed=0)
        with pytest.raises(StageError):
            gaussianify(raw)

    def test_gaussianify_values(self, raw):
        g = gaussianify(dither(raw, seed=0))
        assert g.stage == STAGE_GAUSSIANIFIED
        assert np.all(np.isfinite(g.samples))

    def test_logit_known_points(self):
        batch = ImageBatch(np.array([[0.5, 0.9]]), np.array([0]), (1, 2),
                           STAGE_DITHERED)
        g = gaussianify(batch)
        assert g.samples[0, 0] == pytest.approx(0.0, abs=1e-15)
        assert g.samples[0, 1] == pytest.approx(2.1972245773362196,
                                                rel=1e-12)

    def test_sigmoid_roundtrip(self, raw):
        d = dither(raw, seed=1)
        g = gaussianify(d)
        np.testing.assert_allclose(sigmoid(g.samples), d.samples,
                                   atol=1e-12)

    def test_domain_error(self):
        batch = ImageBatch(np.array([[0.0, 0.5]]), np.array([0]), (1, 2),
                           STAGE_DITHERED)
        with pytest.raises(DomainError):
            gaussianify(batch)


class TestFractionalRoll:
    @pytest.fixture
    def images(self, rng):
        return rng.normal(0, 1, (6, 28 * 28))

    def test_zero_shift_identity(self, images):
        out = fractional_roll(images, (28, 28), np.zeros((6, 2)))
        np.testing.assert_allclose(out, images, atol=1e-12)

    def test_integer_shift_equals_roll(self, images):
        for dv, dh in [(1, 0), (0, 1), (-1, 1), (3, -2)]:
            out = fractional_roll(images, (28, 28),
                                  np.tile([dv, dh], (6, 1)))
            ref = np.roll(images.reshape(6, 28, 28), (dv, dh),
                          axis=(1, 2)).reshape(6, -1)
            np.testing.assert_allclose(out, ref, atol=1e-9)

    def test_energy_preserved_on_bandlimited_images(self):
        # an image with no content at the Nyquist frequencies shifts
        # unitarily; build one from low-frequency cosines
        v = np.arange(28)
        img = (np.cos(2 * np.pi * 3 * v / 28)[:, None]
               * np.cos(2 * np.pi * 2 * v / 28)[None, :]
               + 0.5 * np.sin(2 * np.pi * 5 * v / 28)[:, None])
        flat = img.ravel()[None, :]
        for shift in ([0.5, 0.0], [0.25, -0.7], [0.9, 0.9]):
            out = fractional_roll(flat, (28, 28), [shift])
            e0 = np.sum(flat ** 2)
            e1 = np.sum(out ** 2)
            assert abs(e1 - e0) / e0 <= 1e-9

    def test_two_half_shifts_compose_to_one_when_bandlimited(self):
        # on images without Nyquist content the shift operator is exactly
        # unitary, so fractional shifts compose
        v = np.arange(28)
        img = (np.cos(2 * np.pi * 4 * v / 28)[:, None]
               * np.sin(2 * np.pi * 3 * v / 28)[None, :]).ravel()[None, :]
        half = [[0.5, 0.25]]
        twice = fractional_roll(fractional_roll(img, (28, 28), half),
                                (28, 28), half)
        once = fractional_roll(img, (28, 28), [[1.0, 0.5]])
        np.testing.assert_allclose(twice, once, atol=1e-10)

    def test_augment_op_contract(self, rng):
        raw = synth.make_corpus(8, seed=3)
        g = gaussianify(dither(raw, seed=0))
        with pytest.raises(StageError):
            fft_shift_augment(raw)
        out = fft_shift_augment(g, max_shift=1.0, seed=4)
        assert out.stage == STAGE_GAUSSIANIFIED
        assert out.samples.shape == g.samples.shape
        again = fft_shift_augment(g, max_shift=1.0, seed=4)
        np.testing.assert_array_equal(out.samples, again.samples)


class TestCache:
    def test_roundtrip(self, tmp_path):
        raw = synth.make_corpus(6, seed=5)
        g = gaussianify(dither(raw, seed=1))
        p = tmp_path / "batch.dpbd"
        save_cache(g, p)
        back = load_cache(p)
        np.testing.assert_array_equal(back.samples, g.samples)
        np.testing.assert_array_equal(back.labels, g.labels)
        assert back.stage == g.stage
        assert back.shape == g.shape

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.dpbd"
        p.write_bytes(b"NOPE" + bytes(32))
        with pytest.raises(BadMagicError):
            load_cache(p)

    def test_truncated(self, tmp_path):
        raw = synth.make_corpus(4, seed=6)
        p = tmp_path / "y.dpbd"
        save_cache(raw, p)
        blob = p.read_bytes()
        p.write_bytes(blob[:-16])
        with pytest.raises(TruncatedFileError):
            load_cache(p)
