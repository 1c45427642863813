"""Bit-exact model persistence.

One container for both model families, little-endian throughout:

    magic 'DPBN1' | u16 version | u8 model type | descriptor | payload | crc

The descriptor encodes the architecture (layer dims, range kinds,
component counts for the back-projecting model; dims and tying for the
baseline).  The payload holds every parameter as raw float64 in the
declared traversal order, and the trailing u32 is the CRC-32 of the
payload bytes, checked on load.  Saving and loading round-trips
parameters exactly.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .baseline import AecNetwork
from .errors import BadModelFileError
from .maxent import MaxEntKind
from .network import DpbnNetwork, LayerSpec
from .tca import Tca

__all__ = ["save_model", "load_model", "MAGIC", "VERSION"]

MAGIC = b"DPBN1"
VERSION = 1
_TYPE_DPBN = 0
_TYPE_AEC = 1

_KIND_CODES = {MaxEntKind.LINEAR: 0, MaxEntKind.TRUNC_GAUSS: 1,
               MaxEntKind.TRUNC_EXPON: 2}
_KIND_FROM_CODE = {v: k for k, v in _KIND_CODES.items()}


def _f64(arr):
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def save_model(net, path):
    """Serialize a DpbnNetwork or AecNetwork."""
    header = bytearray()
    payload = bytearray()
    if isinstance(net, DpbnNetwork):
        header += struct.pack("<B", _TYPE_DPBN)
        header += struct.pack("<H", len(net.layers))
        for layer in net.layers:
            t = layer.input_tca
            header += struct.pack("<IIBHI", layer.in_dim, layer.out_dim,
                                  _KIND_CODES[t.base], t.n_components,
                                  t.n_units)
            payload += _f64(layer.weights)
            payload += _f64(t.log_weights)
            payload += _f64(t.log_scales)
            payload += _f64(t.biases)
    elif isinstance(net, AecNetwork):
        header += struct.pack("<B", _TYPE_AEC)
        header += struct.pack("<HB", net.n_layers, 1 if net.tied else 0)
        for d in net.dims:
            header += struct.pack("<I", d)
        for w in net.enc_weights:
            payload += _f64(w)
        for b in net.enc_biases:
            payload += _f64(b)
        for b in net.dec_biases:
            payload += _f64(b)
        if net.tied:
            for s in net.dec_scales:
                payload += _f64(s)
        else:
            for w in net.dec_weights:
                payload += _f64(w)
    else:
        raise TypeError(f"cannot serialize {type(net).__name__}")

    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))


class _Reader:
    def __init__(self, buf, path):
        self.buf = buf
        self.off = 0
        self.path = path

    def take(self, n):
        if self.off + n > len(self.buf):
            raise BadModelFileError(f"{self.path}: truncated")
        out = self.buf[self.off:self.off + n]
        self.off += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, shape):
        n = int(np.prod(shape, dtype=int))
        raw = np.frombuffer(self.take(n * 8), dtype="<f8")
        return raw.reshape(shape).copy()


def load_model(path):
    """Deserialize; validates magic, version, layout, and checksum."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:5] != MAGIC:
        raise BadModelFileError(f"{path}: bad magic")
    if len(buf) < 12:
        raise BadModelFileError(f"{path}: truncated")
    crc_stored, = struct.unpack("<I", buf[-4:])
    r = _Reader(buf[:-4], path)
    r.take(5)
    version, = r.unpack("<H")
    if version != VERSION:
        raise BadModelFileError(f"{path}: unsupported version {version}")
    mtype, = r.unpack("<B")

    if mtype == _TYPE_DPBN:
        n_layers, = r.unpack("<H")
        descr = [r.unpack("<IIBHI") for _ in range(n_layers)]
        payload_start = r.off
        layers = []
        for in_dim, out_dim, kcode, k, units in descr:
            if kcode not in _KIND_FROM_CODE:
                raise BadModelFileError(f"{path}: unknown range kind {kcode}")
            w = r.floats((in_dim, out_dim))
            t = Tca(_KIND_FROM_CODE[kcode], r.floats((units, k)),
                    r.floats((units, k)), r.floats((units, k)))
            layers.append(LayerSpec(w, t))
        net = DpbnNetwork(layers)
    elif mtype == _TYPE_AEC:
        n_layers, tied = r.unpack("<HB")
        dims = [r.unpack("<I")[0] for _ in range(n_layers + 1)]
        payload_start = r.off
        enc_w = [r.floats((dims[i], dims[i + 1])) for i in range(n_layers)]
        enc_b = [r.floats((dims[i + 1],)) for i in range(n_layers)]
        dec_b = [r.floats((dims[n_layers - 1 - j],))
                 for j in range(n_layers)]
        if tied:
            scales = [r.floats(()) for _ in range(n_layers)]
            net = AecNetwork(dims, enc_w, enc_b, dec_b, dec_scales=scales)
        else:
            dec_w = [r.floats((dims[n_layers - j], dims[n_layers - 1 - j]))
                     for j in range(n_layers)]
            net = AecNetwork(dims, enc_w, enc_b, dec_b, dec_weights=dec_w)
    else:
        raise BadModelFileError(f"{path}: unknown model type {mtype}")

    if r.off != len(r.buf):
        raise BadModelFileError(f"{path}: trailing bytes in payload")
    crc = zlib.crc32(buf[payload_start:-4])
    if crc != crc_stored:
        raise BadModelFileError(f"{path}: checksum mismatch")
    return net
