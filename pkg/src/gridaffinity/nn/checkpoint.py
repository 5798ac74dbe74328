"""Versioned binary checkpoint ("PFNC").

Layout, all little-endian::

    4s   magic b"PFNC"
    u32  format version (1)
    u32  config length, then that many bytes of UTF-8 JSON (sorted keys)
    f64  charge-scaler std (NaN when unknown)
    u8   float width in bytes (4 or 8)
    u32  parameter count, then per parameter:
         u16 name length + UTF-8 name, u8 ndim, ndim x u32 dims, payload
    u8   1 if Adam state follows, else 0
         u64 step, then m payloads and v payloads in parameter order
"""

from __future__ import annotations

import json
import math
import os

from ..binio import Reader, pack, pack_array, pack_string
from ..errors import ContainerFormatError, ShapeError
from .network import Network, NetworkConfig

MAGIC = b"PFNC"
VERSION = 1


def dumps_checkpoint(net: Network, include_adam: bool = True) -> bytes:
    cfg = json.dumps(net.config.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    width = net.config.np_dtype.itemsize
    std = math.nan if net.charge_std is None else float(net.charge_std)
    parts = [MAGIC, pack("I", VERSION), pack("I", len(cfg)), cfg, pack("d", std),
             pack("B", width), pack("I", len(net.params))]
    for name, value in net.params.items():
        parts.append(pack_string(name))
        parts.append(pack("B", value.ndim))
        parts.append(pack(f"{value.ndim}I", *value.shape))
        parts.append(pack_array(value, net.config.dtype))
    parts.append(pack("B", 1 if include_adam else 0))
    if include_adam:
        parts.append(pack("Q", net.step))
        for name in net.params:
            parts.append(pack_array(net.adam_m[name], net.config.dtype))
        for name in net.params:
            parts.append(pack_array(net.adam_v[name], net.config.dtype))
    return b"".join(parts)


def loads_checkpoint(data: bytes) -> Network:
    r = Reader(data, "checkpoint")
    magic = bytes(r.take(4))
    if magic != MAGIC:
        raise ContainerFormatError(f"not a checkpoint: magic {magic!r}, expected {MAGIC!r}")
    version = r.unpack("I")
    if version != VERSION:
        raise ContainerFormatError(f"unsupported checkpoint version {version}")
    cfg_raw = bytes(r.take(r.unpack("I")))
    try:
        config = NetworkConfig.from_dict(json.loads(cfg_raw))
    except (ValueError, TypeError) as exc:
        raise ContainerFormatError(f"bad config block: {exc}") from None
    std = r.unpack("d")
    width = r.unpack("B")
    if width != config.np_dtype.itemsize:
        raise ContainerFormatError(f"payload width {width} disagrees with dtype {config.dtype}")
    expected = config.param_shapes()
    n = r.unpack("I")
    if n != len(expected):
        raise ShapeError(f"checkpoint has {n} parameter blocks, config expects {len(expected)}")
    params = {}
    for want_name, want_shape in expected.items():
        name = r.string()
        ndim = r.unpack("B")
        shape = r.unpack_tuple(f"{ndim}I")
        if name != want_name or shape != want_shape:
            raise ShapeError(f"layer {name}: stored shape {shape} does not match config "
                             f"({want_name} {want_shape})")
        params[name] = r.array(shape, config.dtype)
    adam_m, adam_v, step = {}, {}, 0
    if r.unpack("B"):
        step = r.unpack("Q")
        for name, shape in expected.items():
            adam_m[name] = r.array(shape, config.dtype)
        for name, shape in expected.items():
            adam_v[name] = r.array(shape, config.dtype)
    if not r.at_end():
        raise ContainerFormatError("trailing bytes after checkpoint payload")
    return Network(config, params, adam_m, adam_v, step,
                   charge_std=None if math.isnan(std) else std)


def save_checkpoint(net: Network, path, include_adam: bool = True) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(dumps_checkpoint(net, include_adam))
    os.replace(tmp, path)


def load_checkpoint(path) -> Network:
    with open(path, "rb") as fh:
        return loads_checkpoint(fh.read())
