"""Bit-exact codecs for the pipeline's on-disk artifacts.

Formats:
  PPM (P6) / PGM (P5), binary, maxval 255 only; comments allowed in headers.
  SMF score maps: "SMF1" | u32le width | u32le height | u32le planes (1 or 2)
    followed by planes*w*h IEEE-754 float32 little-endian values, plane-major,
    row-major within each plane.
  Checkpoints: "UNET" | u32le version (= 1) | u32le depth, base_channels,
    in_channels, out_channels | six float64le normalization stats (3 means,
    3 stds) | u32le parameter count | float32le parameters in the canonical
    order defined by the network's parameter layout.

Decoders never read past the declared payload; malformed input raises one of
the FormatError subclasses below.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .rasters import GrayImage, Mask, RgbImage, ScoreMap
from .stats import ChannelStats
from .unet import UNetConfig, unet_param_count


class FormatError(ValueError):
    """Base class for malformed or unsupported on-disk data."""


class BadMagicError(FormatError):
    pass


class UnsupportedMaxvalError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class BadDimensionError(FormatError):
    pass


class BadPlaneCountError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class LengthMismatchError(FormatError):
    pass


_WHITESPACE = b" \t\r\n\x0b\x0c"


def _pnm_header(buf: bytes, magic: bytes) -> tuple[int, int, int]:
    """Parse '<magic> w h maxval' allowing '#' comments; returns (w, h, offset)."""
    if buf[:2] != magic:
        raise BadMagicError(f"expected magic {magic.decode()}, got {buf[:2]!r}")
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(buf):
            c = buf[pos]
            if c in _WHITESPACE:
                pos += 1
            elif c == 0x23:  # '#'
                while pos < len(buf) and buf[pos] != 0x0A:
                    pos += 1
            else:
                break
        start = pos
        while pos < len(buf) and buf[pos] not in _WHITESPACE and buf[pos] != 0x23:
            pos += 1
        token = buf[start:pos]
        if not token:
            raise TruncatedPayloadError("header ended before width/height/maxval")
        if not token.isdigit():
            raise FormatError(f"malformed header field {token!r}")
        fields.append(int(token))
    if pos >= len(buf) or buf[pos] not in _WHITESPACE:
        raise TruncatedPayloadError("missing whitespace after maxval")
    pos += 1  # exactly one whitespace byte separates header from payload
    w, h, maxval = fields
    if maxval != 255:
        raise UnsupportedMaxvalError(f"only maxval 255 is supported, got {maxval}")
    if w == 0 or h == 0:
        raise BadDimensionError(f"zero image dimension: {w}x{h}")
    return w, h, pos


def _payload(buf: bytes, offset: int, need: int) -> np.ndarray:
    if len(buf) - offset < need:
        raise TruncatedPayloadError(f"payload needs {need} bytes, found {len(buf) - offset}")
    return np.frombuffer(buf, dtype=np.uint8, count=need, offset=offset)


def decode_ppm(buf: bytes) -> RgbImage:
    """Decode a binary P6 image; bytes map to b/255, interleaved to plane-major."""
    w, h, offset = _pnm_header(buf, b"P6")
    raw = _payload(buf, offset, 3 * w * h)
    planes = raw.reshape(h, w, 3).transpose(2, 0, 1)
    return RgbImage(planes.astype(np.float32) / np.float32(255.0))


def encode_ppm(image: RgbImage) -> bytes:
    """Encode as binary P6; values are quantized by round-half-up of v*255."""
    header = b"P6\n%d %d\n255\n" % (image.width, image.height)
    q = np.floor(image.data.astype(np.float64) * 255.0 + 0.5).astype(np.uint8)
    return header + q.transpose(1, 2, 0).tobytes()


def decode_pgm(buf: bytes) -> GrayImage:
    w, h, offset = _pnm_header(buf, b"P5")
    raw = _payload(buf, offset, w * h)
    return GrayImage(raw.reshape(h, w).astype(np.float32) / np.float32(255.0))


def encode_pgm(mask: Mask) -> bytes:
    """Encode a binary mask as P5 with 0 -> 0 and 1 -> 255."""
    header = b"P5\n%d %d\n255\n" % (mask.width, mask.height)
    return header + (mask.data * np.uint8(255)).tobytes()


def mask_from_gray(g: GrayImage, threshold: float = 0.5) -> Mask:
    """Binarize a grayscale image; values >= threshold become foreground."""
    if not (0.0 <= threshold <= 1.0):
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return Mask((g.data >= threshold).astype(np.uint8))


# ---------------------------------------------------------------------------
# SMF score maps
# ---------------------------------------------------------------------------

_SMF_MAGIC = b"SMF1"


def _coerce_planes(obj) -> np.ndarray:
    if isinstance(obj, ScoreMap):
        arr = obj.planes()
    elif not isinstance(obj, np.ndarray) and hasattr(obj, "data"):  # GrayImage, PriorMap
        arr = np.asarray(obj.data)[None]
    else:
        arr = np.asarray(obj)
        if arr.ndim == 2:
            arr = arr[None]
    if arr.ndim != 3 or arr.shape[0] not in (1, 2):
        raise BadPlaneCountError(f"SMF holds 1 or 2 planes, got shape {arr.shape}")
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if not np.isfinite(arr).all():
        raise ValueError("SMF values must be finite")
    return arr


def encode_smf(obj) -> bytes:
    """Serialize a ScoreMap, a single plane, or a (planes, h, w) array."""
    planes = _coerce_planes(obj)
    p, h, w = planes.shape
    return _SMF_MAGIC + struct.pack("<III", w, h, p) + planes.astype("<f4").tobytes()


def decode_smf(buf: bytes) -> np.ndarray:
    """Decode to a float32 array of shape (planes, h, w); bit-exact round-trip."""
    if buf[:4] != _SMF_MAGIC:
        raise BadMagicError(f"expected magic {_SMF_MAGIC.decode()}, got {buf[:4]!r}")
    if len(buf) < 16:
        raise TruncatedPayloadError("SMF header needs 16 bytes")
    w, h, p = struct.unpack_from("<III", buf, 4)
    if p not in (1, 2):
        raise BadPlaneCountError(f"SMF holds 1 or 2 planes, got {p}")
    if w == 0 or h == 0:
        raise BadDimensionError(f"zero SMF dimension: {w}x{h}")
    need = 4 * p * w * h
    if len(buf) - 16 < need:
        raise TruncatedPayloadError(f"SMF payload needs {need} bytes, found {len(buf) - 16}")
    values = np.frombuffer(buf, dtype="<f4", count=p * w * h, offset=16)
    return values.reshape(p, h, w).astype(np.float32)


def scoremap_from_smf(buf: bytes) -> ScoreMap:
    planes = decode_smf(buf)
    if planes.shape[0] != 2:
        raise BadPlaneCountError("score maps need exactly 2 planes")
    return ScoreMap(planes[0], planes[1])


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

_CKPT_MAGIC = b"UNET"
_CKPT_VERSION = 1


@dataclass
class Checkpoint:
    """Trained weights plus the architecture and normalization that made them."""

    config: UNetConfig
    params: np.ndarray
    normalization: ChannelStats

    def __post_init__(self):
        params = np.ascontiguousarray(self.params, dtype=np.float32).reshape(-1)
        expected = unet_param_count(self.config)
        if params.size != expected:
            raise LengthMismatchError(
                f"config implies {expected} parameters, vector holds {params.size}"
            )
        self.params = params


def encode_checkpoint(c: Checkpoint) -> bytes:
    cfg = c.config
    header = (
        _CKPT_MAGIC
        + struct.pack("<I", _CKPT_VERSION)
        + struct.pack("<IIII", cfg.depth, cfg.base_channels, cfg.in_channels, cfg.out_channels)
        + struct.pack("<6d", *c.normalization.mean, *c.normalization.std)
        + struct.pack("<I", c.params.size)
    )
    return header + c.params.astype("<f4").tobytes()


def decode_checkpoint(buf: bytes) -> Checkpoint:
    if buf[:4] != _CKPT_MAGIC:
        raise BadMagicError(f"expected magic {_CKPT_MAGIC.decode()}, got {buf[:4]!r}")
    if len(buf) < 76:
        raise TruncatedPayloadError("checkpoint header needs 76 bytes")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != _CKPT_VERSION:
        raise UnsupportedVersionError(f"unsupported checkpoint version {version}")
    depth, base, in_ch, out_ch = struct.unpack_from("<IIII", buf, 8)
    stats_values = struct.unpack_from("<6d", buf, 24)
    (n_params,) = struct.unpack_from("<I", buf, 72)
    try:
        cfg = UNetConfig(depth=depth, base_channels=base, in_channels=in_ch, out_channels=out_ch)
    except ValueError as exc:
        raise FormatError(f"invalid checkpoint config: {exc}") from exc
    if n_params != unet_param_count(cfg):
        raise LengthMismatchError(
            f"header declares {n_params} parameters, config implies {unet_param_count(cfg)}"
        )
    need = 4 * n_params
    if len(buf) - 76 < need:
        raise TruncatedPayloadError(f"checkpoint payload needs {need} bytes, found {len(buf) - 76}")
    params = np.frombuffer(buf, dtype="<f4", count=n_params, offset=76).copy()
    stats = ChannelStats(mean=tuple(stats_values[:3]), std=tuple(stats_values[3:]))
    return Checkpoint(config=cfg, params=params, normalization=stats)
