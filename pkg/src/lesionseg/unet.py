"""Toy-scale U-Net with hand-written forward and backward passes.

The network follows the classic encoder/decoder layout: per level two
zero-padded 3x3 convolutions with ReLU, 2x2 max-pool on the way down, 2x2
stride-2 transposed convolution plus skip concatenation on the way up, and a
final 1x1 convolution to two score channels. All parameters live in one flat
vector whose canonical order doubles as the checkpoint serialization order.

Everything is dtype-preserving: training runs in float32, the gradient-check
harness feeds float64 through the same code path.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class UNetConfig:
    """Architecture hyper-parameters; input dims must be divisible by 2**depth."""

    depth: int = 3
    base_channels: int = 8
    in_channels: int = 3
    out_channels: int = 2

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if min(self.base_channels, self.in_channels, self.out_channels) < 1:
            raise ValueError("channel counts must be >= 1")


# ---------------------------------------------------------------------------
# Canonical parameter layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Entry:
    name: str
    shape: tuple[int, ...]
    offset: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


class ParamLayout:
    """Maps the flat parameter vector to named weight/bias views.

    Canonical order: encoder levels (conv1 w,b, conv2 w,b), bottleneck
    (conv1, conv2), decoder levels deepest-first (up w,b, conv1 w,b,
    conv2 w,b), final 1x1 conv (w,b).
    """

    def __init__(self, cfg: UNetConfig):
        self.cfg = cfg
        entries: list[_Entry] = []
        offset = 0

        def add(name: str, shape: tuple[int, ...]):
            nonlocal offset
            entries.append(_Entry(name, shape, offset))
            offset += int(np.prod(shape))

        ch = cfg.base_channels
        c_in = cfg.in_channels
        for i in range(cfg.depth):
            c_out = ch << i
            add(f"enc{i}.conv1.w", (c_out, c_in, 3, 3))
            add(f"enc{i}.conv1.b", (c_out,))
            add(f"enc{i}.conv2.w", (c_out, c_out, 3, 3))
            add(f"enc{i}.conv2.b", (c_out,))
            c_in = c_out
        c_out = ch << cfg.depth
        add("bottleneck.conv1.w", (c_out, c_in, 3, 3))
        add("bottleneck.conv1.b", (c_out,))
        add("bottleneck.conv2.w", (c_out, c_out, 3, 3))
        add("bottleneck.conv2.b", (c_out,))
        for i in reversed(range(cfg.depth)):
            c_hi = ch << (i + 1)
            c_lo = ch << i
            add(f"dec{i}.up.w", (c_hi, c_lo, 2, 2))  # (c_in, c_out, kh, kw)
            add(f"dec{i}.up.b", (c_lo,))
            add(f"dec{i}.conv1.w", (c_lo, 2 * c_lo, 3, 3))
            add(f"dec{i}.conv1.b", (c_lo,))
            add(f"dec{i}.conv2.w", (c_lo, c_lo, 3, 3))
            add(f"dec{i}.conv2.b", (c_lo,))
        add("final.w", (cfg.out_channels, ch, 1, 1))
        add("final.b", (cfg.out_channels,))

        self.entries = tuple(entries)
        self.n_params = offset
        self._by_name = {e.name: e for e in entries}

    def views(self, flat: np.ndarray) -> dict[str, np.ndarray]:
        """Named reshaped views into the flat vector (no copies)."""
        if flat.shape != (self.n_params,):
            raise ValueError(
                f"parameter vector has length {flat.shape}, layout needs {self.n_params}"
            )
        return {e.name: flat[e.offset : e.offset + e.size].reshape(e.shape) for e in self.entries}


@lru_cache(maxsize=None)
def _layout(cfg: UNetConfig) -> ParamLayout:
    return ParamLayout(cfg)


def unet_param_count(cfg: UNetConfig) -> int:
    return _layout(cfg).n_params


def unet_init(cfg: UNetConfig, seed: int) -> np.ndarray:
    """Kaiming-style uniform init: w ~ U(-b, b) with b = sqrt(6 / fan_in),
    fan_in = in_channels * kernel_area; biases zero. Deterministic per seed."""
    rng = np.random.default_rng(seed)
    layout = _layout(cfg)
    flat = np.zeros(layout.n_params, dtype=np.float32)
    for e in layout.entries:
        if e.name.endswith(".b"):
            continue
        if ".up." in e.name:
            c_in, _, kh, kw = e.shape  # transposed conv stores (c_in, c_out, kh, kw)
        else:
            _, c_in, kh, kw = e.shape
        bound = np.sqrt(6.0 / (c_in * kh * kw))
        flat[e.offset : e.offset + e.size] = rng.uniform(-bound, bound, e.size).astype(np.float32)
    return flat


# ---------------------------------------------------------------------------
# Layer primitives (dtype-preserving)
# ---------------------------------------------------------------------------

def _im2col3x3(x: np.ndarray) -> np.ndarray:
    """Unfold zero-padded 3x3 windows: (n, c, h, w) -> (n, c*9, h*w)."""
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    s = xp.strides
    win = np.lib.stride_tricks.as_strided(
        xp, shape=(n, c, 3, 3, h, w), strides=(s[0], s[1], s[2], s[3], s[2], s[3])
    )
    return win.reshape(n, c * 9, h * w)


def _conv3x3_forward(x, w, b):
    n, c, h, wd = x.shape
    cols = _im2col3x3(x)
    w2 = w.reshape(w.shape[0], -1)
    y = np.matmul(w2, cols) + b[:, None]
    return y.reshape(n, w.shape[0], h, wd), cols


def _conv3x3_backward(dy, cols, w, x_shape):
    n, c, h, wd = x_shape
    k = w.shape[0]
    dy2 = dy.reshape(n, k, h * wd)
    db = dy2.sum(axis=(0, 2))
    dw = np.matmul(dy2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
    dcols = np.matmul(w.reshape(k, -1).T, dy2).reshape(n, c, 3, 3, h, wd)
    dxp = np.zeros((n, c, h + 2, wd + 2), dtype=dy.dtype)
    for ki in range(3):
        for kj in range(3):
            dxp[:, :, ki : ki + h, kj : kj + wd] += dcols[:, :, ki, kj]
    return dxp[:, :, 1 : h + 1, 1 : wd + 1], dw, db


def _conv1x1_forward(x, w, b):
    n, c, h, wd = x.shape
    k = w.shape[0]
    y = np.matmul(w.reshape(k, c), x.reshape(n, c, h * wd)) + b[:, None]
    return y.reshape(n, k, h, wd)


def _conv1x1_backward(dy, x, w):
    n, c, h, wd = x.shape
    k = w.shape[0]
    dy2 = dy.reshape(n, k, h * wd)
    x2 = x.reshape(n, c, h * wd)
    db = dy2.sum(axis=(0, 2))
    dw = np.matmul(dy2, x2.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
    dx = np.matmul(w.reshape(k, c).T, dy2).reshape(x.shape)
    return dx, dw, db


def _maxpool2x2_forward(x):
    n, c, h, w = x.shape
    win = (
        x.reshape(n, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h // 2, w // 2, 4)
    )
    # argmax keeps the first maximum: ties resolve to the earliest window
    # position in row-major order, which makes backward deterministic
    idx = win.argmax(axis=-1)
    y = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return y, idx


def _maxpool2x2_backward(dy, idx, x_shape):
    n, c, h, w = x_shape
    dwin = np.zeros((n, c, h // 2, w // 2, 4), dtype=dy.dtype)
    np.put_along_axis(dwin, idx[..., None], dy[..., None], axis=-1)
    return (
        dwin.reshape(n, c, h // 2, w // 2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h, w)
    )


def _upconv2x2_forward(x, w, b):
    # y[n, k, 2i+di, 2j+dj] = sum_c x[n, c, i, j] * w[c, k, di, dj] + b[k]
    n, c, h, wd = x.shape
    k = w.shape[1]
    t = np.tensordot(x, w, axes=(1, 0))  # (n, h, w, k, 2, 2)
    y = t.transpose(0, 3, 1, 4, 2, 5).reshape(n, k, 2 * h, 2 * wd)
    return y + b[None, :, None, None]


def _upconv2x2_backward(dy, x, w):
    n, c, h, wd = x.shape
    k = w.shape[1]
    dyw = dy.reshape(n, k, h, 2, wd, 2).transpose(0, 2, 4, 1, 3, 5)  # (n, h, w, k, 2, 2)
    db = dy.sum(axis=(0, 2, 3))
    dw = np.tensordot(x, dyw, axes=([0, 2, 3], [0, 1, 2]))
    dx = np.tensordot(dyw, w, axes=([3, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(dx), dw, db


def _activate(x, activation):
    if activation == "identity":
        return x, None
    y = np.maximum(x, 0.0)
    return y, x > 0.0  # gradient at exactly 0 is 0


def _activate_backward(dy, gate, activation):
    if activation == "identity":
        return dy
    return dy * gate


# ---------------------------------------------------------------------------
# Forward / backward over the whole net
# ---------------------------------------------------------------------------

def unet_forward(
    params: np.ndarray,
    cfg: UNetConfig,
    x: np.ndarray,
    activation: str = "relu",
    want_cache: bool = False,
):
    """Run the net on a batch x of shape (n, in_channels, h, w).

    Returns the (n, out_channels, h, w) score batch, or (scores, cache) when
    want_cache is set; the cache feeds unet_backward.
    """
    if activation not in ("relu", "identity"):
        raise ValueError(f"unknown activation mode {activation!r}")
    if x.ndim != 4 or x.shape[1] != cfg.in_channels:
        raise ValueError(f"expected batch of shape (n, {cfg.in_channels}, h, w), got {x.shape}")
    stride = 1 << cfg.depth
    if x.shape[2] % stride or x.shape[3] % stride:
        raise ValueError(
            f"spatial dims {x.shape[2:]} must be divisible by 2**depth = {stride}"
        )
    if params.dtype != x.dtype:
        raise ValueError(f"params dtype {params.dtype} != input dtype {x.dtype}")

    views = _layout(cfg).views(params)
    cache: dict = {"cfg": cfg, "activation": activation, "views": views} if want_cache else None

    def conv_block(h, name):
        w, b = views[name + ".w"], views[name + ".b"]
        y, cols = _conv3x3_forward(h, w, b)
        out, gate = _activate(y, activation)
        if want_cache:
            cache[name] = (cols, h.shape, gate)
        return out

    h = x
    skips = []
    for i in range(cfg.depth):
        h = conv_block(h, f"enc{i}.conv1")
        h = conv_block(h, f"enc{i}.conv2")
        skips.append(h)
        h, idx = _maxpool2x2_forward(h)
        if want_cache:
            cache[f"enc{i}.pool"] = (idx, skips[-1].shape)
    h = conv_block(h, "bottleneck.conv1")
    h = conv_block(h, "bottleneck.conv2")
    for i in reversed(range(cfg.depth)):
        up_in = h
        h = _upconv2x2_forward(h, views[f"dec{i}.up.w"], views[f"dec{i}.up.b"])
        if want_cache:
            cache[f"dec{i}.up"] = up_in
        h = np.concatenate([skips[i], h], axis=1)  # skip first, upsampled second
        h = conv_block(h, f"dec{i}.conv1")
        h = conv_block(h, f"dec{i}.conv2")
    final_in = h
    scores = _conv1x1_forward(h, views["final.w"], views["final.b"])
    if want_cache:
        cache["final"] = final_in
        return scores, cache
    return scores


def unet_backward(cache: dict, d_scores: np.ndarray) -> np.ndarray:
    """Exact analytic gradients for every parameter, flat canonical layout."""
    cfg: UNetConfig = cache["cfg"]
    views = cache["views"]
    activation = cache["activation"]
    final_in = cache["final"]
    expected = (final_in.shape[0], cfg.out_channels, final_in.shape[2], final_in.shape[3])
    if d_scores.shape != expected:
        raise ValueError(
            f"upstream gradient shape {d_scores.shape} does not match the cached "
            f"forward pass (expected {expected})"
        )
    layout = _layout(cfg)
    grads = np.zeros(layout.n_params, dtype=d_scores.dtype)
    gviews = layout.views(grads)

    def conv_block_backward(dh, name):
        cols, x_shape, gate = cache[name]
        dh = _activate_backward(dh, gate, activation)
        dx, dw, db = _conv3x3_backward(dh, cols, views[name + ".w"], x_shape)
        gviews[name + ".w"] += dw
        gviews[name + ".b"] += db
        return dx

    dh, dw, db = _conv1x1_backward(d_scores, cache["final"], views["final.w"])
    gviews["final.w"] += dw
    gviews["final.b"] += db

    # Decoder levels, shallowest first (reverse of forward application order).
    d_skips: dict[int, np.ndarray] = {}
    for i in range(cfg.depth):
        dh = conv_block_backward(dh, f"dec{i}.conv2")
        dh = conv_block_backward(dh, f"dec{i}.conv1")
        c_skip = views[f"dec{i}.conv1.w"].shape[1] // 2
        d_skips[i] = dh[:, :c_skip]
        dx_up, dw, db = _upconv2x2_backward(
            np.ascontiguousarray(dh[:, c_skip:]), cache[f"dec{i}.up"], views[f"dec{i}.up.w"]
        )
        gviews[f"dec{i}.up.w"] += dw
        gviews[f"dec{i}.up.b"] += db
        dh = dx_up

    dh = conv_block_backward(dh, "bottleneck.conv2")
    dh = conv_block_backward(dh, "bottleneck.conv1")

    # Encoder levels, deepest first; pooled gradient joins the skip branch.
    for i in reversed(range(cfg.depth)):
        idx, pooled_from = cache[f"enc{i}.pool"]
        dh = _maxpool2x2_backward(dh, idx, pooled_from)
        dh = dh + d_skips[i]
        dh = conv_block_backward(dh, f"enc{i}.conv2")
        dh = conv_block_backward(dh, f"enc{i}.conv1")

    return grads
