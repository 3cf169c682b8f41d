"""Independent reference implementations used as test oracles.

Everything here is deliberately naive (explicit loops, exact integer
arithmetic) and shares no code with the implementations under test beyond
the parameter-layout contract.
"""

import numpy as np

from lesionseg.postprocess import gaussian_kernel
from lesionseg.unet import _layout


def scalar_conv3x3(a, w, b):
    """Zero-padded 3x3 convolution on one image (c, h, w), explicit loops."""
    c_out = w.shape[0]
    c_in, h, wd = a.shape
    out = np.zeros((c_out, h, wd), dtype=np.float64)
    for k in range(c_out):
        for y in range(h):
            for x in range(wd):
                acc = float(b[k])
                for c in range(c_in):
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            yy, xx = y + dy, x + dx
                            if 0 <= yy < h and 0 <= xx < wd:
                                acc += w[k, c, dy + 1, dx + 1] * a[c, yy, xx]
                out[k, y, x] = acc
    return out


def scalar_maxpool2x2(a):
    c, h, w = a.shape
    out = np.zeros((c, h // 2, w // 2), dtype=np.float64)
    for k in range(c):
        for y in range(h // 2):
            for x in range(w // 2):
                best = None
                for dy in (0, 1):
                    for dx in (0, 1):
                        v = a[k, 2 * y + dy, 2 * x + dx]
                        if best is None or v > best:  # first max wins ties
                            best = v
                out[k, y, x] = best
    return out


def scalar_upconv2x2(a, w, b):
    c_in, h, wd = a.shape
    c_out = w.shape[1]
    out = np.zeros((c_out, 2 * h, 2 * wd), dtype=np.float64)
    for k in range(c_out):
        out[k] += b[k]
        for c in range(c_in):
            for y in range(h):
                for x in range(wd):
                    for dy in (0, 1):
                        for dx in (0, 1):
                            out[k, 2 * y + dy, 2 * x + dx] += a[c, y, x] * w[c, k, dy, dx]
    return out


def scalar_relu(a, activation):
    if activation == "identity":
        return a
    return np.maximum(a, 0.0)


def scalar_unet_forward(params, cfg, image, activation="relu"):
    """Single-image forward pass with loop-based primitives; image (c, h, w)."""
    views = _layout(cfg).views(params)
    h = np.asarray(image, dtype=np.float64)
    skips = []
    for i in range(cfg.depth):
        h = scalar_relu(scalar_conv3x3(h, views[f"enc{i}.conv1.w"], views[f"enc{i}.conv1.b"]), activation)
        h = scalar_relu(scalar_conv3x3(h, views[f"enc{i}.conv2.w"], views[f"enc{i}.conv2.b"]), activation)
        skips.append(h)
        h = scalar_maxpool2x2(h)
    h = scalar_relu(scalar_conv3x3(h, views["bottleneck.conv1.w"], views["bottleneck.conv1.b"]), activation)
    h = scalar_relu(scalar_conv3x3(h, views["bottleneck.conv2.w"], views["bottleneck.conv2.b"]), activation)
    for i in reversed(range(cfg.depth)):
        h = scalar_upconv2x2(h, views[f"dec{i}.up.w"], views[f"dec{i}.up.b"])
        h = np.concatenate([skips[i], h], axis=0)
        h = scalar_relu(scalar_conv3x3(h, views[f"dec{i}.conv1.w"], views[f"dec{i}.conv1.b"]), activation)
        h = scalar_relu(scalar_conv3x3(h, views[f"dec{i}.conv2.w"], views[f"dec{i}.conv2.b"]), activation)
    w_final = views["final.w"][:, :, 0, 0]
    b_final = views["final.b"]
    c_out = w_final.shape[0]
    hh, ww = h.shape[1], h.shape[2]
    out = np.zeros((c_out, hh, ww), dtype=np.float64)
    for k in range(c_out):
        for c in range(h.shape[0]):
            out[k] += w_final[k, c] * h[c]
        out[k] += b_final[k]
    return out


def dense_gaussian_blur(plane, sigma):
    """Direct 2-D convolution with the outer-product kernel, edge replication."""
    plane = np.asarray(plane, dtype=np.float64)
    k = gaussian_kernel(sigma)
    r = k.size // 2
    if r == 0:
        return plane.copy()
    k2 = np.outer(k, k)
    h, w = plane.shape
    padded = np.pad(plane, r, mode="edge")
    out = np.zeros((h, w), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            out[i, j] = (padded[i : i + 2 * r + 1, j : j + 2 * r + 1] * k2).sum()
    return out


def exact_otsu_cut(values, bins=256):
    """Exhaustive Otsu scan in exact integer arithmetic.

    Bin indices stand in for the class values (they are an affine image of the
    bin centers, so the maximizing cut is the same) and variances compare by
    integer cross-multiplication, so ties resolve with no rounding at all.
    Returns the cut index (lower class = bins 0..cut), or None if fewer than
    two bins are occupied.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    counts, _ = np.histogram(v, bins=bins, range=(float(v.min()), float(v.max())))
    counts = [int(c) for c in counts]
    if sum(1 for c in counts if c) <= 1:
        return None
    n = sum(counts)
    s_all = sum(c * i for i, c in enumerate(counts))
    best = (0, 1)  # variance as the exact ratio A / (B * n^2)
    best_cut = None
    n0 = 0
    s0 = 0
    for cut in range(len(counts) - 1):
        n0 += counts[cut]
        s0 += counts[cut] * cut
        n1 = n - n0
        if n0 == 0 or n1 == 0:
            a, b = 0, 1
        else:
            a = (s0 * n1 - (s_all - s0) * n0) ** 2
            b = n0 * n1
        if best_cut is None or a * best[1] > best[0] * b:
            best, best_cut = (a, b), cut
    return best_cut
