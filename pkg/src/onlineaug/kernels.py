"""Hot numeric loops: image warping/smoothing and small-convnet layers.

Every kernel comes in two flavours: an explicit-loop version compiled by
numba and a vectorized numpy version. ``_jit.USE_NUMBA`` decides which one the
public names bind to. The image kernels are written so both paths perform the
same float operations in the same order and agree bit for bit; the conv
kernels agree to rounding error.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._jit import njit, pick

__all__ = [
    "warp_affine",
    "smooth3x3",
    "conv2d_forward",
    "conv2d_backward",
    "maxpool2_forward",
    "maxpool2_backward",
]


# --------------------------------------------------------------------------
# image kernels (float64, H x W x C)
# --------------------------------------------------------------------------


@njit
def _warp_affine_loop(img, coeffs, fill):
    h, w, ch = img.shape
    out = np.empty((h, w, ch))
    a, b, c, d, e, f = coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4], coeffs[5]
    for y in range(h):
        for x in range(w):
            xs = a * x + b * y + c
            ys = d * x + e * y + f
            x0f = np.floor(xs)
            y0f = np.floor(ys)
            fx = xs - x0f
            fy = ys - y0f
            x0 = int(x0f)
            y0 = int(y0f)
            w00 = (1.0 - fx) * (1.0 - fy)
            w01 = fx * (1.0 - fy)
            w10 = (1.0 - fx) * fy
            w11 = fx * fy
            in_x0 = 0 <= x0 < w
            in_x1 = 0 <= x0 + 1 < w
            in_y0 = 0 <= y0 < h
            in_y1 = 0 <= y0 + 1 < h
            for k in range(ch):
                p00 = img[y0, x0, k] if (in_y0 and in_x0) else fill
                p01 = img[y0, x0 + 1, k] if (in_y0 and in_x1) else fill
                p10 = img[y0 + 1, x0, k] if (in_y1 and in_x0) else fill
                p11 = img[y0 + 1, x0 + 1, k] if (in_y1 and in_x1) else fill
                out[y, x, k] = w00 * p00 + w01 * p01 + w10 * p10 + w11 * p11
    return out


def _warp_affine_numpy(img, coeffs, fill):
    h, w, ch = img.shape
    a, b, c, d, e, f = (float(v) for v in coeffs)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    xsrc = a * xs + b * ys + c
    ysrc = d * xs + e * ys + f
    x0f = np.floor(xsrc)
    y0f = np.floor(ysrc)
    fx = (xsrc - x0f)[..., None]
    fy = (ysrc - y0f)[..., None]
    x0 = x0f.astype(np.int64)
    y0 = y0f.astype(np.int64)

    def tap(yy, xx):
        ok = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        vals = img[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
        return np.where(ok[..., None], vals, fill)

    w00 = (1.0 - fx) * (1.0 - fy)
    w01 = fx * (1.0 - fy)
    w10 = (1.0 - fx) * fy
    w11 = fx * fy
    return (
        w00 * tap(y0, x0)
        + w01 * tap(y0, x0 + 1)
        + w10 * tap(y0 + 1, x0)
        + w11 * tap(y0 + 1, x0 + 1)
    )


@njit
def _smooth3x3_loop(img):
    h, w, ch = img.shape
    out = img.copy()
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            for k in range(ch):
                s = (
                    img[y - 1, x - 1, k]
                    + img[y - 1, x, k]
                    + img[y - 1, x + 1, k]
                    + img[y, x - 1, k]
                    + 5.0 * img[y, x, k]
                    + img[y, x + 1, k]
                    + img[y + 1, x - 1, k]
                    + img[y + 1, x, k]
                    + img[y + 1, x + 1, k]
                )
                out[y, x, k] = s / 13.0
    return out


def _smooth3x3_numpy(img):
    h, w, _ = img.shape
    out = img.copy()
    if h < 3 or w < 3:
        return out
    p = img
    s = (
        p[:-2, :-2]
        + p[:-2, 1:-1]
        + p[:-2, 2:]
        + p[1:-1, :-2]
        + 5.0 * p[1:-1, 1:-1]
        + p[1:-1, 2:]
        + p[2:, :-2]
        + p[2:, 1:-1]
        + p[2:, 2:]
    )
    out[1:-1, 1:-1] = s / 13.0
    return out


# --------------------------------------------------------------------------
# convnet kernels (NCHW, 3x3 kernels, stride 1, zero padding 1)
# --------------------------------------------------------------------------


@njit
def _im2col(x):
    # (n, cin, h, w) -> (n*h*w, cin*9), zero outside the image
    n, cin, h, wd = x.shape
    cols = np.zeros((n * h * wd, cin * 9))
    for i in range(n):
        for y in range(h):
            for xx in range(wd):
                r = (i * h + y) * wd + xx
                for c in range(cin):
                    for ky in range(3):
                        sy = y + ky - 1
                        if sy < 0 or sy >= h:
                            continue
                        for kx in range(3):
                            sx = xx + kx - 1
                            if 0 <= sx < wd:
                                cols[r, c * 9 + ky * 3 + kx] = x[i, c, sy, sx]
    return cols


@njit
def _col2im(dcols, n, cin, h, wd):
    dx = np.zeros((n, cin, h, wd))
    for i in range(n):
        for y in range(h):
            for xx in range(wd):
                r = (i * h + y) * wd + xx
                for c in range(cin):
                    for ky in range(3):
                        sy = y + ky - 1
                        if sy < 0 or sy >= h:
                            continue
                        for kx in range(3):
                            sx = xx + kx - 1
                            if 0 <= sx < wd:
                                dx[i, c, sy, sx] += dcols[r, c * 9 + ky * 3 + kx]
    return dx


@njit
def _conv2d_forward_loop(x, w, b):
    n, cin, h, wd = x.shape
    cout = w.shape[0]
    cols = _im2col(np.ascontiguousarray(x))
    wm = np.ascontiguousarray(w).reshape(cout, cin * 9)
    flat = np.dot(cols, wm.T.copy())  # n*h*w, cout
    out = np.empty((n, cout, h, wd))
    for i in range(n):
        for y in range(h):
            for xx in range(wd):
                r = (i * h + y) * wd + xx
                for o in range(cout):
                    out[i, o, y, xx] = flat[r, o] + b[o]
    return out


@njit
def _conv2d_backward_loop(x, w, dout):
    n, cin, h, wd = x.shape
    cout = w.shape[0]
    cols = _im2col(np.ascontiguousarray(x))
    dmat = np.empty((n * h * wd, cout))
    for i in range(n):
        for y in range(h):
            for xx in range(wd):
                r = (i * h + y) * wd + xx
                for o in range(cout):
                    dmat[r, o] = dout[i, o, y, xx]
    db = np.zeros(cout)
    for r in range(dmat.shape[0]):
        for o in range(cout):
            db[o] += dmat[r, o]
    dw = np.dot(dmat.T.copy(), cols).reshape(cout, cin, 3, 3)
    wm = np.ascontiguousarray(w).reshape(cout, cin * 9)
    dx = _col2im(np.dot(dmat, wm), n, cin, h, wd)
    return dx, dw, db


def _patches(x):
    # (n, cin, h, w) -> (n, h, w, cin, 3, 3)
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (3, 3), axis=(2, 3))  # n, cin, h, w, 3, 3
    return win.transpose(0, 2, 3, 1, 4, 5)


def _conv2d_forward_numpy(x, w, b):
    cols = _patches(x)
    out = np.tensordot(cols, w, axes=([3, 4, 5], [1, 2, 3]))  # n, h, w, cout
    return out.transpose(0, 3, 1, 2) + b[None, :, None, None]


def _conv2d_backward_numpy(x, w, dout):
    n, cin, h, wd = x.shape
    cols = _patches(x)
    db = dout.sum(axis=(0, 2, 3))
    dw = np.tensordot(dout, cols, axes=([0, 2, 3], [0, 1, 2]))  # cout, cin, 3, 3
    # input grad is a full correlation with the flipped kernel
    wf = w[:, :, ::-1, ::-1]
    dcols = _patches(dout)  # n, h, w, cout, 3, 3
    dx = np.tensordot(dcols, wf, axes=([3, 4, 5], [0, 2, 3])).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(dx), dw, db


@njit
def _maxpool2_forward_loop(x):
    n, c, h, w = x.shape
    ho, wo = h // 2, w // 2
    out = np.empty((n, c, ho, wo))
    arg = np.empty((n, c, ho, wo), dtype=np.int64)
    for i in range(n):
        for k in range(c):
            for y in range(ho):
                for xx in range(wo):
                    best = x[i, k, 2 * y, 2 * xx]
                    bi = 0
                    for j in range(1, 4):
                        v = x[i, k, 2 * y + j // 2, 2 * xx + j % 2]
                        if v > best:
                            best = v
                            bi = j
                    out[i, k, y, xx] = best
                    arg[i, k, y, xx] = bi
    return out, arg


def _maxpool2_forward_numpy(x):
    n, c, h, w = x.shape
    ho, wo = h // 2, w // 2
    blocks = x[:, :, : 2 * ho, : 2 * wo].reshape(n, c, ho, 2, wo, 2)
    blocks = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, 4)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    return out, arg


@njit
def _maxpool2_backward_loop(dout, arg, h, w):
    n, c, ho, wo = dout.shape
    dx = np.zeros((n, c, h, w))
    for i in range(n):
        for k in range(c):
            for y in range(ho):
                for xx in range(wo):
                    j = arg[i, k, y, xx]
                    dx[i, k, 2 * y + j // 2, 2 * xx + j % 2] = dout[i, k, y, xx]
    return dx


def _maxpool2_backward_numpy(dout, arg, h, w):
    n, c, ho, wo = dout.shape
    blocks = np.zeros((n, c, ho, wo, 4))
    np.put_along_axis(blocks, arg[..., None], dout[..., None], axis=-1)
    blocks = blocks.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    dx = np.zeros((n, c, h, w))
    dx[:, :, : 2 * ho, : 2 * wo] = blocks.reshape(n, c, 2 * ho, 2 * wo)
    return dx


warp_affine = pick(_warp_affine_loop, _warp_affine_numpy)
smooth3x3 = pick(_smooth3x3_loop, _smooth3x3_numpy)
conv2d_forward = pick(_conv2d_forward_loop, _conv2d_forward_numpy)
conv2d_backward = pick(_conv2d_backward_loop, _conv2d_backward_numpy)
maxpool2_forward = pick(_maxpool2_forward_loop, _maxpool2_forward_numpy)
maxpool2_backward = pick(_maxpool2_backward_loop, _maxpool2_backward_numpy)

# both implementations stay importable for tests and the benchmark
IMPLEMENTATIONS = {
    "warp_affine": (_warp_affine_loop, _warp_affine_numpy),
    "smooth3x3": (_smooth3x3_loop, _smooth3x3_numpy),
    "conv2d_forward": (_conv2d_forward_loop, _conv2d_forward_numpy),
    "conv2d_backward": (_conv2d_backward_loop, _conv2d_backward_numpy),
    "maxpool2_forward": (_maxpool2_forward_loop, _maxpool2_forward_numpy),
    "maxpool2_backward": (_maxpool2_backward_loop, _maxpool2_backward_numpy),
}
