"""Scalar reference for the 36 augmentation elements.

Plain Python over nested lists, one pixel at a time, written from the
element definitions and sharing no code with the package. Used to produce
the golden buffers under ``tests/fixtures`` and to cross-check live.

Image convention: ``img[y][x][c]`` ints in 0..255.
"""

import math

FILL = 128.0

KIND_ORDER = [
    ("HorizontalShear", [0.1, 0.2, 0.3]),
    ("VerticalShear", [0.1, 0.2, 0.3]),
    ("HorizontalTranslate", [0.15, 0.3, 0.45]),
    ("VerticalTranslate", [0.15, 0.3, 0.45]),
    ("Rotate", [10.0, 20.0, 30.0]),
    ("ColorAdjust", [0.3, 0.6, 0.9]),
    ("Posterize", [4.4, 5.6, 6.8]),
    ("Solarize", [26.0, 102.0, 179.0]),
    ("Contrast", [1.3, 1.6, 1.9]),
    ("Sharpness", [1.3, 1.6, 1.9]),
    ("Brightness", [1.3, 1.6, 1.9]),
    ("AutoContrast", [None]),
    ("Equalize", [None]),
    ("Invert", [None]),
]
ELEMENTS = [(k, m) for k, ms in KIND_ORDER for m in ms]
GEOMETRIC = {"HorizontalShear", "VerticalShear", "HorizontalTranslate", "VerticalTranslate", "Rotate"}


TIE_EPS = 1e-9


def is_tie(v):
    """True when ``v`` sits on a .5 boundary up to float noise, so either rounding is defensible."""
    return abs(abs(v) - math.floor(abs(v)) - 0.5) < TIE_EPS and -0.5 < v < 255.5


def to_byte(v):
    r = math.floor(abs(v) + 0.5)
    r = r if v >= 0 else -r
    return 0 if r < 0 else 255 if r > 255 else int(r)


def dims(img):
    return len(img), len(img[0]), len(img[0][0])


def source_point(kind, mag, sign, x, y, h, w):
    """Where output pixel (x, y) reads from."""
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    m = sign * mag
    if kind == "HorizontalShear":
        return x + m * (y - cy), y
    if kind == "VerticalShear":
        return x, y + m * (x - cx)
    if kind == "HorizontalTranslate":
        return x - m * w, y
    if kind == "VerticalTranslate":
        return x, y - m * h
    # rotate the offset from the centre by +m degrees
    t = math.radians(m)
    dx, dy = x - cx, y - cy
    return cx + math.cos(t) * dx - math.sin(t) * dy, cy + math.sin(t) * dx + math.cos(t) * dy


def bilinear(img, xs, ys, k):
    h, w, _ = dims(img)
    x0, y0 = math.floor(xs), math.floor(ys)
    fx, fy = xs - x0, ys - y0

    def px(yy, xx):
        if 0 <= yy < h and 0 <= xx < w:
            return float(img[yy][xx][k])
        return FILL

    return (
        (1 - fx) * (1 - fy) * px(y0, x0)
        + fx * (1 - fy) * px(y0, x0 + 1)
        + (1 - fx) * fy * px(y0 + 1, x0)
        + fx * fy * px(y0 + 1, x0 + 1)
    )


def luma(pixel):
    if len(pixel) == 1:
        return float(pixel[0])
    return 0.299 * pixel[0] + 0.587 * pixel[1] + 0.114 * pixel[2]


def apply(img, kind, mag, sign=1):
    return apply_with_ties(img, kind, mag, sign)[0]


def apply_with_ties(img, kind, mag, sign=1):
    """(output, tie mask): the mask flags samples whose unrounded value was a .5 tie."""
    h, w, c = dims(img)
    ties = [[[0] * c for _ in range(w)] for _ in range(h)]

    def put(y, x, k, v):
        ties[y][x][k] = int(is_tie(v))
        return to_byte(v)

    out = [[[0] * c for _ in range(w)] for _ in range(h)]
    if kind in GEOMETRIC:
        for y in range(h):
            for x in range(w):
                xs, ys = source_point(kind, mag, sign, x, y, h, w)
                for k in range(c):
                    out[y][x][k] = put(y, x, k, bilinear(img, xs, ys, k))
        return out, ties
    if kind in ("AutoContrast", "Equalize"):
        for k in range(c):
            vals = [img[y][x][k] for y in range(h) for x in range(w)]
            if kind == "AutoContrast":
                lo, hi = min(vals), max(vals)
                raw = [float(v) if lo == hi else (v - lo) * 255.0 / (hi - lo) for v in range(256)]
            else:
                counts = [0] * 256
                for v in vals:
                    counts[v] += 1
                if sum(1 for n in counts if n) <= 1:
                    raw = [float(v) for v in range(256)]
                else:
                    raw, run = [], 0
                    for n in counts:
                        run += n
                        raw.append(255.0 * run / len(vals))
            for y in range(h):
                for x in range(w):
                    out[y][x][k] = put(y, x, k, raw[img[y][x][k]])
        return out, ties
    mean_luma = sum(luma(img[y][x]) for y in range(h) for x in range(w)) / (h * w)
    for y in range(h):
        for x in range(w):
            for k in range(c):
                v = img[y][x][k]
                if kind == "Invert":
                    out[y][x][k] = 255 - v
                elif kind == "Posterize":
                    keep = int(mag)
                    out[y][x][k] = (v >> (8 - keep)) << (8 - keep)
                elif kind == "Solarize":
                    out[y][x][k] = 255 - v if v >= mag else v
                else:
                    if kind == "Brightness":
                        base = 0.0
                    elif kind == "Contrast":
                        base = mean_luma
                    elif kind == "ColorAdjust":
                        base = luma(img[y][x])
                    elif kind == "Sharpness":
                        if 0 < y < h - 1 and 0 < x < w - 1:
                            ring = sum(img[y + dy][x + dx][k] for dy in (-1, 0, 1) for dx in (-1, 0, 1)) - v
                            base = (ring + 5.0 * v) / 13.0
                        else:
                            base = float(v)
                    else:
                        raise ValueError(kind)
                    out[y][x][k] = put(y, x, k, base + mag * (v - base))
    return out, ties
