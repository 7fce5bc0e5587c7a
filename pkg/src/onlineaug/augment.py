"""The 36 candidate augmentation elements and their ordered-pair operations.

Images are ``uint8`` numpy arrays of shape ``(height, width, channels)`` with
``channels`` in {1, 3}. All arithmetic happens in float64; results are
rounded half away from zero and clamped to [0, 255].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import smooth3x3, warp_affine

FILL = 128.0
NUM_ELEMENTS = 36
NUM_OPERATIONS = NUM_ELEMENTS * NUM_ELEMENTS

# (kind, magnitudes) in catalog order
ELEMENT_TABLE: tuple[tuple[str, tuple[float, ...] | None], ...] = (
    ("HorizontalShear", (0.1, 0.2, 0.3)),
    ("VerticalShear", (0.1, 0.2, 0.3)),
    ("HorizontalTranslate", (0.15, 0.3, 0.45)),
    ("VerticalTranslate", (0.15, 0.3, 0.45)),
    ("Rotate", (10.0, 20.0, 30.0)),
    ("ColorAdjust", (0.3, 0.6, 0.9)),
    ("Posterize", (4.4, 5.6, 6.8)),
    ("Solarize", (26.0, 102.0, 179.0)),
    ("Contrast", (1.3, 1.6, 1.9)),
    ("Sharpness", (1.3, 1.6, 1.9)),
    ("Brightness", (1.3, 1.6, 1.9)),
    ("AutoContrast", None),
    ("Equalize", None),
    ("Invert", None),
)
KINDS = tuple(k for k, _ in ELEMENT_TABLE)
MAGNITUDES = dict(ELEMENT_TABLE)
GEOMETRIC_KINDS = frozenset(
    {"HorizontalShear", "VerticalShear", "HorizontalTranslate", "VerticalTranslate", "Rotate"}
)


class ImageError(ValueError):
    pass


@dataclass(frozen=True)
class AugElement:
    kind: str
    magnitude_index: int | None = None
    signed: bool = False

    def __post_init__(self):
        if self.kind not in MAGNITUDES:
            raise ValueError(f"unknown element kind {self.kind!r}")
        mags = MAGNITUDES[self.kind]
        if mags is None:
            if self.magnitude_index is not None:
                raise ValueError(f"{self.kind} takes no magnitude")
        elif self.magnitude_index not in range(len(mags)):
            raise ValueError(f"{self.kind} magnitude index must be 0..{len(mags) - 1}")

    @property
    def magnitude(self) -> float | None:
        mags = MAGNITUDES[self.kind]
        return None if mags is None else mags[self.magnitude_index]

    @property
    def name(self) -> str:
        m = self.magnitude
        return self.kind if m is None else f"{self.kind}({m:g})"


@dataclass(frozen=True)
class AugOperation:
    first: AugElement
    second: AugElement


def element_catalog(signed: bool = True) -> tuple[AugElement, ...]:
    """All 36 elements in table order, magnitudes ascending.

    ``signed`` turns on random direction for the geometric kinds; photometric
    kinds are never signed.
    """
    out = []
    for kind, mags in ELEMENT_TABLE:
        geo = signed and kind in GEOMETRIC_KINDS
        if mags is None:
            out.append(AugElement(kind, None, False))
        else:
            out.extend(AugElement(kind, i, geo) for i in range(len(mags)))
    return tuple(out)


_CATALOG = element_catalog()
_INDEX = {(e.kind, e.magnitude_index): i for i, e in enumerate(_CATALOG)}


def element_index(e: AugElement) -> int:
    return _INDEX[(e.kind, e.magnitude_index)]


def operation_index(op: AugOperation) -> int:
    return NUM_ELEMENTS * element_index(op.first) + element_index(op.second)


def operation_from_index(k: int, catalog=None) -> AugOperation:
    if not 0 <= k < NUM_OPERATIONS:
        raise IndexError(f"operation index {k} outside [0, {NUM_OPERATIONS})")
    cat = _CATALOG if catalog is None else catalog
    return AugOperation(cat[k // NUM_ELEMENTS], cat[k % NUM_ELEMENTS])


def check_image(img: np.ndarray) -> np.ndarray:
    if not isinstance(img, np.ndarray) or img.ndim != 3:
        raise ImageError("image must be an (H, W, C) array")
    h, w, c = img.shape
    if h == 0 or w == 0:
        raise ImageError("image has zero area")
    if c not in (1, 3):
        raise ImageError(f"image must have 1 or 3 channels, got {c}")
    if img.dtype != np.uint8:
        raise ImageError(f"image must be uint8, got {img.dtype}")
    return img


def to_uint8(v: np.ndarray) -> np.ndarray:
    """Round half away from zero, clamp to [0, 255]."""
    r = np.sign(v) * np.floor(np.abs(v) + 0.5)
    return np.clip(r, 0, 255).astype(np.uint8)


def _luma(f: np.ndarray) -> np.ndarray:
    if f.shape[2] == 1:
        return f[..., 0]
    return 0.299 * f[..., 0] + 0.587 * f[..., 1] + 0.114 * f[..., 2]


def _blend(degenerate, f, factor):
    return degenerate + factor * (f - degenerate)


def _affine(kind, mag, sign, h, w):
    """Inverse map coefficients (a, b, c, d, e, f): x_src = a*x + b*y + c, y_src = d*x + e*y + f."""
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    s = float(sign)
    if kind == "HorizontalShear":
        m = s * mag
        return (1.0, m, -m * cy, 0.0, 1.0, 0.0)
    if kind == "VerticalShear":
        m = s * mag
        return (1.0, 0.0, 0.0, m, 1.0, -m * cx)
    if kind == "HorizontalTranslate":
        return (1.0, 0.0, -s * mag * w, 0.0, 1.0, 0.0)
    if kind == "VerticalTranslate":
        return (1.0, 0.0, 0.0, 0.0, 1.0, -s * mag * h)
    # Rotate: the inverse map is a rotation by sign*mag degrees about the center
    t = math.radians(s * mag)
    co, si = math.cos(t), math.sin(t)
    return (co, -si, cx - co * cx + si * cy, si, co, cy - si * cx - co * cy)


def _equalize_channel(ch: np.ndarray) -> np.ndarray:
    hist = np.bincount(ch.ravel(), minlength=256)
    if np.count_nonzero(hist) <= 1:
        return ch
    cdf = np.cumsum(hist)
    lut = to_uint8(255.0 * cdf / cdf[-1])
    return lut[ch]


def _autocontrast_channel(ch: np.ndarray) -> np.ndarray:
    lo, hi = int(ch.min()), int(ch.max())
    if lo == hi:
        return ch
    return to_uint8((ch.astype(np.float64) - lo) * (255.0 / (hi - lo)))


def apply_element(img: np.ndarray, e: AugElement, sign: int = 1) -> np.ndarray:
    """Apply one element. ``sign`` (+1/-1) only matters for signed geometric elements."""
    check_image(img)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    kind, mag = e.kind, e.magnitude
    if kind in GEOMETRIC_KINDS:
        s = sign if e.signed else 1
        h, w, _ = img.shape
        coeffs = np.array(_affine(kind, mag, s, h, w))
        return to_uint8(warp_affine(img.astype(np.float64), coeffs, FILL))
    if kind == "Invert":
        return 255 - img
    if kind == "Posterize":
        bits = int(math.floor(mag))
        mask = np.uint8((0xFF << (8 - bits)) & 0xFF)
        return img & mask
    if kind == "Solarize":
        return np.where(img >= mag, 255 - img, img).astype(np.uint8)
    if kind == "AutoContrast":
        return np.stack([_autocontrast_channel(img[..., c]) for c in range(img.shape[2])], axis=-1)
    if kind == "Equalize":
        return np.stack([_equalize_channel(img[..., c]) for c in range(img.shape[2])], axis=-1)

    f = img.astype(np.float64)
    if kind == "ColorAdjust":
        degenerate = np.repeat(_luma(f)[..., None], f.shape[2], axis=2)
    elif kind == "Contrast":
        degenerate = np.full_like(f, _luma(f).mean())
    elif kind == "Sharpness":
        degenerate = smooth3x3(f)
    elif kind == "Brightness":
        degenerate = np.zeros_like(f)
    else:  # pragma: no cover - guarded by AugElement
        raise ValueError(kind)
    return to_uint8(_blend(degenerate, f, mag))


def draw_signs(rng: np.random.Generator) -> tuple[int, int]:
    a, b = rng.integers(0, 2, size=2)
    return (1 if a else -1, 1 if b else -1)


def apply_operation(img: np.ndarray, op: AugOperation, signs=(1, 1)) -> np.ndarray:
    """First element, then second. ``signs`` is a pair of +-1 or a numpy Generator."""
    if isinstance(signs, np.random.Generator):
        signs = draw_signs(signs)
    s1, s2 = signs
    return apply_element(apply_element(img, op.first, s1), op.second, s2)


# --------------------------------------------------------------------------
# golden fixture files: "H W C\n" followed by H*W*C raw bytes
# --------------------------------------------------------------------------


def write_fixture(path, img: np.ndarray) -> None:
    check_image(img)
    h, w, c = img.shape
    with open(path, "wb") as fh:
        fh.write(f"{h} {w} {c}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


def read_fixture(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    h, w, c = (int(t) for t in raw[:nl].split())
    body = raw[nl + 1 :]
    if len(body) != h * w * c:
        raise ImageError(f"{path}: expected {h * w * c} pixel bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, c).copy()
