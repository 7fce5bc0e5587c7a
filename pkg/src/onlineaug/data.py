"""Datasets, CIFAR-10 binary I/O, validation split, and the per-sample pipeline.

Per training sample the stage order is: horizontal flip, zero pad + random
crop, the sampled policy operation, then Cutout. Standardization is applied
later, when a batch is converted to model input.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .augment import AugOperation, apply_operation, check_image, draw_signs

CIFAR_SIDE = 32
CIFAR_RECORD = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE  # 3073 bytes
CIFAR_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST_FILE = "test_batch.bin"
CIFAR_BATCH_RECORDS = 10000


class DataFormatError(ValueError):
    pass


@dataclass
class Dataset:
    images: np.ndarray  # (N, H, W, C) uint8
    labels: np.ndarray  # (N,) int64
    class_count: int
    split_tag: str = "train"

    def __post_init__(self):
        self.images = np.asarray(self.images)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4 or self.images.dtype != np.uint8:
            raise ValueError("images must be a uint8 (N, H, W, C) array")
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError("images and labels differ in length")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValueError(f"labels must lie in [0, {self.class_count})")
        if self.split_tag not in ("train", "val", "test"):
            raise ValueError(f"bad split tag {self.split_tag!r}")

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def subset(self, idx, split_tag: str | None = None) -> "Dataset":
        return Dataset(self.images[idx], self.labels[idx], self.class_count, split_tag or self.split_tag)


# --------------------------------------------------------------------------
# CIFAR-10 binary format
# --------------------------------------------------------------------------


def parse_cifar10_batch(raw: bytes, name: str = "<bytes>", expected_records: int | None = None):
    """Decode records of 1 label byte + 3 channel planes of 32x32 bytes."""
    n, rem = divmod(len(raw), CIFAR_RECORD)
    if rem:
        raise DataFormatError(
            f"{name}: truncated record at byte offset {n * CIFAR_RECORD} "
            f"({rem} of {CIFAR_RECORD} bytes present)"
        )
    if expected_records is not None and n != expected_records:
        raise DataFormatError(f"{name}: {n} records, expected {expected_records}")
    rec = np.frombuffer(raw, dtype=np.uint8).reshape(n, CIFAR_RECORD)
    labels = rec[:, 0].astype(np.int64)
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        i = int(bad[0])
        raise DataFormatError(f"{name}: label {labels[i]} > 9 in record {i} at byte offset {i * CIFAR_RECORD}")
    images = rec[:, 1:].reshape(n, 3, CIFAR_SIDE, CIFAR_SIDE).transpose(0, 2, 3, 1)
    return np.ascontiguousarray(images), labels


def serialize_cifar10_batch(images: np.ndarray, labels: np.ndarray) -> bytes:
    images = np.asarray(images, dtype=np.uint8)
    n = images.shape[0]
    if images.shape[1:] != (CIFAR_SIDE, CIFAR_SIDE, 3):
        raise ValueError("CIFAR images must be 32x32x3")
    rec = np.empty((n, CIFAR_RECORD), dtype=np.uint8)
    rec[:, 0] = labels
    rec[:, 1:] = images.transpose(0, 3, 1, 2).reshape(n, -1)
    return rec.tobytes()


def load_cifar10(directory, expected_records: int | None = CIFAR_BATCH_RECORDS) -> tuple[Dataset, Dataset]:
    directory = Path(directory)
    missing = [f for f in CIFAR_TRAIN_FILES + (CIFAR_TEST_FILE,) if not (directory / f).is_file()]
    if missing:
        raise FileNotFoundError(f"{directory}: missing CIFAR-10 batch files {', '.join(missing)}")

    def read(name):
        path = directory / name
        return parse_cifar10_batch(path.read_bytes(), str(path), expected_records)

    parts = [read(f) for f in CIFAR_TRAIN_FILES]
    train = Dataset(
        np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]), 10, "train"
    )
    ti, tl = read(CIFAR_TEST_FILE)
    return train, Dataset(ti, tl, 10, "test")


def split_validation(train: Dataset, val_size: int, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle; the last ``val_size`` shuffled records form the validation split."""
    n = len(train)
    if not 0 < val_size < n:
        raise ValueError(f"val_size must be in (0, {n}), got {val_size}")
    perm = np.random.default_rng(seed).permutation(n)
    return train.subset(perm[: n - val_size], "train"), train.subset(perm[n - val_size :], "val")


def channel_stats(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    x = ds.images.reshape(-1, ds.images.shape[-1]).astype(np.float64)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    return mean, np.where(std > 0, std, 1.0)


def to_model_input(images: np.ndarray, mean, std) -> np.ndarray:
    """uint8 (B, H, W, C) -> standardized float64 (B, C, H, W)."""
    x = (images.astype(np.float64) - mean) / std
    return np.ascontiguousarray(x.transpose(0, 3, 1, 2))


# --------------------------------------------------------------------------
# per-sample pipeline
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PreprocSpec:
    flip_prob: float = 0.5
    pad: int = 4
    crop: int = 32
    cutout: int = 16
    flip: bool = True
    pad_crop: bool = True
    use_cutout: bool = True
    policy: bool = True

    def validate(self, image_shape) -> None:
        h, w, _ = image_shape
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError("flip_prob must be in [0, 1]")
        if self.pad_crop and self.crop > min(h, w) + 2 * self.pad:
            raise ValueError(f"crop {self.crop} exceeds padded size {min(h, w) + 2 * self.pad}")
        out = self.crop if self.pad_crop else min(h, w)
        if self.use_cutout and self.cutout > out:
            raise ValueError(f"cutout {self.cutout} exceeds crop {out}")

    def output_shape(self, image_shape) -> tuple[int, int, int]:
        h, w, c = image_shape
        return (self.crop, self.crop, c) if self.pad_crop else (h, w, c)

    @classmethod
    def disabled(cls) -> "PreprocSpec":
        return cls(flip=False, pad_crop=False, use_cutout=False, policy=False)


@dataclass(frozen=True)
class PreprocDraws:
    """Random choices of the non-policy stages for one sample."""

    flip: bool
    crop_y: int
    crop_x: int
    cut_y: int
    cut_x: int


def draw_preproc(spec: PreprocSpec, image_shape, rng: np.random.Generator) -> PreprocDraws:
    # every field is always drawn so the stream position never depends on the flags
    h, w, _ = image_shape
    flip = bool(rng.random() < spec.flip_prob)
    room_y = max(h + 2 * spec.pad - spec.crop, 0)
    room_x = max(w + 2 * spec.pad - spec.crop, 0)
    cy, cx = int(rng.integers(0, room_y + 1)), int(rng.integers(0, room_x + 1))
    oh, ow, _ = spec.output_shape(image_shape)
    uy, ux = int(rng.integers(0, oh)), int(rng.integers(0, ow))
    return PreprocDraws(flip, cy, cx, uy, ux)


def cutout(img: np.ndarray, size: int, cy: int, cx: int, fill: int = 128) -> np.ndarray:
    """Fill a size x size square centred at (cy, cx), clipped at the borders."""
    out = img.copy()
    h, w, _ = img.shape
    y0, x0 = cy - size // 2, cx - size // 2
    out[max(y0, 0) : min(y0 + size, h), max(x0, 0) : min(x0 + size, w)] = fill
    return out


def pad_crop(img: np.ndarray, pad: int, crop: int, oy: int, ox: int) -> np.ndarray:
    padded = np.pad(img, ((pad, pad), (pad, pad), (0, 0)))
    return padded[oy : oy + crop, ox : ox + crop]


def apply_pipeline(
    img: np.ndarray,
    spec: PreprocSpec,
    policy_op: AugOperation | None,
    rng: np.random.Generator | None = None,
    draws: PreprocDraws | None = None,
    signs: tuple[int, int] | None = None,
    stage_log: list | None = None,
) -> np.ndarray:
    """Run flip -> pad/crop -> policy operation -> cutout on one image.

    ``draws`` and ``signs`` may be supplied precomputed (the search engine
    shares ``draws`` across trajectories); missing ones come from ``rng``.
    """
    check_image(img)
    if draws is None:
        draws = draw_preproc(spec, img.shape, rng)
    log = stage_log.append if stage_log is not None else (lambda s: None)
    log("standardize")  # bookkeeping only: statistics are applied at model input
    out = img
    if spec.flip:
        log("flip")
        if draws.flip:
            out = out[:, ::-1]
    if spec.pad_crop:
        log("pad_crop")
        out = pad_crop(out, spec.pad, spec.crop, draws.crop_y, draws.crop_x)
    if spec.policy and policy_op is not None:
        log("policy")
        if signs is None:
            signs = draw_signs(rng)
        out = apply_operation(np.ascontiguousarray(out), policy_op, signs)
    if spec.use_cutout:
        log("cutout")
        out = cutout(out, spec.cutout, draws.cut_y, draws.cut_x)
    return np.ascontiguousarray(out)


# --------------------------------------------------------------------------
# synthetic bandit task
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Two-class task: which half of the image holds a bright square.

    The background is noisy gray around 128 (the geometric fill value, so
    translation borders are invisible). The square sits near the left or right
    edge, between 0.3 and 0.45 of the width from the centre. A 0.45-width
    horizontal translation towards the centre carries it across the midline
    (the label flips) and one away from the centre pushes it off the image;
    the 0.15 and 0.3 translations and every other element keep it on its side
    or only erase it.
    """

    size: int = 16
    num_samples: int = 2000
    classes: int = 2
    destructive: str = "HorizontalTranslate"
    patch: int = 3
    noise: int = 10
    contrast: int = 25
    seed: int = 0

    def validate(self) -> None:
        if not 0 <= self.noise <= 60 or not 1 <= self.contrast <= 127 - self.noise:
            raise ValueError("noise must be in [0, 60] and contrast in [1, 127 - noise]")
        if self.classes != 2:
            raise ValueError("the synthetic task has exactly 2 classes")
        if self.num_samples < 2 or self.num_samples % 2:
            raise ValueError("num_samples must be a positive even number")
        if self.destructive != "HorizontalTranslate":
            raise ValueError("only the 'HorizontalTranslate' destructive construction is available")
        if self.size < 12:
            raise ValueError("size must be at least 12")
        if not 1 <= self.patch <= self.size // 4:
            raise ValueError("patch must be between 1 and size/4")

    def patch_columns(self) -> tuple[int, int]:
        """Leftmost column range for the left-side square (mirrored for the right side)."""
        c = (self.size - 1) / 2.0
        lo = c - 0.45 * self.size + self.patch / 2.0  # patch centre must stay within 0.45*size of c
        hi = c - 0.3 * self.size - self.patch / 2.0
        x_lo = max(0, int(np.ceil(lo - (self.patch - 1) / 2.0)))
        x_hi = int(np.floor(hi - (self.patch - 1) / 2.0))
        return x_lo, max(x_lo, x_hi)


def synthetic_bandit_dataset(spec: SyntheticSpec) -> Dataset:
    """Balanced left/right dataset; label 0 = bright square on the left, 1 = on the right."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, s, p = spec.num_samples, spec.size, spec.patch
    labels = np.repeat(np.arange(2), n // 2)
    rng.shuffle(labels)
    images = rng.integers(128 - spec.noise, 129 + spec.noise, size=(n, s, s, 1)).astype(np.uint8)
    x_lo, x_hi = spec.patch_columns()
    mid = (s - p) // 2
    xs = rng.integers(x_lo, x_hi + 1, size=n)
    ys = rng.integers(mid - 1, mid + 2, size=n)
    for i in range(n):
        x = xs[i] if labels[i] == 0 else s - p - xs[i]
        region = images[i, ys[i] : ys[i] + p, x : x + p, 0]
        region += np.uint8(spec.contrast)
    return Dataset(images, labels, 2, "train")
