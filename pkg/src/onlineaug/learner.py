"""Small classifiers with hand-written backprop, SGD with momentum, and schedules.

Two architectures are built in:

``mlp``       flatten -> dense(64) -> relu -> dense(classes)
``smallcnn``  conv3x3(16) -> relu -> maxpool2 -> conv3x3(32) -> relu -> maxpool2 -> dense(classes)

Weights live in one flat float64 vector; ``ModelWeights.layout`` records the
(name, shape) of each parameter block in order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import conv2d_backward, conv2d_forward, maxpool2_backward, maxpool2_forward

ARCHITECTURES = ("mlp", "smallcnn")
HIDDEN = 64


class NonFiniteError(FloatingPointError):
    """Loss or weights stopped being finite."""


@dataclass
class ModelWeights:
    values: np.ndarray
    layout: list[tuple[str, tuple[int, ...]]]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        n = sum(math.prod(s) for _, s in self.layout)
        if self.values.shape != (n,):
            raise ValueError(f"layout needs {n} values, got {self.values.shape}")

    def copy(self) -> "ModelWeights":
        return ModelWeights(self.values.copy(), list(self.layout))

    def views(self) -> dict[str, np.ndarray]:
        out, off = {}, 0
        for name, shape in self.layout:
            n = math.prod(shape)
            out[name] = self.values[off : off + n].reshape(shape)
            off += n
        return out

    def check_finite(self, context: str = "") -> None:
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteError(f"non-finite weights {context}".strip())


@dataclass(frozen=True)
class ModelSpec:
    arch: str
    input_shape: tuple[int, int, int]  # (channels, height, width)
    num_classes: int

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.arch!r}; choose from {ARCHITECTURES}")
        c, h, w = self.input_shape
        if self.arch == "smallcnn" and (h < 4 or w < 4):
            raise ValueError("smallcnn needs inputs of at least 4x4")

    def layout(self) -> list[tuple[str, tuple[int, ...]]]:
        c, h, w = self.input_shape
        k = self.num_classes
        if self.arch == "mlp":
            d = c * h * w
            return [("fc1.w", (d, HIDDEN)), ("fc1.b", (HIDDEN,)), ("fc2.w", (HIDDEN, k)), ("fc2.b", (k,))]
        d = 32 * (h // 4) * (w // 4)
        return [
            ("conv1.w", (16, c, 3, 3)),
            ("conv1.b", (16,)),
            ("conv2.w", (32, 16, 3, 3)),
            ("conv2.b", (32,)),
            ("fc.w", (d, k)),
            ("fc.b", (k,)),
        ]

    def init(self, rng: np.random.Generator) -> ModelWeights:
        """Glorot-uniform weights, zero biases."""
        layout = self.layout()
        parts = []
        for name, shape in layout:
            if name.endswith(".b"):
                parts.append(np.zeros(shape))
                continue
            if len(shape) == 4:
                fan_in, fan_out = shape[1] * 9, shape[0] * 9
            else:
                fan_in, fan_out = shape
            lim = math.sqrt(6.0 / (fan_in + fan_out))
            parts.append(rng.uniform(-lim, lim, size=shape))
        return ModelWeights(np.concatenate([p.ravel() for p in parts]), layout)

    def zeros(self) -> ModelWeights:
        layout = self.layout()
        return ModelWeights(np.zeros(sum(math.prod(s) for _, s in layout)), layout)


@dataclass(frozen=True)
class TrainHyper:
    base_lr: float = 0.2
    momentum: float = 0.9
    weight_decay: float = 5e-4
    warmup_steps: int = 0
    total_steps: int = 1
    batch_size: int = 256
    warmup_start: float = 0.0

    def __post_init__(self):
        if not self.base_lr > 0:
            raise ValueError("base_lr must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if not 0 <= self.warmup_steps <= self.total_steps:
            raise ValueError("warmup_steps must be within [0, total_steps]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


def _check_input(spec: ModelSpec, x: np.ndarray) -> None:
    if x.ndim != 4 or tuple(x.shape[1:]) != spec.input_shape:
        raise ValueError(f"expected input (B, {spec.input_shape}), got {x.shape}")


def forward(spec: ModelSpec, w: ModelWeights, x: np.ndarray):
    """Class scores for a float batch ``x`` of shape (B, C, H, W), plus a cache for backprop."""
    _check_input(spec, x)
    p = w.views()
    if spec.arch == "mlp":
        flat = x.reshape(x.shape[0], -1)
        z1 = flat @ p["fc1.w"] + p["fc1.b"]
        a1 = np.maximum(z1, 0.0)
        scores = a1 @ p["fc2.w"] + p["fc2.b"]
        return scores, (flat, z1, a1)
    z1 = conv2d_forward(x, p["conv1.w"], p["conv1.b"])
    a1 = np.maximum(z1, 0.0)
    m1, arg1 = maxpool2_forward(a1)
    z2 = conv2d_forward(m1, p["conv2.w"], p["conv2.b"])
    a2 = np.maximum(z2, 0.0)
    m2, arg2 = maxpool2_forward(a2)
    flat = m2.reshape(x.shape[0], -1)
    scores = flat @ p["fc.w"] + p["fc.b"]
    return scores, (x, z1, a1, arg1, m1, z2, a2, arg2, m2, flat)


def _softmax_xent(scores, labels):
    shifted = scores - scores.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    n = scores.shape[0]
    loss = -logp[np.arange(n), labels].mean()
    dscores = np.exp(logp)
    dscores[np.arange(n), labels] -= 1.0
    return loss, dscores / n


def loss_and_grad(spec: ModelSpec, w: ModelWeights, x: np.ndarray, labels: np.ndarray, context: str = ""):
    """Mean softmax cross-entropy over the batch and its gradient (flat, same layout as ``w``)."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (x.shape[0],):
        raise ValueError("labels must match batch size")
    scores, cache = forward(spec, w, x)
    loss, ds = _softmax_xent(scores, labels)
    if not math.isfinite(loss):
        raise NonFiniteError(f"non-finite loss {loss} {context}".strip())
    p = w.views()
    g = {}
    if spec.arch == "mlp":
        flat, z1, a1 = cache
        g["fc2.w"] = a1.T @ ds
        g["fc2.b"] = ds.sum(axis=0)
        da1 = ds @ p["fc2.w"].T
        dz1 = da1 * (z1 > 0)
        g["fc1.w"] = flat.T @ dz1
        g["fc1.b"] = dz1.sum(axis=0)
    else:
        x_in, z1, a1, arg1, m1, z2, a2, arg2, m2, flat = cache
        g["fc.w"] = flat.T @ ds
        g["fc.b"] = ds.sum(axis=0)
        dm2 = (ds @ p["fc.w"].T).reshape(m2.shape)
        da2 = maxpool2_backward(dm2, arg2, a2.shape[2], a2.shape[3])
        dz2 = da2 * (z2 > 0)
        dm1, g["conv2.w"], g["conv2.b"] = conv2d_backward(m1, p["conv2.w"], dz2)
        da1 = maxpool2_backward(dm1, arg1, a1.shape[2], a1.shape[3])
        dz1 = da1 * (z1 > 0)
        _, g["conv1.w"], g["conv1.b"] = conv2d_backward(x_in, p["conv1.w"], dz1)
    grad = np.concatenate([np.asarray(g[name]).ravel() for name, _ in w.layout])
    return float(loss), grad


def sgd_step(w: ModelWeights, grad: np.ndarray, velocity: np.ndarray, lr: float, hyper: TrainHyper):
    """Coupled weight decay inside the momentum buffer.

    ``v <- momentum * v + (grad + weight_decay * w)``; ``w <- w - lr * v``.
    """
    v = hyper.momentum * velocity + (grad + hyper.weight_decay * w.values)
    return ModelWeights(w.values - lr * v, w.layout), v


def cosine_lr(step: int, hyper: TrainHyper) -> float:
    if not 0 <= step < hyper.total_steps:
        raise ValueError(f"step {step} outside [0, {hyper.total_steps})")
    if step < hyper.warmup_steps:
        frac = step / hyper.warmup_steps
        return hyper.warmup_start + (hyper.base_lr - hyper.warmup_start) * frac
    span = hyper.total_steps - hyper.warmup_steps
    progress = (step - hyper.warmup_steps) / span
    return hyper.base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def predict(spec: ModelSpec, w: ModelWeights, x: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """Argmax class per sample; ties go to the lowest class index."""
    out = []
    for i in range(0, x.shape[0], chunk):
        scores, _ = forward(spec, w, x[i : i + chunk])
        out.append(scores.argmax(axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def evaluate_accuracy(spec: ModelSpec, w: ModelWeights, x: np.ndarray, labels: np.ndarray) -> float:
    if x.shape[0] == 0:
        raise ValueError("validation set is empty")
    return float(np.mean(predict(spec, w, x) == np.asarray(labels)))


# --------------------------------------------------------------------------
# checkpoints: text header terminated by a blank line, then little-endian f64
# --------------------------------------------------------------------------

_MAGIC = "onlineaug-checkpoint 1"


def save_checkpoint(path, spec: ModelSpec, w: ModelWeights, meta: dict | None = None) -> None:
    lines = [
        _MAGIC,
        f"arch {spec.arch}",
        "input_shape " + " ".join(str(d) for d in spec.input_shape),
        f"num_classes {spec.num_classes}",
    ]
    for key, val in (meta or {}).items():
        if isinstance(val, (list, tuple, np.ndarray)):
            val = " ".join(repr(float(v)) for v in val)
        lines.append(f"meta.{key} {val}")
    for name, shape in w.layout:
        lines.append(f"layer {name} " + " ".join(str(d) for d in shape))
    header = ("\n".join(lines) + "\n\n").encode("ascii")
    body = np.asarray(w.values, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def load_checkpoint(path) -> tuple[ModelSpec, ModelWeights, dict[str, str]]:
    raw = open(path, "rb").read()
    sep = raw.find(b"\n\n")
    if sep < 0 or not raw.startswith(_MAGIC.encode()):
        raise ValueError(f"{path}: not a checkpoint file")
    lines = raw[:sep].decode("ascii").splitlines()[1:]
    fields, meta, layout = {}, {}, []
    for line in lines:
        key, _, rest = line.partition(" ")
        if key == "layer":
            name, *dims = rest.split()
            layout.append((name, tuple(int(d) for d in dims)))
        elif key.startswith("meta."):
            meta[key[5:]] = rest
        else:
            fields[key] = rest
    spec = ModelSpec(
        fields["arch"],
        tuple(int(d) for d in fields["input_shape"].split()),
        int(fields["num_classes"]),
    )
    values = np.frombuffer(raw[sep + 2 :], dtype="<f8").astype(np.float64)
    if layout != spec.layout():
        raise ValueError(f"{path}: layer layout does not match {spec.arch}")
    return spec, ModelWeights(values, layout), meta
