"""Run configuration: a flat TOML file of typed keys, strictly validated.

Every key is optional. Defaults suit the built-in synthetic task; choosing
``dataset = "cifar10"`` switches the unset preprocessing keys to flip, pad-crop
and cutout. ``build_settings`` turns a config into engine objects and
``resolved_text`` writes the fully materialized config.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import tomli

from .augment import NUM_OPERATIONS
from .data import Dataset, PreprocSpec, SyntheticSpec, load_cifar10, split_validation, synthetic_bandit_dataset
from .engine import SearchSettings
from .learner import ARCHITECTURES, ModelSpec, TrainHyper


class ConfigError(ValueError):
    """One or more config fields are invalid; ``problems`` lists them."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid config:\n  " + "\n  ".join(problems))


@dataclass
class RunConfig:
    # data
    dataset: str = "synthetic"
    data_dir: str = ""
    val_size: int = 0  # 0: 5000 for cifar10, a quarter of the samples for synthetic
    synthetic_size: int = 16
    synthetic_samples: int = 2000
    synthetic_noise: int = 10
    synthetic_contrast: int = 25
    synthetic_patch: int = 3
    synthetic_destructive: str = "HorizontalTranslate"
    # model and inner loop
    arch: str = "mlp"
    base_lr: float = 0.2
    momentum: float = 0.9
    weight_decay: float = 5e-4
    warmup_steps: int = 0
    warmup_start: float = 0.0
    batch_size: int = 256
    # preprocessing (flipping would swap the synthetic left/right label)
    flip: bool = False
    flip_prob: float = 0.5
    pad_crop: bool = False
    pad: int = 4
    crop: int = 32
    cutout: bool = False
    cutout_size: int = 16
    # policy and outer loop
    policy_lr: float = 0.05
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    baseline: bool = True
    num_traj: int = 8
    inner_steps: int = 0  # 0: one epoch, ceil(train size / batch size)
    outer_steps: int = 100
    search_space: str = "all"  # "all", or comma-separated operation indices / a-b ranges
    signed: bool = True
    reset_velocity: bool = True
    val_subsample: int = 0
    # run
    seed: int = 0
    workers: int = 1
    output_dir: str = "runs/default"
    export_every: int = 0  # write the distribution every k outer steps (0: only at the end)
    log_wall_time: bool = False

    def hash(self) -> str:
        """Digest of everything that can change results (not output_dir or workers)."""
        d = asdict(self)
        for k in ("output_dir", "workers"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


_FIELDS = {f.name: f for f in fields(RunConfig)}
CIFAR_DEFAULTS = {"flip": True, "pad_crop": True, "cutout": True}
_TYPES = {"int": int, "float": float, "bool": bool, "str": str}


def _line_of(text: str, key: str) -> str:
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for n, line in enumerate(text.splitlines(), 1):
        if pat.match(line):
            return f"line {n}"
    return "line ?"


def _coerce(key: str, value, where: str, problems: list[str]):
    want = _TYPES[_FIELDS[key].type]
    if want is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if want is int and isinstance(value, bool) or not isinstance(value, want):
        problems.append(f"{key} ({where}): expected {want.__name__}, got {type(value).__name__} {value!r}")
        return None
    return value


def parse_search_space(text: str) -> np.ndarray:
    text = text.strip()
    if text == "all":
        return np.arange(NUM_OPERATIONS)
    out = []
    for part in text.split(","):
        part = part.strip()
        lo, sep, hi = part.partition("-")
        try:
            out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
        except ValueError:
            raise ValueError(f"bad search_space item {part!r}") from None
    return np.array(out, dtype=np.int64)


def _check(cfg: RunConfig, text: str, problems: list[str]) -> None:
    def bad(key, msg):
        problems.append(f"{key} ({_line_of(text, key) if text else 'default'}): {msg}")

    if cfg.dataset not in ("synthetic", "cifar10"):
        bad("dataset", "must be 'synthetic' or 'cifar10'")
    if cfg.dataset == "cifar10" and not Path(cfg.data_dir).is_dir():
        bad("data_dir", f"directory {cfg.data_dir!r} does not exist")
    if cfg.arch not in ARCHITECTURES:
        bad("arch", f"must be one of {ARCHITECTURES}")
    if cfg.num_traj < 1:
        bad("num_traj", "must be >= 1")
    elif cfg.num_traj == 1 and cfg.baseline:
        bad(
            "num_traj",
            "1 trajectory with the mean baseline makes every policy gradient exactly zero "
            "(the only accuracy equals its own mean); use num_traj >= 2 or baseline = false",
        )
    if cfg.policy_lr < 0:
        bad("policy_lr", "must be >= 0")
    for key in ("beta1", "beta2"):
        if not 0 <= getattr(cfg, key) < 1:
            bad(key, "must be in [0, 1)")
    if not cfg.adam_eps > 0:
        bad("adam_eps", "must be > 0")
    if not cfg.base_lr > 0:
        bad("base_lr", "must be > 0")
    if not 0 <= cfg.momentum < 1:
        bad("momentum", "must be in [0, 1)")
    if cfg.weight_decay < 0:
        bad("weight_decay", "must be >= 0")
    for key in ("batch_size", "outer_steps", "workers"):
        if getattr(cfg, key) < 1:
            bad(key, "must be >= 1")
    for key in ("inner_steps", "warmup_steps", "val_size", "val_subsample", "export_every", "pad"):
        if getattr(cfg, key) < 0:
            bad(key, "must be >= 0")
    if not 0 <= cfg.flip_prob <= 1:
        bad("flip_prob", "must be in [0, 1]")
    for key in ("base_lr", "policy_lr", "weight_decay", "warmup_start", "flip_prob"):
        if not math.isfinite(getattr(cfg, key)):
            bad(key, "must be finite")
    try:
        parse_search_space(cfg.search_space)
    except ValueError as exc:
        bad("search_space", str(exc))


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([f"{source}: {exc}"]) from None
    problems: list[str] = []
    values = {}
    for key, value in raw.items():
        where = _line_of(text, key)
        if key not in _FIELDS:
            problems.append(f"{key} ({where}): unknown key")
            continue
        value = _coerce(key, value, where, problems)
        if value is not None:
            values[key] = value
    if values.get("dataset") == "cifar10":
        for key, value in CIFAR_DEFAULTS.items():
            values.setdefault(key, value)
    cfg = RunConfig(**values)
    _check(cfg, text, problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def parse_config(path) -> RunConfig:
    path = Path(path)
    return parse_config_text(path.read_text(), str(path))


# --------------------------------------------------------------------------
# turning a config into engine objects
# --------------------------------------------------------------------------


def synthetic_spec(cfg: RunConfig) -> SyntheticSpec:
    return SyntheticSpec(
        size=cfg.synthetic_size,
        num_samples=cfg.synthetic_samples,
        destructive=cfg.synthetic_destructive,
        patch=cfg.synthetic_patch,
        noise=cfg.synthetic_noise,
        contrast=cfg.synthetic_contrast,
        seed=cfg.seed,
    )


def load_datasets(cfg: RunConfig) -> tuple[Dataset, Dataset]:
    """(train, validation) split for the configured dataset."""
    if cfg.dataset == "cifar10":
        train, _test = load_cifar10(cfg.data_dir)
        return split_validation(train, cfg.val_size or 5000, cfg.seed)
    full = synthetic_bandit_dataset(synthetic_spec(cfg))
    return split_validation(full, cfg.val_size or len(full) // 4, cfg.seed)


def preproc_spec(cfg: RunConfig) -> PreprocSpec:
    return PreprocSpec(
        flip_prob=cfg.flip_prob,
        pad=cfg.pad,
        crop=cfg.crop,
        cutout=cfg.cutout_size,
        flip=cfg.flip,
        pad_crop=cfg.pad_crop,
        use_cutout=cfg.cutout,
    )


def resolve_inner_steps(cfg: RunConfig, train_size: int) -> int:
    return cfg.inner_steps or math.ceil(train_size / cfg.batch_size)


def build_settings(cfg: RunConfig, train: Dataset) -> SearchSettings:
    pre = preproc_spec(cfg)
    h, w, c = pre.output_shape(train.image_shape)
    inner = resolve_inner_steps(cfg, len(train))
    hyper = TrainHyper(
        base_lr=cfg.base_lr,
        momentum=cfg.momentum,
        weight_decay=cfg.weight_decay,
        warmup_steps=cfg.warmup_steps,
        total_steps=inner * cfg.outer_steps,
        batch_size=cfg.batch_size,
        warmup_start=cfg.warmup_start,
    )
    return SearchSettings(
        model=ModelSpec(cfg.arch, (c, h, w), train.class_count),
        hyper=hyper,
        num_traj=cfg.num_traj,
        inner_steps=inner,
        outer_steps=cfg.outer_steps,
        policy_lr=cfg.policy_lr,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        eps=cfg.adam_eps,
        baseline=cfg.baseline,
        seed=cfg.seed,
        preproc=pre,
        search_space=parse_search_space(cfg.search_space),
        signed=cfg.signed,
        reset_velocity=cfg.reset_velocity,
        workers=cfg.workers,
        val_subsample=cfg.val_subsample,
    )


STREAM_RULES = (
    "initial weights: SeedSequence([seed, 0])",
    "batch schedule and flip/crop/cutout draws of outer step T: SeedSequence([seed, 1, T])",
    "policy samples and element signs of trajectory n in outer step T: SeedSequence([seed, 2, n, T])",
    "validation subsample: SeedSequence([seed, 3])",
    "validation split and synthetic data: numpy default_rng(seed)",
)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    return json.dumps(v)


def resolved_text(cfg: RunConfig, extra: dict | None = None) -> str:
    """The config with every default written out, loadable by ``parse_config_text``.

    ``extra`` values (derived quantities such as the effective inner step count)
    go into comments so the file stays a valid config.
    """
    lines = [f"# config hash {cfg.hash()}"]
    for key, value in asdict(cfg).items():
        lines.append(f"{key} = {_toml_value(value)}")
    if extra:
        lines.append("")
        lines += [f"# derived {k} = {v}" for k, v in extra.items()]
    lines.append("")
    lines += [f"# stream {r}" for r in STREAM_RULES]
    return "\n".join(lines) + "\n"
