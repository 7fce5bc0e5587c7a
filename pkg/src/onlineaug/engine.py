"""The online search loop: N trajectories train for I steps, then theta is updated.

Each outer step ``T``:

1. every trajectory runs ``I`` SGD steps on the *same* mini-batch schedule,
   sampling one operation per image from the frozen policy;
2. each trajectory is scored on the (never augmented) validation split;
3. theta takes one Adam ascent step along the mean-baselined score-function
   gradient;
4. the best trajectory's weights are copied into all trajectories.

Randomness is split into independent streams derived from the run seed:
``(seed, 0)`` initial weights, ``(seed, 1, T)`` the shared batch schedule of
period ``T``, ``(seed, 2, n, T)`` the policy samples and element signs of
trajectory ``n``, ``(seed, 3)`` the validation subsample. Results therefore do
not depend on how trajectories are scheduled onto workers.
"""

from __future__ import annotations

import hashlib
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .augment import NUM_OPERATIONS, element_catalog, operation_from_index
from .data import Dataset, PreprocSpec, apply_pipeline, channel_stats, draw_preproc, to_model_input
from .learner import (
    ModelSpec,
    ModelWeights,
    TrainHyper,
    cosine_lr,
    evaluate_accuracy,
    loss_and_grad,
    sgd_step,
)
from .policy import PolicyParams, SampleCounts, entropy, probabilities, sample_operations
from .policy_optim import AdamState, adam_ascent_step, reinforce_gradient

log = logging.getLogger(__name__)

STREAM_INIT, STREAM_SCHEDULE, STREAM_TRAJ, STREAM_VAL = 0, 1, 2, 3


def stream(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(key)))


@dataclass
class SearchSettings:
    model: ModelSpec
    hyper: TrainHyper
    num_traj: int = 8
    inner_steps: int = 1
    outer_steps: int = 1
    policy_lr: float = 0.05
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    baseline: bool = True
    seed: int = 0
    preproc: PreprocSpec = field(default_factory=PreprocSpec)
    search_space: np.ndarray | None = None  # operation indices; None = all 1296
    signed: bool = True
    reset_velocity: bool = True
    workers: int = 1
    val_subsample: int = 0

    def __post_init__(self):
        if self.search_space is None:
            self.search_space = np.arange(NUM_OPERATIONS)
        self.search_space = np.asarray(self.search_space, dtype=np.int64)

    def validate(self) -> None:
        errors = []
        if self.num_traj < 1:
            errors.append("num_traj: must be >= 1")
        elif self.num_traj == 1 and self.baseline:
            errors.append(
                "num_traj: 1 trajectory with the mean baseline gives an identically zero "
                "policy gradient; use >= 2 or disable the baseline"
            )
        if self.inner_steps < 1:
            errors.append("inner_steps: must be >= 1")
        if self.outer_steps < 1:
            errors.append("outer_steps: must be >= 1")
        if self.policy_lr < 0:
            errors.append("policy_lr: must be >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            errors.append("beta1/beta2: must be in [0, 1)")
        if self.workers < 1:
            errors.append("workers: must be >= 1")
        if self.val_subsample < 0:
            errors.append("val_subsample: must be >= 0")
        ss = self.search_space
        if ss.size == 0 or ss.min() < 0 or ss.max() >= NUM_OPERATIONS or np.unique(ss).size != ss.size:
            errors.append("search_space: needs distinct operation indices in [0, 1296)")
        if self.hyper.total_steps != self.inner_steps * self.outer_steps:
            errors.append("hyper.total_steps: must equal inner_steps * outer_steps")
        if errors:
            raise ValueError("invalid search settings:\n  " + "\n  ".join(errors))


@dataclass
class Trajectory:
    id: int
    weights: ModelWeights
    velocity: np.ndarray
    counts: SampleCounts
    last_acc: float = float("nan")
    batch_digests: list[str] = field(default_factory=list)


@dataclass
class MetricsRecord:
    T: int
    accs: list[float]
    broadcast_source: int
    policy_entropy: float
    lr_inner: float
    wall_ms: float | None = None


@dataclass
class OuterState:
    T: int
    theta: PolicyParams
    adam: AdamState
    best_weights: ModelWeights
    history: list[MetricsRecord] = field(default_factory=list)


@dataclass
class Schedule:
    """Shared mini-batches of one period: sample indices plus non-policy draws."""

    indices: np.ndarray  # (I, B)
    draws: list  # I lists of B PreprocDraws

    def digest(self, i: int, labels: np.ndarray) -> str:
        h = hashlib.sha256(self.indices[i].tobytes())
        h.update(labels[self.indices[i]].tobytes())
        return h.hexdigest()[:16]


class SearchContext:
    """Everything a period needs that is fixed for the whole run."""

    def __init__(self, settings: SearchSettings, train: Dataset, val: Dataset):
        settings.validate()
        if len(train) == 0:
            raise ValueError("training set is empty")
        if len(val) == 0:
            raise ValueError("validation set is empty")
        self.s = settings
        self.train = train
        self.catalog = element_catalog(signed=settings.signed)
        self.mean, self.std = channel_stats(train)
        settings.preproc.validate(train.image_shape)
        c_out = settings.preproc.output_shape(train.image_shape)
        expect = (c_out[2], c_out[0], c_out[1])
        if tuple(settings.model.input_shape) != expect:
            raise ValueError(f"model input {settings.model.input_shape} != pipeline output {expect}")
        if settings.val_subsample and settings.val_subsample < len(val):
            idx = np.sort(stream(settings.seed, STREAM_VAL).choice(len(val), settings.val_subsample, replace=False))
            val = val.subset(idx)
        self.val = val
        self.val_x = to_model_input(val.images, self.mean, self.std)
        self.ops = [operation_from_index(int(k), self.catalog) for k in settings.search_space]

    def schedule(self, T: int) -> Schedule:
        s = self.s
        rng = stream(s.seed, STREAM_SCHEDULE, T)
        n, need = len(self.train), s.inner_steps * s.hyper.batch_size
        perms = [rng.permutation(n) for _ in range(math.ceil(need / n))]
        idx = np.concatenate(perms)[:need].reshape(s.inner_steps, s.hyper.batch_size)
        shape = self.train.image_shape
        draws = [[draw_preproc(s.preproc, shape, rng) for _ in row] for row in idx]
        return Schedule(idx, draws)


def initial_trajectories(ctx: SearchContext) -> list[Trajectory]:
    w0 = ctx.s.model.init(stream(ctx.s.seed, STREAM_INIT))
    k = ctx.s.search_space.size
    return [
        Trajectory(n, w0.copy(), np.zeros_like(w0.values), SampleCounts.zeros(k))
        for n in range(ctx.s.num_traj)
    ]


def run_inner_period(
    traj: Trajectory, theta_frozen: PolicyParams, schedule: Schedule, ctx: SearchContext, T: int
) -> Trajectory:
    """Run this trajectory's I SGD steps of period T on the shared schedule."""
    s = ctx.s
    rng = stream(s.seed, STREAM_TRAJ, traj.id, T)
    w, v = traj.weights, traj.velocity
    counts = SampleCounts(traj.counts.counts.copy())
    digests = []
    images, labels = ctx.train.images, ctx.train.labels
    for i, row in enumerate(schedule.indices):
        ks = sample_operations(theta_frozen, rng, row.size)
        signs = rng.integers(0, 2, size=(row.size, 2)) * 2 - 1
        counts.add(ks)
        batch = np.stack(
            [
                apply_pipeline(
                    images[j],
                    s.preproc,
                    ctx.ops[k],
                    draws=schedule.draws[i][b],
                    signs=(int(signs[b, 0]), int(signs[b, 1])),
                )
                for b, (j, k) in enumerate(zip(row, ks))
            ]
        )
        step = T * s.inner_steps + i
        where = f"(trajectory {traj.id}, outer step {T}, inner step {i})"
        loss, grad = loss_and_grad(s.model, w, to_model_input(batch, ctx.mean, ctx.std), labels[row], where)
        w, v = sgd_step(w, grad, v, cosine_lr(step, s.hyper), s.hyper)
        w.check_finite(where)
        digests.append(schedule.digest(i, labels))
    return Trajectory(traj.id, w, v, counts, traj.last_acc, digests)


def outer_step(state: OuterState, trajs: list[Trajectory], ctx: SearchContext, wall_ms: float | None = None):
    """Score, update theta, broadcast the best weights. Returns (state, trajs, record)."""
    s = ctx.s
    if len(trajs) != s.num_traj:
        raise ValueError(f"expected {s.num_traj} trajectories, got {len(trajs)}")
    accs = [evaluate_accuracy(s.model, t.weights, ctx.val_x, ctx.val.labels) for t in trajs]
    grad = reinforce_gradient(state.theta, [t.counts for t in trajs], accs, baseline=s.baseline)
    theta, adam = adam_ascent_step(state.theta, grad, state.adam)
    src = int(np.argmax(accs))
    best = trajs[src]
    new_trajs = [
        Trajectory(
            t.id,
            best.weights.copy(),
            np.zeros_like(best.velocity) if s.reset_velocity else best.velocity.copy(),
            SampleCounts.zeros(s.search_space.size),
            accs[t.id],
            t.batch_digests,
        )
        for t in trajs
    ]
    last_step = state.T * s.inner_steps + s.inner_steps - 1
    rec = MetricsRecord(
        T=state.T,
        accs=[float(a) for a in accs],
        broadcast_source=src,
        policy_entropy=entropy(theta),
        lr_inner=cosine_lr(last_step, s.hyper),
        wall_ms=wall_ms,
    )
    new_state = OuterState(state.T + 1, theta, adam, best.weights.copy(), state.history + [rec])
    return new_state, new_trajs, rec


@dataclass
class SearchResult:
    weights: ModelWeights
    theta: PolicyParams
    history: list[MetricsRecord]
    context: SearchContext
    final_accuracy: float


def run_search(
    settings: SearchSettings,
    train: Dataset,
    val: Dataset,
    on_record: Callable[[MetricsRecord, OuterState, list[Trajectory]], None] | None = None,
    record_wall_time: bool = False,
) -> SearchResult:
    ctx = SearchContext(settings, train, val)
    s = settings
    trajs = initial_trajectories(ctx)
    k = s.search_space.size
    state = OuterState(
        0,
        PolicyParams(np.zeros(k)),
        AdamState.zeros(k, lr=s.policy_lr, beta1=s.beta1, beta2=s.beta2, eps=s.eps),
        trajs[0].weights.copy(),
    )
    pool = ThreadPoolExecutor(max_workers=s.workers) if s.workers > 1 else None
    try:
        for T in range(s.outer_steps):
            t0 = time.perf_counter()
            sched = ctx.schedule(T)
            theta = state.theta.copy()
            run = lambda t: run_inner_period(t, theta, sched, ctx, T)  # noqa: E731
            trajs = list(pool.map(run, trajs)) if pool else [run(t) for t in trajs]
            wall = (time.perf_counter() - t0) * 1e3 if record_wall_time else None
            state, trajs, rec = outer_step(state, trajs, ctx, wall)
            log.debug("T=%d accs=%s src=%d H=%.4f", rec.T, rec.accs, rec.broadcast_source, rec.policy_entropy)
            if on_record is not None:
                on_record(rec, state, trajs)
    finally:
        if pool:
            pool.shutdown()
    final_acc = max(state.history[-1].accs)
    return SearchResult(state.best_weights, state.theta, state.history, ctx, final_acc)


def family_probability(theta: PolicyParams, members) -> float:
    """Total policy mass on the given positions of the search space."""
    return float(probabilities(theta)[np.asarray(members)].sum())


def cost_iterations(samples: int, images: int, epochs: int, ref_batch: int = 1024) -> float:
    """Training iterations normalised to batch ``ref_batch``, to 3 significant figures."""
    for name, v in (("samples", samples), ("images", images), ("epochs", epochs), ("ref_batch", ref_batch)):
        if v <= 0:
            raise ValueError(f"{name} must be positive, got {v}")
    return float(f"{samples * images * epochs / ref_batch:.3g}")
