"""Command-line entry point: ``onlineaug {search,eval,cost,export-dist}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .data import channel_stats, load_cifar10, parse_cifar10_batch, to_model_input
from .engine import cost_iterations, run_search
from .learner import NonFiniteError, evaluate_accuracy, load_checkpoint, save_checkpoint
from .policy import export_distribution, probabilities, read_snapshot, write_theta

log = logging.getLogger("onlineaug")

# (row label, dataset, sampled models or trajectories, images, epochs)
PUBLISHED_COST_ROWS = (
    ("auto-augment", "cifar10", 15000, 4000, 120),
    ("auto-augment", "imagenet", 15000, 6000, 200),
    ("online", "cifar10", 8, 50000, 300),
    ("online", "imagenet", 4, 1280000, 150),
)
DATASET_SIZES = {"cifar10": 50000, "imagenet": 1280000}


def fmt_sci(x: float) -> str:
    """``7030000.0 -> '7.03e6'``; trailing zeros in the mantissa are dropped."""
    mant, exp = f"{x:.2e}".split("e")
    return f"{mant.rstrip('0').rstrip('.')}e{int(exp)}"


def cost_report() -> str:
    lines = [f"{'method':<14}{'dataset':<10}{'models':>8}{'images':>10}{'epochs':>8}{'usage':>8}{'iterations':>12}"]
    iters = {}
    for method, ds, n, imgs, ep in PUBLISHED_COST_ROWS:
        it = cost_iterations(n, imgs, ep)
        iters[method, ds] = it
        usage = format(float(f"{100 * imgs / DATASET_SIZES[ds]:.2g}"), "g") + "%"
        lines.append(f"{method:<14}{ds:<10}{n:>8}{imgs:>10}{ep:>8}{usage:>8}{fmt_sci(it):>12}")
    lines.append("")
    for ds in ("cifar10", "imagenet"):
        a, b = iters["auto-augment", ds], iters["online", ds]
        r = a / b
        r1 = round(r, 1)
        # half-up on the 1-decimal value: 23.47 -> 23.5 -> 24
        shown = int(np.floor(r1 + 0.5))
        line = f"speedup {ds:<9}{fmt_sci(a)} / {fmt_sci(b)} = {r:.2f} -> {shown}x"
        if shown != round(r):
            line += f"  (note: {r:.2f} rounds to {r1} at one decimal, reported as {shown}x)"
        lines.append(line)
    return "\n".join(lines) + "\n"


def cmd_cost(args) -> int:
    sys.stdout.write(cost_report())
    return 0


def _write_json_line(fh, obj) -> None:
    fh.write(json.dumps(obj, sort_keys=True) + "\n")
    fh.flush()


def cmd_search(args) -> int:
    cfg = cfgmod.parse_config(args.config)
    train, val = cfgmod.load_datasets(cfg)
    settings = cfgmod.build_settings(cfg, train)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    chash = cfg.hash()
    mean, std = channel_stats(train)
    derived = {
        "inner_steps": settings.inner_steps,
        "total_inner_steps": settings.hyper.total_steps,
        "train_size": len(train),
        "val_size": len(val),
        "channel_mean": " ".join(repr(float(m)) for m in mean),
        "channel_std": " ".join(repr(float(s)) for s in std),
    }
    (out / "config.resolved.toml").write_text(cfgmod.resolved_text(cfg, derived))
    space = settings.search_space
    dist_dir = out / "dist"
    if cfg.export_every:
        dist_dir.mkdir(exist_ok=True)

    with open(out / "metrics.jsonl", "w", buffering=1) as fh:

        def on_record(rec, state, trajs):
            row = {
                "T": rec.T,
                "accs": rec.accs,
                "broadcast_source": rec.broadcast_source,
                "policy_entropy": rec.policy_entropy,
                "max_probability": float(probabilities(state.theta).max()),
                "lr_inner": rec.lr_inner,
                "wall_ms": rec.wall_ms,
                "config_hash": chash,
            }
            _write_json_line(fh, row)
            if cfg.export_every and (rec.T + 1) % cfg.export_every == 0:
                export_distribution(state.theta, dist_dir / f"step{rec.T + 1:06d}", space)

        t0 = time.perf_counter()
        result = run_search(settings, train, val, on_record=on_record, record_wall_time=cfg.log_wall_time)
    meta = {
        "config_hash": chash,
        "channel_mean": mean,
        "channel_std": std,
        "val_accuracy": repr(result.final_accuracy),
    }
    save_checkpoint(out / "final.ckpt", settings.model, result.weights, meta)
    write_theta(out / "theta.csv", result.theta, space)
    export_distribution(result.theta, out / "distribution", space)
    log.info("search finished in %.1f s; validation accuracy %.4f", time.perf_counter() - t0, result.final_accuracy)
    print(f"validation accuracy {result.final_accuracy:.4f}; artifacts in {out}")
    return 0


def _eval_dataset(path: Path):
    """A CIFAR-10 directory (test batch if present) or a run config's validation split."""
    if path.is_dir():
        test = path / "test_batch.bin"
        if test.exists():
            return parse_cifar10_batch(test.read_bytes(), str(test))
        return load_cifar10(path)
    cfg = cfgmod.parse_config(path)
    return cfgmod.load_datasets(cfg)[1]


def cmd_eval(args) -> int:
    spec, weights, meta = load_checkpoint(args.checkpoint)
    try:
        mean = np.array([float(v) for v in meta["channel_mean"].split()])
        std = np.array([float(v) for v in meta["channel_std"].split()])
    except KeyError:
        raise ValueError(f"{args.checkpoint}: checkpoint lacks channel statistics") from None
    ds = _eval_dataset(Path(args.dataset))
    x = to_model_input(ds.images, mean, std)
    if tuple(x.shape[1:]) != spec.input_shape:
        raise ValueError(f"dataset images {x.shape[1:]} do not match model input {spec.input_shape}")
    acc = evaluate_accuracy(spec, weights, x, ds.labels)
    print(f"accuracy {acc:.4f} on {len(ds)} images")
    return 0


def cmd_export_dist(args) -> int:
    indices, theta = read_snapshot(args.snapshot)
    prefix = Path(args.out) if args.out else Path(args.snapshot).with_suffix("")
    probs_path, marg_path = export_distribution(theta, prefix, indices)
    print(f"wrote {probs_path} and {marg_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="onlineaug", description="Online augmentation-policy search.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("search", help="run a search from a config file")
    s.add_argument("config")
    s.set_defaults(func=cmd_search)

    e = sub.add_parser("eval", help="accuracy of a checkpoint on a dataset")
    e.add_argument("checkpoint")
    e.add_argument("dataset", help="CIFAR-10 directory, or a run config (its validation split)")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("cost", help="search-cost comparison table")
    c.add_argument("--preset", choices=["paper"], default="paper")
    c.set_defaults(func=cmd_cost)

    x = sub.add_parser("export-dist", help="probability and marginal CSVs from a theta snapshot")
    x.add_argument("snapshot")
    x.add_argument("--out", help="output prefix (default: snapshot path without suffix)")
    x.set_defaults(func=cmd_export_dist)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except cfgmod.ConfigError as exc:
        print(json.dumps({"error": "config", "problems": exc.problems}), file=sys.stderr)
        return 2
    except (OSError, ValueError, NonFiniteError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
