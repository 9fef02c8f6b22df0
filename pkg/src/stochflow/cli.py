"""Command-line entry: train / eval / sample / sweep / ablate-gamma.

All commands read a flat key=value config (see configfile.KNOWN_KEYS for
sections and keys) and write artifacts under --out. Metric CSV columns
report the Sinkhorn transport cost per coordinate (raw cost / d).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import checkpoint, configfile, sweep
from .metrics import evaluate
from .sample import SamplerConfigError, default_inference_noise, generate
from .shells import SOURCE_RADIUS, ShellConfig, make_task, sample_shell, write_points_csv
from .train import train


def _add_common(parser: argparse.ArgumentParser, checkpoint_arg: bool = False) -> None:
    parser.add_argument("--config", required=True, help="path to a key=value config file")
    parser.add_argument("--out", default="out", help="output directory (default: ./out)")
    parser.add_argument("--seed", type=int, default=None, help="override the training seed")
    if checkpoint_arg:
        parser.add_argument("--checkpoint", required=True, help="path to a .stfl checkpoint")
        parser.add_argument("--ema", action="store_true", help="use the EMA shadow weights")
        parser.add_argument("--solver", choices=["euler", "heun", "sde"], default=None)
        parser.add_argument("--steps", type=int, default=None)
        parser.add_argument("--eps", type=float, default=None,
                            help="inference-time source noise scale")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochflow")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("train", help="train a model from a config"))
    _add_common(sub.add_parser("eval", help="evaluate a checkpoint on the config's task"),
                checkpoint_arg=True)
    p_sample = sub.add_parser("sample", help="generate samples from a checkpoint")
    _add_common(p_sample, checkpoint_arg=True)
    p_sample.add_argument("-n", "--count", type=int, default=64, help="number of samples")
    p_sample.add_argument("--trajectories", action="store_true",
                          help="also dump one trajectory CSV per sample")
    _add_common(sub.add_parser("sweep", help="run a [sweep] grid of train+eval points"))
    _add_common(sub.add_parser("ablate-gamma", help="grid over schedule kinds and scales"))
    return parser


def _sampler_overrides(args) -> dict:
    overrides = {}
    if getattr(args, "solver", None) is not None:
        overrides["solver"] = {"sde": "euler_maruyama"}.get(args.solver, args.solver)
    if getattr(args, "steps", None) is not None:
        overrides["steps"] = args.steps
    if getattr(args, "eps", None) is not None:
        overrides["source_noise"] = args.eps
    return overrides


def cmd_train(args) -> int:
    sections = configfile.load_config(args.config)
    train_cfg = configfile.build_train_config(sections, seed=args.seed)
    data = configfile.data_params(sections)
    rid = configfile.run_id(sections, train_cfg.seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    task = make_task(data["train_n"], data["dim"], data["seed"], test_n=data["test_n"])
    result = train(task, train_cfg)

    ckpt = out / "checkpoint.stfl"
    checkpoint.save_model(ckpt, result.model, ema_params=result.ema.shadow)
    sweep.write_history_csv(out / "history.csv", result.history)
    (out / "config.cfg").write_text(configfile.canonical_text(sections))
    sweep.write_manifest(out / "manifest.txt", {
        "run_id": rid,
        "config_hash": configfile.config_hash(sections),
        "status": "complete",
        "config": str(out / "config.cfg"),
        "checkpoint": str(ckpt),
        "history": str(out / "history.csv"),
    })
    print(f"run_id {rid}")
    print(f"checkpoint {ckpt}")
    last = result.history[-1]
    print(f"final epoch {last.epoch} ({last.stage}): loss_v={last.loss_v:.6f} "
          f"loss_eta={last.loss_eta:.6f}")
    return 0


def _default_eps(sections: dict) -> float | None:
    if "eps" in sections.get("sampler", {}):
        return None  # config already provides it
    tr = sections.get("train", {})
    return default_inference_noise(tr.get("source_noise", False),
                                   tr.get("source_noise_scale", 1.0))


def cmd_eval(args) -> int:
    sections = configfile.load_config(args.config)
    data = configfile.data_params(sections)
    model = checkpoint.load_model(args.checkpoint, ema=args.ema)
    if model.dim != data["dim"]:
        raise configfile.ConfigError(
            f"checkpoint dim {model.dim} does not match [data] dim {data['dim']}"
        )
    overrides = _sampler_overrides(args)
    if "source_noise" not in overrides:
        eps = _default_eps(sections)
        if eps is not None:
            overrides["source_noise"] = eps
    sampler_cfg = configfile.build_sampler_config(sections, **overrides)

    task = make_task(data["train_n"], data["dim"], data["seed"], test_n=data["test_n"])
    generated = generate(model, task.source_test, sampler_cfg)
    report = evaluate(task.source_test, generated, task.target_test)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else sections.get("train", {}).get("seed", 0)
    rid = configfile.run_id(sections, seed)
    metrics_path = out / "metrics.csv"
    new_file = not metrics_path.exists()
    with open(metrics_path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(["run_id", "d", "n_train", "seed", "config_hash",
                             "mean_cosine", "sinkhorn", "mse", "match_fraction"])
        writer.writerow([rid, data["dim"], data["train_n"], seed,
                         configfile.config_hash(sections),
                         f"{report.mean_cosine:.6f}", f"{report.sinkhorn:.6f}",
                         f"{report.mse:.6f}", f"{report.match_fraction:.6f}"])
    print(f"mean_cosine {report.mean_cosine:.6f}")
    print(f"sinkhorn {report.sinkhorn:.6f}")
    print(f"mse {report.mse:.6f}")
    print(f"match_fraction {report.match_fraction:.6f}")
    return 0


def cmd_sample(args) -> int:
    sections = configfile.load_config(args.config)
    data = configfile.data_params(sections)
    model = checkpoint.load_model(args.checkpoint, ema=args.ema)
    overrides = _sampler_overrides(args)
    if "source_noise" not in overrides:
        eps = _default_eps(sections)
        if eps is not None:
            overrides["source_noise"] = eps
    sampler_cfg = configfile.build_sampler_config(sections, **overrides)

    rng = np.random.default_rng(data["seed"])
    sources = sample_shell(ShellConfig(dim=model.dim, radius=SOURCE_RADIUS, n=args.count), rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.trajectories:
        generated, trajectory = generate(model, sources, sampler_cfg, record=True)
        for i in range(args.count):
            write_points_csv(out / f"trajectory_{i}.csv", trajectory.states[:, i, :])
    else:
        generated = generate(model, sources, sampler_cfg)
    write_points_csv(out / "samples.csv", generated)
    write_points_csv(out / "sources.csv", sources)
    print(f"wrote {args.count} samples to {out / 'samples.csv'}")
    return 0


def cmd_sweep(args) -> int:
    sections = configfile.load_config(args.config)
    specs = sweep.sweep_specs(sections)
    rows = sweep.execute(specs, args.out)
    done = sum(r["status"] in ("complete", "cached") for r in rows)
    print(f"{done}/{len(rows)} points complete; results in {Path(args.out) / 'results.csv'}")
    return 0 if done == len(rows) else 1


def cmd_ablate_gamma(args) -> int:
    sections = configfile.load_config(args.config)
    specs = sweep.ablate_gamma_specs(sections)
    rows = sweep.execute(specs, args.out)
    done = sum(r["status"] in ("complete", "cached") for r in rows)
    print(f"{done}/{len(rows)} points complete; results in {Path(args.out) / 'results.csv'}")
    return 0 if done == len(rows) else 1


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "sample": cmd_sample,
    "sweep": cmd_sweep,
    "ablate-gamma": cmd_ablate_gamma,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (configfile.ConfigError, SamplerConfigError, checkpoint.CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
