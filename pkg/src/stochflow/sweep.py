"""Sweep and ablation orchestration: train+eval grids with resumable runs.

Each grid point runs in its own directory keyed by a config-derived run
id; completed points are skipped on re-execution and failed points are
recorded without aborting the rest of the sweep. Points execute in a
process pool sized by the STOCHFLOW_JOBS environment variable.
"""

from __future__ import annotations

import csv
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import checkpoint, configfile
from .interpolant import InterpolantSchedule
from .metrics import MetricsReport, evaluate
from .sample import SamplerConfig, generate
from .shells import SweepConfig, make_task
from .train import TrainConfig, train

VARIANTS = ("standard", "stochastic", "no_two_stage", "no_src_noise", "no_interp_noise")

# Injection toggles per variant; "stochastic" is the all-injections row
# and "standard" the plain deterministic-interpolant baseline.
_VARIANT_FLAGS = {
    "standard":        dict(two_stage=False, source_noise=False, interpolant=False),
    "stochastic":      dict(two_stage=True,  source_noise=True,  interpolant=True),
    "no_two_stage":    dict(two_stage=False, source_noise=True,  interpolant=True),
    "no_src_noise":    dict(two_stage=True,  source_noise=False, interpolant=True),
    "no_interp_noise": dict(two_stage=True,  source_noise=True,  interpolant=False),
}

# Default injection magnitude under geometric noise scaling: per-coordinate
# std kappa / sqrt(d), i.e. a total perturbation norm of ~kappa regardless
# of dimension. Unit-variance injections have norm ~sqrt(d), orders of
# magnitude larger than the fixed shell radii once d is large.
DEFAULT_KAPPA = 1.4

RESULT_FIELDS = (
    "run_id", "variant", "axis", "axis_value", "dim", "n_train", "seed",
    "status", "mean_cosine", "sinkhorn", "mse", "match_fraction",
)
SUMMARY_FIELDS = (
    "variant", "axis", "axis_value", "n_seeds",
    "cosine_mean", "cosine_std", "sinkhorn_mean", "sinkhorn_std",
    "mse_mean", "mse_std", "match_mean", "match_std",
)


def n_jobs() -> int:
    raw = os.environ.get("STOCHFLOW_JOBS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return os.cpu_count() or 1


def variant_train_config(
    base: TrainConfig,
    variant: str,
    dim: int,
    noise_scaling: str = "geometric",
    kappa: float = DEFAULT_KAPPA,
) -> TrainConfig:
    """Resolve a sweep variant into a concrete TrainConfig for one dim."""
    if variant not in _VARIANT_FLAGS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if noise_scaling not in ("geometric", "fixed"):
        raise ValueError(f"noise_scaling must be 'geometric' or 'fixed', got {noise_scaling!r}")
    flags = _VARIANT_FLAGS[variant]
    if noise_scaling == "geometric":
        src_scale = kappa / np.sqrt(dim)
        gamma_scale = kappa / np.sqrt(dim)
    else:
        src_scale = base.source_noise_scale
        gamma_scale = base.schedule.scale
    if flags["interpolant"]:
        kind = base.schedule.kind if base.schedule.kind != "none" else "sin_squared"
        schedule = InterpolantSchedule(kind=kind, scale=gamma_scale)
    else:
        schedule = InterpolantSchedule(kind="none")
    return replace(
        base,
        two_stage=flags["two_stage"],
        source_noise=flags["source_noise"],
        source_noise_scale=src_scale if flags["source_noise"] else 0.0,
        schedule=schedule,
        epochs_pretrain=base.epochs_pretrain if flags["two_stage"] else 0,
    )


@dataclass(frozen=True)
class RunSpec:
    """One trainable grid point, fully resolved."""

    run_id: str
    label: str               # variant name, or "kind:a=..." for gamma ablations
    axis: str
    axis_value: int | float
    dim: int
    train_n: int
    test_n: int
    seed: int
    data_seed: int
    train_cfg: TrainConfig
    sampler_cfg: SamplerConfig
    config_text: str = ""    # canonical snapshot of the resolved point config
    config_hash: str = ""    # seed-independent hash shared by replicate seeds


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(path: Path, entries: dict) -> None:
    with open(path, "w") as fh:
        for key, value in entries.items():
            fh.write(f"{key} = {value}\n")


def read_manifest(path: Path) -> dict[str, str]:
    entries: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            entries[key.strip()] = value.strip()
    return entries


def run_point(spec: RunSpec, out_dir: str | Path) -> dict:
    """Train and evaluate one grid point; returns a results.csv row."""
    run_dir = Path(out_dir) / "runs" / spec.run_id
    manifest_path = run_dir / "manifest.txt"
    if manifest_path.exists():
        manifest = read_manifest(manifest_path)
        if manifest.get("status") == "complete":
            row = {k: manifest.get(k, "") for k in RESULT_FIELDS}
            row["status"] = "cached"
            return row

    run_dir.mkdir(parents=True, exist_ok=True)
    started = _now()
    if spec.config_text:
        (run_dir / "config.cfg").write_text(spec.config_text)
    base_row = dict(
        run_id=spec.run_id, variant=spec.label, axis=spec.axis,
        axis_value=spec.axis_value, dim=spec.dim, n_train=spec.train_n,
        seed=spec.seed,
    )
    try:
        task = make_task(spec.train_n, spec.dim, spec.data_seed, test_n=spec.test_n)
        result = train(task, spec.train_cfg)
        checkpoint.save_model(run_dir / "checkpoint.stfl", result.model,
                              ema_params=result.ema.shadow)
        write_history_csv(run_dir / "history.csv", result.history)
        generated = generate(result.model, task.source_test, spec.sampler_cfg)
        report = evaluate(task.source_test, generated, task.target_test)
        write_metrics_csv(run_dir / "metrics.csv", spec, report)
    except Exception:
        (run_dir / "error.txt").write_text(traceback.format_exc())
        write_manifest(manifest_path, {**base_row, "status": "failed",
                                        "started": started, "finished": _now()})
        return {**base_row, "status": "failed", "mean_cosine": "",
                "sinkhorn": "", "mse": "", "match_fraction": ""}

    row = {
        **base_row, "status": "complete",
        "mean_cosine": f"{report.mean_cosine:.6f}",
        "sinkhorn": f"{report.sinkhorn:.6f}",
        "mse": f"{report.mse:.6f}",
        "match_fraction": f"{report.match_fraction:.6f}",
    }
    write_manifest(manifest_path, {
        **row,
        "started": started, "finished": _now(),
        "checkpoint": str(run_dir / "checkpoint.stfl"),
        "history": str(run_dir / "history.csv"),
        "metrics": str(run_dir / "metrics.csv"),
    })
    return row


def write_history_csv(path: str | Path, history) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "stage", "loss_v", "loss_eta"])
        for rec in history:
            writer.writerow([rec.epoch, rec.stage, f"{rec.loss_v:.8f}", f"{rec.loss_eta:.8f}"])


def write_metrics_csv(path: str | Path, spec: RunSpec, report: MetricsReport) -> None:
    # sinkhorn is the per-coordinate transport cost (raw cost / dim)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "d", "n_train", "seed", "config_hash",
                         "mean_cosine", "sinkhorn", "mse", "match_fraction"])
        writer.writerow([
            spec.run_id, spec.dim, spec.train_n, spec.seed,
            spec.config_hash or spec.run_id,
            f"{report.mean_cosine:.6f}", f"{report.sinkhorn:.6f}",
            f"{report.mse:.6f}", f"{report.match_fraction:.6f}",
        ])


def _resolve_point(sections: dict, label: str, dim: int, train_n: int, seed: int,
                   cfg: TrainConfig) -> tuple[str, str, str]:
    """Fold the per-point settings into the config; returns
    (run_id, snapshot, seed-independent config hash)."""
    folded = {sec: dict(vals) for sec, vals in sections.items()}
    folded.setdefault("data", {}).update(dim=dim, train_n=train_n)
    folded.setdefault("train", {}).update(
        two_stage=cfg.two_stage, source_noise=cfg.source_noise,
        source_noise_scale=cfg.source_noise_scale,
        epochs_pretrain=cfg.epochs_pretrain, seed=seed,
    )
    # the resolved flags distinguish every variant, so the snapshot stays a
    # loadable config with only known keys
    folded.setdefault("schedule", {}).update(kind=cfg.schedule.kind, scale=cfg.schedule.scale)
    seedless = {sec: {k: v for k, v in vals.items() if (sec, k) != ("train", "seed")}
                for sec, vals in folded.items()}
    return (configfile.run_id(folded, seed), configfile.canonical_text(folded),
            configfile.config_hash(seedless))


def sweep_specs(sections: dict) -> list[RunSpec]:
    """Expand a parsed config with a [sweep] section into run specs."""
    sw = sections.get("sweep", {})
    data = sections.get("data", {})
    sweep_cfg = SweepConfig(
        axis=sw.get("axis", "dim"),
        values=tuple(sw.get("values", (2, 8, 32, 128, 512, 2048))),
        fixed_dim=sw.get("fixed_dim", data.get("dim", 512)),
        fixed_n_train=sw.get("fixed_n_train", data.get("train_n", 1024)),
        seeds=tuple(sw.get("seeds", (0,))),
        test_n=data.get("test_n", 512),
    )
    variants = tuple(sw.get("variants", ("standard", "stochastic")))
    for v in variants:
        if v not in VARIANTS:
            raise configfile.ConfigError(f"unknown sweep variant {v!r}; expected subset of {VARIANTS}")
    noise_scaling = sw.get("noise_scaling", "geometric")
    kappa = sw.get("noise_kappa", DEFAULT_KAPPA)
    base_train = configfile.build_train_config(sections)
    data_seed = data.get("seed", 0)

    specs = []
    for dim, train_n in sweep_cfg.points():
        axis_value = dim if sweep_cfg.axis == "dim" else train_n
        for variant in variants:
            cfg = variant_train_config(base_train, variant, dim,
                                       noise_scaling=noise_scaling, kappa=kappa)
            sampler = configfile.build_sampler_config(sections, schedule=cfg.schedule)
            for seed in sweep_cfg.seeds:
                cfg_seeded = replace(cfg, seed=seed)
                rid, snapshot, chash = _resolve_point(sections, variant, dim, train_n,
                                                      seed, cfg_seeded)
                specs.append(RunSpec(
                    run_id=rid, label=variant, axis=sweep_cfg.axis, axis_value=axis_value,
                    dim=dim, train_n=train_n, test_n=sweep_cfg.test_n,
                    seed=seed, data_seed=data_seed * 100003 + seed,
                    train_cfg=cfg_seeded, sampler_cfg=sampler, config_text=snapshot,
                    config_hash=chash,
                ))
    return specs


def ablate_gamma_specs(sections: dict) -> list[RunSpec]:
    """Expand an [ablate] section: schedule kinds x scales x seeds."""
    ab = sections.get("ablate", {})
    kinds = tuple(ab.get("kinds", ("square_root", "sin_squared", "quadratic")))
    scales = tuple(ab.get("scales", (0.25, 0.5, 1.0)))
    seeds = tuple(ab.get("seeds", (0,)))
    data = configfile.data_params(sections)
    base_train = configfile.build_train_config(sections)

    specs = []
    for kind in kinds:
        for scale in scales:
            if kind == "none" or scale == 0.0:
                schedule = InterpolantSchedule(kind="none")
            else:
                schedule = InterpolantSchedule(kind=kind, scale=scale)
            cfg = replace(base_train, schedule=schedule)
            sampler = configfile.build_sampler_config(sections, schedule=schedule)
            label = f"{kind}:a={scale}"
            for seed in seeds:
                cfg_seeded = replace(cfg, seed=seed)
                rid, snapshot, chash = _resolve_point(sections, label, data["dim"],
                                                      data["train_n"], seed, cfg_seeded)
                specs.append(RunSpec(
                    run_id=rid, label=label, axis="gamma", axis_value=scale,
                    dim=data["dim"], train_n=data["train_n"], test_n=data["test_n"],
                    seed=seed, data_seed=data["seed"] * 100003 + seed,
                    train_cfg=cfg_seeded, sampler_cfg=sampler, config_text=snapshot,
                    config_hash=chash,
                ))
    return specs


def execute(specs: list[RunSpec], out_dir: str | Path) -> list[dict]:
    """Run all points (pool when STOCHFLOW_JOBS > 1) and write the CSVs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = n_jobs()
    if jobs > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_point, specs, [out_dir] * len(specs)))
    else:
        rows = [run_point(spec, out_dir) for spec in specs]
    write_results_csv(out_dir / "results.csv", rows)
    write_summary_csv(out_dir / "summary.csv", rows)
    return rows


def write_results_csv(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


def write_summary_csv(path: str | Path, rows: list[dict]) -> None:
    """Mean and std over seeds per (variant, axis value)."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        if row["status"] not in ("complete", "cached"):
            continue
        # cached rows come back from manifests with string-typed fields
        groups.setdefault((str(row["variant"]), str(row["axis"]), str(row["axis_value"])), []).append(row)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        writer.writeheader()
        for (variant, axis, axis_value), group in sorted(groups.items(), key=str):
            out = dict(variant=variant, axis=axis, axis_value=axis_value, n_seeds=len(group))
            for field, prefix in (("mean_cosine", "cosine"), ("sinkhorn", "sinkhorn"),
                                  ("mse", "mse"), ("match_fraction", "match")):
                vals = np.array([float(r[field]) for r in group])
                out[f"{prefix}_mean"] = f"{vals.mean():.6f}"
                out[f"{prefix}_std"] = f"{vals.std(ddof=0):.6f}"
            writer.writerow(out)
