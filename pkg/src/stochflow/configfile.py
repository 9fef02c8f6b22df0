"""Flat `key = value` config files with [section] headers.

Hand-parsed (rather than configparser) so validation errors can name the
exact line. Configs are canonicalized — sections and keys sorted, values
re-rendered from their parsed types — before hashing, so whitespace or
ordering edits never change a run id.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

from .interpolant import GAMMA_KINDS, InterpolantSchedule
from .sample import SOLVERS, SamplerConfig
from .train import TrainConfig


class ConfigError(ValueError):
    pass


KNOWN_KEYS: dict[str, dict[str, str]] = {
    "train": {
        "epochs_total": "int",
        "epochs_pretrain": "int",
        "batch_size": "int",
        "learning_rate": "float",
        "source_noise_scale": "float",
        "ema_decay": "float",
        "seed": "int",
        "two_stage": "bool",
        "source_noise": "bool",
        "hidden": "int",
    },
    "schedule": {
        "kind": "str",
        "scale": "float",
    },
    "sampler": {
        "solver": "str",
        "steps": "int",
        "eps": "float",
        "diffusion_coef": "float",
        "margin": "float",
        "seed": "int",
    },
    "data": {
        "dim": "int",
        "train_n": "int",
        "test_n": "int",
        "seed": "int",
    },
    "sweep": {
        "axis": "str",
        "values": "ints",
        "fixed_dim": "int",
        "fixed_n_train": "int",
        "seeds": "ints",
        "variants": "strs",
        "noise_scaling": "str",
        "noise_kappa": "float",
    },
    "ablate": {
        "kinds": "strs",
        "scales": "floats",
        "seeds": "ints",
    },
}

_BOOL_WORDS = {"true": True, "false": False, "1": True, "0": False,
               "yes": True, "no": False, "on": True, "off": False}


def _parse_value(kind: str, raw: str, where: str):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            return _BOOL_WORDS[raw.lower()]
        if kind == "ints":
            return tuple(int(v) for v in raw.split())
        if kind == "floats":
            return tuple(float(v) for v in raw.split())
        if kind == "strs":
            return tuple(raw.split())
        return raw
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind}") from exc


def parse_config(text: str, source: str = "<config>") -> dict[str, dict]:
    """Parse and type-check; raises ConfigError naming the offending line."""
    sections: dict[str, dict] = {}
    current: str | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip()
            if current not in KNOWN_KEYS:
                raise ConfigError(
                    f"{source}:{lineno}: unknown section [{current}]; "
                    f"expected one of {sorted(KNOWN_KEYS)}"
                )
            sections.setdefault(current, {})
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {stripped!r}")
        if current is None:
            raise ConfigError(f"{source}:{lineno}: key outside any [section]")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in KNOWN_KEYS[current]:
            raise ConfigError(
                f"{source}:{lineno}: unknown key {key!r} in section [{current}]"
            )
        sections[current][key] = _parse_value(
            KNOWN_KEYS[current][key], raw, f"{source}:{lineno}"
        )
    return sections


def load_config(path: str | Path) -> dict[str, dict]:
    path = Path(path)
    return parse_config(path.read_text(), source=str(path))


def _render_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return " ".join(_render_value(v) for v in value)
    return str(value)


def canonical_text(sections: dict[str, dict]) -> str:
    lines = []
    for sec in sorted(sections):
        lines.append(f"[{sec}]")
        for key in sorted(sections[sec]):
            lines.append(f"{key} = {_render_value(sections[sec][key])}")
    return "\n".join(lines) + "\n"


def config_hash(sections: dict[str, dict]) -> str:
    return hashlib.sha256(canonical_text(sections).encode()).hexdigest()[:12]


def run_id(sections: dict[str, dict], seed: int) -> str:
    """Hash of the canonical config with the effective seed folded in."""
    folded = {sec: dict(vals) for sec, vals in sections.items()}
    folded.setdefault("train", {})["seed"] = int(seed)
    return config_hash(folded)


def build_schedule(sections: dict[str, dict]) -> InterpolantSchedule:
    sched = sections.get("schedule", {})
    kind = sched.get("kind", "none")
    if kind not in GAMMA_KINDS:
        raise ConfigError(f"[schedule] kind must be one of {GAMMA_KINDS}, got {kind!r}")
    return InterpolantSchedule(kind=kind, scale=sched.get("scale", 1.0))


def build_train_config(sections: dict[str, dict], seed: int | None = None) -> TrainConfig:
    tr = sections.get("train", {})
    if "epochs_total" not in tr:
        raise ConfigError("[train] epochs_total is required")
    kwargs = dict(tr)
    if seed is not None:
        kwargs["seed"] = seed
    try:
        return TrainConfig(schedule=build_schedule(sections), **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_sampler_config(sections: dict[str, dict], schedule: InterpolantSchedule | None = None,
                         **overrides) -> SamplerConfig:
    sa = dict(sections.get("sampler", {}))
    if "eps" in sa:
        sa["source_noise"] = sa.pop("eps")
    sa.update(overrides)
    solver = sa.get("solver", "heun")
    if solver == "sde":
        sa["solver"] = "euler_maruyama"
    elif solver not in SOLVERS:
        raise ConfigError(f"[sampler] solver must be one of euler|heun|sde, got {solver!r}")
    if schedule is None:
        schedule = build_schedule(sections)
    try:
        return SamplerConfig(schedule=schedule, **sa)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def data_params(sections: dict[str, dict]) -> dict:
    da = sections.get("data", {})
    if "dim" not in da:
        raise ConfigError("[data] dim is required")
    return {
        "dim": da["dim"],
        "train_n": da.get("train_n", 1024),
        "test_n": da.get("test_n", 512),
        "seed": da.get("seed", 0),
    }
