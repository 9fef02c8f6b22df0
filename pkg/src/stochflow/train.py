"""Two-stage training loop with source perturbation and interpolant noise.

Stage 1 (pretrain) discards the source batch and interpolates from fresh
standard-normal draws to the target; stage 2 (finetune) interpolates from
the (optionally jittered) source to the target. Both stages optimize the
summed mean-squared losses of the velocity and noise heads; the noise-head
loss enters the objective only when the schedule is stochastic, since a
deterministic path never mixes z into x_t.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .interpolant import TRAIN_T_MARGIN, InterpolantSchedule, draw_interpolant
from .net import VelocityScoreModel, backward, forward_trace, init_model
from .optim import EmaState, adam_init, adam_step, ema_init, ema_update
from .shells import Task

STAGE_PRETRAIN = "pretrain"
STAGE_FINETUNE = "finetune"


class NonFiniteLoss(ArithmeticError):
    def __init__(self, loss_v: float, loss_eta: float):
        super().__init__(f"non-finite loss: loss_v={loss_v}, loss_eta={loss_eta}")
        self.loss_v = loss_v
        self.loss_eta = loss_eta


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, step: int, loss_v: float, loss_eta: float):
        super().__init__(
            f"non-finite loss at epoch {epoch}, step {step}: "
            f"loss_v={loss_v}, loss_eta={loss_eta}"
        )
        self.epoch = epoch
        self.step = step
        self.loss_v = loss_v
        self.loss_eta = loss_eta


@dataclass(frozen=True)
class TrainConfig:
    epochs_total: int
    epochs_pretrain: int | None = None   # defaults to epochs_total // 4
    batch_size: int = 256
    learning_rate: float = 0.01
    source_noise_scale: float = 1.0
    schedule: InterpolantSchedule = InterpolantSchedule(kind="none")
    ema_decay: float = 0.999
    seed: int = 0
    two_stage: bool = False
    source_noise: bool = False
    hidden: int = 64

    def __post_init__(self):
        if self.epochs_pretrain is None:
            object.__setattr__(self, "epochs_pretrain", self.epochs_total // 4)
        if not 0 <= self.epochs_pretrain <= self.epochs_total:
            raise ValueError(
                f"need 0 <= epochs_pretrain <= epochs_total, got "
                f"{self.epochs_pretrain} > {self.epochs_total}"
            )
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.source_noise_scale < 0:
            raise ValueError("source_noise_scale must be nonnegative")

    @property
    def effective_pretrain_epochs(self) -> int:
        return self.epochs_pretrain if self.two_stage else 0


@dataclass
class EpochRecord:
    epoch: int
    stage: str
    loss_v: float
    loss_eta: float


@dataclass
class LossResult:
    loss_v: float
    loss_eta: float
    grads: dict[str, np.ndarray]


@dataclass
class TrainResult:
    model: VelocityScoreModel
    ema: EmaState
    history: list[EpochRecord] = field(default_factory=list)

    def ema_model(self) -> VelocityScoreModel:
        return replace(self.model, params={k: a.copy() for k, a in self.ema.shadow.items()})


def compute_loss(
    model: VelocityScoreModel,
    cfg: TrainConfig,
    x0: np.ndarray,
    x1: np.ndarray,
    rng: np.random.Generator,
    stage: str,
) -> LossResult:
    """Per-batch losses (means over batch and coordinates) and gradients."""
    if stage not in (STAGE_PRETRAIN, STAGE_FINETUNE):
        raise ValueError(f"unknown stage {stage!r}")
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    if x0.shape != x1.shape:
        raise ValueError(f"x0 shape {x0.shape} != x1 shape {x1.shape}")
    schedule = cfg.schedule

    if stage == STAGE_PRETRAIN:
        # noise-to-target: the source batch is discarded entirely
        x0 = rng.standard_normal(x0.shape)
    elif cfg.source_noise and cfg.source_noise_scale > 0:
        x0 = x0 + cfg.source_noise_scale * rng.standard_normal(x0.shape)

    t = rng.uniform(0.0, 1.0, size=x0.shape[0])
    if schedule.kind == "square_root":
        t = np.clip(t, TRAIN_T_MARGIN, 1.0 - TRAIN_T_MARGIN)
    draw = draw_interpolant(schedule, x0, x1, t, rng)

    trace = forward_trace(model, draw.x_t, draw.t)
    dv = trace.v - draw.v_target
    de = trace.eta - draw.eta_target
    loss_v = float(np.mean(dv * dv))
    loss_eta = float(np.mean(de * de))
    if not (np.isfinite(loss_v) and np.isfinite(loss_eta)):
        raise NonFiniteLoss(loss_v, loss_eta)

    grad_v = (2.0 / dv.size) * dv
    if schedule.stochastic:
        grad_eta = (2.0 / de.size) * de
    else:
        # z never enters x_t; regressing on it would fit pure noise
        grad_eta = np.zeros_like(de)
    grads = backward(model, draw.x_t, draw.t, grad_v, grad_eta, trace=trace)
    return LossResult(loss_v=loss_v, loss_eta=loss_eta, grads=grads)


def batch_starts(n: int, batch_size: int) -> range:
    """ceil(n / batch_size) offsets covering all n rows."""
    return range(0, n, batch_size)


def train(task: Task, cfg: TrainConfig) -> TrainResult:
    """Run Stage 1 for the pretrain epochs, then Stage 2 for the rest.

    Each epoch iterates over the whole target pool in shuffled batches;
    source rows are drawn with replacement per batch. Deterministic given
    cfg.seed.
    """
    x0_pool, x1_pool = task.source_train, task.target_train
    if len(x0_pool) == 0 or len(x1_pool) == 0:
        raise ValueError("task train splits must be nonempty")
    n_target, dim = x1_pool.shape

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    model = init_model(dim, hidden=cfg.hidden, rng=rng)
    opt = adam_init(model.params, lr=cfg.learning_rate)
    ema = ema_init(model.params, decay=cfg.ema_decay)

    history: list[EpochRecord] = []
    pretrain_epochs = cfg.effective_pretrain_epochs
    for epoch in range(cfg.epochs_total):
        stage = STAGE_PRETRAIN if epoch < pretrain_epochs else STAGE_FINETUNE
        order = rng.permutation(n_target)
        sum_v = sum_eta = 0.0
        n_steps = 0
        for start in batch_starts(n_target, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            x1 = x1_pool[idx]
            src_idx = rng.integers(0, len(x0_pool), size=len(idx))
            x0 = x0_pool[src_idx]
            try:
                result = compute_loss(model, cfg, x0, x1, rng, stage)
            except NonFiniteLoss as exc:
                raise TrainingDiverged(epoch, n_steps, exc.loss_v, exc.loss_eta) from exc
            adam_step(opt, model.params, result.grads)
            ema_update(ema, model.params)
            sum_v += result.loss_v
            sum_eta += result.loss_eta
            n_steps += 1
        history.append(EpochRecord(
            epoch=epoch, stage=stage,
            loss_v=sum_v / n_steps, loss_eta=sum_eta / n_steps,
        ))
    return TrainResult(model=model, ema=ema, history=history)
