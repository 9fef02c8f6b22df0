"""Two-sided flow matching with stochastic injections, at desk scale."""

from .interpolant import InterpolantSchedule, draw_interpolant, gamma, gamma_dot, variance_profile
from .metrics import MetricsReport, evaluate
from .net import VelocityScoreModel, forward, init_model
from .sample import SamplerConfig, generate
from .shells import ShellConfig, SweepConfig, Task, make_task, sample_shell
from .train import TrainConfig, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "InterpolantSchedule",
    "MetricsReport",
    "SamplerConfig",
    "ShellConfig",
    "SweepConfig",
    "Task",
    "TrainConfig",
    "TrainResult",
    "VelocityScoreModel",
    "draw_interpolant",
    "evaluate",
    "forward",
    "gamma",
    "gamma_dot",
    "generate",
    "init_model",
    "make_task",
    "sample_shell",
    "train",
    "variance_profile",
]
