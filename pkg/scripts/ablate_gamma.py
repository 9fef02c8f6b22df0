#!/usr/bin/env python3
"""Interpolant noise schedule ablation: kind x scale grid at d = 32.

All runs keep the two-stage split and source jitter on; only the gamma
schedule varies. The sine-squared shape should not lose to square-root
on Sinkhorn distance.
"""

import argparse
import sys
from pathlib import Path

from stochflow.cli import main as stochflow_main

CONFIG = """\
[train]
epochs_total = 200
batch_size = 256
learning_rate = 0.01
two_stage = true
source_noise = true
source_noise_scale = 0.25
seed = 0

[schedule]
kind = sin_squared
scale = 1.0

[sampler]
solver = heun
steps = 50
eps = 0.0

[data]
train_n = 1024
test_n = 512
dim = 32
seed = 0

[ablate]
kinds = square_root sin_squared quadratic
scales = 0.25 0.5 1.0
seeds = 0 1 2
"""

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="out/gamma_ablation")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = out / "ablate.cfg"
    cfg.write_text(CONFIG)
    sys.exit(stochflow_main(["ablate-gamma", "--config", str(cfg), "--out", str(out)]))
