#!/usr/bin/env python3
"""Dimension stress test: standard vs all-injections across d = 2 .. 2048.

Writes results.csv / summary.csv under --out (default out/dim_sweep).
Expect the standard variant's cosine alignment to fall as d grows while
the stochastic variant stays high.
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
dim = 512
seed = 0

[sweep]
axis = dim
values = 2 8 32 128 512 2048
seeds = 0 1 2
variants = standard stochastic
noise_scaling = geometric
noise_kappa = 1.4
"""

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="out/dim_sweep")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = out / "sweep.cfg"
    cfg.write_text(CONFIG)
    sys.exit(stochflow_main(["sweep", "--config", str(cfg), "--out", str(out)]))
