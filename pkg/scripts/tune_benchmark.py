"""Paired-seed sweep of the synthetic ordering benchmark.

Runs the 2-step schedule against the single-high-tier baseline over several
seeds and prints per-seed best validation accuracies, to sanity-check the
benchmark configuration before freezing it into the acceptance suite.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from tierflow.data import SynthConfig, SynthTier, TierSpec, synth_generate
from tierflow.ftl import DataContext, TrainSchedule, TrainStep, train_ftl


def benchmark_config(seed: int, **overrides) -> SynthConfig:
    params = dict(
        n_compounds=400,
        n_proteins=150,
        compound_bits=32,
        protein_bits=32,
        tiers=[
            SynthTier(TierSpec(300, 700), 8000, 0.30),
            SynthTier(TierSpec(700, 900), 2000, 0.05),
            SynthTier(TierSpec(900, 1000), 1000, 0.0),
        ],
        validation_tier=TierSpec(900, 1000),
        seed=seed,
        bit_density=0.5,
        true_rate=0.2,
    )
    params.update(overrides)
    return SynthConfig(**params)


def run_pair(seed: int, epochs=(50, 50, 100), **overrides) -> tuple[float, float]:
    data = synth_generate(benchmark_config(seed, **overrides))
    ctx = DataContext(
        data.interactions,
        data.compounds.as_float_features(),
        data.proteins.as_float_features(),
    )
    common = dict(
        validation_tier=TierSpec(900, 1000),
        batch_size=1000,
        learning_rate=1e-3,
        seed=seed,
        hidden_layers=(32, 16, 8),
    )
    ftl = train_ftl(
        TrainSchedule(
            [TrainStep(TierSpec(300, 700), epochs[0]), TrainStep(TierSpec(700, 900), epochs[1])],
            **common,
        ),
        ctx,
    )
    base = train_ftl(
        TrainSchedule([TrainStep(TierSpec(700, 900), epochs[2])], **common), ctx
    )
    _, _, ftl_acc, _ = ftl.log.best_validation()
    _, _, base_acc, _ = base.log.best_validation()
    return ftl_acc, base_acc


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--true-rate", type=float, default=0.2)
    ap.add_argument("--density", type=float, default=0.5)
    ap.add_argument("--bits", type=int, default=32)
    ap.add_argument("--grid", type=int, nargs=2, default=[400, 150])
    args = ap.parse_args()

    wins = 0
    ftl_all, base_all = [], []
    t0 = time.time()
    for seed in range(1, args.seeds + 1):
        ftl_acc, base_acc = run_pair(
            seed,
            true_rate=args.true_rate,
            bit_density=args.density,
            compound_bits=args.bits,
            protein_bits=args.bits,
            n_compounds=args.grid[0],
            n_proteins=args.grid[1],
        )
        win = ftl_acc > base_acc
        wins += win
        ftl_all.append(ftl_acc)
        base_all.append(base_acc)
        print(
            f"seed {seed:2d}: ftl {ftl_acc:7.3f}  baseline {base_acc:7.3f}  "
            f"{'WIN' if win else 'loss'}"
        )
    print(
        f"wins {wins}/{args.seeds}; mean ftl {np.mean(ftl_all):.3f} "
        f"vs baseline {np.mean(base_all):.3f}; {time.time() - t0:.1f}s"
    )


if __name__ == "__main__":
    main()
