#!/usr/bin/env python3
"""Run every named experiment into out/<name>/.

Full paper-scale runs (10 seeds at a million iterations each for the
learning experiments) take a while; pass --quick for a reduced demo pass.
"""

import argparse
from pathlib import Path

from sgl.experiments import EXPERIMENT_NAMES, ReproductionSpec, reproduce


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out", help="output root directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--iters", type=int, default=1_000_000)
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument(
        "--quick", action="store_true",
        help="3 seeds at 200k iterations, for a fast end-to-end look",
    )
    args = parser.parse_args()
    iters = 200_000 if args.quick else args.iters
    seeds = 3 if args.quick else args.seeds
    for name in EXPERIMENT_NAMES:
        spec = ReproductionSpec(
            name=name,
            seed=args.seed,
            iterations=iters,
            outdir=Path(args.out) / name,
            n_seeds=seeds,
            workers=args.workers,
        )
        summary = reproduce(spec)
        print(f"{name}: wrote {spec.outdir}/summary.json "
              f"({len(summary)} top-level keys)")


if __name__ == "__main__":
    main()
