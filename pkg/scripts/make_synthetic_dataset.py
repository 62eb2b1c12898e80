#!/usr/bin/env python
"""Generate a synthetic pedestrian dataset with a manifest.

Usage: python scripts/make_synthetic_dataset.py --out data/synth --n 20 --seed 1
"""

import argparse

from irblock.synthetic import make_dataset


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--n", type=int, default=20)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--width", type=int, default=256)
    parser.add_argument("--height", type=int, default=256)
    parser.add_argument("--noise", type=float, default=0.0)
    args = parser.parse_args()
    path = make_dataset(
        args.out, args.n, seed=args.seed, width=args.width, height=args.height, noise=args.noise
    )
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
