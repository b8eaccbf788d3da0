"""Generate noisy step traces for a channel and identify them back.

Usage: python scripts/identify_traces.py [--c 2.66] [--k 3.61] [--n 100] [--noise-deg 2] [--out DIR]

The step size is scaled so the bend reaches 100 deg at the last sample.
Each trace is written as a t,y CSV that ``softsync identify`` accepts.
"""
import argparse
import math
from pathlib import Path

import numpy as np

from softsync import plant


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gain", type=float, default=7.831)
    ap.add_argument("--c", type=float, default=2.66)
    ap.add_argument("--k", type=float, default=3.61)
    ap.add_argument("--n", type=int, default=100, help="number of noisy traces")
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--noise-deg", type=float, default=2.0)
    ap.add_argument("--seed", type=int, default=95)
    ap.add_argument("--out", help="directory for the trace CSVs")
    args = ap.parse_args()

    coeffs = plant.ChannelCoeffs(args.gain, args.c, args.k)
    t = 0.1 * np.arange(args.samples)
    u = math.radians(100.0) / plant.simulate_channel_step(args.gain, args.c, args.k, t)[-1]
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, seed in enumerate(np.random.SeedSequence(args.seed).generate_state(args.n)):
        tr = plant.synthetic_step_trace(coeffs, n_samples=args.samples, u=u,
                                        noise_sigma=math.radians(args.noise_deg), seed=int(seed))
        if out:
            tr.write_csv(out / f"trace_{i:03d}.csv")
        res = plant.identify_second_order(tr, args.gain)
        rows.append((res.c_ratio, res.k_ratio, res.fit_percent))
    arr = np.array(rows)
    print(f"step amplitude u = {u:.6g}")
    print(f"c_ratio  mean {arr[:, 0].mean():.4f}  std {arr[:, 0].std():.4f}  (true {args.c})")
    print(f"k_ratio  mean {arr[:, 1].mean():.4f}  std {arr[:, 1].std():.4f}  (true {args.k})")
    print(f"fit      mean {arr[:, 2].mean():.2f} %  range [{arr[:, 2].min():.2f}, {arr[:, 2].max():.2f}] %")
    print(f"fits in [90, 97] %: {int(np.sum((arr[:, 2] >= 90) & (arr[:, 2] <= 97)))}/{args.n}")


if __name__ == "__main__":
    main()
