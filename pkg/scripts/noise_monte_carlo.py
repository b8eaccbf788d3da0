"""Steady-state RMSE with and without feedback under sensor noise, per seed.

Usage: python scripts/noise_monte_carlo.py [--seeds N] [--sigma-deg S] [--gain-error E] [--csv PATH]

``--gain-error`` scales every true channel gain, giving feedback a model
error inside the plant image to correct.
"""
import argparse
import math
from dataclasses import replace

import numpy as np

from softsync import sim
from softsync.cli import build_controller
from softsync.config import load_preset
from softsync.plant import GripperModel


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--sigma-deg", type=float, default=2.0)
    ap.add_argument("--gain-error", type=float, default=0.0)
    ap.add_argument("--csv", help="write per-seed RMSE (deg) here")
    args = ap.parse_args()

    cfg = load_preset("fig7b")
    ctrl = build_controller(cfg)
    spec = replace(cfg.scenario_spec(), noise_sigma=math.radians(args.sigma_deg))
    if args.gain_error:
        true = GripperModel(tuple(replace(c, k_gain=c.k_gain * (1 + args.gain_error)) for c in spec.model.nominal))
        spec = replace(spec, true_model=true)
    nc = sim.noise_comparison(spec, ctrl, args.seeds)
    off, on = np.degrees(nc.per_seed_ff_only), np.degrees(nc.per_seed_ff_fb)
    print(f"seeds={args.seeds} sigma={args.sigma_deg} deg gain_error={args.gain_error:+.2f}")
    print(f"ff only : mean {off.mean():.3f} deg  std {off.std():.3f}")
    print(f"ff + fb : mean {on.mean():.3f} deg  std {on.std():.3f}")
    print(f"feedback better on {int(np.sum(on < off))}/{args.seeds} seeds")
    if args.csv:
        np.savetxt(args.csv, np.column_stack([off, on]), delimiter=",", header="rmse_ff_only,rmse_ff_fb",
                   comments="", fmt="%.9g")


if __name__ == "__main__":
    main()
