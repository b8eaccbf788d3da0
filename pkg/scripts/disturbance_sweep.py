"""Peak and recovery of a one-finger hit, feedback off versus on, across feedback cutoffs.

Usage: python scripts/disturbance_sweep.py [--kind output|force] [--duration 0.5]

The amplitude is recalibrated for each setting so the feedforward-only peak
is 0.4 rad.
"""
import argparse
from dataclasses import replace

from softsync import sim, synth
from softsync.cli import build_controller
from softsync.config import load_preset


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kind", choices=("output", "force"), default="output")
    ap.add_argument("--duration", type=float, default=0.5)
    ap.add_argument("--cutoffs", type=float, nargs="+", default=[0.5, 1.0, 2.0, 5.0, 10.0, 15.0])
    args = ap.parse_args()

    cfg = load_preset("fig7c")
    base = build_controller(cfg)
    P = cfg.gripper_model().plant()
    spec = cfg.scenario_spec()
    spec = replace(spec, disturbance=replace(spec.disturbance, kind=args.kind, duration=args.duration))
    print(f"kind={args.kind} duration={args.duration} s")
    print(f"{'cutoff':>7} {'peak_ff':>8} {'peak_fb':>8} {'ratio':>6} {'rec_ff':>7} {'rec_fb':>7}")
    for w in args.cutoffs:
        ctrl = synth.wire_feedback(P, base, omega_c_fb=w)
        amp = sim.calibrate_disturbance(spec, ctrl, 0.4)
        dc = sim.disturbance_comparison(replace(spec, disturbance=replace(spec.disturbance, amplitude=amp)), ctrl)
        print(f"{w:7.2f} {dc.peak_ff:8.3f} {dc.peak_fb:8.3f} {dc.peak_fb / dc.peak_ff:6.2f} "
              f"{dc.recovery_ff:7.2f} {dc.recovery_fb:7.2f}")


if __name__ == "__main__":
    main()
