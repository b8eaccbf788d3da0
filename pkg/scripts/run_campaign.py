"""Run every bundled preset through the CLI and print one metrics line per scenario.

Usage: python scripts/run_campaign.py [--out DIR]
"""
import argparse
import time
from pathlib import Path

from softsync.cli import main
from softsync.config import PRESETS
from softsync.sim import Metrics


def run(out: Path) -> None:
    for name in PRESETS:
        target = out / name
        t0 = time.perf_counter()
        for command in ("synth", "simulate", "analyze"):
            code = main([command, "--preset", name, "--out", str(target)])
            if code:
                raise SystemExit(f"{name}: {command} exited with {code}")
        m = Metrics.read(target / "trace_metrics.txt")
        n = sum(1 for k in m if k.startswith("settling_time."))
        settle = " ".join(f"{m[f'settling_time.{i}']:.3f}" for i in range(1, n + 1))
        extra = " ".join(f"{k}={m[k]:.4g}" for k in ("rmse_ff_only", "rmse_ff_fb", "peak_ff", "peak_fb",
                                                      "recovery_ff", "recovery_fb") if k in m)
        print(f"{name}: settling [{settle}] s  sync {m['sync_error']:.4f} rad  {extra}  "
              f"({time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/campaign")
    run(Path(ap.parse_args().out))
