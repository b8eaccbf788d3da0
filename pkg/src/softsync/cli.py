"""Command-line entry point: ``softsync {synth,simulate,analyze,identify}``.

Exit codes: 0 success, 2 bad configuration or input file, 3 synthesis failure,
4 simulation failure, 5 identification fit failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import plant, sim, synth
from .config import PRESETS, Config, load_config, load_preset
from .errors import (ConfigError, FitFailed, ImproperTransferFunction, ParseError, RankDeficient,
                     SimulationError, SynthesisError, ZeroEntry)
from .ratcore import Polynomial, RationalFunction
from .ratmat import LeftInverseKind

EXIT_OK, EXIT_CONFIG, EXIT_SYNTH, EXIT_SIM, EXIT_FIT = 0, 2, 3, 4, 5


class _Failure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def step_reference(amplitude: float) -> RationalFunction:
    return RationalFunction(Polynomial((amplitude,)), Polynomial((0.0, 1.0)))


def build_controller(cfg: Config) -> synth.Controller:
    """Feedforward from the config, with feedback wiring attached."""
    P = cfg.gripper_model().plant()
    c = cfg.controller
    try:
        ctrl = synth.synthesize_feedforward(P, step_reference(cfg.scenario.amplitude), c.omega_c,
                                            LeftInverseKind.parse(c.inverse), c.min_order)
        return synth.wire_feedback(P, ctrl, c.fb_omega_c, c.fb_order)
    except (SynthesisError, ZeroEntry, RankDeficient) as exc:
        raise _Failure(EXIT_SYNTH, f"synthesis failed: {exc}") from None


def _out_dir(cfg: Config, override: str | None) -> Path:
    out = Path(override) if override else cfg.output_path()
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(cfg: Config, out: Path) -> None:
    ctrl = build_controller(cfg)
    path = out / "controller.txt"
    synth.write_manifest(ctrl, path)
    print(f"U_ff = {ctrl.u_ff.to_text()}")
    print(f"stability: {synth.stability_verdict(ctrl.u_ff)}")
    print(f"filter order: {ctrl.filter.order} (cutoff {ctrl.filter.omega_c:g} rad/s)")
    print(f"manifest: {path}")


def _write_run(out: Path, stem: str, trace: sim.SimTrace, metrics: sim.Metrics) -> None:
    trace.write_csv(out / f"{stem}.csv")
    metrics.write(out / f"{stem}_metrics.txt")


def cmd_simulate(cfg: Config, out: Path) -> None:
    ctrl = build_controller(cfg)
    synth.write_manifest(ctrl, out / "controller.txt")
    spec = cfg.scenario_spec()
    s = cfg.scenario
    extra: dict[str, float] = {}
    try:
        if s.compare == "disturbance" and s.disturbance.calibrate_peak is not None:
            amp = sim.calibrate_disturbance(spec, ctrl, s.disturbance.calibrate_peak)
            spec = replace(spec, disturbance=replace(spec.disturbance, amplitude=amp))
            extra["disturbance_amplitude"] = amp
        trace, metrics = sim.run_scenario(spec, ctrl)
        if s.compare == "noise":
            nc = sim.noise_comparison(spec, ctrl, s.noise.n_seeds)
            extra.update(rmse_ff_only=nc.rmse_ff_only, rmse_ff_fb=nc.rmse_ff_fb, n_seeds=s.noise.n_seeds)
        elif s.compare == "disturbance":
            dc = sim.disturbance_comparison(spec, ctrl)
            extra.update(peak_ff=dc.peak_ff, peak_fb=dc.peak_fb, recovery_ff=dc.recovery_ff,
                         recovery_fb=dc.recovery_fb)
        if s.compare != "none":
            for flag, stem in ((False, "trace_ff"), (True, "trace_fb")):
                _write_run(out, stem, *sim.run_scenario(replace(spec, feedback_enabled=flag), ctrl))
    except (SimulationError, ImproperTransferFunction, FloatingPointError) as exc:
        raise _Failure(EXIT_SIM, f"simulation failed: {exc}") from None
    if not np.all(np.isfinite(trace.table())):
        raise _Failure(EXIT_SIM, "simulation produced non-finite values")
    _write_run(out, "trace", trace, metrics)
    if extra:
        with open(out / "trace_metrics.txt", "a") as fh:
            for k, v in extra.items():
                fh.write(f"{k} = {sim._fmt(v)}\n")
    settle = max(metrics.settling_time)
    print(f"settling={sim._fmt(settle)} sync={metrics.sync_error:.6g} rmse={float(np.mean(metrics.rmse)):.6g}")


def analysis_report(cfg: Config) -> list[tuple[str, str]]:
    """Minimality, perturbation Monte Carlo and robustness-weight fit, as key/value pairs."""
    model = cfg.gripper_model()
    a = cfg.analyze
    rows: list[tuple[str, str]] = []
    ss = sim.realize_simo(model.channels)
    ctrb, obsv = plant.check_minimal(ss.A, ss.B, ss.C)
    rows.append(("state_dimension", str(ss.n_states)))
    rows.append(("controllable", "yes" if ctrb else "no"))
    rows.append(("observable", "yes" if obsv else "no"))
    rows.append(("controllable and observable", "yes" if ctrb and obsv else "no"))

    draws = plant.perturb_batch(model, a.seed, a.n_draws)
    dc, dk = model.bounds
    fc = np.array([[d.nominal[i].c_ratio / model.nominal[i].c_ratio for i in range(model.n_fingers)] for d in draws])
    fk = np.array([[d.nominal[i].k_ratio / model.nominal[i].k_ratio for i in range(model.n_fingers)] for d in draws])
    inside = bool(np.all(np.abs(fc - 1) <= dc + 1e-15) and np.all(np.abs(fk - 1) <= dk + 1e-15))
    rows += [("bounds.delta_c", f"{dc:.9g}"), ("bounds.delta_k", f"{dk:.9g}"), ("draws", str(a.n_draws)),
             ("draws_within_bounds", "yes" if inside else "no"),
             ("c_factor.min", f"{fc.min():.9g}"), ("c_factor.max", f"{fc.max():.9g}"),
             ("k_factor.min", f"{fk.min():.9g}"), ("k_factor.max", f"{fk.max():.9g}")]

    omega = np.logspace(math.log10(a.omega_min), math.log10(a.omega_max), a.n_omega)
    for i in range(model.n_fingers):
        fit = synth.fit_robustness_weight(model.channels[i], [d.channels[i] for d in draws], omega, seed=a.seed)
        margin = fit.magnitude() - fit.samples
        rows += [(f"finger{i + 1}.W_T", fit.W_T.to_text()),
                 (f"finger{i + 1}.W_T.k", f"{fit.k:.9g}"), (f"finger{i + 1}.W_T.z", f"{fit.z:.9g}"),
                 (f"finger{i + 1}.W_T.p", f"{fit.p:.9g}"),
                 (f"finger{i + 1}.envelope_max", f"{fit.samples.max():.9g}"),
                 (f"finger{i + 1}.weight_dominates", "yes" if fit.dominates() else "no"),
                 (f"finger{i + 1}.min_margin", f"{margin.min():.9g}")]
    return rows


def cmd_analyze(cfg: Config, out: Path) -> None:
    rows = analysis_report(cfg)
    path = out / "report.txt"
    path.write_text("".join(f"{k} = {v}\n" for k, v in rows))
    lookup = dict(rows)
    print(f"controllable and observable: {lookup['controllable and observable']}")
    print(f"report: {path}")


def cmd_identify(cfg: Config, out: Path, trace_path: str | None, gain: float | None,
                 amplitude: float | None) -> None:
    idc = cfg.identify
    src = trace_path or idc.trace
    if src is None:
        raise _Failure(EXIT_CONFIG, "identify needs a trace file (--trace or identify.trace)")
    src_path = Path(src)
    if not src_path.is_absolute() and trace_path is None:
        src_path = cfg.base_dir / src_path
    try:
        trace = plant.StepTrace.read_csv(src_path, amplitude if amplitude is not None else idc.step_amplitude)
    except (OSError, ParseError) as exc:
        raise _Failure(EXIT_CONFIG, f"cannot read trace: {exc}") from None
    if len(trace.t) < 50:
        raise _Failure(EXIT_CONFIG, f"trace has {len(trace.t)} rows; at least 50 are needed")
    try:
        res = plant.identify_second_order(trace, gain if gain is not None else idc.gain)
    except FitFailed as exc:
        raise _Failure(EXIT_FIT, f"identification failed: {exc}") from None
    path = out / "identified.txt"
    path.write_text(f"c_ratio = {res.c_ratio:.9g}\nk_ratio = {res.k_ratio:.9g}\nfit_percent = {res.fit_percent:.9g}\n")
    print(f"c_ratio={res.c_ratio:.6g} k_ratio={res.k_ratio:.6g} fit={res.fit_percent:.2f}%")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="softsync", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("synth", "synthesize the controller and write its manifest"),
                        ("simulate", "run the configured scenario"),
                        ("analyze", "minimality, perturbation envelope and robustness weight"),
                        ("identify", "fit damping and stiffness ratios to a step trace")):
        sp = sub.add_parser(name, help=help_)
        src = sp.add_mutually_exclusive_group(required=name != "identify")
        src.add_argument("--config", help="scenario TOML file")
        src.add_argument("--preset", choices=PRESETS, help="bundled scenario")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.add_argument("--seed", type=int, help="override every seed in the config")
        if name == "identify":
            sp.add_argument("--trace", help="two-column t,y CSV")
            sp.add_argument("--gain", type=float, help="known channel gain")
            sp.add_argument("--amplitude", type=float, help="input step amplitude")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.config:
            cfg = load_config(args.config)
        elif args.preset:
            cfg = load_preset(args.preset)
        else:
            cfg = Config()
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg.override_seed(args.seed)
            if args.command != "identify":
                cfg.scenario_spec()
        out = _out_dir(cfg, args.out)
        if args.command == "synth":
            cmd_synth(cfg, out)
        elif args.command == "simulate":
            cmd_simulate(cfg, out)
        elif args.command == "analyze":
            cmd_analyze(cfg, out)
        else:
            cmd_identify(cfg, out, args.trace, args.gain, args.amplitude)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _Failure as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
