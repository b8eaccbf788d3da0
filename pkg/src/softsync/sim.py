"""Sampled-data closed-loop simulation of the finger gripper.

The reference filter, the true plant, the nominal plant and the disturbance
shaping run in continuous time.  The inputs that change only at sample
instants (reference, feedback command, disturbance) are held over each period,
so one augmented ZOH step propagates the continuous part exactly.  The
feedback compensator runs at the sample rate as a bilinear (Tustin)
equivalent.  Its gain has a zero at s = 0 that cancels the pump integrator,
and the bilinear map keeps the slope at that zero, so the loop gain at DC
matches the continuous design.  A ZOH equivalent does not.

A step reference through a filtered inverse whose relative degree is one short
of properness produces an impulse in the feedforward input.  The impulse is
applied as a state jump of both plants at the step instant.  The logged
``u_ff`` is the regular part.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import linalg, signal

from .errors import ConfigError, ImproperTransferFunction
from .plant import GripperModel, perturb_sample
from .ratcore import ONE_POLY, Polynomial, RationalFunction, poly_divmod, poly_gcd
from .synth import Controller


# -- realizations -----------------------------------------------------------------

@dataclass(frozen=True)
class StateSpace:
    """``x' = A x + B u, y = C x + D u``; ``Ts`` is set for discrete models."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    Ts: float | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float)) if np.size(self.A) else np.zeros((0, 0))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("A must be square")
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        B = np.asarray(self.B, dtype=float).reshape(n, D.shape[1])
        C = np.asarray(self.C, dtype=float).reshape(D.shape[0], n)
        for name, val in (("A", A), ("B", B), ("C", C), ("D", D)):
            object.__setattr__(self, name, val)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def is_discrete(self) -> bool:
        return self.Ts is not None

    def freqresp(self, s0: complex) -> np.ndarray:
        n = self.n_states
        if n == 0:
            return self.D.astype(complex)
        return self.C @ np.linalg.solve(s0 * np.eye(n) - self.A, self.B) + self.D


def _companion(den: Polynomial) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(den.coeffs, dtype=float) / den.lead
    n = den.degree
    A = np.zeros((n, n))
    if n:
        A[:-1, 1:] = np.eye(n - 1)
        A[-1, :] = -a[:n]
    B = np.zeros((n, 1))
    if n:
        B[-1, 0] = 1.0
    return A, B


def realize(tf: RationalFunction) -> StateSpace:
    """Controllable canonical form of a proper rational function."""
    if not tf.is_proper:
        raise ImproperTransferFunction(f"cannot realize improper {tf.to_text()}")
    if tf.is_zero:
        return StateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), np.zeros((1, 1)))
    lead = tf.den.lead
    num, den = tf.num / lead, tf.den / lead
    q, r = poly_divmod(num, den)
    n = den.degree
    A, B = _companion(den)
    C = np.zeros((1, n))
    rc = r.coeffs
    C[0, :len(rc)] = rc
    d = q.coeffs[0] if q.coeffs else 0.0
    return StateSpace(A, B, C, [[d]])


def _poly_lcm(polys: Sequence[Polynomial]) -> Polynomial:
    out = ONE_POLY
    for p in polys:
        g = poly_gcd(out, p)
        out = out * (p // g) if g.degree > 0 else out * p
    return out.monic()


def realize_simo(channels: Sequence[RationalFunction]) -> StateSpace:
    """Minimal single-input realization over the least common denominator.

    Stacking per-channel realizations would repeat shared poles (for fingers,
    the pump integrator) and lose controllability.
    """
    if any(not c.is_strictly_proper for c in channels):
        raise ImproperTransferFunction("SIMO realization expects strictly proper channels")
    L = _poly_lcm([c.den for c in channels])
    A, B = _companion(L)
    C = np.zeros((len(channels), L.degree))
    for i, c in enumerate(channels):
        num = c.num * (L // c.den)
        C[i, :len(num.coeffs)] = num.coeffs
    return StateSpace(A, B, C, np.zeros((len(channels), 1)))


def discretize_zoh(ss: StateSpace, Ts: float) -> StateSpace:
    """Zero-order-hold equivalent via the augmented matrix exponential."""
    if ss.is_discrete:
        raise ValueError("model is already discrete")
    if not Ts > 0:
        raise ValueError("Ts must be > 0")
    n, m = ss.B.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = ss.A * Ts
    M[:n, n:] = ss.B * Ts
    E = linalg.expm(M)
    return StateSpace(E[:n, :n], E[:n, n:], ss.C, ss.D, Ts=float(Ts))


def discretize_tustin(ss: StateSpace, Ts: float) -> StateSpace:
    """Bilinear (trapezoidal) equivalent."""
    if ss.is_discrete:
        raise ValueError("model is already discrete")
    if ss.n_states == 0:
        return replace(ss, Ts=float(Ts))
    A, B, C, D, _ = signal.cont2discrete((ss.A, ss.B, ss.C, ss.D), Ts, method="bilinear")
    return StateSpace(A, B, C, D, Ts=float(Ts))


def _block_diag(*ms):
    ms = [m for m in ms if m.size or m.shape[0] or m.shape[1]]
    return linalg.block_diag(*ms) if ms else np.zeros((0, 0))


# -- scenarios ----------------------------------------------------------------------

@dataclass(frozen=True)
class DisturbanceSpec:
    """Rectangular disturbance on one finger (``finger`` is 1-based).

    ``kind = "force"`` pushes the beam: the pulse passes through the finger's
    own second-order dynamics normalized to unit DC gain, so ``amplitude`` is
    the static deflection in rad.  ``kind = "output"`` adds the pulse
    directly to the measured angle.
    """

    finger: int = 1
    start: float = 0.0
    duration: float = 0.0
    amplitude: float = 0.0
    kind: str = "output"

    def __post_init__(self):
        if self.kind not in ("force", "output"):
            raise ConfigError(f"disturbance.kind must be 'force' or 'output', got {self.kind!r}")


@dataclass(frozen=True)
class ScenarioSpec:
    model: GripperModel
    amplitude: float = math.pi / 3
    ref_start: float = 0.0
    duration: float = 5.0
    Ts: float = 0.1
    noise_sigma: float = 0.0
    noise_seed: int = 0
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    perturbation_seed: int | None = None
    true_model: GripperModel | None = None
    feedback_enabled: bool = False
    settle_band: float = 0.02
    speed_limit: float = 5.0

    def validate(self) -> None:
        if not self.Ts > 0:
            raise ConfigError("Ts must be > 0")
        if self.duration < 10 * self.Ts - 1e-12:
            raise ConfigError(f"duration {self.duration} is shorter than 10 samples of Ts = {self.Ts}")
        if self.noise_sigma < 0:
            raise ConfigError("noise sigma must be >= 0")
        if not 0 < self.settle_band < 1:
            raise ConfigError("settle band must lie in (0, 1)")
        _on_grid(self.ref_start, self.Ts, "reference start")
        if not 0 <= self.ref_start < self.duration:
            raise ConfigError("reference start must lie inside the run")
        d = self.disturbance
        if d.amplitude != 0 or d.duration != 0:
            if not 1 <= d.finger <= self.model.n_fingers:
                raise ConfigError(f"disturbance finger {d.finger} out of range 1..{self.model.n_fingers}")
            if d.start < 0 or d.duration < 0 or d.start + d.duration > self.duration + 1e-9:
                raise ConfigError("disturbance window must lie within the run")
            _on_grid(d.start, self.Ts, "disturbance start")
            _on_grid(d.start + d.duration, self.Ts, "disturbance end")
        if self.true_model is not None and self.true_model.n_fingers != self.model.n_fingers:
            raise ConfigError("true model and nominal model differ in finger count")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.Ts)) + 1

    def plant_under_test(self) -> GripperModel:
        if self.true_model is not None:
            return self.true_model
        if self.perturbation_seed is not None:
            return perturb_sample(self.model, self.perturbation_seed)
        return self.model


def _on_grid(t: float, Ts: float, what: str) -> None:
    k = round(t / Ts)
    if abs(k * Ts - t) > 1e-9 * max(1.0, abs(t)):
        raise ConfigError(f"{what} {t} is not a multiple of Ts = {Ts}")


@dataclass(frozen=True)
class SimTrace:
    t: np.ndarray
    ref: np.ndarray
    y: np.ndarray        # (N, n) true outputs
    y_meas: np.ndarray   # (N, n)
    u_ff: np.ndarray
    u_fb: np.ndarray
    u_c: np.ndarray
    d: np.ndarray        # (N, n) disturbance pulse per finger
    y_nominal: np.ndarray | None = None

    @property
    def n_fingers(self) -> int:
        return self.y.shape[1]

    def columns(self) -> list[str]:
        n = self.n_fingers
        return (["t", "ref"] + [f"y{i + 1}" for i in range(n)] + [f"ymeas{i + 1}" for i in range(n)]
                + ["u_ff", "u_fb", "u_c"] + [f"d{i + 1}" for i in range(n)])

    def table(self) -> np.ndarray:
        return np.column_stack([self.t, self.ref, self.y, self.y_meas, self.u_ff, self.u_fb, self.u_c, self.d])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("# y_delta = ymeas - y_nominal; u_c = u_ff - u_fb (negative feedback on the output error)\n")
            fh.write(",".join(self.columns()) + "\n")
            for row in self.table():
                fh.write(",".join(f"{v:.9g}" for v in row) + "\n")

    @staticmethod
    def read_csv(path) -> tuple[list[str], np.ndarray]:
        lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
        header = lines[0].split(",")
        return header, np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])


@dataclass(frozen=True)
class Metrics:
    settling_time: tuple[float, ...]
    rmse: tuple[float, ...]
    sync_error: float
    final_error: tuple[float, ...]
    peak_error: tuple[float, ...]
    recovery_time: tuple[float, ...]
    settle_band: float
    speed_limit_exceedances: int

    def as_dict(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for name in ("settling_time", "rmse", "final_error", "peak_error", "recovery_time"):
            for i, v in enumerate(getattr(self, name)):
                out[f"{name}.{i + 1}"] = v
        out["sync_error"] = self.sync_error
        out["settle_band"] = self.settle_band
        out["speed_limit_exceedances"] = self.speed_limit_exceedances
        return out

    def write(self, path) -> None:
        Path(path).write_text("".join(f"{k} = {_fmt(v)}\n" for k, v in self.as_dict().items()))

    @staticmethod
    def read(path) -> dict[str, float]:
        out = {}
        for line in Path(path).read_text().splitlines():
            if line.strip() and not line.startswith("#"):
                k, v = line.split("=", 1)
                out[k.strip()] = float(v)
        return out


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "inf" if math.isinf(v) else f"{v:.9g}"


# -- the loop ------------------------------------------------------------------------

def _split_improper(F: RationalFunction) -> tuple[float, RationalFunction]:
    """``F = f1 * s + F_r`` with ``F_r`` proper."""
    if F.is_zero or F.is_proper:
        return 0.0, F
    if F.relative_degree < -1:
        raise ImproperTransferFunction("reference filter is improper by more than one degree")
    q, r = poly_divmod(F.num, F.den)
    q_const = Polynomial(q.coeffs[:1])
    return q.coeffs[1], RationalFunction.from_canonical(r + q_const * F.den, F.den)


def _disturbance_tf(channel: RationalFunction) -> RationalFunction:
    """Unit-DC force path of a finger: ``q(0)/q(s)`` with ``q = den / s``."""
    q = channel.den // Polynomial((0.0, 1.0))
    return RationalFunction(Polynomial((q.coeffs[0],)), q)


def _feedback_realization(K) -> StateSpace:
    parts = [realize(K[0, j]) for j in range(K.cols)]
    A = _block_diag(*[p.A for p in parts])
    B = _block_diag(*[p.B for p in parts])
    C = np.hstack([p.C for p in parts])
    D = np.hstack([p.D for p in parts])
    return StateSpace(A, B, C, D)


def run_scenario(spec: ScenarioSpec, ctrl: Controller, *, _with_companion: bool = True) -> tuple[SimTrace, Metrics]:
    spec.validate()
    n = spec.model.n_fingers
    if ctrl.n_channels != n:
        raise ConfigError(f"controller has {ctrl.n_channels} channels, model has {n}")
    if spec.feedback_enabled and ctrl.fb_gain is None:
        raise ConfigError("feedback is enabled but the controller has no feedback gain")
    Ts, N = spec.Ts, spec.n_samples
    t = Ts * np.arange(N)
    k0 = int(round(spec.ref_start / Ts))
    r = np.where(np.arange(N) >= k0, spec.amplitude, 0.0)

    f1, F_r = _split_improper(ctrl.reference_tf)
    filt = realize(F_r)
    true_ch = [realize(c) for c in spec.plant_under_test().channels]
    nom_ch = [realize(c) for c in spec.model.channels]

    dist = spec.disturbance
    target = dist.finger - 1
    d_signal = np.zeros(N)
    if dist.amplitude != 0:
        k_on = int(round(dist.start / Ts))
        k_off = int(round((dist.start + dist.duration) / Ts))
        d_signal[k_on:k_off] = dist.amplitude
    if dist.kind == "force" and dist.amplitude != 0:
        dss = realize(_disturbance_tf(spec.plant_under_test().channels[target]))
    else:
        dss = StateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[0.0]])

    # joint continuous model, inputs v = [r, u_fb, d]
    nf = filt.n_states
    sizes = [nf] + [c.n_states for c in true_ch] + [c.n_states for c in nom_ch] + [dss.n_states]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    nz = int(offs[-1])
    Az = np.zeros((nz, nz))
    Bz = np.zeros((nz, 3))
    Az[:nf, :nf] = filt.A
    Bz[:nf, 0] = filt.B[:, 0]
    Bu = np.zeros((nz, 1))  # input matrix of u_c into both plants
    for i, ch in enumerate(true_ch + nom_ch):
        a, b = offs[1 + i], offs[2 + i]
        Az[a:b, a:b] = ch.A
        Bu[a:b, 0] = ch.B[:, 0]
    # u_c = C_f x_f + D_f r - u_fb
    Az[:, :nf] += Bu @ filt.C
    Bz[:, 0] += Bu[:, 0] * filt.D[0, 0]
    Bz[:, 1] -= Bu[:, 0]
    a = offs[-2]
    Az[a:, a:] = dss.A
    Bz[a:, 2] = dss.B[:, 0]
    dz = discretize_zoh(StateSpace(Az, Bz, np.zeros((1, nz)), np.zeros((1, 3))), Ts)
    Ad, Bd = dz.A, dz.B

    fb = None
    if spec.feedback_enabled:
        fb = discretize_tustin(_feedback_realization(ctrl.fb_gain), Ts)
        xk = np.zeros(fb.n_states)

    noise = np.zeros((N, n))
    if spec.noise_sigma > 0:
        noise = np.random.default_rng(spec.noise_seed).normal(0.0, spec.noise_sigma, size=(N, n))

    y = np.zeros((N, n))
    y_nom = np.zeros((N, n))
    u_ff = np.zeros(N)
    u_fb = np.zeros(N)
    d_out = np.zeros((N, n))
    z = np.zeros(nz)
    for k in range(N):
        if k == k0 and f1 != 0:
            jump = f1 * spec.amplitude
            z += Bu[:, 0] * jump
        for i in range(n):
            a, b = offs[1 + i], offs[2 + i]
            y[k, i] = true_ch[i].C[0] @ z[a:b]
            a, b = offs[1 + n + i], offs[2 + n + i]
            y_nom[k, i] = nom_ch[i].C[0] @ z[a:b]
        if dist.kind == "force":
            d_out[k, target] = d_signal[k]
            y[k, target] += dss.C[0] @ z[offs[-2]:] if dss.n_states else 0.0
        else:
            d_out[k, target] = d_signal[k]
            y[k, target] += d_signal[k]
        u_ff[k] = filt.C[0] @ z[:nf] + filt.D[0, 0] * r[k]
        if fb is not None:
            y_delta = y[k] + noise[k] - y_nom[k]
            u_fb[k] = fb.C[0] @ xk + fb.D[0] @ y_delta
            xk = fb.A @ xk + fb.B @ y_delta
        z = Ad @ z + Bd @ np.array([r[k], u_fb[k], d_signal[k]])

    trace = SimTrace(t, r, y, y + noise, u_ff, u_fb, u_ff - u_fb, d_out, y_nom)

    clean = None
    if _with_companion and dist.amplitude != 0:
        quiet = replace(spec, disturbance=replace(dist, amplitude=0.0))
        clean, _ = run_scenario(quiet, ctrl, _with_companion=False)
    return trace, compute_metrics(trace, spec, clean)


def settling_times(t: np.ndarray, y: np.ndarray, amplitude: float, t0: float, band: float) -> np.ndarray:
    """Time from ``t0`` after which each column stays within ``band * |amplitude|`` of its last sample.

    The final entry into the band is located by linear interpolation between
    the last outside sample and its successor.  A column still outside the
    band one sample before the end is reported as not settled (``inf``).
    """
    return _band_entry(t, np.abs(y - y[-1]), band * abs(amplitude), t0)


def _band_entry(t: np.ndarray, dev: np.ndarray, tol: float, t0: float) -> np.ndarray:
    out = []
    for col in np.atleast_2d(dev.T):
        idx = np.nonzero((col > tol) & (t >= t0))[0]
        if idx.size == 0:
            out.append(0.0)
        elif idx[-1] >= len(t) - 2:
            out.append(math.inf)
        else:
            k = idx[-1]
            frac = (col[k] - tol) / (col[k] - col[k + 1])
            out.append(float(t[k] + frac * (t[k + 1] - t[k]) - t0))
    return np.array(out)


def compute_metrics(trace: SimTrace, spec: ScenarioSpec, clean: SimTrace | None = None) -> Metrics:
    t, y, n = trace.t, trace.y, trace.n_fingers
    ref = trace.ref[:, None]
    settle = settling_times(t, y, spec.amplitude, spec.ref_start, spec.settle_band)
    half = t >= t[-1] / 2
    rmse = np.sqrt(np.mean((y[half] - ref[half]) ** 2, axis=0))
    sync = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            sync = max(sync, float(np.max(np.abs(y[:, i] - y[:, j]))))
    final = y[-1] - spec.amplitude
    peak = np.zeros(n)
    recovery = np.zeros(n)
    if clean is not None:
        after = t >= spec.disturbance.start
        dev = np.abs(y - clean.y)
        peak = np.max(dev[after], axis=0)
        recovery = _band_entry(t, dev, spec.settle_band * abs(spec.amplitude), spec.disturbance.start)
    exceed = int(np.sum(np.abs(trace.u_c) > spec.speed_limit))
    return Metrics(tuple(map(float, settle)), tuple(map(float, rmse)), sync, tuple(map(float, final)),
                   tuple(map(float, peak)), tuple(map(float, recovery)), spec.settle_band, exceed)


# -- comparisons ----------------------------------------------------------------------

def noise_seeds(base_seed: int, n_seeds: int) -> list[int]:
    """Per-run noise seeds: child ``i`` of ``SeedSequence(base_seed)``, as 63-bit integers."""
    return [int(c.generate_state(1, np.uint64)[0] >> np.uint64(1))
            for c in np.random.SeedSequence(base_seed).spawn(n_seeds)]


@dataclass(frozen=True)
class NoiseComparison:
    rmse_ff_only: float
    rmse_ff_fb: float
    per_seed_ff_only: np.ndarray
    per_seed_ff_fb: np.ndarray


def noise_comparison(spec: ScenarioSpec, ctrl: Controller, n_seeds: int) -> NoiseComparison:
    """Mean steady-state RMSE (over seeds and fingers) with feedback off and on."""
    off, on = [], []
    for seed in noise_seeds(spec.noise_seed, n_seeds):
        for flag, sink in ((False, off), (True, on)):
            _, m = run_scenario(replace(spec, noise_seed=seed, feedback_enabled=flag), ctrl)
            sink.append(float(np.mean(m.rmse)))
    return NoiseComparison(float(np.mean(off)), float(np.mean(on)), np.array(off), np.array(on))


@dataclass(frozen=True)
class DisturbanceComparison:
    peak_ff: float
    peak_fb: float
    recovery_ff: float
    recovery_fb: float
    peaks_ff: tuple[float, ...]
    peaks_fb: tuple[float, ...]


def disturbance_comparison(spec: ScenarioSpec, ctrl: Controller) -> DisturbanceComparison:
    """Peak deviation and recovery of the disturbed finger, feedback off versus on."""
    i = spec.disturbance.finger - 1
    _, off = run_scenario(replace(spec, feedback_enabled=False), ctrl)
    _, on = run_scenario(replace(spec, feedback_enabled=True), ctrl)
    return DisturbanceComparison(off.peak_error[i], on.peak_error[i], off.recovery_time[i], on.recovery_time[i],
                                 off.peak_error, on.peak_error)


def calibrate_disturbance(spec: ScenarioSpec, ctrl: Controller, target_peak: float = 0.4) -> float:
    """Amplitude giving a feedforward-only peak of ``target_peak``.

    Without feedback the deviation is linear in the amplitude, so one unit run
    fixes the scale.
    """
    unit = replace(spec, feedback_enabled=False, disturbance=replace(spec.disturbance, amplitude=1.0))
    _, m = run_scenario(unit, ctrl)
    peak = m.peak_error[spec.disturbance.finger - 1]
    if peak == 0:
        raise ConfigError("disturbance has no effect on its finger")
    return target_peak / peak
