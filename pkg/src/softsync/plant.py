"""Soft-finger and syringe-pump models.

Each finger is a bending beam driven by chamber pressure, and the pressure is
the integral of the pump flow.  Cascading the two gives a third-order channel
``k_gain / (s^3 + c s^2 + k s)`` from motor speed to bending angle.  Stacking
the channels of all fingers gives the single-input, multi-output plant.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg, optimize

from .errors import EmptyChannelList, FitFailed, NonlinearExponent, ParseError, SpeedLimitExceeded
from .ratcore import Polynomial, RationalFunction
from .ratmat import RationalMatrix


def _require_positive(obj, names: Iterable[str]) -> None:
    for name in names:
        v = getattr(obj, name)
        if not (np.isfinite(v) and v > 0):
            raise ValueError(f"{type(obj).__name__}.{name} must be finite and > 0, got {v!r}")


@dataclass(frozen=True)
class ActuatorParams:
    """Geometry and material of one bending actuator (SI units)."""

    E: float        # Young's modulus
    w: float        # width
    a: float        # top surface to neutral axis
    b: float        # neutral axis to bottom surface
    t: float        # wall thickness
    L0: float       # initial length
    n: float = 1.0  # material exponent
    M_eq: float = 1.0
    C_n: float = 1.0
    c_gain: float = 1.0

    def __post_init__(self):
        _require_positive(self, ("E", "w", "a", "b", "t", "L0", "n", "M_eq", "C_n", "c_gain"))


@dataclass(frozen=True)
class PumpParams:
    """Syringe pump driven through a lead screw."""

    A_syr: float
    lead: float
    C_i: float
    omega_max: float = 5.0  # rev/s

    def __post_init__(self):
        _require_positive(self, ("A_syr", "lead", "C_i", "omega_max"))


@dataclass(frozen=True)
class ChannelCoeffs:
    """Coefficients of ``k_gain / (s^3 + c_ratio s^2 + k_ratio s)``."""

    k_gain: float
    c_ratio: float
    k_ratio: float

    def __post_init__(self):
        if not all(np.isfinite(v) for v in (self.k_gain, self.c_ratio, self.k_ratio)):
            raise ValueError("channel coefficients must be finite")
        if self.c_ratio <= 0 or self.k_ratio <= 0:
            raise ValueError("c_ratio and k_ratio must be > 0 for a Hurwitz quadratic factor")

    def tf(self) -> RationalFunction:
        return coefficient_channel(self.k_gain, self.c_ratio, self.k_ratio)


def moment_of_inertia(p: ActuatorParams) -> float:
    """Large-deflection moment of inertia ``(1/2)^n (1/(2+n)) w (a+b)^(2+n)``."""
    n = p.n
    return 0.5 ** n / (2.0 + n) * p.w * (p.a + p.b) ** (2.0 + n)


def spring_constant(p: ActuatorParams) -> float:
    """Bending stiffness ``((n+1)/n)^n E I_n / L0^(n+1)``."""
    n = p.n
    return ((n + 1.0) / n) ** n * p.E * moment_of_inertia(p) / p.L0 ** (n + 1.0)


def flow_rate(p: PumpParams, omega_m: float) -> float:
    """Volumetric flow ``A * l * omega / (2 pi)``."""
    return p.A_syr * p.lead * omega_m / (2.0 * math.pi)


def pump_pressure_rate(p: PumpParams, omega_m: float) -> float:
    """Chamber pressure rate for motor speed ``omega_m`` (rev/s)."""
    if abs(omega_m) > p.omega_max:
        raise SpeedLimitExceeded(f"|omega_m| = {abs(omega_m):g} rev/s exceeds the limit {p.omega_max:g}")
    return flow_rate(p, omega_m) / p.C_i


def coefficient_channel(k_gain: float, c_ratio: float, k_ratio: float) -> RationalFunction:
    return RationalFunction(Polynomial((k_gain,)), Polynomial((0.0, k_ratio, c_ratio, 1.0)))


def channel_coeffs(act: ActuatorParams, pump: PumpParams) -> ChannelCoeffs:
    """Channel coefficients from physical parameters (linear material only)."""
    if act.n != 1:
        raise NonlinearExponent(f"the linear pipeline needs n = 1, got n = {act.n}")
    gain = act.c_gain * pump.A_syr * pump.lead / (2.0 * math.pi * pump.C_i * act.M_eq)
    return ChannelCoeffs(gain, act.C_n / act.M_eq, spring_constant(act) / act.M_eq)


def channel_tf(act: ActuatorParams, pump: PumpParams) -> RationalFunction:
    """Motor speed to bending angle: pump integrator cascaded with the beam."""
    c = channel_coeffs(act, pump)
    return coefficient_channel(c.k_gain, c.c_ratio, c.k_ratio)


@dataclass(frozen=True)
class NaturalFrequency:
    omega_n: float
    zeta: float
    in_design_band: bool


def natural_frequency(c_ratio: float, k_ratio: float, band: tuple[float, float] = (2.0, 3.0)) -> NaturalFrequency:
    if k_ratio <= 0:
        raise ValueError("k_ratio must be > 0")
    wn = math.sqrt(k_ratio)
    return NaturalFrequency(wn, c_ratio / (2.0 * wn), band[0] <= wn <= band[1])


def stack_simo(channels: Sequence[RationalFunction]) -> RationalMatrix:
    if len(channels) == 0:
        raise EmptyChannelList("at least one channel is required")
    return RationalMatrix.column(list(channels))


@dataclass(frozen=True)
class GripperModel:
    """Per-finger channels plus relative perturbation bounds ``(delta_c, delta_k)``."""

    nominal: tuple[ChannelCoeffs, ...]
    bounds: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "nominal", tuple(self.nominal))
        if not self.nominal:
            raise EmptyChannelList("a gripper needs at least one finger")
        dc, dk = self.bounds
        if not (0 <= dc < 1 and 0 <= dk < 1):
            raise ValueError("perturbation bounds must lie in [0, 1)")

    @classmethod
    def from_triples(cls, triples: Iterable[Sequence[float]], bounds=(0.0, 0.0)) -> "GripperModel":
        return cls(tuple(ChannelCoeffs(*map(float, t)) for t in triples), tuple(map(float, bounds)))

    @property
    def n_fingers(self) -> int:
        return len(self.nominal)

    @property
    def channels(self) -> list[RationalFunction]:
        return [c.tf() for c in self.nominal]

    def plant(self) -> RationalMatrix:
        return stack_simo(self.channels)


def perturb_sample(model: GripperModel, seed) -> GripperModel:
    """Scale each finger's damping and stiffness ratios by independent uniform factors."""
    rng = np.random.default_rng(seed)
    dc, dk = model.bounds
    out = []
    for c in model.nominal:
        fc, fk = rng.uniform(1 - dc, 1 + dc), rng.uniform(1 - dk, 1 + dk)
        out.append(replace(c, c_ratio=c.c_ratio * fc, k_ratio=c.k_ratio * fk))
    return replace(model, nominal=tuple(out))


def perturb_batch(model: GripperModel, seed: int, count: int) -> list[GripperModel]:
    """``count`` independent draws; draw ``i`` uses child ``i`` of ``SeedSequence(seed)``."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [perturb_sample(model, ch) for ch in children]


# -- measured step responses -------------------------------------------------------

@dataclass(frozen=True)
class StepTrace:
    """Uniformly sampled bending response to a constant input ``u`` applied at t = 0."""

    t: np.ndarray
    y: np.ndarray
    u: float = 1.0

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if t.ndim != 1 or t.shape != y.shape:
            raise ValueError("t and y must be 1-D arrays of equal length")
        if len(t) >= 2:
            dt = np.diff(t)
            if np.any(dt <= 0):
                raise ValueError("t must be strictly increasing")
            if np.max(np.abs(dt - dt.mean())) > 1e-6 * max(dt.mean(), 1e-12):
                raise ValueError("t must be uniformly sampled")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "y", y)

    @property
    def Ts(self) -> float:
        return float(self.t[1] - self.t[0])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t,y\n")
            for ti, yi in zip(self.t, self.y):
                fh.write(f"{ti:.9g},{yi:.9g}\n")

    @classmethod
    def read_csv(cls, path, u: float = 1.0) -> "StepTrace":
        path = Path(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ParseError(f"{path}: empty file")
        header = [h.strip() for h in rows[0]]
        if header != ["t", "y"]:
            raise ParseError(f"{path}: expected header 't,y', got {','.join(header)!r}")
        t, y = [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 columns")
            try:
                t.append(float(row[0]))
                y.append(float(row[1]))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
        try:
            return cls(np.array(t), np.array(y), u)
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from None


def _channel_ss(k_gain: float, c_ratio: float, k_ratio: float):
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, -k_ratio, -c_ratio]])
    B = np.array([0.0, 0.0, 1.0])
    C = np.array([k_gain, 0.0, 0.0])
    return A, B, C


def simulate_channel_step(k_gain: float, c_ratio: float, k_ratio: float, t: np.ndarray, u: float = 1.0) -> np.ndarray:
    """Exact response of one channel to a step of size ``u`` at t = 0, sampled at uniform ``t``."""
    t = np.asarray(t, dtype=float)
    A, B, C = _channel_ss(k_gain, c_ratio, k_ratio)
    Ts = t[1] - t[0] if len(t) > 1 else 0.0
    M = np.zeros((4, 4))
    M[:3, :3] = A * Ts
    M[:3, 3] = B * Ts
    E = linalg.expm(M)
    Ad, Bd = E[:3, :3], E[:3, 3]
    # start from t[0]: shift by integrating from 0 to t[0]
    M0 = np.zeros((4, 4))
    M0[:3, :3] = A * t[0]
    M0[:3, 3] = B * t[0]
    x = linalg.expm(M0)[:3, 3] * u
    out = np.empty(len(t))
    for i in range(len(t)):
        out[i] = C @ x
        x = Ad @ x + Bd * u
    return out


def fit_percent(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Normalized-RMSE fit, 100 (1 - ||y - y_hat|| / ||y - mean(y)||)."""
    spread = np.linalg.norm(y - np.mean(y))
    if spread == 0:
        return -np.inf
    return 100.0 * (1.0 - np.linalg.norm(y - y_hat) / spread)


@dataclass(frozen=True)
class IdentResult:
    c_ratio: float
    k_ratio: float
    fit_percent: float


def identify_second_order(trace: StepTrace, k_known: float,
                          grid: Sequence[float] = (0.5, 1.0, 2.0, 4.0, 8.0)) -> IdentResult:
    """Fit the beam's damping and stiffness ratios to a measured step response.

    The channel gain is taken as known.  Output error is minimized with
    Nelder–Mead in log-parameters, started from every point of ``grid x grid``
    and keeping the best local optimum.
    """
    if len(trace.t) < 50:
        raise ValueError("identification needs at least 50 samples")
    if trace.u == 0:
        raise ValueError("identification needs a nonzero input step")
    y = trace.y
    if np.linalg.norm(y - y.mean()) == 0:
        raise FitFailed("trace is constant; nothing to fit")

    def cost(theta):
        c, k = np.exp(theta)
        r = y - simulate_channel_step(k_known, c, k, trace.t, trace.u)
        return float(r @ r)

    starts = [(cost(np.log([c, k])), np.log([c, k])) for c in grid for k in grid]
    starts.sort(key=lambda item: item[0])
    best = None
    for _, x0 in starts[:6]:
        res = optimize.minimize(cost, x0, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        if best is None or res.fun < best.fun:
            best = res
    c, k = np.exp(best.x)
    fit = fit_percent(y, simulate_channel_step(k_known, c, k, trace.t, trace.u))
    if not fit >= 0:
        raise FitFailed(f"fit {fit:.1f}% is below zero")
    return IdentResult(float(c), float(k), float(fit))


def synthetic_step_trace(coeffs: ChannelCoeffs, Ts: float = 0.1, n_samples: int = 100, u: float = 1.0,
                         noise_sigma: float = 0.0, seed=None) -> StepTrace:
    t = Ts * np.arange(n_samples)
    y = simulate_channel_step(coeffs.k_gain, coeffs.c_ratio, coeffs.k_ratio, t, u)
    if noise_sigma > 0:
        y = y + np.random.default_rng(seed).normal(0.0, noise_sigma, size=n_samples)
    return StepTrace(t, y, u)


def check_minimal(A, B, C) -> tuple[bool, bool]:
    """Controllability and observability by SVD rank of the Kalman matrices."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    C = np.asarray(C, dtype=float).reshape(-1, A.shape[0])
    n = A.shape[0]
    ctrb = [B]
    obsv = [C]
    for _ in range(n - 1):
        ctrb.append(A @ ctrb[-1])
        obsv.append(obsv[-1] @ A)
    return _full_rank(np.hstack(ctrb), n), _full_rank(np.vstack(obsv), n)


def _full_rank(M: np.ndarray, n: int) -> bool:
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return False
    tol = max(M.shape) * sv[0] * 1e-12
    return int(np.sum(sv > tol)) == n
