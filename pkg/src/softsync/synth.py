"""Feedforward and feedback synthesis for one-input, many-finger plants.

The feedforward input is ``U = H * P_dag * Y_d``.  ``P_dag`` is a left inverse of
the stacked plant, and ``H = (w_c / (s + w_c))^m`` is a unit-DC-gain low-pass
filter whose order is raised until ``U`` is proper.  The feedback path reuses
the inverse: ``U_fb = H_fb * P_dag * y_delta`` acts on the difference between
the measured and the nominal outputs, and the applied input is
``U_c = U_ff - U_fb``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import EmptySet, ImproperUnfixable, ParseError, PoleOnGrid, UnstableInverse
from .ratcore import EPS_STAB, Polynomial, RationalFunction, Stability, classify_stability, freqresp, parse_rational
from .ratmat import LeftInverseKind, RationalMatrix, left_inverse

MAX_FILTER_ORDER = 12
K_MIN = 1e-6


@dataclass(frozen=True)
class FilterSpec:
    """``H(s) = (omega_c / (s + omega_c))^order``."""

    omega_c: float
    order: int

    def __post_init__(self):
        if not (np.isfinite(self.omega_c) and self.omega_c > 0):
            raise ValueError("cutoff must be finite and > 0")
        if int(self.order) != self.order or self.order < 1:
            raise ValueError("filter order must be a positive integer")

    def tf(self) -> RationalFunction:
        w = float(self.omega_c)
        return RationalFunction(Polynomial((w,)), Polynomial((w, 1.0))) ** int(self.order)

    def magnitude(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        return (self.omega_c / np.hypot(omega, self.omega_c)) ** self.order


def design_filter(omega_c: float, min_order: int = 1) -> FilterSpec:
    if min_order < 1:
        raise ValueError("min_order must be >= 1")
    return FilterSpec(float(omega_c), int(min_order))


@dataclass(frozen=True)
class Controller:
    """Synthesized controller.

    ``u_ff`` is the feedforward input for the design reference and
    ``reference_tf`` maps a scalar reference to that input.  ``fb_gain``
    (1 x n) maps the output difference to ``U_fb``; it is ``None`` until
    :func:`wire_feedback` is applied.
    """

    u_ff: RationalFunction
    reference_tf: RationalFunction
    reference: RationalFunction
    p_dagger: RationalMatrix
    filter: FilterSpec
    kind: LeftInverseKind
    fb_gain: RationalMatrix | None = None
    fb_filter: FilterSpec | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def n_channels(self) -> int:
        return self.p_dagger.cols


def _non_hurwitz_roots(p: Polynomial) -> np.ndarray:
    r = p.roots()
    return r[r.real >= -EPS_STAB]


def _relative_deficit(f: RationalFunction) -> int:
    return max(0, -f.relative_degree)


def synthesize_feedforward(P: RationalMatrix, Y_d, omega_c: float,
                           kind: LeftInverseKind | str = LeftInverseKind.AVERAGED,
                           min_order: int = 2) -> Controller:
    """Filtered left-inverse feedforward for an n x 1 plant and a shared reference."""
    kind = LeftInverseKind.parse(kind)
    if P.cols != 1:
        raise ValueError("feedforward synthesis expects an n x 1 plant")
    Y_d = Y_d if isinstance(Y_d, RationalFunction) else RationalFunction(Y_d)
    Pd = left_inverse(P, kind)
    inv_sum = RationalFunction()
    for j in range(P.rows):
        inv_sum = inv_sum + Pd[0, j]
    raw = inv_sum * Y_d

    order = max(int(min_order), _relative_deficit(raw))
    while True:
        if order > MAX_FILTER_ORDER:
            raise ImproperUnfixable(f"no filter order <= {MAX_FILTER_ORDER} makes the input proper")
        filt = design_filter(omega_c, order)
        H = filt.tf()
        u = H * raw
        if u.is_proper:
            break
        order += 1

    # poles of U on or right of the axis are only allowed if the reference put them there
    if not u.is_zero:
        bad = _non_hurwitz_roots(u.den)
        allowed = list(_non_hurwitz_roots(Y_d.den)) if not Y_d.is_zero else []
        for r in bad:
            hit = next((i for i, a in enumerate(allowed) if abs(a - r) <= 1e-6 * max(1.0, abs(r))), None)
            if hit is None:
                raise UnstableInverse(f"feedforward input has a pole at {r:.6g} not inherited from the reference")
            allowed.pop(hit)

    return Controller(u_ff=u, reference_tf=H * inv_sum, reference=Y_d, p_dagger=Pd, filter=filt, kind=kind)


def nominal_tracking_tf(P: RationalMatrix, ctrl: Controller) -> RationalMatrix:
    """Per-finger nominal outputs ``Y_i = P_i * U``."""
    return RationalMatrix.column([P[i, 0] * ctrl.u_ff for i in range(P.rows)])


def tracking_final_values(P: RationalMatrix, ctrl: Controller) -> np.ndarray:
    """``lim_{s->0} s Y_i(s)`` per finger (final-value theorem, after cancellation)."""
    s = RationalFunction(Polynomial((0.0, 1.0)))
    out = []
    for i in range(P.rows):
        g = s * P[i, 0] * ctrl.u_ff
        if g.den(0.0) == 0:
            raise ValueError(f"finger {i + 1} output has no finite final value")
        out.append(g(0.0))
    return np.real(np.array(out, dtype=complex))


def predicted_final_values(gains: Sequence[float], k_ratios: Sequence[float], amplitude: float) -> np.ndarray:
    """Closed-form final values under the averaged inverse.

    Channel i settles at ``A/n * sum_j (g_i k_j) / (g_j k_i)``.  This equals
    ``A`` only when every channel has the same DC ratio ``g/k``.
    """
    g = np.asarray(gains, dtype=float)
    k = np.asarray(k_ratios, dtype=float)
    ratio = g / k
    return amplitude * ratio * np.mean(1.0 / ratio)


def wire_feedback(P: RationalMatrix, ctrl: Controller, omega_c_fb: float | None = None,
                  order: int | None = None) -> Controller:
    """Attach ``fb_gain = H_fb * P_dag``, raising the filter order until every entry is proper."""
    w = ctrl.filter.omega_c if omega_c_fb is None else float(omega_c_fb)
    m = ctrl.filter.order if order is None else int(order)
    m = max(m, max(_relative_deficit(e) for e in ctrl.p_dagger.entries[0]))
    if m > MAX_FILTER_ORDER:
        raise ImproperUnfixable("feedback gain cannot be made proper")
    fb = design_filter(w, m)
    K = ctrl.p_dagger.scale(fb.tf())
    return Controller(u_ff=ctrl.u_ff, reference_tf=ctrl.reference_tf, reference=ctrl.reference,
                      p_dagger=ctrl.p_dagger, filter=ctrl.filter, kind=ctrl.kind,
                      fb_gain=K, fb_filter=fb, notes=ctrl.notes + ("feedback = H_fb * P_dag on y_meas - y_nominal",))


# -- robustness weight ----------------------------------------------------------

@dataclass(frozen=True)
class WeightFit:
    omega: np.ndarray
    samples: np.ndarray
    k: float
    z: float
    p: float

    @property
    def W_T(self) -> RationalFunction:
        return RationalFunction(Polynomial((self.k * self.z, self.k)), Polynomial((self.p, 1.0)))

    def magnitude(self, omega=None) -> np.ndarray:
        omega = self.omega if omega is None else np.asarray(omega, dtype=float)
        return self.k * np.abs((1j * omega + self.z) / (1j * omega + self.p))

    def dominates(self) -> bool:
        return bool(np.all(self.magnitude() >= self.samples))


def relative_error_samples(nominal: RationalFunction, perturbed_set: Sequence[RationalFunction],
                           omega: np.ndarray) -> np.ndarray:
    """Worst ``|P_tilde(jw) / P(jw) - 1|`` over the set, per frequency."""
    if len(perturbed_set) == 0:
        raise EmptySet("the perturbed set is empty")
    jw = 1j * omega
    den = nominal.den(jw)
    num = nominal.num(jw)
    scale = np.maximum(np.abs(nominal.den(np.abs(jw))) + 1.0, 1.0)
    if np.any(np.abs(den) <= 1e-12 * scale) or np.any(num == 0):
        raise PoleOnGrid("nominal plant has a pole or zero on the frequency grid")
    ref = freqresp(nominal, omega)
    worst = np.zeros_like(omega)
    for f in perturbed_set:
        if np.any(np.abs(f.den(jw)) <= 1e-12 * scale):
            raise PoleOnGrid("a perturbed plant has a pole on the frequency grid")
        worst = np.maximum(worst, np.abs(freqresp(f, omega) / ref - 1.0))
    return worst


def _min_gain(omega, samples, z, p, k_min):
    shape = np.abs((1j * omega + z) / (1j * omega + p))
    return max(k_min, float(np.max(samples / shape)) * (1.0 + 1e-12))


def fit_robustness_weight(nominal: RationalFunction, perturbed_set: Sequence[RationalFunction],
                          omega_grid, k_min: float = K_MIN, seed: int = 0, n_starts: int = 8) -> WeightFit:
    """First-order weight ``k (s + z) / (s + p)`` hugging the worst relative error from above.

    For fixed ``(z, p)`` the smallest admissible ``k`` is closed-form, so the
    search runs over ``(log z, log p)`` only and minimizes the log-magnitude
    area between weight and samples.
    """
    omega = np.asarray(omega_grid, dtype=float)
    if omega.ndim != 1 or len(omega) < 10:
        raise ValueError("frequency grid needs at least 10 points")
    if np.any(omega <= 0) or np.any(np.diff(omega) <= 0):
        raise ValueError("frequency grid must be positive and strictly ascending")
    samples = relative_error_samples(nominal, perturbed_set, omega)
    if np.max(samples) <= k_min:
        return WeightFit(omega, samples, k_min, 1.0, 1.0)

    lw = np.log10(omega)
    floor = np.log10(np.maximum(samples, k_min))

    def area(theta):
        z, p = np.exp(np.clip(theta, -30, 30))
        k = _min_gain(omega, samples, z, p, k_min)
        gap = np.log10(k * np.abs((1j * omega + z) / (1j * omega + p))) - floor
        return float(integrate.trapezoid(gap, lw))

    rng = np.random.default_rng(seed)
    lo, hi = np.log(omega[0]) - 2, np.log(omega[-1]) + 2
    starts = [np.array([np.log(omega[len(omega) // 2])] * 2)]
    starts += [rng.uniform(lo, hi, size=2) for _ in range(n_starts - 1)]
    best = None
    for x0 in starts:
        res = optimize.minimize(area, x0, method="Nelder-Mead", options={"xatol": 1e-8, "fatol": 1e-10})
        if best is None or res.fun < best.fun:
            best = res
    z, p = np.exp(np.clip(best.x, -30, 30))
    fit = WeightFit(omega, samples, _min_gain(omega, samples, z, p, k_min), float(z), float(p))
    assert fit.dominates(), "weight fails the envelope inequality"
    return fit


# -- manifest ---------------------------------------------------------------------

MANIFEST_HEADER = "# softsync controller manifest v1"


def write_manifest(ctrl: Controller, path) -> None:
    lines = [MANIFEST_HEADER,
             f"inverse_kind = {ctrl.kind.value}",
             f"filter.omega_c = {ctrl.filter.omega_c!r}",
             f"filter.order = {ctrl.filter.order}",
             f"n_channels = {ctrl.n_channels}",
             f"reference = {ctrl.reference.to_text()}",
             f"u_ff = {ctrl.u_ff.to_text()}",
             f"reference_tf = {ctrl.reference_tf.to_text()}"]
    for j in range(ctrl.n_channels):
        lines.append(f"p_dagger.{j + 1} = {ctrl.p_dagger[0, j].to_text()}")
    if ctrl.fb_gain is not None:
        lines.append(f"fb.omega_c = {ctrl.fb_filter.omega_c!r}")
        lines.append(f"fb.order = {ctrl.fb_filter.order}")
        for j in range(ctrl.n_channels):
            lines.append(f"fb_gain.{j + 1} = {ctrl.fb_gain[0, j].to_text()}")
    for i, note in enumerate(ctrl.notes):
        lines.append(f"note.{i + 1} = {note}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> Controller:
    text = Path(path).read_text()
    kv: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        kv[key] = value
    try:
        n = int(kv["n_channels"])
        rf = lambda key: parse_rational(kv[key], verbatim=True)
        fb_gain = fb_filter = None
        notes = []
        while f"note.{len(notes) + 1}" in kv:
            notes.append(kv[f"note.{len(notes) + 1}"])
        if "fb.order" in kv:
            fb_filter = FilterSpec(float(kv["fb.omega_c"]), int(kv["fb.order"]))
            fb_gain = RationalMatrix.row([rf(f"fb_gain.{j + 1}") for j in range(n)])
        return Controller(
            u_ff=rf("u_ff"), reference_tf=rf("reference_tf"), reference=rf("reference"),
            p_dagger=RationalMatrix.row([rf(f"p_dagger.{j + 1}") for j in range(n)]),
            filter=FilterSpec(float(kv["filter.omega_c"]), int(kv["filter.order"])),
            kind=LeftInverseKind.parse(kv["inverse_kind"]), fb_gain=fb_gain, fb_filter=fb_filter,
            notes=tuple(notes))
    except KeyError as exc:
        raise ParseError(f"{path}: missing key {exc.args[0]!r}") from None


def stability_verdict(f: RationalFunction) -> str:
    if f.is_zero or f.den.degree == 0:
        return "stable (no poles)"
    tag = classify_stability(f.den).tag
    return {Stability.HURWITZ: "stable", Stability.MARGINAL: "marginally stable",
            Stability.UNSTABLE: "unstable"}[tag]
