import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import linalg, optimize

from softsync.errors import ConfigError, ImproperTransferFunction
from softsync.plant import GripperModel, check_minimal, coefficient_channel
from softsync.ratcore import Polynomial, RationalFunction
from softsync.sim import (DisturbanceSpec, Metrics, ScenarioSpec, SimTrace, StateSpace, calibrate_disturbance,
                          disturbance_comparison, discretize_zoh, noise_comparison, noise_seeds, realize,
                          realize_simo, run_scenario, settling_times)
from softsync.synth import synthesize_feedforward, wire_feedback
from softsync.cli import step_reference

from .conftest import TWO_FINGER
from .oracles import two_finger_response, zoh_by_quadrature, zoh_scalar

A = math.pi / 3


def rf(num, den):
    return RationalFunction(Polynomial(num), Polynomial(den))


def test_realize_first_order():
    ss = realize(rf([1.0], [1.0, 1.0]))
    assert np.array_equal(ss.A, [[-1.0]]) and np.array_equal(ss.B, [[1.0]])
    assert np.array_equal(ss.C, [[1.0]]) and np.array_equal(ss.D, [[0.0]])


def test_realize_channel_eigenvalues():
    ss = realize(coefficient_channel(7.831, 2.66, 3.61))
    assert ss.n_states == 3
    eig = np.sort_complex(np.linalg.eigvals(ss.A))
    expect = np.sort_complex(np.concatenate([[0.0], np.roots([1.0, 2.66, 3.61])]))
    assert np.allclose(eig, expect, atol=1e-12)


def test_realize_biproper():
    ss = realize(rf([2.0, 1.0], [1.0, 1.0]))
    assert ss.D[0, 0] == 1.0


def test_realize_improper_raises():
    with pytest.raises(ImproperTransferFunction):
        realize(rf([0.0, 0.0, 1.0], [1.0, 1.0]))


def test_realize_matches_tf_at_random_points():
    rng = np.random.default_rng(5)
    for _ in range(20):
        deg = int(rng.integers(1, 6))
        den = Polynomial.from_roots(-rng.uniform(0.2, 4.0, size=deg))
        num = Polynomial(rng.normal(size=int(rng.integers(1, deg + 2))))
        f = RationalFunction(num, den)
        ss = realize(f)
        for s0 in rng.normal(size=8) + 1j * rng.normal(size=8):
            assert abs(ss.freqresp(s0)[0, 0] - f(s0)) <= 1e-9 * max(1.0, abs(f(s0)))


def test_realize_simo_is_minimal(two_finger):
    ss = realize_simo(two_finger.channels)
    assert ss.n_states == 5
    assert check_minimal(ss.A, ss.B, ss.C) == (True, True)
    for s0 in (0.4 + 1.0j, 2.0 + 0.1j):
        for i, ch in enumerate(two_finger.channels):
            assert abs(ss.freqresp(s0)[i, 0] - ch(s0)) <= 1e-12 * abs(ch(s0))


@pytest.mark.parametrize("a,b", [(-1.0, 1.0), (0.0, 1.0), (-3.7, 0.5), (2.0, -1.0)])
def test_zoh_scalar_closed_form(a, b):
    d = discretize_zoh(StateSpace([[a]], [[b]], [[1.0]], [[0.0]]), 0.1)
    ad, bd = zoh_scalar(a, b, 0.1)
    assert abs(d.A[0, 0] - ad) <= 1e-10 and abs(d.B[0, 0] - bd) <= 1e-10
    assert d.Ts == 0.1


def test_zoh_examples():
    d = discretize_zoh(StateSpace([[-1.0]], [[1.0]], [[1.0]], [[0.0]]), 0.1)
    assert d.A[0, 0] == pytest.approx(0.904837418, abs=1e-9)
    assert d.B[0, 0] == pytest.approx(0.095162582, abs=1e-9)
    tiny = discretize_zoh(StateSpace([[-1.0, 2.0], [0.0, -3.0]], [[1.0], [1.0]], np.eye(2), [[0.0], [0.0]]), 1e-9)
    assert np.allclose(tiny.A, np.eye(2), atol=1e-8)


def test_zoh_random_stable_matrices():
    rng = np.random.default_rng(17)
    for _ in range(25):
        n = int(rng.integers(1, 5))
        M = rng.normal(size=(n, n))
        A = M - (np.max(np.linalg.eigvals(M).real) + rng.uniform(0.1, 2.0)) * np.eye(n)
        B = rng.normal(size=(n, 1))
        d = discretize_zoh(StateSpace(A, B, np.eye(n), np.zeros((n, 1))), 0.1)
        Ad, Bd = zoh_by_quadrature(A, B, 0.1)
        assert np.max(np.abs(d.A - linalg.expm(0.1 * A))) <= 1e-10
        assert np.max(np.abs(d.B - Bd)) <= 1e-10


def _spec(model, **kw):
    return ScenarioSpec(model=model, amplitude=A, duration=5.0, Ts=0.1, **kw)


def test_trace_matches_continuous_oracle(two_finger, two_finger_ctrl):
    trace, _ = run_scenario(_spec(two_finger), two_finger_ctrl)
    ref = two_finger_response(trace.t)
    assert np.max(np.abs(trace.y - ref)) <= 0.005 * A


def test_final_values_follow_dc_ratios(two_finger, two_finger_ctrl):
    _, m = run_scenario(_spec(two_finger), two_finger_ctrl)
    assert m.final_error == pytest.approx((0.967425 - A, 1.141308 - A), abs=2e-3)


def test_identical_channels_synchronize():
    model = GripperModel.from_triples([TWO_FINGER[0], TWO_FINGER[0]])
    P = model.plant()
    ctrl = synthesize_feedforward(P, step_reference(A), 5.0)
    trace, m = run_scenario(_spec(model), ctrl)
    assert m.sync_error < 1e-9
    assert abs(trace.y[-1, 0] - A) < 1e-3
    # exact inversion leaves Y = (5/(s+5))^2 A/s, whose 2 % entry solves (1 + 5t) e^{-5t} = 0.02
    exact = optimize.brentq(lambda t: (1 + 5 * t) * math.exp(-5 * t) - 0.02, 0.5, 2.0)
    assert m.settling_time == pytest.approx((exact, exact), abs=0.01)


def test_zero_reference_stays_zero(two_finger):
    P = two_finger.plant()
    ctrl = wire_feedback(P, synthesize_feedforward(P, step_reference(0.0), 5.0))
    trace, _ = run_scenario(replace(_spec(two_finger), amplitude=0.0, feedback_enabled=True), ctrl)
    assert not np.any(trace.table()[:, 1:])


def test_reruns_are_bit_identical(two_finger, two_finger_ctrl):
    spec = _spec(two_finger, noise_sigma=0.0349, noise_seed=3, feedback_enabled=True)
    a, _ = run_scenario(spec, two_finger_ctrl)
    b, _ = run_scenario(spec, two_finger_ctrl)
    assert a.table().tobytes() == b.table().tobytes()


def test_noise_only_touches_measurements(two_finger, two_finger_ctrl):
    clean, _ = run_scenario(_spec(two_finger), two_finger_ctrl)
    noisy, _ = run_scenario(_spec(two_finger, noise_sigma=0.0349, noise_seed=1), two_finger_ctrl)
    assert np.array_equal(clean.y, noisy.y)
    resid = noisy.y_meas - noisy.y
    assert 0.025 < np.std(resid) < 0.045


def test_no_feedback_correction_without_model_error(two_finger, two_finger_ctrl):
    trace, _ = run_scenario(_spec(two_finger, feedback_enabled=True), two_finger_ctrl)
    assert np.max(np.abs(trace.u_fb)) < 1e-12


def test_uniform_gain_error_is_compensated(two_finger, two_finger_ctrl):
    true = GripperModel.from_triples([(7.831 * 1.1, c, k) for _, c, k in TWO_FINGER])
    spec = replace(_spec(two_finger, true_model=true, feedback_enabled=True), duration=10.0)
    ff_only, _ = run_scenario(_spec(two_finger), two_finger_ctrl)
    trace, _ = run_scenario(spec, two_finger_ctrl)
    assert np.max(np.abs(trace.y[-1] - ff_only.y[-1])) < 1e-3


def test_single_channel_gain_error_leaves_residual(two_finger, two_finger_ctrl):
    """A gain change on one finger only is outside the plant image: feedback cannot cancel it."""
    true = GripperModel.from_triples([(7.831 * 1.1, 2.66, 3.61), TWO_FINGER[1]])
    spec = replace(_spec(two_finger, true_model=true, feedback_enabled=True), duration=10.0)
    ff_only, _ = run_scenario(_spec(two_finger), two_finger_ctrl)
    trace, _ = run_scenario(spec, two_finger_ctrl)
    resid = trace.y[-1] - ff_only.y[-1]
    assert np.all(np.abs(resid) > 0.03)
    assert resid[0] * resid[1] < 0


def test_settling_band_monotonic(two_finger, two_finger_ctrl):
    trace, _ = run_scenario(_spec(two_finger), two_finger_ctrl)
    tight = settling_times(trace.t, trace.y, A, 0.0, 0.02)
    loose = settling_times(trace.t, trace.y, A, 0.0, 0.05)
    assert np.all(loose <= tight)


def test_settling_time_interpolates():
    t = 0.1 * np.arange(11)
    y = np.where(t < 0.45, 0.0, 1.0)[:, None]
    y[4, 0] = 0.5  # crosses the 2 % band between t = 0.4 and 0.5
    st = settling_times(t, y, 1.0, 0.0, 0.02)
    assert 0.4 < st[0] < 0.5


def test_unsettled_reports_inf():
    t = 0.1 * np.arange(11)
    y = np.where(np.arange(11) % 2 == 0, 1.0, 0.0)[:, None]
    assert math.isinf(settling_times(t, y, 1.0, 0.0, 0.02)[0])


def test_trace_csv_layout(two_finger, two_finger_ctrl, tmp_path):
    trace, m = run_scenario(_spec(two_finger), two_finger_ctrl)
    trace.write_csv(tmp_path / "t.csv")
    header, data = SimTrace.read_csv(tmp_path / "t.csv")
    assert header == ["t", "ref", "y1", "y2", "ymeas1", "ymeas2", "u_ff", "u_fb", "u_c", "d1", "d2"]
    assert len(header) == 5 + 3 * 2
    assert data.shape == (51, 11)
    assert np.allclose(np.diff(data[:, 0]), 0.1)
    m.write(tmp_path / "m.txt")
    back = Metrics.read(tmp_path / "m.txt")
    assert back["sync_error"] == pytest.approx(m.sync_error, rel=1e-8)
    assert back["settle_band"] == 0.02


@pytest.mark.parametrize("kw", [dict(duration=0.5), dict(Ts=0.0), dict(ref_start=0.05),
                                dict(disturbance=DisturbanceSpec(3, 1.0, 0.5, 0.1)),
                                dict(disturbance=DisturbanceSpec(1, 4.8, 0.5, 0.1))])
def test_invalid_scenarios(two_finger, kw):
    base = dict(model=two_finger, amplitude=A, duration=5.0, Ts=0.1)
    base.update(kw)
    with pytest.raises(ConfigError):
        ScenarioSpec(**base).validate()


def test_zero_amplitude_disturbance(two_finger, two_finger_ctrl):
    spec = _spec(two_finger, disturbance=DisturbanceSpec(1, 1.4, 0.5, 0.0))
    dc = disturbance_comparison(spec, two_finger_ctrl)
    assert dc.peak_ff < 1e-6 and dc.peak_fb < 1e-6


@pytest.mark.parametrize("kind", ["output", "force"])
def test_disturbance_hits_target_finger_hardest(two_finger, two_finger_ctrl, kind):
    spec = _spec(two_finger, disturbance=DisturbanceSpec(1, 1.4, 0.5, 0.2, kind))
    dc = disturbance_comparison(spec, two_finger_ctrl)
    assert dc.peaks_ff[1] < dc.peaks_ff[0]


def test_calibration_hits_target_peak(two_finger, two_finger_ctrl):
    spec = replace(_spec(two_finger, disturbance=DisturbanceSpec(1, 1.4, 0.5, 1.0)), duration=12.0)
    amp = calibrate_disturbance(spec, two_finger_ctrl, 0.4)
    dc = disturbance_comparison(replace(spec, disturbance=replace(spec.disturbance, amplitude=amp)),
                                two_finger_ctrl)
    assert dc.peak_ff == pytest.approx(0.4, rel=1e-9)


def test_noise_free_comparison_is_small():
    model = GripperModel.from_triples([TWO_FINGER[0]] * 2)
    P = model.plant()
    ctrl = wire_feedback(P, synthesize_feedforward(P, step_reference(A), 5.0))
    nc = noise_comparison(_spec(model), ctrl, 2)
    assert nc.rmse_ff_only < math.radians(0.1) and nc.rmse_ff_fb < math.radians(0.1)


def test_noise_seeds_deterministic():
    assert noise_seeds(7, 5) == noise_seeds(7, 5)
    assert len(set(noise_seeds(7, 50))) == 50
    assert all(0 <= s < 2 ** 63 for s in noise_seeds(7, 50))


def test_speed_limit_counted_not_clipped(two_finger, two_finger_ctrl):
    free, m_free = run_scenario(_spec(two_finger), two_finger_ctrl)
    tight, m = run_scenario(replace(_spec(two_finger), speed_limit=0.1), two_finger_ctrl)
    assert m_free.speed_limit_exceedances == int(np.sum(np.abs(free.u_c) > 5.0))
    assert m.speed_limit_exceedances == int(np.sum(np.abs(tight.u_c) > 0.1)) > m_free.speed_limit_exceedances
    assert np.array_equal(free.u_c, tight.u_c)
