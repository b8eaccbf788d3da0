import math

import numpy as np
import pytest

from softsync.cli import step_reference
from softsync.errors import EmptySet, ParseError, PoleOnGrid, UnstableInverse
from softsync.plant import coefficient_channel, perturb_batch
from softsync.ratcore import Polynomial, RationalFunction, Stability, classify_stability
from softsync.ratmat import LeftInverseKind, RationalMatrix
from softsync.synth import (FilterSpec, design_filter, fit_robustness_weight, nominal_tracking_tf,
                            predicted_final_values, read_manifest, relative_error_samples, stability_verdict,
                            synthesize_feedforward, tracking_final_values, wire_feedback, write_manifest)

A = math.pi / 3
OMEGA = np.logspace(-1, 2, 60)


def test_first_order_filter():
    f = design_filter(5.0, 1)
    assert f.tf() == RationalFunction(Polynomial([5.0]), Polynomial([5.0, 1.0]))
    assert f.magnitude(5.0) == pytest.approx(1 / math.sqrt(2), rel=1e-14)
    assert f.magnitude(0.0) == 1.0


def test_filter_magnitude_bounded():
    f = design_filter(3.0, 4)
    mag = f.magnitude(np.logspace(-3, 3, 200))
    assert np.all(mag <= 1.0) and np.all(np.diff(mag) <= 0)


def test_filter_rejects_bad_arguments():
    with pytest.raises(ValueError):
        FilterSpec(0.0, 1)
    with pytest.raises(ValueError):
        FilterSpec(5.0, 0)


def test_two_finger_feedforward(two_finger):
    ctrl = synthesize_feedforward(two_finger.plant(), step_reference(A), 5.0)
    assert ctrl.filter.order == 2
    # R = (pi/3)(2 s^2 + 5.11 s + 6.67) / 15.662, U = (5/(s+5))^2 R
    R = RationalFunction(Polynomial([6.67, 5.11, 2.0]) * (A / 15.662))
    expect = design_filter(5.0, 2).tf() * R
    for s0 in (0.3 + 0.4j, 2.0 + 1.0j, 7.0j):
        assert abs(ctrl.u_ff(s0) - expect(s0)) <= 1e-12 * abs(expect(s0))
    assert ctrl.u_ff.is_proper
    assert classify_stability(ctrl.u_ff.den).tag is Stability.HURWITZ
    assert stability_verdict(ctrl.u_ff) == "stable"


@pytest.mark.parametrize("fixture,denom", [("two_finger", 15.662), ("three_finger", 23.493)])
def test_averaged_inverse_entries(request, fixture, denom):
    model = request.getfixturevalue(fixture)
    ctrl = synthesize_feedforward(model.plant(), step_reference(A), 5.0)
    for j, c in enumerate(model.nominal):
        expect = Polynomial([0.0, c.k_ratio, c.c_ratio, 1.0]) * (1.0 / denom)
        got = ctrl.p_dagger[0, j]
        assert got.den == Polynomial([1.0])
        assert np.allclose(got.num.coeffs, expect.coeffs, rtol=1e-12, atol=0)


def test_scalar_plant_needs_first_order_filter():
    P = RationalMatrix([[RationalFunction(Polynomial([1.0]), Polynomial([1.0, 1.0]))]])
    ctrl = synthesize_feedforward(P, step_reference(1.0), 5.0, min_order=1)
    assert ctrl.filter.order == 1
    expect = design_filter(5.0, 1).tf() * RationalFunction(Polynomial([1.0, 1.0]), Polynomial([0.0, 1.0]))
    assert abs(ctrl.u_ff(1.3j) - expect(1.3j)) < 1e-14


def test_zero_reference_gives_zero_input(two_finger):
    assert synthesize_feedforward(two_finger.plant(), RationalFunction(), 5.0).u_ff.is_zero


def test_nonminimum_phase_channel_is_rejected():
    # (1 - s)/(s+1)^2: inverting puts a pole at s = +1 that no step reference can cancel
    P = RationalMatrix([[RationalFunction(Polynomial([1.0, -1.0]), Polynomial([1.0, 2.0, 1.0]))]])
    with pytest.raises(UnstableInverse):
        synthesize_feedforward(P, step_reference(1.0), 5.0)


def test_identical_channels_track_filtered_reference():
    ch = coefficient_channel(7.831, 2.66, 3.61)
    P = RationalMatrix.column([ch, ch])
    ctrl = synthesize_feedforward(P, step_reference(A), 5.0)
    Y = nominal_tracking_tf(P, ctrl)
    target = ctrl.filter.tf() * step_reference(A)
    for i in range(2):
        assert abs(Y[i, 0](0.7 + 0.2j) - target(0.7 + 0.2j)) < 1e-12
    assert np.allclose(tracking_final_values(P, ctrl), [A, A], rtol=1e-12)


def test_final_values_follow_dc_ratios(two_finger):
    """Channels with different g/k settle at A * ratio_i * mean(1/ratio), not at A."""
    P = two_finger.plant()
    ctrl = synthesize_feedforward(P, step_reference(A), 5.0)
    got = tracking_final_values(P, ctrl)
    pred = predicted_final_values([7.831, 7.831], [3.61, 3.06], A)
    assert np.allclose(got, pred, rtol=1e-12)
    # hand values: A * mean(k) / k_i with mean(k) = 3.335
    assert got == pytest.approx([A * 3.335 / 3.61, A * 3.335 / 3.06], rel=1e-12)
    assert got == pytest.approx([0.967425, 1.141308], abs=1e-6)


def test_averaged_identity_holds_for_synthesized(two_finger, three_finger):
    for model in (two_finger, three_finger):
        P = model.plant()
        ctrl = synthesize_feedforward(P, step_reference(A), 5.0)
        for s0 in (0.5 + 0.5j, 3.0j, 1.7):
            assert abs((ctrl.p_dagger.evaluate(s0) @ P.evaluate(s0))[0, 0] - 1.0) < 1e-12


def test_gram_kind_also_synthesizes(two_finger):
    ctrl = synthesize_feedforward(two_finger.plant(), step_reference(A), 5.0, LeftInverseKind.GRAM)
    assert ctrl.u_ff.is_proper
    assert classify_stability(ctrl.u_ff.den).tag is Stability.HURWITZ


def test_wire_feedback_makes_gain_proper(two_finger_ctrl):
    ctrl = two_finger_ctrl
    assert ctrl.fb_filter.order == 3
    assert ctrl.fb_filter.omega_c == 5.0
    assert all(e.is_proper for e in ctrl.fb_gain.entries[0])
    # K P = H_fb on the nominal plant
    P_val = np.array([[coefficient_channel(7.831, 2.66, 3.61)(1j)], [coefficient_channel(7.831, 2.45, 3.06)(1j)]])
    assert (ctrl.fb_gain.evaluate(1j) @ P_val)[0, 0] == pytest.approx(ctrl.fb_filter.tf()(1j), rel=1e-12)


def test_manifest_roundtrip_is_bit_exact(two_finger_ctrl, tmp_path):
    path = tmp_path / "controller.txt"
    write_manifest(two_finger_ctrl, path)
    back = read_manifest(path)
    assert back.u_ff == two_finger_ctrl.u_ff
    assert back.p_dagger == two_finger_ctrl.p_dagger
    assert back.fb_gain == two_finger_ctrl.fb_gain
    assert back.filter == two_finger_ctrl.filter and back.fb_filter == two_finger_ctrl.fb_filter
    assert back.notes == two_finger_ctrl.notes
    write_manifest(back, tmp_path / "again.txt")
    assert (tmp_path / "again.txt").read_bytes() == path.read_bytes()
    kv = dict(line.split(" = ", 1) for line in path.read_text().splitlines() if " = " in line)
    assert kv["filter.order"] == "2" and kv["inverse_kind"] == "averaged"
    lead = float(kv["p_dagger.1"].split("*")[0].lstrip("("))
    assert lead == pytest.approx(1 / 15.662, rel=1e-12)


def test_manifest_missing_key(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("inverse_kind = averaged\n")
    with pytest.raises(ParseError):
        read_manifest(p)


def test_weight_fit_degenerate_floor():
    ch = coefficient_channel(7.831, 2.66, 3.61)
    fit = fit_robustness_weight(ch, [ch], OMEGA)
    assert np.all(fit.samples < 1e-15)
    assert fit.k == 1e-6


def test_weight_fit_pure_gain():
    ch = coefficient_channel(7.831, 2.66, 3.61)
    fit = fit_robustness_weight(ch, [coefficient_channel(7.831 * 1.1, 2.66, 3.61)], OMEGA)
    assert np.allclose(fit.samples, 0.1, rtol=1e-10)
    assert fit.k * fit.z / fit.p >= 0.1 * (1 - 1e-12)
    assert fit.dominates()


def test_weight_fit_bounded_envelope(two_finger):
    nominal = two_finger.channels[0]
    corner = coefficient_channel(7.831, 2.66 * 1.143, 3.61 * 1.059)
    fit = fit_robustness_weight(nominal, [corner], OMEGA)
    assert fit.dominates()
    assert np.isfinite(fit.k) and fit.z > 0 and fit.p > 0
    assert np.all(np.isfinite(fit.magnitude(np.logspace(-1, 2, 500))))


def test_weight_fit_monte_carlo(two_finger):
    draws = perturb_batch(two_finger, 0, 200)
    fit = fit_robustness_weight(two_finger.channels[1], [d.channels[1] for d in draws], OMEGA)
    assert fit.dominates()
    assert fit.samples.max() < 1.0


def test_weight_fit_errors():
    ch = coefficient_channel(7.831, 2.66, 3.61)
    with pytest.raises(EmptySet):
        relative_error_samples(ch, [], OMEGA)
    osc = RationalFunction(Polynomial([1.0]), Polynomial([1.0, 0.0, 1.0]))  # poles at +-j
    grid = np.linspace(0.5, 1.5, 11)
    with pytest.raises(PoleOnGrid):
        relative_error_samples(osc, [osc], grid)
