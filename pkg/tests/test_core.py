import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from csisense import (
    LABELS,
    ActivityLabel,
    ConstantPath,
    CsiFrame,
    CsiSegment,
    LinearPath,
    ParameterError,
    PiecewisePath,
    ScenarioParams,
    SinusoidalPath,
    make_scenario,
    simulate,
)
from csisense.core import DEFAULT_WAVELENGTH, PathTrajectory

LAM = DEFAULT_WAVELENGTH


def dense_amplitude(hs, a, d, lam):
    """Direct evaluation of |Hs + a*exp(-j*2*pi*d/lam)|, no package code involved."""
    return np.abs(hs + a * np.exp(-2j * np.pi * np.asarray(d) / lam))


def count_local_maxima(x):
    dx = np.diff(x)
    return int(np.count_nonzero((dx[:-1] > 0) & (dx[1:] <= 0)))


def test_static_only_is_exactly_static_amplitude():
    params = ScenarioParams(LinearPath(3.0, 1.0), static_amplitude=10, dynamic_attenuation=0,
                            noise_sigma=0)
    seg = simulate(params)
    assert np.all(np.abs(seg.csi) == 10.0)


@pytest.mark.parametrize("d0", [3.0, 3.0 + LAM / 4, 3.0 + LAM / 2, 3.0137])
def test_constant_path_gives_constant_amplitude_within_bounds(d0):
    params = ScenarioParams(ConstantPath(d0), noise_sigma=0)
    amp = np.abs(simulate(params).csi)
    assert np.ptp(amp) < 1e-12
    assert 7 - 1e-9 <= amp[0, 0] <= 13 + 1e-9


def test_five_wavelengths_give_five_cycles_against_dense_oracle():
    # start at the destructive extreme so the window holds 5 whole cycles
    d0 = 40.5 * LAM
    velocity = 5 * LAM / 5.0
    params = ScenarioParams(LinearPath(d0, velocity), noise_sigma=0)
    amp = np.abs(simulate(params).csi[:, 0])

    t_dense = np.linspace(0, 5.0, 200_001)
    oracle = dense_amplitude(10.0, 3.0, d0 + velocity * t_dense, LAM)
    assert count_local_maxima(oracle) == 5
    assert count_local_maxima(amp) == 5
    np.testing.assert_allclose(amp, oracle[::40][:5000], atol=1e-9)


@given(st.floats(1.0, 20.0), st.floats(0.0, 2 * math.pi), st.floats(0.0, 5.0),
       st.floats(0.5, 8.0), st.floats(-1.5, 1.5))
def test_amplitude_never_leaves_triangle_bounds(hs, phase, a, d0, v):
    params = ScenarioParams(LinearPath(d0 + 8.0, v), static_amplitude=hs, static_phase=phase,
                            dynamic_attenuation=a, noise_sigma=0)
    amp = np.abs(simulate(params, duration=1.0).csi)
    lo, hi = params.amplitude_bounds()
    assert np.all(amp >= lo - 1e-9)
    assert np.all(amp <= hi + 1e-9)


def test_simulation_is_deterministic():
    params = make_scenario(ActivityLabel.WALKING, 4)
    assert simulate(params).equals(simulate(params))


def test_noise_depends_on_seed():
    a = simulate(ScenarioParams(ConstantPath(3.0), rng_seed=1))
    b = simulate(ScenarioParams(ConstantPath(3.0), rng_seed=2))
    assert not a.equals(b)


def test_noise_has_requested_sigma():
    seg = simulate(ScenarioParams(ConstantPath(3.0), noise_sigma=0.1, rng_seed=5))
    residual = seg.csi - seg.csi.mean()
    assert residual.real.std() == pytest.approx(0.1, rel=0.03)
    assert residual.imag.std() == pytest.approx(0.1, rel=0.03)


def test_segment_shape_and_timestamps():
    seg = simulate(ScenarioParams(ConstantPath(3.0)))
    assert seg.csi.shape == (5000, 30)
    assert seg.timestamps[0] == 0.0
    assert seg.timestamps[1] == pytest.approx(0.001)


def test_no_event_seed_1_has_no_dynamic_component():
    params = make_scenario(ActivityLabel.NO_EVENT, 1)
    assert params.dynamic_attenuation == 0
    assert params.label is ActivityLabel.NO_EVENT


def test_breathing_seed_7_stays_inside_half_a_wavelength():
    params = make_scenario(ActivityLabel.BREATHING, 7)
    path = params.path_trajectory
    assert isinstance(path, SinusoidalPath)
    # peak-to-peak path change is twice the displacement amplitude
    excursion = 2 * np.pi * 2 * path.displacement_amplitude / params.wavelength
    assert excursion < 2 * np.pi
    clean = simulate(ScenarioParams(path, static_amplitude=params.static_amplitude,
                                    static_phase=params.static_phase,
                                    dynamic_attenuation=params.dynamic_attenuation,
                                    noise_sigma=0))
    lo, hi = params.amplitude_bounds()
    assert np.ptp(np.abs(clean.csi[:, 0])) < hi - lo


def test_fall_seed_3_moves_three_wavelengths_within_half_a_second():
    params = make_scenario(ActivityLabel.FALLING, 3)
    t = np.arange(5000) / 1000.0
    d = params.path_trajectory(t)
    moving = np.flatnonzero(np.diff(d) != 0)
    start, stop = t[moving[0]], t[moving[-1] + 1]
    assert stop - start <= 0.5
    assert abs(d[-1] - d[0]) >= 3 * params.wavelength


@pytest.mark.parametrize("label", LABELS)
def test_make_scenario_is_deterministic_and_labelled(label):
    a, b = make_scenario(label, 12), make_scenario(label, 12)
    assert a == b
    assert a.label is label
    assert make_scenario(label, 13) != a


def test_make_scenario_accepts_label_strings():
    assert make_scenario("walk", 2) == make_scenario(ActivityLabel.WALKING, 2)


@pytest.mark.parametrize("path", [
    ConstantPath(2.0),
    LinearPath(2.0, -0.3),
    PiecewisePath([(0.0, 2.0), (1.0, 2.5), (1.2, 2.2)]),
    SinusoidalPath(3.0, 0.01, 0.3, 0.5),
])
def test_trajectory_dict_round_trip(path):
    again = PathTrajectory.from_dict(path.to_dict())
    t = np.linspace(0, 5, 101)
    np.testing.assert_array_equal(again(t), path(t))


def test_piecewise_path_holds_outside_knots():
    path = PiecewisePath([(1.0, 2.0), (2.0, 3.0)])
    np.testing.assert_allclose(path(np.array([0.0, 1.5, 4.0])), [2.0, 2.5, 3.0])


@pytest.mark.parametrize("kwargs", [
    dict(wavelength=0.0),
    dict(wavelength=-1.0),
    dict(static_amplitude=0.0),
    dict(dynamic_attenuation=-1.0),
    dict(noise_sigma=-0.1),
])
def test_invalid_params_raise(kwargs):
    with pytest.raises(ParameterError):
        ScenarioParams(ConstantPath(3.0), **kwargs)


def test_missing_trajectory_raises():
    with pytest.raises(ParameterError):
        ScenarioParams(None)
    with pytest.raises(ParameterError):
        PiecewisePath([])


def test_nonpositive_path_length_rejected():
    with pytest.raises(ParameterError):
        simulate(ScenarioParams(LinearPath(0.1, -1.0)))


def test_segment_validates_frame_count_and_order():
    csi = np.ones((10, 2), dtype=complex)
    ts = np.arange(10) / 10
    CsiSegment(csi, ts, 10, 1.0)
    with pytest.raises(ParameterError):
        CsiSegment(csi, ts, 10, 2.0)
    with pytest.raises(ParameterError):
        CsiSegment(csi, ts[::-1], 10, 1.0)


def test_frames_round_trip():
    seg = simulate(ScenarioParams(ConstantPath(3.0)), sample_rate=20, duration=1, num_subcarriers=3)
    frames = seg.frames
    assert isinstance(frames[0], CsiFrame)
    assert CsiSegment.from_frames(frames, 20, 1).equals(seg)


def test_label_parsing():
    assert ActivityLabel.from_string("No Event") is ActivityLabel.NO_EVENT
    assert ActivityLabel.from_string("walking") is ActivityLabel.WALKING
    with pytest.raises(ParameterError):
        ActivityLabel.from_string("jump")
