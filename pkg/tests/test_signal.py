import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from he2coherence.rotor import MoleculeConstants
from he2coherence.signal import (
    BeatComponent,
    LDTrace,
    MissingPeakError,
    ResolutionError,
    SamplingError,
    VibrationalBranch,
    analytic_envelope,
    fourier_spectrum,
    line_amplitude,
    line_components,
    peak_ratio,
    scan_amplitudes,
    sliding_window_amplitude,
    synthesize_ld,
    uniform_grid,
)

CONST = MoleculeConstants()


def test_unit_cosine_gives_unit_peak():
    t = uniform_grid(400.0, 0.05)
    tr = synthesize_ld([BeatComponent(2.27, 1.0)], np.inf, t)
    spec = fourier_spectrum(tr)
    top = max(spec.peaks, key=lambda p: p.amplitude)
    assert top.frequency_thz == pytest.approx(2.27, abs=1e-4)
    assert top.amplitude == pytest.approx(1.0, rel=2e-3)
    assert spec.resolution_thz == pytest.approx(1 / 400.0)


@given(st.floats(0.5, 8.0), st.floats(0.1, 3.0))
@settings(max_examples=40, deadline=None)
def test_peak_within_resolution(freq, amp):
    t = uniform_grid(300.0, 0.05)
    spec = fourier_spectrum(synthesize_ld([BeatComponent(freq, amp)], np.inf, t))
    top = max(spec.peaks, key=lambda p: p.amplitude)
    assert abs(top.frequency_thz - freq) <= spec.resolution_thz


def test_line_amplitude_equals_projection():
    t = uniform_grid(200.0, 0.05)
    tr = synthesize_ld([BeatComponent(2.27, 0.7), BeatComponent(4.08, 0.2)], np.inf, t)
    assert line_amplitude(tr, 2.27) == pytest.approx(0.7, rel=1e-3)
    assert line_amplitude(tr, 4.08) == pytest.approx(0.2, rel=1e-3)


def test_nyquist_violation_rejected():
    with pytest.raises(SamplingError):
        synthesize_ld([BeatComponent(2.27, 1.0)], 1.0, uniform_grid(10.0, 0.25))


def test_short_trace_rejected_for_target():
    tr = synthesize_ld([BeatComponent(2.27, 1.0)], 1.0, uniform_grid(0.5, 0.05))
    with pytest.raises(ResolutionError):
        fourier_spectrum(tr, targets={"LD13": 2.27})


def test_noise_needs_generator_and_is_reproducible():
    t = uniform_grid(50.0, 0.05)
    comps = [BeatComponent(2.27, 1.0)]
    with pytest.raises(ValueError):
        synthesize_ld(comps, 1.0, t, noise_sigma=0.1)
    a = synthesize_ld(comps, 1.0, t, 0.1, np.random.default_rng(7)).values
    b = synthesize_ld(comps, 1.0, t, 0.1, np.random.default_rng(7)).values
    assert np.array_equal(a, b)


def test_empty_components_rejected():
    with pytest.raises(ValueError):
        synthesize_ld([], 1.0, uniform_grid(10.0, 0.05))


@pytest.mark.parametrize(
    "times",
    [[0.0, 1.0, 1.5], [0.0, 0.0, 1.0], [0.0]],
)
def test_bad_time_grids_rejected(times):
    with pytest.raises(ValueError):
        LDTrace(times, np.zeros(len(times)))


def test_13_and_35_lines_located():
    comps = line_components(CONST, 1) + line_components(CONST, 3, scale=0.05)
    tr = synthesize_ld(comps, 1.0, uniform_grid(400.0, 0.05))
    spec = fourier_spectrum(tr, targets={"LD13": 2.27, "LD35": 4.08})
    assert abs(spec.peak("LD13").frequency_thz - 2.27) <= spec.resolution_thz
    assert abs(spec.peak("LD35").frequency_thz - 4.08) <= spec.resolution_thz
    assert peak_ratio(spec, "LD35", "LD13") < 0.2


def test_vibrational_branches_resolved():
    branches = [VibrationalBranch(v, 1.0) for v in (0, 1, 2)]
    tr = synthesize_ld(line_components(CONST, 1, branches=branches), 1.0, uniform_grid(400.0, 0.05))
    targets = {f"v{v}": CONST.line_thz(1, v) for v in (0, 1, 2)}
    spec = fourier_spectrum(tr, targets=targets)
    amps = [spec.peak(k).amplitude for k in targets]
    assert max(amps) / min(amps) < 1.2


def test_missing_peak_reported():
    tr = synthesize_ld([BeatComponent(2.27, 1.0)], 1.0, uniform_grid(200.0, 0.05))
    spec = fourier_spectrum(tr, targets={"LD13": 2.27, "LD35": 4.08})
    with pytest.raises(MissingPeakError):
        peak_ratio(spec, "LD35", "LD13")


def test_default_weights_put_the_beat_minimum_near_500_ps():
    comps = line_components(CONST, 1, weights=[0.13, 0.10, 0.31, 1.0, 0.68])
    t = np.linspace(0.0, 1000.0, 10001)
    env = analytic_envelope(comps, 1.0, t)
    first_min = t[np.argmax((env[1:-1] < env[:-2]) & (env[1:-1] <= env[2:])) + 1]
    assert 450.0 <= first_min <= 550.0
    assert env[t == first_min][0] < 0.05 * env[0]


def test_sliding_window_tracks_analytic_envelope():
    comps = line_components(CONST, 1, weights=[0.13, 0.10, 0.31, 1.0, 0.68])
    starts = np.arange(0.0, 1600.0, 25.0)
    centres, amps = scan_amplitudes(comps, 1.0, starts, CONST.line_thz(1), 20.0, 0.02)
    env = analytic_envelope(comps, 1.0, centres)
    assert np.max(np.abs(amps - env)) / np.max(env) < 0.03


def test_sliding_window_too_short():
    tr = synthesize_ld([BeatComponent(2.27, 1.0)], 1.0, uniform_grid(50.0, 0.02))
    with pytest.raises(ResolutionError):
        sliding_window_amplitude(tr, 2.27, window_length=2.0)


def test_branch_weights_validated():
    with pytest.raises(ValueError):
        line_components(CONST, 1, branches=[VibrationalBranch(0, -1.0), VibrationalBranch(1, 2.0)])


@given(st.floats(-5.0, 5.0).filter(lambda a: abs(a) > 1e-3))
@settings(max_examples=25, deadline=None)
def test_synthesis_is_linear(alpha):
    comps = line_components(CONST, 1)
    scaled = [BeatComponent(c.frequency_thz, alpha * c.amplitude, c.label) for c in comps]
    t = uniform_grid(50.0, 0.05)
    a = synthesize_ld(comps, 1.0, t).values
    b = synthesize_ld(scaled, 1.0, t).values
    assert np.allclose(b, alpha * a, rtol=1e-12, atol=1e-14)


def test_sliding_window_of_single_tone_is_exponential():
    tau = 0.8
    tr = synthesize_ld([BeatComponent(2.27, 1.0)], tau, uniform_grid(1600.0, 0.02))
    centres, amps = sliding_window_amplitude(tr, 2.27, 20.0)
    slope = np.polyfit(centres, np.log(amps), 1)[0]
    assert -1e-3 / slope == pytest.approx(tau, rel=0.01)


def test_spectrum_frequencies_non_negative():
    tr = synthesize_ld(line_components(CONST, 1), 1.0, uniform_grid(200.0, 0.05))
    spec = fourier_spectrum(tr)
    assert spec.frequencies[0] == 0.0 and np.all(np.diff(spec.frequencies) > 0)
    assert all(p.frequency_thz >= 0 for p in spec.peaks)
    # real input: mirror half of the full transform is the complex conjugate
    X = np.fft.fft(tr.values)
    assert np.allclose(X[1:], np.conj(X[1:][::-1]))
