"""Forward model of the LD beat signal and its Fourier analysis.

LD(t) = sum_k c_k cos(2 pi nu_k t) exp(-t / tau), times in ps, frequencies in THz.
Amplitudes are relative: the absolute LD normalization is not modeled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .finestructure import line_pairs
from .rotor import MoleculeConstants


class SamplingError(ValueError):
    """Time grid cannot represent the requested frequencies."""


class ResolutionError(ValueError):
    """Trace or window too short for the requested spectral line."""


class MissingPeakError(LookupError):
    pass


@dataclass(frozen=True)
class BeatComponent:
    frequency_thz: float
    amplitude: float
    label: str = ""


@dataclass(frozen=True)
class VibrationalBranch:
    v: int
    weight: float


@dataclass(frozen=True)
class SpectralPeak:
    frequency_thz: float
    amplitude: float
    label: str = ""


@dataclass
class LDTrace:
    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if len(self.times) < 2:
            raise ValueError("trace needs at least two samples")
        steps = np.diff(self.times)
        if np.any(steps <= 0):
            raise ValueError("time grid must be strictly increasing")
        if np.max(np.abs(steps - steps[0])) > 1e-6 * steps[0]:
            raise ValueError("time grid must be uniform")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("trace contains non-finite values")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def duration(self) -> float:
        return float(len(self.times) * self.dt)


@dataclass
class Spectrum:
    frequencies: np.ndarray
    amplitudes: np.ndarray
    peaks: list[SpectralPeak]
    resolution_thz: float

    def peak(self, label: str) -> SpectralPeak:
        for p in self.peaks:
            if p.label == label:
                return p
        raise MissingPeakError(f"no peak labelled {label!r}")


def normalize_branches(branches: Sequence[VibrationalBranch]) -> list[VibrationalBranch]:
    total = sum(b.weight for b in branches)
    if total <= 0 or any(b.weight < 0 for b in branches):
        raise ValueError("branch weights must be non-negative with a positive sum")
    return [VibrationalBranch(b.v, b.weight / total) for b in branches]


def line_components(
    constants: MoleculeConstants,
    N1: int = 1,
    weights: Sequence[float] | None = None,
    branches: Sequence[VibrationalBranch] = (VibrationalBranch(0, 1.0),),
    scale: float = 1.0,
) -> list[BeatComponent]:
    """Fine-structure beat components of the (N1, N1+2) line for each vibrational branch.

    Spin constants are taken as v-independent.
    """
    comps = []
    for br in normalize_branches(branches):
        for p in line_pairs(N1, constants, br.v, weights):
            comps.append(
                BeatComponent(
                    p.beat_thz,
                    scale * br.weight * p.weight,
                    f"LD{N1}{N1 + 2}_v{br.v}_J{p.J1}{p.J2}",
                )
            )
    return comps


def uniform_grid(t_end: float, dt: float, t_start: float = 0.0) -> np.ndarray:
    n = int(round((t_end - t_start) / dt))
    return t_start + dt * np.arange(n)


def synthesize_ld(
    components: Sequence[BeatComponent],
    tau_ns: float,
    times: np.ndarray,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> LDTrace:
    """Sum of decaying cosines, optionally with additive white noise."""
    if not components:
        raise ValueError("no beat components")
    if not tau_ns > 0:
        raise ValueError("tau must be positive (use np.inf for no decay)")
    times = np.asarray(times, dtype=float)
    dt = times[1] - times[0]
    f_max = max(abs(c.frequency_thz) for c in components)
    if f_max * 2.0 * dt >= 1.0:
        raise SamplingError(f"dt={dt} ps cannot sample {f_max} THz (Nyquist {0.5 / dt:.3f} THz)")
    nu = np.array([c.frequency_thz for c in components])
    amp = np.array([c.amplitude for c in components])
    values = np.cos(2 * np.pi * np.outer(times, nu)) @ amp
    values = values * np.exp(-times / (tau_ns * 1e3))
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("noise injection needs an explicit random generator")
        values = values + rng.normal(0.0, noise_sigma, size=values.shape)
    meta = {"tau_ns": tau_ns, "n_components": len(components), "noise_sigma": noise_sigma}
    return LDTrace(times, values, meta)


def analytic_envelope(components: Sequence[BeatComponent], tau_ns: float, times) -> np.ndarray:
    """|sum_k c_k exp(2 pi i nu_k t)| exp(-t/tau)."""
    times = np.asarray(times, dtype=float)
    nu = np.array([c.frequency_thz for c in components])
    amp = np.array([c.amplitude for c in components])
    phasor = np.exp(2j * np.pi * np.outer(times, nu - nu.mean())) @ amp
    return np.abs(phasor) * np.exp(-times / (tau_ns * 1e3))


def _taper(n: int, window: str) -> np.ndarray:
    if window in (None, "none"):
        return np.ones(n)
    if window == "hann":
        return np.hanning(n)
    raise ValueError(f"unknown window {window!r}")


def fourier_spectrum(
    trace: LDTrace,
    window: str = "hann",
    zero_pad: int = 4,
    targets: dict[str, float] | None = None,
    min_frequency: float | None = None,
    threshold: float = 0.05,
    match_tol: float | None = None,
) -> Spectrum:
    """Single-sided amplitude spectrum with peak extraction.

    A cosine of amplitude a produces a peak of height ~a.  Peak positions are
    refined by parabolic interpolation of the zero-padded magnitude.  When
    ``targets`` maps labels to expected frequencies, the nearest peak within
    ``match_tol`` (default: two resolution bins) gets that label.
    """
    if zero_pad < 1:
        raise ValueError("zero_pad must be >= 1")
    n = len(trace.values)
    resolution = 1.0 / trace.duration
    lowest = min_frequency
    if targets:
        lowest = min(targets.values()) if lowest is None else min(lowest, *targets.values())
    if lowest is not None and trace.duration < 2.0 / lowest:
        raise ResolutionError(
            f"trace spans {trace.duration:.3g} ps, fewer than two periods of {lowest} THz"
        )
    w = _taper(n, window)
    X = np.fft.rfft((trace.values - np.mean(trace.values)) * w, n=zero_pad * n)
    freqs = np.fft.rfftfreq(zero_pad * n, d=trace.dt)
    mag = 2.0 * np.abs(X) / np.sum(w)

    peaks = []
    floor = threshold * mag.max() if mag.size else 0.0
    idx = np.where((mag[1:-1] > mag[:-2]) & (mag[1:-1] >= mag[2:]) & (mag[1:-1] > floor))[0] + 1
    df = freqs[1] - freqs[0]
    for i in idx:
        a, b, c = mag[i - 1], mag[i], mag[i + 1]
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
        peaks.append(SpectralPeak(float(freqs[i] + shift * df), float(b - 0.25 * (a - c) * shift)))

    if targets:
        tol = 2.0 * resolution if match_tol is None else match_tol
        labelled = list(peaks)
        for label, f0 in targets.items():
            cands = [k for k, p in enumerate(labelled) if abs(p.frequency_thz - f0) <= tol and not p.label]
            if cands:
                k = min(cands, key=lambda k: abs(labelled[k].frequency_thz - f0))
                p = labelled[k]
                labelled[k] = SpectralPeak(p.frequency_thz, p.amplitude, label)
        peaks = labelled
    return Spectrum(freqs, mag, peaks, resolution)


def line_amplitude(trace: LDTrace, frequency_thz: float, window: str = "hann") -> float:
    """Fourier amplitude of the whole trace projected on one frequency."""
    w = _taper(len(trace.values), window)
    x = trace.values - np.mean(trace.values)
    ph = np.exp(-2j * np.pi * frequency_thz * (trace.times - trace.times[0]))
    return float(2.0 * np.abs(np.sum(w * x * ph)) / np.sum(w))


def sliding_window_amplitude(
    trace: LDTrace,
    target_frequency: float,
    window_length: float = 20.0,
    starts: np.ndarray | None = None,
    window: str = "hann",
    min_periods: float = 10.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude of the target line within [t, t + window_length] for each coarse t.

    Returns (window centres, amplitudes).  The amplitude of a window is the
    projection on ``target_frequency``, so it represents the envelope at the
    window centre.
    """
    if window_length * target_frequency < min_periods:
        raise ResolutionError(
            f"{window_length} ps holds fewer than {min_periods} periods of {target_frequency} THz"
        )
    t = trace.times
    if starts is None:
        starts = np.arange(t[0], t[-1] - window_length + 0.5 * trace.dt, window_length)
    centres, amps = [], []
    for s in np.asarray(starts, dtype=float):
        sel = (t >= s - 1e-9) & (t < s + window_length - 1e-9)
        if sel.sum() < 4:
            raise ResolutionError(f"window at {s} ps has too few samples")
        sub = LDTrace(t[sel], trace.values[sel])
        centres.append(s + 0.5 * (sub.times[-1] - sub.times[0]))
        amps.append(line_amplitude(sub, target_frequency, window))
    return np.array(centres), np.array(amps)


def fine_scans(
    components: Sequence[BeatComponent],
    tau_ns: float,
    starts: np.ndarray,
    window_length: float = 20.0,
    dt: float = 0.02,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> LDTrace:
    """Concatenated fine scans [t, t + window_length) at each coarse start t.

    The result is a single uniform trace only when the windows tile without
    gaps; ``scan_amplitudes`` handles the windows one at a time instead.
    """
    grid = np.concatenate([s + uniform_grid(window_length, dt) for s in starts])
    return synthesize_ld(components, tau_ns, grid, noise_sigma, rng)


def scan_amplitudes(
    components: Sequence[BeatComponent],
    tau_ns: float,
    starts: np.ndarray,
    target_frequency: float,
    window_length: float = 20.0,
    dt: float = 0.02,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate the coarse/fine delay-scan procedure: one short scan per coarse delay."""
    centres, amps = [], []
    for s in np.asarray(starts, dtype=float):
        tr = synthesize_ld(components, tau_ns, s + uniform_grid(window_length, dt), noise_sigma, rng)
        c, a = sliding_window_amplitude(tr, target_frequency, window_length, starts=[s])
        centres.append(c[0])
        amps.append(a[0])
    return np.array(centres), np.array(amps)


def peak_ratio(spectrum: Spectrum | Sequence[SpectralPeak], numerator: str, denominator: str) -> float:
    peaks = spectrum.peaks if isinstance(spectrum, Spectrum) else list(spectrum)
    lookup = {p.label: p for p in peaks if p.label}
    missing = [lab for lab in (numerator, denominator) if lab not in lookup]
    if missing:
        raise MissingPeakError(f"missing peak(s): {', '.join(missing)}")
    den = lookup[denominator].amplitude
    if den <= 0:
        raise MissingPeakError(f"peak {denominator!r} has zero amplitude")
    return lookup[numerator].amplitude / den
