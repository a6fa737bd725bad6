"""Control fields: analytic tone pulses, sampled envelopes, and their spectra."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .spin import TwoQubitAnalytic, rabi_sync_ratio

DEFAULT_DT = 0.01  # ns; propagation step used throughout


def blackman_ramp(x: np.ndarray) -> np.ndarray:
    """Rising half of a Blackman window on x in [0, 1] (0 -> 0, 1 -> 1)."""
    x = np.clip(x, 0.0, 1.0)
    # the coefficients cancel only up to round-off at x = 0
    return np.clip(0.42 - 0.5 * np.cos(np.pi * x) + 0.08 * np.cos(2 * np.pi * x), 0.0, 1.0)


def flattop_envelope(t: np.ndarray, duration: float, rise_time: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if rise_time <= 0:
        return np.where((t >= 0) & (t <= duration), 1.0, 0.0)
    return blackman_ramp(t / rise_time) * blackman_ramp((duration - t) / rise_time)


@dataclass(frozen=True)
class Tone:
    amplitude: float
    frequency: float
    phase: float = 0.0


@dataclass(frozen=True)
class TonePulse:
    """Sum of cosine tones, optionally under a flattop envelope."""

    tones: tuple[Tone, ...]
    duration: float
    rise_time: float | None = None

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if any(t.amplitude < 0 for t in self.tones):
            raise ValueError("tone amplitudes must be non-negative")
        object.__setattr__(self, "tones", tuple(self.tones))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any((t < -1e-12) | (t > self.duration + 1e-12)):
            raise ValueError("t outside [0, duration]")
        value = np.zeros_like(t)
        for tone in self.tones:
            value = value + tone.amplitude * np.cos(tone.frequency * t + tone.phase)
        if self.rise_time:
            value = value * flattop_envelope(t, self.duration, self.rise_time)
        return value

    def sample(self, dt: float = DEFAULT_DT) -> "SampledPulse":
        n = _n_steps(self.duration, dt)
        return SampledPulse(self(np.arange(n + 1) * dt), dt)


def _n_steps(duration: float, dt: float) -> int:
    n = int(round(duration / dt))
    if n < 1 or abs(n * dt - duration) > 1e-9 * max(1.0, duration):
        raise ValueError(f"dt={dt} does not divide duration={duration}")
    return n


@dataclass(frozen=True, eq=False)
class SampledPulse:
    """Real control amplitude sampled at t_n = n*dt, n = 0..N (both ends included).

    Propagation holds ``samples[n]`` constant on [t_n, t_{n+1}); the last sample
    only fixes the value at t = duration.
    """

    samples: np.ndarray
    dt: float = DEFAULT_DT

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).copy()
        if s.ndim != 1 or len(s) < 2:
            raise ValueError("need a 1-D array of at least two samples")
        if not np.all(np.isfinite(s)):
            raise ValueError("pulse samples must be finite")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n_steps(self) -> int:
        return len(self.samples) - 1

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.dt

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any((t < -1e-12) | (t > self.duration + 1e-12)):
            raise ValueError("t outside [0, duration]")
        return np.interp(t, self.times, self.samples)

    def with_samples(self, samples: np.ndarray) -> "SampledPulse":
        return SampledPulse(samples, self.dt)

    def to_csv(self, path: str | Path, header_lines: Sequence[str] = ()) -> None:
        write_columns(path, ["t_ns", "amplitude"], [self.times, self.samples], header_lines)

    @classmethod
    def from_csv(cls, path: str | Path) -> "SampledPulse":
        cols = read_columns(path)
        t, u = cols["t_ns"], cols["amplitude"]
        dt = float(np.mean(np.diff(t)))
        if np.max(np.abs(np.diff(t) - dt)) > 1e-9:
            raise ValueError("pulse CSV must be uniformly sampled")
        return cls(u, dt)


def flattop(duration: float, amplitude: float, rise_time: float, dt: float = DEFAULT_DT) -> SampledPulse:
    """Constant ``amplitude`` with Blackman-shaped switch-on and switch-off."""
    if not 0 < 2 * rise_time <= duration:
        raise ValueError("need 0 < 2*rise_time <= duration")
    n = _n_steps(duration, dt)
    t = np.arange(n + 1) * dt
    return SampledPulse(amplitude * flattop_envelope(t, duration, rise_time), dt)


def synchronize_rabi(pulse: TonePulse, analytic: TwoQubitAnalytic) -> TonePulse:
    """Rescale the first tone so both NOT-gate transitions share one Rabi rate.

    The second tone's amplitude is kept; tones are taken as (w_RF1, w_RF2).
    """
    if len(pulse.tones) != 2:
        raise ValueError("Rabi synchronization needs exactly two tones")
    t1, t2 = pulse.tones
    t1 = replace(t1, amplitude=abs(rabi_sync_ratio(analytic)) * t2.amplitude)
    return replace(pulse, tones=(t1, t2))


def effective_rabi_rates(pulse: TonePulse, analytic: TwoQubitAnalytic) -> tuple[float, float]:
    t1, t2 = pulse.tones
    return abs(t1.amplitude * analytic.factor1), abs(t2.amplitude * analytic.factor2)


def not_gate_time(pulse: TonePulse, analytic: TwoQubitAnalytic) -> float:
    """pi / (common effective rate); uses the second transition's rate."""
    return float(np.pi / effective_rabi_rates(pulse, analytic)[1])


# --- spectra ---------------------------------------------------------------


@dataclass(frozen=True)
class Peak:
    center: float
    height: float
    fwhm: float | None


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    frequencies: np.ndarray  # rad/ns, one-sided
    magnitudes: np.ndarray
    peaks: list[Peak] = field(default_factory=list)
    resolution: float = 0.0  # 2*pi/duration, the unpadded bin width
    bin_width: float = 0.0  # padded grid spacing

    def to_csv(self, path: str | Path, header_lines: Sequence[str] = ()) -> None:
        write_columns(path, ["omega_rad_per_ns", "magnitude"], [self.frequencies, self.magnitudes], header_lines)


def fourier_magnitude(pulse: SampledPulse, pad: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """One-sided |U(w)| with U(f) = dt * sum_n u_n exp(-2 pi i f t_n)."""
    u = pulse.samples
    m = pad * len(u)
    spec = np.fft.rfft(u, n=m) * pulse.dt
    omega = 2 * np.pi * np.fft.rfftfreq(m, d=pulse.dt)
    return omega, np.abs(spec)


def spectrum(
    pulse: SampledPulse,
    peak_centers: Sequence[float] = (),
    pad: int = 8,
    search_bins: int = 20,
) -> SpectrumReport:
    """Magnitude spectrum plus height and FWHM of the peak nearest each center.

    ``search_bins`` is counted in unpadded bins (2*pi/duration) and bounds
    both the peak search and the half-height crossing search.
    """
    omega, mag = fourier_magnitude(pulse, pad)
    nyquist = np.pi / pulse.dt
    resolution = 2 * np.pi / (len(pulse.samples) * pulse.dt)
    d_omega = omega[1] - omega[0]
    window = search_bins * pad
    peaks = []
    for c in peak_centers:
        if not 0 <= c <= nyquist:
            raise ValueError(f"peak center {c} outside [0, {nyquist}]")
        if mag.max() == 0:
            continue
        k0 = int(round(c / d_omega))
        k = _nearest_local_max(mag, k0, window)
        if k is None:
            continue
        peaks.append(Peak(center=float(omega[k]), height=float(mag[k]), fwhm=_fwhm(omega, mag, k, window)))
    return SpectrumReport(omega, mag, peaks, resolution, d_omega)


def _nearest_local_max(mag: np.ndarray, k0: int, window: int) -> int | None:
    lo, hi = max(1, k0 - window), min(len(mag) - 2, k0 + window)
    best = None
    for k in range(lo, hi + 1):
        if mag[k] >= mag[k - 1] and mag[k] >= mag[k + 1] and mag[k] > 0:
            if best is None or abs(k - k0) < abs(best - k0):
                best = k
    return best


def _fwhm(omega: np.ndarray, mag: np.ndarray, k: int, window: int) -> float | None:
    half = mag[k] / 2
    left = right = None
    for j in range(k, max(k - window, 0), -1):
        if mag[j - 1] < half <= mag[j]:
            left = omega[j - 1] + (half - mag[j - 1]) / (mag[j] - mag[j - 1]) * (omega[j] - omega[j - 1])
            break
    for j in range(k, min(k + window, len(mag) - 1)):
        if mag[j + 1] < half <= mag[j]:
            right = omega[j] + (mag[j] - half) / (mag[j] - mag[j + 1]) * (omega[j + 1] - omega[j])
            break
    if left is None or right is None:
        return None
    return float(right - left)


def prominent_peaks(
    report: SpectrumReport,
    rel_height: float = 0.1,
    band: tuple[float, float] | None = None,
    min_separation: float = 0.0,
) -> np.ndarray:
    """Centers of local maxima above ``rel_height`` of the largest one in ``band``.

    Maxima closer than ``min_separation`` (rad/ns) are merged into the tallest
    one, which suppresses the sinc sidelobes of a finite-length pulse.
    """
    from scipy.signal import find_peaks

    omega, mag = report.frequencies, report.magnitudes
    mask = np.ones_like(omega, dtype=bool) if band is None else (omega >= band[0]) & (omega <= band[1])
    if not mask.any() or mag[mask].max() == 0:
        return np.array([])
    step = omega[1] - omega[0]
    distance = max(1, int(np.ceil(min_separation / step)))
    idx, _ = find_peaks(np.where(mask, mag, 0.0), height=rel_height * mag[mask].max(), distance=distance)
    return omega[idx]


# --- CSV helpers ------------------------------------------------------------


def write_columns(path, names: Sequence[str], columns: Sequence[np.ndarray], header_lines: Sequence[str] = ()) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in zip(*columns):
            writer.writerow([repr(float(v)) for v in row])
    tmp.replace(path)


def read_columns(path) -> dict[str, np.ndarray]:
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    names = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return {n: data[:, i] for i, n in enumerate(names)}
