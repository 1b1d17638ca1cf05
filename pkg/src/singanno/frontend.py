"""Audio ingestion: WAV reading, log-mel extraction, F0 resampling, and
parametric corruption for robustness experiments.

Mel convention: HTK mel scale, 80 area-unnormalized triangular filters
spanning 0-12 kHz, magnitude STFT with a periodic Hann window, reflect
center padding, natural log floored at 1e-5. The frame count is
ceil(num_samples / hop) so 1 s at 24 kHz gives exactly 188 frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io.wavfile

from .annotation import FrameSpec

MEL_FLOOR = 1e-5
MEL_FMAX = 12000.0


@dataclass(frozen=True)
class MelSpectrogram:
    values: np.ndarray  # [T, n_mels] log magnitudes
    spec: FrameSpec

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class F0Contour:
    values: np.ndarray  # [T] Hz; 0 encodes unvoiced
    spec: FrameSpec

    @property
    def voiced(self) -> np.ndarray:
        return self.values > 0


@dataclass(frozen=True)
class NoiseConfig:
    mel_snr_db: float = math.inf
    f0_sigma_semitones: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.f0_sigma_semitones < 0:
            raise ValueError("f0 sigma must be non-negative")


def wav_read(path: str | Path, target_rate: int = 24000) -> tuple[np.ndarray, int]:
    """Read a RIFF/WAVE file to float64 samples in [-1, 1] at target_rate.

    Stereo is averaged to mono; other rates are resampled by linear
    interpolation.
    """
    try:
        rate, data = scipy.io.wavfile.read(str(path))
    except ValueError as exc:
        raise ValueError(f"unsupported or malformed WAV file {path}: {exc}") from exc

    if data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported WAV sample format {data.dtype}")

    if samples.ndim == 2:
        samples = samples.mean(axis=1)

    if rate != target_rate:
        n_out = int(round(len(samples) * target_rate / rate))
        t_out = np.arange(n_out) * (rate / target_rate)
        samples = np.interp(t_out, np.arange(len(samples)), samples)
    return samples, target_rate


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(spec: FrameSpec, fmax: float = MEL_FMAX) -> np.ndarray:
    """[n_mels x (win//2 + 1)] triangular filters, peak weight 1."""
    n_bins = spec.win // 2 + 1
    bin_hz = np.arange(n_bins) * (spec.sample_rate / spec.win)
    bin_mel = hz_to_mel(bin_hz)
    edges = np.linspace(0.0, hz_to_mel(fmax), spec.n_mels + 2)
    fb = np.zeros((spec.n_mels, n_bins))
    for k in range(spec.n_mels):
        lo, mid, hi = edges[k], edges[k + 1], edges[k + 2]
        rising = (bin_mel - lo) / (mid - lo)
        falling = (hi - bin_mel) / (hi - mid)
        fb[k] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


def frame_count(n_samples: int, spec: FrameSpec) -> int:
    return int(math.ceil(n_samples / spec.hop))


def mel_extract(samples: np.ndarray, spec: FrameSpec | None = None) -> MelSpectrogram:
    spec = spec or FrameSpec()
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise ValueError("empty input signal")

    T = frame_count(len(samples), spec)
    half = spec.win // 2
    padded = np.pad(samples, half, mode="reflect")
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(spec.win) / spec.win)

    idx = np.arange(spec.win)[None, :] + spec.hop * np.arange(T)[:, None]
    frames = padded[idx] * window[None, :]
    mag = np.abs(np.fft.rfft(frames, axis=1))
    mel = mag @ mel_filterbank(spec).T
    values = np.log(np.maximum(mel, MEL_FLOOR))
    return MelSpectrogram(values=values, spec=spec)


def load_f0_file(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column (seconds, Hz) text file."""
    rows = np.loadtxt(str(path), ndmin=2)
    if rows.shape[1] != 2:
        raise ValueError("F0 file must have two columns: seconds, Hz")
    return rows[:, 0], rows[:, 1]


def f0_ingest(
    times: np.ndarray,
    values: np.ndarray,
    spec: FrameSpec | None = None,
    n_frames: int | None = None,
) -> F0Contour:
    """Resample an (seconds, Hz) contour onto frame centers.

    Zero-Hz points mark unvoiced stretches; frames whose bracketing input
    points are not both voiced stay 0 rather than being interpolated
    across the gap.
    """
    spec = spec or FrameSpec()
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if times.ndim != 1 or times.shape != values.shape:
        raise ValueError("times and values must be matching 1-D arrays")
    if np.any(np.diff(times) <= 0):
        raise ValueError("F0 timestamps must be strictly increasing")
    if np.any(values < 0):
        raise ValueError("F0 values must be non-negative")

    if n_frames is None:
        n_frames = frame_count(int(round(times[-1] * spec.sample_rate)), spec)
    centers = np.arange(n_frames) * spec.frame_period

    out = np.interp(centers, times, values, left=0.0, right=0.0)
    voiced = values > 0
    # kill interpolation across or beyond unvoiced input points
    left = np.clip(np.searchsorted(times, centers, side="right") - 1, 0, len(times) - 1)
    right = np.clip(left + 1, 0, len(times) - 1)
    ok = voiced[left] & voiced[right] & (centers >= times[0]) & (centers <= times[-1])
    out[~ok] = 0.0
    return F0Contour(values=out, spec=spec)


def corrupt(
    mel: MelSpectrogram, f0: F0Contour, cfg: NoiseConfig
) -> tuple[MelSpectrogram, F0Contour]:
    """Apply additive mel noise at a target SNR and multiplicative pitch
    jitter of cfg.f0_sigma_semitones to voiced frames. Deterministic for a
    fixed seed."""
    rng = np.random.default_rng(cfg.seed)

    mel_values = mel.values
    if math.isfinite(cfg.mel_snr_db):
        signal_power = float(np.mean(mel_values**2))
        noise_power = signal_power / (10.0 ** (cfg.mel_snr_db / 10.0))
        noise = rng.normal(0.0, math.sqrt(noise_power), size=mel_values.shape)
        mel_values = mel_values + noise

    f0_values = f0.values
    if cfg.f0_sigma_semitones > 0:
        eps = rng.normal(0.0, cfg.f0_sigma_semitones, size=f0_values.shape)
        jitter = np.where(f0.voiced, 2.0 ** (eps / 12.0), 1.0)
        f0_values = f0_values * jitter

    return (
        MelSpectrogram(values=mel_values, spec=mel.spec),
        F0Contour(values=f0_values, spec=f0.spec),
    )
