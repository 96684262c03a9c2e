"""Signal utilities: SNR mixing, framing, MFCC features and an autocorrelation f0 tracker."""

from __future__ import annotations

import csv
import math
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.fft import dct, rfft, irfft

ENERGY_FLOOR = -20.0


@dataclass(frozen=True)
class Signal:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("signal must be one-dimensional")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("signal contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class FeatureConfig:
    """Analysis parameters shared by feature extraction and the baseline tracker."""

    sample_rate: int = 16000
    frame_ms: float = 25.0
    hop_ms: float = 5.0
    n_fft: Optional[int] = None  # next power of two >= frame length when None
    n_mels: int = 26
    n_mfcc: int = 13
    f0_min: float = 50.0
    f0_max: float = 500.0
    voicing_threshold: float = 0.5
    energy_floor: float = ENERGY_FLOOR

    @property
    def frame_length(self) -> int:
        return int(round(self.sample_rate * self.frame_ms / 1000.0))

    @property
    def hop_length(self) -> int:
        return int(round(self.sample_rate * self.hop_ms / 1000.0))

    @property
    def fft_size(self) -> int:
        if self.n_fft is not None:
            return self.n_fft
        return 1 << (self.frame_length - 1).bit_length()

    @property
    def feature_dim(self) -> int:
        return 2 + self.n_mfcc

    def validate(self) -> None:
        if self.frame_length < 1 or self.hop_length < 1:
            raise ValueError("frame and hop must be at least one sample")
        if self.hop_length > self.frame_length:
            raise ValueError("hop must not exceed frame length")
        if self.fft_size < self.frame_length:
            raise ValueError("FFT size smaller than frame length")
        if self.n_mels < self.n_mfcc:
            raise ValueError("need at least as many mel filters as cepstral coefficients")
        if not 0 < self.f0_min < self.f0_max < self.sample_rate / 2:
            raise ValueError("invalid f0 search range")


def mix_at_snr(clean: Signal, noise: Signal, target_snr_db: float) -> Signal:
    """Return ``clean + g * noise`` with ``g`` set so the mix has exactly ``target_snr_db``.

    Both powers are measured over the clean signal's duration; extra noise samples are ignored.
    """
    if clean.sample_rate != noise.sample_rate:
        raise ValueError(f"sample rate mismatch: {clean.sample_rate} != {noise.sample_rate}")
    if len(noise) < len(clean):
        raise ValueError("noise is shorter than the clean signal")
    d = noise.samples[: len(clean)]
    p_clean = np.mean(clean.samples**2)
    p_noise = np.mean(d**2)
    if p_clean <= 0.0:
        raise ValueError("clean signal has zero power")
    if p_noise <= 0.0:
        raise ValueError("noise has zero power")
    gain = math.sqrt(p_clean / (p_noise * 10.0 ** (target_snr_db / 10.0)))
    return Signal(clean.samples + gain * d, clean.sample_rate)


def measured_snr_db(clean: np.ndarray, mixed: np.ndarray) -> float:
    noise = mixed - clean
    return 10.0 * math.log10(np.mean(clean**2) / np.mean(noise**2))


def num_frames(n_samples: int, cfg: FeatureConfig) -> int:
    if n_samples < cfg.frame_length:
        return 0
    return (n_samples - cfg.frame_length) // cfg.hop_length + 1


def frame_signal(samples: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Stack frames as rows, no padding; the last partial frame is dropped."""
    n = num_frames(samples.size, cfg)
    idx = np.arange(cfg.frame_length)[None, :] + cfg.hop_length * np.arange(n)[:, None]
    return samples[idx]


def _check_input(signal: Signal, cfg: FeatureConfig) -> None:
    cfg.validate()
    if len(signal) == 0:
        raise ValueError("empty signal")
    if signal.sample_rate != cfg.sample_rate:
        raise ValueError(f"signal is {signal.sample_rate} Hz, config expects {cfg.sample_rate} Hz")
    if len(signal) < cfg.frame_length:
        raise ValueError("signal shorter than one analysis frame")


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filter_centers(cfg: FeatureConfig) -> np.ndarray:
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(cfg.sample_rate / 2.0), cfg.n_mels + 2))
    return edges[1:-1]


def mel_filterbank(cfg: FeatureConfig) -> np.ndarray:
    """Triangular HTK-mel filters spanning 0..Nyquist, shape (n_mels, n_fft // 2 + 1)."""
    n_bins = cfg.fft_size // 2 + 1
    freqs = np.linspace(0.0, cfg.sample_rate / 2.0, n_bins)
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(cfg.sample_rate / 2.0), cfg.n_mels + 2))
    fb = np.zeros((cfg.n_mels, n_bins))
    for m in range(cfg.n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (freqs - lo) / (mid - lo)
        falling = (hi - freqs) / (hi - mid)
        fb[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


def log_mel_energies(signal: Signal, cfg: FeatureConfig) -> np.ndarray:
    frames = frame_signal(signal.samples, cfg) * np.hanning(cfg.frame_length)
    power = np.abs(rfft(frames, n=cfg.fft_size, axis=1)) ** 2
    mel = power @ mel_filterbank(cfg).T
    return np.log(np.maximum(mel, math.exp(cfg.energy_floor)))


def frame_energy(signal: Signal, cfg: FeatureConfig) -> np.ndarray:
    frames = frame_signal(signal.samples, cfg) * np.hanning(cfg.frame_length)
    energy = np.sum(frames**2, axis=1)
    with np.errstate(divide="ignore"):
        return np.maximum(np.log(energy), cfg.energy_floor)


def baseline_f0(signal: Signal, cfg: FeatureConfig = FeatureConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Normalized-autocorrelation pitch tracker.

    Returns per-frame ``(f0_hz, voiced)``. A frame is voiced when its peak normalized
    autocorrelation over the lags of ``[f0_min, f0_max]`` exceeds ``voicing_threshold``
    and its log energy is above the floor. Among local maxima within 10% of the peak, the
    shortest lag wins, which suppresses most sub-octave picks.
    """
    _check_input(signal, cfg)
    frames = frame_signal(signal.samples, cfg)
    frames = frames - frames.mean(axis=1, keepdims=True)
    n = cfg.frame_length
    lag_lo = max(1, int(math.floor(cfg.sample_rate / cfg.f0_max)))
    lag_hi = min(n - 1, int(math.ceil(cfg.sample_rate / cfg.f0_min)))
    lags = np.arange(lag_lo, lag_hi + 1)

    nfft = 1 << (2 * n - 1).bit_length()
    spec = rfft(frames, n=nfft, axis=1)
    acf = irfft(np.abs(spec) ** 2, n=nfft, axis=1)[:, lags]
    sq = np.concatenate([np.zeros((frames.shape[0], 1)), np.cumsum(frames**2, axis=1)], axis=1)
    head = sq[:, n - lags]  # sum of x[0 : n-k]^2
    tail = sq[:, n : n + 1] - sq[:, lags]  # sum of x[k : n]^2
    denom = np.sqrt(head * tail)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(denom > 1e-12, acf / denom, 0.0)

    peak = r.max(axis=1)
    padded = np.pad(r, ((0, 0), (1, 1)), constant_values=-np.inf)
    local_max = (r >= padded[:, :-2]) & (r >= padded[:, 2:])
    candidates = local_max & (r >= 0.9 * peak[:, None])
    best = lags[np.argmax(candidates, axis=1)]
    energy = frame_energy(signal, cfg)
    voiced = (peak > cfg.voicing_threshold) & (energy > cfg.energy_floor)
    f0 = np.where(voiced, cfg.sample_rate / best, 0.0)
    return f0, voiced


def extract_features(
    signal: Signal,
    truth: Optional[Sequence[float]] = None,
    cfg: FeatureConfig = FeatureConfig(),
) -> np.ndarray:
    """Per-frame feature matrix ``[log_f0, energy, mfcc_0 .. mfcc_{C-1}]``.

    ``truth`` is a per-frame f0 track in Hz (0 for unvoiced). Without it, f0 comes from
    :func:`baseline_f0`, which is how noisy inputs are built.
    """
    _check_input(signal, cfg)
    n = num_frames(len(signal), cfg)
    if truth is None:
        f0, _ = baseline_f0(signal, cfg)
    else:
        f0 = np.asarray(truth, dtype=np.float64)
        if f0.shape != (n,):
            raise ValueError(f"truth track has {f0.size} frames, signal has {n}")
    log_f0 = np.zeros(n)
    voiced = f0 > 0
    log_f0[voiced] = np.log(f0[voiced])
    mfcc = dct(log_mel_energies(signal, cfg), type=2, norm="ortho", axis=1)[:, : cfg.n_mfcc]
    return np.column_stack([log_f0, frame_energy(signal, cfg), mfcc])


def read_wav(path) -> Signal:
    with wave.open(str(path), "rb") as fh:
        if fh.getnchannels() != 1 or fh.getsampwidth() != 2:
            raise ValueError(f"{path}: expected mono 16-bit PCM")
        rate = fh.getframerate()
        raw = fh.readframes(fh.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2").astype(np.float64)
    return Signal(pcm / 32768.0, rate)


def write_wav(path, signal: Signal) -> None:
    pcm = np.clip(np.round(signal.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(signal.sample_rate)
        fh.writeframes(pcm.tobytes())


def write_features_csv(path, features: np.ndarray) -> None:
    n_mfcc = features.shape[1] - 2
    header = ["frame_index", "log_f0", "energy"] + [f"mfcc_{i}" for i in range(n_mfcc)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, row in enumerate(features):
            writer.writerow([i] + [repr(float(v)) for v in row])


def read_features_csv(path) -> np.ndarray:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1:]
