"""Synthetic speech-like corpus with exact f0 ground truth, seeded noise and dataset splits."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .dsp import FeatureConfig, Signal, extract_features, mix_at_snr, num_frames, read_wav, write_features_csv, write_wav, read_features_csv

logger = logging.getLogger(__name__)

DEFAULT_SNR_LEVELS = (-10.0, -5.0, 0.0, 5.0, 10.0)
MASK64 = (1 << 64) - 1
CLEAN_RMS = 0.05
# Recording noise floor of the clean speech, dB relative to CLEAN_RMS. Digital-zero silence
# would pin silent frames to the feature floor and dominate the MFCC error.
BACKGROUND_DB = -45.0


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, *keys) -> int:
    """Fold ``keys`` into ``master_seed`` with splitmix64 steps.

    Strings are folded byte by byte, numbers through their ``repr``, so the result is
    stable across processes and Python versions (no ``hash()``).
    """
    state = splitmix64(master_seed & MASK64)
    for key in keys:
        for byte in repr(key).encode():
            state = splitmix64(state ^ byte)
        state = splitmix64(state ^ 0xFF)
    return state >> 1  # keep it inside int64 for numpy


def white_noise(length: int, seed: int, sample_rate: int = 16000) -> Signal:
    """Zero-mean Gaussian noise rescaled to exactly unit power."""
    if length <= 0:
        raise ValueError("noise length must be positive")
    x = np.random.default_rng(seed).standard_normal(length)
    return Signal(x / math.sqrt(np.mean(x**2)), sample_rate)


@dataclass(frozen=True)
class Segment:
    """One stretch of an utterance plan.

    ``kind`` is ``voiced``, ``noise`` (unvoiced fricative-like burst) or ``silence``.
    Voiced segments glide linearly from ``f0_start`` to ``f0_end``.
    """

    kind: str
    duration: float
    f0_start: float = 0.0
    f0_end: float = 0.0


@dataclass(frozen=True)
class UtteranceSpec:
    segments: tuple[Segment, ...]
    formants: Optional[tuple[tuple[float, float], ...]] = None  # (center Hz, bandwidth Hz)
    excitation: str = "sawtooth"

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)


@dataclass
class Utterance:
    id: str
    clean: Signal
    truth_f0: np.ndarray
    noisy_variants: dict[float, Signal] = field(default_factory=dict)

    @property
    def voiced(self) -> np.ndarray:
        return self.truth_f0 > 0


def random_spec(rng: np.random.Generator, min_duration: float = 2.0, max_duration: float = 4.0,
                f0_lo: float = 80.0, f0_hi: float = 260.0) -> UtteranceSpec:
    """Draw an alternating voiced/unvoiced plan around a per-utterance base pitch."""
    total = rng.uniform(min_duration, max_duration)
    base = rng.uniform(f0_lo, f0_hi)
    segments = [Segment("silence", rng.uniform(0.05, 0.2))]
    elapsed = segments[0].duration
    while elapsed < total - 0.1:
        dur = min(rng.uniform(0.15, 0.6), total - elapsed)
        start = base * rng.uniform(0.85, 1.15)
        end = base * rng.uniform(0.85, 1.15)
        segments.append(Segment("voiced", dur, start, end))
        elapsed += dur
        base = 0.95 * base + 0.05 * rng.uniform(f0_lo, f0_hi)
        if elapsed >= total - 0.1:
            break
        gap = min(rng.uniform(0.04, 0.2), total - elapsed)
        segments.append(Segment("noise" if rng.random() < 0.6 else "silence", gap))
        elapsed += gap
    segments.append(Segment("silence", rng.uniform(0.05, 0.15)))
    centers = np.sort(rng.uniform(300.0, 3500.0, size=3))
    bandwidths = rng.uniform(60.0, 200.0, size=3)
    return UtteranceSpec(tuple(segments), tuple(zip(centers.tolist(), bandwidths.tolist())))


def _resonator(x: np.ndarray, center: float, bandwidth: float, sample_rate: int) -> np.ndarray:
    r = math.exp(-math.pi * bandwidth / sample_rate)
    theta = 2.0 * math.pi * center / sample_rate
    a = [1.0, -2.0 * r * math.cos(theta), r * r]
    return lfilter([1.0 - r], a, x)


def synthesize_utterance(spec: UtteranceSpec, seed: int, utt_id: str = "utt",
                         cfg: FeatureConfig = FeatureConfig(),
                         background_db: Optional[float] = BACKGROUND_DB) -> Utterance:
    """Render ``spec`` to audio and record the generating f0 per analysis frame.

    Frame ``i`` takes the contour value at its center sample; a frame is voiced when its
    center falls inside a voiced segment. ``background_db=None`` leaves silence digitally zero.
    """
    if spec.duration <= 0:
        raise ValueError("utterance spec has zero duration")
    sr = cfg.sample_rate
    rng = np.random.default_rng(seed)
    bounds = [round(sum(s.duration for s in spec.segments[:i]) * sr) for i in range(len(spec.segments) + 1)]
    n = bounds[-1]
    contour = np.zeros(n)
    excitation = np.zeros(n)
    fricative = np.zeros(n)
    for seg, lo, hi in zip(spec.segments, bounds[:-1], bounds[1:]):
        if hi <= lo:
            continue
        if seg.kind == "voiced":
            for f in (seg.f0_start, seg.f0_end):
                if not cfg.f0_min <= f <= cfg.f0_max:
                    raise ValueError(f"f0 {f} Hz outside [{cfg.f0_min}, {cfg.f0_max}]")
            f0 = np.linspace(seg.f0_start, seg.f0_end, hi - lo)
            contour[lo:hi] = f0
            phase = np.cumsum(f0) / sr + rng.uniform()
            if spec.excitation == "impulse":
                excitation[lo:hi] = np.diff(np.floor(phase), prepend=np.floor(phase[0])) * 4.0
            else:
                excitation[lo:hi] = 2.0 * (phase - np.floor(phase)) - 1.0
            ramp = min(hi - lo, int(0.01 * sr))
            env = np.ones(hi - lo)
            env[:ramp] = np.linspace(0.0, 1.0, ramp)
            env[hi - lo - ramp:] = np.minimum(env[hi - lo - ramp:], np.linspace(1.0, 0.0, ramp))
            excitation[lo:hi] *= env
        elif seg.kind == "noise":
            # bypasses the formant resonators; narrow resonances would make the burst periodic
            burst = np.diff(rng.standard_normal(hi - lo + 1)) * 0.4
            fricative[lo:hi] = burst * np.hanning(hi - lo)
        elif seg.kind != "silence":
            raise ValueError(f"unknown segment kind {seg.kind!r}")

    formants = spec.formants or ((700.0, 100.0), (1200.0, 120.0), (2600.0, 160.0))
    audio = sum(_resonator(excitation, c, b, sr) for c, b in formants) + fricative
    rms = math.sqrt(np.mean(audio**2)) if np.any(audio) else 0.0
    if rms > 0:
        audio = audio * (CLEAN_RMS / rms)
    if background_db is not None:
        audio = audio + rng.standard_normal(n) * CLEAN_RMS * 10.0 ** (background_db / 20.0)
    clean = quantize(Signal(audio, sr))

    centers = np.arange(num_frames(n, cfg)) * cfg.hop_length + cfg.frame_length // 2
    truth = contour[centers]
    return Utterance(utt_id, clean, truth)


def quantize(signal: Signal) -> Signal:
    """Round to the 16-bit PCM grid so in-memory audio equals what the WAV file holds."""
    pcm = np.clip(np.round(signal.samples * 32768.0), -32768, 32767)
    return Signal(pcm / 32768.0, signal.sample_rate)


def format_level(level: float) -> str:
    return str(int(level)) if float(level).is_integer() else repr(float(level))


@dataclass
class CorpusConfig:
    n_train: int = 80
    n_val: int = 15
    n_test: int = 10
    snr_levels: tuple[float, ...] = DEFAULT_SNR_LEVELS
    min_duration: float = 2.0
    max_duration: float = 4.0
    master_seed: int = 0

    @classmethod
    def full_scale(cls, master_seed: int = 0) -> "CorpusConfig":
        return cls(n_train=800, n_val=150, n_test=50, master_seed=master_seed)


@dataclass
class Dataset:
    root: Path
    train: list[str]
    validation: list[str]
    test: list[str]
    snr_levels: list[float]
    features: FeatureConfig = field(default_factory=FeatureConfig)

    def utt_dir(self, utt_id: str) -> Path:
        return self.root / utt_id

    def clean_features(self, utt_id: str) -> np.ndarray:
        return read_features_csv(self.utt_dir(utt_id) / "clean_features.csv")

    def noisy_features(self, utt_id: str, level: float) -> np.ndarray:
        return read_features_csv(self.utt_dir(utt_id) / f"snr_{format_level(level)}_features.csv")

    def noisy_signal(self, utt_id: str, level: float) -> Signal:
        return read_wav(self.utt_dir(utt_id) / f"snr_{format_level(level)}.wav")

    def truth(self, utt_id: str) -> tuple[np.ndarray, np.ndarray]:
        data = np.loadtxt(self.utt_dir(utt_id) / "truth_f0.csv", delimiter=",", skiprows=1, ndmin=2)
        return data[:, 1], data[:, 2].astype(bool)

    @classmethod
    def load(cls, root) -> "Dataset":
        root = Path(root)
        meta = json.loads((root / "dataset.json").read_text())
        return cls(root, meta["splits"]["train"], meta["splits"]["validation"], meta["splits"]["test"],
                   [float(v) for v in meta["snr_levels"]], FeatureConfig(**meta["feature_config"]))


def _write_truth(path: Path, truth: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame_index", "f0_hz", "voiced"])
        for i, f in enumerate(truth):
            writer.writerow([i, repr(float(f)), int(f > 0)])


def build_dataset(root, cfg: CorpusConfig = CorpusConfig(), features: FeatureConfig = FeatureConfig()) -> Dataset:
    """Synthesize, mix, extract and persist the whole corpus under ``root``.

    Utterance ``k`` is synthesized from ``derive_seed(master, "utt", k)``; the noise for
    utterance ``k`` at level ``s`` from ``derive_seed(master, "noise", k, s)``, so each
    level gets its own realization.
    """
    counts = (cfg.n_train, cfg.n_val, cfg.n_test)
    if min(counts) <= 0:
        raise ValueError("split sizes must be positive")
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    total = sum(counts)
    width = max(4, len(str(total - 1)))
    ids = [f"utt{k:0{width}d}" for k in range(total)]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate utterance ids")

    seeds = {}
    for k, utt_id in enumerate(ids):
        utt_seed = derive_seed(cfg.master_seed, "utt", k)
        rng = np.random.default_rng(utt_seed)
        spec = random_spec(rng, cfg.min_duration, cfg.max_duration)
        utt = synthesize_utterance(spec, utt_seed, utt_id, features)
        d = root / utt_id
        d.mkdir(exist_ok=True)
        write_wav(d / "clean.wav", utt.clean)
        _write_truth(d / "truth_f0.csv", utt.truth_f0)
        write_features_csv(d / "clean_features.csv", extract_features(utt.clean, utt.truth_f0, features))
        seeds[utt_id] = {"utterance": utt_seed, "noise": {}}
        for level in cfg.snr_levels:
            noise_seed = derive_seed(cfg.master_seed, "noise", k, float(level))
            noise = white_noise(len(utt.clean), noise_seed, features.sample_rate)
            noisy = quantize(mix_at_snr(utt.clean, noise, level))
            tag = format_level(level)
            write_wav(d / f"snr_{tag}.wav", noisy)
            write_features_csv(d / f"snr_{tag}_features.csv", extract_features(noisy, None, features))
            seeds[utt_id]["noise"][tag] = noise_seed
        logger.debug("synthesized %s (%.2f s)", utt_id, utt.clean.duration)

    # Shuffle before splitting so test utterances are a random subset.
    order = np.random.default_rng(derive_seed(cfg.master_seed, "split")).permutation(total)
    shuffled = [ids[i] for i in order]
    train = sorted(shuffled[: cfg.n_train])
    val = sorted(shuffled[cfg.n_train : cfg.n_train + cfg.n_val])
    test = sorted(shuffled[cfg.n_train + cfg.n_val :])
    meta = {
        "format": "f0lstm-corpus",
        "version": 1,
        "master_seed": cfg.master_seed,
        "corpus_config": {**asdict(cfg), "snr_levels": [float(v) for v in cfg.snr_levels]},
        "feature_config": asdict(features),
        "snr_levels": [float(v) for v in cfg.snr_levels],
        "splits": {"train": train, "validation": val, "test": test},
        "seeds": seeds,
    }
    (root / "dataset.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return Dataset(root, train, val, test, [float(v) for v in cfg.snr_levels], features)
