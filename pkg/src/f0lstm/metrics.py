"""Detection rate and voice decision error on per-frame f0 tracks."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields

import numpy as np

SYSTEMS = ("None", "LSTM", "LSTM-AA")
DEFAULT_VOICING_THRESHOLD = math.log(50.0)


@dataclass(frozen=True)
class F0Track:
    f0: np.ndarray  # Hz, 0 where unvoiced

    def __post_init__(self):
        f0 = np.asarray(self.f0, dtype=np.float64)
        if f0.ndim != 1:
            raise ValueError("f0 track must be one-dimensional")
        if np.any(f0 < 0) or not np.all(np.isfinite(f0)):
            raise ValueError("f0 values must be finite and non-negative")
        object.__setattr__(self, "f0", f0)

    @property
    def voiced(self) -> np.ndarray:
        return self.f0 > 0

    def __len__(self) -> int:
        return self.f0.size


def _as_track(x) -> F0Track:
    return x if isinstance(x, F0Track) else F0Track(x)


def detection_rate(predicted, truth, tolerance: float = 0.05) -> float:
    """Percent of truth-voiced frames where the prediction is voiced and within ``tolerance`` (relative, Hz)."""
    predicted, truth = _as_track(predicted), _as_track(truth)
    if len(predicted) != len(truth):
        raise ValueError(f"track lengths differ: {len(predicted)} vs {len(truth)}")
    ref = truth.voiced
    n_voiced = int(ref.sum())
    if n_voiced == 0:
        raise ValueError("detection rate is undefined without voiced reference frames")
    est, true = predicted.f0[ref], truth.f0[ref]
    hits = (est > 0) & (np.abs(est - true) <= tolerance * true)
    return 100.0 * int(hits.sum()) / n_voiced


def voice_decision_error(predicted, truth) -> float:
    predicted, truth = _as_track(predicted), _as_track(truth)
    if len(predicted) != len(truth):
        raise ValueError(f"track lengths differ: {len(predicted)} vs {len(truth)}")
    if len(truth) == 0:
        raise ValueError("empty tracks")
    v_to_u = int(np.sum(truth.voiced & ~predicted.voiced))
    u_to_v = int(np.sum(~truth.voiced & predicted.voiced))
    return 100.0 * (v_to_u + u_to_v) / len(truth)


def track_from_outputs(outputs, voicing_threshold: float = DEFAULT_VOICING_THRESHOLD) -> F0Track:
    """Decode the log_f0 slot (column 0) of network outputs; voiced iff strictly above the threshold."""
    log_f0 = np.asarray(outputs, dtype=np.float64)[:, 0]
    voiced = log_f0 > voicing_threshold
    return F0Track(np.where(voiced, np.exp(np.where(voiced, log_f0, 0.0)), 0.0))


@dataclass(frozen=True)
class EvalReport:
    system: str
    snr_db: float
    dr_percent: float
    vde_percent: float
    test_sse: float

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}")
        for name in ("dr_percent", "vde_percent"):
            if not 0.0 <= getattr(self, name) <= 100.0:
                raise ValueError(f"{name} out of range")


def evaluate_tracks(system: str, snr_db: float, pairs, test_sse: float) -> EvalReport:
    """Pool frames over all utterances, then score once (not a mean of per-utterance rates)."""
    pred = np.concatenate([_as_track(p).f0 for p, _ in pairs])
    truth = np.concatenate([_as_track(t).f0 for _, t in pairs])
    return EvalReport(system, float(snr_db), detection_rate(pred, truth), voice_decision_error(pred, truth), test_sse)


REPORT_HEADER = [f.name for f in fields(EvalReport)]


def write_reports(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for r in reports:
            writer.writerow([r.system, repr(r.snr_db), f"{r.dr_percent:.6f}", f"{r.vde_percent:.6f}", f"{r.test_sse:.6f}"])


def read_reports(path) -> list[EvalReport]:
    with open(path, newline="") as fh:
        return [
            EvalReport(row["system"], float(row["snr_db"]), float(row["dr_percent"]),
                       float(row["vde_percent"]), float(row["test_sse"]))
            for row in csv.DictReader(fh)
        ]
