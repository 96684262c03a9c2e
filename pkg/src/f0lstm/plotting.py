"""Matplotlib figures written next to the CSV reports (the CSVs stay the source of truth)."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import SYSTEMS  # noqa: E402

STYLE = {
    "figure.figsize": (7.0, 3.2),
    "axes.grid": True,
    "grid.linestyle": "--",
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
    "savefig.dpi": 120,
}
COLORS = {"None": "0.45", "LSTM": "tab:blue", "LSTM-AA": "tab:red", "truth": "black"}


def new(nrows=1, ncols=1, **kw):
    with plt.rc_context(STYLE):
        return plt.subplots(nrows=nrows, ncols=ncols, **kw)


def save(fig, path) -> Path:
    path = Path(path)
    with plt.rc_context(STYLE):
        fig.tight_layout()
        fig.savefig(path)
    plt.close(fig)
    return path


def _read_columns(path) -> dict[str, list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: [r[i] for r in body] for i, name in enumerate(header)}


def _floats(values) -> np.ndarray:
    return np.array([float(v) if v != "" else np.nan for v in values])


def plot_sse_comparison(csv_path, out_path, title: str = "") -> Path:
    cols = _read_columns(csv_path)
    epoch = _floats(cols["epoch"])
    fig, ax = new()
    ax.plot(epoch, _floats(cols["random_val_sse"]), label="Random", color=COLORS["LSTM"], lw=1)
    ax.plot(epoch, _floats(cols["auto_associative_val_sse"]), label="auto-associative", color=COLORS["LSTM-AA"], lw=1)
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("validation sse")
    if title:
        ax.set_title(title)
    ax.legend()
    return save(fig, out_path)


def plot_training_curve(csv_path, out_path, title: str = "") -> Path:
    cols = _read_columns(csv_path)
    fig, ax = new()
    ax.plot(_floats(cols["epoch"]), _floats(cols["train_sse"]), label="train", lw=1)
    ax.plot(_floats(cols["epoch"]), _floats(cols["val_sse"]), label="validation", lw=1)
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("sse")
    ax.set_title(title)
    ax.legend()
    return save(fig, out_path)


def plot_metrics(reports, out_path) -> Path:
    fig, (ax_dr, ax_vde) = new(1, 2, figsize=(8.0, 3.2))
    for system in SYSTEMS:
        rows = sorted((r for r in reports if r.system == system), key=lambda r: r.snr_db)
        if not rows:
            continue
        snr = [r.snr_db for r in rows]
        ax_dr.plot(snr, [r.dr_percent for r in rows], marker="o", label=system, color=COLORS[system])
        ax_vde.plot(snr, [r.vde_percent for r in rows], marker="o", label=system, color=COLORS[system])
    ax_dr.set(xlabel="SNR (dB)", ylabel="DR (%)", ylim=(0, 100))
    ax_vde.set(xlabel="SNR (dB)", ylabel="VDE (%)", ylim=(0, None))
    ax_dr.legend()
    return save(fig, out_path)


def plot_contour(csv_path, out_path, hop_s: float = 0.005, title: str = "") -> Path:
    cols = _read_columns(csv_path)
    t = _floats(cols["frame_index"]) * hop_s
    fig, ax = new(figsize=(8.0, 3.2))
    labels = {"truth_f0": "truth", "none_f0": "None", "lstm_f0": "LSTM", "lstm_aa_f0": "LSTM-AA"}
    for column, label in labels.items():
        if column not in cols:
            continue
        f0 = _floats(cols[column])
        f0[f0 <= 0] = np.nan  # unvoiced frames break the line
        ax.plot(t, f0, lw=1.6 if label == "truth" else 1, label=label, color=COLORS[label])
    ax.set(xlabel="time (s)", ylabel="f0 (Hz)")
    if title:
        ax.set_title(title)
    ax.legend(ncol=4)
    return save(fig, out_path)


def render_all(exp, reports) -> list[Path]:
    root = exp.root
    figures = root / "figures"
    figures.mkdir(exist_ok=True)
    written = []
    if reports:
        written.append(plot_metrics(reports, figures / "metrics_vs_snr.png"))
    for csv_path in sorted((root / "curves").glob("compare_*.csv")):
        label = csv_path.stem.removeprefix("compare_").replace("snr_", "SNR ")
        written.append(plot_sse_comparison(csv_path, figures / f"{csv_path.stem}.png", label))
    pretrain = root / "curves" / "pretrain.csv"
    if pretrain.exists():
        written.append(plot_training_curve(pretrain, figures / "pretrain.png", "auto-associative pretraining"))
    hop_s = exp.cfg.hop_ms / 1000.0
    for csv_path in sorted((root / "contours").glob("contour_*.csv")):
        written.append(plot_contour(csv_path, figures / f"{csv_path.stem}.png", hop_s, csv_path.stem))
    return written
