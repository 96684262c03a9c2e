"""Orchestration of the three-system comparison: corpus, pretraining, per-SNR training, evaluation, reports.

Everything lives under one output directory::

    config.txt                 snapshot of the run configuration
    corpus/                    see corpus.build_dataset
    models/theta_r.bin         random initialization (also the pretraining start point)
    models/theta_a.bin         auto-associative initialization
    models/<cell>.bin          trained networks, cell = lstm_snr_<L> | lstm_aa_snr_<L>
    records/<run>.json         TrainRecord summaries
    curves/<run>.csv           epoch,train_sse,val_sse
    curves/compare_snr_<L>.csv epoch,random_val_sse,auto_associative_val_sse
    reports/eval.csv           system,snr_db,dr_percent,vde_percent,test_sse
    reports/table_*.csv        SNR x system tables
    contours/*.csv, figures/*.png
    manifest.json
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
import traceback
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import weights_io
from .corpus import CorpusConfig, Dataset, build_dataset, derive_seed, format_level
from .dsp import FeatureConfig, baseline_f0
from .lstm import Architecture, LstmWeights, TrainConfig, TrainRecord, init_random, predict, sse_loss, train
from .metrics import DEFAULT_VOICING_THRESHOLD, SYSTEMS, EvalReport, evaluate_tracks, track_from_outputs, write_reports
from .pretrain import parameter_distance, pretrain_autoassociative, transfer_weights

logger = logging.getLogger(__name__)

INIT_KINDS = {"LSTM": "random", "LSTM-AA": "auto_associative"}
CELL_PREFIX = {"LSTM": "lstm", "LSTM-AA": "lstm_aa"}


class ExperimentError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    out_dir: str = "runs/desk"
    master_seed: int = 0
    # corpus
    n_train: int = 80
    n_val: int = 15
    n_test: int = 10
    min_duration: float = 2.0
    max_duration: float = 4.0
    snr_levels: tuple[float, ...] = (-10.0, -5.0, 0.0, 5.0, 10.0)
    # features
    n_mfcc: int = 13
    n_mels: int = 26
    frame_ms: float = 25.0
    hop_ms: float = 5.0
    # network
    hidden: tuple[int, ...] = (64, 64)
    optimizer: str = "sgd"
    learning_rate: float = 1e-3
    momentum: float = 0.0
    clip_norm: float = 5.0
    patience: int = 40
    max_epochs: int = 1000
    pretrain_learning_rate: float = 1e-3
    pretrain_momentum: float = 0.0
    pretrain_patience: int = 40
    pretrain_max_epochs: int = 1000
    # evaluation
    systems: tuple[str, ...] = SYSTEMS
    voicing_threshold: float = DEFAULT_VOICING_THRESHOLD
    training_mode: str = "matched"  # or "pooled": one network per init over all levels
    figures: bool = True

    def validate(self) -> None:
        unknown = set(self.systems) - set(SYSTEMS)
        if unknown:
            raise ValueError(f"unknown systems {sorted(unknown)}")
        if self.training_mode not in ("matched", "pooled"):
            raise ValueError(f"training_mode must be matched or pooled, got {self.training_mode!r}")
        if self.pretrain_max_epochs < self.pretrain_patience:
            raise ValueError("pretrain_max_epochs must be >= pretrain_patience")
        if not self.snr_levels:
            raise ValueError("need at least one SNR level")
        self.feature_config().validate()
        self.train_config().validate()
        self.pretrain_config().validate()

    @property
    def out(self) -> Path:
        return Path(self.out_dir)

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(frame_ms=self.frame_ms, hop_ms=self.hop_ms, n_mels=self.n_mels, n_mfcc=self.n_mfcc)

    def corpus_config(self) -> CorpusConfig:
        return CorpusConfig(self.n_train, self.n_val, self.n_test, tuple(self.snr_levels),
                            self.min_duration, self.max_duration, self.master_seed)

    def architecture(self) -> Architecture:
        dim = 2 + self.n_mfcc
        return Architecture(dim, tuple(self.hidden), dim)

    def train_config(self, seed: int = 0) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.clip_norm, self.patience, self.max_epochs, seed,
                           self.momentum, self.optimizer)

    def pretrain_config(self, seed: int = 0) -> TrainConfig:
        return TrainConfig(self.pretrain_learning_rate, self.clip_norm, self.pretrain_patience,
                           self.pretrain_max_epochs, seed, self.pretrain_momentum, self.optimizer)

    # -- plain-text key = value files ------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, (tuple, list)):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls.from_mapping(parse_key_values(text))

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> "ExperimentConfig":
        kinds = {f.name: f for f in fields(cls)}
        defaults = cls()
        kwargs = {}
        for key, raw in values.items():
            if key not in kinds:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(getattr(defaults, key), raw)
        return cls(**kwargs)


def parse_key_values(text: str) -> dict[str, str]:
    """``key = value`` per line; ``#`` starts a comment; blank lines ignored."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def _coerce(default, raw):
    if isinstance(raw, str):
        raw = raw.strip()
    else:
        return raw
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(default, tuple):
        items = [s.strip() for s in raw.split(",") if s.strip()]
        if default and isinstance(default[0], str):
            return tuple(items)
        if default and isinstance(default[0], int) and not isinstance(default[0], bool):
            return tuple(int(s) for s in items)
        return tuple(float(s) for s in items)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


# Settings used for the shipped demo run. Plain gradient descent at 1e-3 needs thousands of
# epochs to move raw-unit outputs, so the desk preset uses momentum and caps the epochs.
DESK_OVERRIDES = dict(
    optimizer="adam",
    learning_rate=3e-3,
    max_epochs=150,
    pretrain_learning_rate=3e-3,
    pretrain_max_epochs=200,
    snr_levels=(-5.0, 0.0, 5.0),
)


def desk_config(**overrides) -> ExperimentConfig:
    return replace(ExperimentConfig(), **{**DESK_OVERRIDES, **overrides})


def full_config(**overrides) -> ExperimentConfig:
    base = dict(n_train=800, n_val=150, n_test=50, snr_levels=(-10.0, -5.0, 0.0, 5.0, 10.0), out_dir="runs/full")
    return replace(ExperimentConfig(), **{**DESK_OVERRIDES, **base, "max_epochs": 1000,
                                          "pretrain_max_epochs": 1000, **overrides})


# -- run state ---------------------------------------------------------------------------

def cell_name(system: str, level: Optional[float]) -> str:
    suffix = "pooled" if level is None else f"snr_{format_level(level)}"
    return f"{CELL_PREFIX[system]}_{suffix}"


@dataclass
class RunManifest:
    config: dict
    seeds: dict = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    records: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    complete: bool = False

    def add(self, path: Path, root: Path) -> None:
        rel = str(Path(path).relative_to(root))
        if rel not in self.artifacts:
            self.artifacts.append(rel)

    def save(self, root: Path) -> Path:
        path = root / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, root: Path) -> "RunManifest":
        path = Path(root) / "manifest.json"
        if not path.exists():
            return cls(config={})
        return cls(**json.loads(path.read_text()))


def write_record_csv(path: Path, record: TrainRecord) -> Path:
    if record.epochs == 0:
        raise ValueError("empty training record")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_sse", "val_sse"])
        for epoch, tr, va in record.rows():
            writer.writerow([epoch, repr(tr), repr(va)])
    return path


def read_record_csv(path: Path) -> TrainRecord:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    record = TrainRecord(train_sse=data[:, 1].tolist(), val_sse=data[:, 2].tolist())
    record.best_validation_sse = float(np.min(data[:, 2]))
    record.best_epoch = int(np.argmin(data[:, 2])) + 1
    return record


class Experiment:
    """Stateful view over one output directory; each stage can run on its own (CLI subcommands)."""

    def __init__(self, cfg: ExperimentConfig, config_text: Optional[str] = None):
        cfg.validate()
        self.cfg = cfg
        self.root = cfg.out
        self.root.mkdir(parents=True, exist_ok=True)
        for sub in ("models", "records", "curves", "reports", "contours", "figures"):
            (self.root / sub).mkdir(exist_ok=True)
        self.config_text = config_text if config_text is not None else cfg.to_text()
        snapshot = self.root / "config.txt"
        snapshot.write_text(self.config_text)
        self.manifest = RunManifest.load(self.root)
        self.manifest.config = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()}
        self.manifest.add(snapshot, self.root)
        self._dataset: Optional[Dataset] = None
        self._features: dict = {}

    # -- helpers ---------------------------------------------------------------------
    def _time(self, key: str, start: float) -> None:
        self.manifest.timings[key] = round(time.perf_counter() - start, 3)

    def _save_manifest(self) -> None:
        self.manifest.save(self.root)

    @property
    def corpus_dir(self) -> Path:
        return self.root / "corpus"

    @property
    def levels(self) -> list[float]:
        return [float(v) for v in self.cfg.snr_levels]

    def model_path(self, name: str) -> Path:
        return self.root / "models" / f"{name}.bin"

    def dataset(self) -> Dataset:
        if self._dataset is None:
            if not (self.corpus_dir / "dataset.json").exists():
                raise ExperimentError(f"no corpus in {self.corpus_dir}; run gen-corpus first")
            self._dataset = Dataset.load(self.corpus_dir)
            missing = set(self.levels) - set(self._dataset.snr_levels)
            if missing:
                raise ExperimentError(f"corpus lacks SNR levels {sorted(missing)}")
        return self._dataset

    def clean(self, utt: str) -> np.ndarray:
        key = (utt, None)
        if key not in self._features:
            self._features[key] = self.dataset().clean_features(utt)
        return self._features[key]

    def noisy(self, utt: str, level: float) -> np.ndarray:
        key = (utt, float(level))
        if key not in self._features:
            self._features[key] = self.dataset().noisy_features(utt, level)
        return self._features[key]

    # -- stages ----------------------------------------------------------------------
    def gen_corpus(self, force: bool = False) -> Dataset:
        start = time.perf_counter()
        manifest_path = self.corpus_dir / "dataset.json"
        if manifest_path.exists() and not force:
            meta = json.loads(manifest_path.read_text())
            wanted = asdict(self.cfg.corpus_config())
            wanted["snr_levels"] = [float(v) for v in wanted["snr_levels"]]
            if meta.get("corpus_config") == wanted and meta.get("feature_config") == asdict(self.cfg.feature_config()):
                logger.info("reusing corpus in %s", self.corpus_dir)
                return self.dataset()
            logger.info("corpus config changed, rebuilding")
        self._dataset = build_dataset(self.corpus_dir, self.cfg.corpus_config(), self.cfg.feature_config())
        self._features.clear()
        self.manifest.add(manifest_path, self.root)
        self.manifest.seeds["corpus_master"] = self.cfg.master_seed
        self._time("gen_corpus", start)
        self._save_manifest()
        return self._dataset

    def standardization(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-feature mean/std over training clean features and training noisy features at every level."""
        ds = self.dataset()
        stack = np.vstack([self.clean(u) for u in ds.train] + [self.noisy(u, l) for u in ds.train for l in self.levels])
        std = stack.std(axis=0)
        return stack.mean(axis=0), np.where(std > 1e-12, std, 1.0)

    def theta_r(self) -> LstmWeights:
        path = self.model_path("theta_r")
        if path.exists():
            return weights_io.load(path)
        seed = derive_seed(self.cfg.master_seed, "theta_r")
        w = init_random(self.cfg.architecture(), seed)
        w.input_mean, w.input_std = self.standardization()
        weights_io.save(path, w)
        self.manifest.seeds["theta_r"] = seed
        self.manifest.add(path, self.root)
        return w

    def pretrain(self) -> LstmWeights:
        """Fit θ_A once on clean training features, starting from θ_R."""
        start = time.perf_counter()
        ds = self.dataset()
        theta_r = self.theta_r()
        seed = derive_seed(self.cfg.master_seed, "pretrain_shuffle")
        self.manifest.seeds["pretrain_shuffle"] = seed
        theta_a, record = pretrain_autoassociative(
            self.cfg.architecture(),
            [self.clean(u) for u in ds.train],
            [self.clean(u) for u in ds.validation],
            self.cfg.pretrain_config(seed),
            init=theta_r,
        )
        path = weights_io.save(self.model_path("theta_a"), theta_a, {"init_kind": "auto_associative"})
        self.manifest.add(path, self.root)
        self._store_record("pretrain", record)
        self._time("pretrain", start)
        self._save_manifest()
        return theta_a

    def _store_record(self, name: str, record: TrainRecord) -> None:
        self.manifest.records[name] = record.to_dict()
        rec_path = self.root / "records" / f"{name}.json"
        rec_path.write_text(json.dumps({**record.to_dict(), "train_sse": record.train_sse,
                                        "val_sse": record.val_sse}, indent=1) + "\n")
        self.manifest.add(rec_path, self.root)
        self.manifest.add(write_record_csv(self.root / "curves" / f"{name}.csv", record), self.root)

    def load_record(self, name: str) -> TrainRecord:
        data = json.loads((self.root / "records" / f"{name}.json").read_text())
        return TrainRecord(data["train_sse"], data["val_sse"], data["initial_val_sse"], data["best_epoch"],
                           data["best_validation_sse"], data["stop_reason"])

    def train_cell(self, system: str, level: Optional[float]) -> LstmWeights:
        """Train one denoising network; ``level=None`` pools all SNR levels."""
        ds = self.dataset()
        levels = self.levels if level is None else [level]
        if system == "LSTM":
            init = self.theta_r()
        else:
            path = self.model_path("theta_a")
            if not path.exists():
                raise ExperimentError("θ_A missing; run pretrain first")
            init = transfer_weights(weights_io.load(path), self.cfg.architecture())
        name = cell_name(system, level)
        # Same shuffle stream for both initializations at a level: a paired comparison.
        seed = derive_seed(self.cfg.master_seed, "shuffle", "pooled" if level is None else float(level))
        self.manifest.seeds[f"{name}_shuffle"] = seed
        pairs_train = [(self.noisy(u, l), self.clean(u)) for l in levels for u in ds.train]
        pairs_val = [(self.noisy(u, l), self.clean(u)) for l in levels for u in ds.validation]
        start = time.perf_counter()
        final, record = train(init, pairs_train, pairs_val, self.cfg.train_config(seed))
        self._time(name, start)
        path = weights_io.save(self.model_path(name), final, {"cell": name})
        self.manifest.add(path, self.root)
        self._store_record(name, record)
        self.manifest.diagnostics[f"{name}_distance_to_init"] = parameter_distance(init, final)
        self._save_manifest()
        return final

    def cells(self, systems: Optional[Iterable[str]] = None, levels: Optional[Iterable[float]] = None):
        systems = [s for s in (systems or self.cfg.systems) if s != "None"]
        if self.cfg.training_mode == "pooled":
            return [(s, None) for s in systems]
        return [(s, float(l)) for l in (levels if levels is not None else self.levels) for s in systems]

    def train_all(self, systems=None, levels=None) -> bool:
        ok = True
        for system, level in self.cells(systems, levels):
            name = cell_name(system, level)
            try:
                self.train_cell(system, level)
                self.manifest.failures.pop(name, None)
            except Exception as exc:  # keep finished cells; record the failure with its context
                ok = False
                self.manifest.failures[name] = f"{system} @ SNR {level}: {exc!r}"
                logger.error("cell %s failed:\n%s", name, traceback.format_exc())
                self._save_manifest()
        return ok

    # -- evaluation ------------------------------------------------------------------
    def network_for(self, system: str, level: float) -> LstmWeights:
        name = cell_name(system, None if self.cfg.training_mode == "pooled" else level)
        path = self.model_path(name)
        if not path.exists():
            raise ExperimentError(f"missing weights for {system} at SNR {level} ({path.name})")
        return weights_io.load(path)

    def predict_track(self, system: str, level: float, utt: str, net: Optional[LstmWeights] = None) -> np.ndarray:
        if system == "None":
            f0, _ = baseline_f0(self.dataset().noisy_signal(utt, level), self.dataset().features)
            return f0
        net = net or self.network_for(system, level)
        return track_from_outputs(predict(net, self.noisy(utt, level)), self.cfg.voicing_threshold).f0

    def evaluate_cell(self, system: str, level: float) -> EvalReport:
        ds = self.dataset()
        net = None if system == "None" else self.network_for(system, level)
        pairs, sse = [], 0.0
        for utt in ds.test:
            truth, _ = ds.truth(utt)
            pairs.append((self.predict_track(system, level, utt, net), truth))
            # "None" has no network: its sse is the noisy features against the clean ones.
            out = self.noisy(utt, level) if net is None else predict(net, self.noisy(utt, level))
            sse += sse_loss(out, self.clean(utt))
        return evaluate_tracks(system, level, pairs, sse)

    def evaluate(self, systems=None, levels=None) -> tuple[list[EvalReport], bool]:
        start = time.perf_counter()
        reports, ok = [], True
        for level in (levels if levels is not None else self.levels):
            for system in (systems or self.cfg.systems):
                try:
                    reports.append(self.evaluate_cell(system, float(level)))
                except Exception as exc:
                    ok = False
                    self.manifest.failures[f"eval_{system}_{format_level(level)}"] = repr(exc)
                    logger.error("evaluation of %s at %s dB failed: %s", system, level, exc)
        path = self.root / "reports" / "eval.csv"
        write_reports(path, reports)
        self.manifest.add(path, self.root)
        self._time("evaluate", start)
        self._save_manifest()
        return reports, ok

    # -- reports ---------------------------------------------------------------------
    def report(self, reports: Optional[Sequence[EvalReport]] = None) -> list[Path]:
        from .metrics import read_reports

        if reports is None:
            reports = read_reports(self.root / "reports" / "eval.csv")
        written = write_tables(self.root / "reports", reports, self.cfg.systems)
        written += export_curves(self)
        written += self.warm_start_report()
        if self.cfg.figures:
            from . import plotting

            written += plotting.render_all(self, reports)
        for p in written:
            self.manifest.add(p, self.root)
        self._save_manifest()
        return written

    def warm_start_report(self) -> list[Path]:
        """Epoch-1 and best validation sse per level for both initializations (recorded, not asserted)."""
        rows = []
        for level in self.levels if self.cfg.training_mode == "matched" else [None]:
            try:
                r = self.load_record(cell_name("LSTM", level))
                a = self.load_record(cell_name("LSTM-AA", level))
            except FileNotFoundError:
                continue
            rows.append([
                "pooled" if level is None else repr(level),
                repr(r.initial_val_sse), repr(a.initial_val_sse),
                repr(r.val_sse[0]), repr(a.val_sse[0]),
                repr(r.best_validation_sse), repr(a.best_validation_sse),
                r.best_epoch, a.best_epoch,
                int(a.val_sse[0] <= r.val_sse[0]),
            ])
        if not rows:
            return []
        path = self.root / "reports" / "warm_start.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["snr_db", "random_initial_val_sse", "aa_initial_val_sse", "random_epoch1_val_sse",
                             "aa_epoch1_val_sse", "random_best_val_sse", "aa_best_val_sse", "random_best_epoch",
                             "aa_best_epoch", "aa_epoch1_not_worse"])
            writer.writerows(rows)
        return [path]

    def export_contour(self, utt: str, level: float, systems: Sequence[str]) -> Path:
        ds = self.dataset()
        if utt not in ds.test:
            raise ExperimentError(f"{utt} is not in the test split")
        path = self.root / "contours" / f"contour_{utt}_snr_{format_level(level)}.csv"
        write_contour(path, ds.truth(utt)[0], {s: self.predict_track(s, level, utt) for s in systems})
        self.manifest.add(path, self.root)
        self._save_manifest()
        return path

    def run_all(self) -> RunManifest:
        start = time.perf_counter()
        self.manifest.complete = False
        self.manifest.failures = {}
        self.gen_corpus()
        self.theta_r()
        ok = True
        if any(s != "None" for s in self.cfg.systems):
            if "LSTM-AA" in self.cfg.systems:
                self.pretrain()
            ok = self.train_all()
        reports, eval_ok = self.evaluate()
        ok = ok and eval_ok
        level = -5.0 if -5.0 in self.levels else self.levels[0]
        try:
            self.export_contour(self.dataset().test[0], level, self.cfg.systems)
        except ExperimentError as exc:
            ok = False
            self.manifest.failures["contour"] = repr(exc)
        self.report(reports)
        if "LSTM" in self.cfg.systems and "LSTM-AA" in self.cfg.systems and self.cfg.training_mode == "matched":
            self._distance_diagnostics()
        self._time("run_all", start)
        self.manifest.complete = ok and not self.manifest.failures
        missing = [a for a in self.manifest.artifacts if not (self.root / a).exists()]
        if missing:
            self.manifest.complete = False
            self.manifest.failures["missing_artifacts"] = missing
        self._save_manifest()
        return self.manifest

    def _distance_diagnostics(self) -> None:
        theta_a_path = self.model_path("theta_a")
        if not theta_a_path.exists():
            return
        theta_a, theta_r = weights_io.load(theta_a_path), self.theta_r()
        for level in self.levels:
            for system, start in (("LSTM", theta_r), ("LSTM-AA", theta_a)):
                path = self.model_path(cell_name(system, level))
                if path.exists():
                    final = weights_io.load(path)
                    key = "theta_a_to_final" if system == "LSTM-AA" else "theta_r_to_final"
                    self.manifest.diagnostics[f"{key}_snr_{format_level(level)}"] = parameter_distance(start, final)


# -- CSV writers ---------------------------------------------------------------------------

def write_tables(directory: Path, reports: Sequence[EvalReport], systems: Sequence[str]) -> list[Path]:
    """SNR-by-system tables for DR, 100-DR, VDE and test sse."""
    levels = sorted({r.snr_db for r in reports})
    by_key = {(r.system, r.snr_db): r for r in reports}
    systems = [s for s in SYSTEMS if s in systems]
    metrics = {
        "dr": lambda r: r.dr_percent,
        "dr_complement": lambda r: 100.0 - r.dr_percent,
        "vde": lambda r: r.vde_percent,
        "test_sse": lambda r: r.test_sse,
    }
    paths = []
    for name, get in metrics.items():
        path = Path(directory) / f"table_{name}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["snr_db"] + list(systems))
            for level in levels:
                row = [repr(level)]
                for s in systems:
                    r = by_key.get((s, level))
                    row.append("" if r is None else f"{get(r):.6f}")
                writer.writerow(row)
        paths.append(path)
    return paths


def write_contour(path: Path, truth: np.ndarray, tracks: dict[str, np.ndarray]) -> Path:
    columns = {"None": "none_f0", "LSTM": "lstm_f0", "LSTM-AA": "lstm_aa_f0"}
    order = [s for s in SYSTEMS if s in tracks]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame_index", "truth_f0"] + [columns[s] for s in order])
        for i in range(len(truth)):
            writer.writerow([i, repr(float(truth[i]))] + [repr(float(tracks[s][i])) for s in order])
    return path


def export_curves(exp: Experiment) -> list[Path]:
    """Per-run sse curves are written at training time; this adds the random vs auto-associative pairing per level."""
    paths = []
    targets = [None] if exp.cfg.training_mode == "pooled" else exp.levels
    for level in targets:
        try:
            rand = exp.load_record(cell_name("LSTM", level))
            auto = exp.load_record(cell_name("LSTM-AA", level))
        except FileNotFoundError:
            continue
        suffix = "pooled" if level is None else f"snr_{format_level(level)}"
        paths.append(write_comparison_csv(exp.root / "curves" / f"compare_{suffix}.csv", rand, auto))
    return paths


def write_comparison_csv(path: Path, rand: TrainRecord, auto: TrainRecord) -> Path:
    if rand.epochs == 0 or auto.epochs == 0:
        raise ValueError("empty training record")
    n = max(rand.epochs, auto.epochs)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "random_val_sse", "auto_associative_val_sse"])
        for e in range(n):
            writer.writerow([
                e + 1,
                repr(rand.val_sse[e]) if e < rand.epochs else "",
                repr(auto.val_sse[e]) if e < auto.epochs else "",
            ])
    return path
