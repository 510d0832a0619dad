"""Confusion matrices, one-vs-rest rates, multi-seed experiments and timing."""

from __future__ import annotations

import json
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import IndexOutOfRange, LengthMismatch, ValidationError
from .nn import MlpModel, TrainConfig, predict, train
from .pipeline import Dataset, Label, Origin, split_dataset, split_mmsis

BOUNDARY_BAND_NMI = 2.0


@dataclass
class ConfusionMatrix:
    """``counts[i, j]``: samples of true class ``i`` predicted as ``j``."""

    counts: np.ndarray
    class_names: tuple[str, ...] = ()

    @property
    def K(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else 0.0

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts, self.class_names or other.class_names)

    def one_vs_rest(self) -> list[dict]:
        return one_vs_rest(self)

    def table(self) -> str:
        names = list(self.class_names) or [str(i) for i in range(self.K)]
        width = max(12, *(len(n) + 2 for n in names))
        lines = ["true \\ pred".ljust(width) + "".join(n.rjust(width) for n in names)]
        for name, row in zip(names, self.counts):
            lines.append(name.ljust(width) + "".join(str(int(v)).rjust(width) for v in row))
        lines.append(f"overall accuracy: {self.accuracy:.6f} ({int(np.trace(self.counts))}/{self.total})")
        return "\n".join(lines)


def confusion(truth, pred, K: int, class_names=()) -> ConfusionMatrix:
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape:
        raise LengthMismatch(f"{truth.shape} truths vs {pred.shape} predictions")
    for arr in (truth, pred):
        if arr.size and (arr.min() < 0 or arr.max() >= K):
            raise IndexOutOfRange(f"class index outside 0..{K - 1}")
    counts = np.bincount(truth * K + pred, minlength=K * K).reshape(K, K)
    return ConfusionMatrix(counts, tuple(class_names))


def one_vs_rest(cm: ConfusionMatrix) -> list[dict]:
    """Per-class TP/FP/FN/TN counts with the derived TP and TN rates."""
    if cm.K < 2:
        raise ValidationError("one-vs-rest needs at least two classes")
    c = cm.counts
    total = cm.total
    out = []
    for k in range(cm.K):
        tp = int(c[k, k])
        fn = int(c[k].sum()) - tp
        fp = int(c[:, k].sum()) - tp
        tn = total - tp - fn - fp
        tpr = tp / (tp + fn) if tp + fn else float("nan")
        tnr = tn / (tn + fp) if tn + fp else float("nan")
        out.append({
            "class": cm.class_names[k] if cm.class_names else k,
            "TP": tp, "FP": fp, "FN": fn, "TN": tn,
            "tp_rate": tpr, "tn_rate": tnr,
            "fn_rate": 1.0 - tpr, "fp_rate": 1.0 - tnr,
        })
    return out


def pairwise_rates(cm: ConfusionMatrix) -> dict:
    """Fraction of each true class predicted as each other class."""
    out = {}
    names = cm.class_names or tuple(str(i) for i in range(cm.K))
    for i in range(cm.K):
        row = cm.counts[i].sum()
        for j in range(cm.K):
            if i != j:
                out[f"{names[i]}->{names[j]}"] = float(cm.counts[i, j] / row) if row else 0.0
    return out


@dataclass
class Timing:
    median_s_per_1000: float
    variance: float
    repeats: list[float]

    def as_dict(self) -> dict:
        return {"median_s_per_1000": self.median_s_per_1000, "variance": self.variance,
                "repeats": self.repeats}


def time_inference(model: MlpModel, rows, repeats: int = 5, min_rows: int = 1000) -> Timing:
    """Seconds per 1000 predicted rows: median over ``repeats`` runs after a warm-up."""
    rows = np.asarray(rows, dtype=np.float64)
    if len(rows) == 0:
        raise ValidationError("no rows to time")
    if len(rows) < min_rows:
        rows = np.resize(rows, (min_rows, rows.shape[1]))
    predict(model, rows)
    per_1000 = []
    for _ in range(max(5, repeats)):
        t0 = time.perf_counter()
        predict(model, rows)
        per_1000.append((time.perf_counter() - t0) / len(rows) * 1000.0)
    return Timing(statistics.median(per_1000), statistics.pvariance(per_1000), per_1000)


@dataclass
class SeedRun:
    seed: int
    accuracy: float
    epochs: int
    final_loss: float
    converged: bool
    confusion: list
    train_s_per_1000: float
    predict_s_per_1000: float
    boundary: dict
    predictions: np.ndarray | None = field(default=None, repr=False)
    target: Dataset | None = field(default=None, repr=False)


@dataclass
class MetricsReport:
    confusion: ConfusionMatrix
    runs: list[SeedRun] = field(default_factory=list)
    mode: str = ""
    split_ratio: float = 0.6
    holdout: dict | None = None

    @property
    def overall_accuracy(self) -> float:
        return self.confusion.accuracy

    @property
    def seeds(self) -> list[int]:
        return [r.seed for r in self.runs]

    def boundary_summary(self) -> dict:
        total = sum(r.boundary["confusions"] for r in self.runs)
        near = sum(r.boundary["near_boundary"] for r in self.runs)
        return {"confusions": total, "near_boundary": near,
                "fraction_near_boundary": near / total if total else None,
                "band_nmi": BOUNDARY_BAND_NMI}

    def as_dict(self, timing: bool = True) -> dict:
        runs = []
        for r in self.runs:
            d = {"seed": r.seed, "accuracy": r.accuracy, "epochs": r.epochs,
                 "final_loss": r.final_loss, "converged": r.converged,
                 "confusion": r.confusion, "boundary": r.boundary}
            if timing:
                d["timing"] = {"train_s_per_1000": r.train_s_per_1000,
                               "predict_s_per_1000": r.predict_s_per_1000}
            runs.append(d)
        out = {
            "mode": self.mode,
            "class_names": list(self.confusion.class_names),
            "seeds": self.seeds,
            "split_ratio": self.split_ratio,
            "overall_accuracy": self.overall_accuracy,
            "confusion": self.confusion.counts.tolist(),
            "one_vs_rest": one_vs_rest(self.confusion),
            "pairwise_misclassification": pairwise_rates(self.confusion),
            "per_seed_accuracy": [r.accuracy for r in self.runs],
            "outage_anomaly_boundary": self.boundary_summary(),
            "runs": runs,
        }
        if self.holdout is not None:
            out["holdout"] = self.holdout
        if timing and self.runs:
            out["timing"] = {
                "train_s_per_1000": float(np.mean([r.train_s_per_1000 for r in self.runs])),
                "predict_s_per_1000": float(np.mean([r.predict_s_per_1000 for r in self.runs])),
            }
        return out

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.as_dict(timing), indent=2, sort_keys=True, allow_nan=True) + "\n"


def boundary_confusions(truth, pred, distance, range_nmi: float = 40.0,
                        band: float = BOUNDARY_BAND_NMI) -> dict:
    """Count outage<->anomaly confusions and how many sit within ``band`` of the range."""
    truth, pred, distance = map(np.asarray, (truth, pred, distance))
    a, o = int(Label.ANOMALY), int(Label.POWER_OUTAGE)
    mixed = ((truth == a) & (pred == o)) | ((truth == o) & (pred == a))
    near = mixed & (np.abs(distance - range_nmi) <= band)
    return {"confusions": int(mixed.sum()), "near_boundary": int(near.sum())}


def evaluate_model(model: MlpModel, ds: Dataset) -> tuple[ConfusionMatrix, np.ndarray]:
    pred, _ = predict(model, ds.feature_matrix)
    return confusion(ds.labels, pred, len(ds.class_names), ds.class_names), pred


def _one_seed(dataset: Dataset, config: TrainConfig, seed: int, ratio: float,
              test: Dataset | None) -> tuple[ConfusionMatrix, SeedRun]:
    train_ds, val_ds = split_dataset(dataset, ratio, seed)
    cfg = TrainConfig.from_dict({**config.to_dict(), "seed": seed})
    model, report = train(train_ds, cfg)
    target = val_ds if test is None else test.with_scaler(train_ds.scaler)
    cm, pred = evaluate_model(model, target)
    timing = time_inference(model, target.feature_matrix)
    run = SeedRun(
        seed=seed,
        accuracy=cm.accuracy,
        epochs=report.epochs_run,
        final_loss=report.final_loss,
        converged=report.converged,
        confusion=cm.counts.tolist(),
        train_s_per_1000=report.train_s_per_1000,
        predict_s_per_1000=timing.median_s_per_1000,
        boundary=boundary_confusions(target.labels, pred, target.samples.anchor_distance,
                                     dataset.cfg.range_nmi),
        predictions=pred,
        target=target,
    )
    return cm, run


def run_experiment(dataset: Dataset, train_config: TrainConfig = TrainConfig(),
                   seeds=range(10), ratio: float = 0.6, test: Dataset | None = None,
                   n_jobs: int | None = None) -> MetricsReport:
    """Per seed: split ``ratio``, train, evaluate on the validation side.

    Confusion matrices are summed across seeds.  When ``test`` is given it is
    evaluated instead of the validation split (held-out vessels).
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValidationError("at least one seed is required")
    n_jobs = n_jobs or kernels.thread_cap()
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            results = list(pool.map(lambda s: _one_seed(dataset, train_config, s, ratio, test), seeds))
    else:
        results = [_one_seed(dataset, train_config, s, ratio, test) for s in seeds]
    K = len(dataset.class_names)
    total = ConfusionMatrix(np.zeros((K, K), dtype=np.int64), tuple(dataset.class_names))
    for cm, _ in results:
        total = total + cm
    return MetricsReport(confusion=total, runs=[r for _, r in results], mode=dataset.cfg.mode,
                         split_ratio=ratio)


def holdout_experiment(dataset: Dataset, train_config: TrainConfig = TrainConfig(),
                       fraction: float = 0.3, seeds=(0,), ratio: float = 0.6,
                       holdout_seed: int = 0) -> MetricsReport:
    """Train on some vessels, test on the real samples of the vessels held out."""
    train_ids, test_ids = split_mmsis(dataset.samples.mmsi, fraction, holdout_seed)
    in_test = np.isin(dataset.samples.mmsi, sorted(test_ids))
    train_part = dataset.subset(np.flatnonzero(~in_test), refit=True)
    test_part = dataset.subset(np.flatnonzero(in_test & (dataset.samples.origin == Origin.REAL)))
    report = run_experiment(train_part, train_config, seeds, ratio, test=test_part)
    report.holdout = {"fraction": fraction, "seed": holdout_seed,
                      "train_vessels": len(train_ids), "test_vessels": len(test_ids),
                      "test_samples": len(test_part)}
    return report


def predictions_geojson(samples, truth, pred, class_names) -> dict:
    """Point features at each sample anchor with true and predicted labels."""
    features = []
    for i in range(len(samples)):
        lat, lon = samples.features[i, 0, 0], samples.features[i, 0, 1]
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [float(lon), float(lat)]},
            "properties": {
                "mmsi": int(samples.mmsi[i]),
                "anchor_time": float(samples.anchor_time[i]),
                "true_label": class_names[int(truth[i])],
                "predicted_label": class_names[int(pred[i])],
            },
        })
    return {"type": "FeatureCollection", "features": features}
