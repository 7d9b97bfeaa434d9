"""Confusion matrices, macro metrics and the four-model comparison."""
from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import FeatureSet, atomic_write
from .nn.model import ARCHITECTURES, ModelDims, ModelParams, attention_weights, init_params, predict_proba
from .rsm import PATTERN_NAMES, LabeledWaveform, RespiratoryPattern
from .signal import PreprocessConfig, preprocess_batch
from .train import TrainConfig, TrainReport, train

log = logging.getLogger(__name__)

N_CLASSES = len(RespiratoryPattern)
DISPLAY_ARCH = {"gru": "GRU", "lstm": "LSTM", "bi_at_gru": "BI-AT-GRU", "bi_at_lstm": "BI-AT-LSTM"}
TABLE_HEADER = ("Model", "Accuracy", "Precision", "Recall", "F1")


class ZeroDivisionMetricWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = true class, columns = predicted class."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"confusion matrix must be square, got {c.shape}")
        if (c < 0).any():
            raise ValueError("confusion counts must be nonnegative")
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self, names: Sequence[str] = PATTERN_NAMES) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred", *names])
        for name, row in zip(names, self.counts):
            w.writerow([name, *row.tolist()])
        return buf.getvalue()


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    per_class_precision: np.ndarray
    per_class_recall: np.ndarray
    per_class_f1: np.ndarray
    confusion: ConfusionMatrix

    def as_row(self) -> dict[str, float]:
        return {
            "Accuracy": self.accuracy,
            "Precision": self.precision,
            "Recall": self.recall,
            "F1": self.f1,
        }

    def to_dict(self) -> dict:
        return {
            **{k.lower(): v for k, v in self.as_row().items()},
            "per_class": {
                name: {"precision": float(p), "recall": float(r), "f1": float(f)}
                for name, p, r, f in zip(
                    PATTERN_NAMES, self.per_class_precision, self.per_class_recall, self.per_class_f1
                )
            },
            "confusion": self.confusion.counts.tolist(),
        }


def confusion_matrix(predictions, labels, n_classes: int = N_CLASSES) -> ConfusionMatrix:
    pred = np.asarray(predictions, dtype=np.int64).ravel()
    true = np.asarray(labels, dtype=np.int64).ravel()
    if pred.size != true.size:
        raise ValueError(f"{pred.size} predictions for {true.size} labels")
    if pred.size == 0:
        raise ValueError("cannot build a confusion matrix from no samples")
    for name, v in (("prediction", pred), ("label", true)):
        if v.min() < 0 or v.max() >= n_classes:
            raise ValueError(f"{name} class out of range 0..{n_classes - 1}")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (true, pred), 1)
    return ConfusionMatrix(counts)


def _safe_ratio(num: np.ndarray, den: np.ndarray, what: str) -> np.ndarray:
    out = np.zeros(num.shape, dtype=np.float64)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    if not ok.all():
        warnings.warn(
            f"{what} undefined for classes {np.flatnonzero(~ok).tolist()}; scored as 0",
            ZeroDivisionMetricWarning,
            stacklevel=3,
        )
    return out


def compute_metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Accuracy plus unweighted macro precision, recall and F1."""
    c = cm.counts
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    tp = np.diag(c).astype(np.float64)
    precision = _safe_ratio(tp, c.sum(axis=0).astype(np.float64), "precision")
    recall = _safe_ratio(tp, c.sum(axis=1).astype(np.float64), "recall")
    denom = precision + recall
    f1 = np.zeros_like(precision)
    nz = denom > 0
    f1[nz] = 2 * precision[nz] * recall[nz] / denom[nz]
    return MetricsReport(
        accuracy=float(tp.sum() / cm.total),
        precision=float(precision.mean()),
        recall=float(recall.mean()),
        f1=float(f1.mean()),
        per_class_precision=precision,
        per_class_recall=recall,
        per_class_f1=f1,
        confusion=cm,
    )


@dataclass
class Evaluation:
    report: MetricsReport
    predictions: np.ndarray
    probs: np.ndarray


def evaluate(model: ModelParams, dataset: FeatureSet) -> Evaluation:
    """Score a preprocessed dataset; argmax ties go to the lowest class index."""
    probs = predict_proba(model, dataset.features)
    pred = np.argmax(probs, axis=1)
    report = compute_metrics(confusion_matrix(pred, dataset.labels))
    return Evaluation(report, pred, probs)


def transition_indices(item: LabeledWaveform) -> list[int]:
    """Sample indices where an apnea segment gives way to breathing."""
    out = []
    for prev, cur in zip(item.segments, item.segments[1:]):
        if prev.params.is_apnea and not cur.params.is_apnea:
            out.append(cur.start)
    return out


@dataclass
class TransitionAttention:
    inside: float
    outside: float
    n_windows: int
    n_transitions: int

    @property
    def ratio(self) -> float:
        return self.inside / self.outside


def transition_attention(
    model: ModelParams,
    items: Sequence[LabeledWaveform],
    preprocess_config: PreprocessConfig = PreprocessConfig(),
    half_width_s: float = 2.0,
) -> TransitionAttention:
    """Mean attention near apnea-to-breathing transitions versus elsewhere.

    A region spans ``half_width_s`` either side of each transition, mapped onto
    the resampled time axis. Windows without a transition are skipped.
    """
    items = [it for it in items if transition_indices(it)]
    if not items:
        raise ValueError("no windows with an apnea-to-breathing transition")
    feats = preprocess_batch([it.waveform for it in items], preprocess_config)
    alphas = attention_weights(model, feats)
    T = feats.shape[1]
    inside, outside, n_tr = [], [], 0
    for it, a in zip(items, alphas):
        scale = T / len(it.waveform)
        w = max(1, int(round(half_width_s * it.waveform.sample_rate_hz * scale)))
        mask = np.zeros(T, dtype=bool)
        for idx in transition_indices(it):
            centre = int(round(idx * scale))
            mask[max(centre - w, 0) : centre + w] = True
            n_tr += 1
        inside.append(a[mask])
        outside.append(a[~mask])
    return TransitionAttention(
        float(np.concatenate(inside).mean()), float(np.concatenate(outside).mean()), len(items), n_tr
    )


def predictions_jsonl(ev: Evaluation, labels) -> str:
    lines = []
    for i, (t, p, pr) in enumerate(zip(labels, ev.predictions, ev.probs)):
        lines.append(
            json.dumps(
                {"id": i, "true": int(t), "pred": int(p), "probs": [float(v) for v in pr]},
                separators=(",", ":"),
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


@dataclass
class ComparisonResult:
    rows: dict[str, MetricsReport]
    reports: dict[str, TrainReport] = field(default_factory=dict)
    models: dict[str, ModelParams] = field(default_factory=dict)

    def ordering_check(self) -> dict:
        """Whether BI-AT-GRU matches or beats plain GRU on accuracy."""
        if "bi_at_gru" not in self.rows or "gru" not in self.rows:
            return {}
        a, b = self.rows["bi_at_gru"].accuracy, self.rows["gru"].accuracy
        return {"bi_at_gru_accuracy": a, "gru_accuracy": b, "bi_at_gru_ge_gru": bool(a >= b)}

    def table(self) -> str:
        lines = [f"{TABLE_HEADER[0]:<12}" + "".join(f"{h:>11}" for h in TABLE_HEADER[1:])]
        for arch, rep in self.rows.items():
            vals = "".join(f"{100 * v:>10.1f}%" for v in rep.as_row().values())
            lines.append(f"{DISPLAY_ARCH[arch]:<12}{vals}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for arch, rep in self.rows.items():
            w.writerow([DISPLAY_ARCH[arch], *(repr(v) for v in rep.as_row().values())])
        return buf.getvalue()


def run_comparison(
    train_set: FeatureSet,
    val_set: FeatureSet | None,
    test_set: FeatureSet,
    config: TrainConfig,
    dims: ModelDims = ModelDims(),
    architectures: Sequence[str] = ARCHITECTURES,
    init_kwargs: dict | None = None,
) -> ComparisonResult:
    """Train each architecture from the same seed and data, then score on ``test_set``.

    ``init_kwargs`` go to :func:`init_params` (carry bias, input map).
    """
    result = ComparisonResult(rows={})
    for arch in architectures:
        model = init_params(arch, dims, np.random.default_rng([config.seed, 1]), **(init_kwargs or {}))
        model, rep, _ = train(model, train_set, val_set, config)
        ev = evaluate(model, test_set)
        log.info("%s: test accuracy %.4f", DISPLAY_ARCH[arch], ev.report.accuracy)
        result.rows[arch] = ev.report
        result.reports[arch] = rep
        result.models[arch] = model
    return result


def write_comparison(result: ComparisonResult, out_dir, meta: dict | None = None) -> None:
    from pathlib import Path

    out = Path(out_dir)
    with atomic_write(out / "comparison.csv") as fh:
        fh.write(result.to_csv())
    with atomic_write(out / "comparison.txt") as fh:
        fh.write(result.table() + "\n")
    for arch, rep in result.rows.items():
        with atomic_write(out / f"confusion_{arch}.csv") as fh:
            fh.write(rep.confusion.to_csv())
    with atomic_write(out / "comparison_meta.json") as fh:
        json.dump(
            {**(meta or {}), "ordering": result.ordering_check(),
             "metrics": {a: r.to_dict() for a, r in result.rows.items()}},
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")
