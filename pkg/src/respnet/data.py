"""Dataset files and in-memory feature sets.

Dataset files are JSON lines, one record per window::

    {"label": 3, "rate_hz": 10.0, "samples": [0.12, 0.15, ...]}

Raw recordings are CSV with one sample per line and an optional header.
"""
from __future__ import annotations

import contextlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .rsm import LabeledWaveform, RespiratoryPattern, Waveform
from .signal import PreprocessConfig, preprocess


class DatasetFormatError(ValueError):
    pass


@contextlib.contextmanager
def atomic_write(path, mode: str = "w"):
    """Write to a temp file next to ``path`` and rename it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if "b" in mode else {"encoding": "utf-8", "newline": ""})) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def record_to_json(item: LabeledWaveform) -> str:
    rec = {
        "label": int(item.label),
        "rate_hz": float(item.waveform.sample_rate_hz),
        "samples": [float(v) for v in item.waveform.samples],
    }
    return json.dumps(rec, separators=(",", ":"))


def write_jsonl(path, items: Iterable[LabeledWaveform]) -> int:
    n = 0
    with atomic_write(path) as fh:
        for item in items:
            fh.write(record_to_json(item) + "\n")
            n += 1
    return n


def iter_jsonl(path) -> Iterator[LabeledWaveform]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                label = RespiratoryPattern(int(rec["label"]))
                wave = Waveform(np.asarray(rec["samples"], dtype=np.float64), float(rec["rate_hz"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise DatasetFormatError(f"{path}:{lineno}: bad record ({exc})") from exc
            yield LabeledWaveform(wave, label)


def read_jsonl(path) -> list[LabeledWaveform]:
    return list(iter_jsonl(path))


def read_csv_signal(path) -> np.ndarray:
    """One value per line; a non-numeric first line is treated as a header."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            cell = line.strip().split(",")[0].strip()
            if not cell:
                continue
            try:
                values.append(float(cell))
            except ValueError:
                if lineno == 1 and not values:
                    continue
                raise DatasetFormatError(f"{path}:{lineno}: not a number: {cell!r}") from None
    if not values:
        raise DatasetFormatError(f"{path}: no samples")
    return np.asarray(values, dtype=np.float64)


def write_csv_signal(path, samples, header: str | None = "value") -> None:
    with atomic_write(path) as fh:
        if header:
            fh.write(header + "\n")
        for v in samples:
            fh.write(f"{float(v)!r}\n")


@dataclass
class FeatureSet:
    """Preprocessed windows ready for the classifier."""

    features: np.ndarray  # (N, T)
    labels: np.ndarray  # (N,) int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise ValueError(
                f"features {self.features.shape} and labels {self.labels.shape} disagree"
            )

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def seq_len(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "FeatureSet":
        return FeatureSet(self.features[idx], self.labels[idx])

    def class_counts(self) -> list[int]:
        return np.bincount(self.labels, minlength=len(RespiratoryPattern)).tolist()

    @classmethod
    def from_waveforms(
        cls,
        items: Sequence[LabeledWaveform],
        config: PreprocessConfig = PreprocessConfig(),
        expect_len: int | None = None,
    ) -> "FeatureSet":
        """Preprocess every window.

        With ``expect_len`` each raw window must already have that many
        samples; otherwise windows are resampled to ``config.target_len``.
        """
        if expect_len is not None:
            for i, item in enumerate(items):
                if len(item.waveform) != expect_len:
                    raise DatasetFormatError(
                        f"record {i}: expected T={expect_len} samples, got {len(item.waveform)}"
                    )
        feats = np.empty((len(items), config.target_len))
        for i, item in enumerate(items):
            feats[i] = preprocess(item.waveform, config)
        return cls(feats, np.array([int(it.label) for it in items], dtype=np.int64))


def split_holdout(data: FeatureSet, frac: float, rng: np.random.Generator):
    """Deterministic (train, holdout) split; ``frac`` of the samples are held out."""
    if not 0 <= frac < 1:
        raise ValueError(f"holdout fraction must be in [0, 1), got {frac}")
    order = rng.permutation(len(data))
    n_hold = int(round(frac * len(data)))
    return data.subset(np.sort(order[n_hold:])), data.subset(np.sort(order[:n_hold]))
