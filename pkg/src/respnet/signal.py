"""Smoothing, resampling and min-max normalization of 1-D respiration signals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rsm import Waveform


class DegenerateSignalError(ValueError):
    """Raised for constant signals, which carry no respiratory information."""


@dataclass(frozen=True)
class PreprocessConfig:
    smooth_span: int = 5
    target_len: int = 600
    normalize: bool = True

    def __post_init__(self):
        if self.smooth_span < 1 or self.smooth_span % 2 == 0:
            raise ValueError(f"smooth_span must be odd and >= 1, got {self.smooth_span}")
        if self.target_len < 2:
            raise ValueError(f"target_len must be >= 2, got {self.target_len}")


def moving_average(samples, span: int = 5) -> np.ndarray:
    """Centered moving average; windows shrink symmetrically near the edges.

    Sample ``k`` averages over ``k-h .. k+h`` with ``h = min(span//2, k, n-1-k)``,
    so the first and last samples are kept as is and linear trends survive.
    """
    x = np.asarray(samples, dtype=np.float64)
    n = x.size
    if span < 1 or span % 2 == 0:
        raise ValueError(f"span must be odd and >= 1, got {span}")
    if span > n:
        raise ValueError(f"span {span} exceeds signal length {n}")
    if span == 1:
        return x.copy()
    k = np.arange(n)
    half = np.minimum(span // 2, np.minimum(k, n - 1 - k))
    csum = np.concatenate([[0.0], np.cumsum(x)])
    return (csum[k + half + 1] - csum[k - half]) / (2 * half + 1)


def min_max_normalize(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    lo, hi = x.min(), x.max()
    if not hi > lo:
        raise DegenerateSignalError("degenerate signal: max equals min")
    return (x - lo) / (hi - lo)


def resample_linear(waveform, target_len: int) -> np.ndarray:
    """Linear interpolation onto ``target_len`` evenly spaced points, endpoints kept."""
    x = waveform.samples if isinstance(waveform, Waveform) else np.asarray(waveform, dtype=np.float64)
    if x.size < 2:
        raise ValueError("resampling needs at least 2 samples")
    if target_len < 2:
        raise ValueError(f"target_len must be >= 2, got {target_len}")
    if target_len == x.size:
        return x.copy()
    src = np.arange(x.size, dtype=np.float64)
    dst = np.linspace(0.0, x.size - 1, target_len)
    return np.interp(dst, src, x)


def preprocess(waveform, config: PreprocessConfig = PreprocessConfig()) -> np.ndarray:
    """smooth -> resample -> normalize; returns ``config.target_len`` values."""
    x = waveform.samples if isinstance(waveform, Waveform) else np.asarray(waveform, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty signal")
    if x.max() == x.min():
        raise DegenerateSignalError("degenerate signal: max equals min")
    y = moving_average(x, config.smooth_span)
    y = resample_linear(y, config.target_len)
    return min_max_normalize(y) if config.normalize else y


def preprocess_batch(waveforms, config: PreprocessConfig = PreprocessConfig()) -> np.ndarray:
    return np.stack([preprocess(w, config) for w in waveforms])
