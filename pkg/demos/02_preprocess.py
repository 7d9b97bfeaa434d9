"""Smooth, resample and normalize a recording, step by step.

A 45 s recording at 10 Hz is stretched to the 600-sample model input, so
the same network can score recordings of other lengths.
"""
import numpy as np

from respnet.rsm import RespiratoryPattern, default_templates, generate_waveform
from respnet.signal import (
    DegenerateSignalError,
    PreprocessConfig,
    min_max_normalize,
    moving_average,
    preprocess,
    resample_linear,
)


def describe(name, y):
    print(f"{name:<12} n={y.size:<4} min={y.min():+.3f} max={y.max():+.3f} "
          f"mean |step|={np.abs(np.diff(y)).mean():.4f}")


def main():
    tpl = default_templates(window_seconds=45.0)[RespiratoryPattern.EUPNEA]
    raw = generate_waveform(tpl, np.random.default_rng(3)).waveform.samples
    describe("raw", raw)
    smooth = moving_average(raw, 5)
    describe("smoothed", smooth)
    resampled = resample_linear(smooth, 600)
    describe("resampled", resampled)
    norm = min_max_normalize(resampled)
    describe("normalized", norm)
    same = np.array_equal(norm, preprocess(raw, PreprocessConfig()))
    print("pipeline matches the one-call version:", same)

    try:
        preprocess(np.full(600, 0.7))
    except DegenerateSignalError as exc:
        print("flat input rejected:", exc)


if __name__ == "__main__":
    main()
