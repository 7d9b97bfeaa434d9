"""Draw one window of each breathing pattern and describe what came out.

Prints the segment layout (kind, duration, rate, amplitude) and a coarse
text sparkline of each waveform.

    python demos/01_simulate_patterns.py [seed]
"""
import sys

import numpy as np

from respnet.rsm import RespiratoryPattern, default_templates, generate_waveform

BARS = " .:-=+*#%@"


def sparkline(y, width=72):
    chunks = np.array_split(y, width)
    means = np.array([c.mean() for c in chunks])
    scaled = (means - means.min()) / max(np.ptp(means), 1e-12)
    return "".join(BARS[int(v * (len(BARS) - 1))] for v in scaled)


def main(seed=0):
    rng = np.random.default_rng(seed)
    templates = default_templates()
    for p in RespiratoryPattern:
        lw = generate_waveform(templates[p], rng)
        rate = lw.waveform.sample_rate_hz
        print(f"{p.display_name}  ({len(lw.waveform)} samples at {rate:g} Hz)")
        print("  " + sparkline(lw.waveform.samples))
        for s in lw.segments:
            secs = (s.stop - s.start) / rate
            if s.params.is_apnea:
                print(f"    {s.start / rate:5.1f}s  apnea       {secs:5.1f}s")
            else:
                print(f"    {s.start / rate:5.1f}s  {s.params.kind.value:<11} {secs:5.1f}s"
                      f"  {s.params.bpm:5.1f} bpm  a={s.params.a:.2f}")
        print()


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
