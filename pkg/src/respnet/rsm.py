"""Respiratory simulation: piecewise sinusoids with offset, drift and noise.

Every segment follows ``y(t) = a sin(b t + phase) + c + d t`` over its own
local time. Segments are joined end-to-start (each new segment is shifted to
begin where the previous one ended) and the sine phase is carried across, so
stitched waveforms have no value jumps at breakpoints. Apnea segments are
pure drift lines; crescendo/decrescendo segments ramp the amplitude linearly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Mapping, Sequence

import numpy as np

DEFAULT_RATE_HZ = 10.0
DEFAULT_WINDOW_S = 60.0


class RespiratoryPattern(IntEnum):
    EUPNEA = 0
    BRADYPNEA = 1
    TACHYPNEA = 2
    BIOTS = 3
    CHEYNE_STOKES = 4
    CENTRAL_APNEA = 5

    @property
    def display_name(self) -> str:
        return _DISPLAY[self]

    @classmethod
    def parse(cls, name) -> "RespiratoryPattern":
        """Accepts indices, enum names and display names in any case.

        >>> RespiratoryPattern.parse("cheyne stokes")
        <RespiratoryPattern.CHEYNE_STOKES: 4>
        """
        if isinstance(name, (int, np.integer)):
            return cls(int(name))
        key = "".join(ch for ch in str(name).lower() if ch.isalnum())
        if key.isdigit():
            return cls(int(key))
        for p in cls:
            if key == p.name.lower().replace("_", ""):
                return p
        if key == "biot":
            return cls.BIOTS
        raise ValueError(f"unknown respiratory pattern {name!r}")


_DISPLAY = {
    RespiratoryPattern.EUPNEA: "Eupnea",
    RespiratoryPattern.BRADYPNEA: "Bradypnea",
    RespiratoryPattern.TACHYPNEA: "Tachypnea",
    RespiratoryPattern.BIOTS: "Biots",
    RespiratoryPattern.CHEYNE_STOKES: "Cheyne-Stokes",
    RespiratoryPattern.CENTRAL_APNEA: "Central-Apnea",
}

PATTERN_NAMES = tuple(p.display_name for p in RespiratoryPattern)


class SegmentKind(str, Enum):
    BREATHING = "breathing"
    APNEA = "apnea"
    CRESCENDO = "crescendo"
    DECRESCENDO = "decrescendo"


DEFAULT_RAMPS = {
    SegmentKind.BREATHING: (1.0, 1.0),
    SegmentKind.APNEA: (1.0, 1.0),
    SegmentKind.CRESCENDO: (0.1, 1.0),
    SegmentKind.DECRESCENDO: (1.0, 0.1),
}


def bpm_to_rad_s(bpm: float) -> float:
    return 2.0 * math.pi * bpm / 60.0


def rad_s_to_bpm(b: float) -> float:
    return b * 60.0 / (2.0 * math.pi)


@dataclass(frozen=True)
class SegmentParams:
    """One piece of the waveform. ``b`` is in rad/s, ``duration`` in seconds.

    ``ramp`` scales the amplitude linearly from ``a*ramp[0]`` to ``a*ramp[1]``.
    """

    a: float
    b: float
    c: float
    d: float
    duration: float
    kind: SegmentKind = SegmentKind.BREATHING
    ramp: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError(f"amplitude and frequency must be >= 0: a={self.a}, b={self.b}")
        if not self.duration > 0:
            raise ValueError(f"segment duration must be > 0, got {self.duration}")

    @property
    def is_apnea(self) -> bool:
        return self.a == 0 or self.b == 0

    @property
    def bpm(self) -> float:
        return rad_s_to_bpm(self.b)


Range = tuple[float, float]


def _range(value, what: str) -> Range:
    lo, hi = (float(value), float(value)) if np.isscalar(value) else map(float, value)
    if not lo <= hi:
        raise ValueError(f"empty range for {what}: [{lo}, {hi}]")
    return lo, hi


@dataclass(frozen=True)
class SegmentRule:
    """Closed sampling ranges for one segment.

    Exactly one of ``duration`` (seconds) or ``breaths`` (a whole number of
    cycles at the drawn rate) sets the segment length.
    """

    kind: SegmentKind = SegmentKind.BREATHING
    a: Range = (0.8, 1.2)
    bpm: Range = (12.0, 20.0)
    c: Range = (-0.1, 0.1)
    d: Range = (-0.005, 0.005)
    duration: Range | None = None
    breaths: tuple[int, int] | None = None
    ramp: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SegmentKind(self.kind))
        for name in ("a", "bpm", "c", "d"):
            object.__setattr__(self, name, _range(getattr(self, name), name))
        if (self.duration is None) == (self.breaths is None):
            raise ValueError("a rule needs exactly one of duration or breaths")
        if self.duration is not None:
            object.__setattr__(self, "duration", _range(self.duration, "duration"))
            if self.duration[0] <= 0:
                raise ValueError("minimum segment duration must be > 0")
        else:
            lo, hi = (int(v) for v in self.breaths)
            if not 1 <= lo <= hi:
                raise ValueError(f"invalid breath count range [{lo}, {hi}]")
            if self.bpm[0] <= 0:
                raise ValueError("breath-count rules need a positive rate")
            object.__setattr__(self, "breaths", (lo, hi))
        if self.a[0] < 0 or self.bpm[0] < 0:
            raise ValueError("amplitude and rate ranges must be nonnegative")
        if self.ramp is None:
            object.__setattr__(self, "ramp", DEFAULT_RAMPS[self.kind])
        else:
            object.__setattr__(self, "ramp", tuple(float(r) for r in self.ramp))


@dataclass(frozen=True)
class RepeatPolicy:
    """How rules cycle to fill the window.

    ``start``: ``"first"`` always begins with rule 0, ``"random"`` with a
    uniformly drawn rule. ``random_lead_in`` drops a random fraction of the
    first segment so the window opens mid-segment. With
    ``require_full_apnea`` the window is redrawn until it holds at least one
    complete apnea segment.
    """

    start: str = "first"
    random_lead_in: bool = False
    require_full_apnea: bool = False
    max_attempts: int = 200

    def __post_init__(self):
        if self.start not in ("first", "random"):
            raise ValueError(f"repeat start must be 'first' or 'random', got {self.start!r}")


@dataclass(frozen=True)
class PatternTemplate:
    pattern: RespiratoryPattern
    segment_rules: tuple[SegmentRule, ...]
    repeat: RepeatPolicy = RepeatPolicy()
    noise_sigma: float = 0.03
    window_seconds: float = DEFAULT_WINDOW_S
    sample_rate_hz: float = DEFAULT_RATE_HZ

    def __post_init__(self):
        object.__setattr__(self, "pattern", RespiratoryPattern.parse(self.pattern))
        object.__setattr__(self, "segment_rules", tuple(self.segment_rules))
        if not self.segment_rules:
            raise ValueError("a template needs at least one segment rule")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not (self.window_seconds > 0 and self.sample_rate_hz > 0):
            raise ValueError("window_seconds and sample_rate_hz must be > 0")
        if self.repeat.require_full_apnea and not any(
            r.kind is SegmentKind.APNEA for r in self.segment_rules
        ):
            raise ValueError("require_full_apnea set on a template without apnea rules")

    @property
    def n_samples(self) -> int:
        return int(round(self.window_seconds * self.sample_rate_hz))


def _breathing(**kw) -> SegmentRule:
    return SegmentRule(kind=SegmentKind.BREATHING, **kw)


def _apnea(duration: Range) -> SegmentRule:
    return SegmentRule(kind=SegmentKind.APNEA, a=(0.0, 0.0), bpm=(0.0, 0.0), duration=duration)


def default_templates(
    sample_rate_hz: float = DEFAULT_RATE_HZ,
    window_seconds: float = DEFAULT_WINDOW_S,
    noise_sigma: float = 0.03,
) -> dict[RespiratoryPattern, PatternTemplate]:
    P = RespiratoryPattern
    apnea_window = RepeatPolicy(start="random", random_lead_in=True, require_full_apnea=True)
    rules = {
        P.EUPNEA: ([_breathing(a=(0.8, 1.2), bpm=(12, 20), breaths=(2, 4))], RepeatPolicy()),
        P.BRADYPNEA: ([_breathing(a=(0.8, 1.2), bpm=(5, 11), breaths=(1, 3))], RepeatPolicy()),
        P.TACHYPNEA: ([_breathing(a=(0.4, 1.0), bpm=(21, 35), breaths=(3, 6))], RepeatPolicy()),
        P.BIOTS: (
            [_breathing(a=(0.8, 1.2), bpm=(14, 25), breaths=(3, 6)), _apnea((10, 25))],
            apnea_window,
        ),
        P.CHEYNE_STOKES: (
            [
                SegmentRule(kind=SegmentKind.CRESCENDO, a=(0.8, 1.2), bpm=(12, 20), duration=(15, 30)),
                SegmentRule(kind=SegmentKind.DECRESCENDO, a=(0.8, 1.2), bpm=(12, 20), duration=(15, 30)),
                _apnea((10, 20)),
            ],
            apnea_window,
        ),
        P.CENTRAL_APNEA: (
            [_breathing(a=(0.8, 1.2), bpm=(12, 20), breaths=(7, 12)), _apnea((10, 30))],
            apnea_window,
        ),
    }
    return {
        p: PatternTemplate(
            pattern=p,
            segment_rules=tuple(r),
            repeat=policy,
            noise_sigma=noise_sigma,
            window_seconds=window_seconds,
            sample_rate_hz=sample_rate_hz,
        )
        for p, (r, policy) in rules.items()
    }


# ---------------------------------------------------------------- waveforms


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    sample_rate_hz: float

    def __eq__(self, other):
        if not isinstance(other, Waveform):
            return NotImplemented
        return self.sample_rate_hz == other.sample_rate_hz and np.array_equal(
            self.samples, other.samples
        )

    __hash__ = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("a waveform needs a nonempty 1-D sample array")
        if not np.all(np.isfinite(s)):
            raise ValueError("waveform contains non-finite samples")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample rate must be > 0, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class SegmentSpan:
    """Where a segment landed in the final window (sample indices, half-open)."""

    start: int
    stop: int
    params: SegmentParams
    complete: bool


@dataclass(frozen=True)
class LabeledWaveform:
    waveform: Waveform
    label: RespiratoryPattern
    segments: tuple[SegmentSpan, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "label", RespiratoryPattern(int(self.label)))


@dataclass(frozen=True)
class RenderedSegment:
    samples: np.ndarray
    phase_end: float
    value_end: float
    params: SegmentParams | None = None


def sample_segment_params(rule: SegmentRule, rng: np.random.Generator) -> SegmentParams:
    """Draw every field uniformly from its closed range."""
    a = rng.uniform(*rule.a)
    bpm = rng.uniform(*rule.bpm)
    c = rng.uniform(*rule.c)
    d = rng.uniform(*rule.d)
    if rule.breaths is not None:
        duration = int(rng.integers(rule.breaths[0], rule.breaths[1] + 1)) * 60.0 / bpm
    else:
        duration = rng.uniform(*rule.duration)
    if rule.kind is SegmentKind.APNEA:
        a, bpm = 0.0, 0.0
    return SegmentParams(
        a=a, b=bpm_to_rad_s(bpm), c=c, d=d, duration=duration, kind=rule.kind, ramp=rule.ramp
    )


def _segment_length(duration: float, rate: float) -> int:
    # samples on [0, duration); the epsilon absorbs float error in duration*rate
    return max(1, int(math.ceil(duration * rate - 1e-9)))


def _segment_values(p: SegmentParams, t: np.ndarray, phase0: float) -> np.ndarray:
    r0, r1 = p.ramp
    amp = p.a * (r0 + (r1 - r0) * t / p.duration)
    return amp * np.sin(p.b * t + phase0) + p.c + p.d * t


def render_segment(
    params: SegmentParams,
    sample_rate_hz: float,
    phase0: float = 0.0,
    value0: float | None = None,
) -> RenderedSegment:
    """Sample one segment on ``t_k = k / rate`` over ``[0, duration)``.

    With ``value0`` the whole segment is shifted so its first sample equals
    ``value0``. ``phase_end`` is wrapped to ``[0, 2*pi)``.
    """
    if not sample_rate_hz > 0:
        raise ValueError(f"sample rate must be > 0, got {sample_rate_hz}")
    n = _segment_length(params.duration, sample_rate_hz)
    t = np.arange(n) / sample_rate_hz
    y = _segment_values(params, t, phase0)
    y_end = float(_segment_values(params, np.array([params.duration]), phase0)[0])
    if value0 is not None:
        shift = value0 - y[0]
        y = y + shift
        y_end += shift
    phase_end = math.fmod(phase0 + params.b * params.duration, 2.0 * math.pi)
    return RenderedSegment(samples=y, phase_end=phase_end, value_end=y_end, params=params)


def stitch_segments(segments: Sequence[RenderedSegment], sample_rate_hz: float) -> Waveform:
    """Concatenate segments, shifting each to start at the previous end value."""
    if not segments:
        raise ValueError("no segments")
    parts = [segments[0].samples]
    level = segments[0].value_end
    for seg in segments[1:]:
        shift = level - seg.samples[0]
        parts.append(seg.samples + shift)
        level = seg.value_end + shift
    return Waveform(np.concatenate(parts), sample_rate_hz)


def add_gaussian_noise(waveform: Waveform, sigma: float, rng: np.random.Generator) -> Waveform:
    if sigma < 0:
        raise ValueError(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return waveform
    noisy = waveform.samples + rng.normal(0.0, sigma, size=waveform.samples.size)
    return Waveform(noisy, waveform.sample_rate_hz)


def _draw_window(template: PatternTemplate, rng: np.random.Generator):
    rate = template.sample_rate_hz
    n_target = template.n_samples
    rules = template.segment_rules
    k = int(rng.integers(len(rules))) if template.repeat.start == "random" else 0
    phase = rng.uniform(0.0, 2.0 * math.pi)
    rendered: list[RenderedSegment] = []
    skip = None
    total = 0
    while skip is None or total < skip + n_target:
        params = sample_segment_params(rules[k % len(rules)], rng)
        seg = render_segment(params, rate, phase0=phase)
        if not params.is_apnea:
            phase = seg.phase_end
        rendered.append(seg)
        if skip is None:
            skip = int(rng.integers(len(seg.samples))) if template.repeat.random_lead_in else 0
        total += len(seg.samples)
        k += 1
    wave = stitch_segments(rendered, rate)
    samples = wave.samples[skip : skip + n_target]
    spans = []
    pos = -skip
    for seg in rendered:
        start, stop = pos, pos + len(seg.samples)
        pos = stop
        if stop <= 0 or start >= n_target:
            continue
        spans.append(
            SegmentSpan(
                start=max(start, 0),
                stop=min(stop, n_target),
                params=seg.params,
                complete=start >= 0 and stop <= n_target,
            )
        )
    return samples, tuple(spans)


def _mean_breathing_amplitude(spans: Sequence[SegmentSpan]) -> float:
    weights, amps = [], []
    for s in spans:
        if not s.params.is_apnea:
            weights.append(s.stop - s.start)
            amps.append(s.params.a * 0.5 * (s.params.ramp[0] + s.params.ramp[1]))
    return float(np.average(amps, weights=weights)) if weights else 0.0


def generate_waveform(template: PatternTemplate, rng: np.random.Generator) -> LabeledWaveform:
    """One labeled window of exactly ``template.n_samples`` samples."""
    for _ in range(template.repeat.max_attempts):
        samples, spans = _draw_window(template, rng)
        if not template.repeat.require_full_apnea or any(
            s.complete and s.params.kind is SegmentKind.APNEA for s in spans
        ):
            break
    else:
        raise RuntimeError(
            f"{template.pattern.display_name}: no window with a complete apnea after "
            f"{template.repeat.max_attempts} attempts; check the template ranges"
        )
    wave = Waveform(samples, template.sample_rate_hz)
    sigma = template.noise_sigma * _mean_breathing_amplitude(spans)
    wave = add_gaussian_noise(wave, sigma, rng)
    return LabeledWaveform(wave, template.pattern, spans)


def generate_dataset(
    counts: Mapping[RespiratoryPattern, int] | Sequence[int],
    templates: Mapping[RespiratoryPattern, PatternTemplate] | None,
    rng: np.random.Generator,
) -> list[LabeledWaveform]:
    """``counts[p]`` windows of each pattern, shuffled.

    Generation order is class-major and each window draws from its own child
    generator, so the result depends only on the seed and the counts.
    """
    if templates is None:
        templates = default_templates()
    if not isinstance(counts, Mapping):
        counts = {RespiratoryPattern(i): n for i, n in enumerate(counts)}
    jobs = []
    for p in RespiratoryPattern:
        n = int(counts.get(p, 0))
        if n < 0:
            raise ValueError(f"negative count for {p.display_name}: {n}")
        jobs += [p] * n
    children = rng.spawn(len(jobs)) if jobs else []
    data = [generate_waveform(templates[p], child) for p, child in zip(jobs, children)]
    order = rng.permutation(len(data))
    return [data[i] for i in order]


def with_overrides(template: PatternTemplate, **changes) -> PatternTemplate:
    return replace(template, **changes)


def reference_test_mix() -> dict[RespiratoryPattern, int]:
    """Class counts of the 605-recording real-world test set."""
    return dict(zip(RespiratoryPattern, (108, 108, 108, 87, 97, 97)))
