"""Deterministic zero-shot activity classifier.

The rule order follows the step-by-step analysis given to the language
model: check for a near-constant signal, then for one dominant excursion
followed by calm, then for many large excursions, then for smooth moderate
variation.  Every evaluated rule is recorded in the decision trace.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import NamedTuple

from .core import ActivityLabel
from .dsp import AmplitudeSeries, SeriesFeatures, extract_features
from .errors import ParameterError


@dataclass(frozen=True)
class ClassifierConfig:
    noevent_range_max: float = 1.0
    breath_range_max: float = 5.0
    prominence_sigma_factor: float = 3.0
    walk_min_extrema: int = 3
    dominance_ratio: float = 2.0
    stable_tail_std_max: float = 0.5
    smoothness_max_for_breath: float = 0.05

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise ParameterError(f"{name} must be > 0")
        if not self.noevent_range_max < self.breath_range_max:
            raise ParameterError("noevent_range_max must be below breath_range_max")


class TraceStep(NamedTuple):
    step: str
    measured: object
    threshold: object
    outcome: bool


@dataclass(frozen=True)
class Decision:
    label: ActivityLabel
    trace: tuple[TraceStep, ...]
    features: SeriesFeatures = field(compare=False, repr=False, default=None)

    def explain(self) -> str:
        lines = [f"{s.step}: measured={s.measured} threshold={s.threshold} -> {s.outcome}"
                 for s in self.trace]
        lines.append(f"label: {self.label.value}")
        return "\n".join(lines)


def classify(series: AmplitudeSeries, config: ClassifierConfig | None = None) -> Decision:
    """Label a (smoothed) amplitude series by the fixed rule cascade."""
    config = config or ClassifierConfig()
    if len(series) < 3:
        raise ParameterError("classification needs at least 3 samples")
    f = extract_features(series, config)
    trace: list[TraceStep] = []

    def check(step, measured, threshold, outcome):
        trace.append(TraceStep(step, measured, threshold, bool(outcome)))
        return outcome

    def done(label):
        return Decision(label, tuple(trace), f)

    if check("variation_range < noevent_range_max", f.variation_range,
             config.noevent_range_max, f.variation_range < config.noevent_range_max):
        return done(ActivityLabel.NO_EVENT)

    one_large = check("num_large_extrema == 1", f.num_large_extrema, 1,
                      f.num_large_extrema == 1)
    if one_large:
        dominant = check("dominant_ratio >= dominance_ratio", f.dominant_ratio,
                         config.dominance_ratio, f.dominant_ratio >= config.dominance_ratio)
        if dominant and check("post_event_std <= stable_tail_std_max", f.post_event_std,
                              config.stable_tail_std_max,
                              f.post_event_std <= config.stable_tail_std_max):
            return done(ActivityLabel.FALLING)

    if check("num_large_extrema >= walk_min_extrema", f.num_large_extrema,
             config.walk_min_extrema, f.num_large_extrema >= config.walk_min_extrema):
        return done(ActivityLabel.WALKING)

    moderate = check("variation_range < breath_range_max", f.variation_range,
                     config.breath_range_max, f.variation_range < config.breath_range_max)
    if moderate and check("smoothness <= smoothness_max_for_breath", f.smoothness,
                          config.smoothness_max_for_breath,
                          f.smoothness <= config.smoothness_max_for_breath):
        return done(ActivityLabel.BREATHING)

    large = check("fallback: variation_range >= breath_range_max", f.variation_range,
                  config.breath_range_max, f.variation_range >= config.breath_range_max)
    return done(ActivityLabel.WALKING if large else ActivityLabel.BREATHING)
