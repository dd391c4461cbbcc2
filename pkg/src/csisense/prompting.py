"""Signal representations and prompt assembly for LLM activity recognition.

Five strategies are supported: a plain zero-shot instruction (``base``), the
same with a physical-model description of each activity (``knowledge``), a
step-by-step reasoning checklist (``cot``), few-shot exemplars (``icl``) and
image input (``multimodal``, wrapping one of the three text templates).
"""

from __future__ import annotations

import io
import re
import struct
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence, Union

import numpy as np

from .core import LABELS, ActivityLabel
from .dsp import AmplitudeSeries
from .errors import ParameterError, UnparseableAnswerError

DATA_PLACEHOLDER = "{time_series_data}"
IMAGE_ATTACHED = "The CSI amplitude plot is attached as an image."
ANSWER_INSTRUCTION = "Output only one word"
DEFAULT_NUM_POINTS = 100
DEFAULT_DECIMALS = 2

BASE_TEMPLATE = (
    "You are given a time series of Channel State Information (CSI) amplitude values "
    "captured in an environment. Your task is to classify the activity into one of the "
    "following four categories: breath, fall, no event, or walk. The provided data "
    "represents the amplitude variations over time. Analyze the pattern and determine the "
    "most appropriate classification label based on the observed fluctuations.\n"
    "Input Data: {time_series_data}\n"
    "No need to explain the reason. Output only one word as the predicted activity label: "
    "breath, fall, no event, or walk."
)

KNOWLEDGE_TEMPLATE = (
    "You are an expert in Channel State Information (CSI)-based human activity recognition. "
    "CSI data reflects the changes in wireless signals as they interact with human movements. "
    "Based on CSI amplitude variations, human activities can be categorized into four types:\n"
    "Walking: Large and multiple changes in amplitude over time.\n"
    "Falling: A single significant peak or trough followed by a relatively stable period.\n"
    "Breathing: Smooth and moderate changes in amplitude over time.\n"
    "No-event: The amplitude remains mostly stable with minimal fluctuations.\n"
    "Input Data: {time_series_data}\n"
    "Your task is to classify the following CSI time series into one of these four "
    "categories.\n"
    "No need to explain the reason. Output only one word as the predicted activity label: "
    "breath, fall, no event, or walk."
)

COT_TEMPLATE = (
    "You are an expert in Channel State Information (CSI)-based human activity recognition. "
    "CSI data reflects the changes in wireless signals as they interact with human movements. "
    "Human bodies, being significant obstacles, cause changes in wireless signals that CSI "
    "can capture.\n"
    "You will receive time series CSI amplitude data recorded when a person is performing an "
    "activity. The person's activity belongs to one of the following categories: Walking, "
    "Falling, Breathing, or No-event.\n"
    "Step-by-Step Analysis of Human Activity:\n"
    "- What is the variation range of the data? If the variation range is very small, does "
    "it suggest a no-event scenario?\n"
    "- Does the data change smoothly over time with a moderate variation range (e.g., less "
    "than 5)? If so, could this indicate breathing?\n"
    "- Identify large peaks or troughs characterized by a significant increase or decrease, "
    "which then return to the overall range.\n"
    "- How many large peaks or troughs are present in the data?\n"
    "- If the data contains only one significant peak or trough (dramatically larger than "
    "others), does it transition into a relatively stable period with minor variations? If "
    "so, does this indicate a falling event?\n"
    "- If there are multiple large peaks and troughs occurring regularly, does this suggest a "
    "walking activity?\n"
    "Final Classification: Based on the above step-by-step analysis, determine the most "
    "appropriate classification for the given time series data.\n"
    "Input Data: {time_series_data}\n"
    "No need to explain the reason. Output only one word as the predicted activity label: "
    "breath, fall, no event, or walk."
)

TEMPLATES = {"base": BASE_TEMPLATE, "knowledge": KNOWLEDGE_TEMPLATE, "cot": COT_TEMPLATE}


# ---------------------------------------------------------------------------
# Representations


@dataclass(frozen=True)
class TextRepresentation:
    rendered: str
    num_points: int
    decimals: int

    def values(self) -> list[float]:
        return [float(v) for v in self.rendered.split(", ")]


@dataclass(frozen=True)
class VisualRepresentation:
    png_bytes: bytes = field(repr=False)
    width_px: int
    height_px: int
    y_limits: tuple[float, float] = (0.0, 1.0)


Representation = Union[TextRepresentation, VisualRepresentation]


def _round_half_up(value: float, decimals: int) -> str:
    quantum = Decimal(1).scaleb(-decimals)
    text = str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))
    if text.startswith("-") and Decimal(text) == 0:
        text = text[1:]
    return text


def downsample_indices(length: int, num_points: int) -> np.ndarray:
    """``num_points`` evenly spread indices into ``length`` samples, ends included."""
    i = np.arange(num_points)
    # round half up of i*(length-1)/(num_points-1), in exact integer arithmetic
    return (2 * i * (length - 1) + (num_points - 1)) // (2 * (num_points - 1))


def to_text(series: AmplitudeSeries, num_points: int = DEFAULT_NUM_POINTS,
            decimals: int = DEFAULT_DECIMALS) -> TextRepresentation:
    """Comma-separated, downsampled rendering of ``series``."""
    if num_points < 2:
        raise ParameterError("num_points must be >= 2")
    if decimals < 0:
        raise ParameterError("decimals must be >= 0")
    if len(series) < num_points:
        raise ParameterError(f"series of length {len(series)} is shorter than {num_points} points")
    picked = series.values[downsample_indices(len(series), num_points)]
    rendered = ", ".join(_round_half_up(v, decimals) for v in picked)
    return TextRepresentation(rendered, num_points, decimals)


def plot_y_limits(values) -> tuple[float, float]:
    """Data range padded by 5%; a flat series gets +-max(5% of level, 0.5)."""
    lo, hi = float(np.min(values)), float(np.max(values))
    span = hi - lo
    if span == 0:
        delta = max(0.05 * abs(lo), 0.5)
        return lo - delta, hi + delta
    return lo - 0.05 * span, hi + 0.05 * span


def to_plot(series: AmplitudeSeries, width_px: int = 800, height_px: int = 400
            ) -> VisualRepresentation:
    """Line plot of amplitude against time, rendered to PNG at the exact pixel size."""
    if width_px < 100 or height_px < 100:
        raise ParameterError("plot dimensions must be at least 100x100 pixels")
    import matplotlib

    matplotlib.use("Agg", force=False)
    from matplotlib.figure import Figure

    dpi = 100
    fig = Figure(figsize=(width_px / dpi, height_px / dpi), dpi=dpi)
    ax = fig.add_subplot()
    ax.plot(series.times, series.values, linewidth=1.0)
    ylim = plot_y_limits(series.values)
    ax.set_ylim(*ylim)
    ax.set_xlim(0.0, series.times[-1] if len(series) > 1 else 1.0 / series.sample_rate)
    ax.set_xlabel("Time (s)")
    ax.set_ylabel("CSI Amplitude")
    fig.tight_layout()
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=dpi, metadata={"Software": None})
    png = buf.getvalue()
    w, h = png_size(png)
    if (w, h) != (width_px, height_px):
        raise RuntimeError(f"rendered {w}x{h} instead of {width_px}x{height_px}")
    return VisualRepresentation(png, width_px, height_px, ylim)


PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def png_size(data: bytes) -> tuple[int, int]:
    """Width and height from a PNG's IHDR chunk."""
    if data[:8] != PNG_SIGNATURE or data[12:16] != b"IHDR":
        raise ParameterError("not a PNG image")
    return struct.unpack(">II", data[16:24])


# ---------------------------------------------------------------------------
# Strategies


@dataclass(frozen=True)
class Exemplar:
    representation: Representation
    label: ActivityLabel


@dataclass(frozen=True)
class CoTExemplar:
    """Input, worked explanation and answer; for custom reasoning prompts."""

    representation: Representation
    explanation: str
    label: ActivityLabel

    def __post_init__(self):
        if not self.explanation.strip():
            raise ParameterError("a chain-of-thought exemplar needs an explanation")


@dataclass(frozen=True)
class PromptStrategy:
    """``name`` is one of base, knowledge, cot, icl, multimodal.

    ``exemplars`` is used by ``icl``; ``sub`` picks the text template used by
    ``icl`` (default base) and ``multimodal`` (default knowledge).
    """

    name: str
    exemplars: tuple[Exemplar, ...] = ()
    sub: str | None = None

    def __post_init__(self):
        if self.name not in ("base", "knowledge", "cot", "icl", "multimodal"):
            raise ParameterError(f"unknown prompt strategy {self.name!r}")
        if self.sub is not None and self.sub not in TEMPLATES:
            raise ParameterError(f"sub-strategy must be one of {sorted(TEMPLATES)}")
        if self.name in TEMPLATES and self.sub is not None:
            raise ParameterError("only icl and multimodal take a sub-strategy")
        object.__setattr__(self, "exemplars", tuple(self.exemplars))

    @classmethod
    def base(cls):
        return cls("base")

    @classmethod
    def knowledge(cls):
        return cls("knowledge")

    @classmethod
    def cot(cls):
        return cls("cot")

    @classmethod
    def icl(cls, exemplars: Sequence[Exemplar], sub: str = "base"):
        return cls("icl", tuple(exemplars), sub)

    @classmethod
    def multimodal(cls, sub: str = "knowledge"):
        return cls("multimodal", (), sub)

    @property
    def template(self) -> str:
        if self.name in TEMPLATES:
            return TEMPLATES[self.name]
        return TEMPLATES[self.sub or ("base" if self.name == "icl" else "knowledge")]

    @property
    def k(self) -> int:
        return len(self.exemplars)


@dataclass(frozen=True)
class PromptBundle:
    text: str
    image: VisualRepresentation | None = None
    expected_answer_set: tuple[str, ...] = tuple(label.value for label in LABELS)
    strategy: str = ""


def build_prompt(strategy: PromptStrategy, representation: Representation) -> PromptBundle:
    """Fill the strategy's template with the signal representation."""
    if strategy.name == "multimodal":
        if not isinstance(representation, VisualRepresentation):
            raise ParameterError("the multimodal strategy needs a visual representation")
        text = strategy.template.replace(DATA_PLACEHOLDER, IMAGE_ATTACHED)
        return PromptBundle(text, representation, strategy=strategy.name)

    if not isinstance(representation, TextRepresentation):
        raise ParameterError(f"the {strategy.name} strategy needs a text representation")
    query = strategy.template.replace(DATA_PLACEHOLDER, representation.rendered)
    if strategy.name != "icl":
        return PromptBundle(query, strategy=strategy.name)

    if not strategy.exemplars:
        raise ParameterError("in-context learning needs at least one exemplar")
    blocks = []
    for i, ex in enumerate(strategy.exemplars, start=1):
        if not isinstance(ex.representation, TextRepresentation):
            raise ParameterError("text prompts need text exemplars")
        blocks.append(f"Example {i}:\nInput Data: {ex.representation.rendered}\n"
                      f"Answer: {ActivityLabel(ex.label).value}\n")
    return PromptBundle("\n".join(blocks) + "\n" + query, strategy=strategy.name)


_LABEL_PATTERN = re.compile(
    "|".join(re.escape(s) for s in sorted((l.value for l in LABELS), key=len, reverse=True))
)


def parse_answer(raw: str) -> ActivityLabel:
    """First activity label mentioned in a model reply.

    Matching is case-insensitive; hyphens and underscores count as spaces so
    "No-event" is recognised.  At equal positions the longest label wins.
    """
    text = re.sub(r"[-_\s]+", " ", raw.lower()).strip(" \t\n.,;:!?\"'`*()[]")
    m = _LABEL_PATTERN.search(text)
    if m is None:
        raise UnparseableAnswerError(raw)
    return ActivityLabel(m.group(0))
