"""Amplitude extraction, Savitzky-Golay smoothing, extrema and features."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from .core import CsiSegment
from .errors import ParameterError

if TYPE_CHECKING:
    from .classifier import ClassifierConfig

DEFAULT_WINDOW = 31
DEFAULT_POLY_ORDER = 3


@dataclass(frozen=True, eq=False)
class AmplitudeSeries:
    """Real-valued CSI amplitude samples at a fixed rate."""

    values: np.ndarray
    sample_rate: float

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise ParameterError("an amplitude series needs at least one sample")
        if not np.all(np.isfinite(values)):
            raise ParameterError("amplitude values must be finite")
        if not self.sample_rate > 0:
            raise ParameterError("sample_rate must be > 0")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) / self.sample_rate

    def with_values(self, values) -> AmplitudeSeries:
        return AmplitudeSeries(values, self.sample_rate)


def amplitude_of(segment: CsiSegment, subcarrier_index: int) -> AmplitudeSeries:
    """|H| of one subcarrier across the segment."""
    if not 0 <= subcarrier_index < segment.num_subcarriers:
        raise ParameterError(
            f"subcarrier index {subcarrier_index} out of range 0..{segment.num_subcarriers - 1}"
        )
    return AmplitudeSeries(np.abs(segment.csi[:, subcarrier_index]), segment.sample_rate)


def mean_amplitude(segment: CsiSegment) -> AmplitudeSeries:
    """Per-frame mean of the subcarrier amplitudes."""
    if segment.num_frames == 0 or segment.num_subcarriers == 0:
        raise ParameterError("segment is empty")
    return AmplitudeSeries(np.abs(segment.csi).mean(axis=1), segment.sample_rate)


# ---------------------------------------------------------------------------
# Savitzky-Golay


@lru_cache(maxsize=32)
def _savgol_projection(window: int, poly_order: int) -> np.ndarray:
    """Hat matrix of the least-squares polynomial fit over one window.

    Row ``i`` holds the weights that evaluate the fitted polynomial at
    position ``i`` of the window; the middle row is the usual smoothing
    kernel.
    """
    x = np.arange(window, dtype=float) - (window - 1) / 2
    vander = np.vander(x, poly_order + 1, increasing=True)
    proj = vander @ np.linalg.pinv(vander)
    proj.setflags(write=False)
    return proj


def savgol_coefficients(window: int, poly_order: int) -> np.ndarray:
    """Weights that produce the smoothed value at the window center."""
    _check_savgol(window, poly_order)
    return _savgol_projection(window, poly_order)[window // 2].copy()


def _check_savgol(window: int, poly_order: int) -> None:
    if poly_order < 0:
        raise ParameterError("poly_order must be >= 0")
    if window % 2 != 1:
        raise ParameterError(f"window must be odd, got {window}")
    if window < poly_order + 2:
        raise ParameterError(f"window {window} too small for poly_order {poly_order}")


def savgol_smooth(series: AmplitudeSeries, window: int = DEFAULT_WINDOW,
                  poly_order: int = DEFAULT_POLY_ORDER) -> AmplitudeSeries:
    """Savitzky-Golay smoothing with polynomial-fit edges.

    Interior samples take the value of the local least-squares polynomial
    at the window center.  The first and last ``window // 2`` samples are
    evaluated from the polynomial fitted to the first and last full window,
    so the output has the same length as the input.
    """
    _check_savgol(window, poly_order)
    x = series.values
    n = x.size
    if n < window:
        raise ParameterError(f"series of length {n} is shorter than window {window}")
    proj = _savgol_projection(window, poly_order)
    half = window // 2
    out = np.empty(n)
    # correlation with the center row; the kernel is symmetric
    out[half:n - half] = np.convolve(x, proj[half][::-1], mode="valid")
    out[:half] = proj[:half] @ x[:window]
    out[n - half:] = proj[half + 1:] @ x[n - window:]
    return series.with_values(out)


# ---------------------------------------------------------------------------
# Extrema and topographic prominence


class Extremum(NamedTuple):
    index: int
    value: float
    prominence: float
    kind: str  # "peak" or "trough"


@dataclass(frozen=True)
class PeakSet:
    """Extrema ordered by index."""

    extrema: tuple[Extremum, ...] = ()

    def __len__(self) -> int:
        return len(self.extrema)

    def __iter__(self):
        return iter(self.extrema)

    @property
    def peaks(self) -> tuple[Extremum, ...]:
        return tuple(e for e in self.extrema if e.kind == "peak")

    @property
    def troughs(self) -> tuple[Extremum, ...]:
        return tuple(e for e in self.extrema if e.kind == "trough")

    @property
    def prominences(self) -> np.ndarray:
        return np.array([e.prominence for e in self.extrema], dtype=float)


def _local_maxima(x: np.ndarray) -> np.ndarray:
    """Leftmost index of every strict interior maximum, plateaus included."""
    n = x.size
    if n < 3:
        return np.empty(0, dtype=int)
    # collapse runs of equal values
    starts = np.flatnonzero(np.r_[True, x[1:] != x[:-1]])
    vals = x[starts]
    if vals.size < 3:
        return np.empty(0, dtype=int)
    is_max = (vals[1:-1] > vals[:-2]) & (vals[1:-1] > vals[2:])
    return starts[1:-1][is_max]


def peak_prominences(x: np.ndarray, peaks: np.ndarray) -> np.ndarray:
    """Topographic prominence of each peak in ``x``.

    From the peak, each side is searched up to the closest strictly higher
    sample (or the border) and its lowest point taken; the prominence is the
    peak height above the higher of those two lowest points.
    """
    x = np.asarray(x, dtype=float)
    peaks = np.asarray(peaks, dtype=int)
    if peaks.size == 0:
        return np.empty(0)
    left_hi, right_hi = _higher_neighbours(x, peaks)
    prom = np.empty(peaks.size)
    for k, p in enumerate(peaks):
        left_min = x[max(left_hi[k], 0):p + 1].min()
        right_min = x[p:(right_hi[k] if right_hi[k] >= 0 else x.size - 1) + 1].min()
        prom[k] = x[p] - max(left_min, right_min)
    return prom


def _higher_neighbours(x: np.ndarray, peaks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closest strictly higher sample left and right of each peak (-1 if none)."""
    n = x.size
    prev_higher = np.full(n, -1)
    stack: list[int] = []
    for i in range(n):
        while stack and x[stack[-1]] <= x[i]:
            stack.pop()
        if stack:
            prev_higher[i] = stack[-1]
        stack.append(i)
    next_higher = np.full(n, -1)
    stack = []
    for i in range(n - 1, -1, -1):
        while stack and x[stack[-1]] <= x[i]:
            stack.pop()
        if stack:
            next_higher[i] = stack[-1]
        stack.append(i)
    return prev_higher[peaks], next_higher[peaks]


def detect_extrema(series: AmplitudeSeries | np.ndarray,
                   prominence_threshold: float = 0.0) -> PeakSet:
    """Local maxima and minima whose topographic prominence reaches the threshold.

    Troughs are the peaks of the negated series.  Plateaus report their
    leftmost index; the first and last samples are never extrema.
    """
    if prominence_threshold < 0:
        raise ParameterError("prominence_threshold must be >= 0")
    x = series.values if isinstance(series, AmplitudeSeries) else np.asarray(series, dtype=float)
    found = []
    for kind, signal in (("peak", x), ("trough", -x)):
        idx = _local_maxima(signal)
        prom = peak_prominences(signal, idx)
        keep = prom >= prominence_threshold
        found.extend(Extremum(int(i), float(x[i]), float(p), kind)
                     for i, p in zip(idx[keep], prom[keep]))
    found.sort(key=lambda e: e.index)
    return PeakSet(tuple(found))


# ---------------------------------------------------------------------------
# Features


@dataclass(frozen=True)
class SeriesFeatures:
    variation_range: float
    num_large_extrema: int
    dominant_ratio: float
    post_event_std: float
    smoothness: float
    large_threshold: float
    series_std: float

    def as_dict(self) -> dict:
        return {
            "variation_range": self.variation_range,
            "num_large_extrema": self.num_large_extrema,
            "dominant_ratio": self.dominant_ratio,
            "post_event_std": self.post_event_std,
            "smoothness": self.smoothness,
            "large_threshold": self.large_threshold,
            "series_std": self.series_std,
        }


def _event_end(x: np.ndarray, index: int, kind: str) -> int:
    """First sample where the monotone return from extremum ``index`` ends."""
    sign = 1.0 if kind == "peak" else -1.0
    j = index
    while j + 1 < x.size and sign * (x[j + 1] - x[j]) < 0:
        j += 1
    return j


def extract_features(series: AmplitudeSeries, config: ClassifierConfig | None = None
                     ) -> SeriesFeatures:
    """Shape features the rule classifier reasons over.

    An extremum is *large* when its prominence is at least
    ``config.prominence_sigma_factor`` times the series standard deviation.
    ``dominant_ratio`` compares the two most prominent extrema of any size
    (``inf`` with fewer than two), and ``post_event_std`` is the spread of
    the samples once the series has stopped moving back from the most
    prominent extremum.
    """
    if config is None:
        from .classifier import ClassifierConfig
        config = ClassifierConfig()
    x = series.values
    if x.size < 3:
        raise ParameterError("feature extraction needs at least 3 samples")
    vrange = float(x.max() - x.min())
    if vrange <= 1e-12 * max(1.0, float(np.abs(x).max())):
        vrange = 0.0  # rounding residue of a constant signal
    std = float(x.std()) if vrange > 0 else 0.0
    threshold = config.prominence_sigma_factor * std
    extrema = detect_extrema(x, 0.0)
    prom = extrema.prominences
    num_large = int(np.count_nonzero(prom >= threshold)) if vrange > 0 else 0

    if prom.size >= 2:
        top2 = np.sort(prom)[-2:]
        dominant_ratio = float(top2[1] / top2[0]) if top2[0] > 0 else math.inf
    else:
        dominant_ratio = math.inf

    if prom.size:
        top = extrema.extrema[int(np.argmax(prom))]
        tail = x[_event_end(x, top.index, top.kind):]
        post_std = float(tail.std()) if tail.size > 1 else 0.0
    else:
        post_std = std

    smoothness = float(np.abs(np.diff(x)).mean() / vrange) if vrange > 0 else 0.0
    return SeriesFeatures(vrange, num_large, dominant_ratio, post_std, smoothness,
                          threshold, std)
