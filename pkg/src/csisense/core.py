"""CSI domain types and the single-reflector multipath simulator.

The channel seen by every subcarrier is modelled as a fixed static vector
plus one rotating dynamic vector::

    H(t) = Hs + a * exp(-j * 2*pi * d(t) / wavelength)

where ``Hs = static_amplitude * exp(j * static_phase)``, ``a`` is the
dynamic attenuation and ``d(t)`` the length of the reflected path.  Every
wavelength of path change rotates the dynamic vector once around the IQ
plane, which is what turns body motion into amplitude peaks and troughs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ParameterError

SPEED_OF_LIGHT = 299_792_458.0
CARRIER_FREQUENCY = 5.32e9
DEFAULT_WAVELENGTH = 0.0564  # ~ c / 5.32 GHz, rounded
DEFAULT_SAMPLE_RATE = 1000.0
DEFAULT_DURATION = 5.0
DEFAULT_NUM_SUBCARRIERS = 30
DEFAULT_STATIC_AMPLITUDE = 10.0
DEFAULT_DYNAMIC_ATTENUATION = 3.0
DEFAULT_NOISE_SIGMA = 0.1


class ActivityLabel(str, enum.Enum):
    """The four activity classes, valued by their canonical answer strings."""

    BREATHING = "breath"
    WALKING = "walk"
    FALLING = "fall"
    NO_EVENT = "no event"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def from_string(cls, text: str) -> ActivityLabel:
        """Exact (case-insensitive) lookup by canonical string or member name."""
        key = text.strip().lower()
        for label in cls:
            if key in (label.value, label.name.lower(), label.name.lower().replace("_", " ")):
                return label
        raise ParameterError(f"unknown activity label {text!r}")


# Canonical order used for confusion matrices and reports.
LABELS: tuple[ActivityLabel, ...] = (
    ActivityLabel.BREATHING,
    ActivityLabel.WALKING,
    ActivityLabel.FALLING,
    ActivityLabel.NO_EVENT,
)


# ---------------------------------------------------------------------------
# Path trajectories d(t)


class PathTrajectory:
    """Length of the reflected path, in meters, as a function of time."""

    kind: str = ""

    def __call__(self, t) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(data: dict) -> PathTrajectory:
        kind = data.get("kind")
        params = {k: v for k, v in data.items() if k != "kind"}
        cls = _TRAJECTORY_KINDS.get(kind)
        if cls is None:
            raise ParameterError(f"unknown trajectory kind {kind!r}")
        if cls is PiecewisePath:
            return PiecewisePath([tuple(k) for k in params["knots"]])
        return cls(**params)


@dataclass(frozen=True)
class ConstantPath(PathTrajectory):
    d0: float
    kind = "constant"

    def __post_init__(self):
        if not self.d0 > 0:
            raise ParameterError("path length must be positive")

    def __call__(self, t):
        return np.full(np.shape(t), float(self.d0))

    def to_dict(self):
        return {"kind": self.kind, "d0": self.d0}


@dataclass(frozen=True)
class LinearPath(PathTrajectory):
    """``d(t) = d0 + velocity * t``; velocity may be negative."""

    d0: float
    velocity: float
    kind = "linear"

    def __post_init__(self):
        if not self.d0 > 0:
            raise ParameterError("path length must be positive")

    def __call__(self, t):
        return self.d0 + self.velocity * np.asarray(t, dtype=float)

    def to_dict(self):
        return {"kind": self.kind, "d0": self.d0, "velocity": self.velocity}


@dataclass(frozen=True)
class PiecewisePath(PathTrajectory):
    """Linear interpolation between ``(t, d)`` knots, constant outside them."""

    knots: tuple[tuple[float, float], ...]
    kind = "piecewise"

    def __init__(self, knots: Sequence[tuple[float, float]]):
        knots = tuple((float(t), float(d)) for t, d in knots)
        if not knots:
            raise ParameterError("piecewise trajectory needs at least one knot")
        times = np.array([k[0] for k in knots])
        if np.any(np.diff(times) <= 0):
            raise ParameterError("piecewise knot times must strictly increase")
        if any(d <= 0 for _, d in knots):
            raise ParameterError("path length must be positive")
        object.__setattr__(self, "knots", knots)

    def __call__(self, t):
        ts, ds = zip(*self.knots)
        return np.interp(np.asarray(t, dtype=float), ts, ds)

    def to_dict(self):
        return {"kind": self.kind, "knots": [list(k) for k in self.knots]}


@dataclass(frozen=True)
class SinusoidalPath(PathTrajectory):
    """``d(t) = d0 + displacement_amplitude * sin(2*pi*frequency*t + phase)``."""

    d0: float
    displacement_amplitude: float
    frequency: float
    phase: float = 0.0
    kind = "sinusoidal"

    def __post_init__(self):
        if self.displacement_amplitude < 0 or self.frequency < 0:
            raise ParameterError("displacement amplitude and frequency must be >= 0")
        if not self.d0 - self.displacement_amplitude > 0:
            raise ParameterError("path length must stay positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.d0 + self.displacement_amplitude * np.sin(
            2 * np.pi * self.frequency * t + self.phase
        )

    def to_dict(self):
        return {
            "kind": self.kind,
            "d0": self.d0,
            "displacement_amplitude": self.displacement_amplitude,
            "frequency": self.frequency,
            "phase": self.phase,
        }


_TRAJECTORY_KINDS = {
    cls.kind: cls for cls in (ConstantPath, LinearPath, PiecewisePath, SinusoidalPath)
}


# ---------------------------------------------------------------------------
# Scenario parameters and segments


@dataclass(frozen=True)
class ScenarioParams:
    """Everything :func:`simulate` needs to synthesize one segment."""

    path_trajectory: PathTrajectory
    static_amplitude: float = DEFAULT_STATIC_AMPLITUDE
    static_phase: float = 0.0
    dynamic_attenuation: float = DEFAULT_DYNAMIC_ATTENUATION
    wavelength: float = DEFAULT_WAVELENGTH
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    rng_seed: int = 0
    label: ActivityLabel | None = None

    def __post_init__(self):
        if self.path_trajectory is None:
            raise ParameterError("a path trajectory is required")
        if not self.static_amplitude > 0:
            raise ParameterError("static_amplitude must be > 0")
        if not self.dynamic_attenuation >= 0:
            raise ParameterError("dynamic_attenuation must be >= 0")
        if not self.wavelength > 0:
            raise ParameterError("wavelength must be > 0")
        if not self.noise_sigma >= 0:
            raise ParameterError("noise_sigma must be >= 0")
        if self.rng_seed < 0:
            raise ParameterError("rng_seed must be non-negative")
        if self.label is ActivityLabel.NO_EVENT and self.dynamic_attenuation != 0:
            raise ParameterError("a no-event scenario has no dynamic component")

    @property
    def static_vector(self) -> complex:
        return self.static_amplitude * complex(math.cos(self.static_phase), math.sin(self.static_phase))

    def amplitude_bounds(self) -> tuple[float, float]:
        """Destructive and constructive limits of the noise-free amplitude."""
        return (
            abs(self.static_amplitude - self.dynamic_attenuation),
            self.static_amplitude + self.dynamic_attenuation,
        )


class CsiFrame(NamedTuple):
    """One CSI packet: a timestamp and one complex value per subcarrier."""

    timestamp: float
    subcarriers: tuple[complex, ...]


@dataclass(frozen=True, eq=False)
class CsiSegment:
    """A fixed-duration run of CSI frames.

    ``csi`` has shape ``(num_frames, num_subcarriers)`` and complex dtype;
    ``timestamps`` holds seconds since the segment start.
    """

    csi: np.ndarray
    timestamps: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE
    duration: float = DEFAULT_DURATION
    label: ActivityLabel | None = None

    def __post_init__(self):
        csi = np.asarray(self.csi, dtype=complex)
        ts = np.asarray(self.timestamps, dtype=float)
        if csi.ndim != 2:
            raise ParameterError("csi must be a 2-D (frames x subcarriers) array")
        if not (self.sample_rate > 0 and self.duration > 0):
            raise ParameterError("sample_rate and duration must be > 0")
        if ts.shape != (csi.shape[0],):
            raise ParameterError("need exactly one timestamp per frame")
        expected = round(self.sample_rate * self.duration)
        if csi.shape[0] != expected:
            raise ParameterError(
                f"segment has {csi.shape[0]} frames, expected {expected} "
                f"({self.sample_rate} Hz x {self.duration} s)"
            )
        if np.any(np.diff(ts) <= 0):
            raise ParameterError("timestamps must strictly increase")
        csi.setflags(write=False)
        ts.setflags(write=False)
        object.__setattr__(self, "csi", csi)
        object.__setattr__(self, "timestamps", ts)

    @classmethod
    def from_frames(cls, frames: Sequence[CsiFrame], sample_rate=DEFAULT_SAMPLE_RATE,
                    duration=DEFAULT_DURATION, label=None) -> CsiSegment:
        if not frames:
            raise ParameterError("a segment needs at least one frame")
        widths = {len(f.subcarriers) for f in frames}
        if len(widths) != 1:
            raise ParameterError("every frame must carry the same number of subcarriers")
        csi = np.array([f.subcarriers for f in frames], dtype=complex)
        ts = np.array([f.timestamp for f in frames], dtype=float)
        return cls(csi, ts, sample_rate, duration, label)

    @property
    def num_frames(self) -> int:
        return self.csi.shape[0]

    @property
    def num_subcarriers(self) -> int:
        return self.csi.shape[1]

    @property
    def frames(self) -> list[CsiFrame]:
        return [CsiFrame(float(t), tuple(complex(v) for v in row))
                for t, row in zip(self.timestamps, self.csi)]

    def equals(self, other: CsiSegment) -> bool:
        """Exact numeric equality of timestamps and CSI values."""
        return (
            self.csi.shape == other.csi.shape
            and np.array_equal(self.csi, other.csi)
            and np.array_equal(self.timestamps, other.timestamps)
        )


# ---------------------------------------------------------------------------
# Simulation


def simulate(params: ScenarioParams, sample_rate: float = DEFAULT_SAMPLE_RATE,
             duration: float = DEFAULT_DURATION,
             num_subcarriers: int = DEFAULT_NUM_SUBCARRIERS) -> CsiSegment:
    """Synthesize a CSI segment from ``params``.

    All subcarriers share the noise-free channel value; each gets its own
    circular Gaussian noise with standard deviation ``noise_sigma`` on I and
    on Q.  The result depends only on the arguments (noise is drawn from
    ``params.rng_seed``).
    """
    if not (sample_rate > 0 and duration > 0):
        raise ParameterError("sample_rate and duration must be > 0")
    if num_subcarriers < 1:
        raise ParameterError("need at least one subcarrier")
    n = round(sample_rate * duration)
    t = np.arange(n) / sample_rate
    d = np.asarray(params.path_trajectory(t), dtype=float)
    if d.shape != t.shape or np.any(~np.isfinite(d)) or np.any(d <= 0):
        raise ParameterError("path trajectory must be finite and positive over the segment")

    h = params.static_vector + params.dynamic_attenuation * np.exp(
        -2j * np.pi * d / params.wavelength
    )
    csi = np.repeat(h[:, None], num_subcarriers, axis=1)
    if params.noise_sigma > 0:
        rng = np.random.default_rng(params.rng_seed)
        noise = rng.normal(0.0, params.noise_sigma, size=(n, num_subcarriers, 2))
        csi = csi + noise[..., 0] + 1j * noise[..., 1]
    return CsiSegment(csi, t, sample_rate, duration, params.label)


def relative_phase(params: ScenarioParams, d) -> np.ndarray:
    """Angle of the dynamic vector relative to the static one, for path length ``d``."""
    return -2 * np.pi * np.asarray(d, dtype=float) / params.wavelength - params.static_phase


def _path_with_phase(base: float, target: float, static_phase: float, wavelength: float) -> float:
    """Smallest path length >= ``base`` whose relative phase equals ``target``."""
    # relative phase = -2*pi*d/wavelength - static_phase  (mod 2*pi)
    frac = ((-(target + static_phase)) / (2 * np.pi)) % 1.0
    d = (math.floor(base / wavelength) + frac) * wavelength
    return d if d >= base else d + wavelength


# Scenario randomization ranges.
WALK_SPEED_RANGE = (0.5, 1.5)          # m/s of path change
BREATH_DISPLACEMENT_RANGE = (0.005, 0.025)  # m
BREATH_RATE_RANGE = (0.2, 0.5)         # Hz
BREATH_ATTENUATION_RANGE = (1.5, 2.2)  # chest echo is weaker than a whole body
FALL_ONSET_RANGE = (0.5, 3.0)          # s
FALL_FAST_DURATION_RANGE = (0.34, 0.40)  # s
FALL_SETTLE_DURATION_RANGE = (0.08, 0.10)  # s
FALL_ROTATION_RATE_RANGE = (300.0, 400.0)  # turns per second of the dynamic vector


def make_scenario(label: ActivityLabel | str, seed: int, *,
                  static_amplitude: float = DEFAULT_STATIC_AMPLITUDE,
                  dynamic_attenuation: float = DEFAULT_DYNAMIC_ATTENUATION,
                  wavelength: float = DEFAULT_WAVELENGTH,
                  noise_sigma: float = DEFAULT_NOISE_SIGMA,
                  duration: float = DEFAULT_DURATION) -> ScenarioParams:
    """Draw seeded scenario parameters with the physical signature of ``label``.

    Walking
        Constant-velocity path change of 0.5 to 1.5 m/s over the whole
        segment: many full rotations, hence many peaks and troughs.
    Falling
        Stationary, then a burst of at least 3 wavelengths of path change
        inside ~0.5 s, then stationary again.  The burst rotates the dynamic
        vector tens of times per second (flattened by smoothing) and ends
        with one slower half turn through the constructive or destructive
        extreme, which survives smoothing as a single peak or trough.
    Breathing
        Sinusoidal chest motion of 5 to 25 mm at 0.2 to 0.5 Hz with a weaker
        echo, centered near quadrature so the amplitude moves but never
        spans the full constructive/destructive range.
    No event
        Constant path and no dynamic component.
    """
    label = ActivityLabel(label) if not isinstance(label, ActivityLabel) else label
    if seed < 0:
        raise ParameterError("seed must be non-negative")
    rng = np.random.default_rng([seed, LABELS.index(label)])
    static_phase = float(rng.uniform(0.0, 2 * np.pi))
    noise_seed = int(rng.integers(0, 2**32))
    common = dict(static_amplitude=static_amplitude, static_phase=static_phase,
                  wavelength=wavelength, noise_sigma=noise_sigma, rng_seed=noise_seed,
                  label=label)

    if label is ActivityLabel.NO_EVENT:
        d0 = float(rng.uniform(2.0, 8.0))
        return ScenarioParams(ConstantPath(d0), dynamic_attenuation=0.0, **common)

    if label is ActivityLabel.WALKING:
        speed = float(rng.uniform(*WALK_SPEED_RANGE))
        toward = bool(rng.integers(0, 2))
        d0 = float(rng.uniform(2.0, 6.0))
        if toward:
            d0 += speed * duration
        velocity = -speed if toward else speed
        return ScenarioParams(LinearPath(d0, velocity),
                              dynamic_attenuation=dynamic_attenuation, **common)

    if label is ActivityLabel.BREATHING:
        disp = float(rng.uniform(*BREATH_DISPLACEMENT_RANGE))
        rate = float(rng.uniform(*BREATH_RATE_RANGE))
        phase = float(rng.uniform(0.0, 2 * np.pi))
        scale = dynamic_attenuation / DEFAULT_DYNAMIC_ATTENUATION
        attenuation = float(rng.uniform(*BREATH_ATTENUATION_RANGE)) * scale
        center = float(rng.choice([-1.0, 1.0]) * np.pi / 2 + rng.uniform(-0.3, 0.3))
        d0 = _path_with_phase(float(rng.uniform(1.0, 3.0)), center, static_phase, wavelength)
        return ScenarioParams(SinusoidalPath(d0, disp, rate, phase),
                              dynamic_attenuation=attenuation, **common)

    # Falling
    onset = float(rng.uniform(*FALL_ONSET_RANGE))
    fast = float(rng.uniform(*FALL_FAST_DURATION_RANGE))
    settle = float(rng.uniform(*FALL_SETTLE_DURATION_RANGE))
    turns = max(3, round(float(rng.uniform(*FALL_ROTATION_RATE_RANGE)) * fast))
    direction = float(rng.choice([-1.0, 1.0]))  # path grows or shrinks
    through_peak = bool(rng.integers(0, 2))
    # Rest where the amplitude equals its average over a full turn, so the
    # smoothed burst blends into the levels before and after it.  The final
    # swing then crosses the constructive or destructive extreme once.
    rest = _mean_level_offset(static_amplitude, dynamic_attenuation)
    extreme = 0.0 if through_peak else np.pi
    start = extreme + direction * rest
    swing = 2 * rest / (2 * np.pi)  # wavelengths of path change in the final swing
    base = float(rng.uniform(2.0, 4.0))
    if direction < 0:
        base += (turns + 1) * wavelength
    d0 = _path_with_phase(base, start, static_phase, wavelength)
    d1 = d0 + direction * turns * wavelength
    d2 = d1 + direction * swing * wavelength
    knots = [(0.0, d0), (onset, d0), (onset + fast, d1), (onset + fast + settle, d2)]
    return ScenarioParams(PiecewisePath(knots), dynamic_attenuation=dynamic_attenuation,
                          **common)


def _mean_level_offset(static_amplitude: float, attenuation: float) -> float:
    """Angle from the constructive extreme at which |H| equals its mean over a turn."""
    theta = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
    level = np.abs(static_amplitude + attenuation * np.exp(1j * theta))
    target = level.mean()
    # |H| decreases monotonically on [0, pi]
    half = theta[: theta.size // 2 + 1]
    return float(np.interp(-target, -level[: half.size], half))
