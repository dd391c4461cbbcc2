"""Wi-Fi CSI activity sensing: simulation, smoothing, rule and LLM classification."""

from .classifier import ClassifierConfig, Decision, classify
from .core import (
    LABELS,
    ActivityLabel,
    ConstantPath,
    CsiFrame,
    CsiSegment,
    LinearPath,
    PiecewisePath,
    ScenarioParams,
    SinusoidalPath,
    make_scenario,
    simulate,
)
from .dsp import (
    AmplitudeSeries,
    PeakSet,
    SeriesFeatures,
    amplitude_of,
    detect_extrema,
    extract_features,
    mean_amplitude,
    savgol_smooth,
)
from .errors import (
    AuthenticationError,
    CsiSenseError,
    GatewayError,
    MalformedResponseError,
    ParameterError,
    RetriesExhaustedError,
    SegmentParseError,
    UnparseableAnswerError,
)
from .gateway import BackendConfig, ChatGateway, ChatRequest, ChatResponse, MockChatBackend
from .harness import (
    DatasetManifest,
    EvalReport,
    ExperimentOptions,
    LlmMethod,
    LookupBackend,
    evaluate,
    generate_dataset,
    load_manifest,
    load_segment,
    run_experiment,
    save_segment,
)
from .prompting import PromptBundle, PromptStrategy, build_prompt, parse_answer, to_plot, to_text

__version__ = "0.1.0"

__all__ = [
    "ActivityLabel",
    "AmplitudeSeries",
    "AuthenticationError",
    "BackendConfig",
    "ChatGateway",
    "ChatRequest",
    "ChatResponse",
    "ClassifierConfig",
    "ConstantPath",
    "CsiFrame",
    "CsiSegment",
    "CsiSenseError",
    "DatasetManifest",
    "Decision",
    "EvalReport",
    "ExperimentOptions",
    "GatewayError",
    "LABELS",
    "LinearPath",
    "LlmMethod",
    "LookupBackend",
    "MalformedResponseError",
    "MockChatBackend",
    "ParameterError",
    "PeakSet",
    "PiecewisePath",
    "PromptBundle",
    "PromptStrategy",
    "RetriesExhaustedError",
    "ScenarioParams",
    "SegmentParseError",
    "SeriesFeatures",
    "SinusoidalPath",
    "UnparseableAnswerError",
    "amplitude_of",
    "build_prompt",
    "classify",
    "detect_extrema",
    "evaluate",
    "extract_features",
    "generate_dataset",
    "load_manifest",
    "load_segment",
    "make_scenario",
    "mean_amplitude",
    "parse_answer",
    "run_experiment",
    "save_segment",
    "savgol_smooth",
    "simulate",
    "to_plot",
    "to_text",
]
