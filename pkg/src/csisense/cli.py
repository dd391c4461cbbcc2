"""Command-line entry point: ``csisense generate|classify|evaluate|render``.

Exit status is 0 on success, 1 for invalid parameters and 2 for IO or
chat-backend failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .classifier import classify
from .core import LABELS, ActivityLabel
from .errors import GatewayError, ParameterError, SegmentParseError, UnparseableAnswerError
from .gateway import BackendConfig, ChatGateway, MockChatBackend
from .harness import (
    ExperimentOptions,
    LlmMethod,
    LookupBackend,
    build_strategy,
    generate_dataset,
    load_manifest,
    load_segment,
    prompt_for_series,
    run_experiment,
    smoothed_amplitude,
)
from .prompting import to_plot

EXIT_OK, EXIT_PARAM, EXIT_IO = 0, 1, 2
STRATEGIES = ("base", "knowledge", "cot", "icl", "multimodal")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARAM, f"{self.prog}: error: {message}\n")


def parse_counts(text: str) -> dict[ActivityLabel, int]:
    """``"breath=123,walk=90"`` or a JSON object, keyed by label strings."""
    text = text.strip()
    if text.startswith("{"):
        raw = json.loads(text)
    else:
        raw = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            key, sep, value = part.partition("=")
            if not sep:
                raise ParameterError(f"bad count {part!r}; expected label=count")
            raw[key] = value
    try:
        return {ActivityLabel.from_string(k.replace("_", " ")): int(v) for k, v in raw.items()}
    except ValueError as exc:
        raise ParameterError(f"bad counts {text!r}: {exc}") from None


def _add_llm_options(p):
    p.add_argument("--method", choices=("rule", "llm"), default="rule")
    p.add_argument("--strategy", choices=STRATEGIES, default="knowledge")
    p.add_argument("--sub", choices=("base", "knowledge", "cot"), default=None,
                   help="text template for icl/multimodal")
    p.add_argument("--backend", default="http",
                   help="http, mock-rule, mock-truth or mock:<fixed answer>")
    p.add_argument("--base-url", default="https://api.openai.com/v1")
    p.add_argument("--model", default="gpt-4o-mini")
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--concurrency", type=int, default=4)
    p.add_argument("--seed", type=int, default=0, help="exemplar selection seed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csisense", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="simulate a labelled dataset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--counts", required=True, help='e.g. "breath=123,walk=90,fall=90,no_event=90"')
    p.add_argument("--out", required=True)
    p.add_argument("--noise-sigma", type=float, default=0.1)

    p = sub.add_parser("classify", help="classify one segment file")
    p.add_argument("--input", required=True)
    p.add_argument("--plot", help="also write the amplitude plot to this PNG")
    _add_llm_options(p)

    p = sub.add_parser("evaluate", help="evaluate a method on a dataset's test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", help="write the JSON report here (default: stdout)")
    _add_llm_options(p)

    p = sub.add_parser("render", help="plot a segment's smoothed amplitude")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, default=800)
    p.add_argument("--height", type=int, default=400)
    return parser


def _gateway(args, manifest=None, options=None, single=None) -> ChatGateway:
    config = BackendConfig.from_env(args.base_url, args.model, timeout=args.timeout,
                                    max_retries=args.max_retries,
                                    max_concurrency=args.concurrency)
    name = args.backend
    if name == "http":
        backend = None
    elif name.startswith("mock:"):
        backend = MockChatBackend(name[len("mock:"):])
    elif name in ("mock-rule", "mock-truth"):
        if manifest is not None:
            make = LookupBackend.rule_oracle if name == "mock-rule" else LookupBackend.truth_oracle
            backend = make(manifest, options)
        else:
            series, truth = single
            if name == "mock-truth" and truth is None:
                raise ParameterError("mock-truth needs a labelled segment")
            answer = classify(series, options.classifier).label.value if name == "mock-rule" \
                else truth.value
            backend = LookupBackend.from_series([(series, answer)], options)
    else:
        raise ParameterError(f"unknown backend {name!r}")
    return ChatGateway(config, backend)


def cmd_generate(args) -> int:
    manifest = generate_dataset(args.seed, parse_counts(args.counts), args.out,
                                noise_sigma=args.noise_sigma)
    counts = manifest.counts()
    for label in LABELS:
        c = counts[label.value]
        print(f"{label.value:9s} train={c['train']:4d} test={c['test']:4d}")
    print(f"wrote {Path(args.out) / 'manifest.json'}")
    return EXIT_OK


def cmd_classify(args) -> int:
    options = ExperimentOptions(seed=args.seed)
    segment = load_segment(args.input)
    series = smoothed_amplitude(segment, options)
    if args.plot:
        Path(args.plot).write_bytes(to_plot(series, *options.plot_size).png_bytes)
    if args.method == "rule":
        decision = classify(series, options.classifier)
        print(decision.explain())
        return EXIT_OK
    if args.strategy == "icl":
        raise ParameterError("icl needs training exemplars; use evaluate with a manifest")
    gateway = _gateway(args, options=options, single=(series, segment.label))
    strategy = build_strategy(LlmMethod(args.strategy, gateway, args.sub), None, options)
    label, raw = gateway.classify(prompt_for_series(strategy, series, options))
    print(f"raw: {raw}")
    print(f"label: {label.value}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    options = ExperimentOptions(seed=args.seed)
    manifest = load_manifest(args.manifest)
    if args.method == "rule":
        method = "rule"
    else:
        method = LlmMethod(args.strategy, _gateway(args, manifest, options), args.sub)
    report = run_experiment(manifest, method, options)
    if args.report:
        Path(args.report).write_text(report.to_json())
        print(f"accuracy={report.accuracy:.4f} macro_f1={report.macro_f1:.4f} "
              f"unparseable={report.num_unparseable} -> {args.report}")
    else:
        sys.stdout.write(report.to_json())
    return EXIT_OK


def cmd_render(args) -> int:
    series = smoothed_amplitude(load_segment(args.input))
    Path(args.out).write_bytes(to_plot(series, args.width, args.height).png_bytes)
    print(f"wrote {args.out}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "classify": cmd_classify,
            "evaluate": cmd_evaluate, "render": cmd_render}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except (SegmentParseError, OSError, GatewayError) as exc:
        print(f"csisense: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ParameterError, UnparseableAnswerError, json.JSONDecodeError) as exc:
        print(f"csisense: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
