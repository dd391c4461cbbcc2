"""
An end-to-end experiment without network access
===============================================

Generate a small labelled dataset, score the rule classifier, then run the
same test split through the prompt, gateway and answer-parsing path with a
mock model that replies with the rule's decision.  The two reports match.

Set ``CSI_SENSE_API_KEY`` plus ``CSI_SENSE_BASE_URL`` and ``CSI_SENSE_MODEL``
to send the prompts to a real OpenAI-compatible endpoint as well.
"""

import os
from pathlib import Path

from csisense import (
    LABELS,
    BackendConfig,
    ChatGateway,
    LlmMethod,
    LookupBackend,
    generate_dataset,
    run_experiment,
)

root = Path("demo_output") / "dataset"
manifest = generate_dataset(seed=1, counts={label: 10 for label in LABELS}, out_dir=root)
print("split sizes:", manifest.counts())

rule = run_experiment(manifest, "rule")
print(f"rule: accuracy={rule.accuracy:.3f} macro F1={rule.macro_f1:.3f}")

mock = ChatGateway(BackendConfig("https://mock.invalid/v1", "mock"),
                   LookupBackend.rule_oracle(manifest))
echoed = run_experiment(manifest, LlmMethod("knowledge", mock))
print("mock LLM report identical to rule report:", echoed == rule)

if all(os.environ.get(v) for v in ("CSI_SENSE_API_KEY", "CSI_SENSE_BASE_URL", "CSI_SENSE_MODEL")):
    config = BackendConfig.from_env(os.environ["CSI_SENSE_BASE_URL"], os.environ["CSI_SENSE_MODEL"])
    for strategy in ("base", "knowledge", "cot", "icl"):
        report = run_experiment(manifest, LlmMethod(strategy, ChatGateway(config)))
        print(f"{strategy:9s} accuracy={report.accuracy:.3f} unparseable={report.num_unparseable}")
