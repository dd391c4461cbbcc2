"""
Prompts for a language model
============================

A smoothed series becomes 100 comma-separated values (or a plot for the
multimodal strategy) and is dropped into one of the prompt templates.
"""

import numpy as np

from csisense import AmplitudeSeries, LABELS, PromptStrategy, build_prompt, parse_answer, to_plot, to_text
from csisense.prompting import Exemplar

t = np.arange(5000) / 1000
series = AmplitudeSeries(10 + 1.5 * np.sin(2 * np.pi * 0.3 * t), 1000)
text = to_text(series, num_points=100, decimals=2)

for name in ("base", "knowledge", "cot"):
    print(f"===== {name} =====")
    print(build_prompt(PromptStrategy(name), text).text)
    print()

# In-context learning puts one labelled example per class before the query.
exemplars = [Exemplar(text, label) for label in LABELS]
icl = build_prompt(PromptStrategy.icl(exemplars), text).text
print("ICL prompt has", icl.count("Answer:"), "answer lines")

# The multimodal strategy attaches a PNG instead of inlining numbers.
bundle = build_prompt(PromptStrategy.multimodal(), to_plot(series))
print("image bytes:", len(bundle.image.png_bytes))

# Replies are mapped back to labels.
for reply in ("Breath", "The activity is: no event.", "I think it is a fall"):
    print(repr(reply), "->", parse_answer(reply).value)
