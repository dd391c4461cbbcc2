"""
Rule-based classification with a decision trace
===============================================

The rule classifier asks the same questions as the step-by-step prompt:
how wide is the range, how many large extrema are there, and is there one
dominant excursion followed by calm?  Each decision records what it checked.
"""

from csisense import LABELS, classify, make_scenario, mean_amplitude, savgol_smooth, simulate

for label in LABELS:
    series = savgol_smooth(mean_amplitude(simulate(make_scenario(label, seed=5))))
    decision = classify(series)
    print(f"--- generated as {label.value} ---")
    print(decision.explain())
    print()
