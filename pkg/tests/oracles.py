"""Independent re-derivations used as test oracles."""

import numpy as np

LEGAL = {
    "WarningEntered": ("Normal", "Warning"),
    "FalseAlarm": ("Warning", "Normal"),
    "DriftDetected": ("Warning", "Drift"),
    "StabilizationRetrain": ("Drift", "Normal"),
}


def transition_violations(events) -> list[str]:
    """Replay an event log against the legal Normal/Warning/Drift transitions."""
    state = "Normal"
    problems = []
    prev = None
    for e in events:
        kind = e["kind"] if isinstance(e, dict) else e.kind.value
        if kind in LEGAL:
            src, dst = LEGAL[kind]
            if state != src:
                problems.append(f"{kind} from {state}")
            state = dst
        elif kind == "RetrainedOnDrift":
            if state != "Drift":
                problems.append(f"RetrainedOnDrift in {state}")
        elif kind == "WindowReleased":
            if prev not in ("FalseAlarm", "StabilizationRetrain"):
                problems.append(f"WindowReleased after {prev}")
        else:
            problems.append(f"unknown event {kind}")
        prev = kind
    return problems


def flat_window_accuracy(flags, end_index, t):
    return float(np.sum(flags[end_index + 1 - t:end_index + 1])) / t
