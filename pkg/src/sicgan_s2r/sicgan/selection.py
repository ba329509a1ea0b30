from __future__ import annotations

from typing import Mapping, Sequence


def selection_score(record: Mapping, gap_weight: float = 0.5) -> float:
    """Validation generator loss plus a penalty on the train/validation gap."""
    return float(record["gen_val"]) + gap_weight * abs(float(record["gen_val"]) - float(record["gen_train"]))


def select_best_model(history: Sequence[Mapping], gap_weight: float = 0.5) -> int:
    """Epoch id of the record with the lowest selection score; ties go to the earlier epoch.

    Records need ``gen_train`` and ``gen_val``; without an ``epoch`` key the
    i-th record counts as epoch i + 1.
    """
    if not history:
        raise ValueError("cannot select a model from an empty history")
    epochs = [int(r.get("epoch", i + 1)) for i, r in enumerate(history)]
    best = min(range(len(history)), key=lambda i: (selection_score(history[i], gap_weight), epochs[i]))
    return epochs[best]
