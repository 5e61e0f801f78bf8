"""Per-step page weights recorded while teacher-forcing a reference summary."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ..model import forward, teacher_forcing_pair
from ..numerics.tensor import no_grad


@dataclass
class ImportanceTrace:
    weights: np.ndarray  # [steps, pages]
    origins: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step"] + [f"page_{j}" for j in range(self.weights.shape[1])])
        for i, row in enumerate(self.weights):
            w.writerow([i] + [f"{x:.6f}" for x in row])
        return buf.getvalue()


def importance_trace(params, cfg, pd, summary_ids) -> ImportanceTrace:
    prefix, _ = teacher_forcing_pair(summary_ids, cfg)
    with no_grad():
        state = forward(params, cfg, pd, prefix, mode="paged").state
    return ImportanceTrace(state.confidence_norm.astype(np.float64), [p.origin for p in pd.pages])
