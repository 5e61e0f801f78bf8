"""Central-difference verification of reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    per_param: dict = field(default_factory=dict)
    coords_checked: int = 0

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def worst(self):
        if not self.per_param:
            return None
        return max(self.per_param.items(), key=lambda kv: kv[1])


def relative_error(analytic, numeric, floor=1e-8):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def finite_diff_check(
    loss_fn,
    params: dict,
    eps: float = 1e-3,
    tolerance: float = 1e-3,
    coords_per_param: int = 6,
    seed: int = 0,
    floor: float = 1e-8,
) -> GradCheckReport:
    """Compare ``loss_fn(params)``'s backward pass with central differences.

    ``loss_fn`` takes the params mapping and returns a scalar tensor. For
    every parameter up to ``coords_per_param`` coordinates are sampled and
    perturbed in place by ``+-eps``. Run it on float64 parameters: in
    float32 the difference quotient is dominated by rounding.
    """
    rng = np.random.default_rng(seed)
    for p in params.values():
        p.grad = None
        p.requires_grad = True
    loss = loss_fn(params)
    loss.backward()
    analytic = {
        name: (p.grad if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }

    report = GradCheckReport(max_rel_error=0.0, tolerance=tolerance)
    for name in sorted(params):
        p = params[name]
        flat = p.data.reshape(-1)
        count = min(coords_per_param, flat.size)
        # half the budget goes to coordinates that actually receive gradient
        live = np.flatnonzero(analytic[name].reshape(-1))
        n_live = min(len(live), (count + 1) // 2)
        picked = rng.choice(live, size=n_live, replace=False) if n_live else np.empty(0, dtype=np.int64)
        rest = np.setdiff1d(np.arange(flat.size), picked)
        coords = np.concatenate([picked, rng.choice(rest, size=count - n_live, replace=False)])
        worst = 0.0
        for c in coords:
            original = flat[c]
            flat[c] = original + eps
            plus = float(loss_fn(params).data)
            flat[c] = original - eps
            minus = float(loss_fn(params).data)
            flat[c] = original
            numeric = (plus - minus) / (2.0 * eps)
            worst = max(worst, relative_error(float(analytic[name].reshape(-1)[c]), numeric, floor))
        report.per_param[name] = worst
        report.coords_checked += count
        report.max_rel_error = max(report.max_rel_error, worst)
    return report
