"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tape, Tensor, backward


def finite_diff_check(fn, params, h=1e-5, max_coords=24, rng=None):
    """Compare d(fn)/d(params) against central differences.

    fn: zero-argument callable returning a scalar Tensor; must read the
    current values of `params` (list of leaf Tensors) and be deterministic.
    Returns the max over sampled coordinates of
    |analytic - numeric| / max(1, |numeric|).
    """
    if h <= 0:
        raise ValueError("finite_diff_check: h must be positive")
    rng = rng or np.random.default_rng(0)

    def run():
        with Tape() as tape:
            out = fn()
        return tape, out

    tape, out = run()
    _, out2 = run()
    if float(out.data) != float(out2.data):
        raise RuntimeError("finite_diff_check: fn is not deterministic between evaluations")

    for p in params:
        p.grad = None
    backward(tape, out)

    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        n = flat.size
        coords = np.arange(n) if n <= max_coords else rng.choice(n, size=max_coords, replace=False)
        analytic = np.zeros(n) if p.grad is None else p.grad.reshape(-1)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + h
            f_plus = float(run()[1].data)
            flat[c] = orig - h
            f_minus = float(run()[1].data)
            flat[c] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            err = abs(float(analytic[c]) - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst
