"""Finite-difference verification of analytic gradients.

Every layer and model in this package pairs a hand-written backward pass with
a forward pass; this harness probes them against central differences.
"""

from __future__ import annotations

from typing import Callable, Mapping, Sequence

import numpy as np

from .layers import Parameter

LossAndGrad = Callable[[], tuple[float, Mapping[str, np.ndarray]]]


def grad_check(
    loss_and_grad: LossAndGrad,
    params: Sequence[Parameter],
    eps: float = 1e-6,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    loss_and_grad must be pure: it recomputes the scalar loss and the gradient
    dictionary (name -> array) from the current parameter values. The relative
    error uses max(1, |analytic|) in the denominator.
    """
    _, grads = loss_and_grad()
    analytic = {p.name: np.array(grads[p.name], copy=True) for p in params}

    worst = 0.0
    for p in params:
        flat = p.value.reshape(-1)
        g = analytic[p.name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp, _ = loss_and_grad()
            flat[i] = orig - eps
            lm, _ = loss_and_grad()
            flat[i] = orig
            numeric = (lp - lm) / (2.0 * eps)
            rel = abs(numeric - g[i]) / max(1.0, abs(g[i]))
            worst = max(worst, rel)
    return worst
