"""Adam with standard bias correction, keyed by parameter name."""

from __future__ import annotations

import numpy as np

from ..exceptions import ConfigurationError, ShapeError

__all__ = ["Adam"]


class Adam:
    """Bias-corrected Adam. Moment buffers are created lazily per
    parameter name; updates are deterministic and in place."""

    def __init__(self, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise ConfigurationError(f"learning rate must be positive, got {lr}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.first_moment: dict[str, np.ndarray] = {}
        self.second_moment: dict[str, np.ndarray] = {}

    def step(self, params: dict, grads: dict) -> dict:
        """Apply one update; returns ``params`` (mutated in place)."""
        self.step_count += 1
        b1c = 1.0 - self.beta1**self.step_count
        b2c = 1.0 - self.beta2**self.step_count
        for name, value in params.items():
            g = grads[name]
            if g.shape != value.shape:
                raise ShapeError(
                    f"gradient shape {g.shape} != parameter shape {value.shape} for '{name}'"
                )
            m = self.first_moment.setdefault(name, np.zeros_like(value))
            v = self.second_moment.setdefault(name, np.zeros_like(value))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            value -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)
        return params
