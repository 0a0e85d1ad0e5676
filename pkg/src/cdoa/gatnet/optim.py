"""RMSprop."""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError


class RMSprop:
    """``v <- rho v + (1 - rho) g^2``; ``p <- p - lr g / (sqrt(v) + eps)``."""

    def __init__(self, learning_rate=5e-6, decay=0.9, epsilon=1e-7):
        if not learning_rate > 0:
            raise ValidationError("learning_rate must be positive")
        if not 0.0 <= decay < 1.0:
            raise ValidationError("decay must lie in [0, 1)")
        self.learning_rate = learning_rate
        self.decay = decay
        self.epsilon = epsilon
        self.state: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Update ``params`` in place."""
        for name, g in grads.items():
            v = self.state.get(name)
            if v is None:
                v = self.state[name] = np.zeros_like(g)
            elif v.shape != g.shape:
                raise ValidationError(f"optimiser state for {name} has shape {v.shape}, grad {g.shape}")
            v *= self.decay
            v += (1.0 - self.decay) * g * g
            params[name] -= self.learning_rate * g / (np.sqrt(v) + self.epsilon)
