"""Adam optimiser and training hyperparameters."""
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ConfigurationError, ContractError


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 50
    early_stop_patience: int = 5
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ConfigurationError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.early_stop_patience < 1:
            raise ConfigurationError("early_stop_patience must be >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ConfigurationError("invalid Adam constants")

    def replace(self, **changes):
        return replace(self, **changes)


def lstm_config(**changes):
    """Predictor defaults: lr 1e-4, batch 32, 50 epochs."""
    return TrainConfig(learning_rate=1e-4, batch_size=32, max_epochs=50).replace(**changes)


def mlp_config(**changes):
    """Corrector defaults: lr 1e-3, batch 16, 30 epochs."""
    return TrainConfig(learning_rate=1e-3, batch_size=16, max_epochs=30).replace(**changes)


class AdamState:
    """First and second moment estimates keyed like the parameters."""

    def __init__(self, params):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0


def adam_step(params, grads, state, cfg, t=None):
    """One bias-corrected Adam update, applied to ``params`` in place.

    ``t`` is the 1-based step count; it defaults to ``state.t + 1``.
    Returns ``(params, state)``.
    """
    t = state.t + 1 if t is None else int(t)
    if t < 1:
        raise ContractError(f"step count must be >= 1, got {t}")
    if set(grads) != set(params) or set(state.m) != set(params):
        raise ContractError("parameter, gradient and moment keys differ")
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape or state.m[k].shape != p.shape:
            raise ContractError(f"shape mismatch for {k}: {p.shape} vs {g.shape}")
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
    state.t = t
    return params, state
