"""Fully connected regressor with ReLU hidden layers and a tanh output."""
import numpy as np

from ..errors import ContractError, NumericDomainError
from .params import ParamModel, check_cache, uniform_init


class MlpModel(ParamModel):
    """Dense network ``sizes[0] -> ... -> sizes[-1]``.

    Hidden layers use the rectifier and the output layer uses tanh, so
    every output lies in (-1, 1).
    """

    kind = "mlp"

    def __init__(self, sizes=(6, 64, 128, 3), seed=0):
        super().__init__()
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2:
            raise ContractError("an MLP needs at least input and output sizes")
        self.seed = int(seed)
        self.epochs = 0
        rng = np.random.default_rng(seed)
        for li in range(1, len(self.sizes)):
            fan = self.sizes[li - 1]
            self.params[f"fc{li}.W"] = uniform_init(rng, (self.sizes[li], fan), fan)
            self.params[f"fc{li}.b"] = np.zeros(self.sizes[li])

    @property
    def n_layers(self):
        return len(self.sizes) - 1

    def meta(self):
        return {"sizes": list(self.sizes), "seed": self.seed, "epochs": self.epochs}

    @classmethod
    def from_meta(cls, meta):
        m = cls(tuple(meta["sizes"]), meta["seed"])
        m.epochs = int(meta.get("epochs", 0))
        return m

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None]
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ContractError(f"expected inputs with {self.sizes[0]} features, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise NumericDomainError("MLP input has non-finite entries")
        acts = [x]
        a = x
        for li in range(1, self.n_layers + 1):
            z = a @ self.params[f"fc{li}.W"].T + self.params[f"fc{li}.b"]
            a = np.tanh(z) if li == self.n_layers else np.maximum(z, 0.0)
            acts.append(a)
        cache = {"model_id": id(self), "version": self.version, "acts": acts,
                 "single": single}
        return (a[0] if single else a), cache

    def predict(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_out):
        check_cache(self, cache)
        acts = cache["acts"]
        g = np.asarray(grad_out, dtype=float)
        if cache["single"]:
            g = g[None]
        if g.shape != acts[-1].shape:
            raise ContractError(f"grad_out shape {g.shape} does not match output")
        grads = {}
        d = g * (1.0 - acts[-1] ** 2)
        for li in range(self.n_layers, 0, -1):
            grads[f"fc{li}.W"] = d.T @ acts[li - 1]
            grads[f"fc{li}.b"] = d.sum(axis=0)
            if li > 1:
                d = (d @ self.params[f"fc{li}.W"]) * (acts[li - 1] > 0)
        return {k: grads[k] for k in self.params}
