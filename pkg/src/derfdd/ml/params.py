"""Shared plumbing for models whose parameters live in an ordered dict."""
import numpy as np

from ..errors import ContractError


class ParamModel:
    """Base for models with named float64 parameter arrays.

    ``version`` changes whenever parameters are replaced through
    :meth:`set_flat` or :meth:`load_params`, or when :meth:`touch` is called
    after an in-place update; caches carry the version they were built
    with so a stale cache is detected in backward.
    """

    kind = "model"

    def __init__(self):
        self.params = {}
        self.version = 0

    def touch(self):
        self.version += 1

    @property
    def n_params(self):
        return sum(a.size for a in self.params.values())

    def get_flat(self):
        return np.concatenate([a.ravel() for a in self.params.values()])

    def set_flat(self, flat):
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.n_params,):
            raise ContractError(f"expected {self.n_params} values, got {flat.shape}")
        pos = 0
        for name, a in self.params.items():
            self.params[name] = flat[pos:pos + a.size].reshape(a.shape).copy()
            pos += a.size
        self.touch()

    def copy_params(self):
        return {k: v.copy() for k, v in self.params.items()}

    def load_params(self, params):
        for k, v in params.items():
            if k not in self.params or self.params[k].shape != v.shape:
                raise ContractError(f"parameter {k} does not match model layout")
            self.params[k] = np.array(v, dtype=float)
        self.touch()

    def check_finite(self):
        for k, v in self.params.items():
            if not np.all(np.isfinite(v)):
                raise ContractError(f"parameter {k} has non-finite entries")


def uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def check_cache(model, cache):
    if cache is None or cache.get("model_id") != id(model) or cache.get("version") != model.version:
        raise ContractError("cache does not belong to the current model parameters")
