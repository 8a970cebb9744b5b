import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from derfdd.errors import ContractError, NumericDomainError
from derfdd.ml import MlpModel
from oracles import numeric_grads, rel_error


def test_default_layout():
    m = MlpModel()
    shapes = [m.params[f"fc{i}.W"].shape for i in (1, 2, 3)]
    assert shapes == [(64, 6), (128, 64), (3, 128)], f"{shapes}"


def test_zero_weights_give_zero(rng):
    m = MlpModel(seed=1)
    m.set_flat(np.zeros(m.n_params))
    y = m.predict(rng.normal(size=(5, 6)))
    assert np.array_equal(y, np.zeros((5, 3))), f"{y}"


def test_matches_explicit_formula(rng):
    m = MlpModel((6, 4, 5, 3), seed=2)
    x = rng.normal(size=6)
    h1 = np.maximum(m.params["fc1.W"] @ x + m.params["fc1.b"], 0)
    h2 = np.maximum(m.params["fc2.W"] @ h1 + m.params["fc2.b"], 0)
    ref = np.tanh(m.params["fc3.W"] @ h2 + m.params["fc3.b"])
    assert np.allclose(m.predict(x), ref, atol=1e-15), "forward disagrees"


def test_gradients_match_finite_differences(rng):
    m = MlpModel((6, 4, 5, 3), seed=3)
    for name, p in m.params.items():
        if name.endswith(".b"):
            p[...] = rng.uniform(0.2, 0.6, p.shape)
    m.touch()
    x = rng.normal(size=(4, 6))
    g = rng.normal(size=(4, 3))
    _, cache = m.forward(x)
    ana = m.backward(cache, g)
    num = numeric_grads(m, x, g)
    for name in m.params:
        err = rel_error(ana[name], num[name])
        assert err < 1e-6, f"{name}: relative error {err:.2e}"


def test_outputs_bounded(rng):
    m = MlpModel(seed=4)
    y = m.predict(rng.normal(scale=50.0, size=(10_000, 6)))
    assert np.all(np.abs(y) <= 1.0), f"max |y| {np.abs(y).max()}"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=6, max_size=6))
def test_bounded_for_any_finite_input(x):
    y = MlpModel(seed=0).predict(np.array(x))
    assert np.all(np.abs(y) <= 1.0) and np.all(np.isfinite(y)), f"{y}"


def test_rejects_bad_input():
    m = MlpModel()
    with pytest.raises(ContractError):
        m.predict(np.zeros(5))
    with pytest.raises(NumericDomainError):
        m.predict(np.array([0, 0, np.nan, 0, 0, 0]))


def test_stale_cache_rejected(rng):
    m = MlpModel()
    _, cache = m.forward(rng.normal(size=(2, 6)))
    m.touch()
    with pytest.raises(ContractError):
        m.backward(cache, np.ones((2, 3)))
