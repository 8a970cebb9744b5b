import numpy as np
import pytest

from derfdd.dataset import make_windows, split_train_val
from derfdd.errors import ContractError, EmptyDatasetError
from derfdd.faults import ScenarioSchedule
from derfdd.ml import LstmModel, MlpModel, TrainConfig, train_lstm, train_mlp
from derfdd.ml.training import fit


def _sine_windows(n, p=10, rng=None):
    t = np.arange(n + p + 1) * 0.1
    phase = 0.0 if rng is None else rng.uniform(0, 2 * np.pi)
    s = 0.8 * np.sin(t + phase)
    x = np.stack([s[i:i + p] for i in range(n)])[:, :, None].repeat(9, axis=2)
    y = s[p:p + n, None].repeat(3, axis=1)
    return x, y


def test_lstm_learns_sine_next_step():
    x, y = _sine_windows(2000)
    m = LstmModel(n_in=9, hidden=(8, 8), lookback=10, seed=0)
    hist = fit(m, x[:1600], y[:1600], x[1600:], y[1600:],
               TrainConfig(learning_rate=5e-3, batch_size=32, max_epochs=20))
    best = min(h[2] for h in hist)
    assert best < 1e-3, f"best validation MSE {best:.2e}"


class _Worsening:
    """A model whose validation loss rises every epoch."""

    kind = "stub"

    def __init__(self):
        self.params = {"w": np.zeros(1)}
        self.calls = 0
        self.version = 0
        self.epochs = 0

    def forward(self, x):
        return np.full((len(x), 1), float(self.params["w"][0])), None

    def backward(self, cache, g):
        return {"w": np.array([-1.0])}

    def touch(self):
        pass

    def copy_params(self):
        return {k: v.copy() for k, v in self.params.items()}

    def load_params(self, p):
        self.params = {k: v.copy() for k, v in p.items()}


def test_early_stopping_patience_one():
    m = _Worsening()
    x = np.zeros((8, 1))
    y = np.zeros((8, 1))
    hist = fit(m, x, y, x, y, TrainConfig(learning_rate=0.1, max_epochs=10,
                                          early_stop_patience=1, batch_size=8))
    assert len(hist) == 2, f"ran {len(hist)} epochs"
    assert m.params["w"][0] == pytest.approx(0.1), "best weights not restored"


def test_training_is_deterministic():
    x, y = _sine_windows(300)
    cfg = TrainConfig(learning_rate=1e-2, max_epochs=3)
    runs = []
    for _ in range(2):
        m = LstmModel(hidden=(4, 4), lookback=10, seed=1)
        h = fit(m, x[:200], y[:200], x[200:], y[200:], cfg)
        runs.append((m.get_flat(), h))
    assert np.array_equal(runs[0][0], runs[1][0]), "weights differ"
    assert runs[0][1] == runs[1][1], "histories differ"


def test_best_so_far_is_non_increasing():
    x, y = _sine_windows(400)
    m = LstmModel(hidden=(4, 4), lookback=10, seed=2)
    hist = fit(m, x[:300], y[:300], x[300:], y[300:], TrainConfig(learning_rate=1e-2,
                                                                    max_epochs=6))
    best = np.minimum.accumulate([h[2] for h in hist])
    assert np.all(np.diff(best) <= 0), f"{best}"
    assert len(hist) >= 1 and m.epochs == len(hist), "epoch bookkeeping"


def test_train_wrappers_on_recorded_trace(train_trace_50us):
    d = make_windows(train_trace_50us.slice(6000, 10000), 20, 10)
    a, b = split_train_val(d, 0.7)
    with pytest.raises(ContractError):
        train_mlp(a, b, TrainConfig(max_epochs=1))
    normal = d.filter_labels(11)
    na, nb = split_train_val(normal, 0.7)
    mlp, hist = train_mlp(na, nb, TrainConfig(max_epochs=2, batch_size=16))
    assert isinstance(mlp, MlpModel) and len(hist) == 2, "MLP training"
    lstm, hist = train_lstm(na, nb, TrainConfig(max_epochs=1), hidden=(4, 4))
    assert lstm.lookback == 20 and len(hist) == 1, "LSTM training"


def test_empty_portions_rejected(train_trace_50us):
    d = make_windows(train_trace_50us.slice(0, 100), 20)
    with pytest.raises(EmptyDatasetError):
        train_mlp(d.subset(np.arange(0)), d.subset(np.arange(0)))
    with pytest.raises(EmptyDatasetError):
        fit(MlpModel(), np.zeros((0, 6)), np.zeros((0, 3)), np.zeros((1, 6)), np.zeros((1, 3)),
            TrainConfig())
