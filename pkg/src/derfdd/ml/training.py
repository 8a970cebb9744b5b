"""Minibatch Adam training with early stopping on validation MSE."""
import logging

import numpy as np

from ..errors import ContractError, EmptyDatasetError, TrainingError
from ..faults import FaultClass
from .adam import AdamState, adam_step, lstm_config, mlp_config
from .lstm import LstmModel
from .metrics import mse
from .mlp import MlpModel

log = logging.getLogger(__name__)


def _predict(model, x, batch=2048):
    return np.concatenate([model.forward(x[i:i + batch])[0] for i in range(0, len(x), batch)])


def fit(model, x_train, y_train, x_val, y_val, cfg, on_epoch=None):
    """Train ``model`` in place; returns the history.

    Each history row is ``(epoch, train_loss, val_loss)``, where the train
    loss is the mean minibatch MSE of that epoch.  The parameters of the
    epoch with the lowest validation loss are restored at the end.
    """
    if len(x_train) == 0 or len(x_val) == 0:
        raise EmptyDatasetError("training and validation portions must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    state = AdamState(model.params)
    best = np.inf
    best_params = model.copy_params()
    wait = 0
    history = []
    n = len(x_train)
    bs = cfg.batch_size
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for bi, start in enumerate(range(0, n, bs)):
            sel = order[start:start + bs]
            pred, cache = model.forward(x_train[sel])
            diff = pred - y_train[sel]
            loss = float(np.mean(diff * diff))
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch} batch {bi}", epoch, bi)
            total += loss * len(sel)
            grads = model.backward(cache, 2.0 * diff / diff.size)
            adam_step(model.params, grads, state, cfg)
            model.touch()
        val = float(mse(_predict(model, x_val), y_val))
        if not np.isfinite(val):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}", epoch, None)
        history.append((epoch, total / n, val))
        if on_epoch:
            on_epoch(epoch, total / n, val)
        log.info("%s epoch %d train %.3e val %.3e", model.kind, epoch, total / n, val)
        if val < best:
            best = val
            best_params = model.copy_params()
            wait = 0
        else:
            wait += 1
            if wait >= cfg.early_stop_patience:
                break
    model.load_params(best_params)
    model.epochs = len(history)
    return history


def train_lstm(train, val, cfg=None, hidden=(32, 64), seed=None, on_epoch=None):
    """Fit the next-step predictor on two :class:`~derfdd.dataset.Dataset`
    portions.  Returns ``(model, history)``."""
    cfg = cfg or lstm_config()
    seed = cfg.seed if seed is None else seed
    model = LstmModel(9, hidden, 3, train.p, seed)
    hist = fit(model, train.inputs(), train.targets, val.inputs(), val.targets, cfg, on_epoch)
    return model, hist


def mlp_arrays(d):
    """Corrector inputs (grid voltage and inverter current at the target
    row) and targets (the reference at that row)."""
    return d.next_inputs()[:, :6], d.targets


def train_mlp(train, val, cfg=None, sizes=(6, 64, 128, 3), seed=None, on_epoch=None):
    """Fit the corrector on NORMAL-only portions.  Returns ``(model, history)``."""
    cfg = cfg or mlp_config()
    seed = cfg.seed if seed is None else seed
    for part in (train, val):
        if len(part) == 0:
            raise EmptyDatasetError("corrector training needs non-empty data")
        if np.any(part.labels != int(FaultClass.NORMAL)):
            raise ContractError("corrector training data must contain only NORMAL windows")
    model = MlpModel(sizes, seed)
    xt, yt = mlp_arrays(train)
    xv, yv = mlp_arrays(val)
    hist = fit(model, xt, yt, xv, yv, cfg, on_epoch)
    return model, hist
