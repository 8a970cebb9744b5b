"""Regression and classification metrics."""
import numpy as np

from ..errors import ContractError
from ..faults import N_CLASSES


def _pair(pred, target):
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ContractError(f"shapes differ: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ContractError("metrics need at least one value")
    return pred, target


def mse(pred, target, axis=None):
    pred, target = _pair(pred, target)
    return np.mean((pred - target) ** 2, axis=axis)


def mae(pred, target, axis=None):
    pred, target = _pair(pred, target)
    return np.mean(np.abs(pred - target), axis=axis)


def confusion_matrix(preds, labels, n_classes=N_CLASSES):
    """Counts with rows indexed by true class and columns by prediction."""
    preds = np.asarray(preds, dtype=np.int64).ravel()
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if preds.shape != labels.shape:
        raise ContractError(f"lengths differ: {preds.size} vs {labels.size}")
    if preds.size == 0:
        raise ContractError("confusion matrix needs at least one sample")
    if preds.min() < 0 or labels.min() < 0 or max(preds.max(), labels.max()) >= n_classes:
        raise ContractError("class codes out of range")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (labels, preds), 1)
    return cm


def accuracy(cm):
    cm = np.asarray(cm)
    total = cm.sum()
    if total == 0:
        raise ContractError("empty confusion matrix")
    return float(np.trace(cm) / total)


def per_class_recall(cm):
    """Recall per true class; NaN for classes with no samples."""
    cm = np.asarray(cm, dtype=float)
    support = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(support > 0, np.diag(cm) / support, np.nan)
