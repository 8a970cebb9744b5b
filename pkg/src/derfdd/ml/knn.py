"""Exact k-nearest-neighbour classifier over fixed-length feature vectors."""
import numpy as np

from .. import kernels
from ..errors import ConfigurationError, ContractError
from ..faults import N_CLASSES


def stratified_cap(labels, cap, seed=0):
    """Sorted indices of at most ``cap`` rows, keeping each class's share.

    Each class keeps ``floor(cap * n_c / n)`` rows (at least one) drawn
    without replacement; leftover slots go to the classes with the largest
    remainders.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if cap is None or n <= cap:
        return np.arange(n)
    classes, counts = np.unique(labels, return_counts=True)
    share = cap * counts / n
    take = np.maximum(np.floor(share).astype(np.int64), 1)
    order = np.argsort(-(share - np.floor(share)), kind="stable")
    for i in order:
        if take.sum() >= cap:
            break
        if take[i] < counts[i]:
            take[i] += 1
    rng = np.random.default_rng(seed)
    keep = []
    for c, t in zip(classes, take):
        rows = np.flatnonzero(labels == c)
        keep.append(rng.choice(rows, size=min(t, len(rows)), replace=False))
    return np.sort(np.concatenate(keep))


class KnnModel:
    """Stored exemplars with majority voting among the ``k`` nearest.

    Distances are Euclidean.  Ties in the vote go to the class with the
    smallest summed neighbour distance, then to the smallest class code.
    Neighbours at equal distance are ranked by exemplar index.
    """

    kind = "knn"

    def __init__(self, exemplars, labels, k=5, window=20, n_classes=N_CLASSES):
        ex = np.ascontiguousarray(exemplars, dtype=float)
        lab = np.ascontiguousarray(labels, dtype=np.int64)
        if ex.ndim != 2 or lab.shape != (ex.shape[0],):
            raise ContractError("exemplars must be (n, d) with one label per row")
        if len(ex) == 0:
            raise ContractError("KNN model has no exemplars")
        if not 1 <= k <= len(ex):
            raise ConfigurationError(f"k must be in [1, {len(ex)}], got {k}")
        if lab.min() < 0 or lab.max() >= n_classes:
            raise ContractError("labels out of range")
        self.exemplars = ex
        self.labels = lab
        self.k = int(k)
        self.window = int(window)
        self.n_classes = int(n_classes)

    @classmethod
    def fit(cls, features, labels, k=5, window=20, cap=50_000, seed=0):
        keep = stratified_cap(labels, cap, seed)
        return cls(np.asarray(features)[keep], np.asarray(labels)[keep], k, window)

    @property
    def dim(self):
        return self.exemplars.shape[1]

    def meta(self):
        return {"k": self.k, "window": self.window, "n": len(self.labels), "dim": self.dim,
                "n_classes": self.n_classes}

    def neighbours(self, features):
        q = np.asarray(features, dtype=float)
        if q.ndim == 1:
            q = q[None]
        if q.ndim != 2 or q.shape[1] != self.dim:
            raise ContractError(f"feature dimension {q.shape[-1]} != exemplar dimension {self.dim}")
        return kernels.knn_search(self.exemplars, q, self.k)

    def classify_batch(self, features):
        """Class codes ``(m,)`` and neighbour distances ``(m, k)``."""
        idx, d2 = self.neighbours(features)
        out = np.empty(len(idx), dtype=np.int64)
        kernels.knn_vote(self.labels, idx, d2, self.n_classes, out)
        return out, np.sqrt(d2)

    def classify(self, feature):
        """``(class_code, distances)`` for one feature vector."""
        feature = np.asarray(feature, dtype=float)
        if feature.ndim != 1:
            raise ContractError("classify takes one feature vector")
        c, d = self.classify_batch(feature)
        return int(c[0]), d[0]
