"""Model files: a versioned text header followed by raw float64 data.

Layout::

    derfdd-checkpoint 1
    kind lstm
    meta {"n_in": 9, ...}
    param l1.W 128 9
    ...
    end
    <little-endian float64 values of every param, in header order>

KNN files store exemplars then labels (as float64) in the same way.
"""
import json
from pathlib import Path

import numpy as np

from ..errors import ContractError, MissingArtifactError
from .knn import KnnModel
from .lstm import LstmModel
from .mlp import MlpModel

MAGIC = "derfdd-checkpoint"
VERSION = 1
_KINDS = {"lstm": LstmModel, "mlp": MlpModel}


def _arrays(model):
    if isinstance(model, KnnModel):
        return {"exemplars": model.exemplars, "labels": model.labels.astype(float)}
    return model.params


def save(model, path):
    path = Path(path)
    arrays = _arrays(model)
    lines = [f"{MAGIC} {VERSION}", f"kind {model.kind}",
             "meta " + json.dumps(model.meta(), sort_keys=True)]
    for name, a in arrays.items():
        lines.append(f"param {name} " + " ".join(str(s) for s in a.shape))
    lines.append("end")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return path


def load(path, producer=None):
    """Read a checkpoint; ``producer`` names the command that makes it."""
    path = Path(path)
    if not path.exists():
        hint = f"; run `{producer}` first" if producer else ""
        raise MissingArtifactError(f"missing checkpoint {path}{hint}")
    data = path.read_bytes()
    header = []
    pos = 0
    while True:
        nl = data.index(b"\n", pos)
        line = data[pos:nl].decode("ascii")
        pos = nl + 1
        if line == "end":
            break
        header.append(line)
        if len(header) > 10_000:
            raise ContractError(f"{path}: header has no end marker")
    magic = header[0].split()
    if magic[0] != MAGIC or int(magic[1]) != VERSION:
        raise ContractError(f"{path}: not a version {VERSION} checkpoint")
    kind = header[1].split()[1]
    meta = json.loads(header[2][5:])
    shapes = []
    for line in header[3:]:
        parts = line.split()
        shapes.append((parts[1], tuple(int(s) for s in parts[2:])))
    values = np.frombuffer(data, dtype="<f8", offset=pos)
    need = sum(int(np.prod(s)) for _, s in shapes)
    if values.size != need:
        raise ContractError(f"{path}: expected {need} values, found {values.size}")
    arrays = {}
    off = 0
    for name, shape in shapes:
        size = int(np.prod(shape))
        arrays[name] = values[off:off + size].reshape(shape).astype(float)
        off += size
    if kind == "knn":
        return KnnModel(arrays["exemplars"], arrays["labels"].astype(np.int64), meta["k"],
                        meta["window"], meta["n_classes"])
    if kind not in _KINDS:
        raise ContractError(f"{path}: unknown model kind {kind}")
    model = _KINDS[kind].from_meta(meta)
    model.load_params(arrays)
    return model
