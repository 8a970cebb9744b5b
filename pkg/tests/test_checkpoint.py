import numpy as np
import pytest

from derfdd.errors import MissingArtifactError
from derfdd.ml import KnnModel, LstmModel, MlpModel, checkpoint


def test_lstm_round_trip(tmp_path, rng):
    m = LstmModel(hidden=(3, 4), lookback=6, seed=3)
    m.epochs = 7
    checkpoint.save(m, tmp_path / "m.ckpt")
    back = checkpoint.load(tmp_path / "m.ckpt")
    assert isinstance(back, LstmModel) and back.epochs == 7, "type or meta"
    x = rng.normal(size=(2, 6, 9))
    assert np.array_equal(back.forward(x)[0], m.forward(x)[0]), "predictions differ"


def test_mlp_and_knn_round_trip(tmp_path, rng):
    m = MlpModel((6, 5, 3), seed=1)
    checkpoint.save(m, tmp_path / "mlp.ckpt")
    assert np.array_equal(checkpoint.load(tmp_path / "mlp.ckpt").get_flat(), m.get_flat())
    k = KnnModel(rng.normal(size=(20, 6)), rng.integers(0, 12, 20), k=3, window=2)
    checkpoint.save(k, tmp_path / "knn.ckpt")
    back = checkpoint.load(tmp_path / "knn.ckpt")
    assert np.array_equal(back.exemplars, k.exemplars), "exemplars"
    assert np.array_equal(back.labels, k.labels) and back.k == 3, "labels or k"


def test_missing_file_names_producer(tmp_path):
    with pytest.raises(MissingArtifactError, match="derfdd train"):
        checkpoint.load(tmp_path / "nope.ckpt", producer="derfdd train")
    with pytest.raises(FileNotFoundError):
        checkpoint.load(tmp_path / "nope.ckpt")


def test_header_is_readable(tmp_path):
    checkpoint.save(MlpModel((6, 3)), tmp_path / "m.ckpt")
    head = (tmp_path / "m.ckpt").read_bytes().split(b"end\n")[0].decode()
    assert head.startswith("derfdd-checkpoint 1\nkind mlp\n"), head
