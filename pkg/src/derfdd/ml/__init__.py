"""Hand-written learning stack: LSTM predictor, KNN classifier, MLP
corrector, Adam and the training loop that drives them."""
from .adam import AdamState, TrainConfig, adam_step, lstm_config, mlp_config
from .knn import KnnModel
from .lstm import LstmModel
from .metrics import accuracy, confusion_matrix, mae, mse, per_class_recall
from .mlp import MlpModel
from .training import train_lstm, train_mlp

__all__ = [
    "AdamState", "TrainConfig", "adam_step", "lstm_config", "mlp_config",
    "KnnModel", "LstmModel", "MlpModel", "accuracy", "confusion_matrix", "mae",
    "mse", "per_class_recall", "train_lstm", "train_mlp",
]
