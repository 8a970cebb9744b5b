import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def train_trace_50us():
    """The training schedule recorded at the 50 us control rate."""
    from derfdd.dataset import run_scenario
    from derfdd.faults import TABLE1_TRAIN
    return run_scenario(TABLE1_TRAIN, sample_period=50e-6)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_models(train_trace_50us):
    """Reduced-size predictor, classifier and corrector trained on the
    50 us training trace (every 8th window, a few epochs)."""
    from derfdd.dataset import make_windows, split_train_val
    from derfdd.ftc import FtcModels
    from derfdd.ml import KnnModel, TrainConfig, train_lstm, train_mlp
    d = make_windows(train_trace_50us, 20, 1)
    a, b = split_train_val(d, 0.7, 0)
    sa = a.subset(np.arange(0, len(a), 8))
    sb = b.subset(np.arange(0, len(b), 8))
    lstm, _ = train_lstm(sa, sb, TrainConfig(learning_rate=2e-3, max_epochs=6), hidden=(16, 16))
    knn = KnnModel.fit(a.target_windows(20), a.labels, k=5, window=20, cap=20_000)
    na, nb = a.filter_labels(11), b.filter_labels(11)
    mlp, _ = train_mlp(na.subset(np.arange(0, len(na), 4)), nb,
                       TrainConfig(learning_rate=1e-3, batch_size=16, max_epochs=5))
    return FtcModels(lstm, knn, mlp)


# one summary line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
