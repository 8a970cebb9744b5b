import numpy as np
import pytest

from derfdd.cli import main
from derfdd.dataset import read_dataset_csv, read_trace_csv
from derfdd.ftc import read_ftc_csv
from derfdd.report import MaeReport, read_confusion_csv

TINY = """
[scenario]
duration = 1.3
[dataset]
stride = 4
[lstm]
hidden = 8, 8
max_epochs = 1
train_stride = 10
learning_rate = 2e-3
[mlp]
hidden = 8, 8
max_epochs = 1
[knn]
max_exemplars = 2000
"""


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "tiny.ini").write_text(TINY)
    return d


def _run(run_dir, *args):
    return main(list(args) + ["--config", str(run_dir / "tiny.ini"), "--out", str(run_dir)])


def test_missing_artifact_names_producer(tmp_path, capsys):
    code = main(["train", "--out", str(tmp_path)])
    err = capsys.readouterr().err
    assert code == 2, f"exit code {code}"
    assert "dataset_train.csv" in err and "derfdd gen-dataset" in err, err


def test_bad_config_exits_cleanly(tmp_path, capsys):
    (tmp_path / "bad.ini").write_text("[knn]\nk = 0\n")
    assert main(["simulate", "--config", str(tmp_path / "bad.ini")]) == 2, "exit code"
    assert capsys.readouterr().err.startswith("error:"), "message prefix"


def test_end_to_end(run_dir, capsys):
    assert _run(run_dir, "simulate", "--schedule", "table1-test") == 0
    trace, _ = read_trace_csv(run_dir / "trace.csv")
    assert len(trace) == 26_000, f"{len(trace)} rows"

    assert _run(run_dir, "gen-dataset") == 0
    d = read_dataset_csv(run_dir / "dataset_train.csv")
    assert len(d) == (26_000 - 21) // 4 + 1, f"{len(d)} windows"

    assert _run(run_dir, "train") == 0
    for name in ("lstm.ckpt", "knn.ckpt", "mlp.ckpt", "lstm_log.csv", "mlp_log.csv"):
        assert (run_dir / name).exists(), f"{name} missing"

    assert _run(run_dir, "eval") == 0
    cm = read_confusion_csv(run_dir / "confusion.csv")
    assert cm.shape == (12, 12) and cm.sum() > 0, "confusion matrix"
    rep = MaeReport.from_csv(run_dir / "mae_report.csv")
    assert rep.scenarios == ["scenario-1", "scenario-2"], f"{rep.scenarios}"

    assert _run(run_dir, "run-ftc") == 0
    tr = read_ftc_csv(run_dir / "ftc_trace.csv")
    assert len(tr) == 26_000 and np.all(np.abs(tr.v_star) <= 1), "closed-loop trace"

    assert _run(run_dir, "plot", "--count", "500") == 0
    svgs = sorted((run_dir / "plots").glob("*.svg"))
    assert len(svgs) == 3, f"{svgs}"
    first = svgs[0].read_bytes()
    assert _run(run_dir, "plot", "--count", "500") == 0
    assert svgs[0].read_bytes() == first, "SVG output not reproducible"
    out = capsys.readouterr().out
    assert "eval: accuracy=" in out and "run-ftc: wrote" in out, out
