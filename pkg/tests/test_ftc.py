import numpy as np
import pytest

from derfdd.dataset import run_scenario
from derfdd.errors import ConfigurationError, ContractError
from derfdd.faults import FaultClass, FaultSpec, ScenarioSchedule, scenario_schedules
from derfdd.ftc import (NORMAL, SOURCE_LSTM, SOURCE_MLP, FtcModels, detection_overlap,
                        episode_mae, episode_rows, fault_reference, ftc_init, ftc_step,
                        knn_feature, read_ftc_csv, run_closed_loop, write_ftc_csv)
from derfdd.ml import KnnModel, LstmModel, MlpModel


def _stub_models(code, lookback=20, window=20):
    """Tiny models whose classifier always answers ``code``."""
    rng = np.random.default_rng(0)
    knn = KnnModel(rng.normal(size=(5, 3 * window)), np.full(5, code), k=5, window=window)
    return FtcModels(LstmModel(hidden=(4, 4), lookback=lookback, seed=1), knn,
                     MlpModel((6, 8, 3), seed=2))


def test_init_bounds_and_determinism():
    a, b = ftc_init(5), ftc_init(5)
    assert a.ring.shape == (20, 9), f"{a.ring.shape}"
    assert np.array_equal(a.ring, b.ring), "same seed differs"
    assert not np.array_equal(a.ring, ftc_init(6).ring), "seeds agree"
    assert np.all(np.abs(a.ring[-1, 6:9]) <= 1.0), "initial reference out of range"
    assert np.all(a.ring[:-1] == 0) and np.all(a.ring[-1, :6] == 0), "ring not empty"
    assert a.accepted == NORMAL and not a.correcting, "initial class"


def test_knn_feature_layout():
    hist = np.arange(60, dtype=float).reshape(20, 3)
    f = knn_feature(hist, np.array([-1.0, -2.0, -3.0]), 20)
    assert f.shape == (60,), f"{f.shape}"
    assert np.array_equal(f[:57], hist[1:].ravel()) and np.array_equal(f[57:], [-1, -2, -3])
    assert np.array_equal(knn_feature(hist, np.ones(3), 1), np.ones(3)), "window of one"


def test_fault_class_switches_to_corrector_after_confirmation(rng):
    m = _stub_models(int(FaultClass.AG))
    s = ftc_init(0)
    v_g, i_inv = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
    classes = []
    for k in range(4):
        out, cls, s = ftc_step(s, v_g, i_inv, m, confirm=3)
        classes.append(cls)
    assert classes == [NORMAL, NORMAL, int(FaultClass.AG), int(FaultClass.AG)], f"{classes}"
    assert np.array_equal(out, m.mlp.predict(np.concatenate([v_g, i_inv]))), "not MLP output"
    assert np.array_equal(s.ring[-1, 6:9], out), "emitted value not pushed"
    assert np.array_equal(s.ring[-1, :3], v_g), "grid voltage not pushed"


def test_normal_class_emits_clipped_prediction(rng):
    m = _stub_models(NORMAL)
    s = ftc_init(1)
    ring = s.ring.copy()
    out, cls, s = ftc_step(s, np.zeros(3), np.zeros(3), m)
    ref = np.clip(m.lstm.predict(ring), -1, 1)
    assert cls == NORMAL and np.array_equal(out, ref), f"{out} vs {ref}"


def test_step_rejects_bad_shapes():
    m = _stub_models(NORMAL)
    with pytest.raises(ContractError):
        ftc_step(ftc_init(0), np.zeros(2), np.zeros(3), m)
    with pytest.raises(ContractError):
        ftc_step(ftc_init(0, 10), np.zeros(3), np.zeros(3), m)


def test_models_check():
    m = _stub_models(NORMAL)
    m.knn = KnnModel(np.zeros((5, 7)), np.zeros(5, int), window=2)
    with pytest.raises(ContractError):
        m.check()


def test_shadow_run_on_fault_free_operation(small_models):
    sched = ScenarioSchedule((), 0.2, "quiet")
    tr = run_closed_loop(sched, models=small_models, drive="conventional", duration=0.2)
    assert len(tr) == 4000, f"{len(tr)} rows"
    err = float(np.mean(np.abs(tr.v_star - tr.v_conv)))
    assert err < 0.05, f"normal-operation MAE {err:.4f}"
    assert np.all(np.abs(tr.v_star) <= 1.0), "emitted reference out of range"
    # the branch that emitted each sample matches the accepted class
    assert np.array_equal(tr.source == SOURCE_MLP, tr.fault_class != NORMAL), "source flag"
    assert np.all((tr.source == SOURCE_LSTM) | (tr.source == SOURCE_MLP)), "source values"


def test_shadow_run_detects_and_is_deterministic(small_models):
    sched = scenario_schedules()["scenario-1"]
    a = run_closed_loop(sched, models=small_models, drive="conventional", duration=1.3, seed=2)
    b = run_closed_loop(sched, models=small_models, drive="conventional", duration=1.3, seed=2)
    assert np.array_equal(a.v_star, b.v_star), "emitted references differ"
    assert np.array_equal(a.fault_class, b.fault_class), "classes differ"
    # balanced faults with and without ground give identical waveforms, so
    # only the other classes are held to a detection threshold here
    symmetric = (FaultClass.ABC, FaultClass.ABCG)
    ep = [(r, f) for r, f in detection_overlap(a, sched.truncated(1.3))
          if not np.isnan(f) and r.fault not in symmetric]
    assert ep and all(f > 0.8 for _, f in ep), f"{[(r.fault.label, f) for r, f in ep]}"


def test_sequential_and_batched_shadow_paths_agree(small_models):
    sched = ScenarioSchedule((), 0.01)
    tr = run_closed_loop(sched, models=small_models, drive="conventional", duration=0.01, seed=4)
    conv = run_scenario(sched, sample_period=50e-6, duration=0.01, seed=4)
    s = ftc_init(4)
    for k in range(len(conv)):
        out, cls, s = ftc_step(s, conv.v_g[k], conv.i_inv[k], small_models)
        s.ring[-1, 6:9] = conv.v_star[k]
        assert np.allclose(out, tr.v_star[k], atol=1e-12), f"row {k}"
        assert cls == tr.fault_class[k], f"class at row {k}"


def test_emitted_drive_is_bounded(small_models):
    sched = ScenarioSchedule((), 0.02)
    tr = run_closed_loop(sched, models=small_models, drive="emitted", duration=0.02,
                         ftc_warmup=0.0)
    assert len(tr) == 400 and np.all(np.abs(tr.v_star) <= 1.0), "emitted out of range"
    assert np.all(np.isfinite(tr.i_inv)), "plant state blew up"


def test_unknown_drive_and_missing_models(small_models):
    with pytest.raises(ConfigurationError):
        run_closed_loop(ScenarioSchedule((), 0.01), models=small_models, drive="other")
    with pytest.raises(ContractError):
        run_closed_loop(ScenarioSchedule((), 0.01))


def test_episode_helpers():
    sched = ScenarioSchedule.from_rows([FaultSpec(FaultClass.AG, 0.001, 0.002, 0.08, 0.08),
                                        FaultSpec(FaultClass.AB, 0.003, 0.004, 0.1)], 0.005)
    t = np.arange(100) * 50e-6
    rows = episode_rows(sched, t)
    assert [len(i) for _, i in rows] == [20, 20], f"{[len(i) for _, i in rows]}"
    ref = np.zeros((100, 3))
    v = np.zeros((100, 3))
    v[rows[0][1]] = [0.1, 0.2, 0.3]
    maes = episode_mae(v, ref, sched, t)
    assert np.allclose(maes[0][1], [0.1, 0.2, 0.3]) and np.allclose(maes[1][1], 0), f"{maes}"


def test_fault_reference_ignores_faults():
    sched = scenario_schedules()["scenario-1"]
    ref = fault_reference(sched, duration=0.5)
    assert np.all(ref.labels == NORMAL), "reference carries fault labels"
    plain = run_scenario(ScenarioSchedule((), 0.5), duration=0.5, sample_period=50e-6)
    assert np.allclose(ref.v_star, plain.v_star), "reference differs from fault-free run"


def test_csv_round_trip(tmp_path, small_models):
    tr = run_closed_loop(ScenarioSchedule((), 0.005), models=small_models,
                         drive="conventional", duration=0.005)
    write_ftc_csv(tr, tmp_path / "f.csv")
    back = read_ftc_csv(tmp_path / "f.csv")
    assert np.array_equal(back.v_star, tr.v_star) and np.array_equal(back.source, tr.source)
    assert back.drive == "conventional", f"{back.drive}"
