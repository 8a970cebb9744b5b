"""Fault detection and fault-tolerant control loop.

Every sample the LSTM predicts the next reference from the last ``p``
rows, the KNN classifies the predicted reference window, and the emitted
reference is either the prediction (NORMAL) or the MLP correction computed
from the present grid voltage and inverter current (any fault class).
"""
from dataclasses import dataclass, field
import logging
import math
from pathlib import Path

import numpy as np

from . import kernels
from .circuit import CircuitParams
from .control import ControllerGains
from .dataset import LOOKBACK, ScenarioSimulator, default_bases, run_scenario
from .errors import ConfigurationError, ContractError, SimulationError
from .faults import FaultClass, labels_at
from .ml.metrics import mae

log = logging.getLogger(__name__)

NORMAL = int(FaultClass.NORMAL)
SOURCE_LSTM = 0
SOURCE_MLP = 1


@dataclass
class FtcModels:
    lstm: object
    knn: object
    mlp: object

    def check(self):
        if self.lstm.n_in != 9 or self.lstm.n_out != 3:
            raise ContractError("predictor must map 9 channels to 3 outputs")
        if self.mlp.sizes[0] != 6 or self.mlp.sizes[-1] != 3:
            raise ContractError("corrector must map 6 inputs to 3 outputs")
        if self.knn.dim != 3 * self.knn.window:
            raise ContractError("classifier feature size must be 3 * window")
        if self.knn.window > self.lstm.lookback + 1:
            raise ContractError("classifier window longer than lookback + 1")


@dataclass
class FtcState:
    """Ring of the last ``p`` rows (v_g, i_inv, v_star in pu), the last
    prediction and the debounced classification."""

    ring: np.ndarray
    filled: int = 0
    last_pred: np.ndarray = field(default_factory=lambda: np.zeros(3))
    raw_class: int = NORMAL
    accepted: int = NORMAL
    candidate: int = NORMAL
    count: int = 0

    @property
    def correcting(self):
        return self.accepted != NORMAL

    def push(self, v_g, i_inv, v_star):
        self.ring[:-1] = self.ring[1:]
        self.ring[-1, 0:3] = v_g
        self.ring[-1, 3:6] = i_inv
        self.ring[-1, 6:9] = v_star
        self.filled = min(self.filled + 1, len(self.ring))

    def copy(self):
        return FtcState(self.ring.copy(), self.filled, self.last_pred.copy(), self.raw_class,
                        self.accepted, self.candidate, self.count)


def ftc_init(seed=0, p=LOOKBACK):
    """Empty ring whose newest reference entry is drawn from U[-1, 1]."""
    rng = np.random.default_rng(seed)
    ring = np.zeros((p, 9))
    ring[-1, 6:9] = rng.uniform(-1.0, 1.0, 3)
    return FtcState(ring, 0, ring[-1, 6:9].copy())


def knn_feature(v_star_hist, pred, w):
    """Flattened window of the ``w - 1`` latest references and the prediction."""
    if w == 1:
        return np.asarray(pred, dtype=float).copy()
    return np.concatenate([np.asarray(v_star_hist)[-(w - 1):].ravel(), pred])


def ftc_step(s, v_g, i_inv, models, confirm=3):
    """Advance the pipeline by one sample.

    Returns ``(v_star, fault_class, s)``; ``s`` is updated in place and its
    ring receives the emitted reference.
    """
    v_g = np.asarray(v_g, dtype=float)
    i_inv = np.asarray(i_inv, dtype=float)
    if v_g.shape != (3,) or i_inv.shape != (3,):
        raise ContractError("grid voltage and inverter current must be three-phase")
    if s.ring.shape != (models.lstm.lookback, 9):
        raise ContractError("ring length does not match the predictor lookback")
    pred = np.clip(models.lstm.forward(s.ring)[0], -1.0, 1.0)
    feat = knn_feature(s.ring[:, 6:9], pred, models.knn.window)
    raw, _ = models.knn.classify(feat)
    s.raw_class = raw
    s.last_pred = pred
    if raw == s.accepted:
        s.candidate, s.count = s.accepted, 0
    elif raw == s.candidate:
        s.count += 1
    else:
        s.candidate, s.count = raw, 1
    if s.candidate != s.accepted and s.count >= confirm:
        s.accepted, s.count = s.candidate, 0
    if s.accepted == NORMAL:
        out = pred
    else:
        out = models.mlp.forward(np.concatenate([v_g, i_inv]))[0]
    s.push(v_g, i_inv, out)
    return out, s.accepted, s


@dataclass
class FtcTrace:
    """Closed-loop record; classes are int codes and ``source`` marks the
    emitting branch (0 prediction, 1 correction)."""

    sample_period: float
    t: np.ndarray
    v_g: np.ndarray
    i_inv: np.ndarray
    v_star: np.ndarray
    predicted: np.ndarray
    raw_class: np.ndarray
    fault_class: np.ndarray
    true_class: np.ndarray
    source: np.ndarray
    v_conv: np.ndarray = None
    schedule: str = ""
    drive: str = "emitted"
    seed: int = 0

    def __len__(self):
        return len(self.t)


def run_closed_loop(sched, p=None, models=None, seed=0, sample_period=50e-6, *, gains=None,
                    drive="emitted", confirm=3, warmup=0.1, ftc_warmup=0.05, duration=None,
                    dt=None):
    """Simulate ``sched`` with the pipeline in the loop.

    ``drive="emitted"`` lets the emitted reference drive the inverter.
    ``drive="conventional"`` keeps the conventional controller on the plant
    and evaluates the pipeline alongside it, so the ring holds the
    conventional reference.  The pipeline starts ``ftc_warmup`` seconds
    before t=0 from the seeded initial state; only rows from t=0 are kept.
    """
    if models is None:
        raise ContractError("run_closed_loop needs trained models")
    models.check()
    p = p or CircuitParams()
    gains = gains or ControllerGains()
    duration = sched.duration if duration is None else duration
    if drive == "emitted":
        return _run_emitted(sched, p, models, seed, sample_period, gains, confirm, warmup,
                            ftc_warmup, duration, dt)
    if drive == "conventional":
        return _run_shadow(sched, p, models, seed, sample_period, gains, confirm, warmup,
                           duration, dt)
    raise ConfigurationError(f"unknown drive mode {drive!r}")


def _empty_trace(n, sample_period, sched, drive, seed):
    return FtcTrace(sample_period, np.arange(n) * sample_period, np.zeros((n, 3)),
                    np.zeros((n, 3)), np.zeros((n, 3)), np.zeros((n, 3)),
                    np.zeros(n, np.int8), np.zeros(n, np.int8), np.zeros(n, np.int8),
                    np.zeros(n, np.int8), np.zeros((n, 3)), sched.name, drive, seed)


def _run_emitted(sched, p, models, seed, sample_period, gains, confirm, warmup, ftc_warmup,
                 duration, dt, handover=True):
    n = int(round(duration / sample_period))
    n_pre = int(math.ceil(ftc_warmup / sample_period - 1e-9))
    sim = ScenarioSimulator(sched, p, gains, sample_period, dt)
    lb = models.lstm.lookback
    t_first = -n_pre * sample_period
    v_base, i_base = default_bases(p, gains)
    s = ftc_init(seed, lb)
    if handover:
        # the conventional controller fills the ring with real rows, then
        # hands the plant over to the pipeline at t_first
        x, cs = sim.warm_state(warmup, t_end=t_first - lb * sample_period)
        rec, _ = sim._run(x, cs, t_first - lb * sample_period, np.full(lb, -1, np.int64),
                          sim.rec_every)
        for j in range(lb):
            s.push(np.clip(rec[0][j] / v_base, -1, 1), np.clip(rec[1][j] / i_base, -1, 1),
                   rec[3][j])
    else:
        x, _ = sim.warm_state(warmup, t_end=t_first)
    tr = _empty_trace(n, sample_period, sched, "emitted", seed)
    tr.true_class[:] = labels_at(tr.t, sched)
    fidx = sim.fault_indices(tr.t)
    work = np.zeros((9, 9))
    vsrc = np.zeros(3)
    vpcc = np.zeros(3)
    for k in range(-n_pre, n):
        t = k * sample_period
        f = fidx[k] + 1 if k >= 0 else 0
        amat, bmat = sim.amats[f], sim.bmats[f]
        kernels.pcc_voltage(x, t, amat, bmat, sim.cp, vsrc, vpcc)
        v_g = np.clip(vpcc / v_base, -1.0, 1.0)
        i_inv = np.clip(x[:3] / i_base, -1.0, 1.0)
        out, cls, s = ftc_step(s, v_g, i_inv, models, confirm)
        if k >= 0:
            tr.v_g[k], tr.i_inv[k], tr.v_star[k], tr.predicted[k] = v_g, i_inv, out, s.last_pred
            tr.raw_class[k], tr.fault_class[k] = s.raw_class, cls
            tr.source[k] = SOURCE_MLP if cls != NORMAL else SOURCE_LSTM
        kernels.advance(x, t, out, sim.rec_every, sim.dt, amat, bmat, sim.cp, False, work)
        if not np.all(np.isfinite(x)):
            raise SimulationError(f"non-finite state at sample {k} (t={t:.6g} s)", step=k)
    conv = run_scenario(sched, p, sample_period, duration, gains=gains, dt=dt, warmup=warmup,
                        seed=seed)
    tr.v_conv[:] = conv.v_star
    return tr


def _run_shadow(sched, p, models, seed, sample_period, gains, confirm, warmup, duration, dt):
    conv = run_scenario(sched, p, sample_period, duration, gains=gains, dt=dt, warmup=warmup,
                        seed=seed)
    n = len(conv)
    tr = _empty_trace(n, sample_period, sched, "conventional", seed)
    tr.v_g[:], tr.i_inv[:], tr.true_class[:] = conv.v_g, conv.i_inv, conv.labels
    tr.v_conv[:] = conv.v_star
    ch = conv.channels
    lb = models.lstm.lookback
    w = models.knn.window
    # warm-up rows run through the sequential path from the seeded state
    s = ftc_init(seed, lb)
    head = min(lb, n)
    for k in range(head):
        out, cls, s = ftc_step(s, conv.v_g[k], conv.i_inv[k], models, confirm)
        s.ring[-1, 6:9] = conv.v_star[k]
        tr.v_star[k], tr.predicted[k] = out, s.last_pred
        tr.raw_class[k], tr.fault_class[k] = s.raw_class, cls
    if n > lb:
        rows = np.arange(lb, n)
        win = ch[rows[:, None] - lb + np.arange(lb)[None, :]]
        pred = np.clip(models.lstm.predict(win), -1.0, 1.0)
        if w > 1:
            hist = conv.v_star[rows[:, None] - (w - 1) + np.arange(w - 1)[None, :]]
            feat = np.concatenate([hist.reshape(len(rows), -1), pred], axis=1)
        else:
            feat = pred
        raw, _ = models.knn.classify_batch(feat)
        acc = np.empty(len(rows), dtype=np.int64)
        kernels.debounce(raw, s.accepted, s.candidate, s.count, confirm, acc)
        corr = models.mlp.predict(np.concatenate([conv.v_g[rows], conv.i_inv[rows]], axis=1))
        active = acc != NORMAL
        tr.v_star[rows] = np.where(active[:, None], corr, pred)
        tr.predicted[rows] = pred
        tr.raw_class[rows], tr.fault_class[rows] = raw, acc
    tr.source[:] = np.where(tr.fault_class != NORMAL, SOURCE_MLP, SOURCE_LSTM)
    return tr


def fault_reference(sched, p=None, sample_period=50e-6, *, gains=None, duration=None, dt=None,
                    warmup=0.1):
    """Conventional-controller trace of the same scenario with every fault
    removed; the baseline that MAE is measured against."""
    return run_scenario(sched, p, sample_period, duration, gains=gains, dt=dt, warmup=warmup,
                        disable_faults=True)


def episode_rows(sched, t):
    """Per schedule row, the sample indices where that row is the active
    fault.  Returns a list of ``(FaultSpec, index array)``."""
    t = np.asarray(t)
    out = []
    for row, segs in sched.episodes():
        mask = np.zeros(len(t), dtype=bool)
        for f in segs:
            mask |= (t >= f.t_start) & (t < f.t_end)
        out.append((row, np.flatnonzero(mask)))
    return out


def episode_mae(v_star, reference, sched, t):
    """Per-episode, per-phase MAE of ``v_star`` against ``reference``.

    Returns a list of ``(FaultSpec, mae (3,))``; phases are NaN for an
    episode with no samples.
    """
    out = []
    for row, idx in episode_rows(sched, t):
        if len(idx) == 0:
            out.append((row, np.full(3, np.nan)))
        else:
            out.append((row, mae(v_star[idx], reference[idx], axis=0)))
    return out


def detection_overlap(trace, sched):
    """Fraction of each episode's samples classified as its true class."""
    out = []
    for row, idx in episode_rows(sched, trace.t):
        frac = float(np.mean(trace.fault_class[idx] == int(row.fault))) if len(idx) else np.nan
        out.append((row, frac))
    return out


# --- CSV ------------------------------------------------------------------

FTC_COLUMNS = ("t", "v_g_a", "v_g_b", "v_g_c", "i_inv_a", "i_inv_b", "i_inv_c",
               "v_star_a", "v_star_b", "v_star_c", "pred_a", "pred_b", "pred_c",
               "v_conv_a", "v_conv_b", "v_conv_c", "raw_class", "fault_class",
               "true_class", "source")


def write_ftc_csv(tr, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {"sample_period": repr(tr.sample_period), "schedule": tr.schedule,
            "drive": tr.drive, "seed": tr.seed}
    header = ",".join(FTC_COLUMNS) + " # " + " ".join(f"{k}={v}" for k, v in meta.items())
    data = np.column_stack([tr.t, tr.v_g, tr.i_inv, tr.v_star, tr.predicted, tr.v_conv,
                            tr.raw_class, tr.fault_class, tr.true_class, tr.source])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        if len(data):
            np.savetxt(fh, data, fmt=["%.17g"] * 16 + ["%d"] * 4, delimiter=",")
    return path


def read_ftc_csv(path):
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
    cols, _, tail = header.partition(" # ")
    if tuple(cols.split(",")) != FTC_COLUMNS:
        raise ContractError(f"{path}: not a closed-loop trace file")
    meta = dict(item.split("=", 1) for item in tail.split())
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = np.zeros((0, len(FTC_COLUMNS)))
    i8 = lambda c: data[:, c].astype(np.int8)
    return FtcTrace(float(meta["sample_period"]), data[:, 0], data[:, 1:4], data[:, 4:7],
                    data[:, 7:10], data[:, 10:13], i8(16), i8(17), i8(18), i8(19),
                    data[:, 13:16], meta.get("schedule", ""), meta.get("drive", ""),
                    int(meta.get("seed", 0)))
