"""Scenario simulation, per-unit recording, sliding windows and data splits."""
from dataclasses import dataclass, field
import io
import logging
import math
from pathlib import Path

import numpy as np

from . import kernels
from .circuit import CircuitParams
from .control import ControllerGains
from .errors import ConfigurationError, ContractError, EmptyDatasetError, SimulationError
from .faults import FaultClass, ScenarioSchedule, fault_index_at, labels_at, pcc_matrices

log = logging.getLogger(__name__)

CHANNELS = ("v_g_a", "v_g_b", "v_g_c", "i_inv_a", "i_inv_b", "i_inv_c",
            "v_star_a", "v_star_b", "v_star_c")
N_CHANNELS = len(CHANNELS)
LOOKBACK = 20


def per_unit(x, base):
    """Scale by ``base`` and clamp to [-1, 1].

    Returns ``(values, n_clipped)``.
    """
    if not base > 0:
        raise ConfigurationError(f"per-unit base must be > 0, got {base}")
    y = np.asarray(x, dtype=float) / base
    clipped = np.clip(y, -1.0, 1.0)
    return clipped, int(np.count_nonzero(clipped != y))


@dataclass
class RecordedTrace:
    """Per-unit signals recorded once per sample period.

    ``physical`` keeps the unscaled quantities (volts/amps) for analysis.
    """

    sample_period: float
    t: np.ndarray
    v_g: np.ndarray
    i_inv: np.ndarray
    v_star: np.ndarray
    labels: np.ndarray
    v_base: float
    i_base: float
    seed: int = 0
    schedule: str = ""
    clip_count: int = 0
    n_saturated: int = 0
    physical: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.t)

    @property
    def channels(self):
        """``(n, 9)`` array in :data:`CHANNELS` order."""
        return np.concatenate([self.v_g, self.i_inv, self.v_star], axis=1)

    def slice(self, start, stop):
        phys = {k: v[start:stop] for k, v in self.physical.items()}
        return RecordedTrace(self.sample_period, self.t[start:stop], self.v_g[start:stop],
                             self.i_inv[start:stop], self.v_star[start:stop],
                             self.labels[start:stop], self.v_base, self.i_base, self.seed,
                             self.schedule, 0, 0, phys)


def default_bases(p, gains):
    """Phase-peak grid voltage and twice the current setpoint magnitude."""
    return p.v_phase_peak, 2.0 * gains.current_ref_magnitude


def _ratio(period, dt, what):
    n = int(round(period / dt))
    if n < 1 or abs(n * dt - period) > 1e-9 * period:
        raise ConfigurationError(f"{what} {period} must be an integer multiple of dt={dt}")
    return n


def packed_params(p):
    cp = np.zeros(9)
    cp[kernels.CP_R1] = p.r1
    cp[kernels.CP_R2] = p.r2
    cp[kernels.CP_L1] = p.l1
    cp[kernels.CP_L2] = p.l2
    cp[kernels.CP_C] = p.c
    cp[kernels.CP_VDC] = p.vdc
    cp[kernels.CP_OMEGA] = p.omega
    cp[kernels.CP_VPK] = p.v_phase_peak
    cp[kernels.CP_FSW] = p.f_sw
    return cp


def network_matrices(sched, p, disable_faults=False):
    """Stacked PCC matrices; index 0 is the healthy network, index k+1
    belongs to ``sched.faults[k]``."""
    specs = [None] + ([] if disable_faults else list(sched.faults))
    mats = [pcc_matrices(s, p) for s in specs]
    return (np.ascontiguousarray([m[0] for m in mats]),
            np.ascontiguousarray([m[1] for m in mats]))


def integrator_dt(sample_period, switched, dt=None):
    if dt is not None:
        return dt
    return min(sample_period, 1e-6 if switched else 5e-6)


class ScenarioSimulator:
    """Plant plus conventional controller on a fixed integrator grid.

    Holds the packed kernel inputs so repeated runs (and the FTC loop)
    avoid rebuilding them.
    """

    def __init__(self, sched, p=None, gains=None, sample_period=5e-6, dt=None,
                 switched=False, disable_faults=False):
        self.sched = sched
        self.p = p or CircuitParams()
        self.gains = gains or ControllerGains()
        if not sample_period > 0:
            raise ConfigurationError("sample period must be > 0")
        self.sample_period = float(sample_period)
        self.dt = integrator_dt(min(self.sample_period, self.gains.control_period), switched, dt)
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be > 0, got {self.dt}")
        if switched and self.dt > 1.0 / (10.0 * self.p.f_sw) * (1 + 1e-9):
            raise ConfigurationError("switched model needs dt <= 1/(10 f_sw)")
        self.rec_every = _ratio(self.sample_period, self.dt, "sample period")
        self.ctrl_every = _ratio(self.gains.control_period, self.dt, "control period")
        self.switched = bool(switched)
        self.disable_faults = disable_faults
        self.amats, self.bmats = network_matrices(sched, self.p, disable_faults)
        self.cp = packed_params(self.p)
        self.gp = self.gains.packed(self.p)

    def initial_state(self, t0):
        x = np.zeros(9)
        cs = np.zeros(5)
        cs[kernels.CS_THETA] = (self.p.omega * t0) % (2 * math.pi)
        cs[kernels.CS_OMEGA] = self.p.omega
        return x, cs

    def _run(self, x, cs, t0, fault_idx, rec_every):
        n = len(fault_idx)
        rec = [np.zeros((n, 3)) for _ in range(5)]
        n_sat, bad = kernels.simulate_closed_loop(
            x, cs, t0, n, rec_every, self.ctrl_every, self.dt, fault_idx, self.amats,
            self.bmats, self.cp, self.gp, self.switched, *rec)
        if bad >= 0:
            raise SimulationError(
                f"non-finite state at sample {bad} (t={t0 + bad * rec_every * self.dt:.6g} s)",
                step=int(bad))
        return rec, n_sat

    def warm_state(self, warmup, t_end=0.0):
        """State after ``warmup`` seconds of fault-free operation ending at
        ``t_end``, aligned so a controller update falls on ``t_end``."""
        block = self.ctrl_every * self.rec_every // math.gcd(self.ctrl_every, self.rec_every)
        n_blocks = int(math.ceil(warmup / (block * self.dt) - 1e-9))
        t0 = t_end - n_blocks * block * self.dt
        x, cs = self.initial_state(t0)
        if n_blocks:
            self._run(x, cs, t0, np.full(n_blocks, -1, dtype=np.int64), block)
        return x, cs

    def fault_indices(self, times):
        if self.disable_faults:
            return np.full(len(times), -1, dtype=np.int64)
        return fault_index_at(times, self.sched)

    def record(self, duration, warmup=0.1):
        n = int(round(duration / self.sample_period))
        times = np.arange(n) * self.sample_period
        x, cs = self.warm_state(warmup)
        rec, n_sat = self._run(x, cs, 0.0, self.fault_indices(times), self.rec_every)
        keys = ("v_pcc", "i_l", "i_g", "m", "v_src")
        return times, dict(zip(keys, rec)), n_sat


def run_scenario(sched, p=None, sample_period=5e-6, duration=None, *, gains=None, dt=None,
                 switched=False, warmup=0.1, seed=0, v_base=None, i_base=None,
                 noise_std=0.0, disable_faults=False):
    """Simulate ``sched`` under the conventional controller and record one
    row per sample period.

    Rows cover ``t = k * sample_period`` for ``k < round(duration / T)``.
    The plant starts from a fault-free warm-up so row 0 is in steady state.
    """
    p = p or CircuitParams()
    gains = gains or ControllerGains()
    if duration is None:
        duration = sched.duration
    if duration < 0:
        raise ConfigurationError("duration must be >= 0")
    if duration > sched.duration:
        sched = ScenarioSchedule(sched.faults, duration, sched.name)
    vb, ib = default_bases(p, gains)
    v_base = vb if v_base is None else v_base
    i_base = ib if i_base is None else i_base
    sim = ScenarioSimulator(sched, p, gains, sample_period, dt, switched, disable_faults)
    times, phys, n_sat = sim.record(duration, warmup)
    v_pcc, i_l = phys["v_pcc"], phys["i_l"]
    if noise_std > 0:
        rng = np.random.default_rng(seed)
        v_pcc = v_pcc + rng.normal(0.0, noise_std * v_base, v_pcc.shape)
        i_l = i_l + rng.normal(0.0, noise_std * i_base, i_l.shape)
    v_g, c1 = per_unit(v_pcc, v_base)
    i_inv, c2 = per_unit(i_l, i_base)
    if disable_faults:
        labels = np.full(len(times), int(FaultClass.NORMAL), dtype=np.int8)
    else:
        labels = labels_at(times, sched)
    trace = RecordedTrace(sample_period, times, v_g, i_inv, phys["m"].copy(), labels,
                          v_base, i_base, seed, sched.name, c1 + c2, n_sat, phys)
    log.info("simulated %s: %d rows, %d clipped, %d saturated", sched.name, len(times),
             c1 + c2, n_sat)
    return trace


@dataclass
class Dataset:
    """Sliding windows over a trace.

    Window ``i`` covers rows ``starts[i] .. starts[i]+p-1``; its target is
    ``v_star`` at row ``starts[i]+p`` and its label that row's class.
    """

    trace: RecordedTrace
    starts: np.ndarray
    p: int = LOOKBACK
    stride: int = 1

    def __len__(self):
        return len(self.starts)

    @property
    def seed(self):
        return self.trace.seed

    @property
    def target_index(self):
        return self.starts + self.p

    @property
    def labels(self):
        return self.trace.labels[self.target_index]

    @property
    def targets(self):
        return self.trace.v_star[self.target_index]

    def inputs(self, sel=None):
        """``(m, p, 9)`` window inputs, optionally for a subset of windows."""
        starts = self.starts if sel is None else self.starts[sel]
        ch = self._channels()
        return ch[starts[:, None] + np.arange(self.p)[None, :]]

    def last_inputs(self, sel=None):
        """Channels of each window's final row (the current sample)."""
        starts = self.starts if sel is None else self.starts[sel]
        return self._channels()[starts + self.p - 1]

    def next_inputs(self, sel=None):
        """Channels at each window's target row."""
        starts = self.starts if sel is None else self.starts[sel]
        return self._channels()[starts + self.p]

    def target_windows(self, w, sel=None):
        """The ``w`` most recent ``v_star`` values up to and including each
        target, flattened to ``(m, 3w)``."""
        tgt = self.target_index if sel is None else self.target_index[sel]
        if w > self.p + 1:
            raise ContractError(f"feature window {w} longer than p+1={self.p + 1}")
        rows = tgt[:, None] + np.arange(-w + 1, 1)[None, :]
        return self.trace.v_star[rows].reshape(len(tgt), 3 * w)

    def _channels(self):
        ch = getattr(self, "_ch", None)
        if ch is None:
            ch = self.trace.channels
            self._ch = ch
        return ch

    def subset(self, idx):
        d = Dataset(self.trace, self.starts[np.asarray(idx)], self.p, self.stride)
        d._ch = self._channels()
        return d

    def filter_labels(self, cls):
        return self.subset(np.flatnonzero(self.labels == int(cls)))


def count_windows(length, p=LOOKBACK, stride=1):
    if length <= p:
        return 0
    return (length - p - 1) // stride + 1


def make_windows(trace, p=LOOKBACK, stride=1):
    if p < 1 or stride < 1:
        raise ConfigurationError("p and stride must be >= 1")
    if len(trace) < p + 1:
        raise EmptyDatasetError(f"trace of length {len(trace)} too short for lookback {p}")
    return Dataset(trace, np.arange(0, len(trace) - p, stride, dtype=np.int64), p, stride)


def split_train_val(d, fraction=0.70, seed=0, chronological=False):
    """Disjoint train/validation partition of the windows."""
    if not 0 < fraction < 1:
        raise ConfigurationError(f"fraction must be in (0, 1), got {fraction}")
    n = len(d)
    n_train = int(round(fraction * n))
    order = np.arange(n) if chronological else np.random.default_rng(seed).permutation(n)
    tr, va = np.sort(order[:n_train]), np.sort(order[n_train:])
    return d.subset(tr), d.subset(va)


def kfold(d, k=10, seed=0):
    """``k`` (train_idx, val_idx) pairs; validation folds partition the
    windows and differ in size by at most one."""
    n = d if isinstance(d, (int, np.integer)) else len(d)
    if k < 2:
        raise ConfigurationError("k must be >= 2")
    if n < k:
        raise ConfigurationError(f"dataset of {n} windows cannot be split into {k} folds")
    folds = np.array_split(np.random.default_rng(seed).permutation(n), k)
    out = []
    for i, val in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        out.append((np.sort(train), np.sort(val)))
    return out


# --- CSV files -------------------------------------------------------------

TRACE_COLUMNS = ("t",) + CHANNELS + ("label",)


def _header(meta):
    return ",".join(TRACE_COLUMNS) + " # " + " ".join(f"{k}={v}" for k, v in meta.items())


def trace_meta(trace):
    return {"sample_period": repr(trace.sample_period), "v_base": repr(trace.v_base),
            "i_base": repr(trace.i_base), "seed": trace.seed, "schedule": trace.schedule or "-"}


def write_trace_csv(trace, path, extra=None):
    """One header line (columns, then ``# key=value`` metadata), then rows."""
    meta = trace_meta(trace)
    meta.update(extra or {})
    data = np.column_stack([trace.t, trace.channels])
    buf = io.StringIO()
    buf.write(_header(meta) + "\n")
    if len(trace):
        full = np.column_stack([data, trace.labels.astype(float)])
        np.savetxt(buf, full, fmt=["%.17g"] * data.shape[1] + ["%d"], delimiter=",")
    Path(path).write_text(buf.getvalue())


def read_trace_csv(path):
    """Inverse of :func:`write_trace_csv`; returns ``(trace, meta)``."""
    text = Path(path).read_text()
    first, _, body = text.partition("\n")
    cols, _, meta_txt = first.partition(" # ")
    if tuple(cols.split(",")) != TRACE_COLUMNS:
        raise ContractError(f"{path}: unexpected columns {cols!r}")
    meta = dict(kv.split("=", 1) for kv in meta_txt.split())
    if body.strip():
        arr = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
    else:
        arr = np.zeros((0, len(TRACE_COLUMNS)))
    sched = meta.get("schedule", "-")
    trace = RecordedTrace(float(meta["sample_period"]), arr[:, 0], arr[:, 1:4].copy(),
                          arr[:, 4:7].copy(), arr[:, 7:10].copy(), arr[:, 10].astype(np.int8),
                          float(meta["v_base"]), float(meta["i_base"]), int(meta.get("seed", 0)),
                          "" if sched == "-" else sched)
    return trace, meta


def write_dataset_csv(d, path):
    write_trace_csv(d.trace, path, {"p": d.p, "stride": d.stride})


def read_dataset_csv(path):
    trace, meta = read_trace_csv(path)
    return make_windows(trace, int(meta.get("p", LOOKBACK)), int(meta.get("stride", 1)))
