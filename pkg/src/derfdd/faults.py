"""Short-circuit fault classes, the resistive fault network at the PCC, and
fault schedules (including the built-in training and test schedules)."""
from dataclasses import dataclass, replace
import enum
import math
from pathlib import Path

import numpy as np

from .errors import RangeError, ScheduleError


class FaultClass(enum.IntEnum):
    AG = 0
    BG = 1
    CG = 2
    AB = 3
    BC = 4
    CA = 5
    ABG = 6
    BCG = 7
    CAG = 8
    ABC = 9
    ABCG = 10
    NORMAL = 11

    @property
    def phases(self):
        """Indices of the faulted phases (empty for NORMAL)."""
        if self is FaultClass.NORMAL:
            return ()
        letters = self.name.rstrip("G") if self.name != "ABCG" else "ABC"
        return tuple(sorted("ABC".index(ch) for ch in letters))

    @property
    def grounded(self):
        return self is not FaultClass.NORMAL and self.name.endswith("G")

    @property
    def label(self):
        """Dashed lowercase name, e.g. ``a-b-g``."""
        if self is FaultClass.NORMAL:
            return "normal"
        return "-".join(ch.lower() for ch in self.name)

    @classmethod
    def parse(cls, text):
        key = text.strip().replace("-", "").replace("_", "").upper()
        try:
            return cls[key]
        except KeyError:
            raise ScheduleError(f"unknown fault class {text!r}") from None


FAULT_CLASSES = tuple(c for c in FaultClass if c is not FaultClass.NORMAL)
N_CLASSES = len(FaultClass)


@dataclass(frozen=True)
class FaultSpec:
    """One fault event: class, active interval ``[t_start, t_end)`` and
    the phase-to-node and node-to-ground resistances (ohms)."""

    fault: FaultClass
    t_start: float
    t_end: float
    r_phase: float | None = None
    r_ground: float | None = None

    def validate(self):
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)):
            raise ScheduleError(f"non-finite interval in {self}")
        if not self.t_start < self.t_end:
            raise ScheduleError(f"t_start must precede t_end in {self}")
        if self.fault is FaultClass.NORMAL:
            if self.r_phase is not None or self.r_ground is not None:
                raise ScheduleError("NORMAL events carry no resistances")
            return self
        if self.r_phase is None or not self.r_phase > 0:
            raise ScheduleError(f"{self.fault.label} needs r_phase > 0, got {self.r_phase}")
        if self.fault.grounded:
            if self.r_ground is None or not self.r_ground > 0:
                raise ScheduleError(f"{self.fault.label} needs r_ground > 0, got {self.r_ground}")
        elif self.r_ground is not None:
            raise ScheduleError(f"{self.fault.label} is ungrounded but has r_ground")
        return self


@dataclass(frozen=True)
class ScenarioSchedule:
    """Disjoint, time-ordered fault events over ``[0, duration]``.

    ``rows`` keeps the events as originally tabulated when they had to be
    split to remove overlaps (see :func:`resolve_overlaps`); otherwise it
    equals ``faults``.
    """

    faults: tuple
    duration: float
    name: str = ""
    rows: tuple = None

    def __post_init__(self):
        faults = tuple(self.faults)
        object.__setattr__(self, "faults", faults)
        object.__setattr__(self, "rows", faults if self.rows is None else tuple(self.rows))
        for f in faults:
            f.validate()
        for a, b in zip(faults, faults[1:]):
            if b.t_start < a.t_start:
                raise ScheduleError("schedule must be sorted by t_start")
            if b.t_start < a.t_end:
                raise ScheduleError(f"overlapping faults {a.fault.label} and {b.fault.label}")
        if self.duration < 0:
            raise ScheduleError("duration must be >= 0")
        if faults and self.duration < faults[-1].t_end:
            raise ScheduleError("duration shorter than the last fault")

    def without_faults(self):
        """Same horizon, no fault events (the fault-free reference run)."""
        return ScenarioSchedule((), self.duration, self.name + "+nofault")

    def truncated(self, duration):
        kept = tuple(f for f in self.rows if f.t_end <= duration)
        return ScenarioSchedule.from_rows(kept, duration, self.name)

    @classmethod
    def from_rows(cls, rows, duration, name=""):
        """Build a schedule from possibly overlapping rows."""
        rows = tuple(sorted(rows, key=lambda f: (f.t_start, f.t_end)))
        for f in rows:
            f.validate()
        return cls(resolve_overlaps(rows), duration, name, rows)

    def episodes(self):
        """``(row, segments)`` pairs: each row with the disjoint pieces of
        the timeline in which it is the active fault."""
        out = []
        for row in self.rows:
            segs = [f for f in self.faults if f.fault is row.fault
                    and f.r_phase == row.r_phase and f.r_ground == row.r_ground
                    and row.t_start <= f.t_start and f.t_end <= row.t_end]
            out.append((row, segs))
        return out


def resolve_overlaps(rows):
    """Split overlapping rows into disjoint events.

    Where intervals overlap, the fault that started later is the one
    active (a fault nested inside another preempts it for its duration).
    """
    cuts = sorted({t for f in rows for t in (f.t_start, f.t_end)})
    events = []
    for a, b in zip(cuts, cuts[1:]):
        live = [f for f in rows if f.t_start <= a and b <= f.t_end]
        if not live:
            continue
        win = max(live, key=lambda f: (f.t_start, -f.t_end))
        if events and events[-1][0] is win and events[-1][2] == a:
            events[-1] = (win, events[-1][1], b)
        else:
            events.append((win, a, b))
    return tuple(replace(f, t_start=a, t_end=b) for f, a, b in events)


@dataclass(frozen=True)
class FaultNetwork:
    """Faulted phases tied through ``r_phase`` to a common node; the node
    goes to ground through ``r_ground`` or floats when that is ``None``."""

    phases: tuple = ()
    r_phase: float | None = None
    r_ground: float | None = None

    @property
    def empty(self):
        return not self.phases


def fault_admittance(spec):
    """Describe the shunt network a fault connects at the PCC."""
    if spec is None:
        return FaultNetwork()
    spec.validate()
    if spec.fault is FaultClass.NORMAL:
        return FaultNetwork()
    return FaultNetwork(spec.fault.phases, spec.r_phase, spec.r_ground)


def fault_conductance(network):
    """3x3 conductance matrix of the fault network with the common node
    eliminated, so that fault currents out of the PCC are ``G @ v_pcc``."""
    g = np.zeros((3, 3))
    if network.empty:
        return g
    gp = 1.0 / network.r_phase
    gg = 0.0 if network.r_ground is None else 1.0 / network.r_ground
    idx = list(network.phases)
    denom = len(idx) * gp + gg
    for j in idx:
        g[j, j] += gp
        for k in idx:
            g[j, k] -= gp * gp / denom
    return g


def fault_currents(v_pcc, network):
    """Branch currents from each PCC phase into the fault network, and the
    common-node voltage."""
    v = np.asarray(v_pcc, dtype=float)
    if network.empty:
        return np.zeros(3), 0.0
    gp = 1.0 / network.r_phase
    gg = 0.0 if network.r_ground is None else 1.0 / network.r_ground
    idx = list(network.phases)
    v_node = gp * v[idx].sum() / (len(idx) * gp + gg)
    i = np.zeros(3)
    i[idx] = gp * (v[idx] - v_node)
    return i, v_node


def pcc_matrices(spec, p):
    """Matrices ``(A, B)`` with ``v_pcc = A @ v_src + B @ i_g``.

    Nodal equations at the three PCC nodes: grid-current injection equals
    the current into the grid Thevenin branch plus the fault current.
    """
    g_th = 1.0 / p.grid_thevenin_r
    y = g_th * np.eye(3) + fault_conductance(fault_admittance(spec))
    y_inv = np.linalg.inv(y)
    return g_th * y_inv, y_inv


def solve_pcc_voltage(v_src, i_g, spec, p):
    """PCC phase voltages for a source, injected grid current and fault."""
    v_src = np.asarray(v_src, dtype=float)
    i_g = np.asarray(i_g, dtype=float)
    g_th = 1.0 / p.grid_thevenin_r
    y = g_th * np.eye(3) + fault_conductance(fault_admittance(spec))
    return np.linalg.solve(y, g_th * v_src + i_g)


def active_fault(t, sched):
    """The FaultSpec active at ``t`` or ``None``."""
    for f in sched.faults:
        if f.t_start <= t < f.t_end:
            return f
    return None


def label_at(t, sched):
    if not 0.0 <= t <= sched.duration:
        raise RangeError(f"t={t} outside [0, {sched.duration}]")
    f = active_fault(t, sched)
    return FaultClass.NORMAL if f is None else f.fault


def fault_index_at(times, sched):
    """Per-time index into ``sched.faults`` (``-1`` where no fault is active)."""
    times = np.asarray(times, dtype=float)
    idx = np.full(times.shape, -1, dtype=np.int64)
    for k, f in enumerate(sched.faults):
        idx[(times >= f.t_start) & (times < f.t_end)] = k
    return idx


def labels_at(times, sched):
    """Vectorised :func:`label_at` returning integer class codes."""
    idx = fault_index_at(times, sched)
    codes = np.array([int(f.fault) for f in sched.faults] + [int(FaultClass.NORMAL)])
    return codes[idx].astype(np.int8)


# Rows of the reference fault table: class, start, end, neutral-ground
# column, phase-neutral column ("None" for a dash).
_TRAIN_ROWS = [
    ("a-g", 0.4, 0.5, 0.08, 0.08),
    ("b-g", 0.6, 0.7, 0.08, 0.08),
    ("c-g", 0.85, 0.95, 0.08, 0.08),
    ("a-b", 1.05, 1.15, 0.3, None),
    ("b-c", 1.4, 1.6, 0.1, None),
    ("c-a", 1.7, 1.85, 0.6, None),
    ("a-b-g", 2.0, 2.1, 0.08, 0.08),
    ("b-c-g", 2.5, 2.8, 0.1, 0.1),
    ("c-a-g", 3.0, 3.15, 0.5, 0.5),
    ("a-b-c", 3.5, 3.7, 0.3, None),
    ("a-b-c-g", 3.85, 3.95, 0.3, 0.3),
]
_TEST_ROWS = [
    ("a-g", 1.0, 1.22, 0.3, 0.3),
    ("b-g", 2.62, 2.75, 0.2, 0.2),
    ("c-g", 0.32, 0.5, 0.1, 0.1),
    ("a-b", 1.12, 1.19, 0.07, None),
    ("b-c", 2.22, 2.3, 0.3, None),
    ("c-a", 1.89, 2.17, 0.1, None),
    ("a-b-g", 0.1, 0.18, 0.25, 0.25),
    ("b-c-g", 2.41, 2.5, 0.3, 0.3),
    ("c-a-g", 3.7, 3.82, 0.08, 0.08),
    ("a-b-c", 1.7, 1.81, 0.1, None),
    ("a-b-c-g", 0.72, 0.8, 0.5, 0.5),
]
TABLE_DURATION = 4.0


def _spec_from_row(name, start, end, col_ng, col_pn):
    fault = FaultClass.parse(name)
    if fault.grounded:
        return FaultSpec(fault, start, end, r_phase=col_pn, r_ground=col_ng)
    # Ungrounded rows carry a single value: the per-phase resistance.
    return FaultSpec(fault, start, end, r_phase=col_ng)


def _schedule_from_rows(rows, name):
    return ScenarioSchedule.from_rows([_spec_from_row(*r) for r in rows], TABLE_DURATION, name)


TABLE1_TRAIN = _schedule_from_rows(_TRAIN_ROWS, "table1-train")
TABLE1_TEST = _schedule_from_rows(_TEST_ROWS, "table1-test")
BUILTIN_SCHEDULES = {"table1-train": TABLE1_TRAIN, "table1-test": TABLE1_TEST}


def with_resistances_from(sched, donor, name=None):
    """Copy each fault's resistances from the same class in ``donor``.

    Applied to the test schedule with the training schedule as donor, this
    yields the scenario where only timing and ordering changed.
    """
    by_class = {f.fault: f for f in donor.rows}
    rows = []
    for f in sched.rows:
        src = by_class.get(f.fault)
        if src is None:
            raise ScheduleError(f"donor schedule has no {f.fault.label} fault")
        rows.append(replace(f, r_phase=src.r_phase, r_ground=src.r_ground))
    return ScenarioSchedule.from_rows(rows, sched.duration, name or sched.name + "+donor")


def scenario_schedules():
    """Scenario 1 (test timing, training resistances) and scenario 2 (test
    timing and resistances)."""
    s1 = with_resistances_from(TABLE1_TEST, TABLE1_TRAIN, "scenario-1")
    s2 = ScenarioSchedule(TABLE1_TEST.faults, TABLE1_TEST.duration, "scenario-2", TABLE1_TEST.rows)
    return {"scenario-1": s1, "scenario-2": s2}


def _fmt_r(r):
    return "-" if r is None else repr(float(r))


def format_schedule(sched):
    lines = [f"# {sched.name or 'schedule'}", f"# duration {sched.duration!r}",
             "# class t_start t_end r_phase r_ground"]
    for f in sched.rows:
        lines.append(f"{f.fault.label} {f.t_start!r} {f.t_end!r} "
                     f"{_fmt_r(f.r_phase)} {_fmt_r(f.r_ground)}")
    return "\n".join(lines) + "\n"


def parse_schedule(text, duration=None, name=""):
    """Parse the line-oriented schedule format.

    Each non-comment line is ``class t_start t_end r_phase r_ground`` with
    ``-`` for an absent resistance.  A ``# duration X`` comment sets the
    horizon; otherwise ``duration`` or the last fault end is used.
    """
    specs = []
    declared = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "duration":
                declared = float(parts[1])
            continue
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ScheduleError(f"line {lineno}: expected 5 fields, got {len(parts)}")
        try:
            fault = FaultClass.parse(parts[0])
            t0, t1 = float(parts[1]), float(parts[2])
            rp = None if parts[3] == "-" else float(parts[3])
            rg = None if parts[4] == "-" else float(parts[4])
        except ValueError as exc:
            raise ScheduleError(f"line {lineno}: {exc}") from None
        specs.append(FaultSpec(fault, t0, t1, rp, rg))
    if duration is None:
        duration = declared
    if duration is None:
        duration = max((f.t_end for f in specs), default=0.0)
    return ScenarioSchedule.from_rows(specs, float(duration), name)


def load_schedule(ref):
    """Resolve a built-in schedule name or read a schedule file."""
    if isinstance(ref, ScenarioSchedule):
        return ref
    ref = str(ref)
    if ref in BUILTIN_SCHEDULES:
        return BUILTIN_SCHEDULES[ref]
    scen = scenario_schedules()
    if ref in scen:
        return scen[ref]
    path = Path(ref)
    if not path.exists():
        raise ScheduleError(f"no built-in schedule or file named {ref!r}")
    return parse_schedule(path.read_text(), name=path.stem)
