"""Evaluation tables: confusion matrices and per-fault MAE reports."""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError
from .faults import FAULT_CLASSES, FaultClass, N_CLASSES
from .ml.metrics import accuracy, per_class_recall

PHASES = ("a", "b", "c")


def write_confusion_csv(cm, path):
    """Rows are true classes, columns predicted classes, both labelled."""
    cm = np.asarray(cm)
    if cm.shape != (N_CLASSES, N_CLASSES):
        raise ContractError(f"confusion matrix must be {N_CLASSES}x{N_CLASSES}")
    names = [FaultClass(c).label for c in range(N_CLASSES)]
    lines = ["true\\pred," + ",".join(names)]
    for i, name in enumerate(names):
        lines.append(name + "," + ",".join(str(int(v)) for v in cm[i]))
    lines.append(f"# accuracy={accuracy(cm):.6f}")
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def read_confusion_csv(path):
    rows = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    return np.array([[int(v) for v in ln.split(",")[1:]] for ln in rows[1:]], dtype=np.int64)


def recall_table(cm):
    rec = per_class_recall(cm)
    return {FaultClass(c).label: float(rec[c]) for c in range(N_CLASSES)}


@dataclass
class MaeReport:
    """MAE per scenario, fault class and phase.

    ``emitted[scenario]`` and ``conventional[scenario]`` are ``(11, 3)``
    arrays indexed by fault class code; NaN marks a class absent from the
    scenario.
    """

    emitted: dict = field(default_factory=dict)
    conventional: dict = field(default_factory=dict)

    def add(self, scenario, episodes_emitted, episodes_conv):
        e = np.full((len(FAULT_CLASSES), 3), np.nan)
        c = np.full((len(FAULT_CLASSES), 3), np.nan)
        for (row, v), (_, u) in zip(episodes_emitted, episodes_conv):
            e[int(row.fault)] = v
            c[int(row.fault)] = u
        self.emitted[scenario] = e
        self.conventional[scenario] = c

    @property
    def scenarios(self):
        return list(self.emitted)

    def average(self, scenario, which="emitted"):
        table = (self.emitted if which == "emitted" else self.conventional)[scenario]
        return float(np.nanmean(table))

    def phase_averages(self, scenario):
        return np.nanmean(self.emitted[scenario], axis=0)

    def to_csv(self, path):
        lines = ["scenario,fault,mae_a,mae_b,mae_c,conv_a,conv_b,conv_c"]
        for sc in self.scenarios:
            for cls in FAULT_CLASSES:
                e = self.emitted[sc][int(cls)]
                c = self.conventional[sc][int(cls)]
                vals = ",".join(f"{v:.6f}" for v in np.concatenate([e, c]))
                lines.append(f"{sc},{cls.label},{vals}")
            avg = np.nanmean(self.emitted[sc], axis=0)
            cavg = np.nanmean(self.conventional[sc], axis=0)
            vals = ",".join(f"{v:.6f}" for v in np.concatenate([avg, cavg]))
            lines.append(f"{sc},average,{vals}")
        Path(path).write_text("\n".join(lines) + "\n")
        return Path(path)

    @classmethod
    def from_csv(cls, path):
        rep = cls()
        for ln in Path(path).read_text().splitlines()[1:]:
            sc, fault, *vals = ln.split(",")
            if fault == "average":
                continue
            v = np.array([float(x) for x in vals])
            if sc not in rep.emitted:
                rep.emitted[sc] = np.full((len(FAULT_CLASSES), 3), np.nan)
                rep.conventional[sc] = np.full((len(FAULT_CLASSES), 3), np.nan)
            k = int(FaultClass.parse(fault))
            rep.emitted[sc][k] = v[:3]
            rep.conventional[sc][k] = v[3:]
        return rep

    def format_table(self):
        """Text table with one row per fault and a column per scenario and phase."""
        scs = self.scenarios
        head = "fault    " + "  ".join(f"{sc + ' ' + ph:>14}" for sc in scs for ph in PHASES)
        out = [head]
        for cls in FAULT_CLASSES:
            cells = [self.emitted[sc][int(cls)][j] for sc in scs for j in range(3)]
            out.append(f"{cls.label:<8} " + "  ".join(f"{v:14.4f}" for v in cells))
        cells = [self.phase_averages(sc)[j] for sc in scs for j in range(3)]
        out.append("average  " + "  ".join(f"{v:14.4f}" for v in cells))
        return "\n".join(out)
