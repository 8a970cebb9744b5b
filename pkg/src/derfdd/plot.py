"""Static SVG waveform plots."""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
# fixed element ids and no timestamp keep repeated runs byte-identical
matplotlib.rcParams["svg.hashsalt"] = "derfdd"
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import RangeError  # noqa: E402

PHASES = ("a", "b", "c")


def _window(n, start, count):
    if start < 0 or count < 1 or start >= n:
        raise RangeError(f"sample window [{start}, {start + count}) outside trace of {n} rows")
    return slice(start, min(n, start + count))


def plot_correction(tr, out_dir, start=0, count=4000, stem="ftc"):
    """One SVG per phase comparing the uncorrected reference against the
    emitted one, with the detected-fault span shaded.  Returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sl = _window(len(tr.t), start, count)
    idx = np.arange(sl.start, sl.stop)
    active = tr.fault_class[sl] != 11
    paths = []
    for j, ph in enumerate(PHASES):
        fig, ax = plt.subplots(figsize=(8, 3))
        ax.plot(idx, tr.v_conv[sl, j], lw=1.0, label="conventional (faulted)")
        ax.plot(idx, tr.v_star[sl, j], lw=1.0, label="emitted (corrected)")
        if active.any():
            ax.fill_between(idx, -1, 1, where=active, color="0.85", step="mid",
                            label="fault detected")
        ax.set_ylim(-1.05, 1.05)
        ax.set_xlabel("sample")
        ax.set_ylabel(f"v* phase {ph} (pu)")
        ax.legend(loc="upper right", fontsize=7)
        fig.tight_layout()
        p = out_dir / f"{stem}_phase_{ph}.svg"
        fig.savefig(p, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(p)
    return paths


def plot_trace(trace, out_dir, start=0, count=4000, stem="trace"):
    """One SVG per phase of a recorded trace: grid voltage, inverter
    current and reference in per unit."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sl = _window(len(trace.t), start, count)
    idx = np.arange(sl.start, sl.stop)
    paths = []
    for j, ph in enumerate(PHASES):
        fig, ax = plt.subplots(figsize=(8, 3))
        ax.plot(idx, trace.v_g[sl, j], lw=1.0, label="v_g")
        ax.plot(idx, trace.i_inv[sl, j], lw=1.0, label="i_inv")
        ax.plot(idx, trace.v_star[sl, j], lw=1.0, label="v*")
        ax.set_ylim(-1.05, 1.05)
        ax.set_xlabel("sample")
        ax.set_ylabel(f"phase {ph} (pu)")
        ax.legend(loc="upper right", fontsize=7)
        fig.tight_layout()
        p = out_dir / f"{stem}_phase_{ph}.svg"
        fig.savefig(p, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(p)
    return paths
